#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""Tests of the composition decoder: shapes, analytic gradients and population statistics."""

import numpy as np
import pytest

from cvshl import (
    DecoderError,
    DecoderParams,
    PaddedScoreMap,
    PositionScoreMap,
    StaleCacheError,
    decode_batch,
    decode_score_map,
    decoder_backward,
    decoder_forward,
    estimate_population_stats,
    init_params,
    resolve_widths,
)

TINY_WIDTHS = (3, 3, 4, 4, 4)


def test_output_shapes():
    params = init_params(0)
    assert params.k == 5 and params.widths == (8, 8, 16, 32, 25)
    assert isinstance(decode_score_map(np.zeros((14, 14, 8)), params), PositionScoreMap)
    assert isinstance(decode_score_map(np.zeros((16, 16, 8)), params), PaddedScoreMap)
    maps = decode_batch(np.zeros((3, 16, 16, 8)), params)
    assert len(maps) == 3 and all(m.scores.shape == (7, 7, 25) for m in maps)
    with pytest.raises(DecoderError):
        decode_score_map(np.zeros((15, 15, 8)), params)


def test_input_validation():
    params = init_params(0, TINY_WIDTHS, in_channels=2)
    with pytest.raises(DecoderError):
        decoder_forward(np.zeros((12, 12, 3)), params)
    with pytest.raises(DecoderError):
        decoder_forward(np.zeros((9, 9, 2)), params)
    with pytest.raises(DecoderError):
        decoder_forward(np.full((12, 12, 2), np.nan), params)
    with pytest.raises(DecoderError):
        decoder_forward(np.zeros((12, 12, 2)), params, mode="test")  # type: ignore[arg-type]


def test_init_is_seeded():
    a = init_params(3, TINY_WIDTHS, 2)
    b = init_params(3, TINY_WIDTHS, 2)
    c = init_params(4, TINY_WIDTHS, 2)
    for name, array in a.named_arrays().items():
        np.testing.assert_array_equal(array, b.named_arrays()[name])
    assert not np.array_equal(a.layers[0].kernel, c.layers[0].kernel)
    with pytest.raises(DecoderError):
        init_params(0, (3, 3, 4, 4), 2)
    with pytest.raises(DecoderError):
        init_params(0, (3, 3, 4, 4, 5), 2)


def test_named_arrays_round_trip():
    params = init_params(1, TINY_WIDTHS, 2, batch_norm=False)
    rebuilt = DecoderParams.from_named_arrays(params.named_arrays(), batch_norm=False)
    x = np.random.default_rng(0).standard_normal((12, 12, 2))
    np.testing.assert_array_equal(decoder_forward(x, params)[0], decoder_forward(x, rebuilt)[0])
    arrays = params.named_arrays()
    del arrays["conv2.bias"]
    with pytest.raises(DecoderError):
        DecoderParams.from_named_arrays(arrays)
    assert "conv1.bn.gamma" not in params.trainable_arrays()


def test_resolve_widths():
    assert resolve_widths("full") == (1280, (512, 512, 1024, 2048, 25))
    with pytest.raises(DecoderError):
        resolve_widths("laptop")


@pytest.mark.parametrize("batch_norm", [True, False])
def test_backward_matches_finite_differences(batch_norm: bool):
    """
    Central differences of ``sum(weights * decoder(x))`` agree with the analytic gradient for every trainable array
    and for the input.
    """
    rng = np.random.default_rng(5)
    params = init_params(2, TINY_WIDTHS, in_channels=2, batch_norm=batch_norm)
    x = rng.standard_normal((2, 12, 12, 2))
    out, cache = decoder_forward(x, params, "train")
    weights = rng.standard_normal(out.shape)
    grads, grad_x = decoder_backward(cache, weights)
    assert list(grads) == list(params.trainable_arrays())

    def loss() -> float:
        return float(np.sum(decoder_forward(x, params, "train")[0] * weights))

    eps = 1e-6
    for name, array in params.trainable_arrays().items():
        for index in rng.choice(array.size, size=min(4, array.size), replace=False):
            original = array.flat[index]
            array.flat[index] = original + eps
            plus = loss()
            array.flat[index] = original - eps
            minus = loss()
            array.flat[index] = original
            numeric = (plus - minus) / (2.0 * eps)
            assert np.isclose(numeric, grads[name].flat[index], rtol=1e-4, atol=1e-6), name

    for index in rng.choice(x.size, size=6, replace=False):
        original = x.flat[index]
        x.flat[index] = original + eps
        plus = loss()
        x.flat[index] = original - eps
        minus = loss()
        x.flat[index] = original
        assert np.isclose((plus - minus) / (2.0 * eps), grad_x.flat[index], rtol=1e-4, atol=1e-6)


def test_backward_rejects_stale_caches():
    params = init_params(0, TINY_WIDTHS, 2)
    out, cache = decoder_forward(np.ones((12, 12, 2)) + np.arange(24.0).reshape(12, 2), params, "train")
    assert out.shape == (3, 3, 4)
    params.touch()
    with pytest.raises(StaleCacheError):
        decoder_backward(cache, np.ones_like(out))
    with pytest.raises(StaleCacheError):
        decoder_backward(None, np.ones_like(out))
    _, fresh = decoder_forward(np.random.default_rng(0).standard_normal((12, 12, 2)), params, "train")
    with pytest.raises(DecoderError):
        decoder_backward(fresh, np.ones((2, 2, 4)))


def test_population_stats_reproduce_batch_statistics():
    """
    Once the running statistics are estimated on a batch, eval mode on that batch equals train mode.
    """
    params = init_params(7, TINY_WIDTHS, 2)
    samples = np.random.default_rng(3).standard_normal((4, 12, 12, 2)) * 3.0 + 1.0
    estimate_population_stats(params, samples)
    np.testing.assert_allclose(params.layers[0].running_mean, samples.mean(axis=(0, 1, 2)))
    train_out, _ = decoder_forward(samples, params, "train")
    eval_out, _ = decoder_forward(samples, params, "eval")
    np.testing.assert_allclose(eval_out, train_out, rtol=1e-9, atol=1e-12)
