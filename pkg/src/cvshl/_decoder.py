#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
The composition decoder: four 3/3/3/4 valid convolutions and a 1x1 position map layer turning a feature tensor into
a position score map. Every layer normalises its input with batch normalisation before the convolution. The hidden
layers use a leaky ReLU; the position map layer is linear.

Tensors are channel-last, ``(batch, height, width, channels)``, and every stage runs in float64. The spatial size
shrinks by 9 through the stack, so a 14x14 input produces a 5x5 map and a 16x16 (padded) input a 7x7 map.

.. invisible-code-block: python

    import numpy as np
    from cvshl import decoder_forward, init_params

.. code-block:: python

    params = init_params(seed=0, widths=(8, 8, 16, 32, 25), in_channels=8)
    scores, cache = decoder_forward(np.zeros((14, 14, 8)), params, mode="eval")
    assert scores.shape == (5, 5, 25)
    assert cache is None

"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._errors import DecoderError, StaleCacheError
from ._scoremap import PaddedScoreMap, PositionScoreMap
from .cli._parser import __script_name__

_decoder_logger = logging.getLogger(__script_name__)

KERNEL_SIZES: tuple[int, ...] = (3, 3, 3, 4, 1)
LAYER_NAMES: tuple[str, ...] = ("conv1", "conv2", "conv3", "conv4", "pos_map")
SPATIAL_SHRINK = sum(size - 1 for size in KERNEL_SIZES)
LEAKY_SLOPE = 0.01
BN_EPS = 1e-5

WIDTH_PRESETS: dict[str, tuple[int, tuple[int, ...]]] = {
    "desk": (8, (8, 8, 16, 32, 25)),
    "full": (1280, (512, 512, 1024, 2048, 25)),
}
"""
Named ``(input channels, layer widths)`` pairs. ``full`` is the full width stack, ``desk`` keeps the topology at a
fraction of the width.
"""

Mode = Literal["train", "eval"]


@dataclass
class ConvLayer:
    """
    One decoder layer: the batch normalisation of its input and the convolution that follows.

    ``kernel`` has shape ``(size, size, in, out)``. The normalisation arrays are per input channel.
    """

    kernel: np.ndarray
    bias: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray

    @property
    def size(self) -> int:
        return int(self.kernel.shape[0])

    @property
    def in_channels(self) -> int:
        return int(self.kernel.shape[2])

    @property
    def out_channels(self) -> int:
        return int(self.kernel.shape[3])


@dataclass
class DecoderParams:
    """
    All decoder parameters. ``generation`` counts in-place updates so a cached forward pass can tell when it no
    longer matches the parameters.
    """

    layers: list[ConvLayer]
    batch_norm: bool = True
    generation: int = 0

    def __post_init__(self) -> None:
        if len(self.layers) != len(KERNEL_SIZES):
            raise DecoderError(f"Expected {len(KERNEL_SIZES)} layers, got {len(self.layers)}.")
        previous: int | None = None
        for name, size, layer in zip(LAYER_NAMES, KERNEL_SIZES, self.layers):
            if layer.kernel.ndim != 4 or layer.kernel.shape[:2] != (size, size):
                raise DecoderError(f"{name} kernel has shape {layer.kernel.shape}, expected ({size}, {size}, in, out).")
            if previous is not None and layer.in_channels != previous:
                raise DecoderError(f"{name} takes {layer.in_channels} channels but receives {previous}.")
            if layer.bias.shape != (layer.out_channels,):
                raise DecoderError(f"{name} bias has shape {layer.bias.shape}.")
            for bn_name in ("gamma", "beta", "running_mean", "running_var"):
                if getattr(layer, bn_name).shape != (layer.in_channels,):
                    raise DecoderError(f"{name} {bn_name} has shape {getattr(layer, bn_name).shape}.")
            previous = layer.out_channels
        if math.isqrt(self.layers[-1].out_channels) ** 2 != self.layers[-1].out_channels:
            raise DecoderError(f"Position map width {self.layers[-1].out_channels} is not a square.")

    @property
    def in_channels(self) -> int:
        return self.layers[0].in_channels

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(layer.out_channels for layer in self.layers)

    @property
    def k(self) -> int:
        return math.isqrt(self.layers[-1].out_channels)

    def touch(self) -> None:
        """
        Record an in-place update. Caches taken before the call become stale.
        """
        self.generation += 1

    def copy(self) -> DecoderParams:
        return copy.deepcopy(self)

    def named_arrays(self) -> dict[str, np.ndarray]:
        """
        Every parameter array under a stable dotted name, in layer order (the arrays are not copied).
        """
        arrays: dict[str, np.ndarray] = {}
        for name, layer in zip(LAYER_NAMES, self.layers):
            arrays[f"{name}.kernel"] = layer.kernel
            arrays[f"{name}.bias"] = layer.bias
            arrays[f"{name}.bn.gamma"] = layer.gamma
            arrays[f"{name}.bn.beta"] = layer.beta
            arrays[f"{name}.bn.running_mean"] = layer.running_mean
            arrays[f"{name}.bn.running_var"] = layer.running_var
        return arrays

    def trainable_arrays(self) -> dict[str, np.ndarray]:
        return {
            name: array
            for name, array in self.named_arrays().items()
            if not name.endswith(("running_mean", "running_var"))
            and (self.batch_norm or not name.endswith(("bn.gamma", "bn.beta")))
        }

    @classmethod
    def from_named_arrays(cls, arrays: dict[str, np.ndarray], batch_norm: bool = True) -> DecoderParams:
        try:
            layers = [
                ConvLayer(
                    kernel=np.asarray(arrays[f"{name}.kernel"], dtype=np.float64),
                    bias=np.asarray(arrays[f"{name}.bias"], dtype=np.float64),
                    gamma=np.asarray(arrays[f"{name}.bn.gamma"], dtype=np.float64),
                    beta=np.asarray(arrays[f"{name}.bn.beta"], dtype=np.float64),
                    running_mean=np.asarray(arrays[f"{name}.bn.running_mean"], dtype=np.float64),
                    running_var=np.asarray(arrays[f"{name}.bn.running_var"], dtype=np.float64),
                )
                for name in LAYER_NAMES
            ]
        except KeyError as e:
            raise DecoderError(f"Parameter set is missing {e.args[0]}.") from e
        return cls(layers, batch_norm)


def resolve_widths(preset: str) -> tuple[int, tuple[int, ...]]:
    """
    Look up a width preset by name.

    .. invisible-code-block: python

        from cvshl._decoder import resolve_widths

    >>> resolve_widths("desk")
    (8, (8, 8, 16, 32, 25))
    """
    try:
        return WIDTH_PRESETS[preset]
    except KeyError as e:
        raise DecoderError(f"Unknown width preset '{preset}' (known: {', '.join(WIDTH_PRESETS)}).") from e


def init_params(
    seed: int, widths: Iterable[int] = WIDTH_PRESETS["desk"][1], in_channels: int = 8, batch_norm: bool = True
) -> DecoderParams:
    """
    Xavier-uniform kernels, zero biases, unit normalisation scale and zero shift, with running statistics at zero
    mean and unit variance.

    :param seed: Seed of the generator; equal seeds give bit-identical parameters.
    :param widths: Output channels of the five layers; the last must be ``k^2``.
    :param in_channels: Channels of the feature tensor.
    :param batch_norm: Whether the layers normalise their inputs.
    :raises DecoderError: for invalid widths.
    """
    widths = tuple(int(width) for width in widths)
    if len(widths) != len(KERNEL_SIZES) or any(width < 1 for width in widths) or in_channels < 1:
        raise DecoderError(f"Invalid decoder widths {widths} with {in_channels} input channels.")
    rng = np.random.default_rng(seed)
    layers = []
    fan_channels = in_channels
    for size, width in zip(KERNEL_SIZES, widths):
        fan_in = size * size * fan_channels
        fan_out = size * size * width
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        layers.append(
            ConvLayer(
                kernel=rng.uniform(-limit, limit, size=(size, size, fan_channels, width)),
                bias=np.zeros(width),
                gamma=np.ones(fan_channels),
                beta=np.zeros(fan_channels),
                running_mean=np.zeros(fan_channels),
                running_var=np.ones(fan_channels),
            )
        )
        fan_channels = width
    return DecoderParams(layers, batch_norm)


# +------------------------------------------------------------------------------------------------------------------+
# | FORWARD
# +------------------------------------------------------------------------------------------------------------------+


@dataclass
class _LayerCache:
    x_hat: np.ndarray
    inv_std: np.ndarray
    patches: np.ndarray
    pre_activation: np.ndarray


@dataclass
class DecoderCache:
    """
    Activations recorded by a train mode forward pass, consumed by :func:`decoder_backward`.
    """

    params: DecoderParams
    generation: int
    batched: bool
    input_shape: tuple[int, ...]
    layers: list[_LayerCache] = field(default_factory=list)


def _im2col(x: np.ndarray, size: int) -> np.ndarray:
    """
    ``(B, H, W, C)`` to ``(B, H', W', size, size, C)`` patches.
    """
    return sliding_window_view(x, (size, size), axis=(1, 2)).transpose(0, 1, 2, 4, 5, 3)


def _normalise(
    x: np.ndarray, layer: ConvLayer, mode: Mode, batch_norm: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not batch_norm:
        return x, x, np.ones(x.shape[-1])
    if mode == "train":
        mean = x.mean(axis=(0, 1, 2))
        var = x.var(axis=(0, 1, 2))
    else:
        mean = layer.running_mean
        var = layer.running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    x_hat = (x - mean) * inv_std
    return x_hat * layer.gamma + layer.beta, x_hat, inv_std


def _check_input(x: np.ndarray, params: DecoderParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[np.newaxis]
    if x.ndim != 4:
        raise DecoderError(f"Feature tensor must be (H, W, C) or (B, H, W, C), got shape {x.shape}.")
    if x.shape[-1] != params.in_channels:
        raise DecoderError(f"Feature tensor has {x.shape[-1]} channels, decoder expects {params.in_channels}.")
    if x.shape[1] <= SPATIAL_SHRINK or x.shape[2] <= SPATIAL_SHRINK:
        raise DecoderError(f"Feature tensor {x.shape[1]}x{x.shape[2]} is too small for the decoder.")
    if not np.all(np.isfinite(x)):
        raise DecoderError("Feature tensor contains non-finite values.")
    return x


def decoder_forward(
    x: np.ndarray, params: DecoderParams, mode: Mode = "eval"
) -> tuple[np.ndarray, DecoderCache | None]:
    """
    Run the decoder.

    :param x: ``(H, W, C)`` or a batch ``(B, H, W, C)``.
    :param params: Decoder parameters.
    :param mode: ``train`` normalises with batch statistics and records a cache, ``eval`` uses running statistics.
    :return: Score maps ``(H-9, W-9, k^2)`` (batched like ``x``) and the cache, or ``None`` in eval mode.
    :raises DecoderError: on shape mismatches.
    """
    if mode not in ("train", "eval"):
        raise DecoderError(f"Unknown decoder mode '{mode}'.")
    batched = np.ndim(x) == 4
    activation = _check_input(x, params)
    cache = DecoderCache(params, params.generation, batched, activation.shape) if mode == "train" else None
    last = len(params.layers) - 1
    for index, layer in enumerate(params.layers):
        normalised, x_hat, inv_std = _normalise(activation, layer, mode, params.batch_norm)
        patches = _im2col(normalised, layer.size)
        pre_activation = np.tensordot(patches, layer.kernel, axes=([3, 4, 5], [0, 1, 2])) + layer.bias
        if cache is not None:
            cache.layers.append(_LayerCache(x_hat, inv_std, patches, pre_activation))
        if index != last:
            pre_activation = np.where(pre_activation > 0.0, pre_activation, LEAKY_SLOPE * pre_activation)
        activation = pre_activation
    return (activation if batched else activation[0]), cache


# +------------------------------------------------------------------------------------------------------------------+
# | BACKWARD
# +------------------------------------------------------------------------------------------------------------------+


def decoder_backward(cache: DecoderCache | None, upstream: np.ndarray) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """
    Analytic gradients of a scalar with respect to every trainable parameter and the input, given the gradient of
    that scalar with respect to the decoder output.

    :param cache: The cache of a train mode :func:`decoder_forward` call on the current parameters.
    :param upstream: Gradient with respect to the output, shaped like the output.
    :return: Gradients keyed like :meth:`DecoderParams.trainable_arrays` and the input gradient.
    :raises StaleCacheError: if the cache is missing or the parameters changed since the forward pass.
    """
    if cache is None:
        raise StaleCacheError("No cache: backward needs a train mode forward pass.")
    params = cache.params
    if params.generation != cache.generation:
        raise StaleCacheError(
            f"Cache was recorded at parameter generation {cache.generation}, parameters are at {params.generation}."
        )
    grad = np.asarray(upstream, dtype=np.float64)
    if not cache.batched:
        grad = grad[np.newaxis]
    expected = cache.layers[-1].pre_activation.shape
    if grad.shape != expected:
        raise DecoderError(f"Upstream gradient has shape {grad.shape}, expected {expected}.")
    grads: dict[str, np.ndarray] = {}
    last = len(params.layers) - 1
    for index in range(last, -1, -1):
        name = LAYER_NAMES[index]
        layer = params.layers[index]
        record = cache.layers[index]
        if index != last:
            grad = grad * np.where(record.pre_activation > 0.0, 1.0, LEAKY_SLOPE)
        grads[f"{name}.kernel"] = np.tensordot(record.patches, grad, axes=([0, 1, 2], [0, 1, 2]))
        grads[f"{name}.bias"] = grad.sum(axis=(0, 1, 2))
        grad_normalised = _conv_input_gradient(grad, layer.kernel, record.x_hat.shape)
        if params.batch_norm:
            grads[f"{name}.bn.gamma"] = np.sum(grad_normalised * record.x_hat, axis=(0, 1, 2))
            grads[f"{name}.bn.beta"] = grad_normalised.sum(axis=(0, 1, 2))
            grad = _batch_norm_input_gradient(grad_normalised * layer.gamma, record.x_hat, record.inv_std)
        else:
            grad = grad_normalised
    ordered = {name: grads[name] for name in params.trainable_arrays()}
    return ordered, (grad if cache.batched else grad[0])


def _conv_input_gradient(grad: np.ndarray, kernel: np.ndarray, input_shape: tuple[int, ...]) -> np.ndarray:
    size = kernel.shape[0]
    out_h, out_w = grad.shape[1:3]
    result = np.zeros(input_shape)
    for di in range(size):
        for dj in range(size):
            result[:, di : di + out_h, dj : dj + out_w, :] += grad @ kernel[di, dj].T
    return result


def _batch_norm_input_gradient(grad_x_hat: np.ndarray, x_hat: np.ndarray, inv_std: np.ndarray) -> np.ndarray:
    count = x_hat.shape[0] * x_hat.shape[1] * x_hat.shape[2]
    return (inv_std / count) * (
        count * grad_x_hat
        - grad_x_hat.sum(axis=(0, 1, 2))
        - x_hat * np.sum(grad_x_hat * x_hat, axis=(0, 1, 2))
    )


# +------------------------------------------------------------------------------------------------------------------+
# | POPULATION STATISTICS AND INFERENCE
# +------------------------------------------------------------------------------------------------------------------+


def estimate_population_stats(params: DecoderParams, samples: np.ndarray) -> None:
    """
    Set every layer's running statistics to the mean and variance of its input over ``samples``, layer by layer, so
    each layer sees the output of the already re-estimated layers before it.

    :param params: Updated in place.
    :param samples: ``(N, H, W, C)`` feature tensors.
    """
    if not params.batch_norm:
        return
    activation = _check_input(samples, params)
    last = len(params.layers) - 1
    for index, layer in enumerate(params.layers):
        layer.running_mean = activation.mean(axis=(0, 1, 2))
        layer.running_var = activation.var(axis=(0, 1, 2))
        if index == last:
            break
        normalised, _, _ = _normalise(activation, layer, "eval", True)
        pre_activation = np.tensordot(_im2col(normalised, layer.size), layer.kernel, axes=([3, 4, 5], [0, 1, 2]))
        pre_activation += layer.bias
        activation = np.where(pre_activation > 0.0, pre_activation, LEAKY_SLOPE * pre_activation)
    _decoder_logger.debug("Re-estimated population statistics over %d samples.", activation.shape[0])


def decode_score_map(features: np.ndarray, params: DecoderParams) -> PositionScoreMap | PaddedScoreMap:
    """
    Decode one feature tensor in eval mode. A ``(k+9) x (k+9)`` input yields a :class:`PositionScoreMap`, a
    ``(k+11) x (k+11)`` input (features of an enlarged glimpse) a :class:`PaddedScoreMap`.
    """
    scores, _ = decoder_forward(features, params, "eval")
    return _as_score_map(scores, params.k)


def decode_batch(features: np.ndarray, params: DecoderParams) -> list[PositionScoreMap | PaddedScoreMap]:
    """
    Decode a ``(B, H, W, C)`` batch in one eval mode pass.
    """
    scores, _ = decoder_forward(np.asarray(features), params, "eval")
    return [_as_score_map(item, params.k) for item in scores]


def _as_score_map(scores: np.ndarray, k: int) -> PositionScoreMap | PaddedScoreMap:
    if scores.shape[0] == k:
        return PositionScoreMap(scores)
    if scores.shape[0] == k + 2:
        return PaddedScoreMap(scores)
    raise DecoderError(f"Decoder output {scores.shape} is neither a {k}x{k} nor a padded map.")
