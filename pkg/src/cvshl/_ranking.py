#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Ranking losses, mini-batch SGD training of the decoder and a synthetic triplet generator.

Training data are triplets of feature tensors: a professionally composed view, a casual one and a random one. The
decoder is trained so that the pooled scores satisfy ``f(professional) > f(casual) > f(random)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from ._decoder import DecoderParams, decoder_backward, decoder_forward, estimate_population_stats
from ._errors import ConfigError, DecoderError, TrainingError
from ._scoremap import DEFAULT_BANDWIDTH, pooling_weights
from .cli._parser import __script_name__

_ranking_logger = logging.getLogger(__script_name__)

CLASS_TAGS: tuple[str, ...] = ("professional", "casual", "random")

LossKind = Literal["triplet", "pairwise"]


# +------------------------------------------------------------------------------------------------------------------+
# | LOSSES
# +------------------------------------------------------------------------------------------------------------------+


def triplet_loss(fp: float, fc: float, fn: float, alpha: float = 0.3) -> float:
    """
    Weighted two-hinge triplet loss ``alpha max(0, fc - fp + 1) + (1 - alpha) max(0, fn - fc + 1)``.

    .. invisible-code-block: python

        from cvshl import triplet_loss

    >>> triplet_loss(2.0, 1.0, 0.0)
    0.0
    >>> round(triplet_loss(0.0, 0.0, 0.0), 12)
    1.0
    >>> round(triplet_loss(0.0, 1.0, 2.0), 12)
    2.0
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"Triplet weight alpha must lie in [0, 1], got {alpha}.")
    return alpha * max(0.0, fc - fp + 1.0) + (1.0 - alpha) * max(0.0, fn - fc + 1.0)


def triplet_loss_gradient(fp: float, fc: float, fn: float, alpha: float = 0.3) -> tuple[float, float, float]:
    """
    Gradient of :func:`triplet_loss` with respect to ``(fp, fc, fn)``; zero is taken at the hinge kinks.
    """
    dfp = dfc = dfn = 0.0
    if fc - fp + 1.0 > 0.0:
        dfp -= alpha
        dfc += alpha
    if fn - fc + 1.0 > 0.0:
        dfc -= 1.0 - alpha
        dfn += 1.0 - alpha
    return dfp, dfc, dfn


def pairwise_loss(fp: float, fn: float) -> float:
    """
    Max-margin loss ``max(0, fn - fp + 1)``.

    .. invisible-code-block: python

        from cvshl import pairwise_loss

    >>> pairwise_loss(2.0, 0.0), pairwise_loss(0.3, 0.3), pairwise_loss(0.0, 0.5)
    (0.0, 1.0, 1.5)
    """
    return max(0.0, fn - fp + 1.0)


def pairwise_loss_gradient(fp: float, fn: float) -> tuple[float, float]:
    return (-1.0, 1.0) if fn - fp + 1.0 > 0.0 else (0.0, 0.0)


def regularised_arrays(params: DecoderParams) -> list[np.ndarray]:
    """
    The arrays under the L2 penalty: every convolution kernel and bias. Normalisation scale and shift are excluded.
    """
    return [array for name, array in params.trainable_arrays().items() if name.endswith((".kernel", ".bias"))]


def total_objective(losses: Iterable[float], params: DecoderParams | Iterable[np.ndarray], lam: float) -> float:
    """
    ``sum(losses) + lam * ||params||^2`` over the regularised arrays of ``params`` (or over the given arrays).

    .. invisible-code-block: python

        import numpy as np
        from cvshl import total_objective

    >>> total_objective([1.0], [np.array([2.0])], lam=0.5)
    3.0
    """
    if lam < 0.0:
        raise ConfigError(f"Regularisation weight must be non-negative, got {lam}.")
    arrays = regularised_arrays(params) if isinstance(params, DecoderParams) else list(params)
    penalty = sum(float(np.sum(np.square(array))) for array in arrays)
    return float(sum(losses)) + lam * penalty


# +------------------------------------------------------------------------------------------------------------------+
# | DATA
# +------------------------------------------------------------------------------------------------------------------+


@dataclass
class Triplet:
    """
    One training example: feature tensors of a professional, a casual and a random view of the same shape.
    ``quality`` holds the planted composition quality of synthetic triplets.
    """

    professional: np.ndarray
    casual: np.ndarray
    random: np.ndarray
    quality: tuple[float, float, float] | None = None

    def __post_init__(self) -> None:
        shapes = {self.professional.shape, self.casual.shape, self.random.shape}
        if len(shapes) != 1:
            raise DecoderError(f"Triplet members differ in shape: {sorted(shapes)}.")

    def members(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.professional, self.casual, self.random


def planted_directions(world_seed: int, channels: int) -> np.ndarray:
    """
    The two orthonormal channel directions of the synthetic world: row 0 carries composition quality, row 1 a cue
    that only casual footage shows.
    """
    if channels < 2:
        raise ConfigError(f"Synthetic features need at least 2 channels, got {channels}.")
    basis, _ = np.linalg.qr(np.random.default_rng(world_seed).standard_normal((channels, 2)))
    return np.ascontiguousarray(basis.T)


_CLASS_MEANS: dict[str, tuple[float, float]] = {
    "professional": (1.0, 0.0),
    "casual": (0.0, 2.0),
    "random": (-1.0, 0.0),
}


def synth_triplets(
    seed: int, n: int, dims: tuple[int, int, int] = (14, 14, 8), noise: float = 1.0, world_seed: int = 0
) -> list[Triplet]:
    """
    Generate ``n`` triplets whose composition quality is planted along a hidden channel direction with class means
    professional > casual > random. Casual views also carry a second, quality-neutral cue. Element noise scales with
    ``noise`` and so does the per-sample jitter of the quality.

    :param seed: Seed of the sample draws; equal seeds give identical data.
    :param n: Number of triplets.
    :param dims: ``(height, width, channels)`` of every tensor.
    :param noise: Noise level; zero makes every triplet separable along the quality direction.
    :param world_seed: Seed of the hidden directions. Held-out sets share it and change ``seed``.
    """
    if n < 1:
        raise ConfigError(f"At least one triplet is required, got {n}.")
    quality_axis, cue_axis = planted_directions(world_seed, dims[2])
    rng = np.random.default_rng(seed)
    triplets = []
    for _ in range(n):
        tensors = []
        qualities = []
        for tag in CLASS_TAGS:
            mean_quality, cue = _CLASS_MEANS[tag]
            quality = mean_quality + 0.1 * noise * float(rng.standard_normal())
            tensors.append(noise * rng.standard_normal(dims) + quality * quality_axis + cue * cue_axis)
            qualities.append(quality)
        triplets.append(Triplet(tensors[0], tensors[1], tensors[2], (qualities[0], qualities[1], qualities[2])))
    return triplets


# +------------------------------------------------------------------------------------------------------------------+
# | TRAINING
# +------------------------------------------------------------------------------------------------------------------+


@dataclass
class TrainConfig:
    """
    SGD settings. ``lr`` may be zero, which freezes the parameters.
    """

    alpha: float = 0.3
    lam: float = 1e-4
    lr: float = 1e-3
    lr_halve_every: int = 8
    batch_size: int = 16
    epochs: int = 50
    seed: int = 0
    h: float = DEFAULT_BANDWIDTH
    loss: LossKind = "triplet"

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}.")
        if self.lr < 0.0 or not math.isfinite(self.lr):
            raise ConfigError(f"Learning rate must be a non-negative number, got {self.lr}.")
        if self.lam < 0.0:
            raise ConfigError(f"lam must be non-negative, got {self.lam}.")
        if self.lr_halve_every < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("lr_halve_every and batch_size must be positive and epochs non-negative.")
        if not self.h > 0.0:
            raise ConfigError(f"Pooling bandwidth must be positive, got {self.h}.")
        if self.loss not in ("triplet", "pairwise"):
            raise ConfigError(f"Unknown loss '{self.loss}'.")

    def learning_rate(self, epoch: int) -> float:
        """
        Learning rate of a zero based epoch: halved every ``lr_halve_every`` epochs.
        """
        return self.lr * 0.5 ** (epoch // self.lr_halve_every)


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    lr: float


@dataclass
class TrainResult:
    params: DecoderParams
    history: list[EpochRecord] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [record.mean_loss for record in self.history]


def pooled_scores(outputs: np.ndarray, h: float = DEFAULT_BANDWIDTH) -> np.ndarray:
    """
    Position pooled scores of a batch of decoder outputs ``(B, k, k, k^2)``.
    """
    return np.einsum("bijc,ijc->b", outputs, pooling_weights(outputs.shape[1], float(h)))


def score_features(params: DecoderParams, features: np.ndarray, h: float = DEFAULT_BANDWIDTH) -> np.ndarray:
    """
    Eval mode composition scores of a ``(N, H, W, C)`` batch of feature tensors.
    """
    outputs, _ = decoder_forward(np.asarray(features), params, "eval")
    return pooled_scores(outputs, h)


def _stack_pools(dataset: Sequence[Triplet]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (
        np.stack([t.professional for t in dataset]),
        np.stack([t.casual for t in dataset]),
        np.stack([t.random for t in dataset]),
    )


def _losses(fp: np.ndarray, fc: np.ndarray, fn: np.ndarray, cfg: TrainConfig) -> list[float]:
    if cfg.loss == "pairwise":
        return [pairwise_loss(p, n) + pairwise_loss(c, n) for p, c, n in zip(fp, fc, fn)]
    return [triplet_loss(p, c, n, cfg.alpha) for p, c, n in zip(fp, fc, fn)]


def _score_gradients(fp: np.ndarray, fc: np.ndarray, fn: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    grads = np.zeros((3, fp.shape[0]))
    for i, (p, c, n) in enumerate(zip(fp, fc, fn)):
        if cfg.loss == "pairwise":
            dp, dn_p = pairwise_loss_gradient(p, n)
            dc, dn_c = pairwise_loss_gradient(c, n)
            grads[:, i] = (dp, dc, dn_p + dn_c)
        else:
            grads[:, i] = triplet_loss_gradient(p, c, n, cfg.alpha)
    return grads.reshape(-1)


def objective_gradient(
    params: DecoderParams, batch: tuple[np.ndarray, np.ndarray, np.ndarray], cfg: TrainConfig
) -> tuple[float, dict[str, np.ndarray]]:
    """
    The training objective of one batch and its gradient for every trainable array. The batch is normalised with its
    own statistics, the losses are summed over its triplets and the L2 penalty covers kernels and biases only.

    :param batch: Stacked professional, casual and random members, ``(B, H, W, C)`` each.
    :return: The objective and the gradients by array name. A non-finite objective comes with no gradients.
    """
    size = batch[0].shape[0]
    outputs, cache = decoder_forward(np.concatenate(batch), params, "train")
    scores = pooled_scores(outputs, cfg.h)
    fp, fc, fn = scores[:size], scores[size : 2 * size], scores[2 * size :]
    objective = total_objective(_losses(fp, fc, fn, cfg), params, cfg.lam)
    if not math.isfinite(objective):
        return objective, {}
    weights = pooling_weights(outputs.shape[1], float(cfg.h))
    upstream = _score_gradients(fp, fc, fn, cfg)[:, np.newaxis, np.newaxis, np.newaxis] * weights
    grads, _ = decoder_backward(cache, upstream)
    for name, array in params.trainable_arrays().items():
        if name.endswith((".kernel", ".bias")):
            grads[name] = grads[name] + 2.0 * cfg.lam * array
    return objective, grads


def _sgd_step(
    params: DecoderParams, batch: tuple[np.ndarray, np.ndarray, np.ndarray], cfg: TrainConfig, lr: float
) -> float:
    objective, grads = objective_gradient(params, batch, cfg)
    if not math.isfinite(objective):
        return objective
    for name, array in params.trainable_arrays().items():
        array -= lr * grads[name]
    params.touch()
    return objective


def mean_loss(params: DecoderParams, dataset: Sequence[Triplet], cfg: TrainConfig) -> float:
    """
    Mean per-triplet loss (without the penalty) in eval mode, with members paired as given.
    """
    pools = _stack_pools(dataset)
    fp, fc, fn = (score_features(params, pool, cfg.h) for pool in pools)
    return float(np.mean(_losses(fp, fc, fn, cfg)))


def train(dataset: Sequence[Triplet], cfg: TrainConfig, init: DecoderParams) -> TrainResult:
    """
    Mini-batch SGD over the triplet set. Every epoch draws a seeded permutation of each class pool and pairs them up
    index by index, so triplets are re-formed by random cross-pairing; the last partial batch is kept. After each
    epoch the population normalisation statistics are re-estimated and the mean loss is recorded.

    :param dataset: Training triplets, all of one shape.
    :param cfg: Training settings.
    :param init: Starting parameters; they are copied, not modified.
    :return: Trained parameters and the per-epoch loss history.
    :raises TrainingError: on an empty dataset or a non-finite loss.
    """
    if len(dataset) == 0:
        raise TrainingError("Cannot train on an empty dataset.")
    params = init.copy()
    pools = _stack_pools(dataset)
    everything = np.concatenate(pools)
    count = pools[0].shape[0]
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult(params)
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate(epoch)
        orders = [rng.permutation(count) for _ in pools]
        for batch_index, start in enumerate(range(0, count, cfg.batch_size)):
            batch = tuple(pool[order[start : start + cfg.batch_size]] for pool, order in zip(pools, orders))
            objective = _sgd_step(params, batch, cfg, lr)  # type: ignore[arg-type]
            if not math.isfinite(objective):
                raise TrainingError(f"Non-finite loss {objective} at epoch {epoch + 1}, batch {batch_index + 1}.")
        estimate_population_stats(params, everything)
        epoch_loss = mean_loss(params, dataset, cfg)
        if not math.isfinite(epoch_loss):
            raise TrainingError(f"Non-finite mean loss {epoch_loss} after epoch {epoch + 1}.")
        result.history.append(EpochRecord(epoch + 1, epoch_loss, lr))
        _ranking_logger.info("epoch %d/%d: mean %s loss %.6f (lr %g)", epoch + 1, cfg.epochs, cfg.loss, epoch_loss, lr)
    return result


def triplet_accuracy(params: DecoderParams, dataset: Sequence[Triplet], h: float = DEFAULT_BANDWIDTH) -> float:
    """
    Fraction of triplets scored in the order ``f(professional) > f(casual) > f(random)``.
    """
    if len(dataset) == 0:
        raise TrainingError("Cannot evaluate an empty dataset.")
    fp, fc, fn = (score_features(params, pool, h) for pool in _stack_pools(dataset))
    return float(np.mean((fp > fc) & (fc > fn)))
