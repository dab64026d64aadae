#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
Pipeline configuration: a JSON file carrying ``"version": 1`` overridden by command line flags of the same names.

.. invisible-code-block: python

    from cvshl import PipelineConfig

.. code-block:: python

    config = PipelineConfig.from_sources({"version": 1, "k": 3}, {"epochs": 4})
    assert (config.k, config.epochs) == (3, 4)
    assert config.decoder_widths() == (8, 8, 16, 32, 9)

"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from ._decoder import resolve_widths
from ._errors import ConfigError, DecoderError
from ._features import FEATURE_FAMILIES, PixelStatisticsExtractor, family_layout
from ._ranking import TrainConfig
from ._scoremap import DEFAULT_SCALES, MAX_SCALE, MIN_SCALE
from .cli._parser import __script_name__

_config_logger = logging.getLogger(__script_name__)

__config_version__ = 1
__workspace_env__ = "CVSHL_WORKSPACE"

_PATH_FIELDS = ("manifest", "triplets", "ground_truth", "params", "history", "maps", "plan", "report")


@dataclass
class PipelineConfig:
    """
    Every setting of a pipeline run. Paths are relative to :attr:`workspace` unless absolute.
    """

    k: int = 5
    h: float = 1.0
    scales: tuple[float, ...] = DEFAULT_SCALES
    alpha: float = 0.3
    lam: float = 1e-4
    lr: float = 1e-3
    lr_halve_every: int = 8
    batch_size: int = 16
    epochs: int = 50
    loss: str = "triplet"
    seed: int = 0
    widths: str = "desk"
    in_channels: int | None = None
    features: str = "fusion"
    motion_limit: float = 30.0
    highlight_count: int = 5
    map_threshold: float = 45.0
    overlap_samples: int = 100_000
    workspace: Path = field(default_factory=Path.cwd)
    manifest: Path = Path("video/manifest.json")
    triplets: Path = Path("triplets/manifest.json")
    ground_truth: Path = Path("ground_truth.json")
    params: Path = Path("decoder.cvsp")
    history: Path = Path("history.csv")
    maps: Path = Path("maps")
    plan: Path = Path("plan.json")
    report: Path = Path("report.json")

    @classmethod
    def from_sources(
        cls,
        document: Mapping[str, Any] | None = None,
        overrides: Mapping[str, Any] | None = None,
        workspace: Path | None = None,
    ) -> PipelineConfig:
        """
        Build a configuration from a parsed config file and flag overrides, flags winning.

        :param document: Contents of a config file; must carry ``"version": 1``.
        :param overrides: Field values given on the command line.
        :param workspace: Workspace root. Defaults to ``$CVSHL_WORKSPACE`` or the current directory.
        :raises ConfigError: for unknown keys, a wrong version or values of the wrong type.
        """
        values: dict[str, Any] = {}
        if document is not None:
            if document.get("version") != __config_version__:
                raise ConfigError(f"Unsupported config version {document.get('version')!r}.")
            values.update({key: value for key, value in document.items() if key != "version"})
        if overrides is not None:
            values.update(overrides)
        known = {f.name for f in fields(cls)} - {"workspace"}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}.")
        if workspace is None and os.environ.get(__workspace_env__):
            workspace = Path(os.environ[__workspace_env__])
        try:
            for name in _PATH_FIELDS:
                if name in values:
                    values[name] = Path(values[name])
            if "scales" in values:
                values["scales"] = tuple(float(scale) for scale in values["scales"])
            config = cls(**values)
        except TypeError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e
        if workspace is not None:
            config = replace(config, workspace=Path(workspace))
        _config_logger.debug("Configuration: %s", config)
        return config

    def resolve(self, path: Path) -> Path:
        return path if path.is_absolute() else self.workspace / path

    def decoder_widths(self) -> tuple[int, ...]:
        """
        Layer widths of the preset with the last layer sized for ``k``.
        """
        _, widths = resolve_widths(self.widths)
        return widths[:-1] + (self.k * self.k,)

    def feature_channels(self) -> int:
        return self.in_channels if self.in_channels is not None else resolve_widths(self.widths)[0]

    def feature_extractor(self) -> PixelStatisticsExtractor:
        """
        The pixel statistics extractor of the configured feature family, channel count and seed.
        """
        return PixelStatisticsExtractor(self.feature_channels(), self.seed, self.features)  # type: ignore[arg-type]

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            alpha=self.alpha,
            lam=self.lam,
            lr=self.lr,
            lr_halve_every=self.lr_halve_every,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            h=self.h,
            loss=self.loss,  # type: ignore[arg-type]
        )

    def validate(self) -> PipelineConfig:
        """
        Check the preconditions of every module before any work starts.

        :return: ``self``.
        :raises ConfigError: naming the first invalid setting.
        """
        checks = [
            (self.k >= 1, f"k must be at least 1, got {self.k}."),
            (self.h > 0.0, f"h must be positive, got {self.h}."),
            (len(self.scales) > 0, "At least one window scale is required."),
            (
                all(MIN_SCALE <= s <= MAX_SCALE for s in self.scales),
                f"Window scales {list(self.scales)} must lie in [{MIN_SCALE}, {MAX_SCALE}].",
            ),
            (0.0 <= self.alpha <= 1.0, f"alpha must lie in [0, 1], got {self.alpha}."),
            (self.lam >= 0.0, f"lam must be non-negative, got {self.lam}."),
            (self.lr > 0.0 and math.isfinite(self.lr), f"lr must be positive, got {self.lr}."),
            (self.lr_halve_every >= 1, f"lr_halve_every must be at least 1, got {self.lr_halve_every}."),
            (self.batch_size >= 1, f"batch_size must be at least 1, got {self.batch_size}."),
            (self.epochs >= 0, f"epochs must be non-negative, got {self.epochs}."),
            (self.loss in ("triplet", "pairwise"), f"Unknown loss '{self.loss}'."),
            (
                self.in_channels is None or self.in_channels >= 1,
                f"in_channels must be positive, got {self.in_channels}.",
            ),
            (self.motion_limit >= 0.0, f"motion_limit must be non-negative, got {self.motion_limit}."),
            (self.highlight_count >= 0, f"highlight_count must be non-negative, got {self.highlight_count}."),
            (self.map_threshold > 0.0, f"map_threshold must be positive, got {self.map_threshold}."),
            (self.overlap_samples >= 1, f"overlap_samples must be positive, got {self.overlap_samples}."),
            (self.features in FEATURE_FAMILIES, f"Unknown feature family '{self.features}'."),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        try:
            resolve_widths(self.widths)
        except DecoderError as e:
            raise ConfigError(str(e)) from e
        family_layout(self.features, self.feature_channels())  # type: ignore[arg-type]
        return self
