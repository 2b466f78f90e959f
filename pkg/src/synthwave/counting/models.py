"""Detector, source and interferometer descriptions for the counting layer."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from ..errors import DomainError, SetupError


def _nonneg(name: str, value: float) -> None:
    if not math.isfinite(value) or value < 0:
        raise DomainError(f"{name} must be finite and nonnegative, got {value!r}")


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector: rates in counts/s, times in seconds."""

    efficiency: float = 1.0
    dark_rate: float = 0.0
    jitter_sigma: float = 0.0
    dead_time: float = 0.0

    def __post_init__(self):
        for name in ("efficiency", "dark_rate", "jitter_sigma", "dead_time"):
            _nonneg(name, getattr(self, name))
        if self.efficiency > 1:
            raise DomainError("detector efficiency must not exceed 1")


@dataclass(frozen=True)
class PairSource:
    """Photon-pair emitter feeding two detection channels.

    The arrival delay ``t2 - t1`` of a pair follows a two-sided exponential:
    decay constant ``tau_right`` for positive delays, ``tau_left`` for negative.
    ``background`` holds one ``{label: rate}`` breakdown per channel and
    ``loss`` the heralding loss per channel.
    """

    pair_rate: float
    tau_left: float
    tau_right: float
    background: tuple[Mapping[str, float], Mapping[str, float]] = field(
        default_factory=lambda: ({}, {}))
    loss: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        _nonneg("pair_rate", self.pair_rate)
        for name in ("tau_left", "tau_right"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise DomainError(f"{name} must be positive")
        if len(self.background) != 2 or len(self.loss) != 2:
            raise DomainError("background and loss need one entry per channel")
        for ch in self.background:
            for label, rate in ch.items():
                _nonneg(f"background rate {label!r}", rate)
        for l in self.loss:
            _nonneg("loss", l)
            if l > 1:
                raise DomainError("loss must lie in [0, 1]")

    def background_rate(self, channel: int) -> float:
        return float(sum(self.background[channel].values()))

    @property
    def tau_max(self) -> float:
        return max(self.tau_left, self.tau_right)

    def with_background(self, channel: int, label: str, rate: float) -> "PairSource":
        bg = [dict(self.background[0]), dict(self.background[1])]
        bg[channel][label] = rate
        return PairSource(self.pair_rate, self.tau_left, self.tau_right, (bg[0], bg[1]), self.loss)

    def with_rate(self, pair_rate: float) -> "PairSource":
        return PairSource(pair_rate, self.tau_left, self.tau_right, self.background, self.loss)


@dataclass(frozen=True)
class FransonSetup:
    """Two unbalanced interferometers with phases ``phi1``, ``phi2`` [rad].

    ``delta_T`` is the long-short delay [s]; ``V0`` the intrinsic two-photon
    visibility; ``insertion_loss`` an extra routing loss per interferometer.
    """

    phi1: float
    phi2: float
    delta_T: float
    V0: float = 1.0
    insertion_loss: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not 0 <= self.V0 <= 1:
            raise DomainError("V0 must lie in [0, 1]")
        if not math.isfinite(self.delta_T) or self.delta_T <= 0:
            raise DomainError("delta_T must be positive")
        for l in self.insertion_loss:
            if not 0 <= l <= 1:
                raise DomainError("insertion loss must lie in [0, 1]")

    @property
    def phase(self) -> float:
        return self.phi1 + self.phi2

    def validate(self, source: PairSource, detectors) -> None:
        """Require ``delta_T`` to exceed ten correlation times and ten jitter widths."""
        jitter = math.hypot(detectors[0].jitter_sigma, detectors[1].jitter_sigma)
        if self.delta_T < 10 * source.tau_max:
            raise SetupError(f"delta_T={self.delta_T:.3g} s does not resolve the "
                             f"correlation time {source.tau_max:.3g} s (need 10x)")
        if self.delta_T < 10 * jitter:
            raise SetupError(f"delta_T={self.delta_T:.3g} s does not resolve the "
                             f"combined jitter {jitter:.3g} s (need 10x)")
