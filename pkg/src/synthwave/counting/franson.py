"""Franson interferometry: forward simulation, fringe fitting and visibility extraction.

Each photon of a pair meets an unbalanced interferometer and is detected at
one output port.  Per emitted pair the joint outcomes are

    both detected, equal paths (ss or ll)   (1 + V0 cos(phi1 + phi2)) / 8
    both detected, short-long               1/16   (delay +delta_T)
    both detected, long-short               1/16   (delay -delta_T)
    only photon 1, only photon 2            1/4 - V0 cos(phi1 + phi2) / 8 each
    neither                                 remainder

so each photon still reaches its detector with probability 1/2 whatever the
phase.  The side peaks each hold a quarter of the detected pairs; the centre
peak averages one half.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..errors import DomainError, InputError, UndefinedCARError
from .histogram import (CoincidenceHistogram, DEFAULT_BIN_WIDTH, car, car_uncertainty,
                        combined_jitter, complement_windows, histogram, peak_half_width,
                        window_fraction)
from .models import DetectorModel, FransonSetup, PairSource
from .streams import _detect, _rngs, emit_pairs

BELL_BOUND = 1 / math.sqrt(2)


def outcome_probabilities(setup: FransonSetup) -> dict[str, float]:
    x = setup.V0 * math.cos(setup.phase) / 8
    return {"center": 0.125 + x, "sl": 1 / 16, "ls": 1 / 16,
            "only1": 0.25 - x, "only2": 0.25 - x, "none": 0.25 + x}


def _route(rng: np.random.Generator, setup: FransonSetup, n: int):
    """Per-pair detection flags and long-path flags for both photons."""
    p = outcome_probabilities(setup)
    names = ["center", "sl", "ls", "only1", "only2", "none"]
    probs = np.array([p[k] for k in names])
    cat = rng.choice(len(names), size=n, p=probs)
    coin = rng.random(n) < 0.5
    det1 = np.isin(cat, [0, 1, 2, 3])
    det2 = np.isin(cat, [0, 1, 2, 4])
    long1 = np.where(cat == 0, coin, np.where(cat == 2, True, np.where(cat == 1, False, coin)))
    long2 = np.where(cat == 0, coin, np.where(cat == 1, True, np.where(cat == 2, False, ~coin)))
    return det1, det2, long1, long2


def franson_simulate(setup: FransonSetup, source: PairSource,
                     detectors: tuple[DetectorModel, DetectorModel], duration: float,
                     seed: int = 0, bin_width: float = DEFAULT_BIN_WIDTH,
                     max_delay: float | None = None) -> CoincidenceHistogram:
    """Three-peak coincidence histogram behind a pair of unbalanced interferometers.

    Raises
    ------
    SetupError
        If ``delta_T`` does not resolve the correlation time and jitter.
    """
    setup.validate(source, detectors)
    if not duration > 0:
        raise DomainError("duration must be positive")
    r_pair, r_route, r1, r2 = _rngs(seed, 4)
    t, d = emit_pairs(r_pair, source, duration)
    det1, det2, long1, long2 = _route(r_route, setup, t.size)
    t1 = t[det1] + setup.delta_T * long1[det1]
    t2 = (t + d)[det2] + setup.delta_T * long2[det2]
    keep = [detectors[c].efficiency * (1 - source.loss[c]) * (1 - setup.insertion_loss[c])
            for c in (0, 1)]
    s1 = _detect(r1, t1, keep[0], detectors[0], source.background_rate(0), duration)
    s2 = _detect(r2, t2, keep[1], detectors[1], source.background_rate(1), duration)
    if max_delay is None:
        max_delay = 3 * setup.delta_T
    return histogram(s1, s2, bin_width, max_delay, duration)


@dataclass(frozen=True)
class FransonWindows:
    center: tuple[float, float]
    sides: tuple[tuple[float, float], tuple[float, float]]
    background: list


def franson_windows(setup: FransonSetup, source: PairSource, detectors,
                    max_delay: float, guard_factor: float = 6.0) -> FransonWindows:
    half = peak_half_width(source)
    guard = guard_factor * (source.tau_max + combined_jitter(detectors))
    dT = setup.delta_T
    bg = complement_windows([-dT, 0.0, dT], max(guard, half), max_delay)
    if not bg:
        raise InputError("histogram range leaves no room for background windows")
    return FransonWindows((-half, half), ((-dT - half, -dT + half), (dT - half, dT + half)), bg)


@dataclass(frozen=True)
class FransonPoint:
    phase: float
    C: int
    A: float
    car: float
    side_counts: tuple[int, int]

    @property
    def normalized(self) -> float:
        """Centre-peak coincidences relative to the accidental level, ``C / A``."""
        return self.C / self.A

    @property
    def normalized_sigma(self) -> float:
        return self.normalized / math.sqrt(self.C) if self.C > 0 else math.inf


def analyze_center(hist: CoincidenceHistogram, windows: FransonWindows, phase: float) -> FransonPoint:
    res = car(hist, windows.center, windows.background)
    sides = tuple(hist.window_counts(w)[0] for w in windows.sides)
    return FransonPoint(phase, res.C, res.A, res.value, sides)


def franson_phase_sweep(setup: FransonSetup, source: PairSource, detectors, duration: float,
                        seed: int = 0, steps: int = 16, bin_width: float = DEFAULT_BIN_WIDTH,
                        max_delay: float | None = None) -> list[FransonPoint]:
    """Centre-peak statistics for ``phi1 + phi2`` stepped over ``[0, 2 pi)``.

    ``phi2`` is held and ``phi1`` scanned; step ``k`` uses seed ``(seed, k)``.
    """
    if steps < 3:
        raise DomainError("a phase sweep needs at least three steps")
    max_delay = 3 * setup.delta_T if max_delay is None else max_delay
    windows = franson_windows(setup, source, detectors, max_delay)
    out = []
    for k in range(steps):
        total = 2 * math.pi * k / steps
        st = replace(setup, phi1=total - setup.phi2)
        hist = franson_simulate(st, source, detectors, duration, [seed, k], bin_width, max_delay)
        out.append(analyze_center(hist, windows, total))
    return out


@dataclass(frozen=True)
class FringeFit:
    offset: float
    amplitude: float
    phase0: float
    rel_residual: float

    @property
    def visibility(self) -> float:
        return self.amplitude / self.offset

    def predict(self, phases):
        return self.offset * (1 + self.visibility * np.cos(np.asarray(phases) - self.phase0))


def fringe_fit(phases: Sequence[float], values: Sequence[float]) -> FringeFit:
    """Least-squares ``y = c (1 + V cos(phi - phi0))``; residual is RMS over mean."""
    phi = np.asarray(phases, dtype=float)
    y = np.asarray(values, dtype=float)
    if phi.size < 3 or phi.shape != y.shape:
        raise InputError("fringe fit needs at least three (phase, value) points")
    X = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    mean = float(np.mean(y))
    rel = float(np.sqrt(np.mean(resid ** 2)) / abs(mean)) if mean else math.inf
    amp = float(math.hypot(coef[1], coef[2]))
    return FringeFit(float(coef[0]), amp, float(math.atan2(coef[2], coef[1])), rel)


@dataclass(frozen=True)
class VisibilityResult:
    V: float
    sigma: float
    bell_violation: bool


def visibility(car_max: float, car_min: float, sigma_max: float | None = None,
               sigma_min: float | None = None) -> VisibilityResult:
    """``V = (max - min) / (max + min)`` with first-order error propagation.

    ``bell_violation`` is ``V > 1/sqrt(2)``.
    """
    if not car_max >= car_min >= 0:
        raise DomainError("need car_max >= car_min >= 0")
    s = car_max + car_min
    if s == 0:
        raise UndefinedCARError("visibility undefined for car_max = car_min = 0")
    V = (car_max - car_min) / s
    sigma = 0.0
    if sigma_max is not None or sigma_min is not None:
        dmax = 2 * car_min / s ** 2
        dmin = 2 * car_max / s ** 2
        sigma = math.hypot(dmax * (sigma_max or 0.0), dmin * (sigma_min or 0.0))
    return VisibilityResult(V, sigma, V > BELL_BOUND)


def extract_visibility(points: Sequence[FransonPoint]) -> VisibilityResult:
    """Visibility from the extreme normalized centre peaks ``C / A`` of a sweep.

    ``A`` is pooled over all points since accidentals do not depend on phase.
    ``C / A`` keeps flat accidentals in the fringe floor, so background lowers
    the recovered visibility; the ``(C - A) / A`` form would subtract it.
    Uncertainties follow ``sigma / value = 1 / sqrt(C)``.
    """
    A = float(np.mean([p.A for p in points]))
    if A <= 0:
        raise UndefinedCARError("no accidental counts to normalize the centre peak")
    hi = max(points, key=lambda p: p.C)
    lo = min(points, key=lambda p: p.C)
    g_hi, g_lo = hi.C / A, lo.C / A
    s_hi = car_uncertainty(g_hi, hi.C) if hi.C else 0.0
    s_lo = car_uncertainty(g_lo, lo.C) if lo.C else 0.0
    return visibility(g_hi, g_lo, s_hi, s_lo)


def car_visibility(points: Sequence[FransonPoint]) -> VisibilityResult:
    """Visibility from the extreme ``(C - A) / A`` values of a sweep."""
    hi = max(points, key=lambda p: p.car)
    lo = min(points, key=lambda p: p.car)
    return visibility(hi.car, max(lo.car, 0.0),
                      car_uncertainty(hi.car, hi.C) if hi.C else 0.0,
                      car_uncertainty(lo.car, lo.C) if lo.C else 0.0)


def _center_model(setup: FransonSetup, source: PairSource, detectors, span: tuple[float, float]):
    """Phase-averaged true centre counts per second and accidental rate in ``span``."""
    keep = [detectors[c].efficiency * (1 - source.loss[c]) * (1 - setup.insertion_loss[c])
            for c in (0, 1)]
    frac = window_fraction(source, combined_jitter(detectors), *span)
    true = source.pair_rate * keep[0] * keep[1] / 8 * frac
    r = [source.pair_rate * keep[c] / 2 + detectors[c].dark_rate + source.background_rate(c)
         for c in (0, 1)]
    return true, r


def expected_visibility(setup: FransonSetup, source: PairSource, detectors,
                        span: tuple[float, float]) -> float:
    """``V0 * T / (T + A)`` for mean true centre counts ``T`` and accidentals ``A``."""
    true, r = _center_model(setup, source, detectors, span)
    acc = r[0] * r[1] * (span[1] - span[0])
    return setup.V0 * true / (true + acc)


def invert_background_for_visibility(setup: FransonSetup, source: PairSource, detectors,
                                     target: float, span: tuple[float, float],
                                     channels: str = "both",
                                     label: str = "filter_leakage") -> PairSource:
    """Source with extra flat background so the expected visibility equals ``target``.

    Solves ``V0 T / (T + A) = target`` for the accidentals ``A`` and then
    ``A = r1 r2 w`` for the added rate, either on one channel (``"1"``,
    ``"2"``) or split equally on both.
    """
    if not 0 < target <= setup.V0:
        raise DomainError("target visibility must lie in (0, V0]")
    true, (r1, r2) = _center_model(setup, source, detectors, span)
    K = true * (setup.V0 / target - 1) / (span[1] - span[0])
    if channels == "both":
        extra = [0.5 * (-(r1 + r2) + math.sqrt((r1 - r2) ** 2 + 4 * K))] * 2
    elif channels in ("1", "2"):
        c = int(channels) - 1
        other = (r2, r1)[c]
        if other <= 0:
            raise DomainError("the other channel has no singles; accidentals cannot be tuned")
        extra = [0.0, 0.0]
        extra[c] = K / other - (r1, r2)[c]
    else:
        raise InputError(f"channels must be '1', '2' or 'both', got {channels!r}")
    if min(extra) < 0:
        raise DomainError("target visibility is above what the current background allows")
    out = source
    for c in (0, 1):
        if extra[c] > 0:
            out = out.with_background(c, label, out.background[c].get(label, 0.0) + extra[c])
    return out
