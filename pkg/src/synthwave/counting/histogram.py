"""All-pairs coincidence histograms, CAR extraction and the analytic accidental model."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import exponnorm

from ..errors import DomainError, InputError, UndefinedCARError
from .models import DetectorModel, PairSource
from .streams import PS

DEFAULT_BIN_WIDTH = 100e-12
PEAK_WINDOW_FACTOR = 3.0


@dataclass(frozen=True)
class CoincidenceHistogram:
    """Counts of ``t2 - t1`` per delay bin; bins are centred on ``k * bin_width``."""

    bin_width: float
    centers: np.ndarray
    counts: np.ndarray
    duration: float

    def __post_init__(self):
        if np.any(self.counts < 0):
            raise InputError("histogram counts must be nonnegative")
        if self.centers.shape != self.counts.shape:
            raise InputError("centers and counts must have equal length")

    @property
    def max_delay(self) -> float:
        return float(self.centers[-1] + self.bin_width / 2)

    def mask(self, window: tuple[float, float]) -> np.ndarray:
        lo, hi = window
        eps = 1e-6 * self.bin_width
        return (self.centers >= lo - eps) & (self.centers <= hi + eps)

    def window_counts(self, window: tuple[float, float]) -> tuple[int, int]:
        """``(counts, n_bins)`` of the bins whose centres lie inside ``window``."""
        m = self.mask(window)
        return int(self.counts[m].sum()), int(m.sum())

    def span(self, window: tuple[float, float]) -> tuple[float, float]:
        """Delay interval actually covered by the bins selected by ``window``."""
        c = self.centers[self.mask(window)]
        if c.size == 0:
            raise InputError(f"window {window} selects no bins")
        return float(c[0] - self.bin_width / 2), float(c[-1] + self.bin_width / 2)

    def __add__(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        if (not math.isclose(self.bin_width, other.bin_width)
                or self.centers.shape != other.centers.shape):
            raise InputError("histograms with different binning cannot be merged")
        return CoincidenceHistogram(self.bin_width, self.centers, self.counts + other.counts,
                                    self.duration + other.duration)

    def rows(self):
        """``(delay_ps, counts)`` rows for export."""
        return [(int(round(c * PS)), int(n)) for c, n in zip(self.centers, self.counts)]


def histogram(t1: np.ndarray, t2: np.ndarray, bin_width: float = DEFAULT_BIN_WIDTH,
              max_delay: float = 10e-9, duration: float | None = None) -> CoincidenceHistogram:
    """All-pairs histogram of ``t2 - t1`` for delays within ``+-max_delay``.

    Timestamps are sorted integer picoseconds.  Every pair of events counts,
    not only the first stop after each start.
    """
    if not bin_width > 0:
        raise DomainError("bin_width must be positive")
    w = int(round(bin_width * PS))
    if w < 1:
        raise DomainError("bin_width must be at least 1 ps")
    k = int(math.ceil(max_delay * PS / w - 0.5))
    ks = np.arange(-k, k + 1)
    lo_edge, hi_edge = (-k * w - w // 2), (k * w + w - w // 2)
    counts = np.zeros(ks.size, dtype=np.int64)
    t1 = np.asarray(t1, dtype=np.int64)
    t2 = np.asarray(t2, dtype=np.int64)
    if t1.size and t2.size:
        start = np.searchsorted(t2, t1 + lo_edge, side="left")
        stop = np.searchsorted(t2, t1 + hi_edge, side="left")
        n = stop - start
        if n.sum():
            owner = np.repeat(np.arange(t1.size), n)
            offs = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
            diff = t2[np.repeat(start, n) + offs] - t1[owner]
            counts += np.bincount((diff - lo_edge) // w, minlength=ks.size)[:ks.size]
    if duration is None:
        ends = [a[-1] for a in (t1, t2) if a.size]
        duration = max(ends) / PS if ends else 0.0
    return CoincidenceHistogram(w / PS, ks * (w / PS), counts, float(duration))


@dataclass(frozen=True)
class CARResult:
    value: float
    C: int
    A: float
    peak_bins: int

    @property
    def sigma(self) -> float:
        return car_uncertainty(self.value, self.C)


def _disjoint(windows: Sequence[tuple[float, float]]) -> bool:
    ws = sorted(windows)
    return all(a[1] < b[0] for a, b in zip(ws, ws[1:]))


def car(hist: CoincidenceHistogram, peak_window: tuple[float, float],
        background_windows: Sequence[tuple[float, float]]) -> CARResult:
    """Coincidence-to-accidental ratio ``(C - A) / A``.

    ``A`` is the mean count of the background-window bins times the number of
    peak-window bins.

    Raises
    ------
    UndefinedCARError
        If the background windows hold no counts.
    """
    if not background_windows:
        raise InputError("at least one background window is required")
    if not _disjoint([peak_window, *background_windows]):
        raise InputError("background windows must be disjoint from the peak window")
    C, n_peak = hist.window_counts(peak_window)
    bg = [hist.window_counts(w) for w in background_windows]
    bg_counts = sum(c for c, _ in bg)
    bg_bins = sum(n for _, n in bg)
    if n_peak == 0 or bg_bins == 0:
        raise InputError("peak and background windows must each contain bins")
    A = bg_counts / bg_bins * n_peak
    if A == 0:
        raise UndefinedCARError("no accidental counts in the background windows")
    return CARResult((C - A) / A, C, A, n_peak)


def car_uncertainty(car_value: float, N: int) -> float:
    """``sigma_CAR = CAR / sqrt(N)``."""
    if N <= 0:
        raise DomainError("car_uncertainty needs a positive count N")
    return abs(car_value) / math.sqrt(N)


def bin_span(window: tuple[float, float], bin_width: float) -> tuple[float, float]:
    """Delay interval covered by the bins (centred on multiples of ``bin_width``) inside ``window``."""
    eps = 1e-6
    k_lo = math.ceil(window[0] / bin_width - eps)
    k_hi = math.floor(window[1] / bin_width + eps)
    if k_hi < k_lo:
        raise InputError(f"window {window} selects no bins")
    return (k_lo - 0.5) * bin_width, (k_hi + 0.5) * bin_width


def combined_jitter(detectors: Sequence[DetectorModel]) -> float:
    return math.hypot(detectors[0].jitter_sigma, detectors[1].jitter_sigma)


def peak_half_width(source: PairSource, factor: float = PEAK_WINDOW_FACTOR) -> float:
    return factor * source.tau_max


def complement_windows(peaks: Sequence[float], guard: float, max_delay: float):
    """Intervals of ``[-max_delay, max_delay]`` farther than ``guard`` from every peak."""
    edges = sorted((p - guard, p + guard) for p in peaks)
    out, cur = [], -max_delay
    for lo, hi in edges:
        if lo > cur:
            out.append((cur, lo))
        cur = max(cur, hi)
    if cur < max_delay:
        out.append((cur, max_delay))
    return [(lo, hi) for lo, hi in out if hi - lo > 0]


def default_windows(source: PairSource, detectors, max_delay: float, guard_factor: float = 10.0):
    """Peak window ``+-3 tau_max`` and background windows beyond ``guard_factor`` peak widths.

    The guard also spans the longest dead time: a detected pair blanks the
    other channel for that long, which depletes accidentals near the peak.
    """
    half = peak_half_width(source)
    guard = (guard_factor * (source.tau_max + combined_jitter(detectors))
             + max(d.dead_time for d in detectors))
    bg = complement_windows([0.0], guard, max_delay)
    if not bg:
        raise InputError("histogram range too short for background windows")
    return (-half, half), bg


def delay_cdf(x, source: PairSource, jitter: float):
    """CDF of the arrival delay: two-sided exponential convolved with Gaussian jitter."""
    x = np.asarray(x, dtype=float)
    pr = source.tau_right / (source.tau_left + source.tau_right)
    if jitter > 0:
        right = exponnorm.cdf(x, source.tau_right / jitter, scale=jitter)
        left = 1 - exponnorm.cdf(-x, source.tau_left / jitter, scale=jitter)
    else:
        right = np.where(x > 0, 1 - np.exp(-np.clip(x, 0, None) / source.tau_right), 0.0)
        left = np.where(x < 0, np.exp(np.clip(x, None, 0) / source.tau_left), 1.0)
    return pr * right + (1 - pr) * left


def window_fraction(source: PairSource, jitter: float, lo: float, hi: float) -> float:
    return float(delay_cdf(hi, source, jitter) - delay_cdf(lo, source, jitter))


def detection_probability(source: PairSource, detectors, channel: int) -> float:
    return detectors[channel].efficiency * (1 - source.loss[channel])


def singles_rates(source: PairSource, detectors, share: tuple[float, float] = (1.0, 1.0)):
    """Detected singles rates per channel (dead time ignored)."""
    return tuple(source.pair_rate * share[c] * detection_probability(source, detectors, c)
                 + detectors[c].dark_rate + source.background_rate(c) for c in (0, 1))


def expected_histogram(source: PairSource, detectors, hist: CoincidenceHistogram) -> np.ndarray:
    """Analytic mean counts per bin: flat Poisson accidentals plus the true-pair profile.

    Accidentals per bin are ``r1 r2 w T`` with the detected singles rates;
    true coincidences are ``R eta1 eta2 T`` times the delay probability of
    the bin.
    """
    r1, r2 = singles_rates(source, detectors)
    w, T = hist.bin_width, hist.duration
    jitter = combined_jitter(detectors)
    edges = np.append(hist.centers - w / 2, hist.centers[-1] + w / 2)
    p = np.diff(delay_cdf(edges, source, jitter))
    eta = detection_probability(source, detectors, 0) * detection_probability(source, detectors, 1)
    return r1 * r2 * w * T + source.pair_rate * eta * T * p


def expected_car(source: PairSource, detectors, hist: CoincidenceHistogram,
                 peak_window: tuple[float, float]) -> float:
    """Model CAR: true peak coincidences over accidentals in the same bins."""
    lo, hi = hist.span(peak_window)
    r1, r2 = singles_rates(source, detectors)
    acc = r1 * r2 * (hi - lo) * hist.duration
    eta = detection_probability(source, detectors, 0) * detection_probability(source, detectors, 1)
    true = source.pair_rate * eta * hist.duration * window_fraction(
        source, combined_jitter(detectors), lo, hi)
    if acc == 0:
        raise UndefinedCARError("model has no accidental coincidences")
    return true / acc
