"""Monte Carlo timestamp generation.

Timestamps are integer picoseconds (``int64``).  All randomness flows from one
``numpy.random.SeedSequence`` split into fixed sub-streams, so a given seed
always reproduces the same streams bit for bit.
"""
from __future__ import annotations

import numpy as np

from ..errors import DomainError
from .models import DetectorModel, PairSource

PS = 1e12


def _rngs(seed, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def emit_pairs(rng: np.random.Generator, source: PairSource, duration: float):
    """Emission times [s] and signed arrival delays [s] of a Poisson pair stream."""
    n = rng.poisson(source.pair_rate * duration)
    t = np.sort(rng.uniform(0.0, duration, n))
    p_right = source.tau_right / (source.tau_left + source.tau_right)
    right = rng.random(n) < p_right
    mag = rng.exponential(1.0, n) * np.where(right, source.tau_right, source.tau_left)
    return t, np.where(right, mag, -mag)


def _detect(rng: np.random.Generator, times: np.ndarray, keep_prob: float,
            det: DetectorModel, background: float, duration: float) -> np.ndarray:
    """Thin, jitter, add dark/background counts, prune dead time; sorted int64 ps."""
    kept = times[rng.random(times.size) < keep_prob]
    if det.jitter_sigma > 0:
        kept = kept + rng.normal(0.0, det.jitter_sigma, kept.size)
    noise = rng.uniform(0.0, duration, rng.poisson((det.dark_rate + background) * duration))
    ps = np.sort(np.rint(np.concatenate([kept, noise]) * PS).astype(np.int64))
    if det.dead_time > 0:
        ps = apply_dead_time(ps, int(round(det.dead_time * PS)))
    return ps


def apply_dead_time(ps: np.ndarray, dead_ps: int) -> np.ndarray:
    """Non-paralyzable dead time: drop events closer than ``dead_ps`` to the last kept one.

    Only clusters of events with sub-dead-time gaps need a sequential pass;
    the first event of each cluster is always kept.
    """
    if ps.size < 2 or dead_ps <= 0:
        return ps
    idx = np.flatnonzero(np.diff(ps) < dead_ps) + 1
    if idx.size == 0:
        return ps
    keep = np.ones(ps.size, dtype=bool)
    last_kept = 0
    prev = -2
    for i in idx:
        if i != prev + 1:
            last_kept = ps[i - 1]
        if ps[i] - last_kept < dead_ps:
            keep[i] = False
        else:
            last_kept = ps[i]
        prev = i
    return ps[keep]


def simulate_streams(source: PairSource, detectors: tuple[DetectorModel, DetectorModel],
                     duration: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Two sorted picosecond timestamp streams from a pair source and its detectors.

    Channel 1 registers the photon at its emission time, channel 2 after the
    sampled delay.  Each photon survives with probability
    ``efficiency * (1 - loss)`` independently; jitter is Gaussian; dark and
    background counts are Poisson; dead time is applied last.
    """
    if not np.isfinite(duration) or duration <= 0:
        raise DomainError("duration must be positive")
    r_pair, r1, r2 = _rngs(seed, 3)
    t, d = emit_pairs(r_pair, source, duration)
    s1 = _detect(r1, t, detectors[0].efficiency * (1 - source.loss[0]), detectors[0],
                 source.background_rate(0), duration)
    s2 = _detect(r2, t + d, detectors[1].efficiency * (1 - source.loss[1]), detectors[1],
                 source.background_rate(1), duration)
    return s1, s2
