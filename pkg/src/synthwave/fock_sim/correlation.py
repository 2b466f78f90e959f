"""Two-time cross-correlations via the quantum regression theorem."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError, NormalizationError
from .lindblad import QuantumState, _kappas, _resolve_hamiltonian, liouvillian, propagate_many, \
    rk4_step_size, steady_state
from .space import HilbertSpace


@dataclass(frozen=True)
class CorrelationGrid:
    """``g2_xy(tau)`` on a strictly increasing delay grid [s]."""

    tau: np.ndarray
    g2: np.ndarray
    x: str
    y: str

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        g2 = np.asarray(self.g2, dtype=float)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "g2", g2)
        if tau.shape != g2.shape:
            raise InputError("tau and g2 must have equal length")
        if np.any(np.diff(tau) <= 0):
            raise InputError("tau grid must be strictly increasing")
        if not np.all(np.isfinite(g2)):
            raise InputError("g2 contains non-finite values")

    def max_asymmetry(self) -> float:
        """Largest ``|g2(tau) - g2(-tau)|`` relative to the peak excess ``max(g2) - 1``."""
        mirrored = np.interp(-self.tau, self.tau, self.g2)
        peak = float(np.max(np.abs(self.g2 - 1)))
        if peak == 0:
            return 0.0
        return float(np.max(np.abs(self.g2 - mirrored)) / peak)


def _validate_grid(tau_grid) -> np.ndarray:
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or tau.size == 0:
        raise InputError("tau grid must be a non-empty 1-D array")
    if np.any(np.diff(tau) <= 0):
        raise InputError("tau grid must be strictly increasing")
    return tau


def cross_correlation(space: HilbertSpace, H, kappas, x, y, tau_grid,
                      state: QuantumState | None = None) -> CorrelationGrid:
    """``g2_xy(tau) = <x^dag(0) y^dag(tau) y(tau) x(0)> / (<n_x><n_y>)``.

    For ``tau >= 0`` the conditioned operator ``x rho x^dag`` is propagated and
    ``y^dag y`` measured; for ``tau < 0`` the roles of ``x`` and ``y`` are
    swapped, which stays correct for unequal losses.
    """
    tau = _validate_grid(tau_grid)
    kap = _kappas(space, kappas)
    Hm = _resolve_hamiltonian(space, H, kap, check_threshold=False)
    if state is None:
        state = steady_state(space, Hm, kap)
    rho = state.rho
    a_x = space.destroy(x).astype(complex)
    a_y = space.destroy(y).astype(complex)
    n_x_op = (a_x.conj().T @ a_x)
    n_y_op = (a_y.conj().T @ a_y)
    nx = float(np.real(np.sum(n_x_op.multiply(rho.T))))
    ny = float(np.real(np.sum(n_y_op.multiply(rho.T))))
    if nx <= 0 or ny <= 0:
        raise NormalizationError(f"zero steady photon number (n_x={nx:.3g}, n_y={ny:.3g})")
    L = liouvillian(space, Hm, kap)
    h = rk4_step_size(Hm, kap)
    d = space.dim
    g2 = np.empty_like(tau)

    def branch(first, second_number, delays):
        sigma = (first @ rho @ first.conj().T).ravel()
        order = np.argsort(delays)
        vs = propagate_many(L, sigma, delays[order], h)
        out = np.empty(len(delays))
        for k, v in zip(order, vs):
            out[k] = np.real(np.sum(second_number.multiply(v.reshape(d, d).T)))
        return out

    pos = tau >= 0
    if np.any(pos):
        g2[pos] = branch(a_x, n_y_op, tau[pos])
    if np.any(~pos):
        g2[~pos] = branch(a_y, n_x_op, -tau[~pos])
    label = lambda m: m if isinstance(m, str) else m.label
    return CorrelationGrid(tau, g2 / (nx * ny), label(x), label(y))


def fit_wing_time_constants(grid: CorrelationGrid, floor: float = 1e-3) -> tuple[float, float]:
    """Exponential decay constants ``(tau_left, tau_right)`` of ``g2 - 1``.

    Each wing is fitted by a log-linear least-squares line over the points
    where the excess exceeds ``floor`` times its peak, excluding ``tau = 0``.
    """
    excess = grid.g2 - 1
    peak = float(np.max(excess))
    if peak <= 0:
        raise InputError("no correlation peak to fit")
    out = []
    for side in (grid.tau < 0, grid.tau > 0):
        mask = side & (excess > floor * peak)
        if mask.sum() < 3:
            raise InputError("too few points on a wing for an exponential fit")
        t = np.abs(grid.tau[mask])
        slope = np.polyfit(t, np.log(excess[mask]), 1)[0]
        out.append(-1.0 / slope)
    return out[0], out[1]
