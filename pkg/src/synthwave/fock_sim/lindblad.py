"""Lindblad master equation on a truncated Fock space.

The density matrix is vectorized row-major, ``vec(A rho B) = (A kron B^T) vec(rho)``.
Time stepping is classical fixed-step RK4 on the sparse Liouvillian; the steady
state is a direct sparse solve with the trace constraint substituted for one
equation, or long-time integration when the Liouville space is too large.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ConvergenceError, DomainError, InputError, ThresholdError
from ..process_algebra import EffectiveProcess, InteractionVertex
from .space import HilbertSpace, build_hamiltonian

STEADY_RESIDUAL_TOL = 1e-8
# Liouville dimension up to which the steady state is found by sparse LU
DIRECT_SOLVE_LIMIT = 10**5


@dataclass
class QuantumState:
    """Density matrix on ``space`` at time ``t`` (seconds)."""

    space: HilbertSpace
    rho: np.ndarray
    t: float = math.inf
    residual: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def expect(self, op) -> complex:
        return complex(np.sum(op.multiply(self.rho.T)) if sp.issparse(op) else np.trace(op @ self.rho))

    def mean_photon(self, mode) -> float:
        n = self.space.number(mode)
        return float(np.real(n.diagonal() @ np.diag(self.rho)))

    def photon_numbers(self) -> dict[str, float]:
        return {m.label: self.mean_photon(m) for m in self.space.modes}

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))[0])

    def top_level_population(self) -> dict[str, float]:
        """Probability of occupying each mode's highest kept Fock level."""
        p = np.real(np.diag(self.rho)).reshape(self.space.dims)
        out = {}
        for j, mode in enumerate(self.space.modes):
            idx = [slice(None)] * len(self.space.dims)
            idx[j] = -1
            out[mode.label] = float(p[tuple(idx)].sum())
        return out


def _kappas(space: HilbertSpace, kappas) -> np.ndarray:
    if kappas is None:
        values = [m.kappa for m in space.modes]
    elif isinstance(kappas, Mapping):
        values = [kappas.get(m.label, m.kappa) for m in space.modes]
    else:
        values = list(kappas)
    values = np.asarray(values, dtype=float)
    if values.shape != (len(space.modes),):
        raise InputError("one decay rate per mode required")
    if np.any(values < 0):
        raise DomainError("decay rates must be nonnegative")
    return values


def liouvillian(space: HilbertSpace, H, kappas=None) -> sp.csr_matrix:
    """Sparse generator of ``-i[H, rho] + sum_j kappa_j D[a_j] rho``."""
    kap = _kappas(space, kappas)
    d = space.dim
    eye = sp.identity(d, dtype=complex, format="csr")
    H = sp.csr_matrix(H, dtype=complex)
    L = -1j * (sp.kron(H, eye) - sp.kron(eye, H.T))
    for k, mode in zip(kap, space.modes):
        if k == 0:
            continue
        a = space.destroy(mode).astype(complex)
        n = sp.csr_matrix(a.conj().T @ a)
        L = L + k * (sp.kron(a, a.conj()) - 0.5 * sp.kron(n, eye) - 0.5 * sp.kron(eye, n.T))
    return sp.csr_matrix(L)


def _spectral_bound(H) -> float:
    H = sp.csr_matrix(H)
    if H.nnz == 0:
        return 0.0
    return float(abs(H).sum(axis=1).max())


def rk4_step_size(H, kappas) -> float:
    """Largest step allowed: ``0.01 / max(||H||, kappa_max)``."""
    rate = max(_spectral_bound(H), float(np.max(kappas)) if len(kappas) else 0.0)
    return 0.01 / rate if rate > 0 else math.inf


def _propagate(L: sp.csr_matrix, v: np.ndarray, duration: float, h_max: float) -> np.ndarray:
    if duration <= 0:
        return v
    if not math.isfinite(h_max):
        return v
    steps = max(1, math.ceil(duration / h_max))
    h = duration / steps
    for _ in range(steps):
        k1 = L @ v
        k2 = L @ (v + 0.5 * h * k1)
        k3 = L @ (v + 0.5 * h * k2)
        k4 = L @ (v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return v


def propagate_many(L: sp.csr_matrix, v0: np.ndarray, times: Sequence[float], h_max: float,
                   t0: float = 0.0) -> list[np.ndarray]:
    """RK4 evolution of ``v0`` reporting at each (nondecreasing) time."""
    out = []
    v = v0
    t = t0
    for target in times:
        if target < t - 1e-15 * max(1.0, abs(t)):
            raise InputError("time grid must be nondecreasing")
        v = _propagate(L, v, target - t, h_max)
        t = target
        out.append(v)
    return out


def _initial_rho(space: HilbertSpace, rho0) -> np.ndarray:
    if rho0 is None:
        rho = np.zeros((space.dim, space.dim), dtype=complex)
        rho[0, 0] = 1
        return rho
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    if rho0.shape != (space.dim, space.dim):
        raise InputError(f"initial state has shape {rho0.shape}, expected {(space.dim, space.dim)}")
    return rho0


def vacuum_stability(space: HilbertSpace, terms, kappas=None) -> float:
    """Gain ratio of the linearized dynamics about vacuum (< 1 means stable).

    Only terms that are at most bilinear in ladder operators contribute.
    """
    from .gaussian import drift_matrix, gain_ratio

    quadratic = [t for t in terms if len(t.legs) <= 2]
    M, _ = drift_matrix(space.modes, quadratic, _kappas(space, kappas))
    return gain_ratio(M, _kappas(space, kappas))


def _resolve_hamiltonian(space, H, kappas, check_threshold):
    if isinstance(H, (list, tuple)) and all(isinstance(t, (InteractionVertex, EffectiveProcess)) for t in H):
        if check_threshold:
            ratio = vacuum_stability(space, H, kappas)
            if ratio >= 1:
                raise ThresholdError("parametric gain exceeds loss", ratio)
        return build_hamiltonian(space, H)
    return sp.csr_matrix(H, dtype=complex)


def steady_state(space: HilbertSpace, H, kappas=None, *, check_threshold: bool = True,
                 direct_limit: int = DIRECT_SOLVE_LIMIT, tol: float = STEADY_RESIDUAL_TOL,
                 max_time: float | None = None) -> QuantumState:
    """Stationary density matrix.

    ``H`` may be an operator or a list of terms; a term list is also screened
    for above-threshold gain.  The residual reported is ``||L rho||`` with the
    Liouvillian scaled by its largest rate, so it is dimensionless.
    """
    kap = _kappas(space, kappas)
    Hm = _resolve_hamiltonian(space, H, kap, check_threshold)
    scale = max(_spectral_bound(Hm), float(kap.max()), 1e-300)
    L = liouvillian(space, Hm / scale, kap / scale)
    d = space.dim
    trace_idx = np.arange(d) * (d + 1)
    if d * d <= direct_limit:
        A = sp.lil_matrix(L)
        A[0, :] = 0
        A[0, trace_idx] = 1
        b = np.zeros(d * d, dtype=complex)
        b[0] = 1
        v = spla.spsolve(sp.csc_matrix(A), b)
        method = "direct"
    else:
        h = rk4_step_size(Hm / scale, kap / scale)
        rho = _initial_rho(space, None).ravel()
        t, chunk = 0.0, 10.0 / max(float(kap.min() / scale), 1e-3)
        limit = max_time / scale if max_time else 200 * chunk
        v = rho
        while True:
            v = _propagate(L, v, chunk, h)
            t += chunk
            if np.linalg.norm(L @ v) <= tol or t >= limit:
                break
        method = "integration"
    rho = v.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho)
    residual = float(np.linalg.norm(L @ rho.ravel()))
    if residual > tol:
        raise ConvergenceError(f"steady state ({method}) did not meet tolerance {tol}", residual)
    return QuantumState(space, rho, math.inf, residual, {"method": method, "rate_scale": scale})


def evolve(space: HilbertSpace, H, kappas=None, rho0=None, t_grid: Sequence[float] = (),
           t0: float = 0.0) -> list[QuantumState]:
    """Density matrices at each time of ``t_grid`` starting from ``rho0`` at ``t0``."""
    kap = _kappas(space, kappas)
    Hm = _resolve_hamiltonian(space, H, kap, check_threshold=False)
    L = liouvillian(space, Hm, kap)
    h = rk4_step_size(Hm, kap)
    d = space.dim
    vs = propagate_many(L, _initial_rho(space, rho0).ravel(), list(t_grid), h, t0)
    return [QuantumState(space, v.reshape(d, d), float(t)) for v, t in zip(vs, t_grid)]


def lindblad_solve(space: HilbertSpace, H, kappas=None, t_grid: Sequence[float] | None = None,
                   steady: bool = False, rho0=None):
    """Either the time evolution on ``t_grid`` or (``steady=True``) the steady state."""
    if steady:
        return steady_state(space, H, kappas)
    if t_grid is None:
        raise InputError("need a time grid unless steady=True")
    return evolve(space, H, kappas, rho0, t_grid)
