"""Linear quantum Langevin (Gaussian) solver for at-most-bilinear Hamiltonians.

For ``H = sum W_jk a_j^dag a_k + 1/2 sum (P_jk a_j^dag a_k^dag + h.c.) + (f_j a_j^dag + h.c.)``
the stacked vector ``v = (a, a^dag)`` obeys ``dv/dt = M v + c + noise`` with
vacuum inputs.  The symmetrized covariance ``V_ij = <{dv_i, dv_j}>/2`` solves
``M V + V M^T + D = 0``.  No truncation and no time stepping are involved,
which is what makes this an independent check on the Fock-space solver.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as la

from ..errors import DomainError, InputError, NormalizationError, StructuralError, ThresholdError
from ..process_algebra import Mode


def quadratic_form(modes: Sequence[Mode], terms, include_detuning: bool = True):
    """Return ``(W, P, f)`` of the bilinear Hamiltonian built from ``terms``."""
    n = len(modes)
    idx = {m.label: i for i, m in enumerate(modes)}
    W = np.zeros((n, n), dtype=complex)
    P = np.zeros((n, n), dtype=complex)
    f = np.zeros(n, dtype=complex)
    if include_detuning:
        W[np.diag_indices(n)] += [m.delta for m in modes]
    for term in terms:
        legs = term.legs
        g = complex(term.coupling)
        paired = term.hermitian_pair
        for leg in legs:
            if leg.label not in idx:
                raise StructuralError(f"term leg on unknown mode {leg.label!r}")
        if len(legs) > 2:
            raise DomainError(f"term {term} is not at most bilinear; reduce the pump first")
        if len(legs) == 0:
            continue
        if len(legs) == 1:
            if not paired:
                raise InputError(f"linear term {term} needs its h.c. partner")
            j = idx[legs[0].label]
            f[j] += g if legs[0].dagger else g.conjugate()
            continue
        (l1, l2) = legs
        j, k = idx[l1.label], idx[l2.label]
        if l1.dagger and l2.dagger:
            if not paired:
                raise InputError(f"term {term} is not Hermitian")
            P[j, k] += g
            P[k, j] += g
        elif not l1.dagger and not l2.dagger:
            if not paired:
                raise InputError(f"term {term} is not Hermitian")
            P[j, k] += g.conjugate()
            P[k, j] += g.conjugate()
        else:
            # normal-order a_j a_k^dag -> a_k^dag a_j (constant dropped)
            c, d = (j, k) if l1.dagger else (k, j)
            if paired:
                W[c, d] += g
                W[d, c] += g.conjugate()
            elif c == d and abs(g.imag) <= 1e-12 * max(abs(g), 1.0):
                W[c, c] += g.real
            else:
                raise InputError(f"term {term} is not Hermitian")
    return W, P, f


def drift_matrix(modes: Sequence[Mode], terms, kappas=None):
    """Drift ``M`` and constant drive ``c`` of ``dv/dt = M v + c``."""
    W, P, f = quadratic_form(modes, terms)
    kap = np.asarray([m.kappa for m in modes] if kappas is None else kappas, dtype=float)
    K = np.diag(kap / 2)
    M = np.block([[-1j * W - K, -1j * P], [1j * P.conj(), 1j * W.conj() - K]])
    c = np.concatenate([-1j * f, 1j * f.conj()])
    return M, c


def gain_ratio(M: np.ndarray, kappas) -> float:
    """``1 + max Re(eig M) / (kappa_min/2)``; reaches 1 exactly at threshold."""
    kap = np.asarray(kappas, dtype=float)
    kmin = kap[kap > 0].min() if np.any(kap > 0) else 1.0
    growth = float(np.max(np.linalg.eigvals(M).real)) if M.size else -np.inf
    return 1 + growth / (kmin / 2)


@dataclass(frozen=True)
class GaussianSteadyState:
    modes: tuple[Mode, ...]
    mean: np.ndarray
    V: np.ndarray
    M: np.ndarray
    kappas: np.ndarray
    gain_ratio: float

    @property
    def n(self) -> int:
        return len(self.modes)

    def index(self, mode) -> int:
        if isinstance(mode, (int, np.integer)):
            return int(mode)
        label = mode if isinstance(mode, str) else mode.label
        for i, m in enumerate(self.modes):
            if m.label == label:
                return i
        raise StructuralError(f"mode {label!r} not in Gaussian model")

    def moment(self, i: int, j: int) -> complex:
        """``<v_i v_j>`` for stacked indices (``i >= n`` means a creation operator)."""
        n = self.n
        comm = 0.0
        if j == i + n:
            comm = 0.5
        elif i == j + n:
            comm = -0.5
        mu = np.concatenate([self.mean, self.mean.conj()])
        return complex(self.V[i, j] + comm + mu[i] * mu[j])

    def mean_photon(self, mode) -> float:
        j = self.index(mode)
        return float(np.real(self.moment(j + self.n, j)))

    def photon_numbers(self) -> dict[str, float]:
        return {m.label: self.mean_photon(m) for m in self.modes}

    def flux(self, mode, kappa_ext: float | None = None) -> float:
        m = self.modes[self.index(mode)]
        return (m.kappa_ext if kappa_ext is None else kappa_ext) * self.mean_photon(m)

    def _weights(self, x: int) -> np.ndarray:
        if np.any(self.mean != 0):
            raise InputError("two-time correlations implemented for zero-mean states only")
        w = self.V[:, x].astype(complex).copy()
        w[x + self.n] -= 0.5
        return w

    def _excess(self, x: int, y: int, taus: np.ndarray) -> np.ndarray:
        w = self._weights(x)
        out = np.empty(len(taus))
        for k, tau in enumerate(taus):
            u = la.expm(self.M * tau) @ w
            out[k] = abs(u[y]) ** 2 + abs(u[y + self.n]) ** 2
        return out

    def g2(self, x, y, taus) -> np.ndarray:
        """Normalized ``g2_xy(tau)``; positive tau means ``y`` detected after ``x``."""
        ix, iy = self.index(x), self.index(y)
        taus = np.asarray(taus, dtype=float)
        nx, ny = self.mean_photon(ix), self.mean_photon(iy)
        if nx <= 0 or ny <= 0:
            raise NormalizationError("zero steady photon number in a correlated mode")
        vals = np.empty_like(taus)
        pos = taus >= 0
        vals[pos] = self._excess(ix, iy, taus[pos])
        vals[~pos] = self._excess(iy, ix, -taus[~pos])
        return 1 + vals / (nx * ny)

    def pair_rate(self, x, y, kappa_ext_x: float | None = None,
                  kappa_ext_y: float | None = None) -> float:
        """Excess coincidence rate ``kx ky * int (G2_xy(tau) - n_x n_y) dtau`` [1/s].

        The time integral is evaluated in closed form from a Lyapunov equation.
        """
        ix, iy = self.index(x), self.index(y)
        kx = self.modes[ix].kappa_ext if kappa_ext_x is None else kappa_ext_x
        ky = self.modes[iy].kappa_ext if kappa_ext_y is None else kappa_ext_y
        total = 0.0
        for a, b in ((ix, iy), (iy, ix)):
            w = self._weights(a)
            X = la.solve_continuous_lyapunov(self.M, -np.outer(w, w.conj()))
            total += float(np.real(X[b, b] + X[b + self.n, b + self.n]))
        return kx * ky * total


def gaussian_oracle(modes: Sequence[Mode], terms, kappas=None) -> GaussianSteadyState:
    """Steady first and second moments of a bilinear open system.

    Raises
    ------
    ThresholdError
        If the drift matrix has an eigenvalue with nonnegative real part.
    """
    modes = tuple(modes)
    kap = np.asarray([m.kappa for m in modes] if kappas is None else
                     [kappas.get(m.label, m.kappa) for m in modes] if isinstance(kappas, Mapping)
                     else kappas, dtype=float)
    M, c = drift_matrix(modes, terms, kap)
    ratio = gain_ratio(M, kap)
    if ratio >= 1:
        raise ThresholdError("drift matrix is not Hurwitz: above parametric threshold", ratio)
    n = len(modes)
    mean = la.solve(M, -c)[:n] if np.any(c) else np.zeros(n, dtype=complex)
    D = np.zeros((2 * n, 2 * n))
    D[np.arange(n), np.arange(n) + n] = kap / 2
    D[np.arange(n) + n, np.arange(n)] = kap / 2
    V = la.solve_sylvester(M, M.T, -D)
    V = 0.5 * (V + V.T)
    return GaussianSteadyState(modes, mean, V, M, kap, ratio)
