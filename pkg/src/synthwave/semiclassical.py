"""Classical coupled-mode equations for intracavity amplitudes.

Amplitudes are normalized so ``|alpha|**2`` is the intracavity photon number and
drives ``s_in`` so ``|s_in|**2`` is the input photon flux ``P / (hbar omega)``:

    d alpha_k/dt = (-i delta_k - kappa_k/2) alpha_k - i dH/d alpha_k^* + sqrt(kappa_ext_k) s_k

``H`` is the vertex polynomial with operators replaced by amplitudes.  The
laser-minus-cavity detuning commonly written ``Delta`` equals ``-delta`` here.
The output field is ``s_out = s_in - sqrt(kappa_ext) alpha``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.constants import hbar
from scipy.integrate import solve_ivp
from scipy.stats import linregress

from .errors import ConvergenceError, DomainError, StructuralError
from .process_algebra import Mode

FIXED_POINT_DAMPING = 0.5
NEWTON_SWITCH = 1e-3
RESIDUAL_TOL = 1e-10


@dataclass
class AmplitudeState:
    modes: tuple[Mode, ...]
    alpha: np.ndarray
    drive: np.ndarray
    converged: bool
    residual: float
    iterations: int
    multistable: bool = False

    def index(self, label: str) -> int:
        for i, m in enumerate(self.modes):
            if m.label == label:
                return i
        raise StructuralError(f"mode {label!r} not in state")

    def photon_number(self, label: str) -> float:
        return float(abs(self.alpha[self.index(label)]) ** 2)

    def output_flux(self, label: str) -> float:
        """Photons per second leaving through the bus from mode ``label``'s own emission."""
        i = self.index(label)
        return self.modes[i].kappa_ext * float(abs(self.alpha[i]) ** 2)

    def output_power(self, label: str) -> float:
        i = self.index(label)
        return hbar * self.modes[i].omega * self.output_flux(label)

    def transmitted_flux(self, label: str) -> float:
        """``|s_in - sqrt(kappa_ext) alpha|**2`` for a driven mode."""
        i = self.index(label)
        return float(abs(self.drive[i] - math.sqrt(self.modes[i].kappa_ext) * self.alpha[i]) ** 2)


class _Polynomial:
    """``H = sum_t c_t prod(conj(a)**p_t) prod(a**q_t)``, Hermitian partners included."""

    def __init__(self, modes: Sequence[Mode], vertices):
        idx = {m.label: i for i, m in enumerate(modes)}
        n = len(modes)
        self.terms: list[tuple[complex, np.ndarray, np.ndarray]] = []
        for v in vertices:
            p = np.zeros(n, dtype=int)
            q = np.zeros(n, dtype=int)
            for leg in v.legs:
                if leg.label not in idx:
                    raise StructuralError(f"vertex leg on undeclared mode {leg.label!r}")
                (p if leg.dagger else q)[idx[leg.label]] += 1
            g = complex(v.coupling)
            self.terms.append((g, p, q))
            if v.hermitian_pair:
                self.terms.append((g.conjugate(), q.copy(), p.copy()))

    @staticmethod
    def _mono(a, ac, p, q):
        return np.prod(ac ** p) * np.prod(a ** q)

    def grad_conj(self, a: np.ndarray) -> np.ndarray:
        """``dH/d conj(alpha)``."""
        ac = a.conj()
        out = np.zeros_like(a)
        for c, p, q in self.terms:
            for k in np.nonzero(p)[0]:
                pk = p.copy()
                pk[k] -= 1
                out[k] += c * p[k] * self._mono(a, ac, pk, q)
        return out

    def hessians(self, a: np.ndarray):
        """``A = d/d alpha`` and ``B = d/d conj(alpha)`` of ``grad_conj``."""
        n = len(a)
        ac = a.conj()
        A = np.zeros((n, n), dtype=complex)
        B = np.zeros((n, n), dtype=complex)
        for c, p, q in self.terms:
            for k in np.nonzero(p)[0]:
                pk = p.copy()
                pk[k] -= 1
                for j in np.nonzero(q)[0]:
                    qj = q.copy()
                    qj[j] -= 1
                    A[k, j] += c * p[k] * q[j] * self._mono(a, ac, pk, qj)
                for j in np.nonzero(pk)[0]:
                    pkj = pk.copy()
                    pkj[j] -= 1
                    B[k, j] += c * p[k] * pk[j] * self._mono(a, ac, pkj, q)
        return A, B


def drive_amplitudes(modes: Sequence[Mode], drives: Mapping[str, float | complex]) -> np.ndarray:
    """Input amplitudes from powers [W] (real) or ``(power, phase)`` pairs."""
    idx = {m.label: i for i, m in enumerate(modes)}
    s = np.zeros(len(modes), dtype=complex)
    for label, spec in drives.items():
        if label not in idx:
            raise StructuralError(f"drive on undeclared mode {label!r}")
        mode = modes[idx[label]]
        power, phase = (spec if isinstance(spec, tuple) else (spec, 0.0))
        if not np.isfinite(power) or power < 0:
            raise DomainError(f"drive power on {label!r} must be finite and >= 0")
        if mode.omega <= 0:
            raise DomainError(f"driven mode {label!r} needs omega > 0")
        s[idx[label]] = math.sqrt(power / (hbar * mode.omega)) * np.exp(1j * phase)
    return s


class CoupledModeSystem:
    def __init__(self, modes: Sequence[Mode], vertices=()):
        self.modes = tuple(modes)
        self.poly = _Polynomial(self.modes, vertices)
        self.linear = np.array([-1j * m.delta - m.kappa / 2 for m in self.modes])
        self.sqrt_ext = np.sqrt([m.kappa_ext for m in self.modes])
        self.rate = max(max(m.kappa for m in self.modes), max(abs(m.delta) for m in self.modes))

    def rhs(self, a: np.ndarray, s: np.ndarray) -> np.ndarray:
        return self.linear * a - 1j * self.poly.grad_conj(a) + self.sqrt_ext * s

    def residual(self, a, s) -> float:
        f = np.linalg.norm(self.rhs(a, s))
        scale = self.rate * max(np.linalg.norm(a), 1e-300)
        return float(f / scale) if f else 0.0

    def _newton_step(self, a, s):
        n = len(a)
        f = self.rhs(a, s)
        A, B = self.poly.hessians(a)
        Jf = np.diag(self.linear) - 1j * A
        Jc = -1j * B
        # real form of  df = Jf da + Jc conj(da)
        J = np.block([[np.real(Jf + Jc), -np.imag(Jf - Jc)],
                      [np.imag(Jf + Jc), np.real(Jf - Jc)]])
        rhs = -np.concatenate([f.real, f.imag])
        d = np.linalg.solve(J, rhs)
        return a + d[:n] + 1j * d[n:]

    def solve(self, s: np.ndarray, start: np.ndarray | None = None, max_iter: int = 20000,
              tol: float = RESIDUAL_TOL, max_newton: int = 200):
        """Damped fixed point until the residual is below ``NEWTON_SWITCH``, then Newton.

        If the fixed-point map diverges, Newton (with backtracking on ``||f||``)
        restarts from the initial point; if it stalls, Newton continues from
        the last iterate.  Should Newton also stall, the equations of motion
        are integrated from the initial point until the state settles, and
        Newton polishes the result.
        """
        a = np.zeros(len(self.modes), dtype=complex) if start is None else start.astype(complex)
        a0 = a
        if not np.any(s) and start is None:
            return a, 0.0, 0
        res = self.residual(a, s)
        it = 0
        with np.errstate(over="ignore", invalid="ignore"):
            while res > NEWTON_SWITCH and it < max_iter:
                fixed = -(-1j * self.poly.grad_conj(a) + self.sqrt_ext * s) / self.linear
                nxt = (1 - FIXED_POINT_DAMPING) * a + FIXED_POINT_DAMPING * fixed
                it += 1
                if not np.all(np.isfinite(nxt)) or not np.isfinite(self.residual(nxt, s)):
                    a, res = a0, self.residual(a0, s)
                    break
                a = nxt
                res = self.residual(a, s)
            a, res, n = self._newton(a, s, tol, max_newton)
            it += n
            if res > tol:
                a, res = self._relax(a0, s), math.inf
                a, res, n = self._newton(a, s, tol, max_newton)
                it += n
        return a, res, it

    def _newton(self, a, s, tol, max_newton):
        res = self.residual(a, s)
        it = 0
        with np.errstate(over="ignore", invalid="ignore"):
            f_norm = np.linalg.norm(self.rhs(a, s))
            for _ in range(max_newton):
                if res <= tol:
                    break
                try:
                    step = self._newton_step(a, s) - a
                except np.linalg.LinAlgError:
                    break
                t = 1.0
                while t > 1e-6:
                    trial = a + t * step
                    f_trial = np.linalg.norm(self.rhs(trial, s))
                    if np.isfinite(f_trial) and f_trial < f_norm:
                        break
                    t *= 0.5
                else:
                    break
                a, f_norm = trial, f_trial
                res = self.residual(a, s)
                it += 1
        return a, res, it

    def _relax(self, a, s, chunks: int = 20):
        """Integrate the equations of motion until the residual drops below ``NEWTON_SWITCH``."""
        n = len(a)

        def f(_, y):
            d = self.rhs(y[:n] + 1j * y[n:], s)
            return np.concatenate([d.real, d.imag])

        horizon = 20.0 / min(m.kappa for m in self.modes)
        y = np.concatenate([a.real, a.imag])
        for _ in range(chunks):
            sol = solve_ivp(f, (0.0, horizon), y, method="BDF", rtol=1e-8, atol=1e-12)
            y = sol.y[:, -1]
            if not np.all(np.isfinite(y)):
                break
            if self.residual(y[:n] + 1j * y[n:], s) < NEWTON_SWITCH:
                break
        return y[:n] + 1j * y[n:]


def cme_steady_state(modes: Sequence[Mode], vertices, drives: Mapping[str, float | complex],
                     tol: float = RESIDUAL_TOL, check_multistability: bool = True) -> AmplitudeState:
    """Steady intracavity amplitudes under constant drives.

    Damped fixed-point iteration (factor 0.5) hands over to Newton once the
    relative residual drops below 1e-3.  A second solve from a displaced
    start detects multistability.

    Raises
    ------
    ConvergenceError
        If the residual ``||d alpha/dt|| / (rate ||alpha||)`` stays above ``tol``.
    """
    system = CoupledModeSystem(modes, vertices)
    s = drive_amplitudes(system.modes, drives)
    a, res, it = system.solve(s, tol=tol)
    if res > tol or not np.all(np.isfinite(a)):
        raise ConvergenceError("coupled-mode steady state not converged", res)
    multistable = False
    if check_multistability and np.any(a):
        alt_start = 2.0 * a * np.exp(0.3j)
        try:
            b, res_b, _ = system.solve(s, start=alt_start, tol=tol)
            if res_b <= tol and np.linalg.norm(b - a) > 1e-6 * np.linalg.norm(a):
                multistable = True
        except ConvergenceError:
            pass
    return AmplitudeState(system.modes, a, s, True, res, it, multistable)


def transmission_spectrum(mode: Mode, detunings) -> np.ndarray:
    """Bus transmission ``|1 - kappa_ext / (i Delta + kappa/2)|**2``."""
    d = np.asarray(detunings, dtype=float)
    return np.abs(1 - mode.kappa_ext / (1j * d + mode.kappa / 2)) ** 2


@dataclass
class SweepResult:
    points: list[tuple[float, float]] = field(default_factory=list)
    failures: list[tuple[float, str]] = field(default_factory=list)


def sweep_power(powers: Iterable[float], evaluate: Callable[[float], float]) -> SweepResult:
    """Evaluate an observable at each pump power, in the given order.

    A failing point is recorded with its error message; the sweep continues.
    """
    powers = [float(p) for p in powers]
    if len(powers) < 3:
        raise DomainError("a power sweep needs at least three powers")
    if any(p <= 0 for p in powers):
        raise DomainError("pump powers must be positive")
    result = SweepResult()
    for p in powers:
        try:
            result.points.append((p, float(evaluate(p))))
        except (ConvergenceError, DomainError, ArithmeticError) as exc:
            result.failures.append((p, str(exc)))
    return result


def cme_observable(modes: Sequence[Mode], vertices, pump: str, target: str,
                   fixed_drives: Mapping[str, float] | None = None,
                   quantity: str = "output_power") -> Callable[[float], float]:
    """Observable ``P_pump -> quantity(target)`` evaluated by ``cme_steady_state``."""
    fixed = dict(fixed_drives or {})

    def evaluate(power: float) -> float:
        state = cme_steady_state(modes, vertices, {**fixed, pump: power})
        return getattr(state, quantity)(target)

    return evaluate


@dataclass(frozen=True)
class PowerLawFit:
    A: float
    N: float
    sigma_N: float
    n_points: int

    def predict(self, p):
        return self.A * np.asarray(p, dtype=float) ** self.N


def power_law_fit(points: Sequence[tuple[float, float]], min_decades: float = 0.5) -> PowerLawFit:
    """Least-squares line through ``(log P, log value)``: ``value = A P**N``.

    ``sigma_N`` is the standard error of the slope from the regression
    residuals (zero for an exact power law).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise DomainError("power-law fit needs at least three points")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise DomainError("power-law fit needs positive finite data")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    if (x.max() - x.min()) / math.log(10) < min_decades - 1e-12:
        raise DomainError(f"powers must span at least {min_decades} decade")
    fit = linregress(x, y)
    return PowerLawFit(float(math.exp(fit.intercept)), float(fit.slope),
                       float(fit.stderr), len(pts))
