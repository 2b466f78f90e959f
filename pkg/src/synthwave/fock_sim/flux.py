"""Photon-pair fluxes, cutoff convergence and virtual-mode elimination checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import DomainError, InputError
from ..process_algebra import (InteractionVertex, Leg, Mode, classical_pump_reduce,
                               synthesize_effective)
from .gaussian import gaussian_oracle
from .lindblad import DIRECT_SOLVE_LIMIT, QuantumState, steady_state
from .space import HilbertSpace


@dataclass(frozen=True)
class PairFlux:
    x: str
    y: str
    flux_x: float
    flux_y: float

    @property
    def mismatch(self) -> float:
        """Relative disagreement of the two out-coupled fluxes."""
        top = max(abs(self.flux_x), abs(self.flux_y))
        return 0.0 if top == 0 else abs(self.flux_x - self.flux_y) / top


def _mode_of(state, label) -> Mode:
    modes = state.space.modes if isinstance(state, QuantumState) else state.modes
    for m in modes:
        if m.label == label:
            return m
    raise InputError(f"mode {label!r} not in state")


def pair_flux(state, x: str, y: str, kappa_ext: tuple[float, float] | None = None) -> PairFlux:
    """Out-coupled photon fluxes ``kappa_ext * <n>`` of both pair members [1/s].

    ``state`` may be a Fock ``QuantumState`` or a ``GaussianSteadyState``.
    """
    mx, my = _mode_of(state, x), _mode_of(state, y)
    kx, ky = (mx.kappa_ext, my.kappa_ext) if kappa_ext is None else kappa_ext
    return PairFlux(x, y, kx * state.mean_photon(x), ky * state.mean_photon(y))


@dataclass
class ConvergedSolution:
    state: QuantumState
    cutoffs: tuple[int, ...]
    converged: bool
    relative_change: float
    history: list


def _observables(state: QuantumState, g2_pairs) -> np.ndarray:
    vals = list(state.photon_numbers().values())
    for x, y in g2_pairs:
        a_x = state.space.destroy(x)
        a_y = state.space.destroy(y)
        op = a_x.T @ a_y.T @ a_y @ a_x
        nx, ny = state.mean_photon(x), state.mean_photon(y)
        vals.append(np.real(state.expect(op)) / (nx * ny) if nx * ny > 0 else 0.0)
    return np.asarray(vals, dtype=float)


def solve_converged(modes: Sequence[Mode], terms, kappas=None, start: int | Sequence[int] = 5,
                    rel_tol: float = 0.01, g2_pairs: Iterable[tuple[str, str]] = (),
                    direct_limit: int = DIRECT_SOLVE_LIMIT, max_rounds: int = 4) -> ConvergedSolution:
    """Steady state with cutoffs raised until observables change by < ``rel_tol``.

    Cutoffs are doubled while the doubled Liouville space fits the direct
    solver; otherwise the largest uniform increment that fits is used.  When
    no larger space fits, the result is returned with ``converged=False``.
    """
    g2_pairs = list(g2_pairs)
    space = HilbertSpace(modes, start)
    state = steady_state(space, list(terms), kappas)
    obs = _observables(state, g2_pairs)
    history = [(space.cutoffs, obs)]
    change = math.inf
    for _ in range(max_rounds):
        nxt = _next_cutoffs(space.cutoffs, direct_limit, space.max_dim)
        if nxt is None:
            break
        bigger = HilbertSpace(modes, nxt, space.max_dim)
        new_state = steady_state(bigger, list(terms), kappas)
        new_obs = _observables(new_state, g2_pairs)
        scale = np.maximum(np.abs(new_obs), 1e-300)
        change = float(np.max(np.abs(new_obs - obs) / scale))
        history.append((bigger.cutoffs, new_obs))
        if change < rel_tol:
            return ConvergedSolution(state, space.cutoffs, True, change, history)
        space, state, obs = bigger, new_state, new_obs
    return ConvergedSolution(state, space.cutoffs, False, change, history)


def _next_cutoffs(cutoffs, direct_limit, max_dim):
    def fits(cs):
        d = int(np.prod([c + 1 for c in cs]))
        return d <= max_dim and d * d <= direct_limit

    doubled = tuple(2 * c for c in cutoffs)
    if fits(doubled):
        return doubled
    for step in range(max(cutoffs), 0, -1):
        cand = tuple(c + step for c in cutoffs)
        if fits(cand):
            return cand
    return None


def _substitute(term, mode: Mode):
    def fix(leg: Leg) -> Leg:
        return Leg(mode, leg.dagger) if leg.label == mode.label else leg
    if isinstance(term, InteractionVertex):
        return replace(term, legs=tuple(fix(l) for l in term.legs))
    return replace(term, legs=tuple(fix(l) for l in term.legs))


def _term_modes(terms) -> list[Mode]:
    seen: dict[str, Mode] = {}
    for t in terms:
        for leg in t.legs:
            seen.setdefault(leg.label, leg.mode)
    return list(seen.values())


@dataclass(frozen=True)
class EliminationRow:
    lam: complex
    rate_multiple: float
    flux_full: float
    flux_effective: float

    @property
    def ratio(self) -> float:
        return self.flux_full / self.flux_effective

    @property
    def deviation(self) -> float:
        return abs(self.ratio - 1)


def reference_rate(vertices, pump: Mode, n_pump: float, exclude: str) -> float:
    """Largest rate other than the virtual mode's own: linewidths and pumped couplings."""
    reduced = [classical_pump_reduce(v, pump, n_pump) for v in vertices]
    rates = [abs(t.g_eff) for t in reduced]
    rates += [m.kappa for m in _term_modes(reduced) if m.label != exclude]
    rates += [abs(m.delta) for m in _term_modes(reduced) if m.label != exclude]
    return max(rates)


def virtual_mode_convergence(vertices: Sequence[InteractionVertex], virtual: Mode, pump: Mode,
                             n_pump: float, lambdas: Iterable[complex], signal: str,
                             method: str = "lindblad",
                             cutoffs: Mapping[str, int] | int | None = None) -> list[EliminationRow]:
    """Flux ratio between the explicit three-mode model and its effective reduction.

    For each ``Lambda`` the virtual mode is given ``delta = Re Lambda`` and
    ``kappa = -2 Im Lambda``.  The full model keeps the virtual mode as a
    dynamical mode; the effective model is ``synthesize_effective`` followed by
    ``classical_pump_reduce``.  Both are solved with the same engine
    (``"lindblad"`` or ``"gaussian"``) and the out-coupled flux of ``signal``
    is compared.

    ``signal`` should be the converted output of the effective process, not a
    mode that also exchanges photons with the virtual mode outside it.
    """
    if method not in ("lindblad", "gaussian"):
        raise InputError(f"unknown method {method!r}")
    rows = []
    for lam in lambdas:
        lam = complex(lam)
        if lam.imag >= 0:
            raise DomainError("Lambda must have a negative imaginary part (-kappa/2)")
        vmode = replace(virtual, delta=lam.real, kappa=-2 * lam.imag, kappa_ext=0.0)
        verts = [_substitute(v, vmode) for v in vertices]
        full = [classical_pump_reduce(v, pump, n_pump) for v in verts]
        eff = classical_pump_reduce(synthesize_effective(verts, [vmode], [lam]), pump, n_pump)
        scale = reference_rate(verts, pump, n_pump, vmode.label)
        fluxes = []
        for terms in (full, [eff]):
            modes = _term_modes(terms)
            if method == "gaussian":
                st = gaussian_oracle(modes, terms)
            else:
                cut = cutoffs if cutoffs is not None else {m.label: 2 if m.label == vmode.label else 3
                                                          for m in modes}
                if isinstance(cut, Mapping):
                    cut = {m.label: cut.get(m.label, 3) for m in modes}
                st = steady_state(HilbertSpace(modes, cut), terms)
            sig = next(m for m in modes if m.label == signal)
            fluxes.append(sig.kappa_ext * st.mean_photon(signal))
        rows.append(EliminationRow(lam, abs(lam) / scale, fluxes[0], fluxes[1]))
    return rows
