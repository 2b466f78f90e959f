"""Cavity modes, multilinear interaction vertices and effective-process synthesis.

A vertex is a monomial in ladder operators, ``g * prod(legs)``, optionally
accompanied by its Hermitian conjugate.  Two vertices that share a mode can be
composed by treating that mode as a virtual excitation: every creation leg on
the virtual mode is contracted with an annihilation leg and each contraction
contributes one factor ``1/Lambda`` to the effective coupling, where
``Lambda = delta - 1j*kappa/2`` is the complex detuning of the eliminated mode.

All rates are angular frequencies in rad/s.  Hamiltonian coefficients are
taken literally: repeated legs such as ``a0 a0`` carry no extra symmetry
factor.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.constants import hbar

from .errors import DomainError, SingularityError, StructuralError, SynthesisError

__all__ = [
    "Mode",
    "Leg",
    "ModeGraph",
    "InteractionVertex",
    "EffectiveProcess",
    "ConservationReport",
    "CouplingReference",
    "check_conservation",
    "synthesize_effective",
    "classical_pump_reduce",
    "estimate_intrinsic_coupling",
    "enumerate_syntheses",
    "intracavity_photon_number",
    "default_lambda",
]

DAGGER_SUFFIXES = ("^", "†")


@dataclass(frozen=True)
class Mode:
    """A cavity resonance.

    Parameters
    ----------
    label : str
        Unique name, e.g. ``"a+2"`` or ``"b-2"``.
    m : int
        Relative azimuthal (angular-momentum) index.
    omega : float
        Resonance angular frequency [rad/s].
    kappa : float
        Total energy decay rate [rad/s].
    kappa_ext : float
        External (bus-coupled) decay rate [rad/s].
    delta : float
        Detuning from the rotating-frame reference [rad/s]; enters the
        Hamiltonian as ``delta * a^dag a``.
    """

    label: str
    m: int = 0
    omega: float = 0.0
    kappa: float = 1.0
    kappa_ext: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.label:
            raise StructuralError("mode label must be non-empty")
        if any(self.label.endswith(s) for s in DAGGER_SUFFIXES):
            raise StructuralError(f"mode label {self.label!r} ends with a dagger marker")
        if int(self.m) != self.m:
            raise DomainError(f"mode {self.label}: m must be an integer")
        object.__setattr__(self, "m", int(self.m))
        if not self.kappa > 0:
            raise DomainError(f"mode {self.label}: kappa must be positive, got {self.kappa}")
        if not 0 <= self.kappa_ext <= self.kappa:
            raise DomainError(
                f"mode {self.label}: need 0 <= kappa_ext <= kappa, got {self.kappa_ext}")

    @property
    def kappa_int(self) -> float:
        return self.kappa - self.kappa_ext

    def dag(self) -> "Leg":
        return Leg(self, True)

    def ann(self) -> "Leg":
        return Leg(self, False)


def default_lambda(mode: Mode) -> complex:
    """Elimination denominator ``delta - i kappa/2`` of a virtual mode."""
    return complex(mode.delta, -mode.kappa / 2)


@dataclass(frozen=True)
class Leg:
    mode: Mode
    dagger: bool = False

    def flipped(self) -> "Leg":
        return Leg(self.mode, not self.dagger)

    @property
    def label(self) -> str:
        return self.mode.label

    def sort_key(self):
        return (not self.dagger, self.mode.label)

    def __str__(self) -> str:
        return self.mode.label + ("^" if self.dagger else "")


def _canonical_legs(legs: Iterable[Leg]) -> tuple[Leg, ...]:
    return tuple(sorted(legs, key=Leg.sort_key))


def format_legs(legs: Sequence[Leg]) -> str:
    """Space-separated legs, creation first: ``"d^ d^ d^ a c"``."""
    return " ".join(str(leg) for leg in _canonical_legs(legs))


class ModeGraph:
    """Registry of modes addressed by label."""

    def __init__(self, modes: Iterable[Mode] = ()):
        self._modes: dict[str, Mode] = {}
        for mode in modes:
            self.add(mode)

    def add(self, mode: Mode) -> Mode:
        if mode.label in self._modes:
            raise StructuralError(f"duplicate mode label {mode.label!r}")
        self._modes[mode.label] = mode
        return mode

    def __getitem__(self, label: str) -> Mode:
        try:
            return self._modes[label]
        except KeyError:
            raise StructuralError(f"unknown mode {label!r}") from None

    def __contains__(self, item) -> bool:
        if isinstance(item, Mode):
            return self._modes.get(item.label) == item
        return item in self._modes

    def __iter__(self):
        return iter(self._modes.values())

    def __len__(self):
        return len(self._modes)

    @property
    def labels(self) -> list[str]:
        return list(self._modes)

    def leg(self, spec: str) -> Leg:
        """Parse ``"b-2^"`` / ``"b-2†"`` (creation) or ``"b-2"`` (annihilation)."""
        for suffix in DAGGER_SUFFIXES:
            if spec.endswith(suffix):
                return Leg(self[spec[: -len(suffix)]], True)
        return Leg(self[spec], False)

    def legs(self, specs: Iterable[str]) -> tuple[Leg, ...]:
        return tuple(self.leg(s) for s in specs)

    def vertex(self, g: complex, specs: Sequence[str], **kwargs) -> "InteractionVertex":
        legs = self.legs(specs)
        return InteractionVertex(order=len(legs) - 1, g=g, legs=legs, **kwargs)

    def with_mode(self, mode: Mode) -> "ModeGraph":
        """Copy with one mode replaced (same label)."""
        self[mode.label]
        return ModeGraph(mode if m.label == mode.label else m for m in self)


@dataclass(frozen=True)
class InteractionVertex:
    """One multilinear Hamiltonian term ``g * prod(legs)`` (+ h.c. if paired).

    ``order`` is the susceptibility order, so ``len(legs) == order + 1``:
    2 for a three-wave chi(2) term, 3 for a four-wave chi(3) term.
    """

    order: int
    g: complex
    legs: tuple[Leg, ...]
    hermitian_pair: bool = True
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "legs", tuple(self.legs))
        object.__setattr__(self, "g", complex(self.g))
        if self.order < 0 or len(self.legs) != self.order + 1:
            raise StructuralError(
                f"vertex {self.name or ''}: order {self.order} needs {self.order + 1} legs, "
                f"got {len(self.legs)}")

    @property
    def coupling(self) -> complex:
        return self.g

    @property
    def is_intrinsic(self) -> bool:
        return self.order in (2, 3)

    @property
    def modes(self) -> set[Mode]:
        return {leg.mode for leg in self.legs}

    def conjugate(self) -> "InteractionVertex":
        """Hermitian-conjugate partner: conjugated coupling, dagger-flipped legs."""
        legs = tuple(leg.flipped() for leg in reversed(self.legs))
        return replace(self, g=self.g.conjugate(), legs=legs)

    def __str__(self) -> str:
        return f"{self.g:.4g} * {format_legs(self.legs)}" + (" + h.c." if self.hermitian_pair else "")


@dataclass(frozen=True)
class EffectiveProcess:
    """A synthesized (and possibly pump-reduced) vertex.

    ``g_eff = pump_factor * prod(source couplings) / prod(Lambda)`` where the
    product over ``eliminated`` runs once per contracted leg pair.  ``g_source``
    keeps the coupling before any classical-pump reduction, so both the
    multi-photon coefficient and the reduced parametric coefficient are
    available.
    """

    g_eff: complex
    legs: tuple[Leg, ...]
    eliminated: tuple[tuple[Mode, complex], ...] = ()
    source_vertices: tuple[InteractionVertex, ...] = ()
    hermitian_pair: bool = True
    pumped: tuple[tuple[Mode, float], ...] = ()
    g_source: complex | None = None

    def __post_init__(self):
        object.__setattr__(self, "legs", tuple(self.legs))
        object.__setattr__(self, "eliminated", tuple((m, complex(lam)) for m, lam in self.eliminated))
        object.__setattr__(self, "source_vertices", tuple(self.source_vertices))
        object.__setattr__(self, "pumped", tuple(self.pumped))
        object.__setattr__(self, "g_eff", complex(self.g_eff))
        if self.g_source is None:
            object.__setattr__(self, "g_source", self.g_eff)
        if not self.eliminated and not self.pumped:
            raise SynthesisError("effective process needs at least one eliminated or pumped mode")
        gone = {m.label for m, _ in self.eliminated} | {m.label for m, _ in self.pumped}
        if any(leg.label in gone for leg in self.legs):
            raise SynthesisError("eliminated/pumped mode still present among legs")

    @property
    def g(self) -> complex:
        return self.g_eff

    @property
    def coupling(self) -> complex:
        return self.g_eff

    @property
    def order(self) -> int:
        return len(self.legs) - 1

    @property
    def modes(self) -> set[Mode]:
        return {leg.mode for leg in self.legs}

    @property
    def non_hermitian(self) -> bool:
        """True when any elimination denominator is lossy (complex Lambda)."""
        return any(lam.imag != 0 for _, lam in self.eliminated)

    @property
    def lambda_product(self) -> complex:
        return complex(np.prod([lam for _, lam in self.eliminated])) if self.eliminated else 1 + 0j

    def conjugate(self) -> "EffectiveProcess":
        return EffectiveProcess(
            g_eff=self.g_eff.conjugate(),
            legs=_canonical_legs(leg.flipped() for leg in self.legs),
            eliminated=tuple((m, lam.conjugate()) for m, lam in self.eliminated),
            source_vertices=tuple(v.conjugate() for v in self.source_vertices),
            hermitian_pair=self.hermitian_pair,
            pumped=self.pumped,
            g_source=self.g_source.conjugate(),
        )

    def __str__(self) -> str:
        return f"{self.g_eff:.4g} * {format_legs(self.legs)}" + (" + h.c." if self.hermitian_pair else "")


Term = Union[InteractionVertex, EffectiveProcess]


@dataclass(frozen=True)
class ConservationReport:
    momentum_sum: int
    energy_mismatch: float
    tolerance: float
    passes: bool


def _participating_modes(legs: Iterable[Leg]) -> list[Mode]:
    seen: dict[str, Mode] = {}
    for leg in legs:
        seen.setdefault(leg.label, leg.mode)
    return list(seen.values())


def check_conservation(vertex: Term | Sequence[Leg], tolerance: float | None = None,
                       graph: ModeGraph | None = None) -> ConservationReport:
    """Angular-momentum and energy balance of a monomial.

    Annihilated quanta count positive, created ones negative.  The default
    energy tolerance is half the smallest linewidth among the participating
    modes.
    """
    legs = tuple(vertex.legs if hasattr(vertex, "legs") else vertex)
    if graph is not None:
        for leg in legs:
            if leg.mode not in graph:
                raise StructuralError(f"leg references unregistered mode {leg.label!r}")
    momentum = sum(-leg.mode.m if leg.dagger else leg.mode.m for leg in legs)
    # exactly rounded, hence independent of leg order
    mismatch = math.fsum(-leg.mode.omega if leg.dagger else leg.mode.omega for leg in legs)
    if tolerance is None:
        modes = _participating_modes(legs)
        tolerance = 0.5 * min(m.kappa for m in modes) if modes else 0.0
    if tolerance < 0:
        raise DomainError("tolerance must be nonnegative")
    passes = momentum == 0 and abs(mismatch) <= tolerance
    return ConservationReport(momentum, mismatch, float(tolerance), passes)


def _as_parts(term: Term):
    """(coupling, legs, eliminated, atomic sources, hermitian flag, pumped)."""
    if isinstance(term, EffectiveProcess):
        return (term.g_eff, term.legs, term.eliminated, term.source_vertices,
                term.hermitian_pair, term.pumped)
    return term.g, term.legs, (), (term,), term.hermitian_pair, ()


def synthesize_effective(vertices: Sequence[Term], virtual_modes: Sequence[Mode],
                         lambdas: Sequence[complex] | None = None) -> EffectiveProcess:
    """Compose vertices by adiabatically eliminating shared virtual modes.

    Each virtual mode must carry equal numbers of creation and annihilation
    legs across the composition and appear in at least two vertices.  With
    ``k`` contracted pairs on a mode, its ``Lambda`` enters the denominator
    ``k`` times.  ``lambdas`` default to ``delta - i kappa/2`` per mode.

    Examples
    --------
    Five-wave mixing from ``g3 a b d^2`` and ``g2 b^ d^ c`` over ``b`` gives
    ``g2 g3 / Lambda_b * d^3 a c``.
    """
    if not vertices:
        raise SynthesisError("no vertices to compose")
    if lambdas is None:
        lambdas = [default_lambda(m) for m in virtual_modes]
    if len(lambdas) != len(virtual_modes):
        raise SynthesisError("need exactly one Lambda per virtual mode")
    lambdas = [complex(lam) for lam in lambdas]
    for mode, lam in zip(virtual_modes, lambdas):
        if lam == 0:
            raise SingularityError(f"Lambda for virtual mode {mode.label!r} is zero")
    virtual_labels = [m.label for m in virtual_modes]
    if len(set(virtual_labels)) != len(virtual_labels):
        raise SynthesisError("virtual modes listed twice")

    parts = [_as_parts(v) for v in vertices]
    coupling = complex(np.prod([p[0] for p in parts]))
    legs: list[Leg] = []
    eliminated: list[tuple[Mode, complex]] = []
    sources: list[InteractionVertex] = []
    pumped: list[tuple[Mode, float]] = []
    for _, vlegs, elim, src, _, pump in parts:
        legs.extend(vlegs)
        eliminated.extend(elim)
        sources.extend(src)
        pumped.extend(pump)

    denominator = 1 + 0j
    for mode, lam in zip(virtual_modes, lambdas):
        n_cre = sum(1 for leg in legs if leg.label == mode.label and leg.dagger)
        n_ann = sum(1 for leg in legs if leg.label == mode.label and not leg.dagger)
        holders = sum(1 for p in parts if any(leg.label == mode.label for leg in p[1]))
        if holders < 2:
            raise SynthesisError(f"virtual mode {mode.label!r} appears in fewer than two vertices")
        if n_cre != n_ann or n_cre == 0:
            raise SynthesisError(
                f"dangling virtual leg on {mode.label!r}: {n_cre} creation vs {n_ann} annihilation")
        eliminated.extend([(mode, lam)] * n_cre)
        denominator *= lam ** n_cre

    g_source = complex(np.prod([v.g_source if isinstance(v, EffectiveProcess) else v.g
                                for v in vertices]))
    return EffectiveProcess(
        g_eff=coupling / denominator,
        legs=_canonical_legs(leg for leg in legs if leg.label not in virtual_labels),
        eliminated=tuple(eliminated),
        source_vertices=tuple(sources),
        hermitian_pair=all(p[4] for p in parts),
        pumped=tuple(pumped),
        g_source=g_source / denominator,
    )


def classical_pump_reduce(term: Term, pump: Mode, n_pump: float,
                          phase: float = 0.0) -> EffectiveProcess:
    """Replace every pump leg by the coherent amplitude ``sqrt(n_pump) e^{i phase}``.

    The coupling picks up ``n_pump**(k/2)`` for ``k`` pump legs.  The pump may
    appear with only one dagger orientation in the term.
    """
    if n_pump < 0 or not math.isfinite(n_pump):
        raise DomainError(f"pump photon number must be finite and >= 0, got {n_pump}")
    g, legs, eliminated, sources, herm, pumped = _as_parts(term)
    pump_legs = [leg for leg in legs if leg.label == pump.label]
    if len({leg.dagger for leg in pump_legs}) > 1:
        raise DomainError(f"pump {pump.label!r} appears with both dagger orientations")
    amp = math.sqrt(n_pump)
    factor = 1 + 0j
    for leg in pump_legs:
        factor *= amp * np.exp(-1j * phase if leg.dagger else 1j * phase)
    g_source = term.g_source if isinstance(term, EffectiveProcess) else term.g
    return EffectiveProcess(
        g_eff=g * factor,
        legs=_canonical_legs(leg for leg in legs if leg.label != pump.label),
        eliminated=eliminated,
        source_vertices=sources,
        hermitian_pair=herm,
        pumped=tuple(pumped) + ((pump, float(n_pump)),),
        g_source=g_source,
    )


@dataclass(frozen=True)
class CouplingReference:
    """Known coupling ``g`` of an order-``order`` process with susceptibility
    ``chi`` in a cavity of mode volume ``V_m``; fixes the proportionality
    constant of ``g_n ~ chi_n / V_m**((n-1)/2)``."""

    order: int
    g: float
    chi: float
    V_m: float


def estimate_intrinsic_coupling(order: int, chi_n: float, V_m: float,
                                reference: CouplingReference) -> float:
    """Scale a reference coupling to another nonlinear order and mode volume."""
    if order < 2 or reference.order < 2:
        raise DomainError("nonlinear order must be >= 2")
    if V_m <= 0 or reference.V_m <= 0:
        raise DomainError("mode volume must be positive")
    if reference.chi == 0:
        raise DomainError("reference susceptibility must be nonzero")
    return (reference.g * (chi_n / reference.chi)
            * V_m ** (-(order - 1) / 2) / reference.V_m ** (-(reference.order - 1) / 2))


def intracavity_photon_number(power: float, mode: Mode, detuning: float = 0.0) -> float:
    """Photon number ``4 kappa_ext P / (hbar omega (kappa^2 + 4 detuning^2))``."""
    if power < 0:
        raise DomainError("power must be nonnegative")
    if mode.omega <= 0:
        raise DomainError(f"mode {mode.label!r} needs a positive omega to convert power")
    return 4 * mode.kappa_ext * power / (hbar * mode.omega * (mode.kappa ** 2 + 4 * detuning ** 2))


def _process_key(legs: Sequence[Leg]) -> tuple:
    fwd = tuple((leg.label, leg.dagger) for leg in _canonical_legs(legs))
    rev = tuple((leg.label, leg.dagger) for leg in _canonical_legs(leg.flipped() for leg in legs))
    return min(fwd, rev)


def _connected(groups: list[set[str]], shared: set[str]) -> bool:
    if len(groups) <= 1:
        return True
    reached = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j, g in enumerate(groups):
            if j not in reached and groups[i] & g & shared:
                reached.add(j)
                frontier.append(j)
    return len(reached) == len(groups)


def enumerate_syntheses(graph: ModeGraph, vertices: Sequence[InteractionVertex],
                        max_order: int = 4, tolerance: float | None = None,
                        lambdas: Mapping[str, complex] | None = None,
                        max_vertices: int | None = None) -> list[EffectiveProcess]:
    """All conservation-passing effective processes up to ``max_order``.

    Vertices are combined (with repetition, in either Hermitian orientation)
    into connected compositions.  Every mode whose creation and annihilation
    legs balance is eliminated as virtual; compositions leaving a mode with
    both orientations, or pairing a vertex with its own conjugate, are
    self-energy terms and are skipped.  Results are deduplicated up to leg
    ordering and Hermitian conjugation.
    """
    if max_order < 3:
        raise DomainError("max_order must be >= 3")
    for v in vertices:
        for leg in v.legs:
            if leg.mode not in graph:
                raise StructuralError(f"vertex leg references unregistered mode {leg.label!r}")
    lambdas = dict(lambdas or {})
    if max_vertices is None:
        max_vertices = max(2, max_order - 1)

    oriented: list[tuple[int, InteractionVertex]] = []
    for i, v in enumerate(vertices):
        oriented.append((i, v))
        if v.hermitian_pair:
            oriented.append((i, v.conjugate()))

    found: dict[tuple, EffectiveProcess] = {}
    for size in range(2, max_vertices + 1):
        for combo in itertools.combinations_with_replacement(range(len(oriented)), size):
            picked = [oriented[k] for k in combo]
            src = Counter(i for i, _ in picked)
            if any(len({k for k in combo if oriented[k][0] == i}) > 1 for i in src):
                continue  # vertex combined with its own conjugate
            legs = [leg for _, v in picked for leg in v.legs]
            cre = Counter(leg.label for leg in legs if leg.dagger)
            ann = Counter(leg.label for leg in legs if not leg.dagger)
            holders = Counter(lbl for _, v in picked for lbl in {leg.label for leg in v.legs})
            virtual = sorted(lbl for lbl in cre if cre[lbl] == ann.get(lbl, 0) and holders[lbl] >= 2)
            if not virtual:
                continue
            rest = [leg for leg in legs if leg.label not in virtual]
            if not rest or len(rest) - 1 > max_order:
                continue
            rest_cre = {leg.label for leg in rest if leg.dagger}
            rest_ann = {leg.label for leg in rest if not leg.dagger}
            if rest_cre & rest_ann:
                continue
            groups = [{leg.label for leg in v.legs} for _, v in picked]
            if not _connected(groups, set(virtual)):
                continue
            key = _process_key(rest)
            if key in found:
                continue
            modes = [graph[lbl] for lbl in virtual]
            lams = [complex(lambdas[m.label]) if m.label in lambdas else default_lambda(m)
                    for m in modes]
            try:
                proc = synthesize_effective([v for _, v in picked], modes, lams)
            except SynthesisError:
                continue
            if check_conservation(proc, tolerance).passes:
                found[key] = proc
    return list(found.values())
