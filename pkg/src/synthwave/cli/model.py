"""Glue from a scenario to the engines: effective terms, pump reduction, pair sources."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..counting import PairSource
from ..errors import InputError, SynthesisError
from ..fock_sim import CorrelationGrid, GaussianSteadyState, fit_wing_time_constants, gaussian_oracle
from ..process_algebra import (EffectiveProcess, Mode, classical_pump_reduce, default_lambda,
                               intracavity_photon_number, synthesize_effective)
from .scenario import Scenario

# pair rates below this fraction of the geometric-mean singles count as uncorrelated
PAIR_RATE_FLOOR = 1e-9


def lambdas_for(scn: Scenario, modes) -> list[complex]:
    table = scn.section("synthesis").get("lambdas", {})
    return [complex(*table[m.label]) if m.label in table else default_lambda(m) for m in modes]


def _orient_and_synthesize(group, virtual, lambdas) -> EffectiveProcess:
    """Try Hermitian orientations of ``group`` (first vertex fixed) until one contracts."""
    last = None
    for flips in itertools.product((False, True), repeat=len(group) - 1):
        oriented = [group[0]] + [v.conjugate() if f else v for v, f in zip(group[1:], flips)]
        try:
            return synthesize_effective(oriented, virtual, lambdas)
        except SynthesisError as exc:
            last = exc
    raise last or SynthesisError("nothing to synthesize")


def effective_terms(scn: Scenario) -> list:
    """Scenario vertices with the ``synthesis.virtual`` modes eliminated."""
    labels = scn.section("synthesis").get("virtual", [])
    if not labels:
        return list(scn.vertices)
    virtual = [scn.mode(l) for l in labels]
    touching = [v for v in scn.vertices if any(leg.label in labels for leg in v.legs)]
    others = [v for v in scn.vertices if v not in touching]
    if len(touching) < 2:
        raise SynthesisError("virtual modes must be shared by at least two vertices")
    return [_orient_and_synthesize(touching, virtual, lambdas_for(scn, virtual))] + others


def pump_axis(scn: Scenario) -> tuple[list[float], str]:
    pump = scn.pump
    if pump is None:
        raise InputError("this command needs a [pump] section")
    if pump["powers"]:
        return list(pump["powers"]), "power_W"
    return list(pump["photon_numbers"]), "n_pump"


def pump_photon_number(scn: Scenario, value: float, axis: str) -> float:
    if axis == "n_pump":
        return value
    mode = scn.mode(scn.pump["mode"])
    return intracavity_photon_number(value, mode, -mode.delta)


@dataclass
class QuantumModel:
    terms: list
    modes: list[Mode]
    n_pump: float

    def gaussian(self) -> GaussianSteadyState:
        return gaussian_oracle(self.modes, self.terms)

    @property
    def quadratic(self) -> bool:
        return all(len(t.legs) <= 2 for t in self.terms)


def quantum_model(scn: Scenario, n_pump: float | None = None) -> QuantumModel:
    """Effective terms reduced at the pump photon number; the pump mode is dropped."""
    terms = effective_terms(scn)
    if scn.pump is not None and n_pump is not None:
        pump = scn.mode(scn.pump["mode"])
        terms = [classical_pump_reduce(t, pump, n_pump, scn.pump["phase"])
                 if any(leg.label == pump.label for leg in t.legs) else t for t in terms]
    terms = [t for t in terms if t.legs]
    used = {leg.label for t in terms for leg in t.legs}
    modes = [m for m in scn.modes if m.label in used]
    if not modes:
        raise InputError("no dynamical modes remain after pump reduction")
    return QuantumModel(terms, modes, float(n_pump or 0.0))


def model_at(scn: Scenario, index: int) -> QuantumModel:
    values, axis = pump_axis(scn)
    return quantum_model(scn, pump_photon_number(scn, values[index], axis))


def tau_grid(modes, points: int, span: float) -> np.ndarray:
    kmin = min(m.kappa for m in modes)
    return np.linspace(-span / kmin, span / kmin, points)


def wing_constants(state: GaussianSteadyState, x: str, y: str, points: int = 201,
                   span: float = 10.0) -> tuple[float, float, CorrelationGrid]:
    modes = [state.modes[state.index(x)], state.modes[state.index(y)]]
    taus = tau_grid(modes, points, span)
    grid = CorrelationGrid(taus, state.g2(x, y, taus), x, y)
    tl, tr = fit_wing_time_constants(grid)
    return tl, tr, grid


@dataclass
class SourceSummary:
    source: PairSource
    flux: tuple[float, float]
    correlated: bool


def pair_source(model: QuantumModel, x: str, y: str, background=(0.0, 0.0),
                loss=(0.0, 0.0), detectors=None) -> SourceSummary:
    """Counting source for modes ``x``, ``y`` from the Gaussian steady state.

    The correlated part is the excess-coincidence pair rate; singles in
    excess of it enter as flat background, thinned by the channel loss and
    (when ``detectors`` are given) the detector efficiency like the pair
    photons.  Configured background is taken as already detected.  Modes
    outside the model emit nothing.
    """
    labels = {m.label for m in model.modes}
    state = model.gaussian() if (labels & {x, y}) else None
    flux = tuple(state.flux(l) if state is not None and l in labels else 0.0 for l in (x, y))
    rate = 0.0
    if state is not None and x in labels and y in labels and min(flux) > 0:
        rate = state.pair_rate(x, y)
        if rate <= PAIR_RATE_FLOOR * math.sqrt(flux[0] * flux[1]):
            rate = 0.0
    if rate > 0:
        tl, tr, _ = wing_constants(state, x, y)
    else:
        kx = next((m.kappa for m in model.modes if m.label == x), 1.0)
        ky = next((m.kappa for m in model.modes if m.label == y), 1.0)
        tl, tr = 1 / kx, 1 / ky
    eta = [(1 - loss[c]) * (detectors[c].efficiency if detectors is not None else 1.0)
           for c in (0, 1)]
    bg = tuple({"uncorrelated_singles": eta[c] * max(flux[c] - rate, 0.0),
                "configured": background[c]} for c in (0, 1))
    return SourceSummary(PairSource(rate, tl, tr, bg, tuple(loss)), flux, rate > 0)
