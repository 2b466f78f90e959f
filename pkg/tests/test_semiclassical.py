import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import hbar

from synthwave.errors import ConvergenceError, DomainError, StructuralError
from synthwave.process_algebra import Mode, ModeGraph
from synthwave.semiclassical import (cme_observable, cme_steady_state, power_law_fit,
                                     sweep_power, transmission_spectrum)

TWO_PI = 2 * math.pi
W0 = TWO_PI * 193.4e12
KAP = TWO_PI * 200e6


@pytest.fixture(scope="module")
def device():
    return ModeGraph([
        Mode("a0", 0, W0, KAP, KAP / 2),
        Mode("a-2", -2, W0 - TWO_PI * 1e12, KAP, KAP / 2),
        Mode("a+2", 2, W0 + TWO_PI * 1e12, KAP, KAP / 2),
        Mode("b-2", -2, 2 * W0 - TWO_PI * 1e12, 3 * KAP, 1.5 * KAP),
    ])


def test_linear_cavity_photon_number(device):
    m = device["a0"]
    st_ = cme_steady_state([m], [], {"a0": 1e-3})
    assert st_.photon_number("a0") == pytest.approx(4 * m.kappa_ext * 1e-3 / (hbar * m.omega * m.kappa ** 2),
                                                    rel=1e-12)
    assert st_.converged and st_.residual <= 1e-10
    # critical coupling: nothing is transmitted on resonance
    assert st_.transmitted_flux("a0") == pytest.approx(0, abs=1e-6 * 1e-3 / (hbar * m.omega))


def test_detuned_linear_cavity_is_lorentzian():
    m = Mode("a", 0, W0, KAP, KAP / 4, delta=KAP)
    st_ = cme_steady_state([m], [], {"a": 1e-3})
    n0 = 4 * m.kappa_ext * 1e-3 / (hbar * W0 * m.kappa ** 2)
    assert st_.photon_number("a") == pytest.approx(n0 / 5, rel=1e-12)


def test_undriven_system_stays_empty(device):
    st_ = cme_steady_state(list(device), [device.vertex(1.0, ["a0", "a-2", "b-2^"])], {})
    assert not np.any(st_.alpha)


def test_drive_on_unknown_mode(device):
    with pytest.raises(StructuralError):
        cme_steady_state(list(device), [], {"zz": 1e-3})


def test_negative_drive_power(device):
    with pytest.raises(DomainError):
        cme_steady_state(list(device), [], {"a0": -1.0})


def test_sfg_conserves_photon_flux(device):
    """Each up-converted photon consumes one pump and one probe photon."""
    modes = [Mode(m.label, m.m, m.omega, m.kappa, m.kappa) for m in device]  # no internal loss
    verts = [ModeGraph(modes).vertex(1e3, ["a0", "a-2", "b-2^"])]
    st_ = cme_steady_state(modes, verts, {"a0": 1e-3, "a-2": 5e-4})
    absorbed = [abs(st_.drive[i]) ** 2 - st_.transmitted_flux(lbl) for i, lbl in ((0, "a0"), (1, "a-2"))]
    gained = st_.output_flux("b-2")
    assert absorbed[0] == pytest.approx(gained, rel=1e-6)
    assert absorbed[1] == pytest.approx(gained, rel=1e-6)


@pytest.mark.parametrize("vertex, target, exponent", [
    (("a0", "a-2", "b-2^"), "b-2", 1.0),
    (("a0", "a0", "a+2^", "a-2^"), "a+2", 2.0),
])
def test_undepleted_exponents(device, vertex, target, exponent):
    g = 1e2 if len(vertex) == 3 else 1.0
    ev = cme_observable(list(device), [device.vertex(g, list(vertex))], "a0", target, {"a-2": 1e-4})
    fit = power_law_fit(sweep_power(np.logspace(-4, -3, 5), ev).points)
    assert fit.N == pytest.approx(exponent, abs=0.02)


def test_second_harmonic_exponent():
    a = Mode("a", 0, W0, KAP, KAP / 2)
    b = Mode("b", 0, 2 * W0, 3 * KAP, 1.5 * KAP)
    g = ModeGraph([a, b])
    ev = cme_observable([a, b], [g.vertex(1e2, ["a", "a", "b^"])], "a", "b")
    assert power_law_fit(sweep_power(np.logspace(-4, -3, 5), ev).points).N == pytest.approx(2, abs=0.02)


def test_output_flux_depletion_bends_exponent(device):
    ev = cme_observable(list(device), [device.vertex(1e6, ["a0", "a-2", "b-2^"])], "a0", "b-2",
                        {"a-2": 1e-4})
    fit = power_law_fit(sweep_power(np.logspace(-3, -2, 5), ev).points)
    assert fit.N < 0.98


@settings(max_examples=20)
@given(st.floats(0, 2 * math.pi))
def test_global_drive_phase_is_a_symmetry(device, phase):
    verts = [device.vertex(1e3, ["a0", "a-2", "b-2^"])]
    ref = cme_steady_state(list(device), verts, {"a0": 1e-3, "a-2": 1e-4})
    rot = cme_steady_state(list(device), verts, {"a0": (1e-3, phase), "a-2": (1e-4, phase)})
    for label in ("a0", "a-2", "b-2"):
        assert rot.photon_number(label) == pytest.approx(ref.photon_number(label), rel=1e-8)


def kerr_cubic(n, flux, m, shift):
    """Steady-state condition of a Kerr cavity: ``n ((delta + shift n)^2 + kappa^2/4) = kappa_ext flux``."""
    return n * ((m.delta + shift * n) ** 2 + m.kappa ** 2 / 4) - m.kappa_ext * flux


def test_kerr_bistability_is_flagged():
    m = Mode("a", 0, 1e15, 1.0, 0.5, delta=-3.0)
    g = ModeGraph([m])
    # the self-adjoint monomial plus its h.c. partner doubles the coupling
    v = g.vertex(0.01, ["a^", "a^", "a", "a"])
    for flux, bistable in ((50.0, False), (150.0, True)):
        st_ = cme_steady_state([m], [v], {"a": flux * hbar * m.omega})
        assert st_.multistable == bistable
        assert kerr_cubic(st_.photon_number("a"), flux, m, 0.04) == pytest.approx(0, abs=1e-6)


def test_unreachable_tolerance_raises_with_residual(device):
    with pytest.raises(ConvergenceError) as exc:
        cme_steady_state(list(device), [device.vertex(1e3, ["a0", "a-2", "b-2^"])],
                         {"a0": 1e-3, "a-2": 1e-4}, tol=0.0)
    assert exc.value.residual >= 0


# transmission ----------------------------------------------------------------

def test_transmission_values():
    crit = Mode("a", kappa=2.0, kappa_ext=1.0)
    under = Mode("a", kappa=2.0, kappa_ext=0.5)
    assert transmission_spectrum(crit, [0.0])[0] == pytest.approx(0.0)
    assert transmission_spectrum(under, [0.0])[0] == pytest.approx(0.25)
    assert transmission_spectrum(crit, [1e9])[0] == pytest.approx(1.0, abs=1e-8)


def test_transmission_half_depth_at_half_linewidth():
    m = Mode("a", kappa=2.0, kappa_ext=1.0)
    assert transmission_spectrum(m, [1.0])[0] == pytest.approx(0.5)


@given(st.floats(0.1, 10), st.floats(0, 0.5), st.lists(st.floats(-100, 100), min_size=1, max_size=20))
def test_transmission_bounded_with_minimum_on_resonance(kappa, ratio, detunings):
    m = Mode("a", kappa=kappa, kappa_ext=ratio * kappa)
    t = transmission_spectrum(m, detunings)
    t0 = transmission_spectrum(m, [0.0])[0]
    assert np.all((t >= -1e-12) & (t <= 1 + 1e-12))
    assert np.all(t >= t0 - 1e-12)


# sweeps and fits -----------------------------------------------------------------

def test_sweep_records_failures_and_continues():
    def ev(p):
        if p == 2.0:
            raise ConvergenceError("no", 1.0)
        return p
    res = sweep_power([1.0, 2.0, 3.0], ev)
    assert res.points == [(1.0, 1.0), (3.0, 3.0)]
    assert res.failures[0][0] == 2.0


@pytest.mark.parametrize("powers", [[1.0, 2.0], [1.0, -2.0, 3.0], [0.0, 1.0, 2.0]])
def test_sweep_preconditions(powers):
    with pytest.raises(DomainError):
        sweep_power(powers, lambda p: p)


def test_power_law_fit_exact_lines():
    lin = power_law_fit([(1, 2), (2, 4), (4, 8)])
    assert (lin.N, lin.A, lin.sigma_N) == (pytest.approx(1.0), pytest.approx(2.0), pytest.approx(0, abs=1e-12))
    assert power_law_fit([(1, 1), (2, 8), (4, 64)]).N == pytest.approx(3.0)


@pytest.mark.parametrize("points", [[(1, 1), (2, 0), (4, 3)], [(1, 1), (2, 2)],
                                    [(1, 1), (1.1, 2), (1.2, 3)]])
def test_power_law_fit_rejects_bad_data(points):
    with pytest.raises(DomainError):
        power_law_fit(points)


@given(st.floats(0.1, 10), st.floats(-4, 4), st.floats(-3, 3))
def test_power_law_fit_recovers_parameters(A, N, log_p0):
    p = 10 ** (log_p0 + np.linspace(0, 1, 6))
    fit = power_law_fit(list(zip(p, A * p ** N)))
    assert fit.N == pytest.approx(N, abs=1e-9)
    assert fit.A == pytest.approx(A, rel=1e-8)


def test_power_law_sigma_from_scatter():
    rng = np.random.default_rng(3)
    p = np.logspace(0, 2, 40)
    y = 3 * p ** 1.5 * np.exp(rng.normal(0, 0.05, p.size))
    fit = power_law_fit(list(zip(p, y)))
    assert fit.sigma_N > 0
    assert abs(fit.N - 1.5) < 4 * fit.sigma_N
