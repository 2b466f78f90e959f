"""Command implementations; each returns a ``RunReport``."""
from __future__ import annotations

import math
import time

from ..counting import (FransonSetup, car, default_windows, expected_car, expected_visibility,
                        extract_visibility, franson_phase_sweep, fringe_fit, histogram,
                        invert_background_for_visibility, simulate_streams)
from ..counting.franson import car_visibility, franson_windows
from ..counting.histogram import bin_span
from ..errors import DomainError, InputError, UndefinedCARError
from ..fock_sim import (CorrelationGrid, cross_correlation, fit_wing_time_constants, pair_flux,
                        solve_converged)
from ..process_algebra import Leg, check_conservation, enumerate_syntheses, format_legs
from ..semiclassical import cme_observable, power_law_fit, sweep_power
from .model import (effective_terms, model_at, pair_source, pump_axis, pump_photon_number,
                    quantum_model, tau_grid)
from .report import RunReport
from .scenario import Scenario

COMMANDS = ("synthesize", "conserve", "simulate", "sweep", "counts", "franson", "report")
# guard against runaway Monte Carlo sizes
MAX_EXPECTED_EVENTS = 5e7


def _tol(value):
    return None if value == "auto" else float(value)


def _new_report(command: str, scn: Scenario) -> RunReport:
    return RunReport(command, scn.digest(), scn.input_hash(), scn.seed, scn.canonical())


def _process_row(i, proc, tol):
    rep = check_conservation(proc, tol)
    lp = proc.lambda_product
    return (i, format_legs(proc.legs), proc.order, proc.g_eff.real, proc.g_eff.imag,
            abs(proc.g_eff), " ".join(m.label for m, _ in proc.eliminated), lp.real, lp.imag,
            proc.non_hermitian, rep.momentum_sum, rep.energy_mismatch, rep.passes)


PROCESS_COLUMNS = ["index", "legs", "order", "g_eff_re", "g_eff_im", "g_eff_abs", "eliminated",
                   "lambda_product_re", "lambda_product_im", "non_hermitian", "momentum_sum",
                   "energy_mismatch", "passes"]


def run_synthesize(scn: Scenario) -> RunReport:
    rep = _new_report("synthesize", scn)
    syn = scn.section("synthesis") or {"max_order": 4, "tolerance": "auto", "lambdas": {},
                                       "virtual": []}
    tol = _tol(syn["tolerance"])
    lambdas = {k: complex(*v) for k, v in syn["lambdas"].items()}
    procs = enumerate_syntheses(scn.graph, scn.vertices, syn["max_order"], tol, lambdas)
    t = rep.table("processes", PROCESS_COLUMNS)
    for i, p in enumerate(procs):
        t.add(*_process_row(i, p, tol))
    if syn["virtual"]:
        target = effective_terms(scn)[0]
        rep.table("targeted", PROCESS_COLUMNS).add(*_process_row(0, target, tol))
    rep.diagnostics["n_processes"] = len(procs)
    return rep


def pair_candidate(scn: Scenario, x: str, y: str):
    """Legs ``pump^k x^ y^`` with ``k`` the nearest integer to ``(w_x + w_y) / w_pump``."""
    pump = scn.mode(scn.pump["mode"])
    mx, my = scn.mode(x), scn.mode(y)
    k = max(1, round((mx.omega + my.omega) / pump.omega))
    return [Leg(pump, False)] * k + [Leg(mx, True), Leg(my, True)], k


def run_conserve(scn: Scenario) -> RunReport:
    rep = _new_report("conserve", scn)
    sec = scn.section("conserve") or {"pairs": [], "tolerance": "auto"}
    tol = _tol(sec["tolerance"])
    t = rep.table("vertices", ["name", "legs", "momentum_sum", "energy_mismatch", "tolerance",
                               "passes"])
    for v in scn.vertices:
        r = check_conservation(v, tol, scn.graph)
        t.add(v.name, format_legs(v.legs), r.momentum_sum, r.energy_mismatch, r.tolerance, r.passes)
    t = rep.table("pairs", ["x", "y", "pump_photons", "legs", "momentum_sum", "energy_mismatch",
                            "tolerance", "passes", "status"])
    if sec["pairs"] and scn.pump is None:
        raise InputError("pair conservation checks need a [pump] section")
    for x, y in sec["pairs"]:
        legs, k = pair_candidate(scn, x, y)
        r = check_conservation(legs, tol, scn.graph)
        t.add(x, y, k, format_legs(legs), r.momentum_sum, r.energy_mismatch, r.tolerance, r.passes,
              "phase-matched" if r.passes else "excluded")
    return rep


def run_simulate(scn: Scenario) -> RunReport:
    rep = _new_report("simulate", scn)
    sec = scn.section("simulate")
    if not sec:
        raise InputError("simulate needs a [simulate] section")
    model = model_at(scn, sec["pump_index"]) if scn.pump else quantum_model(scn)
    rep.diagnostics["n_pump"] = model.n_pump
    rep.diagnostics["terms"] = [str(t) for t in model.terms]
    gauss = model.gaussian() if model.quadratic and sec["method"] in ("gaussian", "both") else None
    lind = None
    if sec["method"] in ("lindblad", "both"):
        sol = solve_converged(model.modes, model.terms, start=sec["cutoffs"], rel_tol=sec["rel_tol"],
                              g2_pairs=[tuple(p) for p in sec["pairs"]],
                              max_rounds=sec["max_rounds"])
        lind = sol.state
        rep.diagnostics.update(cutoffs=list(sol.cutoffs), cutoff_converged=sol.converged,
                               cutoff_relative_change=sol.relative_change,
                               steady_residual=lind.residual, steady_method=lind.diagnostics["method"])
        if not sol.converged:
            rep.diagnostics["warning"] = "cutoff convergence test not met"
    if gauss is not None:
        rep.diagnostics["gain_ratio"] = gauss.gain_ratio
    t = rep.table("photon_numbers", ["mode", "n_lindblad", "n_gaussian", "rel_diff"])
    for m in model.modes:
        nl = lind.mean_photon(m.label) if lind is not None else math.nan
        ng = gauss.mean_photon(m.label) if gauss is not None else math.nan
        diff = abs(nl - ng) / abs(ng) if lind is not None and gauss is not None and ng else math.nan
        t.add(m.label, nl, ng, diff)
    state = lind if lind is not None else gauss
    ft = rep.table("fluxes", ["x", "y", "flux_x", "flux_y", "mismatch"])
    wt = rep.table("wings", ["x", "y", "tau_left_s", "tau_right_s"])
    for x, y in sec["pairs"]:
        pf = pair_flux(state, x, y)
        ft.add(x, y, pf.flux_x, pf.flux_y, pf.mismatch)
        if gauss is not None:
            taus = tau_grid(model.modes, sec["tau_points"], sec["tau_span"])
            grid = CorrelationGrid(taus, gauss.g2(x, y, taus), x, y)
        else:
            taus = tau_grid(model.modes, sec["tau_points"], sec["tau_span"])
            grid = cross_correlation(lind.space, model.terms, None, x, y, taus, state=lind)
        gt = rep.table(f"g2_{x}_{y}", ["tau_s", "g2"])
        for tau, g in zip(grid.tau, grid.g2):
            gt.add(float(tau), float(g))
        try:
            tl, tr = fit_wing_time_constants(grid)
        except InputError:
            tl = tr = math.nan
        wt.add(x, y, tl, tr)
    return rep


def run_sweep(scn: Scenario) -> RunReport:
    rep = _new_report("sweep", scn)
    sec = scn.section("sweep")
    if not sec:
        raise InputError("sweep needs a [sweep] section")
    values, axis = pump_axis(scn)
    if sec["engine"] == "quantum":
        if len(sec["pair"]) != 2:
            raise InputError("quantum sweeps need sweep.pair = [x, y]")
        x, y = sec["pair"]

        def evaluate(p):
            st = quantum_model(scn, pump_photon_number(scn, p, axis)).gaussian()
            return st.flux(x)
        label = f"flux_{x}"
    else:
        if axis != "power_W":
            raise InputError("the coupled-mode engine needs pump powers in watts")
        if not sec["target"]:
            raise InputError("cme sweeps need sweep.target")
        fixed = {sec["probe_mode"]: sec["probe_power"]} if sec["probe_mode"] else {}
        evaluate = cme_observable(scn.modes, scn.vertices, scn.pump["mode"], sec["target"], fixed,
                                  sec["quantity"])
        label = f"{sec['quantity']}_{sec['target']}"
    res = sweep_power(values, evaluate)
    t = rep.table("points", [axis, label])
    for p, v in res.points:
        t.add(p, v)
    ft = rep.table("failures", [axis, "error"])
    for p, msg in res.failures:
        ft.add(p, msg)
    fit = power_law_fit(res.points)
    rep.table("fit", ["A", "N", "sigma_N", "n_points"]).add(fit.A, fit.N, fit.sigma_N, fit.n_points)
    rep.diagnostics["fit"] = {"N": fit.N, "sigma_N": fit.sigma_N}
    return rep


def _check_budget(source, detectors, duration):
    rates = [source.pair_rate + d.dark_rate + source.background_rate(c)
             for c, d in enumerate(detectors)]
    if sum(rates) * duration > MAX_EXPECTED_EVENTS:
        raise DomainError(f"simulation would generate ~{sum(rates) * duration:.3g} events; "
                          "reduce duration or pump")


def _count_pair(scn, model, x, y, sec, seed):
    summary = pair_source(model, x, y, sec["background"], sec["loss"], scn.detectors)
    src = summary.source
    _check_budget(src, scn.detectors, sec["duration"])
    s1, s2 = simulate_streams(src, scn.detectors, sec["duration"], seed)
    hist = histogram(s1, s2, sec["bin_width"], sec["max_delay"], sec["duration"])
    peak, bg = default_windows(src, scn.detectors, hist.max_delay)
    try:
        res = car(hist, peak, bg)
        value, C, A = res.value, res.C, res.A
        sigma = res.sigma if res.C > 0 else math.nan
    except UndefinedCARError:
        value, sigma = math.nan, math.nan
        C, A = hist.window_counts(peak)[0], 0.0
    try:
        model_car = expected_car(src, scn.detectors, hist, peak)
    except UndefinedCARError:
        model_car = math.inf
    return summary, hist, (value, sigma, C, A, model_car)


def run_counts(scn: Scenario) -> RunReport:
    rep = _new_report("counts", scn)
    sec = scn.section("counts")
    if not sec or not sec["pairs"]:
        raise InputError("counts needs a [counts] section with pairs")
    model = model_at(scn, sec["pump_index"])
    t = rep.table("car", ["x", "y", "phase_matched", "pair_rate", "flux_x", "flux_y", "CAR",
                          "sigma_CAR", "C", "A", "CAR_model"])
    for k, (x, y) in enumerate(sec["pairs"]):
        matched = check_conservation(pair_candidate(scn, x, y)[0]).passes if scn.pump else True
        summary, hist, (value, sigma, C, A, model_car) = _count_pair(scn, model, x, y, sec,
                                                                     [scn.seed, k])
        t.add(x, y, matched, summary.source.pair_rate, summary.flux[0], summary.flux[1], value,
              sigma, C, A, model_car)
        ht = rep.table(f"hist_{x}_{y}", ["delay_ps", "counts"])
        for d, c in hist.rows():
            ht.add(d, c)
    if sec["power_scan"]:
        values, axis = pump_axis(scn)
        x, y = sec["pairs"][0]
        pt = rep.table("car_vs_pump", [axis, "n_pump", "pair_rate", "CAR", "sigma_CAR", "CAR_model"])
        for i, p in enumerate(values):
            m = model_at(scn, i)
            summary, _, (value, sigma, _, _, model_car) = _count_pair(scn, m, x, y, sec,
                                                                      [scn.seed, 1000 + i])
            pt.add(p, m.n_pump, summary.source.pair_rate, value, sigma, model_car)
    return rep


def run_franson(scn: Scenario) -> RunReport:
    rep = _new_report("franson", scn)
    sec = scn.section("franson")
    if not sec:
        raise InputError("franson needs a [franson] section")
    counts = scn.section("counts")
    background = counts.get("background", [0.0, 0.0])
    loss = counts.get("loss", [0.0, 0.0])
    model = model_at(scn, sec["pump_index"])
    x, y = sec["pair"]
    summary = pair_source(model, x, y, background, loss, scn.detectors)
    if not summary.correlated:
        raise InputError(f"modes {x!r} and {y!r} emit no correlated pairs")
    setup = FransonSetup(sec["phi1"], sec["phi2"], sec["delta_T"], sec["V0"],
                         tuple(sec["insertion_loss"]))
    setup.validate(summary.source, scn.detectors)
    max_delay = 3 * setup.delta_T
    windows = franson_windows(setup, summary.source, scn.detectors, max_delay)
    span = bin_span(windows.center, sec["bin_width"])
    src = summary.source
    if sec["target_visibility"] > 0:
        src = invert_background_for_visibility(setup, src, scn.detectors,
                                               sec["target_visibility"], span)
        rep.diagnostics["tuned_background"] = [dict(b) for b in src.background]
    _check_budget(src, scn.detectors, sec["duration"] * sec["steps"])
    pts = franson_phase_sweep(setup, src, scn.detectors, sec["duration"], scn.seed, sec["steps"],
                              sec["bin_width"], max_delay)
    t = rep.table("phase_sweep", ["phase_rad", "C", "A", "CAR", "normalized", "side_minus",
                                  "side_plus"])
    for p in pts:
        t.add(p.phase, p.C, p.A, p.car, p.C / p.A, p.side_counts[0], p.side_counts[1])
    fit = fringe_fit([p.phase for p in pts], [p.C for p in pts])
    vis = extract_visibility(pts)
    vcar = car_visibility(pts)
    rep.table("fringe_fit", ["offset", "amplitude", "phase0", "visibility_fit", "rel_residual"]).add(
        fit.offset, fit.amplitude, fit.phase0, fit.visibility, fit.rel_residual)
    rep.table("visibility", ["estimator", "V", "sigma_V", "bell_violation", "V_model"]).add(
        "normalized_center", vis.V, vis.sigma, vis.bell_violation,
        expected_visibility(setup, src, scn.detectors, span))
    rep.tables["visibility"].add("car", vcar.V, vcar.sigma, vcar.bell_violation, setup.V0)
    return rep


def run_report(scn: Scenario) -> RunReport:
    rep = _new_report("report", scn)
    plan = [("synthesize", run_synthesize, bool(scn.vertices)),
            ("conserve", run_conserve, bool(scn.vertices)),
            ("simulate", run_simulate, scn.has("simulate")),
            ("sweep", run_sweep, scn.has("sweep")),
            ("counts", run_counts, scn.has("counts") and bool(scn.section("counts")["pairs"])),
            ("franson", run_franson, scn.has("franson"))]
    for name, fn, enabled in plan:
        if enabled:
            rep.merge(fn(scn), name)
    return rep


RUNNERS = {"synthesize": run_synthesize, "conserve": run_conserve, "simulate": run_simulate,
           "sweep": run_sweep, "counts": run_counts, "franson": run_franson, "report": run_report}


def run(command: str, scn: Scenario) -> RunReport:
    if command not in RUNNERS:
        raise InputError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    t0 = time.perf_counter()
    rep = RUNNERS[command](scn)
    rep.wall_time = time.perf_counter() - t0
    return rep
