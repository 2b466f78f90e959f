"""Scenario files: TOML in, validated ``Scenario`` out, canonical TOML back.

Every optional key has a default; ``canonical()`` returns the fully expanded
mapping, so parse -> dump -> parse is the identity and reports can echo the
exact settings used.
"""
from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..counting import DetectorModel
from ..errors import ScenarioError, StructuralError, SynthwaveError
from ..process_algebra import DAGGER_SUFFIXES, InteractionVertex, Leg, Mode, ModeGraph

# hard limits on user settings
MAX_CUTOFF = 60
MAX_DURATION = 1e4
MAX_STEPS = 720
MAX_TAU_POINTS = 100_000

_MISSING = object()


def _num(v, key):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"expected a number, got {type(v).__name__}", key=key)
    if not math.isfinite(v):
        raise ScenarioError("value must be finite", key=key)
    return float(v)


def _int(v, key):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"expected an integer, got {type(v).__name__}", key=key)
    return v


def _str(v, key):
    if not isinstance(v, str):
        raise ScenarioError(f"expected a string, got {type(v).__name__}", key=key)
    return v


def _bool(v, key):
    if not isinstance(v, bool):
        raise ScenarioError(f"expected true/false, got {type(v).__name__}", key=key)
    return v


def _list(item: Callable, length: int | None = None):
    def conv(v, key):
        if not isinstance(v, list):
            raise ScenarioError(f"expected a list, got {type(v).__name__}", key=key)
        if length is not None and len(v) != length:
            raise ScenarioError(f"expected {length} entries, got {len(v)}", key=key)
        return [item(x, f"{key}[{i}]") for i, x in enumerate(v)]
    return conv


def _complex_pair(v, key):
    """A complex number written as a real or as ``[re, im]``."""
    if isinstance(v, list):
        re, im = _list(_num, 2)(v, key)
        return [re, im]
    return [_num(v, key), 0.0]


def _str_or_num(v, key):
    if isinstance(v, str):
        if v != "auto":
            raise ScenarioError("expected a number or \"auto\"", key=key)
        return v
    return _num(v, key)


def _lambda_table(v, key):
    if not isinstance(v, dict):
        raise ScenarioError("expected a table of mode = [re, im]", key=key)
    return {k: _complex_pair(x, f"{key}.{k}") for k, x in sorted(v.items())}


def _pair_list(v, key):
    return _list(_list(_str, 2))(v, key)


# section -> key -> (converter, default); _MISSING marks required keys
SCHEMA: dict[str, dict[str, tuple]] = {
    "synthesis": {
        "max_order": (_int, 4),
        "virtual": (_list(_str), []),
        "lambdas": (_lambda_table, {}),
        "tolerance": (_str_or_num, "auto"),
    },
    "conserve": {
        "pairs": (_pair_list, []),
        "tolerance": (_str_or_num, "auto"),
    },
    "simulate": {
        "method": (_str, "both"),
        "cutoffs": (_int, 5),
        "rel_tol": (_num, 0.01),
        "max_rounds": (_int, 3),
        "pairs": (_pair_list, []),
        "tau_points": (_int, 101),
        "tau_span": (_num, 10.0),
        "pump_index": (_int, 0),
    },
    "sweep": {
        "engine": (_str, "quantum"),
        "target": (_str, ""),
        "pair": (_list(_str), []),
        "probe_mode": (_str, ""),
        "probe_power": (_num, 0.0),
        "quantity": (_str, "output_power"),
    },
    "counts": {
        "duration": (_num, 1.0),
        "bin_width": (_num, 100e-12),
        "max_delay": (_num, 20e-9),
        "pairs": (_pair_list, []),
        "background": (_list(_num, 2), [0.0, 0.0]),
        "loss": (_list(_num, 2), [0.0, 0.0]),
        "pump_index": (_int, 0),
        "power_scan": (_bool, False),
    },
    "franson": {
        "pair": (_list(_str, 2), _MISSING),
        "delta_T": (_num, _MISSING),
        "phi1": (_num, 0.0),
        "phi2": (_num, 0.0),
        "V0": (_num, 1.0),
        "steps": (_int, 16),
        "duration": (_num, 1.0),
        "bin_width": (_num, 100e-12),
        "insertion_loss": (_list(_num, 2), [0.0, 0.0]),
        "target_visibility": (_num, 0.0),
        "pump_index": (_int, 0),
    },
}

MODE_SCHEMA = {
    "label": (_str, _MISSING),
    "m": (_int, 0),
    "omega": (_num, _MISSING),
    "kappa": (_num, _MISSING),
    "kappa_ext": (_num, _MISSING),
    "delta": (_num, 0.0),
}
VERTEX_SCHEMA = {
    "name": (_str, ""),
    "g": (_complex_pair, _MISSING),
    "legs": (_list(_str), _MISSING),
    "order": (_int, -1),
    "hermitian_pair": (_bool, True),
}
PUMP_SCHEMA = {
    "mode": (_str, _MISSING),
    "powers": (_list(_num), []),
    "photon_numbers": (_list(_num), []),
    "phase": (_num, 0.0),
}
DETECTOR_SCHEMA = {
    "efficiency": (_num, 1.0),
    "dark_rate": (_num, 0.0),
    "jitter_sigma": (_num, 0.0),
    "dead_time": (_num, 0.0),
}
TOP_KEYS = {"seed", "modes", "vertices", "pump", "detectors", *SCHEMA}


def _table(raw: Any, schema: dict, where: str, strict: bool) -> dict:
    if not isinstance(raw, dict):
        raise ScenarioError("expected a table", key=where)
    if strict:
        unknown = sorted(set(raw) - set(schema))
        if unknown:
            raise ScenarioError(f"unknown key {unknown[0]!r}", key=f"{where}.{unknown[0]}")
    out = {}
    for key, (conv, default) in schema.items():
        path = f"{where}.{key}"
        if key in raw:
            out[key] = conv(raw[key], path)
        elif default is _MISSING:
            raise ScenarioError("required key missing", key=path)
        else:
            out[key] = default if not isinstance(default, (list, dict)) else type(default)(default)
    return out


@dataclass
class Scenario:
    """Validated scenario; ``data`` is the canonical, default-complete mapping."""

    data: dict
    graph: ModeGraph
    vertices: list[InteractionVertex]
    detectors: tuple[DetectorModel, DetectorModel]
    source_path: Path | None = None
    raw_bytes: bytes = b""

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def modes(self) -> list[Mode]:
        return list(self.graph)

    def mode(self, label: str) -> Mode:
        if label not in self.graph:
            raise StructuralError(f"undeclared mode {label!r}")
        return self.graph[label]

    def section(self, name: str) -> dict:
        return self.data.get(name, {})

    def has(self, name: str) -> bool:
        return name in self.data

    @property
    def pump(self) -> dict | None:
        return self.data.get("pump")

    def canonical(self) -> dict:
        return self.data

    def dumps(self) -> str:
        return tomli_w.dumps(self.data)

    def digest(self) -> str:
        """SHA-256 of the canonical TOML text."""
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def input_hash(self) -> str:
        """Git blob hash (SHA-1 of ``blob <len>\\0`` + bytes) of the input file."""
        data = self.raw_bytes or self.dumps().encode()
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()

    def with_seed(self, seed: int) -> "Scenario":
        data = dict(self.data)
        data["seed"] = int(seed)
        return Scenario(data, self.graph, self.vertices, self.detectors, self.source_path,
                        self.raw_bytes)


def _parse_leg(spec: str, graph: ModeGraph, key: str) -> Leg:
    label, dagger = spec, False
    for suffix in DAGGER_SUFFIXES:
        if spec.endswith(suffix):
            label, dagger = spec[: -len(suffix)], True
    if label not in graph:
        raise ScenarioError(f"leg references undeclared mode {label!r}", key=key)
    return Leg(graph[label], dagger)


def build_scenario(raw: dict, strict: bool = True, source_path: Path | None = None,
                   raw_bytes: bytes = b"") -> Scenario:
    """Validate a decoded mapping and fill in defaults."""
    if strict:
        unknown = sorted(set(raw) - TOP_KEYS)
        if unknown:
            raise ScenarioError(f"unknown key {unknown[0]!r}", key=unknown[0])
    data: dict[str, Any] = {"seed": _int(raw.get("seed", 0), "seed")}
    if data["seed"] < 0:
        raise ScenarioError("seed must be nonnegative", key="seed")

    modes_raw = raw.get("modes", [])
    if not isinstance(modes_raw, list) or not modes_raw:
        raise ScenarioError("at least one [[modes]] entry is required", key="modes")
    modes = [_table(m, MODE_SCHEMA, f"modes[{i}]", strict) for i, m in enumerate(modes_raw)]
    graph = ModeGraph()
    for i, m in enumerate(modes):
        try:
            graph.add(Mode(**m))
        except SynthwaveError as exc:
            raise ScenarioError(str(exc), key=f"modes[{i}]") from None
    data["modes"] = modes

    vertices = []
    vraw = raw.get("vertices", [])
    if not isinstance(vraw, list):
        raise ScenarioError("expected an array of tables", key="vertices")
    vdata = []
    for i, v in enumerate(vraw):
        key = f"vertices[{i}]"
        spec = _table(v, VERTEX_SCHEMA, key, strict)
        legs = [_parse_leg(s, graph, f"{key}.legs[{j}]") for j, s in enumerate(spec["legs"])]
        if spec["order"] < 0:
            spec["order"] = len(legs) - 1
        if not spec["name"]:
            spec["name"] = f"v{i}"
        try:
            vertices.append(InteractionVertex(spec["order"], complex(*spec["g"]), tuple(legs),
                                              spec["hermitian_pair"], spec["name"]))
        except SynthwaveError as exc:
            raise ScenarioError(str(exc), key=key) from None
        vdata.append(spec)
    data["vertices"] = vdata

    if "pump" in raw:
        pump = _table(raw["pump"], PUMP_SCHEMA, "pump", strict)
        if pump["mode"] not in graph:
            raise ScenarioError(f"pump references undeclared mode {pump['mode']!r}", key="pump.mode")
        if bool(pump["powers"]) == bool(pump["photon_numbers"]):
            raise ScenarioError("give exactly one of powers or photon_numbers", key="pump")
        if any(p < 0 for p in pump["powers"] + pump["photon_numbers"]):
            raise ScenarioError("pump values must be nonnegative", key="pump")
        data["pump"] = pump

    det_raw = raw.get("detectors", [{}, {}])
    if not isinstance(det_raw, list) or len(det_raw) != 2:
        raise ScenarioError("exactly two [[detectors]] entries are required", key="detectors")
    dets = [_table(d, DETECTOR_SCHEMA, f"detectors[{i}]", strict) for i, d in enumerate(det_raw)]
    try:
        detectors = tuple(DetectorModel(**d) for d in dets)
    except SynthwaveError as exc:
        raise ScenarioError(str(exc), key="detectors") from None
    data["detectors"] = dets

    for name, schema in SCHEMA.items():
        if name in raw:
            data[name] = _table(raw[name], schema, name, strict)
    _validate_sections(data, graph)
    return Scenario(data, graph, vertices, detectors, source_path, raw_bytes)


def _check_labels(labels, graph, key):
    for lbl in labels:
        if lbl not in graph:
            raise ScenarioError(f"undeclared mode {lbl!r}", key=key)


def _validate_sections(data: dict, graph: ModeGraph) -> None:
    syn = data.get("synthesis")
    if syn:
        _check_labels(syn["virtual"], graph, "synthesis.virtual")
        _check_labels(syn["lambdas"], graph, "synthesis.lambdas")
        if syn["max_order"] < 3:
            raise ScenarioError("max_order must be >= 3", key="synthesis.max_order")
    con = data.get("conserve")
    if con:
        for p in con["pairs"]:
            _check_labels(p, graph, "conserve.pairs")
    sim = data.get("simulate")
    if sim:
        if sim["method"] not in ("lindblad", "gaussian", "both"):
            raise ScenarioError("method must be lindblad, gaussian or both", key="simulate.method")
        if not 1 <= sim["cutoffs"] <= MAX_CUTOFF:
            raise ScenarioError(f"cutoffs must lie in [1, {MAX_CUTOFF}]", key="simulate.cutoffs")
        if not 0 < sim["rel_tol"] < 1:
            raise ScenarioError("rel_tol must lie in (0, 1)", key="simulate.rel_tol")
        if not 3 <= sim["tau_points"] <= MAX_TAU_POINTS:
            raise ScenarioError("tau_points out of range", key="simulate.tau_points")
        for p in sim["pairs"]:
            _check_labels(p, graph, "simulate.pairs")
    sw = data.get("sweep")
    if sw:
        if sw["engine"] not in ("quantum", "cme"):
            raise ScenarioError("engine must be quantum or cme", key="sweep.engine")
        _check_labels([x for x in [sw["target"], sw["probe_mode"]] if x], graph, "sweep")
        _check_labels(sw["pair"], graph, "sweep.pair")
    cnt = data.get("counts")
    if cnt:
        if not 0 < cnt["duration"] <= MAX_DURATION:
            raise ScenarioError("duration out of range", key="counts.duration")
        if not cnt["bin_width"] >= 1e-12:
            raise ScenarioError("bin_width must be at least 1 ps", key="counts.bin_width")
        for p in cnt["pairs"]:
            _check_labels(p, graph, "counts.pairs")
    fr = data.get("franson")
    if fr:
        _check_labels(fr["pair"], graph, "franson.pair")
        if not 3 <= fr["steps"] <= MAX_STEPS:
            raise ScenarioError("steps out of range", key="franson.steps")
        if not 0 < fr["duration"] <= MAX_DURATION:
            raise ScenarioError("duration out of range", key="franson.duration")
        if not 0 <= fr["target_visibility"] <= 1:
            raise ScenarioError("target_visibility must lie in [0, 1]", key="franson.target_visibility")
    for name in ("simulate", "counts", "franson"):
        sec = data.get(name)
        if sec and "pump" in data:
            n = len(data["pump"]["powers"] or data["pump"]["photon_numbers"])
            if not 0 <= sec["pump_index"] < n:
                raise ScenarioError("pump_index outside the pump list", key=f"{name}.pump_index")


def loads(text: str, strict: bool = True, source_path: Path | None = None) -> Scenario:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"syntax error: {exc.msg}", line=getattr(exc, "lineno", None),
                            column=getattr(exc, "colno", None)) from None
    return build_scenario(raw, strict, source_path, text.encode())


def parse_scenario(path, strict: bool = True) -> Scenario:
    """Read and validate a scenario file.

    Raises
    ------
    ScenarioError
        With line/column for syntax errors, or the offending key path.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ScenarioError("scenario is not valid UTF-8") from None
    scn = loads(text, strict, path)
    scn.raw_bytes = raw
    return scn
