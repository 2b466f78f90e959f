import json
from importlib import resources

import pytest

from synthwave.cli import commands
from synthwave.cli.commands import run
from synthwave.cli.main import build_parser, main
from synthwave.cli.report import report_dict, table_csv
from synthwave.cli.scenario import loads, parse_scenario
from synthwave.errors import InputError, ScenarioError

SQUEEZER = """
[[modes]]
label = "p"
omega = 2.0
kappa = 1.0
kappa_ext = 0.5

[[modes]]
label = "s"
omega = 0.9
kappa = 1.0
kappa_ext = 0.5

[[modes]]
label = "i"
omega = 1.1
kappa = 1.0
kappa_ext = 0.5

[[vertices]]
legs = ["p", "s^", "i^"]
g = 0.01

[pump]
mode = "p"
photon_numbers = [100.0, 1.0e6]

[simulate]
method = "gaussian"
pairs = [["s", "i"]]
"""


def bundled(name):
    return resources.files("synthwave") / "data" / name


@pytest.fixture
def squeezer(tmp_path):
    p = tmp_path / "sq.scn"
    p.write_text(SQUEEZER)
    return p


# parsing ------------------------------------------------------------------------

def test_minimal_scenario_fills_defaults():
    scn = loads(SQUEEZER)
    assert scn.seed == 0
    assert [m.label for m in scn.modes] == ["p", "s", "i"]
    sim = scn.section("simulate")
    assert (sim["cutoffs"], sim["rel_tol"], sim["pump_index"]) == (5, 0.01, 0)
    assert scn.data["modes"][1]["delta"] == 0.0
    assert scn.data["vertices"][0]["name"] == "v0"
    assert len(scn.detectors) == 2 and scn.detectors[0].efficiency == 1.0


def test_undeclared_leg_names_the_mode():
    with pytest.raises(ScenarioError, match="'q'") as exc:
        loads(SQUEEZER.replace('["p", "s^", "i^"]', '["p", "s^", "q^"]'))
    assert exc.value.key == "vertices[0].legs[2]"


def test_unknown_keys_rejected_unless_allowed():
    text = SQUEEZER.replace('method = "gaussian"', 'method = "gaussian"\nmethd = "x"')
    with pytest.raises(ScenarioError, match="methd") as exc:
        loads(text)
    assert exc.value.key == "simulate.methd"
    assert "methd" not in loads(text, strict=False).section("simulate")


def test_syntax_error_reports_position():
    with pytest.raises(ScenarioError) as exc:
        loads(SQUEEZER + "\nbroken = = 1\n")
    assert exc.value.line is not None and exc.value.column is not None
    assert "line" in str(exc.value)


@pytest.mark.parametrize("old, new, key", [
    ('kappa_ext = 0.5\n\n[[modes]]\nlabel = "s"', 'kappa_ext = 5.0\n\n[[modes]]\nlabel = "s"', "modes[0]"),
    ('mode = "p"', 'mode = "z"', "pump.mode"),
    ('method = "gaussian"', 'method = "exact"', "simulate.method"),
    ('method = "gaussian"', 'cutoffs = 0', "simulate.cutoffs"),
    ('photon_numbers = [100.0, 1.0e6]', 'photon_numbers = [100.0]\npowers = [1.0]', "pump"),
])
def test_semantic_errors_name_the_key(old, new, key):
    with pytest.raises(ScenarioError) as exc:
        loads(SQUEEZER.replace(old, new))
    assert exc.value.key == key


def test_round_trip_is_identity():
    for scn in (loads(SQUEEZER), parse_scenario(bundled("five_wave.scn"))):
        again = loads(scn.dumps())
        assert again.canonical() == scn.canonical()
        assert again.digest() == scn.digest()


def test_missing_file_is_input_error(tmp_path):
    with pytest.raises(ScenarioError):
        parse_scenario(tmp_path / "nope.scn")


def test_seed_override_changes_only_seed():
    scn = loads(SQUEEZER)
    other = scn.with_seed(9)
    assert other.seed == 9 and scn.seed == 0
    assert {k: v for k, v in other.data.items() if k != "seed"} == \
        {k: v for k, v in scn.data.items() if k != "seed"}


# commands -----------------------------------------------------------------------

def test_bundled_graph_synthesizes_the_five_wave_process():
    rep = run("synthesize", parse_scenario(bundled("paper_fig1.scn")))
    t = rep.tables["processes"]
    assert len(t.rows) == 1
    row = dict(zip(t.columns, t.rows[0]))
    assert row["order"] == 4 and row["eliminated"] == "b"
    assert sorted(row["legs"].split()) == sorted(["d^", "d^", "d^", "a", "c"])
    assert row["g_eff_abs"] == pytest.approx(1.0)


def test_conserve_excludes_unmatched_pair():
    rep = run("conserve", parse_scenario(bundled("five_wave.scn")))
    status = {(r[0], r[1]): r[-1] for r in rep.tables["pairs"].rows}
    assert status == {("b-2", "a+2"): "phase-matched", ("a-1", "a+1"): "phase-matched",
                      ("b-2", "a+1"): "excluded"}


def test_commands_need_their_sections():
    with pytest.raises(InputError):
        run("counts", loads(SQUEEZER))
    with pytest.raises(InputError):
        run("bogus", loads(SQUEEZER))


def test_report_echoes_defaults_and_hashes():
    scn = loads(SQUEEZER)
    rep = run("simulate", scn)
    assert rep.scenario["simulate"]["tau_span"] == 10.0
    assert len(rep.scenario_digest) == 64 and len(rep.input_hash) == 40
    for name, t in rep.tables.items():
        assert t.rows, name


def test_empty_table_is_marked():
    rep = run("conserve", loads(SQUEEZER))
    assert "# empty: true" in table_csv(rep, "pairs")
    assert "# empty: true" not in table_csv(rep, "vertices")


# main ---------------------------------------------------------------------------

def test_parser_shape():
    args = build_parser().parse_args(["sweep", "--scenario", "x.scn", "--seed", "3", "--format", "json"])
    assert (args.command, args.scenario, args.seed, args.out, args.format, args.allow_unknown) == \
        ("sweep", "x.scn", 3, ".", "json", False)
    with pytest.raises(SystemExit):
        build_parser().parse_args(["plot", "--scenario", "x.scn"])


def test_exit_codes(squeezer, tmp_path, capsys):
    assert main(["simulate", "--scenario", str(squeezer), "--out", str(tmp_path / "ok")]) == 0
    assert main(["counts", "--scenario", str(squeezer), "--out", str(tmp_path / "bad")]) == 2
    above = squeezer.parent / "above.scn"
    above.write_text(SQUEEZER.replace('pairs = [["s", "i"]]', 'pairs = [["s", "i"]]\npump_index = 1'))
    assert main(["simulate", "--scenario", str(above), "--out", str(tmp_path / "thr")]) == 3
    assert "threshold" in capsys.readouterr().err


def test_internal_error_exit_code(squeezer, tmp_path, monkeypatch):
    def boom(scn):
        raise RuntimeError("bug")
    monkeypatch.setitem(commands.RUNNERS, "simulate", boom)
    assert main(["simulate", "--scenario", str(squeezer), "--out", str(tmp_path)]) == 4


def test_allow_unknown_flag(squeezer, tmp_path):
    squeezer.write_text(SQUEEZER + "\nextra = 1\n")
    assert main(["simulate", "--scenario", str(squeezer), "--out", str(tmp_path / "a")]) == 2
    assert main(["simulate", "--scenario", str(squeezer), "--out", str(tmp_path / "b"),
                 "--allow-unknown"]) == 0


def test_same_seed_gives_identical_csv(tmp_path):
    scn = str(bundled("five_wave.scn"))
    outs = []
    for d in ("r1", "r2"):
        assert main(["counts", "--scenario", scn, "--seed", "5", "--out", str(tmp_path / d)]) == 0
        outs.append({p.name: p.read_bytes() for p in (tmp_path / d).glob("*.csv")})
    assert outs[0] == outs[1] and "counts_car.csv" in outs[0]
    assert b"# seed: 5" in outs[0]["counts_car.csv"]


def test_json_mirrors_tables(squeezer, tmp_path):
    assert main(["simulate", "--scenario", str(squeezer), "--out", str(tmp_path), "--format", "json"]) == 0
    assert not list(tmp_path.glob("*.csv"))
    doc = json.loads((tmp_path / "simulate_report.json").read_text())
    rep = run("simulate", loads(SQUEEZER))
    mirror = json.loads(json.dumps(report_dict(rep)))["tables"]
    assert set(doc["tables"]) == set(rep.tables)
    for name, t in rep.tables.items():
        assert doc["tables"][name]["columns"] == t.columns
        assert doc["tables"][name]["rows"] == mirror[name]["rows"]
        assert len(doc["tables"][name]["rows"]) == len(t.rows)
