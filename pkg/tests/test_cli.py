from __future__ import annotations

import json
import math

import pytest

from cavitycarve.cli import (
    Config,
    ConfigError,
    main,
    parse_config,
    parse_sweep_spec,
)
from cavitycarve.qstate import GraphSpec


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

SAMPLE_CONFIG = """
# cavity, rates in units of the atomic linewidth
gamma = 1.0
kappa_wg = 200.0
kappa_sc = 200.0
g = 20.0          # default per-atom coupling
g_1 = 24.0        # atom 1 is hotter
phase_arg_1 = 0.1
n_photons = 2
no_click = dephased
seed = 7
"""


def test_parse_config_happy_path():
    cfg = parse_config(SAMPLE_CONFIG)
    assert cfg.kappa_wg == 200.0
    assert cfg.n_photons == 2
    assert cfg.no_click == "dephased"
    assert cfg.atom_g == {1: 24.0}
    params = cfg.params_for(3)
    assert params.atoms[0].g == 20.0
    assert params.atoms[1].g == 24.0
    assert params.atoms[1].phase_arg == 0.1
    assert cfg.policy().n_photons == 2


def test_parse_config_rejects_unknown_key_with_line_number():
    with pytest.raises(ConfigError, match=r"problem.cfg:3.*frobnicate"):
        parse_config("g = 20\n\nfrobnicate = 1\n", source="problem.cfg")


def test_parse_config_rejects_duplicates_and_bad_values():
    with pytest.raises(ConfigError, match=":2"):
        parse_config("g = 20\ng = 21\n")
    with pytest.raises(ConfigError, match="n_photons"):
        parse_config("n_photons = two\n")
    with pytest.raises(ConfigError, match="no_click"):
        parse_config("no_click = sometimes\n")
    with pytest.raises(ConfigError, match=":1"):
        parse_config("just a line\n")


def test_config_defaults_are_critical_coupling():
    cfg = Config()
    params = cfg.params_for(1)
    assert params.kappa_wg == params.kappa_sc


# ---------------------------------------------------------------------------
# sweep spec parsing
# ---------------------------------------------------------------------------


def test_parse_sweep_spec_families():
    spec = parse_sweep_spec(
        {
            "graphs": {"family": "path", "n_min": 2, "n_max": 4},
            "cooperativities": [None, 20],
            "n_photons": [1, 2],
        }
    )
    assert len(spec.graphs) == 3
    assert spec.cooperativities == (None, 20.0)
    square = parse_sweep_spec({"graphs": {"family": "square"}})
    assert square.graphs[0] == GraphSpec.cycle(4)
    grid = parse_sweep_spec({"graphs": {"family": "grid", "width": 3, "height": 2}})
    assert grid.graphs[0].n_vertices == 6
    explicit = parse_sweep_spec({"graphs": [{"n": 2, "edges": [[0, 1]]}]})
    assert explicit.graphs[0] == GraphSpec.path(2)


def test_parse_sweep_spec_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="colour"):
        parse_sweep_spec({"graphs": {"family": "square"}, "colour": "red"})
    with pytest.raises(ConfigError):
        parse_sweep_spec({"graphs": {"family": "moebius"}})
    with pytest.raises(ConfigError):
        parse_sweep_spec({})


# ---------------------------------------------------------------------------
# subcommands (driven through main() for true exit codes)
# ---------------------------------------------------------------------------


def test_spectrum_critical_null_row(tmp_path, capsys):
    out = tmp_path / "spec.csv"
    code = main(
        [
            "spectrum",
            "--n-atoms",
            "0",
            "--delta-min",
            "-10",
            "--delta-max",
            "10",
            "--points",
            "3",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# cavitycarve spectrum v1"
    assert lines[1] == "delta,re_r,im_r,R"
    row = dict(zip(lines[1].split(","), lines[3].split(",")))
    assert float(row["delta"]) == 0.0
    assert float(row["R"]) < 1e-12


def test_spectrum_single_atom_resonant_value(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("g = 20\nkappa_wg = 200\nkappa_sc = 200\nn_atoms = 1\n")
    out = tmp_path / "s.csv"
    code = main(
        [
            "spectrum",
            "--config",
            str(cfg),
            "--delta-min",
            "-1",
            "--delta-max",
            "1",
            "--points",
            "3",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    mid = out.read_text().splitlines()[3].split(",")
    assert float(mid[3]) == pytest.approx(0.64, abs=1e-9)


def test_spectrum_lossless_cavity_reflects_everything(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("kappa_wg = 400\nkappa_sc = 0\n")
    out = tmp_path / "s.csv"
    assert main(["spectrum", "--config", str(cfg), "--n-atoms", "0",
                 "--points", "9", "--out", str(out)]) == 0
    for line in out.read_text().splitlines()[2:]:
        assert float(line.split(",")[3]) == pytest.approx(1.0, abs=1e-12)


def write_graph(tmp_path, graph: GraphSpec) -> str:
    path = tmp_path / "graph.json"
    path.write_text(json.dumps(graph.to_json_dict()))
    return str(path)


def test_compile_then_run_round_trip_equals_direct_run(tmp_path):
    graph_file = write_graph(tmp_path, GraphSpec.cycle(4))
    schedule = tmp_path / "sched.json"
    assert main(["compile", "--graph", graph_file, "--out", str(schedule)]) == 0
    sched_data = json.loads(schedule.read_text())
    assert sched_data["format"] == "cavitycarve-schedule-v1"
    assert sum(1 for s in sched_data["steps"] if s["op"] == "carve") == 8

    direct = tmp_path / "direct.json"
    via_schedule = tmp_path / "via.json"
    assert main(["run", "--graph", graph_file, "--out", str(direct)]) == 0
    assert main(["run", "--schedule", str(schedule), "--out", str(via_schedule)]) == 0
    a = json.loads(direct.read_text())
    b = json.loads(via_schedule.read_text())
    assert a == b
    assert a["fidelity"] >= 1.0 - 1e-10
    assert abs(a["probability"] - 0.125) <= 1e-12


def test_compile_path_has_expected_carving_count(tmp_path):
    graph_file = write_graph(tmp_path, GraphSpec.path(4))
    schedule = tmp_path / "s.json"
    assert main(["compile", "--graph", graph_file, "--out", str(schedule)]) == 0
    data = json.loads(schedule.read_text())
    assert data["n_carvings"] == 6


def test_run_bell_with_config(tmp_path):
    graph_file = write_graph(tmp_path, GraphSpec.path(2))
    cfg = tmp_path / "c.cfg"
    cfg.write_text("g = 20\nkappa_wg = 200\nkappa_sc = 200\n")
    out = tmp_path / "r.json"
    assert main(["run", "--graph", graph_file, "--config", str(cfg),
                 "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["fidelity"] >= 1.0 - 1e-9
    # C = 4 g^2/(kappa gamma) = 4 -> R = 0.64, P = R^2/2
    assert report["probability"] == pytest.approx(0.2048, abs=1e-12)
    # probe flags override the config
    out2 = tmp_path / "r2.json"
    assert main(["run", "--graph", graph_file, "--config", str(cfg),
                 "--np", "2", "--out", str(out2)]) == 0
    assert json.loads(out2.read_text())["probability"] > report["probability"]


def test_run_needs_exactly_one_input(tmp_path):
    graph_file = write_graph(tmp_path, GraphSpec.path(2))
    assert main(["run"]) == 2
    assert main(["run", "--graph", graph_file, "--schedule", graph_file]) == 2


def test_exit_codes(tmp_path, capsys):
    # missing file -> 2
    assert main(["compile", "--graph", str(tmp_path / "nope.json")]) == 2
    # unsupported strategy/graph combination -> 2
    square = write_graph(tmp_path, GraphSpec.cycle(4))
    assert main(["compile", "--graph", square, "--strategy", "multi-atom"]) == 2
    # qubit cap -> 4
    big = write_graph(tmp_path, GraphSpec.path(17))
    assert main(["compile", "--graph", big]) == 4
    # herald impossible -> 3 (hand-built schedule carving the dark state)
    dark = {
        "format": "cavitycarve-schedule-v1",
        "num_qubits": 1,
        "strategy": "two-atom",
        "graph": {"n": 1, "edges": []},
        "n_carvings": 1,
        "notes": {},
        "blocks": [],
        "steps": [
            {"op": "set_coupling", "qubit": 0, "on": True},
            {"op": "carve", "subset": [0]},
        ],
    }
    sched = tmp_path / "dark.json"
    sched.write_text(json.dumps(dark))
    assert main(["run", "--schedule", str(sched)]) == 3
    capsys.readouterr()


def test_sweep_command_writes_versioned_csv(tmp_path):
    spec = {
        "graphs": {"family": "path", "n_min": 2, "n_max": 4},
        "cooperativities": [None, 20],
    }
    spec_file = tmp_path / "sweep.json"
    spec_file.write_text(json.dumps(spec))
    out = tmp_path / "sweep.csv"
    json_out = tmp_path / "sweep.json.out"
    assert main(["sweep", "--spec", str(spec_file), "--out", str(out),
                 "--json-out", str(json_out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# cavitycarve sweep v1"
    assert len(lines) == 2 + 6  # header comment + column row + 3 graphs x 2 C
    assert json.loads(json_out.read_text())["format"] == "cavitycarve-sweep-v1"


def test_sweep_jitter_mode(tmp_path):
    spec_file = tmp_path / "sweep.json"
    spec_file.write_text(
        json.dumps({"graphs": {"family": "path", "n_min": 3, "n_max": 3},
                    "cooperativities": [20]})
    )
    out = tmp_path / "rob.csv"
    assert main(["sweep", "--spec", str(spec_file), "--jitter", "0.2",
                 "--seed", "5", "--samples", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# cavitycarve robustness v1"
    assert len(lines) == 2 + 2


def test_sweep_rejects_bad_spec(tmp_path):
    spec_file = tmp_path / "sweep.json"
    spec_file.write_text(json.dumps({"grphs": []}))
    assert main(["sweep", "--spec", str(spec_file)]) == 2
    spec_file.write_text("{not json")
    assert main(["sweep", "--spec", str(spec_file)]) == 2


def test_validate_passes_and_prints_one_line_per_check(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if l.startswith("ok")]
    assert len(lines) >= 8
    assert "FAIL" not in out


def test_stdout_output_when_no_out_flag(tmp_path, capsys):
    graph_file = write_graph(tmp_path, GraphSpec.path(2))
    assert main(["run", "--graph", graph_file]) == 0
    report = json.loads(capsys.readouterr().out)
    assert abs(report["probability"] - 0.5) <= 1e-12
