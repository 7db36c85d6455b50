import json
import subprocess
import sys

import pytest

from cpfseries import cli

FAST = ["grid.t_max=1.0", "grid.n_points=3", "grid.nodes=21", "series.max_order=2"]


def test_defaults_validate():
    cfg = cli.load_config(None, [])
    assert cfg["model"]["type"] == "dephasing"


def test_override_parsing():
    cfg = cli.load_config(None, ["model.tau_c=0.1", "scheme.preset=zzz", "grid.y=[-1]"])
    assert cfg["model"]["tau_c"] == 0.1
    assert cfg["scheme"]["preset"] == "zzz"
    assert cfg["grid"]["y"] == [-1]


@pytest.mark.parametrize("bad", [
    "model.gamma=-1", "model.tau_c=0", "initial_state.p=1.5", "grid.n_points=-1", "series.max_order=4",
    "model.type=telegraph", "scheme.preset=xq", "bogus.key=1",
])
def test_invalid_config_exit_code(tmp_path, bad, capsys):
    assert cli.main(["simulate", "--set", bad, "--set", f"output={tmp_path / 'x.csv'}"]) == 2
    assert "invalid configuration" in capsys.readouterr().err


def test_malformed_override(capsys):
    assert cli.main(["simulate", "--set", "model.gamma"]) == 2


def test_unreadable_config(tmp_path):
    assert cli.main(["simulate", str(tmp_path / "missing.json")]) == 2


def test_mismatched_oracle_exit_code(tmp_path):
    code = cli.main(["compare", "--set", "model.type=bosonic", "--set", "oracle.kind=gaussian",
                     "--set", f"output={tmp_path / 'x.csv'}"])
    assert code == 4


def test_empty_grid_writes_header_only(tmp_path):
    out = tmp_path / "empty.csv"
    assert cli.main(["simulate", "--set", "grid.n_points=0", "--set", f"output={out}"]) == 0
    lines = out.read_text().splitlines()
    assert lines[-1].startswith("t,tau,y,cpf_order1")
    assert all(line.startswith("#") for line in lines[:-1])


def test_csv_layout(tmp_path):
    out = tmp_path / "run.csv"
    assert cli.main(["simulate", *sum([["--set", s] for s in FAST], []), "--set", f"output={out}"]) == 0
    raw = out.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    header = [ln for ln in lines if ln.startswith("# config: ")][0]
    cfg = json.loads(header[len("# config: "):])
    assert cfg["grid"]["n_points"] == 3
    assert any(ln.startswith("# cpfseries ") for ln in lines)
    cols = [ln for ln in lines if not ln.startswith("#")][0].split(",")
    assert cols == cli.columns(2)
    rows = [ln.split(",") for ln in lines if not ln.startswith("#")][1:]
    assert len(rows) == 6
    assert all(len(r) == len(cols) for r in rows)


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"model": {"type": "bosonic", "gamma": 1.0, "tau_c": 0.125, "nbar": 0.0},
                                "scheme": {"preset": "xzx"}, "initial_state": {"p": 0.8},
                                "grid": {"t_max": 1.0, "n_points": 2, "nodes": 21, "y": [-1]}}))
    out = tmp_path / "o.csv"
    assert cli.main(["simulate", str(path), "--set", "series.max_order=1", "--set", f"output={out}"]) == 0
    assert "gamma*t" in out.read_text()


def test_explicit_operator_lists():
    cfg = cli.load_config(None, [
        'scheme={"first": {"operators": [[[1,0],[0,0]], [[0,0],[0,1]]], "outcomes": [1,-1]},'
        ' "middle": {"operators": [[[1,0],[0,0]], [[0,0],[0,1]]], "outcomes": [1,-1]},'
        ' "last": {"operators": [[[1,0],[0,0]], [[0,0],[0,1]]], "outcomes": [1,-1]}}'])
    assert cli.build_scheme(cfg).shape == (2, 2, 2)
    with pytest.raises(cli.ConfigError):
        cli.load_config(None, ['scheme={"first": {"operators": [[[1,0],[0,0]]], "outcomes": [1]}}'])


def test_finite_temperature_time_axis():
    cfg = cli.load_config(None, ["model.type=bosonic", "model.nbar=0.2"])
    assert cli.time_unit(cfg) == pytest.approx(1.2)


def test_compare_passes_for_dephasing(tmp_path, capsys):
    code = cli.main(["compare", *sum([["--set", s] for s in FAST], []), "--set", "series.max_order=3",
                     "--set", f"output={tmp_path / 'c.csv'}"])
    assert code == 0
    assert "PASS" in capsys.readouterr().out


def test_compare_fails_with_tight_tolerance(tmp_path):
    code = cli.main(["compare", *sum([["--set", s] for s in FAST], []), "--set", "model.tau_c=0.5",
                     "--set", "oracle.tolerance=1e-12", "--set", f"output={tmp_path / 'c.csv'}"])
    assert code == 3


def test_serial_and_parallel_outputs_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    common = [*sum([["--set", s] for s in FAST], []), "--set", "oracle.kind=mc", "--set", "oracle.n_traj=2000"]
    assert cli.main(["simulate", *common, "--set", f"output={a}"]) == 0
    assert cli.main(["simulate", *common, "--set", f"output={a}"]) == 0
    first = a.read_bytes()
    assert cli.main(["simulate", *common, "--set", f"output={b}", "--workers", "2"]) == 0
    # the output path is part of the embedded config; compare everything else
    strip = lambda raw: [ln for ln in raw.splitlines() if not ln.startswith(b"# config")]
    assert strip(first) == strip(b.read_bytes())
    assert cli.main(["simulate", *common, "--set", f"output={a}"]) == 0
    assert a.read_bytes() == first


def test_figure_configs():
    assert len(cli.figure_configs(1)) == 2
    assert len(cli.figure_configs(2)) == 4
    assert len(cli.figure_configs(3)) == 6
    for cfg in cli.figure_configs(2).values():
        cli.validate_config(cfg)
        assert cfg["grid"]["y"] == [-1]
    with pytest.raises(cli.ConfigError):
        cli.figure_configs(4)


def test_figure_one_bundle(tmp_path, capsys):
    code = cli.main(["figure-data", "1", "--outdir", str(tmp_path), "--set", "grid.n_points=3",
                     "--set", "grid.t_max=1.0"])
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["fig1_tauc0.05.csv", "fig1_tauc0.1.csv"]
    assert "y-independence" in capsys.readouterr().out


def test_validate_report(capsys):
    assert cli.main(["validate"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) == {"appendix_identities", "projector_idempotence", "normalization", "mode_correlations"}
    assert all(v["passed"] for v in report.values())


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cpfseries", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("simulate", "compare", "validate", "figure-data"):
        assert sub in proc.stdout
