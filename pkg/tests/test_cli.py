import csv
import shutil
import subprocess

import pytest

from competing_sir.cli import (
    OBSERVABILITY_COLUMNS,
    OBSERVER_COLUMNS,
    STABILITY_COLUMNS,
    TRAJECTORY_COLUMNS,
    fmt,
    main,
)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_fmt_is_round_trip():
    assert fmt(0.1) == "0.1"
    assert float(fmt(1 / 3)) == 1 / 3
    assert fmt(True) == "true" and fmt(None) == "" and fmt(3) == "3"


def test_validate(tmp_path, capsys):
    assert run(tmp_path, "validate", "europe") == 0
    assert "valid" in capsys.readouterr().out
    assert run(tmp_path, "validate", "europe", "--h", "2") == 2
    _, rows = read_csv(tmp_path / "europe" / "validate" / "validation.csv")
    assert {r[0] for r in rows} == {"3"}
    assert "GER" in capsys.readouterr().out


def test_missing_file_and_parse_error(tmp_path, capsys):
    assert run(tmp_path, "simulate", str(tmp_path / "nope.scenario")) == 1
    bad = tmp_path / "bad.scenario"
    bad.write_text("schema_version: 1\nname: x\nn: 1\n")
    assert run(tmp_path, "simulate", str(bad)) == 1
    assert "m" in capsys.readouterr().err


def test_invalid_scenario_exits_nonzero(tmp_path):
    assert run(tmp_path, "simulate", "europe", "--h", "2") == 2
    assert not (tmp_path / "europe" / "simulate" / "trajectory.csv").exists()


def test_simulate_horizon_zero(tmp_path):
    assert run(tmp_path, "simulate", "europe", "--horizon", "0") == 0
    header, rows = read_csv(tmp_path / "europe" / "simulate" / "trajectory.csv")
    assert header == TRAJECTORY_COLUMNS
    assert len(rows) == 5 * (2 + 2)
    assert rows[0] == ["0", "UK", "s", "none", "0.979"]
    assert rows[1] == ["0", "UK", "x", "sars-cov-2", "0.02"]
    header, rows = read_csv(tmp_path / "europe" / "simulate" / "outputs.csv")
    assert header == ["t", "node", "y"] and float(rows[0][2]) == pytest.approx(0.0083)


def test_simulate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "simulate", "europe", "--horizon", "40") == 0
    assert run(b, "simulate", "europe", "--horizon", "40") == 0
    for name in ("trajectory.csv", "outputs.csv"):
        assert (a / "europe/simulate" / name).read_bytes() == (b / "europe/simulate" / name).read_bytes()
    # rerunning into the same directory overwrites in place
    before = (a / "europe/simulate/trajectory.csv").read_bytes()
    assert run(a, "simulate", "europe", "--horizon", "40") == 0
    assert (a / "europe/simulate/trajectory.csv").read_bytes() == before


def test_env_var_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("COMPETING_SIR_OUT", str(tmp_path / "env"))
    assert main(["stability", "europe"]) == 0
    assert (tmp_path / "env" / "europe" / "stability" / "stability.csv").exists()


def test_stability(tmp_path):
    assert run(tmp_path, "stability", "europe") == 0
    header, rows = read_csv(tmp_path / "europe" / "stability" / "stability.csv")
    assert header == STABILITY_COLUMNS
    assert [r[0] for r in rows] == ["sars-cov-2", "influenza"]
    assert all(r[2] == "false" and float(r[1]) > 1 for r in rows)
    assert all(r[3:] == ["", "", "", ""] for r in rows)


def test_stability_certified_at_small_step(tmp_path):
    scen = tmp_path / "decay.scenario"
    scen.write_text("schema_version: 1\nname: decay\nn: 2\nm: 1\nh: 1.0\nhorizon: 5\n"
                    "viruses:\n  - label: v\n    B: [[0.05, 0.1], [0.1, 0.05]]\n"
                    "    gamma: [0.5, 0.6]\n    c: [1.0, 1.0]\n    x0: [0.1, 0.1]\n")
    assert run(tmp_path, "stability", str(scen)) == 0
    _, rows = read_csv(tmp_path / "decay" / "stability" / "stability.csv")
    assert rows[0][2] == "true" and 0 < float(rows[0][6]) < 1
    _, prows = read_csv(tmp_path / "decay" / "stability" / "lyapunov.csv")
    assert len(prows) == 2 and all(float(r[2]) > 0 for r in prows)


def test_observability_disease_free(tmp_path):
    assert run(tmp_path, "observability", "europe", "--regime", "disease-free") == 0
    header, rows = read_csv(tmp_path / "europe" / "observability" / "observability.csv")
    assert header == OBSERVABILITY_COLUMNS
    assert rows[0][0] == "disease_free" and rows[0][1] == "10" and rows[0][3] == "true"
    _, mat = read_csv(tmp_path / "europe" / "observability" / "observability_matrix.csv")
    assert len(mat) == 10 and len(mat[0]) == 10


def test_observability_trajectory(tmp_path):
    assert run(tmp_path, "observability", "europe", "--regime", "trajectory", "--t", "30") == 0
    _, rows = read_csv(tmp_path / "europe" / "observability" / "observability.csv")
    assert rows[0][0] == "along_trajectory(t=30)" or rows[0][0].startswith("along_trajectory")
    assert rows[0][1] == "10"


def test_observe(tmp_path, capsys):
    assert run(tmp_path, "observe", "europe", "--horizon", "150") == 0
    header, rows = read_csv(tmp_path / "europe" / "observe" / "observer.csv")
    assert header == OBSERVER_COLUMNS
    assert len(rows) == 151 * 5 * 2
    t0 = [r for r in rows if r[0] == "0" and r[1] == "UK"]
    assert [r[2] for r in t0] == ["sars-cov-2", "influenza"]
    assert float(t0[0][4]) == pytest.approx(0.0083 / 0.8)
    assert "t=115" in capsys.readouterr().out
    header, summary = read_csv(tmp_path / "europe" / "observe" / "observer_summary.csv")
    assert header == ["virus", "node", "peak_t", "time_to_10pct"] and len(summary) == 10


def test_sweeps(tmp_path):
    assert run(tmp_path, "sweep", "europe", "--param", "h", "--values", "2,0.5,1") == 0
    header, rows = read_csv(tmp_path / "europe" / "sweep_h" / "sweep_h.csv")
    assert header[:3] == ["h", "valid", "virus"]
    assert [r[0] for r in rows] == ["0.5", "0.5", "1.0", "1.0", "2.0", "2.0"]
    assert [r[1] for r in rows[-2:]] == ["false", "false"]
    assert run(tmp_path, "sweep", "europe", "--param", "L", "--values", "0.5,0", "--horizon", "200") == 0
    _, rows = read_csv(tmp_path / "europe" / "sweep_L" / "sweep_L.csv")
    assert [r[0] for r in rows] == ["0.0", "0.5"]
    assert rows[1][1] == "115"


def test_plot_flag_writes_png(tmp_path):
    pytest.importorskip("matplotlib")
    assert run(tmp_path, "simulate", "europe", "--horizon", "30", "--plot") == 0
    png = tmp_path / "europe" / "simulate" / "infections.png"
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert run(tmp_path, "observe", "europe", "--horizon", "60", "--plot") == 0
    assert (tmp_path / "europe" / "observe" / "estimation_error_log.png").exists()
    assert run(tmp_path, "observability", "europe", "--plot") == 0
    assert (tmp_path / "europe" / "observability" / "singular_values.png").exists()


def test_no_png_without_flag(tmp_path):
    assert run(tmp_path, "simulate", "europe", "--horizon", "3") == 0
    assert not list((tmp_path / "europe" / "simulate").glob("*.png"))


@pytest.mark.skipif(shutil.which("competing-sir") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["competing-sir", "validate", "europe", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0
