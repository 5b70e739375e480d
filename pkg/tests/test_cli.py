import csv
import json
import subprocess
import sys

import pytest

from photonic_entangle.analysis import FinalStateReport
from photonic_entangle.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_TARGET, csv_header, run_command
from photonic_entangle.config import RunConfig
from photonic_entangle.figures import fig2_config, fig4_config, fig6_config


def _write(tmp_path, raw, name="run"):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(raw))
    return path


def _small(raw, points=21):
    raw["output"]["grid_points"] = points
    return raw


def test_header_layouts():
    assert csv_header(("A",)) == ["t_s", "re_A", "im_A", "pop_A", "re_gamma", "im_gamma", "pop_photon"]
    assert csv_header(("A", "B"))[-1] == "entropy_nats"
    assert csv_header(("A", "B", "C"))[-1] == "w_fidelity"


def test_simulate_writes_series_and_sidecars(tmp_path):
    cfg_path = _write(tmp_path, _small(fig4_config(515.0)), "vb_515.0")
    out = tmp_path / "out"
    assert run_command(["simulate", str(cfg_path), "-o", str(out)]) == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == ["vb_515.0.config.json", "vb_515.0.csv", "vb_515.0.report.json", "vb_515.0.series.json"]

    with (out / "vb_515.0.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 21
    for row in rows:
        total = float(row["pop_A"]) + float(row["pop_B"]) + float(row["pop_photon"])
        assert total == pytest.approx(1.0, abs=1e-8)
        assert float(row["re_A"]) ** 2 + float(row["im_A"]) ** 2 == pytest.approx(float(row["pop_A"]), rel=1e-12)

    config = RunConfig.load(out / "vb_515.0.config.json")
    assert config == RunConfig.from_dict(_small(fig4_config(515.0)))
    report = FinalStateReport.from_dict(json.loads((out / "vb_515.0.report.json").read_text()))
    last = rows[-1]
    assert report.populations[0] == pytest.approx(float(last["pop_A"]), rel=1e-8)
    assert report.entropy == pytest.approx(float(last["entropy_nats"]), rel=1e-8)


def test_json_series_matches_csv(tmp_path):
    cfg_path = _write(tmp_path, _small(fig6_config(), 5))
    run_command(["simulate", str(cfg_path), "-o", str(tmp_path)])
    series = json.loads((tmp_path / "run.series.json").read_text())
    with (tmp_path / "run.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert series["labels"] == ["A", "B", "C"]
    for t, amps, row in zip(series["t_s"], series["amplitudes"], rows):
        assert repr(t) == row["t_s"]
        assert amps[2] == [float(row["re_C"]), float(row["im_C"])]
        w = abs(sum(complex(*a) for a in amps[:3])) ** 2 / 3
        assert w == pytest.approx(float(row["w_fidelity"]), rel=1e-12)


def test_invalid_config_exit_code(tmp_path, capsys):
    raw = fig4_config(515.0)
    raw["atoms"][0]["speed_mps"] = -5
    assert run_command(["simulate", str(_write(tmp_path, raw))]) == EXIT_CONFIG
    assert "config invalid" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path):
    assert run_command(["simulate", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_usage_error_exit_code():
    assert run_command(["sweep"]) == EXIT_CONFIG
    assert run_command(["bogus"]) == EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path):
    raw = fig2_config(0.0)
    raw["atoms"][0]["x_offset_m"] = None
    assert run_command(["simulate", str(_write(tmp_path, raw)), "-o", str(tmp_path)]) == EXIT_NUMERIC


def test_sweep_command(tmp_path):
    cfg_path = _write(tmp_path, fig6_config(), "w")
    code = run_command(["sweep", str(cfg_path), "--vb", "520:530:2", "--vc", "520:520:1", "-o", str(tmp_path)])
    assert code == EXIT_OK
    with (tmp_path / "w.sweep.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["v_B_mps"]) for r in rows] == [520.0, 530.0]
    for r in rows:
        assert sum(float(r[k]) for k in ("pop_A", "pop_B", "pop_C", "pop_photon")) == pytest.approx(1.0, abs=1e-8)


def test_bad_sweep_range(tmp_path):
    cfg_path = _write(tmp_path, fig6_config())
    assert run_command(["sweep", str(cfg_path), "--vb", "530:520:3", "--vc", "1:2:2"]) == EXIT_CONFIG
    assert run_command(["sweep", str(cfg_path), "--vb", "oops"]) == EXIT_CONFIG


def test_search_exit_codes(tmp_path):
    # a bracket far from any Bell-like point cannot meet the target
    cfg_path = _write(tmp_path, fig4_config(500.0))
    args = ["search", str(cfg_path), "--target", "bell", "--grid", "3", "-o", str(tmp_path)]
    assert run_command(args + ["--vb-bracket", "700:720"]) == EXIT_TARGET
    result = json.loads((tmp_path / "run.search_bell.json").read_text())
    assert result["target_met"] is False and 700 <= result["velocities_mps"][0] <= 720
    assert run_command(args + ["--vb-bracket", "20:10"]) == EXIT_CONFIG


def test_figure_list(capsys):
    assert run_command(["figure", "--list"]) == EXIT_OK
    listed = capsys.readouterr().out.split()
    assert {"2", "3", "4a", "4d", "5", "6"} <= set(listed)


def test_figure_unknown():
    assert run_command(["figure", "9z"]) == EXIT_CONFIG


def test_figure_three(tmp_path):
    assert run_command(["figure", "3", "-o", str(tmp_path)]) == EXIT_OK
    with (tmp_path / "figure3_single.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2001
    assert float(rows[-1]["pop_A"]) == pytest.approx(1.0, abs=1e-3)


def test_schema_command(capsys):
    assert run_command(["schema"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["title"].startswith("photonic_entangle")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "photonic_entangle", "figure", "--list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "4d" in proc.stdout
