import json
import math
import re

import numpy as np
import pytest

import oracles
from curveflow.cli import EXIT_INVALID, EXIT_OK, EXIT_SOLVER, EXIT_TOLERANCE, main
from curveflow.config import config_to_dict, load_config
from curveflow.io import read_metrics_csv, read_snapshot_csv


@pytest.fixture
def write_config(tmp_path):
    def write(mutate=None, name="config.json"):
        doc = config_to_dict(load_config("threefold_example"))
        doc["outputs"]["directory"] = str(tmp_path / "out")
        if mutate:
            mutate(doc)
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)
    return write


def run_cli(capsys, *argv):
    code = main(list(map(str, argv)))
    out = capsys.readouterr()
    return code, out.out, out.err


# simulate

def test_simulate_writes_snapshots(write_config, tmp_path, capsys):
    out = tmp_path / "sim"
    code, text, _ = run_cli(capsys, "simulate", "--config", write_config(), "--out", out,
                            "--dt", 1e-3)
    assert code == EXIT_OK
    csvs = sorted(p.name for p in out.glob("snapshot_t*.csv"))
    svgs = sorted(p.name for p in out.glob("frame_t*.svg"))
    assert len(csvs) == len(svgs) == 10
    assert csvs[0] == "snapshot_t0.0000.csv" and csvs[-1] == "snapshot_t4.0000.csv"
    assert "snapshot_t0.0100.csv" in csvs
    metrics = read_metrics_csv(out / "metrics.csv")
    assert len(metrics["t"]) == 4001
    assert "relative energy drift" in text

    first = read_snapshot_csv(out / "snapshot_t0.0000.csv")
    theta = first["theta"]
    assert np.abs(first["rho"] - oracles.initial_radius(theta, oracles.INITIAL_CONSTANT)).max() < 1e-9
    last = read_snapshot_csv(out / "snapshot_t4.0000.csv")
    assert np.abs(last["rho"] - oracles.exact_radius(theta, 4.0, oracles.INITIAL_ENERGY)).max() < 1e-5


def test_simulate_target_as_initial_is_stationary(write_config, tmp_path, capsys):
    def same(doc):
        doc["initial"] = dict(doc["target"])
    out = tmp_path / "still"
    code, _, _ = run_cli(capsys, "simulate", "--config", write_config(same), "--out", out,
                         "--dt", 1e-3, "--t-end", 1)
    assert code == EXIT_OK
    snaps = [read_snapshot_csv(p)["rho"] for p in sorted(out.glob("snapshot_t*.csv"))]
    assert len(snaps) >= 2
    for rho in snaps[1:]:
        assert np.abs(rho - snaps[0]).max() <= 1e-10


def test_zero_step_is_a_validation_error(write_config, tmp_path, capsys):
    out = tmp_path / "never"
    path = write_config(lambda d: d["solver"].update(dt=0))
    code, _, err = run_cli(capsys, "simulate", "--config", path, "--out", out)
    assert code == EXIT_INVALID
    assert "solver" in err
    assert not out.exists()


def test_bad_override_is_a_validation_error(write_config, tmp_path, capsys):
    code, _, err = run_cli(capsys, "simulate", "--config", write_config(), "--dt", -1,
                           "--out", tmp_path / "x")
    assert code == EXIT_INVALID and err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run_cli(capsys, "simulate", "--config", tmp_path / "absent.json")
    assert code == EXIT_INVALID and "error" in err


def test_unwritable_output(write_config, tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = run_cli(capsys, "simulate", "--config", write_config(), "--out",
                           blocker / "sub", "--dt", 1e-3, "--t-end", 0.01)
    assert code == EXIT_INVALID and err


def test_solver_failure_exit_code(write_config, tmp_path, capsys):
    path = write_config(lambda d: d["solver"].update(scheme="rk4_explicit", dt=1e-2))
    code, _, err = run_cli(capsys, "simulate", "--config", path, "--out", tmp_path / "boom")
    assert code == EXIT_SOLVER
    assert "solver failure" in err


# table

def test_table_matches_reference(write_config, tmp_path, capsys):
    code, text, _ = run_cli(capsys, "table", "--config", write_config(), "--out", tmp_path / "t",
                            "--dt", 1e-3)
    assert code == EXIT_OK
    assert "all 11 reference rows within relative tolerance" in text
    rows = (tmp_path / "t" / "table.csv").read_text().splitlines()
    assert rows[0].split(",") == ["t", "L/2mpi", "rho_min", "rho_max", "E"]
    assert len(rows) == 12
    assert rows[-1].startswith("inf,")


def test_table_reports_perturbed_reference(write_config, tmp_path, capsys):
    def perturb(doc):
        doc["table"]["reference"][3][2] *= 1.01
    code, text, _ = run_cli(capsys, "table", "--config", write_config(perturb), "--out",
                            tmp_path / "t", "--dt", 1e-3)
    assert code == EXIT_TOLERANCE
    mismatches = [line for line in text.splitlines() if line.startswith("MISMATCH")]
    assert len(mismatches) == 1 and "t = 0.1 rho_min" in mismatches[0]


def test_table_of_target_is_constant(write_config, tmp_path, capsys):
    def same(doc):
        doc["initial"] = dict(doc["target"])
        doc["table"]["reference"] = []
    code, _, _ = run_cli(capsys, "table", "--config", write_config(same), "--out", tmp_path / "t",
                         "--dt", 1e-3)
    assert code == EXIT_OK
    lines = (tmp_path / "t" / "table.csv").read_text().splitlines()[1:]
    values = np.array([[float(v) for v in line.split(",")[1:]] for line in lines])
    assert np.abs(values - values[-1]).max() <= 1e-8


# homotopy

def _homotopy_lambda(text):
    return float(re.search(r"lambda = (\S+)", text).group(1))


def test_homotopy_to_covered_unit_circle(write_config, tmp_path, capsys):
    def unit_target(doc):
        doc["target"] = {"kind": "trig", "m": 3, "constant": 1}
        doc["solver"]["snapshot_times"] = []
    path = write_config(unit_target)
    code, text, _ = run_cli(capsys, "homotopy", "--config", path, "--out", tmp_path / "h",
                            "--dt", 1e-3, "--t-end", 20)
    assert code == EXIT_OK
    assert _homotopy_lambda(text) == pytest.approx(6 * math.pi / oracles.INITIAL_ENERGY, rel=1e-10)
    assert _homotopy_lambda(text) == pytest.approx(6.1887, abs=6e-3)
    frames = sorted((tmp_path / "h").glob("frame_t*.svg"))
    assert len(frames) == 21
    last = read_snapshot_csv(sorted((tmp_path / "h").glob("snapshot_t*.csv"))[-1])
    assert np.ptp(last["rho"]) < 1e-3


def test_homotopy_of_target_to_itself(write_config, tmp_path, capsys):
    path = write_config(lambda d: d.update(initial=dict(d["target"])))
    code, text, _ = run_cli(capsys, "homotopy", "--config", path, "--out", tmp_path / "h",
                            "--dt", 1e-3, "--t-end", 1)
    assert code == EXIT_OK
    assert _homotopy_lambda(text) == pytest.approx(1.0, abs=1e-12)


def test_homotopy_between_convex_curves_stays_positive(write_config, tmp_path, capsys):
    def convex(doc):
        doc["initial"] = {"kind": "trig", "m": 1, "constant": 3,
                          "harmonics": [{"k": 2, "a": 0.4, "b": 0.1}, {"k": 3, "a": 0.0, "b": 0.1}]}
        doc["target"] = {"kind": "trig", "m": 1, "constant": 1,
                         "harmonics": [{"k": 2, "a": 0.0, "b": 0.2}]}
        doc["grid"]["n"] = 256
    code, text, _ = run_cli(capsys, "homotopy", "--config", write_config(convex), "--out",
                            tmp_path / "h", "--dt", 1e-3, "--t-end", 10)
    assert code == EXIT_OK
    rho_min = float(re.search(r"min rho over the run = (\S+)", text).group(1))
    assert rho_min > 0
    metrics = read_metrics_csv(tmp_path / "h" / "metrics.csv")
    assert metrics["rho_min"].min() > 0


# verify and analyze

def test_verify_rejects_coarse_grid(write_config, capsys):
    code, _, err = run_cli(capsys, "verify", "--config", write_config(), "--n", 16)
    assert code == EXIT_INVALID and "16" in err


def test_verify_catches_flipped_nonlocal_sign(write_config, capsys):
    code, text, _ = run_cli(capsys, "verify", "--config", write_config(), "--flip-f-sign",
                            "--dt", 1e-3, "--t-end", 1)
    assert code == EXIT_TOLERANCE
    assert re.search(r"^\[FAIL\] energy", text, re.M)


@pytest.mark.slow
def test_verify_default_config_passes(write_config, capsys):
    code, text, _ = run_cli(capsys, "verify", "--config", write_config())
    print(text)
    assert code == EXIT_OK, text


def test_analyze_writes_reports(write_config, tmp_path, capsys):
    out = tmp_path / "a"
    code, text, _ = run_cli(capsys, "analyze", "--config", write_config(), "--out", out,
                            "--dt", 1e-3)
    assert code == EXIT_OK
    assert (out / "report.txt").exists() and (out / "report.csv").exists()
    assert "bounds_violations = 0" in text
    residual_m = float(re.search(r"length_rate_residual_2mpi = (\S+)", text).group(1))
    residual_1 = float(re.search(r"length_rate_residual_2pi = (\S+)", text).group(1))
    assert residual_m < residual_1
