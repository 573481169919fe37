import json

import numpy as np
import pytest

from sgdd.cli import main

SMALL = """
problem = linear-stochastic
mesh_n = 8
M = 2
p_in = 2
p_out = 2
sigma = 0.2
nsub = 2
preconditioner = 2gv3
seed = 1
"""


def run_cli(tmp_path, text, command="solve", extra=()):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    out = tmp_path / "out"
    return main([command, str(cfg), "--out", str(out), *extra]), out


def test_solve_writes_artifacts(tmp_path):
    code, out = run_cli(tmp_path, SMALL)
    assert code == 0
    for name in ("solution.vtk", "moments.csv", "report.json", "config.txt"):
        assert (out / name).exists(), name
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] is True
    assert report["config"]["mesh_n"] == 8
    moments = (out / "moments.csv").read_text()
    assert "# mesh_n = 8" in moments
    assert moments.splitlines()[-1].count(",") == 3


def test_solve_invalid_config_exits_2(tmp_path, capsys):
    code, _ = run_cli(tmp_path, SMALL + "sigma = -1\n")
    assert code == 2
    assert "sigma" in capsys.readouterr().err


def test_solve_unknown_key_exits_2(tmp_path, capsys):
    code, _ = run_cli(tmp_path, SMALL + "mesh = 8\n")
    assert code == 2
    assert "unknown key" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "nope.cfg")]) == 2


def test_solve_nonlinear_reports_picard(tmp_path):
    text = SMALL.replace("linear-stochastic", "nonlinear-stochastic")
    code, out = run_cli(tmp_path, text)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert 1 <= report["picard_iterations"] <= 10


def test_solve_deterministic(tmp_path):
    text = SMALL.replace("linear-stochastic", "linear-deterministic")
    code, out = run_cli(tmp_path, text)
    assert code == 0
    assert "SCALARS u" in (out / "solution.vtk").read_text()


def test_verify_sigma_zero_exact_agreement(tmp_path):
    text = SMALL + "sigma = 0.0\nnsamples = 16\n"
    code, out = run_cli(tmp_path, text.replace("sigma = 0.2\n", ""), command="verify")
    assert code == 0
    assert (out / "verify.csv").exists()
    assert (out / "probe_samples.csv").exists()


def test_verify_small_sigma_passes(tmp_path):
    text = SMALL + "nsamples = 1500\np_out = 3\n"
    text = text.replace("p_out = 2\n", "")
    code, out = run_cli(tmp_path, text, command="verify")
    assert code == 0
    lines = [l for l in (out / "verify.csv").read_text().splitlines() if not l.startswith("#")]
    assert lines[0].startswith("x,y,sg_mean")
    assert len(lines) == 6


def test_verify_underresolved_basis_fails(tmp_path, capsys):
    # constant-only output chaos cannot carry the variance of sigma = 0.3
    text = SMALL.replace("p_out = 2", "p_out = 0").replace("sigma = 0.2", "sigma = 0.3")
    text += "nsamples = 1000\n"
    code, out = run_cli(tmp_path, text, command="verify")
    assert code == 1
    assert "outside 3-sigma band" in capsys.readouterr().err


def test_study_coarse_ratio(tmp_path):
    text = "study = coarse-ratio\nsweep = 1, 4, 16\n" + SMALL.replace(
        "preconditioner = 2gv3", "preconditioner = 2glu"
    )
    code, out = run_cli(tmp_path, text, command="study")
    assert code == 0
    csv_path = out / "study_coarse-ratio.csv"
    lines = [l for l in csv_path.read_text().splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    iters = [int(l.split(",")[header.index("outer_iterations")]) for l in lines[1:]]
    assert iters == sorted(iters)
    assert (out / "study_coarse-ratio.csv.manifest.json").exists()


def test_study_cond_ratio(tmp_path):
    text = ("study = cond-ratio\nsweep = 1, 2, 3\n"
            + SMALL.replace("mesh_n = 8", "mesh_n = 4").replace("p_out = 2", "p_out = 3"))
    code, out = run_cli(tmp_path, text, command="study")
    assert code == 0
    lines = [l for l in (out / "study_cond-ratio.csv").read_text().splitlines()
             if not l.startswith("#")]
    header = lines[0].split(",")
    ratios = [float(l.split(",")[header.index("ratio")]) for l in lines[1:]]
    assert all(a < b for a, b in zip(ratios, ratios[1:]))


def test_study_empty_sweep_exits_2(tmp_path, capsys):
    text = "study = strong\nsweep = \n" + SMALL
    code, _ = run_cli(tmp_path, text, command="study")
    assert code == 2


def test_study_unknown_kind_exits_2(tmp_path):
    text = "study = sideways\nsweep = 1,2\n" + SMALL
    code, _ = run_cli(tmp_path, text, command="study")
    assert code == 2


def test_threads_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(SMALL)
    out = tmp_path / "out"
    code = main(["solve", str(cfg), "--out", str(out), "--threads", "2"])
    assert code == 0
    assert "threads = 2" in (out / "config.txt").read_text()


def test_config_roundtrip_via_artifact(tmp_path):
    from sgdd.config import load_config, parse_config

    code, out = run_cli(tmp_path, SMALL)
    assert code == 0
    again = load_config(out / "config.txt")
    assert again == parse_config(SMALL)
