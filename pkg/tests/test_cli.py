"""End-to-end CLI runs against temp directories: artifacts, exit codes,
manifest integrity, and byte-level reproducibility."""

import json
import subprocess
import sys

import pytest

from perpetuity.cli import main
from perpetuity.runconfig import check_manifest

FAST_MC = [
    "--set", "mc.n_samples=20000",
    "--set", "mc.iterations=20",
    "--set", "mc.master_seed=424242",
]
FAST_VERIFY = [
    "--set", "levy.n_samples=20000",
    "--set", "verify.pairs=2",
    "--set", "verify.pair_samples=20000",
    "--set", "verify.quad_points=128",
    "--set", "verify.steutel_tol=0.05",
]
UNIFORM = ["--set", "rho.family=uniform01", "--set", "rho.n=512"]
HALF = ["--set", "rho.atoms=0.5:1.0"]


def out(tmp_path):
    return ["--set", f"output.dir={tmp_path / 'runs'}"]


def only_run_dir(tmp_path, command):
    dirs = [p for p in (tmp_path / "runs").iterdir()
            if p.name.startswith(command + "-")]
    assert len(dirs) == 1
    return dirs[0]


def test_diagnose_pass_and_gate(tmp_path, capsys):
    assert main(["diagnose", *HALF, *out(tmp_path)]) == 0
    rd = only_run_dir(tmp_path, "diagnose")
    report = json.loads((rd / "diagnostics.json").read_text())
    assert report["exists"] is True
    assert (rd / "diagnostics.txt").read_text().strip()
    check_manifest(rd)
    assert "diagnose-" in capsys.readouterr().out

    assert main(["diagnose", "--set", "rho.atoms=2.0:1.0",
                 *out(tmp_path)]) == 2


def test_config_errors_exit_1(tmp_path, capsys):
    assert main(["diagnose", "--set", "bogus.key=1", *out(tmp_path)]) == 1
    assert main(["diagnose", *out(tmp_path)]) == 1       # no rho given
    assert main(["solve", "--method", "mc", *HALF, *out(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "master_seed" in err


def test_response_artifacts(tmp_path):
    assert main(["response", *HALF, *out(tmp_path)]) == 0
    rd = only_run_dir(tmp_path, "response")
    lines = (rd / "response.csv").read_text().splitlines()
    assert lines[0] == "value,duration"
    assert json.loads((rd / "response.json").read_text())["lambda"] == 1.0
    curve = (rd / "response_curve.csv").read_text().splitlines()
    assert curve[0] == "u,h"
    check_manifest(rd)


def test_solve_lst_and_nonconvergence(tmp_path):
    assert main(["solve", *HALF, *out(tmp_path)]) == 0
    rd = only_run_dir(tmp_path, "solve")
    assert (rd / "grid.csv").read_text().splitlines()[0] == "s,psi,phi"
    report = json.loads((rd / "solution.json").read_text())
    assert report["method"] == "lst"
    assert report["lst"]["converged"] is True
    assert "mc" not in report

    code = main(["solve", *HALF, "--set", "solver.max_iter=2",
                 *out(tmp_path)])
    assert code == 3
    rd2 = [p for p in (tmp_path / "runs").iterdir()
           if p.name.startswith("solve-") and p != rd]
    flagged = json.loads((rd2[0] / "solution.json").read_text())
    assert flagged["lst"]["converged"] is False


def test_solve_mc_and_both(tmp_path):
    assert main(["solve", "--method", "mc", *HALF, *FAST_MC,
                 *out(tmp_path)]) == 0
    rd = only_run_dir(tmp_path, "solve")
    sidecar = json.loads((rd / "sample.json").read_text())
    assert sidecar["n"] == 20000
    report = json.loads((rd / "solution.json").read_text())
    assert report["mc"]["n"] == 20000
    assert abs(report["mc"]["mean"] - 1.0) < 0.15
    assert "lst" not in report

    assert main(["solve", "--method", "both", *UNIFORM, *FAST_MC,
                 "--set", "output.dir=" + str(tmp_path / "runs2")]) == 0
    rd2 = next((tmp_path / "runs2").iterdir())
    both = json.loads((rd2 / "solution.json").read_text())
    assert both["cross_method"]["passed"] is True
    check_manifest(rd2)


def test_moments_cli(tmp_path):
    assert main(["moments", "--order", "6", *UNIFORM, *out(tmp_path)]) == 0
    rd = only_run_dir(tmp_path, "moments")
    rows = (rd / "moments.csv").read_text().splitlines()
    assert rows[0] == "order,value"
    vals = [float(r.split(",")[1]) for r in rows[1:]]
    assert vals[0] == 1.0 and len(vals) == 7          # orders 0..6
    assert vals[2] == pytest.approx(2.0, rel=1e-9)    # dyadic mean is exact
    sb = (rd / "sb_moments.csv").read_text().splitlines()
    assert float(sb[2].split(",")[1]) == pytest.approx(2.0, rel=1e-9)


def test_levy_cli(tmp_path):
    assert main(["levy", *UNIFORM, *FAST_MC,
                 "--set", "levy.n_samples=20000",
                 "--set", "levy.probes=0.5,1,2", *out(tmp_path)]) == 0
    rd = only_run_dir(tmp_path, "levy")
    steutel = json.loads((rd / "steutel.json").read_text())
    assert len(steutel["probes"]) == 3
    assert steutel["residual"] < 0.05
    assert json.loads(
        (rd / "levy.json").read_text())["total_mass_of_M"] == "infinity"
    check_manifest(rd)


def test_metric_cli(tmp_path):
    assert main(["metric", "--q", "1.5", *UNIFORM, *FAST_MC,
                 "--set", "verify.pair_samples=20000",
                 "--set", "verify.quad_points=128", *out(tmp_path)]) == 0
    rd = only_run_dir(tmp_path, "metric")
    rep = json.loads((rd / "metric.json").read_text())
    assert rep["r_delta"]["value"] > 0.0
    assert rep["contraction"]["ratio"] <= rep["contraction"]["bound_g"] + 0.05
    assert rep["contraction"]["q"] == 1.5


def test_verify_pass_fail_and_reuse(tmp_path, capsys):
    args = [*UNIFORM, *FAST_MC, *FAST_VERIFY, *out(tmp_path)]
    assert main(["verify", *args]) == 0
    rd = only_run_dir(tmp_path, "verify")
    rep = json.loads((rd / "verify.json").read_text())
    assert rep["all_passed"] is True
    assert {"perpetuity", "steutel", "contraction"} <= set(rep["checks"])
    assert rep["checks"]["contraction"]["pairs"] == 2
    assert rep["checks"]["contraction"]["draws"] >= 2
    assert "perpetuity: PASS" in capsys.readouterr().out

    # designed failure: the swapped-in point mass breaks the identity;
    # the flag is part of the content address, so it gets its own directory
    assert main(["verify", "--negative-control", *args]) == 4
    neg_dirs = [p for p in (tmp_path / "runs").iterdir()
                if p.name.startswith("verify-") and p != rd]
    assert len(neg_dirs) == 1
    neg = json.loads((neg_dirs[0] / "verify.json").read_text())
    assert neg["checks"]["perpetuity"]["passed"] is False
    assert neg["checks"]["perpetuity"]["negative_control"] is True
    manifest = json.loads((neg_dirs[0] / "manifest.json").read_text())
    assert "negative_control=True" in manifest["flags"]


def test_verify_from_prior_solve(tmp_path):
    assert main(["solve", "--method", "mc", *UNIFORM, *FAST_MC,
                 *out(tmp_path)]) == 0
    solve_dir = only_run_dir(tmp_path, "solve")
    args = [*UNIFORM, *FAST_MC, *FAST_VERIFY, *out(tmp_path)]
    assert main(["verify", "--from", str(solve_dir), *args]) == 0

    # tampering with the prior run must be caught before reuse
    sample = solve_dir / "sample.csv"
    sample.write_text(sample.read_text().replace("\n", "\n", 1) + "9.9\n")
    assert main(["verify", "--from", str(solve_dir), *args]) == 1


def test_reruns_are_byte_identical(tmp_path):
    a = ["solve", "--method", "both", *UNIFORM, *FAST_MC]
    assert main([*a, "--set", f"output.dir={tmp_path / 'r1'}"]) == 0
    assert main([*a, "--set", f"output.dir={tmp_path / 'r2'}"]) == 0
    d1 = next((tmp_path / "r1").iterdir())
    d2 = next((tmp_path / "r2").iterdir())
    for name in ("sample.csv", "grid.csv", "solution.json"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
    # identical config into the same tree lands in the same directory
    assert main([*a, "--set", f"output.dir={tmp_path / 'r1'}"]) == 0
    assert len(list((tmp_path / "r1").iterdir())) == 1


def test_console_script(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "perpetuity.cli", "diagnose", *HALF,
         *out(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "exists" in proc.stdout or "wrote" in proc.stdout
