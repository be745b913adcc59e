"""End-to-end command-line runs against temporary run directories."""

import re

import numpy as np
import pytest

import kclattice as kc
from kclattice.cli import main


@pytest.fixture(scope="module")
def cache_dir(tmp_path_factory):
    # shared kernel cache so the table is quadratured once per shape
    return tmp_path_factory.mktemp("kernel_cache")


def base_config(cache_dir, extra=""):
    return (
        "[problem]\n"
        "b = 0.0\n"
        "radius = 3\n"
        "\n"
        "[potential]\n"
        "kind = coercive\n"
        "v0 = 1.0\n"
        "rate = 3.0\n"
        "power = 2.0\n"
        "\n"
        "[kernel]\n"
        f"cache_dir = {cache_dir}\n"
        "\n" + extra
    )


def write_config(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def run_dirs(base):
    return sorted(p for p in base.iterdir() if p.is_dir())


def latest_run(base):
    return run_dirs(base)[-1]


def test_green_writes_octant_and_caches(tmp_path, cache_dir, capsys):
    cfg = write_config(tmp_path, base_config(cache_dir))
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out), "green"]) == 0
    first = capsys.readouterr().out
    assert "written" in first and "cached" not in first
    run = latest_run(out)
    lines = (run / "octant.csv").read_text().splitlines()
    assert lines[0] == "z1,z2,z3,R_alpha"
    # orbit representatives 0 <= z1 <= z2 <= z3 <= 6
    assert len(lines) - 1 == sum(1 for k in range(7) for j in range(k + 1) for i in range(j + 1))
    z1, z2, z3, val = lines[1].split(",")
    assert (z1, z2, z3) == ("0", "0", "0")
    assert float(val) == pytest.approx(1.08718047897907, rel=1e-12)
    report = (run / "report.txt").read_text()
    assert "K_alpha" in report
    assert (run / "config.snapshot").exists()

    assert main(["--config", cfg, "--output", str(out), "green"]) == 0
    second = capsys.readouterr().out
    assert "cached" in second


def test_solve_artifacts_and_determinism(tmp_path, cache_dir, capsys):
    cfg = write_config(tmp_path, base_config(cache_dir))
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out), "solve"]) == 0
    assert main(["--config", cfg, "--output", str(out), "solve"]) == 0
    capsys.readouterr()
    first, second = run_dirs(out)[-2:]
    for run in (first, second):
        assert (run / "solution.field").exists()
        assert (run / "history.csv").exists()
        assert re.search(r"converged\s*=\s*True", (run / "report.txt").read_text())
    u1 = kc.load_field_text(first / "solution.field")
    u2 = kc.load_field_text(second / "solution.field")
    assert np.array_equal(u1.values, u2.values)
    history = (first / "history.csv").read_text().splitlines()
    assert history[0] == "iteration,energy,residual,s_u"
    assert len(history) >= 3
    final = history[-1].split(",")
    assert float(final[2]) <= 1e-9


def test_solve_exit3_still_writes_artifacts(tmp_path, cache_dir, capsys):
    cfg = write_config(
        tmp_path,
        base_config(
            cache_dir,
            "[solver]\nmax_iterations = 2\nnewton_max_iterations = 1\n"
            "gradient_tolerance = 1e-13\n",
        ),
    )
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out), "solve"]) == 3
    capsys.readouterr()
    run = latest_run(out)
    assert (run / "solution.field").exists()
    report = (run / "report.txt").read_text()
    assert re.search(r"converged\s*=\s*False", report)
    assert "budget exhausted" in report


def test_verify_passes_on_resolved_problem(tmp_path, cache_dir, capsys):
    cfg = write_config(
        tmp_path,
        base_config(
            cache_dir,
            "[verify]\ntrials = 30\nmp_trials = 15\nfiber_fields = 4\n"
            "level_samples = 4\nradii = 2 3 4 5\n",
        ),
    )
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out), "verify"]) == 0
    stdout = capsys.readouterr().out
    assert "all checks passed" in stdout
    run = latest_run(out)
    suite = (run / "suite.csv").read_text().splitlines()
    assert suite[0] == "name,anchor,samples,pass,measured,tolerance"
    assert len(suite) == 8
    assert all(row.split(",")[3] == "pass" for row in suite[1:])


def test_verify_fails_honestly_on_unresolved_radii(tmp_path, cache_dir, capsys):
    # b = 1 levels still move percent-level between radii 2 and 3
    text = base_config(cache_dir).replace("b = 0.0", "b = 1.0")
    cfg = write_config(
        tmp_path,
        text + "[verify]\ntrials = 20\nmp_trials = 10\nfiber_fields = 3\n"
        "level_samples = 3\nradii = 2 3\n",
    )
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out), "verify"]) == 4
    captured = capsys.readouterr()
    assert "failing checks:" in captured.err
    assert "box-convergence" in captured.err
    run = latest_run(out)
    assert "CHECK FAILURES PRESENT" in (run / "report.txt").read_text()


def test_sweep_single_point_matches_solve(tmp_path, cache_dir, capsys):
    sweep_cfg = write_config(
        tmp_path, base_config(cache_dir, "[sweep]\nparameter = b\nvalues = 0.0\n")
    )
    out = tmp_path / "out"
    assert main(["--config", sweep_cfg, "--output", str(out), "sweep"]) == 0
    capsys.readouterr()
    sweep_lines = (latest_run(out) / "sweep.csv").read_text().splitlines()
    assert sweep_lines[0] == "param,value,energy,residual,norm,iterations"
    row = sweep_lines[1].split(",")
    assert row[0] == "b" and float(row[1]) == 0.0

    solve_cfg = write_config(tmp_path, base_config(cache_dir))
    assert main(["--config", solve_cfg, "--output", str(out), "solve"]) == 0
    capsys.readouterr()
    report = (latest_run(out) / "report.txt").read_text()
    energy = next(
        float(line.split()[-1]) for line in report.splitlines() if line.startswith("energy")
    )
    assert float(row[2]) == pytest.approx(energy, rel=1e-12)


def test_sweep_monotonicity_observation(tmp_path, cache_dir, capsys):
    cfg = write_config(
        tmp_path, base_config(cache_dir, "[sweep]\nparameter = b\nvalues = 0.0 0.5 1.0\n")
    )
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out), "sweep"]) == 0
    stdout = capsys.readouterr().out
    assert "# observation: energy nondecreasing in b: yes" in stdout
    lines = (latest_run(out) / "sweep.csv").read_text().splitlines()
    energies = [float(line.split(",")[2]) for line in lines[1:4]]
    assert energies == sorted(energies)


def test_seed_flag_lands_in_snapshot(tmp_path, cache_dir, capsys):
    cfg = write_config(tmp_path, base_config(cache_dir))
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out), "--seed", "99", "solve"]) == 0
    capsys.readouterr()
    snapshot = (latest_run(out) / "config.snapshot").read_text()
    assert "seed = 99" in snapshot


def test_defaults_without_config_green(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["--output", "out", "green"]) == 0
    capsys.readouterr()
    assert (tmp_path / "out").exists()


def test_config_errors_exit_one(tmp_path, capsys):
    out = str(tmp_path / "out")
    assert main(["--config", str(tmp_path / "nope.cfg"), "--output", out, "green"]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("[problem]\nradius = -2\n")
    assert main(["--config", str(bad), "--output", out, "green"]) == 1
    err = capsys.readouterr().err
    assert "bad.cfg:2:" in err
    bad.write_text("[problem]\nradiu = 2\n")
    assert main(["--config", str(bad), "--output", out, "green"]) == 1
    # sweep command without sweep section configured
    ok = tmp_path / "ok.cfg"
    ok.write_text("[problem]\nradius = 2\n")
    assert main(["--config", str(ok), "--output", out, "sweep"]) == 1


def test_usage_errors_exit_one(capsys):
    assert main([]) == 1
    assert main(["--config"]) == 1
    assert main(["frobnicate"]) == 1
    capsys.readouterr()


def test_bad_threads_exit_one(tmp_path, capsys):
    ok = tmp_path / "ok.cfg"
    ok.write_text("[problem]\nradius = 2\n")
    assert main(["--config", str(ok), "--threads", "0", "green"]) == 1
    capsys.readouterr()


def test_quadrature_failure_exit_two(tmp_path, capsys):
    cfg = tmp_path / "tight.cfg"
    cfg.write_text(
        "[problem]\nradius = 2\n\n[kernel]\nmethod = torus_quadrature\ntolerance = 1e-14\n"
    )
    out = str(tmp_path / "out")
    assert main(["--config", str(cfg), "--output", out, "green"]) == 2
    err = capsys.readouterr().err
    assert "quadrature failure" in err
