"""End-to-end checks of the command line and the config/sidecar layer."""

import csv
import subprocess
import sys
import time

import numpy as np
import pytest

from asephydro import __version__
from asephydro.cli import main
from asephydro.io import read_config, sidecar_path, write_sidecar
from asephydro.lattice import profile_from_name
from asephydro.pde import (DensityField, PDEParams, read_density_csv,
                           solve_burgers)


def read_rows(path):
    with open(path) as fh:
        return [line.rstrip("\n").split(",") for line in fh]


# ---------------------------------------------------------------------------
# config files and sidecars
# ---------------------------------------------------------------------------

def test_read_config_parses_comments_blanks_duplicates(tmp_path):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("# header\n\nN = 64\nseed=1\nseed = 2\n  t=0.5  \n")
    assert read_config(cfg) == {"N": "64", "seed": "2", "t": "0.5"}


def test_read_config_rejects_bare_word(tmp_path):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("N=64\njust a word\n")
    with pytest.raises(ValueError, match="line 2|:2:"):
        read_config(cfg)


def test_sidecar_sorted_and_version_stamped(tmp_path):
    out = tmp_path / "x.csv"
    write_sidecar(out, {"zeta": "1", "alpha": "2"})
    lines = (tmp_path / "x.csv.meta").read_text().splitlines()
    assert lines == ["alpha=2", f"version={__version__}", "zeta=1"]
    assert sidecar_path(out) == str(out) + ".meta"


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def test_simulate_reference_invocation(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = main(["simulate", "--model", "binary", "--N", "1024",
               "--lambda", "1", "--mu", "1", "--rho0", "const:0.5",
               "--t", "0.1", "--seed", "7"])
    assert rc == 0
    rows = read_rows("trajectory.csv")
    assert len(rows) == 6          # t=0 plus five equal steps
    times = [float(r[0]) for r in rows]
    assert times[0] == 0.0 and times[-1] == 0.1
    assert all(b > a for a, b in zip(times, times[1:]))
    counts = [np.bincount([int(v) for v in r[1:]], minlength=2)
              for r in rows]
    assert all(len(r) == 1025 for r in rows)
    assert all(np.array_equal(c, counts[0]) for c in counts)
    meta = read_config("trajectory.csv.meta")
    assert meta["version"] == __version__
    assert meta["seed"] == "7"
    assert meta["lambda"] == "1.0" and meta["mu"] == "1.0"


def test_simulate_rerun_is_byte_identical(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    args = ["simulate", "--N", "256", "--mu", "1.5", "--t", "0.1",
            "--seed", "42"]
    assert main(args + ["--out", "a.csv"]) == 0
    assert main(args + ["--out", "b.csv"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv.meta").read_bytes() == \
        (tmp_path / "b.csv.meta").read_bytes()


def test_simulate_abc_preset_conserves_each_species(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = main(["simulate", "--model", "abc-preset", "--N", "12",
               "--rates", "1,2,1,2,1,2", "--t", "0.2", "--seed", "3"])
    assert rc == 0
    rows = read_rows("trajectory.csv")
    counts = [np.bincount([int(v) for v in r[1:]], minlength=3)
              for r in rows]
    assert all(np.array_equal(c, counts[0]) for c in counts)
    assert counts[0].sum() == 12


def test_simulate_frozen_start_exits_3(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    rc = main(["simulate", "--N", "64", "--rho0", "const:1", "--t", "0.1"])
    assert rc == 3
    assert "frozen" in capsys.readouterr().err


def test_simulate_missing_size_names_key(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["simulate", "--t", "0.1"]) == 2
    assert "'N'" in capsys.readouterr().err


def test_config_file_overrides_flags(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "sim.cfg").write_text("N=32\nseed=9\n")
    rc = main(["simulate", "--N", "64", "--t", "0.05", "--seed", "1",
               "--config", "sim.cfg"])
    assert rc == 0
    rows = read_rows("trajectory.csv")
    assert len(rows[0]) == 33
    assert read_config("trajectory.csv.meta")["seed"] == "9"


def test_unknown_config_key_exits_2(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "sim.cfg").write_text("bogus=3\n")
    assert main(["simulate", "--N", "16", "--t", "0.1",
                 "--config", "sim.cfg"]) == 2
    assert "unknown config key 'bogus'" in capsys.readouterr().err


def test_outdir_environment_variable(tmp_path, monkeypatch):
    inbox = tmp_path / "inbox"
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("ASEPHYDRO_OUTDIR", str(inbox))
    assert main(["simulate", "--N", "16", "--t", "0.01"]) == 0
    assert (inbox / "trajectory.csv").exists()
    assert (inbox / "trajectory.csv.meta").exists()
    assert not (tmp_path / "trajectory.csv").exists()


def test_no_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def test_solve_matches_direct_solver_call(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = main(["solve", "--M", "64", "--lambda", "1", "--mu", "2",
               "--rho0", "sin:0.25,1,0.5", "--t", "0.02"])
    assert rc == 0
    got = read_density_csv("density.csv")[0]

    profile = profile_from_name("sin:0.25,1,0.5")
    rho0 = DensityField.binary_profile(profile.density_fns[1], 64)
    want = solve_burgers(rho0, PDEParams(m=64, lam=1.0, mu=2.0), 0.02,
                         [0.02])[0]
    assert got.t == want.t
    assert np.array_equal(got.values, want.values)


def test_solve_cfl_violation_reports_admissible_dt(tmp_path, monkeypatch,
                                                   capsys):
    monkeypatch.chdir(tmp_path)
    rc = main(["solve", "--M", "128", "--t", "0.05", "--dt", "0.1"])
    assert rc == 2
    err = capsys.readouterr().err
    assert "maximal admissible dt is" in err
    assert not (tmp_path / "density.csv").exists()


def test_solve_nspecies_records_sign_convention(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = main(["solve", "--model", "nspecies", "--M", "32", "--diff", "1",
               "--alpha", "0,1;-1,0", "--t", "0.01"])
    assert rc == 0
    meta = read_config("density.csv.meta")
    assert "alpha[1][0]=mu/lam" in meta["alpha_convention"]
    field = read_density_csv("density.csv", n_rows=2)[0]
    assert field.values.shape == (2, 32)
    np.testing.assert_allclose(field.values.sum(axis=0), 1.0, atol=1e-12)


# ---------------------------------------------------------------------------
# converge
# ---------------------------------------------------------------------------

PILOT_PLAN = ("n_list=64,128\nensemble=10\ntimes=0.05,0.1\nm=16\n"
              "seed=11\nprofile=sin:0.25,1,0.5\nlam=1.0\nmu=1.0\n")


def test_converge_pilot_plan_is_quick(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "plan.cfg").write_text(PILOT_PLAN)
    t0 = time.monotonic()
    rc = main(["converge", "--config", "plan.cfg"])
    elapsed = time.monotonic() - t0
    assert rc == 0
    assert elapsed < 60.0
    out = capsys.readouterr().out
    assert "slope" in out and "monotone L1 decrease" in out
    rows = read_rows("convergence.csv")
    assert rows[0] == ["N", "t", "l1", "l1_se", "l2",
                       "run_l1_mean", "run_l1_sd"]
    assert len(rows) == 1 + 2 * 2
    meta = read_config("convergence.csv.meta")
    assert meta["n_list"] == "64,128" and meta["version"] == __version__


def test_converge_requires_plan_file(capsys):
    assert main(["converge"]) == 2
    assert "config" in capsys.readouterr().err


def test_converge_missing_plan_key_named(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "plan.cfg").write_text(
        "n_list=64,128\ntimes=0.05\nm=16\nseed=1\nprofile=const:0.5\nlam=1\n")
    assert main(["converge", "--config", "plan.cfg"]) == 2
    assert "missing config key 'ensemble'" in capsys.readouterr().err


def test_converge_unknown_plan_key_rejected(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "plan.cfg").write_text(PILOT_PLAN + "extra=1\n")
    assert main(["converge", "--config", "plan.cfg"]) == 2
    assert "unknown config key 'extra'" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------

def test_diagnose_writes_per_size_table(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    rc = main(["diagnose", "--sizes", "32,64,128", "--runs", "40",
               "--t", "0.02", "--seed", "5"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "variance slope" in out
    rows = read_rows("diagnose.csv")
    assert rows[0] == ["N", "mean_u", "se_u", "var_u", "var_se",
                       "mean_r", "max_l"]
    assert [r[0] for r in rows[1:]] == ["32", "64", "128"]
    meta = read_config("diagnose.csv.meta")
    assert meta["phi-a"] == "sin:1" and meta["mu"] == "1.0"


def test_diagnose_constant_pair_is_degenerate(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    rc = main(["diagnose", "--sizes", "16,32,64", "--runs", "10",
               "--t", "0.01", "--phi-a", "const:0.3",
               "--phi-b", "const:0.3"])
    assert rc == 3
    assert "degenerate" in capsys.readouterr().err


def test_diagnose_too_few_sizes_exits_2(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["diagnose", "--sizes", "32,64", "--runs", "10"]) == 2
    assert "three sizes" in capsys.readouterr().err


def test_diagnose_optional_checks_print(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    rc = main(["diagnose", "--sizes", "32,64,128", "--runs", "20",
               "--t", "0.02", "--mu", "-1", "--oracle-runs", "500",
               "--drift-size", "64"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "oracle N=4" in out
    assert "drift shift" in out


# ---------------------------------------------------------------------------
# the installed entry point
# ---------------------------------------------------------------------------

def test_module_invocation_propagates_exit_code(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "asephydro.cli", "simulate", "--N", "16",
         "--rho0", "const:1", "--t", "0.01"],
        cwd=tmp_path, capture_output=True, text=True)
    assert proc.returncode == 3
    assert "frozen" in proc.stderr
