"""Solver checks: exact stationary states, a heat-kernel mode, refinement
orders, conservation laws, the two-species reduction, and the weak form.

The fine reference for the drift runs is computed once per session
(M=4096 at its own admissible step) and shared across tests.
"""

import numpy as np
import pytest

from asephydro.pde import (
    DensityField,
    PDEParams,
    read_density_csv,
    solve_burgers,
    solve_nspecies,
    weak_residual,
    write_density_csv,
)
from asephydro.testfunctions import PeriodicFunction, SpaceTimeTestFunction


def grid(m):
    return np.arange(m) / m


def sin_profile(m, mean=0.5, amp=0.25):
    return DensityField(mean + amp * np.sin(2 * np.pi * grid(m)))


# ------------------------------------------------------------- DensityField

def test_field_normalizes_shape_and_exposes_rho():
    f = DensityField(np.full(8, 0.3))
    assert f.values.shape == (1, 8)
    assert f.rho.shape == (8,)
    assert f.m == 8


def test_field_rejects_out_of_band_values():
    with pytest.raises(ValueError):
        DensityField(np.array([0.5, 1.2, 0.5, 0.5]))
    with pytest.raises(ValueError):
        DensityField(np.array([-0.1, 0.5, 0.5, 0.5]))


def test_field_rejects_broken_simplex():
    rows = np.array([[0.5, 0.5], [0.6, 0.5]])
    with pytest.raises(ValueError):
        DensityField(rows)


def test_field_accepts_rounding_overshoot():
    f = DensityField(np.array([0.5, 1.0 + 5e-9, 0.0, 0.5]))
    assert f.clipped().max() <= 1.0


# ----------------------------------------------------------------- PDEParams

def test_params_require_exactly_one_model():
    with pytest.raises(ValueError):
        PDEParams(m=16)
    with pytest.raises(ValueError):
        PDEParams(m=16, lam=1.0, diff=1.0, alpha=np.zeros((2, 2)))


def test_params_reject_skewed_alpha():
    bad = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ValueError, match="antisymmetric"):
        PDEParams(m=16, diff=1.0, alpha=bad)


def test_cfl_rejection_names_the_limit():
    p9 = PDEParams(m=64, lam=1.0, mu=0.0, dt=1.0)
    with pytest.raises(ValueError, match="admissible"):
        solve_burgers(DensityField(np.full(64, 0.5)), p9, 0.1, [0.1])


def test_admissible_dt_tightens_with_drift():
    m = 64
    quiet = PDEParams(m=m, lam=1.0, mu=0.0)
    driven = PDEParams(m=m, lam=1.0, mu=500.0)
    r0 = np.full(m, 0.1)
    assert driven.admissible_dt(r0) < quiet.admissible_dt(r0)


# ------------------------------------------------------------ exact answers

def test_constant_profile_is_stationary():
    p = PDEParams(m=64, lam=1.0, mu=1.0)
    out = solve_burgers(DensityField(np.full(64, 0.37)), p, 0.05,
                        [0.01, 0.05])
    for f in out:
        assert np.max(np.abs(f.rho - 0.37)) < 1e-13


def test_heat_mode_decay():
    # mu = 0 turns the drift off; the cosine mode decays exactly
    m, lam, t = 256, 1.0, 0.05
    x = grid(m)
    rho0 = DensityField(0.5 + 0.25 * np.cos(2 * np.pi * x))
    out = solve_burgers(rho0, PDEParams(m=m, lam=lam, mu=0.0), t, [t])
    exact = 0.5 + 0.25 * np.exp(-4 * np.pi ** 2 * lam * t) * np.cos(
        2 * np.pi * x)
    assert np.max(np.abs(out[0].rho - exact)) < 1e-4


def test_diffusion_order_of_accuracy():
    lam, t = 1.0, 0.05
    errs = []
    for m in (64, 128, 256):
        x = grid(m)
        f0 = DensityField(0.5 + 0.25 * np.cos(2 * np.pi * x))
        out = solve_burgers(f0, PDEParams(m=m, lam=lam, mu=0.0), t, [t])
        exact = 0.5 + 0.25 * np.exp(-4 * np.pi ** 2 * lam * t) * np.cos(
            2 * np.pi * x)
        errs.append(np.max(np.abs(out[0].rho - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


@pytest.fixture(scope="session")
def fine_drift_reference():
    # one expensive run shared by the drift-accuracy tests
    out = solve_burgers(sin_profile(4096), PDEParams(m=4096, lam=1.0, mu=1.0),
                        0.1, [0.1])
    return out[0].rho


def test_drift_self_oracle(fine_drift_reference):
    out = solve_burgers(sin_profile(256), PDEParams(m=256, lam=1.0, mu=1.0),
                        0.1, [0.1])
    gap = np.max(np.abs(out[0].rho - fine_drift_reference[::4096 // 256]))
    assert gap < 1e-3


def test_drift_order_of_accuracy(fine_drift_reference):
    errs = []
    for m in (256, 512, 1024):
        out = solve_burgers(sin_profile(m), PDEParams(m=m, lam=1.0, mu=1.0),
                            0.1, [0.1])
        errs.append(np.max(np.abs(out[0].rho
                                  - fine_drift_reference[::4096 // m])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 0.9)


# ------------------------------------------------------------- conservation

def test_mass_conserved_per_unit_time():
    m = 128
    f0 = sin_profile(m)
    mass0 = f0.rho.mean()
    out = solve_burgers(f0, PDEParams(m=m, lam=1.0, mu=1.0), 1.0,
                        [0.25, 0.5, 1.0])
    for f in out:
        assert abs(f.rho.mean() - mass0) < 1e-12 * max(f.t, 1.0)


def test_maximum_principle():
    m = 128
    f0 = sin_profile(m, mean=0.5, amp=0.25)  # range [0.25, 0.75]
    out = solve_burgers(f0, PDEParams(m=m, lam=1.0, mu=2.0), 0.2,
                        np.linspace(0.02, 0.2, 10))
    for f in out:
        assert f.rho.min() >= 0.25 - 1e-8
        assert f.rho.max() <= 0.75 + 1e-8


def test_exact_landing_on_output_times():
    out = solve_burgers(sin_profile(64), PDEParams(m=64, lam=1.0, mu=0.0),
                        0.05, [0.013, 0.027, 0.05, 0.05])
    assert [f.t for f in out] == [0.013, 0.027, 0.05, 0.05]
    assert np.array_equal(out[2].values, out[3].values)


def test_output_times_validated():
    p = PDEParams(m=64, lam=1.0, mu=0.0)
    f0 = sin_profile(64)
    with pytest.raises(ValueError, match="sorted"):
        solve_burgers(f0, p, 0.1, [0.05, 0.01])
    with pytest.raises(ValueError, match="within"):
        solve_burgers(f0, p, 0.1, [0.2])


# ---------------------------------------------------------------- n species

def test_uniform_three_species_stationary():
    m = 48
    rows = np.full((3, m), 1.0 / 3.0)
    alpha = 2.0 * (np.roll(np.eye(3), 1, axis=1) - np.roll(np.eye(3), -1,
                                                           axis=1))
    p = PDEParams(m=m, diff=1.0, alpha=alpha)
    out = solve_nspecies(DensityField(rows), p, 0.05, [0.05])
    assert np.max(np.abs(out[0].values - 1.0 / 3.0)) < 1e-13


def test_two_species_reduces_to_burgers():
    # D = lam, alpha[1][0] = mu / D: species 1 must track the scalar
    # solver to the bit when both use the same explicit dt
    m, lam, mu = 128, 1.0, 1.0
    r0 = sin_profile(m, amp=0.2).rho
    dt = PDEParams(m=m, lam=lam, mu=mu).admissible_dt(r0) * 0.9
    scalar = solve_burgers(DensityField(r0),
                           PDEParams(m=m, lam=lam, mu=mu, dt=dt), 0.05,
                           [0.05])
    alpha = np.array([[0.0, -mu / lam], [mu / lam, 0.0]])
    pair = solve_nspecies(DensityField(np.vstack([1.0 - r0, r0])),
                          PDEParams(m=m, diff=lam, alpha=alpha, dt=dt),
                          0.05, [0.05])
    assert np.max(np.abs(pair[0].values[1] - scalar[0].rho)) < 1e-10
    assert np.max(np.abs(pair[0].values[0] + pair[0].values[1] - 1.0)) \
        < 1e-12


def test_cyclic_three_species_keeps_the_simplex():
    m = 96
    x = grid(m)
    rows = np.vstack([1 / 3 + 0.15 * np.cos(2 * np.pi * (x - k / 3))
                      for k in range(3)])
    rows /= rows.sum(axis=0)
    alpha = 2.0 * (np.roll(np.eye(3), 1, axis=1) - np.roll(np.eye(3), -1,
                                                           axis=1))
    p = PDEParams(m=m, diff=1.0, alpha=alpha)
    out = solve_nspecies(DensityField(rows), p, 0.1,
                         np.linspace(0.01, 0.1, 10))
    for f in out:
        assert np.max(np.abs(f.values.sum(axis=0) - 1.0)) < 1e-10
        assert f.values.min() >= -1e-8


def test_nspecies_validates_initial_rows():
    alpha = np.array([[0.0, -1.0], [1.0, 0.0]])
    p = PDEParams(m=8, diff=1.0, alpha=alpha)
    bad = DensityField(np.full((3, 8), 1.0 / 3.0))  # 3 rows vs 2x2 alpha
    with pytest.raises(ValueError):
        solve_nspecies(bad, p, 0.01, [0.01])


# ------------------------------------------------------------ weak residual

def stored_run(m, n_slices, t_end=0.1):
    times = np.linspace(0.0, t_end, n_slices)
    return solve_burgers(sin_profile(m), PDEParams(m=m, lam=1.0, mu=1.0),
                         t_end, times)


def test_weak_residual_zero_theta():
    traj = stored_run(64, 5)
    theta = SpaceTimeTestFunction(
        lambda x, t: np.zeros_like(x), lambda x, t: np.zeros_like(x),
        lambda x, t: np.zeros_like(x), lambda x, t: np.zeros_like(x), "0")
    assert weak_residual(traj, theta, 1.0, 1.0) == 0.0


def test_weak_residual_constant_density():
    # rho = c: every surviving term cancels by periodicity or exact
    # time quadrature of a linear-in-t integrand.  The bump's second
    # derivative has steep edge layers, so its x-quadrature only
    # reaches 1e-10 once the grid resolves them (m = 512 here).
    c = 0.3
    traj = [DensityField(np.full(512, c), t=t)
            for t in np.linspace(0.0, 0.1, 6)]
    for theta in (SpaceTimeTestFunction.sin_bump(1, 0.1),
                  SpaceTimeTestFunction.separable(
                      PeriodicFunction.bump(0.5, 0.6),
                      lambda t: t * (0.1 - t), lambda t: 0.1 - 2 * t)):
        assert abs(weak_residual(traj, theta, 1.0, 1.0)) < 1e-10


def test_weak_residual_of_solver_trajectory():
    theta = SpaceTimeTestFunction.sin_bump(1, 0.1)
    coarse = abs(weak_residual(stored_run(256, 41), theta, 1.0, 1.0))
    fine = abs(weak_residual(stored_run(1024, 161), theta, 1.0, 1.0))
    assert coarse < 1e-3
    assert fine * 4.0 <= coarse


def test_weak_residual_needs_two_slices():
    traj = stored_run(64, 5)[:1]
    theta = SpaceTimeTestFunction.sin_bump(1, 0.1)
    with pytest.raises(ValueError):
        weak_residual(traj, theta, 1.0, 1.0)


# ------------------------------------------------------------------ file IO

def test_density_csv_round_trip(tmp_path):
    traj = stored_run(32, 4, t_end=0.02)
    path = tmp_path / "rho.csv"
    write_density_csv(path, traj)
    back = read_density_csv(path)
    assert len(back) == len(traj)
    for a, b in zip(traj, back):
        assert a.t == b.t
        assert np.array_equal(a.values, b.values)


def test_density_csv_round_trip_multispecies(tmp_path):
    m = 24
    x = grid(m)
    rows = np.vstack([1 / 3 + 0.1 * np.cos(2 * np.pi * (x - k / 3))
                      for k in range(3)])
    rows /= rows.sum(axis=0)
    alpha = 2.0 * (np.roll(np.eye(3), 1, axis=1) - np.roll(np.eye(3), -1,
                                                           axis=1))
    traj = solve_nspecies(DensityField(rows),
                          PDEParams(m=m, diff=1.0, alpha=alpha), 0.01,
                          [0.005, 0.01])
    path = tmp_path / "rho3.csv"
    write_density_csv(path, traj)
    back = read_density_csv(path, n_rows=3)
    for a, b in zip(traj, back):
        assert a.t == b.t
        assert np.array_equal(a.values, b.values)
