"""Three cyclic species relaxing from offset bands.

Builds an equidiffusive three-species table with a cyclic asymmetry,
runs a small ensemble on a 1024-site ring, and compares the
block-averaged profiles against the coupled solver started from the
same bands.  Also sanity-checks that the solver keeps the densities on
the simplex.
"""

import numpy as np

from asephydro.harness import ExperimentPlan, run_convergence
from asephydro.lattice import InitialProfile
from asephydro.pde import DensityField, PDEParams, solve_nspecies

ALPHA = 2.0 * (np.roll(np.eye(3), 1, axis=1) - np.roll(np.eye(3), -1,
                                                       axis=1))


def bands() -> InitialProfile:
    # offset cosines; the three phases cancel so the rows sum to one
    def band(k):
        return lambda x: (1.0 / 3.0 + 0.15 * np.cos(
            2 * np.pi * (np.asarray(x, dtype=float) - k / 3.0)))
    return InitialProfile((band(0), band(1), band(2)), "three-bands")


def main():
    profile = bands()

    x = np.arange(64) / 64.0
    rho0 = DensityField(profile.table(x))
    out = solve_nspecies(rho0, PDEParams(m=64, diff=1.0, alpha=ALPHA),
                         0.05, [0.05])
    worst = np.max(np.abs(out[0].values.sum(axis=0) - 1.0))
    print(f"solver simplex defect at t=0.05: {worst:.2e}")

    plan = ExperimentPlan(
        n_list=[1024], ensemble_size=20, profile=profile,
        compare_times=[0.05], m_grid=64, seed_base=31, diff=1.0,
        alpha=ALPHA)
    report = run_convergence(plan)
    print(f"ensemble of {plan.ensemble_size} at N=1024: "
          f"L1 distance {report.l1[0, 0]:.4f} "
          f"(per-run spread {report.run_l1_sd[0, 0]:.4f})")
    for line in report.flags:
        print(f"note: {line}")


if __name__ == "__main__":
    main()
