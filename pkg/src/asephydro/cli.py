"""Command-line front end for the lattice/PDE toolkit.

Four subcommands cover the package surface:

    simulate   one stochastic lattice trajectory, snapshots to CSV
    solve      deterministic density evolution to CSV
    converge   lattice ensembles against the solver across sizes
    diagnose   exponential-functional scaling across sizes

Exit codes: 0 success, 2 configuration error (bad flags, bad config
file, inadmissible parameters), 3 degenerate run (frozen dynamics, no
usable fit), 4 unexpected internal failure.

Flags may be collected in a key=value file passed via --config; file
entries override flags.  The only environment variable consulted is
ASEPHYDRO_OUTDIR, which redirects relative output paths.  Every output
gets a .meta sidecar (parameters, seeds, package version), and a rerun
of the same command reproduces the output byte for byte.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .engine import build_rate_index
from .harness import (ExperimentPlan, drift_direction_check, run_convergence,
                      run_generator_oracle, run_martingale_scaling)
from .io import read_config, write_sidecar
from .lattice import exact_config, profile_from_name
from .pde import (DensityField, PDEParams, solve_burgers, solve_nspecies,
                  write_density_csv)
from .rates import RateTable
from .testfunctions import TestFunctionPair, function_from_name
from .uniformized import evolve_ensemble

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_INTERNAL = 4

# sidecar note pinning the sign convention shared by RateTable.equidiffusive
# and the n-species solver: alpha[1][0] = mu/lam reproduces the binary drift,
# and the flux of species k carries sum over l of alpha[l][k] rho_k rho_l.
_ALPHA_CONVENTION = ("alpha[1][0]=mu/lam; species-k flux uses "
                     "sum_l alpha[l][k] rho_k rho_l")


def _float_or_max(text):
    return text if text == "max" else float(text)


def _parse_times(text: str) -> list:
    times = [float(v) for v in text.split(",")]
    if not times or any(t < 0 for t in times):
        raise ValueError("times must be nonnegative")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("times must be strictly increasing")
    return times


def _parse_alpha(text: str) -> list:
    return [[float(v) for v in row.split(",")] for row in text.split(";")]


def _parse_sizes(text: str) -> list:
    return [int(v) for v in text.split(",")]


# config-file keys per subcommand: key -> (namespace dest, converter).
# Keys match the long flag names so a config line reads like the flag.
_CONFIG_KEYS = {
    "simulate": {
        "model": ("model", str),
        "N": ("n_sites", int),
        "lambda": ("lam", float),
        "mu": ("mu", float),
        "diff": ("diff", float),
        "alpha": ("alpha", str),
        "rates": ("rates", str),
        "rho0": ("rho0", str),
        "t": ("t", float),
        "times": ("times", str),
        "seed": ("seed", int),
        "out": ("out", str),
    },
    "solve": {
        "model": ("model", str),
        "M": ("m", int),
        "lambda": ("lam", float),
        "mu": ("mu", float),
        "diff": ("diff", float),
        "alpha": ("alpha", str),
        "rho0": ("rho0", str),
        "t": ("t", float),
        "times": ("times", str),
        "dt": ("dt", float),
        "out": ("out", str),
    },
    "diagnose": {
        "sizes": ("sizes", str),
        "runs": ("runs", int),
        "lambda": ("lam", float),
        "mu": ("mu", _float_or_max),
        "phi-a": ("phi_a", str),
        "phi-b": ("phi_b", str),
        "rho0": ("rho0", str),
        "t": ("t", float),
        "seed": ("seed", int),
        "oracle-runs": ("oracle_runs", int),
        "drift-size": ("drift_size", int),
        "out": ("out", str),
    },
}

# keys ExperimentPlan.from_mapping understands; anything else in a plan
# file is a typo we refuse to ignore.
_PLAN_KEYS = {"n_list", "ensemble", "times", "m", "seed", "profile",
              "lam", "mu", "diff", "alpha"}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asephydro",
        description="stochastic lattice gases and their hydrodynamic limits")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate",
                         help="run one lattice trajectory, snapshots to CSV")
    sim.add_argument("--model", choices=["binary", "nspecies", "abc-preset"],
                     default="binary")
    sim.add_argument("--N", dest="n_sites", type=int, default=None,
                     help="ring size")
    sim.add_argument("--lambda", dest="lam", type=float, default=1.0,
                     help="symmetric coefficient (binary model)")
    sim.add_argument("--mu", type=float, default=0.0,
                     help="drift coefficient (binary model)")
    sim.add_argument("--diff", type=float, default=None,
                     help="common diffusivity (nspecies model)")
    sim.add_argument("--alpha", type=str, default=None,
                     help="antisymmetric matrix, rows ';'-joined, "
                          "entries ','-joined (nspecies model)")
    sim.add_argument("--rates", type=str, default="1,1,1,1,1,1",
                     help="p+,p-,q+,q-,r+,r- (abc-preset model)")
    sim.add_argument("--rho0", type=str, default=None,
                     help="initial profile, e.g. const:0.5 or sin:0.25,1,0.5")
    sim.add_argument("--t", type=float, default=None, help="time horizon")
    sim.add_argument("--times", type=str, default=None,
                     help="snapshot times, comma separated "
                          "(default: five equal steps up to t)")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--config", type=str, default=None,
                     help="key=value file; entries override flags")
    sim.add_argument("--out", type=str, default="trajectory.csv")

    sol = sub.add_parser("solve",
                         help="integrate the density equation, output to CSV")
    sol.add_argument("--model", choices=["binary", "nspecies"],
                     default="binary")
    sol.add_argument("--M", dest="m", type=int, default=256, help="grid size")
    sol.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sol.add_argument("--mu", type=float, default=0.0)
    sol.add_argument("--diff", type=float, default=None)
    sol.add_argument("--alpha", type=str, default=None)
    sol.add_argument("--rho0", type=str, default=None,
                     help="initial profile (default const:0.5)")
    sol.add_argument("--t", type=float, default=None, help="end time")
    sol.add_argument("--times", type=str, default=None,
                     help="output times (default: the end time only)")
    sol.add_argument("--dt", type=float, default=None,
                     help="time step (default: largest admissible)")
    sol.add_argument("--config", type=str, default=None)
    sol.add_argument("--out", type=str, default="density.csv")

    con = sub.add_parser("converge",
                         help="lattice ensembles against the solver "
                              "across sizes")
    con.add_argument("--config", type=str, default=None, required=False,
                     help="plan file (required); see ExperimentPlan keys")
    con.add_argument("--out", type=str, default="convergence.csv")

    dia = sub.add_parser("diagnose",
                         help="exponential-functional scaling across sizes")
    dia.add_argument("--sizes", type=str, default="64,128,256",
                     help="ring sizes, comma separated, at least three")
    dia.add_argument("--runs", type=int, default=200)
    dia.add_argument("--lambda", dest="lam", type=float, default=1.0)
    dia.add_argument("--mu", type=_float_or_max, default=1.0,
                     help="drift, or 'max' for the totally asymmetric corner")
    dia.add_argument("--phi-a", dest="phi_a", type=str, default="sin:1",
                     help="first test function, e.g. sin:1 or bump:0.5,0.1")
    dia.add_argument("--phi-b", dest="phi_b", type=str, default="cos:1")
    dia.add_argument("--rho0", type=str, default="const:0.5")
    dia.add_argument("--t", type=float, default=0.05)
    dia.add_argument("--seed", type=int, default=0)
    dia.add_argument("--oracle-runs", dest="oracle_runs", type=int, default=0,
                     help="also sample a 4-site exact-law check "
                          "with this many runs")
    dia.add_argument("--drift-size", dest="drift_size", type=int, default=0,
                     help="also check the advection direction for the sign "
                          "of mu at this ring size (multiple of 32, "
                          "512 recommended)")
    dia.add_argument("--config", type=str, default=None)
    dia.add_argument("--out", type=str, default="diagnose.csv")

    return parser


def _apply_config(ns: argparse.Namespace) -> None:
    """Overlay --config entries onto parsed flags (file wins)."""
    if ns.command not in _CONFIG_KEYS or not getattr(ns, "config", None):
        return
    spec = _CONFIG_KEYS[ns.command]
    for key, raw in read_config(ns.config).items():
        if key not in spec:
            raise ValueError(f"unknown config key '{key}'")
        dest, convert = spec[key]
        setattr(ns, dest, convert(raw))


def _require(value, key: str):
    if value is None:
        raise ValueError(f"missing config key '{key}'")
    return value


def _resolve_out(name: str) -> str:
    outdir = os.environ.get("ASEPHYDRO_OUTDIR")
    if outdir and not os.path.isabs(name):
        os.makedirs(outdir, exist_ok=True)
        return os.path.join(outdir, name)
    return name


def _build_table(ns) -> tuple:
    """Rate table for a simulate run, plus the default profile string."""
    n = _require(ns.n_sites, "N")
    if ns.model == "binary":
        return RateTable.binary(ns.lam, ns.mu, n), "const:0.5"
    if ns.model == "abc-preset":
        rates = [float(v) for v in ns.rates.split(",")]
        if len(rates) != 6:
            raise ValueError("abc-preset needs six rates: p+,p-,q+,q-,r+,r-")
        third = repr(1.0 / 3.0)
        return RateTable.abc(*rates), f"const:{third},{third},{third}"
    alpha = np.array(_parse_alpha(_require(ns.alpha, "alpha")))
    table = RateTable.equidiffusive(_require(ns.diff, "diff"), alpha, n)
    share = repr(1.0 / alpha.shape[0])
    return table, "const:" + ",".join([share] * alpha.shape[0])


def _model_entries(ns) -> dict:
    if ns.model == "binary":
        return {"lambda": repr(float(ns.lam)), "mu": repr(float(ns.mu))}
    if ns.model == "abc-preset":
        return {"rates": ns.rates}
    return {"diff": repr(float(ns.diff)), "alpha": ns.alpha,
            "alpha_convention": _ALPHA_CONVENTION}


def _cmd_simulate(ns) -> int:
    table, default_profile = _build_table(ns)
    profile = profile_from_name(ns.rho0 or default_profile)
    if profile.n_species != table.n_species:
        raise ValueError(
            f"profile has {profile.n_species} species, model has "
            f"{table.n_species}")
    if ns.times is not None:
        times = _parse_times(ns.times)
    else:
        t = _require(ns.t, "t")
        if t <= 0:
            raise ValueError("t must be positive")
        times = [t * (i + 1) / 5 for i in range(5)]
    if times[0] > 0.0:
        times = [0.0] + times

    snaps = evolve_ensemble(table, ns.n_sites, 1, times, ns.seed,
                            profile=profile)
    start = build_rate_index(exact_config(snaps[0, 0], table.n_species),
                             table)
    if start.total_rate <= 0.0:
        print("degenerate: the initial configuration is frozen "
              "(every admissible exchange has rate zero)", file=sys.stderr)
        return EXIT_DEGENERATE

    out = _resolve_out(ns.out)
    with open(out, "w") as fh:
        for w, t in enumerate(times):
            body = ",".join(str(int(v)) for v in snaps[0, w])
            fh.write(f"{float(t)!r},{body}\n")
    entries = {"command": "simulate", "model": ns.model,
               "N": str(ns.n_sites), "rho0": profile.label,
               "times": ",".join(repr(float(t)) for t in times),
               "seed": str(ns.seed)}
    entries.update(_model_entries(ns))
    write_sidecar(out, entries)

    counts = np.bincount(snaps[0, -1], minlength=table.n_species)
    print(f"wrote {out} ({len(times)} snapshots, N={ns.n_sites}, "
          f"final counts {'/'.join(str(int(c)) for c in counts)})")
    return EXIT_OK


def _cmd_solve(ns) -> int:
    t = _require(ns.t, "t")
    if t <= 0:
        raise ValueError("t must be positive")
    times = _parse_times(ns.times) if ns.times is not None else [t]

    if ns.model == "binary":
        profile = profile_from_name(ns.rho0 or "const:0.5")
        if profile.n_species != 2:
            raise ValueError("binary solve needs a two-species profile")
        rho0 = DensityField.binary_profile(profile.density_fns[1], ns.m)
        params = PDEParams(m=ns.m, lam=ns.lam, mu=ns.mu, dt=ns.dt)
        solver = solve_burgers
    else:
        alpha = np.array(_parse_alpha(_require(ns.alpha, "alpha")))
        share = repr(1.0 / alpha.shape[0])
        default = "const:" + ",".join([share] * alpha.shape[0])
        profile = profile_from_name(ns.rho0 or default)
        if profile.n_species != alpha.shape[0]:
            raise ValueError(
                f"profile has {profile.n_species} species, alpha has "
                f"{alpha.shape[0]}")
        rho0 = DensityField.nspecies_profile(profile.density_fns, ns.m)
        params = PDEParams(m=ns.m, diff=_require(ns.diff, "diff"),
                           alpha=alpha, dt=ns.dt)
        solver = solve_nspecies

    # resolves before any file is touched; an inadmissible dt raises here
    # with the largest admissible value in the message
    dt_used = params.resolve_dt(rho0)
    fields = solver(rho0, params, t, times)

    out = _resolve_out(ns.out)
    write_density_csv(out, fields)
    entries = {"command": "solve", "model": ns.model, "M": str(ns.m),
               "rho0": profile.label, "t": repr(float(t)),
               "times": ",".join(repr(float(v)) for v in times),
               "dt": repr(float(dt_used))}
    entries.update(_model_entries(ns))
    write_sidecar(out, entries)

    print(f"wrote {out} ({len(fields)} slices, M={ns.m}, dt={dt_used:.3e})")
    return EXIT_OK


def _cmd_converge(ns) -> int:
    if not ns.config:
        raise ValueError("missing config key 'config' "
                         "(converge needs --config with a plan file)")
    mapping = read_config(ns.config)
    for key in mapping:
        if key not in _PLAN_KEYS:
            raise ValueError(f"unknown config key '{key}'")
    plan = ExperimentPlan.from_mapping(mapping)
    report = run_convergence(plan)

    out = _resolve_out(ns.out)
    report.to_csv(out)
    entries = dict(plan.to_mapping())
    entries["command"] = "converge"
    if plan.is_binary:
        entries["alpha_convention"] = _ALPHA_CONVENTION
    write_sidecar(out, entries)

    print(report.summary())
    print(f"wrote {out}")
    if report.slope is None:
        print("degenerate: no usable slope fit", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def _cmd_diagnose(ns) -> int:
    sizes = _parse_sizes(ns.sizes)
    pair = TestFunctionPair(function_from_name(ns.phi_a),
                            function_from_name(ns.phi_b))
    profile = profile_from_name(ns.rho0)
    scaling = run_martingale_scaling(sizes, ns.lam, ns.mu, pair, ns.runs,
                                     ns.t, ns.seed, profile)
    print(scaling.summary())

    out = _resolve_out(ns.out)
    with open(out, "w") as fh:
        fh.write("N,mean_u,se_u,var_u,var_se,mean_r,max_l\n")
        for i, n in enumerate(scaling.sizes):
            row = [scaling.mean_u[i], scaling.se_u[i], scaling.var_u[i],
                   scaling.var_se[i], scaling.mean_r[i], scaling.max_l[i]]
            fh.write(f"{n}," + ",".join(repr(float(v)) for v in row) + "\n")
    entries = {"command": "diagnose",
               "sizes": ",".join(str(n) for n in sizes),
               "runs": str(ns.runs), "lambda": repr(float(ns.lam)),
               "mu": ns.mu if ns.mu == "max" else repr(float(ns.mu)),
               "phi-a": ns.phi_a, "phi-b": ns.phi_b, "rho0": profile.label,
               "t": repr(float(ns.t)), "seed": str(ns.seed)}
    write_sidecar(out, entries)
    print(f"wrote {out}")

    if ns.oracle_runs > 0:
        mu4 = 2.0 * ns.lam * 4 if ns.mu == "max" else ns.mu
        oracle = run_generator_oracle(RateTable.binary(ns.lam, mu4, 4),
                                      [1, 0, 1, 0], t=0.5,
                                      n_runs=ns.oracle_runs, seed=ns.seed)
        print(oracle.summary())
    if ns.drift_size > 0:
        if ns.mu == "max":
            sign = 1.0
        elif ns.mu != 0:
            sign = 1.0 if ns.mu > 0 else -1.0
        else:
            raise ValueError("drift check needs a nonzero mu")
        if ns.drift_size % 32:
            raise ValueError("drift size must be a multiple of 32")
        # strength pinned at 4*lam so the advected feature clears the
        # sampling noise; only the sign is taken from --mu
        drift = drift_direction_check(ns.lam, sign * 4.0 * ns.lam,
                                      ns.drift_size, 40, 0.03 / ns.lam, 32,
                                      ns.seed,
                                      profile_from_name("sin:0.15,1,0.25"))
        print(drift.summary())

    if scaling.degenerate:
        print("degenerate: all variances vanish; no scaling fit",
              file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


_DISPATCH = {"simulate": _cmd_simulate, "solve": _cmd_solve,
             "converge": _cmd_converge, "diagnose": _cmd_diagnose}


def main(argv=None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    try:
        _apply_config(ns)
        return _DISPATCH[ns.command](ns)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:            # noqa: BLE001 - last-resort boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
