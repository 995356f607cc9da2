"""Ensemble runners on the uniformized chain.

Every bond ticks at the common rate Lambda = max table entry, so ticks
arrive as one Poisson stream of rate N * Lambda, each tick picks a bond
uniformly, and an exchange on pattern (k, l) is accepted with probability
rates[k][l] / Lambda.  Acceptance thresholds live in 32-bit fixed point;
the per-tick probability error is at most 2^-33, invisible at every
tolerance used downstream.

When every ordered pair exchanges at some positive floor rate s, a tick
is first offered an unconditional swap with probability s / Lambda and
only the remainder consults the occupancy.  That stirring branch never
reads site contents, which is what lets the permutation kernel run the
symmetric bulk of the dynamics at full speed; the residual acceptance
table absorbs the asymmetry exactly.

State words handed to the compiled kernels are kept as np.uint64 at
every call site; a plain Python int would compile a second, signed
overload with different arithmetic.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .lattice import InitialProfile, new_config
from .rates import RateTable
from .testfunctions import TestFunctionPair

_THR = 2.0 ** 32

# below this many sites the batched direct kernel beats the permutation
# path on Python call overhead alone
_PERM_MIN_SITES = 256


def _round_thr(p: np.ndarray) -> np.ndarray:
    return np.round(np.clip(p, 0.0, 1.0) * _THR).astype(np.uint64)


@dataclass
class TickTables:
    """32-bit acceptance thresholds for one rate table."""

    lam_tick: float          # per-bond tick rate Lambda
    acc_thr: np.ndarray      # (n, n) uint64, full acceptance test
    stir_thr: np.uint64      # stirring branch threshold
    rem_thr: np.ndarray      # (n, n) uint64, residual acceptance
    splittable: bool         # every ordered pair has positive rate

    @property
    def n_species(self) -> int:
        return self.acc_thr.shape[0]


def tick_tables(table: RateTable) -> TickTables:
    rates = table.rates
    lam_tick = float(rates.max())
    if lam_tick <= 0.0:
        raise ValueError("all rates vanish; nothing can ever move")
    n = rates.shape[0]
    off = ~np.eye(n, dtype=bool)
    acc = _round_thr(rates / lam_tick)
    acc[np.eye(n, dtype=bool)] = 0

    floor = float(rates[off].min())
    splittable = floor > 0.0
    stir = np.uint64(0)
    rem = np.zeros_like(acc)
    if splittable:
        stir = np.uint64(round(floor / lam_tick * _THR))
        p_stir = float(stir) / _THR
        if p_stir >= 1.0:
            stir = _k.THR_ONE      # pure stirring, remainder never reached
        else:
            # residual acceptance is computed against the *quantized*
            # stirring weight so the two branches sum back to rate/Lambda
            rem = _round_thr((rates / lam_tick - p_stir) / (1.0 - p_stir))
            rem[np.eye(n, dtype=bool)] = 0
    return TickTables(lam_tick, acc, stir, rem, splittable)


def _is_pow2(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


def _run_keys(seed: int, n_sites: int, n_runs: int) -> np.ndarray:
    base = np.uint64(_k.derive_key(np.uint64(seed & (2 ** 64 - 1)),
                                   np.uint64(n_sites)))
    keys = np.empty(n_runs, dtype=np.uint64)
    for r in range(n_runs):
        keys[r] = _k.derive_key(base, np.uint64(r))
    return keys


def _initial_block(profile, initial, n_sites, n_runs, n_species, master):
    if (profile is None) == (initial is None):
        raise ValueError("give exactly one of profile, initial")
    if initial is not None:
        occ0 = np.asarray(initial, dtype=np.int64)
        if occ0.shape != (n_sites,):
            raise ValueError(f"initial occupancy must have {n_sites} sites")
        return np.tile(occ0, (n_runs, 1))
    block = np.empty((n_runs, n_sites), dtype=np.int64)
    for r in range(n_runs):
        block[r] = new_config(profile, n_sites, master).occupancy
    return block


def evolve_ensemble(table: RateTable, n_sites: int, n_runs: int,
                    snap_times, seed: int, profile: InitialProfile = None,
                    initial=None, force_direct: bool = False) -> np.ndarray:
    """Independent runs from t = 0; occupancies at the requested times.

    Returns an (n_runs, len(snap_times), n_sites) int64 array.  Initial
    conditions come from `profile` (sampled per run) or a fixed `initial`
    occupancy shared by all runs.  Identical arguments give identical
    output bit for bit.
    """
    snap_times = np.asarray(snap_times, dtype=float)
    if snap_times.ndim != 1 or snap_times.size == 0:
        raise ValueError("snap_times must be a non-empty 1-D sequence")
    if np.any(np.diff(snap_times) < 0) or snap_times[0] < 0:
        raise ValueError("snap_times must be sorted and non-negative")
    tables = tick_tables(table)
    master = np.random.default_rng([seed & (2 ** 63 - 1), n_sites])
    occ_runs = _initial_block(profile, initial, n_sites, n_runs,
                              table.n_species, master)
    keys = _run_keys(seed, n_sites, n_runs)
    spans = np.diff(np.concatenate(([0.0], snap_times)))
    mean_ticks = n_sites * tables.lam_tick * spans

    use_perm = (tables.splittable and _is_pow2(n_sites)
                and n_sites >= _PERM_MIN_SITES and not force_direct)
    out = np.empty((n_runs, snap_times.size, n_sites), dtype=np.int64)
    if use_perm:
        perm = np.empty(n_sites, dtype=np.int64)
        scratch = np.empty(n_sites, dtype=np.int64)
        for r in range(n_runs):
            occ = occ_runs[r]
            for w, lam_w in enumerate(mean_ticks):
                perm[:] = np.arange(n_sites)
                ticks = int(master.poisson(lam_w))
                state = np.uint64(_k.derive_key(keys[r], np.uint64(w)))
                _k.advance_perm_pow2(perm, occ, tables.stir_thr,
                                     tables.rem_thr, ticks, state)
                _k.compose_perm(perm, occ, scratch)
                occ[:] = scratch
                out[r, w] = occ
    else:
        for w, lam_w in enumerate(mean_ticks):
            counts = master.poisson(lam_w, size=n_runs).astype(np.int64)
            wkeys = np.empty(n_runs, dtype=np.uint64)
            for r in range(n_runs):
                wkeys[r] = _k.derive_key(keys[r], np.uint64(w))
            _k.advance_runs_window(occ_runs, tables.acc_thr, counts, wkeys)
            out[:, w] = occ_runs
    return out


@dataclass
class MartingaleEnsemble:
    """Per-run martingale summaries from the compiled tick loop.

    checkpoints[r, j] holds (Z, L, R, int L Z ds, int Z^2 R ds) at
    times[j] for run r; u_final is Z_T - Z_0 - int L Z ds.
    """

    times: np.ndarray          # checkpoint times, last one = t_final
    z0: np.ndarray             # (n_runs,)
    checkpoints: np.ndarray    # (n_runs, n_checkpoints, 5)
    u_final: np.ndarray        # (n_runs,)
    max_abs_l: np.ndarray      # (n_runs,) running max of |L|
    n_exec: np.ndarray         # (n_runs,) executed exchanges
    n_sites: int

    @property
    def n_runs(self) -> int:
        return self.z0.size

    def mean_u(self) -> float:
        return float(self.u_final.mean())

    def se_u(self) -> float:
        return float(self.u_final.std(ddof=1) / np.sqrt(self.n_runs))

    def var_u(self) -> float:
        return float(self.u_final.var(ddof=1))

    def mean_r(self) -> float:
        """R averaged over checkpoints, then over runs."""
        return float(self.checkpoints[:, :, 2].mean())


def martingale_ensemble(table: RateTable, pair: TestFunctionPair,
                        n_sites: int, n_runs: int, t_final: float,
                        seed: int, profile: InitialProfile = None,
                        initial=None, n_checkpoints: int = 8,
                        resync_every: int = 1 << 20) -> MartingaleEnsemble:
    """Run the exponential-functional diagnostics over an ensemble."""
    if table.n_species != 2:
        raise ValueError("martingale diagnostics are defined for two species")
    if t_final <= 0.0:
        raise ValueError("t_final must be positive")
    co = pair.bond_coefficients(n_sites, table)
    tables = tick_tables(table)
    tick_rate = n_sites * tables.lam_tick
    inv_tick = 1.0 / tick_rate
    snap_times = np.linspace(t_final / n_checkpoints, t_final, n_checkpoints)
    snap_times[-1] = t_final

    master = np.random.default_rng([seed & (2 ** 63 - 1), n_sites])
    occ_runs = _initial_block(profile, initial, n_sites, n_runs, 2, master)
    keys = _run_keys(seed, n_sites, n_runs)

    expect = tick_rate * t_final
    chunk = int(expect + 6.0 * np.sqrt(expect + 1.0) + 1024)

    # per-event multiplier for Z: row 1 covers a particle crossing bond b
    # rightward, row 0 the reverse move (hole rightward)
    zfac = np.empty((2, n_sites))
    zfac[1] = np.exp(co.dpsi)
    zfac[0] = np.exp(-co.dpsi)

    z0 = np.empty(n_runs)
    checkpoints = np.empty((n_runs, n_checkpoints, 5))
    max_abs = np.empty(n_runs)
    execs = np.empty(n_runs, dtype=np.int64)
    out = np.empty((n_checkpoints, 5))
    for r in range(n_runs):
        occ = occ_runs[r]
        z = np.exp(_k.logz_total(occ, co.psi_n, co.logz_const))
        tot_l, tot_r = _k.lr_totals(occ, co.lam_a, co.lam_b, co.r_a, co.r_b)
        z0[r] = z
        state = np.uint64(keys[r])
        t = 0.0
        snap_idx = 0
        i_lz = i_z2r = 0.0
        max_abs_l = abs(tot_l)
        n_exec = 0
        since = 0
        cursor = 0
        stream = master.standard_exponential(chunk)
        while True:
            (status, state, cursor, t, snap_idx, z, tot_l, tot_r,
             i_lz, i_z2r, max_abs_l, n_exec, since) = _k.run_martingale(
                occ, tables.acc_thr, inv_tick, co.lam_a, co.lam_b,
                co.r_a, co.r_b, zfac, co.psi_n,
                co.logz_const, t, np.uint64(state), stream, cursor,
                snap_times, out, snap_idx, z, tot_l, tot_r,
                i_lz, i_z2r, max_abs_l, n_exec, resync_every, since)
            if status != _k.BUFFER_FULL:
                break
            stream = master.standard_exponential(chunk)
            cursor = 0
        checkpoints[r] = out
        max_abs[r] = max_abs_l
        execs[r] = n_exec
    u_final = checkpoints[:, -1, 0] - z0 - checkpoints[:, -1, 3]
    return MartingaleEnsemble(snap_times, z0, checkpoints, u_final,
                              max_abs, execs, n_sites)
