"""Compiled inner loops for the jump-chain samplers.

Everything here operates on preallocated numpy arrays and scalars so numba
compiles it once and the Python layer stays out of the per-event path.

The exchange dynamics is simulated by uniformization: every bond carries a
Poisson clock of constant rate Lambda >= max pair rate, and a clock tick at
bond i applies the exchange with probability rate[occ[i], occ[i+1]] / Lambda.
The jump law is exactly that of the continuous-time chain, and tick counts
over disjoint time windows are independent Poisson variables, so a window of
length dt is advanced by drawing one Poisson count and applying that many
ticks without touching per-event times.

For tables of the form rate[k][l] = s + extra[k][l] with s > 0 the tick is
split further: with probability s / Lambda the exchange is applied
unconditionally ("stirring", content blind), otherwise the small
pattern-dependent remainder is tested.  The stirring path never reads the
occupancy: it swaps entries of a site permutation, which is composed with
the epoch occupancy only when a pattern test or a snapshot needs contents.
That keeps the dominant symmetric part of a weakly asymmetric table at a
few ns per tick, which is what makes desk-scale hydrodynamic ensembles
feasible on one core.

Randomness is a counter-based splitmix64 stream: the loop state is one
uint64 advanced by the golden-ratio increment, so a (key, state) pair pins
the whole path and independent substreams are made by remixing the key.
Acceptance tests compare the top 32 bits of a draw against a threshold
round(p * 2**32); the bond index uses the low bits, so the two decisions
never share bits for N <= 2**26.
"""

import numpy as np
from numba import njit, int64

U64_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_U64_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_U64_MIX2 = np.uint64(0x94D049BB133111EB)

# probability -> 32-bit threshold; 2**32 means "always accept"
THR_SCALE = 2.0 ** 32
THR_ONE = np.uint64(1) << np.uint64(32)

_SHIFT32 = np.uint64(32)


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _U64_MIX1
    z = (z ^ (z >> np.uint64(27))) * _U64_MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def derive_key(key, index):
    # independent substream: remix the key with an index, twice to decouple
    k = np.uint64(key)
    i = np.uint64(index)
    return _mix64(_mix64(k + U64_GOLDEN * (i + np.uint64(1))) ^ k)


@njit(cache=True)
def uniform01(state):
    # top 53 bits of the next draw as a double in [0, 1); the uint64 cast
    # guards against a signed dispatch from the interpreter
    st = np.uint64(state) + U64_GOLDEN
    r = _mix64(st)
    return st, np.float64(r >> np.uint64(11)) * (1.0 / 9007199254740992.0)


# ---------------------------------------------------------------------------
# window advance, permutation representation (hot path, N a power of two)
# ---------------------------------------------------------------------------

@njit(cache=True, boundscheck=False)
def advance_perm_pow2(perm, occ_epoch, stir_thr, acc_thr, ticks, state):
    """Apply `ticks` uniformized clock ticks to the site permutation.

    perm[site] is the epoch site whose content currently sits at `site`, so
    contents resolve as occ_epoch[perm[site]].  stir_thr is the 32-bit
    threshold for the content-blind stirring branch; acc_thr is the n x n
    threshold table for the pattern-dependent remainder (diagonal zero).
    Returns the advanced rng state.
    """
    n_sites = perm.shape[0]
    mask = np.uint64(n_sites - 1)
    last = n_sites - 1
    st = np.uint64(state)
    k = ticks
    while k > 0:
        k -= 1
        st += U64_GOLDEN
        r = _mix64(st)
        b = int64(r & mask)
        b1 = b + 1
        if b == last:
            b1 = 0
        if (r >> _SHIFT32) < stir_thr:
            t = perm[b]
            perm[b] = perm[b1]
            perm[b1] = t
        else:
            pa = perm[b]
            pb = perm[b1]
            st += U64_GOLDEN
            r2 = _mix64(st)
            if (r2 >> _SHIFT32) < acc_thr[occ_epoch[pa], occ_epoch[pb]]:
                perm[b] = pb
                perm[b1] = pa
    return st


@njit(cache=True)
def compose_perm(perm, occ_epoch, occ_out):
    # materialize contents and reset the permutation for the next epoch
    for i in range(perm.shape[0]):
        occ_out[i] = occ_epoch[perm[i]]
    for i in range(perm.shape[0]):
        perm[i] = i


# ---------------------------------------------------------------------------
# window advance, direct occupancy (any N, counts real exchanges)
# ---------------------------------------------------------------------------

@njit(cache=True, boundscheck=False)
def advance_window_direct(occ, acc_thr, ticks, state):
    """Plain thinned ticks on the occupancy array; exact for every N.

    Bond indices are drawn by mask rejection (a draw whose low bits land
    outside [0, N) is discarded without consuming a tick), so the bond
    choice is exactly uniform.  Returns (state, executed) where executed
    counts ticks that changed the configuration.
    """
    n_sites = occ.shape[0]
    mask = np.uint64(1)
    while mask < np.uint64(n_sites - 1):
        mask = (mask << np.uint64(1)) | np.uint64(1)
    st = np.uint64(state)
    executed = 0
    k = ticks
    while k > 0:
        st += U64_GOLDEN
        r = _mix64(st)
        b = int64(r & mask)
        if b >= n_sites:
            continue  # rejected index draw, not a tick
        k -= 1
        b1 = b + 1
        if b1 == n_sites:
            b1 = 0
        ca = occ[b]
        cb = occ[b1]
        if ca == cb:
            continue
        if (r >> _SHIFT32) < acc_thr[ca, cb]:
            occ[b] = cb
            occ[b1] = ca
            executed += 1
    return st, executed


@njit(cache=True)
def advance_runs_window(occ_runs, acc_thr, tick_counts, keys):
    """Advance many independent configurations by one window each, in place."""
    total_exec = 0
    for r in range(occ_runs.shape[0]):
        _, ex = advance_window_direct(occ_runs[r], acc_thr, tick_counts[r],
                                      keys[r])
        total_exec += ex
    return total_exec


# ---------------------------------------------------------------------------
# fenwick tree primitives (weighted bond index for the reference engine)
# ---------------------------------------------------------------------------

@njit(cache=True)
def fenwick_build(leaf, tree):
    # tree is 1-indexed with tree[0] unused
    n = leaf.shape[0]
    for i in range(n + 1):
        tree[i] = 0.0
    for i in range(1, n + 1):
        tree[i] += leaf[i - 1]
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]


@njit(cache=True)
def fenwick_add(tree, i, delta):
    n = tree.shape[0] - 1
    j = i + 1
    while j <= n:
        tree[j] += delta
        j += j & (-j)


@njit(cache=True)
def fenwick_prefix(tree, i):
    # sum of leaves [0, i)
    s = 0.0
    j = i
    while j > 0:
        s += tree[j]
        j -= j & (-j)
    return s


@njit(cache=True)
def fenwick_find(tree, r):
    # smallest 0-based index whose cumulative weight exceeds r
    n = tree.shape[0] - 1
    top = 1
    while (top << 1) <= n:
        top <<= 1
    i = 0
    step = top
    while step > 0:
        ni = i + step
        if ni <= n and tree[ni] <= r:
            r -= tree[ni]
            i = ni
        step >>= 1
    return i


# ---------------------------------------------------------------------------
# reference event loop: weighted bond index, exponential holding times
# ---------------------------------------------------------------------------

# status codes shared by the long-running kernels
DONE = 0
FROZEN = 1
BUFFER_FULL = 2

_TOTAL_FLOOR = 1e-300


@njit(cache=True)
def _refresh_weights(occ, rates, leaf, tree):
    n_sites = occ.shape[0]
    for j in range(n_sites):
        j1 = j + 1
        if j1 == n_sites:
            j1 = 0
        leaf[j] = rates[occ[j], occ[j1]]
    fenwick_build(leaf, tree)
    total = 0.0
    for j in range(n_sites):
        total += leaf[j]
    return total


@njit(cache=True, boundscheck=False)
def run_fenwick(occ, leaf, tree, rates, t, t_end, total, state,
                snap_times, snap_out, snap_idx,
                ev_times, ev_bonds, record_events, n_events, rebuild_every,
                events_since_rebuild):
    """Exact event loop: holding time ~ Exp(total), bond ~ weight / total.

    Snapshot j receives the configuration whose holding interval covers
    snap_times[j] (an exact hit gets the post-jump state).  Returns
    (status, t, total, state, snap_idx, n_events, ev_count,
    events_since_rebuild) where ev_count is how many rows of ev_times /
    ev_bonds were filled on this call.
    """
    n_sites = occ.shape[0]
    n_snaps = snap_times.shape[0]
    ev_cap = ev_times.shape[0]
    ev_count = 0
    st = np.uint64(state)
    while True:
        while snap_idx < n_snaps and snap_times[snap_idx] <= t:
            for i in range(n_sites):
                snap_out[snap_idx, i] = occ[i]
            snap_idx += 1
        if snap_idx >= n_snaps and t >= t_end:
            return DONE, t, total, st, snap_idx, n_events, ev_count, \
                events_since_rebuild
        if total <= _TOTAL_FLOOR:
            while snap_idx < n_snaps:
                for i in range(n_sites):
                    snap_out[snap_idx, i] = occ[i]
                snap_idx += 1
            return FROZEN, t, total, st, snap_idx, n_events, ev_count, \
                events_since_rebuild
        if record_events and ev_count >= ev_cap:
            return BUFFER_FULL, t, total, st, snap_idx, n_events, ev_count, \
                events_since_rebuild
        st, u = uniform01(st)
        dt = -np.log1p(-u) / total
        t_next = t + dt
        while snap_idx < n_snaps and snap_times[snap_idx] < t_next:
            for i in range(n_sites):
                snap_out[snap_idx, i] = occ[i]
            snap_idx += 1
        if t_next > t_end:
            # the jump past t_end is discarded; memorylessness makes the
            # truncated path exact
            t = t_end
            continue
        st, u2 = uniform01(st)
        b = fenwick_find(tree, u2 * total)
        if b >= n_sites or leaf[b] <= 0.0:
            # float drift put the draw past the last positive leaf; resync
            total = _refresh_weights(occ, rates, leaf, tree)
            events_since_rebuild = 0
            continue
        b1 = b + 1
        if b1 == n_sites:
            b1 = 0
        ca = occ[b]
        cb = occ[b1]
        occ[b] = cb
        occ[b1] = ca
        t = t_next
        n_events += 1
        events_since_rebuild += 1
        if record_events:
            ev_times[ev_count] = t
            ev_bonds[ev_count] = b
            ev_count += 1
        if events_since_rebuild >= rebuild_every:
            total = _refresh_weights(occ, rates, leaf, tree)
            events_since_rebuild = 0
        else:
            bm1 = b - 1
            if bm1 < 0:
                bm1 = n_sites - 1
            for j in (bm1, b, b1):
                j1 = j + 1
                if j1 == n_sites:
                    j1 = 0
                w = rates[occ[j], occ[j1]]
                delta = w - leaf[j]
                if delta != 0.0:
                    leaf[j] = w
                    fenwick_add(tree, j, delta)
                    total += delta


# ---------------------------------------------------------------------------
# timed loop with incremental observable tracking (two species)
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _bond_lr_at(a, b, j, lam_a, lam_b, r_a, r_b):
    # branchless pattern weights: a*(1-b) flags (1,0), (1-a)*b flags (0,1);
    # data-dependent branches here would mispredict half the time
    ab = a * (1 - b)
    ba = (1 - a) * b
    return (lam_a[j] * ab + lam_b[j] * ba,
            r_a[j] * ab + r_b[j] * ba)


@njit(cache=True)
def lr_totals(occ, lam_a, lam_b, r_a, r_b):
    n_sites = occ.shape[0]
    tot_l = 0.0
    tot_r = 0.0
    for j in range(n_sites):
        j1 = j + 1
        if j1 == n_sites:
            j1 = 0
        l, r = _bond_lr_at(occ[j], occ[j1], j, lam_a, lam_b, r_a, r_b)
        tot_l += l
        tot_r += r
    return tot_l, tot_r


@njit(cache=True)
def logz_total(occ, psi_n, logz_const):
    s = logz_const
    for i in range(occ.shape[0]):
        if occ[i] == 1:
            s += psi_n[i]
    return s


@njit(cache=True, boundscheck=False)
def run_martingale(occ, acc_thr, inv_tick_rate, lam_a, lam_b, r_a, r_b,
                   zfac, psi_n, logz_const, t, state, exp_stream, cursor,
                   snap_times, out, snap_idx, z, tot_l, tot_r,
                   i_lz, i_z2r, max_abs_l, n_exec, resync_every,
                   since_resync):
    """Thinned ticks with exponential gaps, tracking Z, L, R and integrals.

    out[j] receives (Z, L, R, int L Z ds, int Z^2 R ds) evaluated exactly at
    snap_times[j]; integrals are cut at the snapshot inside the covering
    holding interval.  Z advances multiplicatively through zfac[c, b], the
    e^{+-dpsi} factor for content c crossing bond b; Z, L and R are resynced
    from the configuration every `resync_every` executed exchanges to stop
    float drift.  The acceptance table must carry a zero diagonal so ticks
    on equal contents reject in the same compare.  Runs until all snapshots
    are recorded or exp_stream is consumed (status BUFFER_FULL; re-enter
    after refilling).
    """
    n_sites = occ.shape[0]
    mask = np.uint64(1)
    while mask < np.uint64(n_sites - 1):
        mask = (mask << np.uint64(1)) | np.uint64(1)
    n_snaps = snap_times.shape[0]
    stream_len = exp_stream.shape[0]
    st = np.uint64(state)
    last = n_sites - 1
    while True:
        if snap_idx >= n_snaps:
            return (DONE, st, cursor, t, snap_idx, z, tot_l, tot_r,
                    i_lz, i_z2r, max_abs_l, n_exec, since_resync)
        if cursor >= stream_len:
            return (BUFFER_FULL, st, cursor, t, snap_idx, z, tot_l, tot_r,
                    i_lz, i_z2r, max_abs_l, n_exec, since_resync)
        dt = exp_stream[cursor] * inv_tick_rate
        cursor += 1
        t_next = t + dt
        while snap_idx < n_snaps and snap_times[snap_idx] <= t_next:
            ts = snap_times[snap_idx]
            out[snap_idx, 0] = z
            out[snap_idx, 1] = tot_l
            out[snap_idx, 2] = tot_r
            out[snap_idx, 3] = i_lz + tot_l * z * (ts - t)
            out[snap_idx, 4] = i_z2r + z * z * tot_r * (ts - t)
            snap_idx += 1
        if snap_idx >= n_snaps:
            return (DONE, st, cursor, t, snap_idx, z, tot_l, tot_r,
                    i_lz, i_z2r, max_abs_l, n_exec, since_resync)
        i_lz += tot_l * z * dt
        i_z2r += z * z * tot_r * dt
        t = t_next
        while True:
            st += U64_GOLDEN
            r = _mix64(st)
            b = int64(r & mask)
            if b < n_sites:
                break
        b1 = b + 1
        if b1 == n_sites:
            b1 = 0
        ca = occ[b]
        cb = occ[b1]
        # zero diagonal rejects equal contents in the same compare
        if (r >> _SHIFT32) >= acc_thr[ca, cb]:
            continue
        if n_sites > 4:
            bm1 = b - 1
            if bm1 < 0:
                bm1 = last
            b2 = b1 + 1
            if b2 == n_sites:
                b2 = 0
            cl = occ[bm1]
            cr = occ[b2]
            l0, r0 = _bond_lr_at(cl, ca, bm1, lam_a, lam_b, r_a, r_b)
            l1, r1 = _bond_lr_at(ca, cb, b, lam_a, lam_b, r_a, r_b)
            l2, r2 = _bond_lr_at(cb, cr, b1, lam_a, lam_b, r_a, r_b)
            m0, s0 = _bond_lr_at(cl, cb, bm1, lam_a, lam_b, r_a, r_b)
            m1, s1 = _bond_lr_at(cb, ca, b, lam_a, lam_b, r_a, r_b)
            m2, s2 = _bond_lr_at(ca, cr, b1, lam_a, lam_b, r_a, r_b)
            occ[b] = cb
            occ[b1] = ca
            tot_l += (m0 + m1 + m2) - (l0 + l1 + l2)
            tot_r += (s0 + s1 + s2) - (r0 + r1 + r2)
        else:
            # neighbouring bonds coincide on tiny rings; recompute instead
            occ[b] = cb
            occ[b1] = ca
            tot_l, tot_r = lr_totals(occ, lam_a, lam_b, r_a, r_b)
        z *= zfac[ca, b]
        n_exec += 1
        since_resync += 1
        if since_resync >= resync_every:
            z = np.exp(logz_total(occ, psi_n, logz_const))
            tot_l, tot_r = lr_totals(occ, lam_a, lam_b, r_a, r_b)
            since_resync = 0
        al = abs(tot_l)
        if al > max_abs_l:
            max_abs_l = al
