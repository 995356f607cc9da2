"""Continuous-time jump dynamics over the ring.

The bundle (config, index, clock, rng) is advanced by step / run_until.
Bond weights live in a binary-indexed tree so sampling and the 3-bond
update after an exchange are both O(log N); the cached total is rebuilt
from scratch every `rebuild_every` events to stop float drift.  run_until
hands the loop to the compiled kernel and comes back with timestamped
snapshots, optionally with the full event log for martingale analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .lattice import LatticeConfig
from .rates import RateTable

__all__ = [
    "SplitMix64", "SimClock", "RateIndex", "EventRecord",
    "TrajectoryRecord", "build_rate_index", "step", "run_until",
]

_EVENT_CHUNK = 1 << 16


class SplitMix64:
    """Counter-based 64-bit stream; (seed, counter) pins the whole path.

    Substreams for ensemble members come from spawn(), which remixes the
    key instead of splitting state, so any (seed, index) pair is
    reproducible in isolation.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.state = np.uint64(self.seed)

    def spawn(self, index: int) -> "SplitMix64":
        child = SplitMix64(int(_k.derive_key(np.uint64(self.seed),
                                             np.uint64(index))))
        return child

    def uniform(self) -> float:
        st, u = _k.uniform01(self.state)
        # numba hands the state back as a Python int; keep it uint64 so the
        # next dispatch stays on the unsigned overload
        self.state = np.uint64(st & 0xFFFFFFFFFFFFFFFF)
        return u

    def exponential(self) -> float:
        return -np.log1p(-self.uniform())


@dataclass
class SimClock:
    """Microscopic time and executed-event tally (the N^2 speed-up is
    already inside the rate table, so t is on the macroscopic scale)."""

    t: float = 0.0
    event_count: int = 0


@dataclass
class EventRecord:
    bond: int
    dt: float


@dataclass
class RateIndex:
    leaf: np.ndarray
    tree: np.ndarray
    total_rate: float
    rebuild_every: int = 1 << 20
    events_since_rebuild: int = 0

    def weight(self, bond: int) -> float:
        return float(self.leaf[bond])

    def refresh(self, config: LatticeConfig, table: RateTable) -> None:
        """Exact rebuild from the configuration."""
        self.total_rate = float(_k._refresh_weights(
            config.occupancy, table.rates, self.leaf, self.tree))
        self.events_since_rebuild = 0

    def consistency_gap(self, config: LatticeConfig,
                        table: RateTable) -> tuple[float, float]:
        """(max abs weight error, relative total error) vs a fresh build."""
        fresh = build_rate_index(config, table)
        werr = float(np.abs(fresh.leaf - self.leaf).max())
        denom = max(fresh.total_rate, 1e-300)
        terr = abs(fresh.total_rate - self.total_rate) / denom
        return werr, terr


def build_rate_index(config: LatticeConfig, table: RateTable) -> RateIndex:
    if table.n_species != config.n_species:
        raise ValueError(
            f"table has {table.n_species} species, configuration has "
            f"{config.n_species}")
    n = config.n_sites
    leaf = np.zeros(n)
    tree = np.zeros(n + 1)
    total = float(_k._refresh_weights(config.occupancy, table.rates,
                                      leaf, tree))
    return RateIndex(leaf=leaf, tree=tree, total_rate=total)


def step(config: LatticeConfig, index: RateIndex, table: RateTable,
         clock: SimClock, rng: SplitMix64) -> EventRecord | None:
    """Execute one exchange; None signals a frozen configuration.

    Draw order (holding time, then bond) matches the compiled loop, so a
    step-by-step drive consumes the stream exactly like run_until.
    """
    if index.total_rate <= 1e-300:
        return None
    occ = config.occupancy
    n = config.n_sites
    dt = rng.exponential() / index.total_rate
    while True:
        u = rng.uniform()
        b = int(_k.fenwick_find(index.tree, u * index.total_rate))
        if b < n and index.leaf[b] > 0.0:
            break
        index.refresh(config, table)  # float drift pushed the draw off the end
    b1 = (b + 1) % n
    occ[b], occ[b1] = occ[b1], occ[b]
    clock.t += dt
    clock.event_count += 1
    index.events_since_rebuild += 1
    if index.events_since_rebuild >= index.rebuild_every:
        index.refresh(config, table)
    else:
        for j in ((b - 1) % n, b, b1):
            w = float(table.rates[occ[j], occ[(j + 1) % n]])
            delta = w - index.leaf[j]
            if delta != 0.0:
                index.leaf[j] = w
                _k.fenwick_add(index.tree, j, delta)
                index.total_rate += delta
    return EventRecord(bond=b, dt=dt)


@dataclass
class TrajectoryRecord:
    """Timestamped snapshots from one run; the unit of persistence.

    When the event log is kept, `initial` plus (event_times, event_bonds)
    replay the exact path, which is what exact-quadrature martingale
    traces need.
    """

    times: np.ndarray
    snapshots: np.ndarray
    n_species: int
    frozen: bool = False
    t0: float = 0.0
    initial: np.ndarray | None = None
    event_times: np.ndarray | None = None
    event_bonds: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_snapshots(self) -> int:
        return self.snapshots.shape[0]

    @property
    def n_sites(self) -> int:
        return self.snapshots.shape[1]

    @property
    def has_events(self) -> bool:
        return self.event_times is not None

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            for j in range(self.n_snapshots):
                row = ",".join(str(int(v)) for v in self.snapshots[j])
                fh.write(f"{float(self.times[j])!r},{row}\n")

    @classmethod
    def read_csv(cls, path, n_species: int) -> "TrajectoryRecord":
        times = []
        rows = []
        with open(path) as fh:
            for line in fh:
                parts = line.strip().split(",")
                times.append(float(parts[0]))
                rows.append([int(v) for v in parts[1:]])
        return cls(times=np.array(times), snapshots=np.array(rows,
                   dtype=np.int64), n_species=n_species)


def run_until(config: LatticeConfig, index: RateIndex, table: RateTable,
              clock: SimClock, rng: SplitMix64, t_end: float,
              snapshot_times=(), record_events: bool = False
              ) -> TrajectoryRecord:
    """Advance the bundle to t_end, recording the state covering each
    requested time (an exact hit reads the post-jump state).

    A frozen run keeps its last configuration for all remaining snapshot
    times and is flagged on the record.
    """
    snap_times = np.asarray(snapshot_times, dtype=float)
    if snap_times.ndim != 1:
        raise ValueError("snapshot_times must be one-dimensional")
    if snap_times.size and np.any(np.diff(snap_times) < 0):
        raise ValueError("snapshot_times must be sorted")
    if t_end < clock.t:
        raise ValueError(f"t_end {t_end} is before current time {clock.t}")
    if snap_times.size and (snap_times[0] < clock.t
                            or snap_times[-1] > t_end):
        raise ValueError("snapshot_times must lie within [t, t_end]")

    n = config.n_sites
    occ = config.occupancy
    snap_out = np.empty((snap_times.size, n), dtype=np.int64)
    t_start = clock.t
    initial = occ.copy() if record_events else None

    snap_idx = 0
    frozen = False
    ev_chunks_t: list[np.ndarray] = []
    ev_chunks_b: list[np.ndarray] = []
    # the kernel is re-entered after each full event buffer
    ev_t = np.empty(_EVENT_CHUNK if record_events else 0)
    ev_b = np.empty(_EVENT_CHUNK if record_events else 0, dtype=np.int64)
    while True:
        (status, t, total, state, snap_idx, n_events, ev_count,
         since_rebuild) = _k.run_fenwick(
            occ, index.leaf, index.tree, table.rates,
            clock.t, t_end, index.total_rate, rng.state,
            snap_times, snap_out, snap_idx,
            ev_t, ev_b, record_events, clock.event_count,
            index.rebuild_every, index.events_since_rebuild)
        clock.t = float(t)
        clock.event_count = int(n_events)
        index.total_rate = float(total)
        index.events_since_rebuild = int(since_rebuild)
        rng.state = np.uint64(state)
        if record_events and ev_count:
            ev_chunks_t.append(ev_t[:ev_count].copy())
            ev_chunks_b.append(ev_b[:ev_count].copy())
        if status == _k.BUFFER_FULL:
            continue
        frozen = status == _k.FROZEN
        break

    record = TrajectoryRecord(
        times=snap_times.copy(), snapshots=snap_out,
        n_species=config.n_species, frozen=frozen, t0=t_start,
        initial=initial)
    if record_events:
        record.event_times = (np.concatenate(ev_chunks_t) if ev_chunks_t
                              else np.empty(0))
        record.event_bonds = (np.concatenate(ev_chunks_b) if ev_chunks_b
                              else np.empty(0, dtype=np.int64))
    return record
