"""Ring lattice configurations and product-measure initial data.

Sites live on Z/NZ and carry one species label from {0, ..., n-1}; bond i
joins sites i and i+1 mod N.  In the two-species case label 1 is the
particle and label 0 the hole, so a single density profile rho(x) fixes the
initial law as P(occ[i] = 1) = rho(i/N) independently per site.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "LatticeConfig",
    "InitialProfile",
    "new_config",
    "exact_config",
    "profile_from_name",
    "write_occupancy",
    "read_occupancy",
]

_SUM_TOL = 1e-12


@dataclass
class LatticeConfig:
    """Occupancy of the ring plus the species count of the model."""

    occupancy: np.ndarray
    n_species: int

    def __post_init__(self):
        occ = np.ascontiguousarray(self.occupancy, dtype=np.int64)
        if occ.ndim != 1:
            raise ValueError("occupancy must be one-dimensional")
        if occ.shape[0] < 2:
            raise ValueError("need at least two sites")
        if self.n_species < 2:
            raise ValueError(
                "n_species must be >= 2; a single species never moves")
        if occ.size and (occ.min() < 0 or occ.max() >= self.n_species):
            bad = int(np.argmax((occ < 0) | (occ >= self.n_species)))
            raise ValueError(
                f"label {occ[bad]} at site {bad} outside [0, {self.n_species})")
        self.occupancy = occ

    @property
    def n_sites(self) -> int:
        return self.occupancy.shape[0]

    def counts(self) -> np.ndarray:
        """Number of sites carrying each label."""
        return np.bincount(self.occupancy, minlength=self.n_species)

    def copy(self) -> "LatticeConfig":
        return LatticeConfig(self.occupancy.copy(), self.n_species)

    def to_csv_line(self) -> str:
        body = ",".join(str(int(v)) for v in self.occupancy)
        return f"{self.n_sites},{self.n_species},{body}"

    @classmethod
    def from_csv_line(cls, line: str) -> "LatticeConfig":
        parts = line.strip().split(",")
        if len(parts) < 3:
            raise ValueError("occupancy line needs N, n and the labels")
        n_sites = int(parts[0])
        n_species = int(parts[1])
        labels = parts[2:]
        if len(labels) != n_sites:
            raise ValueError(
                f"header says {n_sites} sites but line carries {len(labels)}")
        occ = np.array([int(v) for v in labels], dtype=np.int64)
        return cls(occ, n_species)


@dataclass
class InitialProfile:
    """Per-species density functions on the unit circle.

    density_fns[k](x) gives the probability that a site at macroscopic
    position x carries label k; the functions must map into [0, 1] and sum
    to one at every sampled point.
    """

    density_fns: Sequence[Callable[[np.ndarray], np.ndarray]]
    label: str = ""      # config-string identity, "" for ad hoc callables

    def __post_init__(self):
        self.density_fns = tuple(self.density_fns)
        if len(self.density_fns) < 2:
            raise ValueError("need at least two species densities")

    @property
    def n_species(self) -> int:
        return len(self.density_fns)

    @classmethod
    def binary(cls, rho) -> "InitialProfile":
        """Two-species profile from the particle density alone.

        rho may be a callable on [0,1) or a plain constant.
        """
        label = ""
        if not callable(rho):
            c = float(rho)
            rho = lambda x: np.full_like(np.asarray(x, dtype=float), c)
            label = f"const:{c}"
        return cls((lambda x: 1.0 - np.asarray(rho(x), dtype=float),
                    lambda x: np.asarray(rho(x), dtype=float)), label)

    @classmethod
    def constant(cls, values: Sequence[float]) -> "InitialProfile":
        vals = [float(v) for v in values]
        return cls(tuple((lambda x, v=v: np.full_like(
            np.asarray(x, dtype=float), v)) for v in vals),
            "const:" + ",".join(str(v) for v in vals))

    def table(self, x: np.ndarray) -> np.ndarray:
        """Densities evaluated on a grid, validated; shape (n_species, len(x))."""
        x = np.asarray(x, dtype=float)
        rows = np.empty((self.n_species, x.shape[0]))
        for k, fn in enumerate(self.density_fns):
            rows[k] = np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape)
        low = rows < -_SUM_TOL
        high = rows > 1.0 + _SUM_TOL
        if low.any() or high.any():
            k, i = np.argwhere(low | high)[0]
            raise ValueError(
                f"species {k} density {rows[k, i]} at x={x[i]} outside [0, 1]")
        sums = rows.sum(axis=0)
        off = np.abs(sums - 1.0) > _SUM_TOL
        if off.any():
            i = int(np.argmax(off))
            raise ValueError(
                f"densities sum to {sums[i]} at x={x[i]}, expected 1")
        return np.clip(rows, 0.0, 1.0)


def new_config(profile: InitialProfile, n_sites: int,
               rng: np.random.Generator | int) -> LatticeConfig:
    """Sample a configuration from the product measure of `profile`.

    Site i draws its label from the densities at x = i/N, independently
    across sites.
    """
    if n_sites < 2:
        raise ValueError("need at least two sites")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    x = np.arange(n_sites, dtype=float) / n_sites
    rows = profile.table(x)
    cum = np.cumsum(rows, axis=0)
    u = rng.random(n_sites)
    occ = (u[None, :] >= cum[:-1, :]).sum(axis=0).astype(np.int64)
    return LatticeConfig(occ, profile.n_species)


def exact_config(occupancy: Sequence[int], n_species: int) -> LatticeConfig:
    """Wrap an explicit label sequence, validating every entry."""
    return LatticeConfig(np.asarray(occupancy, dtype=np.int64), n_species)


def _profile_from_file(path: str) -> InitialProfile:
    # one density column means binary (particle density); several columns
    # are per-species densities, interpolated periodically between samples
    rows = np.loadtxt(path, delimiter=",", ndmin=2)
    xs = rows[:, 0]
    if (np.diff(xs) <= 0).any() or xs[0] < 0 or xs[-1] >= 1.0:
        raise ValueError(
            f"profile file {path}: x column must increase within [0, 1)")

    def interp_col(col):
        xp = np.concatenate((xs, [xs[0] + 1.0]))
        fp = np.concatenate((col, [col[0]]))
        return lambda x: np.interp(np.mod(x, 1.0), xp, fp)

    if rows.shape[1] == 2:
        return InitialProfile.binary(interp_col(rows[:, 1]))
    return InitialProfile([interp_col(rows[:, 1 + k])
                           for k in range(rows.shape[1] - 1)])


def profile_from_name(name: str) -> InitialProfile:
    """Initial profile from a config string.

    const:c gives a flat binary density c; const:a,b,... a flat density
    per species.  sin:amplitude,k,mean gives the binary profile
    mean + amplitude sin(2 pi k x).  file:path reads x,density CSV rows.
    """
    kind, _, arg = name.partition(":")
    profile = None
    try:
        if kind == "const":
            vals = [float(v) for v in arg.split(",")] if arg else [0.5]
            profile = (InitialProfile.binary(vals[0]) if len(vals) == 1
                       else InitialProfile.constant(vals))
        elif kind == "sin":
            parts = [float(v) for v in arg.split(",")]
            amp = parts[0]
            k = parts[1] if len(parts) > 1 else 1.0
            mean = parts[2] if len(parts) > 2 else 0.5
            w = 2.0 * np.pi * k
            profile = InitialProfile.binary(
                lambda x: mean + amp * np.sin(w * np.asarray(x, dtype=float)))
        elif kind == "file":
            profile = _profile_from_file(arg)
    except (ValueError, OSError) as exc:
        raise ValueError(f"cannot build profile {name!r}: {exc}") from None
    if profile is None:
        raise ValueError(
            f"unknown profile {name!r}; use const:c, sin:amplitude,k,mean "
            f"or file:path")
    profile.label = name
    return profile


def write_occupancy(config: LatticeConfig, path) -> None:
    """Single-line CSV dump: N, n, then the labels.  Round-trips bit-exactly."""
    with open(path, "w") as fh:
        fh.write(config.to_csv_line() + "\n")


def read_occupancy(path) -> LatticeConfig:
    with open(path) as fh:
        return LatticeConfig.from_csv_line(fh.readline())
