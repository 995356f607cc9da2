"""Deterministic scaling-limit solvers on the periodic unit interval.

Binary densities obey d_t rho = lam * rho_xx - d_x(mu * rho * (1 - rho)):
positive mu biases particles toward increasing x, so the flux is
+mu rho (1 - rho).  The n-species system couples each density to the
others through d_t rho_k = D [rho_k_xx + d_x(sum_{l != k} a[l][k]
rho_k rho_l)] with antisymmetric a; the transposed index a[l][k] is what
makes the n = 2 case collapse onto the binary equation with a[1][0] =
mu / lam, and the sidecar metadata echoes this convention.

Both solvers are explicit conservative finite-difference schemes: central
second-order diffusion plus a local Lax-Friedrichs drift flux.  The
n-species interface viscosity uses one common speed for all species, so
the simplex constraint sum_k rho_k = 1 telescopes exactly; per-pair flux
terms are computed once and added with opposite signs for the same reason.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from .testfunctions import SpaceTimeTestFunction

__all__ = ["DensityField", "PDEParams", "solve_burgers", "solve_nspecies",
           "weak_residual", "write_density_csv", "read_density_csv"]

log = logging.getLogger(__name__)

_BAND = 1e-8  # admitted overshoot outside [0, 1]


@dataclass
class DensityField:
    """Grid densities at one time; values[k][j] approximates rho_k(j/M).

    Binary problems carry a single row (the particle density, species 1)
    with the hole density implied; n-species problems carry all n rows.
    """

    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.shape[1] < 2:
            raise ValueError("need at least two grid points")
        if v.min() < -_BAND or v.max() > 1.0 + _BAND:
            raise ValueError(
                f"density values outside [0, 1] by more than {_BAND}: "
                f"range [{v.min()}, {v.max()}]")
        if v.shape[0] > 1:
            gap = np.abs(v.sum(axis=0) - 1.0).max()
            if gap > _BAND:
                raise ValueError(
                    f"species densities sum away from 1 by {gap}")
        self.values = v

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.m, dtype=float) / self.m

    @property
    def rho(self) -> np.ndarray:
        """The particle density row (binary convention)."""
        return self.values[-1] if self.n_rows == 1 else self.values[1]

    def clipped(self) -> np.ndarray:
        return np.clip(self.values, 0.0, 1.0)

    @classmethod
    def binary_profile(cls, fn, m: int, t: float = 0.0) -> "DensityField":
        x = np.arange(m, dtype=float) / m
        return cls(np.asarray(fn(x), dtype=float)[None, :].copy(), t)

    @classmethod
    def nspecies_profile(cls, fns, m: int, t: float = 0.0) -> "DensityField":
        x = np.arange(m, dtype=float) / m
        rows = np.stack([np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape)
                         for fn in fns])
        return cls(rows, t)


@dataclass
class PDEParams:
    """Scheme parameters; dt = None picks the largest admissible step."""

    m: int
    lam: float | None = None
    mu: float | None = None
    diff: float | None = None
    alpha: np.ndarray | None = None
    dt: float | None = None

    def __post_init__(self):
        if self.m < 4:
            raise ValueError("grid too small")
        binary = self.lam is not None
        nspec = self.diff is not None
        if binary == nspec:
            raise ValueError("give either (lam, mu) or (diff, alpha)")
        if binary:
            if self.lam <= 0:
                raise ValueError("lam must be positive")
            if self.mu is None:
                self.mu = 0.0
        else:
            if self.diff <= 0:
                raise ValueError("diff must be positive")
            a = np.array(self.alpha, dtype=float)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ValueError("alpha must be square")
            if np.abs(a + a.T).max() > 1e-12:
                raise ValueError("alpha must be antisymmetric within 1e-12; "
                                 "the simplex constraint depends on it")
            # exact antisymmetry so the pairwise flux terms cancel to zero
            self.alpha = (a - a.T) / 2.0

    def admissible_dt(self, rho0) -> float:
        """0.8 * min(diffusive bound, drift bound) evaluated on rho0.

        Accepts a DensityField or a bare array of the same content.
        """
        vals = rho0.values if isinstance(rho0, DensityField) else np.asarray(rho0)
        dx = 1.0 / self.m
        if self.lam is not None:
            bound = dx * dx / (2.0 * self.lam)
            speed = abs(self.mu) * float(
                np.abs(1.0 - 2.0 * vals).max())
            if speed > 0.0:
                bound = min(bound, dx / speed)
        else:
            bound = dx * dx / (2.0 * self.diff)
            speed = self.diff * float(
                np.abs(self.alpha).sum(axis=0).max())
            if speed > 0.0:
                bound = min(bound, dx / speed)
        return 0.8 * bound

    def resolve_dt(self, rho0: DensityField) -> float:
        adm = self.admissible_dt(rho0)
        if self.dt is None:
            return adm
        if self.dt > adm:
            raise ValueError(
                f"dt {self.dt} violates the CFL bound; maximal admissible "
                f"dt is {adm}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        return self.dt


@njit(cache=True)
def _burgers_steps(rho, lam, mu, dx, dt, n_steps, flux, new):
    m = rho.shape[0]
    inv_dx = 1.0 / dx
    inv_dx2 = inv_dx * inv_dx
    for _ in range(n_steps):
        for j in range(m):
            j1 = j + 1
            if j1 == m:
                j1 = 0
            fl = mu * rho[j] * (1.0 - rho[j])
            fr = mu * rho[j1] * (1.0 - rho[j1])
            al = abs(mu * (1.0 - 2.0 * rho[j]))
            ar = abs(mu * (1.0 - 2.0 * rho[j1]))
            a = al if al > ar else ar
            flux[j] = 0.5 * (fl + fr) - 0.5 * a * (rho[j1] - rho[j])
        for j in range(m):
            jm = j - 1
            if jm < 0:
                jm = m - 1
            j1 = j + 1
            if j1 == m:
                j1 = 0
            lap = rho[j1] - 2.0 * rho[j] + rho[jm]
            new[j] = rho[j] + dt * (lam * lap * inv_dx2
                                    - (flux[j] - flux[jm]) * inv_dx)
        rho[:] = new


@njit(cache=True)
def _nspecies_steps(rho, diff, alpha, dx, dt, n_steps, local, speed, flux,
                    new):
    n, m = rho.shape
    inv_dx = 1.0 / dx
    inv_dx2 = inv_dx * inv_dx
    for _ in range(n_steps):
        for k in range(n):
            for j in range(m):
                local[k, j] = 0.0
        for j in range(m):
            # pairwise flux terms: one product, two signs, so the species
            # sum cancels exactly; common interface speed below for the
            # same reason
            best = 0.0
            for k in range(n):
                acc = 0.0
                for l in range(n):
                    if l != k:
                        acc += alpha[l, k] * (rho[l, j] - rho[k, j])
                v = abs(diff * acc)
                if v > best:
                    best = v
            speed[j] = best
            for k in range(n):
                for l in range(k + 1, n):
                    c = diff * alpha[l, k] * (rho[k, j] * rho[l, j])
                    local[k, j] -= c
                    local[l, j] += c
        for j in range(m):
            j1 = j + 1
            if j1 == m:
                j1 = 0
            a = speed[j] if speed[j] > speed[j1] else speed[j1]
            for k in range(n):
                flux[k, j] = 0.5 * (local[k, j] + local[k, j1]) \
                    - 0.5 * a * (rho[k, j1] - rho[k, j])
        for k in range(n):
            for j in range(m):
                jm = j - 1
                if jm < 0:
                    jm = m - 1
                j1 = j + 1
                if j1 == m:
                    j1 = 0
                lap = rho[k, j1] - 2.0 * rho[k, j] + rho[k, jm]
                new[k, j] = rho[k, j] + dt * (diff * lap * inv_dx2
                                              - (flux[k, j] - flux[k, jm])
                                              * inv_dx)
        rho[:, :] = new


def _check_output_times(t0, t_end, output_times):
    times = np.asarray(output_times, dtype=float)
    if times.ndim != 1:
        raise ValueError("output_times must be one-dimensional")
    if times.size and np.any(np.diff(times) < 0):
        raise ValueError("output_times must be sorted")
    if t_end < t0:
        raise ValueError("t_end is before the initial time")
    if times.size and (times[0] < t0 or times[-1] > t_end):
        raise ValueError("output_times must lie within [t0, t_end]")
    return times


def _march(kernel_step, values, t0, t_end, dt, output_times):
    """Drive a chunked stepper, landing exactly on every requested time."""
    out = []
    t = t0
    targets = list(output_times) + [t_end]
    for target in targets:
        span = target - t
        n_full = int(np.floor(span / dt)) if span > 0 else 0
        if n_full:
            kernel_step(values, dt, n_full)
            t += n_full * dt
        rem = target - t
        if rem > 0.0:
            kernel_step(values, rem, 1)
        t = target
        out.append((t, values.copy()))
    return out[:-1] if len(output_times) else []


def _audit_range(fields):
    worst = 0.0
    for f in fields:
        v = f.values
        worst = max(worst, float(-v.min()), float(v.max() - 1.0))
    if worst > _BAND:
        raise RuntimeError(
            f"scheme left [0, 1] by {worst}; this breaks the monotonicity "
            f"guarantee and points at a CFL or flux bug")
    if worst > 0.0:
        log.warning("solution overshot [0, 1] by %.3e (within the %.0e "
                    "rounding band)", worst, _BAND)


def solve_burgers(rho0: DensityField, params: PDEParams, t_end: float,
                  output_times) -> list[DensityField]:
    """March the binary density to t_end, returning the requested slices."""
    if params.lam is None:
        raise ValueError("binary solve needs (lam, mu) parameters")
    if rho0.n_rows != 1:
        raise ValueError("binary solve expects a single-row density field")
    if rho0.m != params.m:
        raise ValueError(f"field has {rho0.m} points, params say {params.m}")
    if rho0.values.min() < 0.0 or rho0.values.max() > 1.0:
        raise ValueError("initial density must lie in [0, 1]")
    times = _check_output_times(rho0.t, t_end, output_times)
    dt = params.resolve_dt(rho0)
    dx = 1.0 / params.m
    rho = rho0.values[0].copy()
    flux = np.empty_like(rho)
    new = np.empty_like(rho)
    lam, mu = float(params.lam), float(params.mu)

    def chunk(values, step, n):
        _burgers_steps(values, lam, mu, dx, step, n, flux, new)

    slices = _march(chunk, rho, rho0.t, t_end, dt, times)
    fields = [DensityField(v[None, :], t) for t, v in slices]
    _audit_range(fields)
    return fields


def solve_nspecies(rho0: DensityField, params: PDEParams, t_end: float,
                   output_times) -> list[DensityField]:
    """March all species densities; the per-point sum stays at 1."""
    if params.diff is None:
        raise ValueError("n-species solve needs (diff, alpha) parameters")
    if rho0.n_rows != params.alpha.shape[0]:
        raise ValueError(
            f"field carries {rho0.n_rows} species, alpha is "
            f"{params.alpha.shape[0]} x {params.alpha.shape[0]}")
    if rho0.m != params.m:
        raise ValueError(f"field has {rho0.m} points, params say {params.m}")
    if np.abs(rho0.values.sum(axis=0) - 1.0).max() > 1e-12:
        raise ValueError("initial densities must sum to 1 at every point")
    times = _check_output_times(rho0.t, t_end, output_times)
    dt = params.resolve_dt(rho0)
    dx = 1.0 / params.m
    rho = rho0.values.copy()
    local = np.empty_like(rho)
    flux = np.empty_like(rho)
    new = np.empty_like(rho)
    speed = np.empty(params.m)
    diff = float(params.diff)
    alpha = params.alpha

    def chunk(values, step, n):
        _nspecies_steps(values, diff, alpha, dx, step, n, local, speed,
                        flux, new)

    slices = _march(chunk, rho, rho0.t, t_end, dt, times)
    fields = [DensityField(v, t) for t, v in slices]
    _audit_range(fields)
    return fields


def weak_residual(traj, theta: SpaceTimeTestFunction, lam: float,
                  mu: float) -> float:
    """Signed defect of the binary weak form along a stored trajectory.

    Integrates rho (theta_t + lam theta_xx) + mu rho (1 - rho) theta_x
    over space-time (periodic trapezoid in x, trapezoid in t) minus the
    boundary bracket at the first and last slice.  Zero for an exact weak
    solution and smooth theta.
    """
    fields = list(traj)
    if len(fields) < 2:
        raise ValueError("weak residual needs at least two time slices")
    m = fields[0].m
    if any(f.m != m or f.n_rows != 1 for f in fields):
        raise ValueError("trajectory slices must be single-row on one grid")
    x = fields[0].x
    times = np.array([f.t for f in fields])
    if np.any(np.diff(times) <= 0):
        raise ValueError("trajectory times must increase")
    vals = np.empty(len(fields))
    for s, f in enumerate(fields):
        rho = f.values[0]
        integrand = (rho * (theta.d_t(x, f.t) + lam * theta.d_xx(x, f.t))
                     + mu * rho * (1.0 - rho) * theta.d_x(x, f.t))
        vals[s] = integrand.mean()
    inner = float(np.trapezoid(vals, times))
    first, last = fields[0], fields[-1]
    bracket = float((last.values[0] * theta.f(x, last.t)).mean()
                    - (first.values[0] * theta.f(x, first.t)).mean())
    return inner - bracket


def write_density_csv(path, fields) -> None:
    """One row per slice: t, then M values per species row."""
    with open(path, "w") as fh:
        for f in fields:
            body = ",".join(repr(float(v)) for v in f.values.ravel())
            fh.write(f"{float(f.t)!r},{body}\n")


def read_density_csv(path, n_rows: int = 1) -> list[DensityField]:
    fields = []
    with open(path) as fh:
        for line in fh:
            parts = line.strip().split(",")
            t = float(parts[0])
            vals = np.array([float(v) for v in parts[1:]])
            fields.append(DensityField(vals.reshape(n_rows, -1), t))
    return fields
