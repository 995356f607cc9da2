"""Smooth test functions on the unit circle and bond-level coefficients.

The exponential functional of a binary configuration is
log Z = (1/N) sum_i [phi_a(i/N) A_i + phi_b(i/N) B_i], so only
psi = phi_a - phi_b and an additive constant matter.  A swap across bond i
that moves a particle to the right multiplies Z by exp(dpsi[i]) with
dpsi[i] = (psi((i+1)/N) - psi(i/N)) / N, which is also the exponent in the
tilted per-bond rates; everything downstream (generator functional,
quadratic variation rate, martingale bookkeeping) is built from these
arrays, so they are computed once per (N, pair, table) here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .rates import RateTable

__all__ = ["PeriodicFunction", "TestFunctionPair", "BondCoefficients",
           "SpaceTimeTestFunction", "function_from_name"]

_PERIOD_TOL = 1e-10


@dataclass
class PeriodicFunction:
    """A C^2 function on [0,1] with analytic first two derivatives."""

    f: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    def __call__(self, x):
        return self.f(np.asarray(x, dtype=float))

    @classmethod
    def constant(cls, c: float) -> "PeriodicFunction":
        return cls(lambda x: np.full_like(x, float(c)),
                   lambda x: np.zeros_like(x),
                   lambda x: np.zeros_like(x), f"const:{c}")

    @classmethod
    def sine(cls, k: int, amp: float = 1.0) -> "PeriodicFunction":
        w = 2.0 * np.pi * int(k)
        tag = f"sin:{k}" if amp == 1.0 else f"sin:{k},{amp}"
        return cls(lambda x: amp * np.sin(w * x),
                   lambda x: amp * w * np.cos(w * x),
                   lambda x: -amp * w * w * np.sin(w * x), tag)

    @classmethod
    def cosine(cls, k: int, amp: float = 1.0) -> "PeriodicFunction":
        w = 2.0 * np.pi * int(k)
        tag = f"cos:{k}" if amp == 1.0 else f"cos:{k},{amp}"
        return cls(lambda x: amp * np.cos(w * x),
                   lambda x: -amp * w * np.sin(w * x),
                   lambda x: -amp * w * w * np.cos(w * x), tag)

    @classmethod
    def bump(cls, center: float = 0.5, width: float = 0.5
             ) -> "PeriodicFunction":
        """Compactly supported C^inf bump, peak 1 at `center`.

        width is the full support length; the profile is
        exp(1 - 1/(1 - s^2)) in the scaled coordinate s.
        """
        if not 0.0 < width <= 1.0:
            raise ValueError("bump width must be in (0, 1]")
        hw = width / 2.0

        def scaled(x):
            d = (np.asarray(x, dtype=float) - center + 0.5) % 1.0 - 0.5
            return d / hw

        def val(x):
            s = scaled(x)
            out = np.zeros_like(s)
            inside = np.abs(s) < 1.0
            u = 1.0 - s[inside] ** 2
            out[inside] = np.exp(1.0 - 1.0 / u)
            return out

        def der1(x):
            s = scaled(x)
            out = np.zeros_like(s)
            inside = np.abs(s) < 1.0
            si = s[inside]
            u = 1.0 - si ** 2
            out[inside] = np.exp(1.0 - 1.0 / u) * (-2.0 * si / u ** 2) / hw
            return out

        def der2(x):
            s = scaled(x)
            out = np.zeros_like(s)
            inside = np.abs(s) < 1.0
            si = s[inside]
            u = 1.0 - si ** 2
            b = np.exp(1.0 - 1.0 / u)
            out[inside] = b * (4.0 * si ** 2 / u ** 4
                               - 2.0 / u ** 2
                               - 8.0 * si ** 2 / u ** 3) / hw ** 2
            return out

        return cls(val, der1, der2, f"bump:{center},{width}")

    @classmethod
    def spline(cls, xs, ys) -> "PeriodicFunction":
        """Periodic cubic spline through samples; xs must start at 0, end at 1."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise ValueError("spline samples must span [0, 1]")
        if abs(ys[0] - ys[-1]) > _PERIOD_TOL:
            raise ValueError(
                f"spline endpoints differ by {abs(ys[0] - ys[-1])}; "
                f"periodic interpolation needs matching values")
        ys = ys.copy()
        ys[-1] = ys[0]
        cs = CubicSpline(xs, ys, bc_type="periodic")
        c1 = cs.derivative(1)
        c2 = cs.derivative(2)
        return cls(lambda x: cs(np.mod(x, 1.0)),
                   lambda x: c1(np.mod(x, 1.0)),
                   lambda x: c2(np.mod(x, 1.0)), "spline")

    @classmethod
    def spline_file(cls, path) -> "PeriodicFunction":
        rows = np.loadtxt(path, delimiter=",", ndmin=2)
        pf = cls.spline(rows[:, 0], rows[:, 1])
        pf.label = f"spline:{path}"
        return pf


def function_from_name(name: str) -> PeriodicFunction:
    """Catalog lookup: const:c, sin:k[,amp], cos:k[,amp], bump:center,width,
    spline:path."""
    kind, _, arg = name.partition(":")
    try:
        if kind == "const":
            return PeriodicFunction.constant(float(arg or 0.0))
        if kind in ("sin", "cos"):
            parts = [float(v) for v in arg.split(",")] if arg else [1.0]
            k = int(parts[0])
            amp = parts[1] if len(parts) > 1 else 1.0
            maker = (PeriodicFunction.sine if kind == "sin"
                     else PeriodicFunction.cosine)
            return maker(k, amp)
        if kind == "bump":
            parts = [float(v) for v in arg.split(",")] if arg else []
            center = parts[0] if parts else 0.5
            width = parts[1] if len(parts) > 1 else 0.5
            return PeriodicFunction.bump(center, width)
        if kind == "spline":
            return PeriodicFunction.spline_file(arg)
    except (ValueError, OSError) as exc:
        raise ValueError(f"cannot build test function {name!r}: {exc}") \
            from None
    raise ValueError(
        f"unknown test function {name!r}; catalog: const, sin, cos, bump, "
        f"spline")


@dataclass
class BondCoefficients:
    """Per-bond arrays for one (pair, table, N) combination.

    dpsi[i] is the log Z increment of a rightward particle move across
    bond i; lam_a/lam_b are the tilted rates lam * expm1(+-dpsi); r_a/r_b
    the quadratic-variation coefficients lam * expm1(+-dpsi)^2.  psi_n and
    logz_const reconstruct log Z from scratch:
    log Z = logz_const + sum_{occ[i]=1} psi_n[i].
    """

    dpsi: np.ndarray
    lam_a: np.ndarray
    lam_b: np.ndarray
    r_a: np.ndarray
    r_b: np.ndarray
    psi_n: np.ndarray
    logz_const: float


@dataclass
class TestFunctionPair:
    __test__ = False  # not a pytest class, despite the name

    phi_a: PeriodicFunction
    phi_b: PeriodicFunction

    def validate_periodic(self) -> None:
        """The wrap-around bond N-1 evaluates psi(1); require psi(1) = psi(0).

        Pairings that never difference psi across a bond (log Z alone) are
        fine without this, so the check runs lazily at the generator-side
        entry points rather than at construction.
        """
        gap = float(np.abs(self.psi(np.array([0.0]))
                           - self.psi(np.array([1.0])))[0])
        if gap > _PERIOD_TOL:
            raise ValueError(
                f"psi(0) and psi(1) differ by {gap}; the wrap-around bond "
                f"needs a periodic psi")

    def psi(self, x):
        return self.phi_a(x) - self.phi_b(x)

    def psi_d1(self, x):
        x = np.asarray(x, dtype=float)
        return self.phi_a.d1(x) - self.phi_b.d1(x)

    def psi_d2(self, x):
        x = np.asarray(x, dtype=float)
        return self.phi_a.d2(x) - self.phi_b.d2(x)

    def bond_coefficients(self, n_sites: int,
                          table: RateTable) -> BondCoefficients:
        if table.n_species != 2:
            raise ValueError("bond coefficients are defined for two species")
        self.validate_periodic()
        x = np.arange(n_sites, dtype=float) / n_sites
        psi = self.psi(x)
        # wrap bond N-1 against psi(1) = psi(0)
        dpsi = (np.roll(psi, -1) - psi) / n_sites
        lam_ab = float(table.rates[1, 0])
        lam_ba = float(table.rates[0, 1])
        up = np.expm1(dpsi)
        down = np.expm1(-dpsi)
        phi_b_vals = self.phi_b(x)
        return BondCoefficients(
            dpsi=dpsi,
            lam_a=lam_ab * up,
            lam_b=lam_ba * down,
            r_a=lam_ab * up * up,
            r_b=lam_ba * down * down,
            psi_n=psi / n_sites,
            logz_const=float(phi_b_vals.sum()) / n_sites,
        )


@dataclass
class SpaceTimeTestFunction:
    """theta(x, t) with the derivatives the weak form needs."""

    f: Callable
    d_t: Callable
    d_x: Callable
    d_xx: Callable
    label: str = ""

    @classmethod
    def separable(cls, space: PeriodicFunction, time_f: Callable,
                  time_d: Callable, label: str = "") -> "SpaceTimeTestFunction":
        return cls(
            f=lambda x, t: space(x) * time_f(t),
            d_t=lambda x, t: space(x) * time_d(t),
            d_x=lambda x, t: space.d1(np.asarray(x, dtype=float)) * time_f(t),
            d_xx=lambda x, t: space.d2(np.asarray(x, dtype=float)) * time_f(t),
            label=label or f"{space.label}*g(t)",
        )

    @classmethod
    def sin_bump(cls, k: int, t_final: float) -> "SpaceTimeTestFunction":
        """sin(2 pi k x) * t (T - t): the workhorse weak-form probe."""
        return cls.separable(
            PeriodicFunction.sine(k),
            lambda t: t * (t_final - t),
            lambda t: t_final - 2.0 * t,
            label=f"sin:{k}*t(T-t)",
        )
