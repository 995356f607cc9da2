"""Exchange-rate tables for the n-species ring dynamics.

rates[k][l] is the rate at which a bond showing the ordered pattern (k, l)
swaps to (l, k).  For two species, label 1 = particle and label 0 = hole,
so rates[1][0] is the rightward hop rate of a particle.  The scaled
constructors bake the diffusive speed-up into the table:

  binary:        rates[1][0] = lam*N^2 + mu*N/2,  rates[0][1] = lam*N^2 - mu*N/2
  equidiffusive: rates[k][l] = D*N^2 * exp(alpha[k][l] / (2N))

so (rates[k][l] + rates[l][k])/2 = D*N^2*cosh(alpha/2N) and the log-ratio
asymmetry N*log(rates[k][l]/rates[l][k]) equals alpha[k][l] exactly.  The
binary table is the equidiffusive one to first order with
alpha[1][0] -> mu/lam, which is the convention every hydrodynamic-limit
routine in this package assumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["RateTable"]


@dataclass
class RateTable:
    """Nonnegative n x n exchange rates with zero diagonal."""

    rates: np.ndarray
    macro: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.array(self.rates, dtype=float)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("rates must be a square matrix")
        if r.shape[0] < 2:
            raise ValueError("need at least two species")
        if (r < 0).any():
            k, l = np.argwhere(r < 0)[0]
            raise ValueError(f"negative rate {r[k, l]} for pattern ({k},{l})")
        np.fill_diagonal(r, 0.0)
        self.rates = r

    @property
    def n_species(self) -> int:
        return self.rates.shape[0]

    @property
    def max_rate(self) -> float:
        return float(self.rates.max())

    @classmethod
    def binary(cls, lam: float, mu: float, n_sites: int) -> "RateTable":
        """Weakly asymmetric two-species table at lattice size N.

        lam is the symmetric (diffusive) coefficient, mu the drift
        coefficient; positive mu biases particles to the right.
        """
        if lam <= 0:
            raise ValueError("lam must be positive")
        if lam * n_sites < abs(mu) / 2:
            raise ValueError(
                f"rates would go negative: need lam*N >= |mu|/2, got "
                f"lam*N={lam * n_sites} and |mu|/2={abs(mu) / 2}")
        n2 = float(n_sites) * n_sites
        r = np.zeros((2, 2))
        r[1, 0] = lam * n2 + mu * n_sites / 2.0
        r[0, 1] = lam * n2 - mu * n_sites / 2.0
        return cls(r, {"kind": "binary", "lam": lam, "mu": mu,
                       "n_sites": n_sites})

    @classmethod
    def equidiffusive(cls, diff: float, alpha: np.ndarray,
                      n_sites: int) -> "RateTable":
        """n-species table with a common diffusive part.

        alpha must be antisymmetric; alpha[k][l] is the scaled log-ratio
        asymmetry of the (k,l) exchange and plays the role mu/lam plays in
        the two-species table.
        """
        alpha = np.array(alpha, dtype=float)
        if diff <= 0:
            raise ValueError("diffusion coefficient must be positive")
        if alpha.ndim != 2 or alpha.shape[0] != alpha.shape[1]:
            raise ValueError("alpha must be a square matrix")
        if np.abs(alpha + alpha.T).max() > 1e-12:
            raise ValueError("alpha must be antisymmetric within 1e-12")
        n2 = float(n_sites) * n_sites
        r = diff * n2 * np.exp(alpha / (2.0 * n_sites))
        return cls(r, {"kind": "equidiffusive", "diff": diff,
                       "alpha": alpha.copy(), "n_sites": n_sites})

    @classmethod
    def abc(cls, p_plus: float, p_minus: float, q_plus: float,
            q_minus: float, r_plus: float, r_minus: float) -> "RateTable":
        """Three-species cyclic model: AB<->BA, BC<->CB, CA<->AC.

        Labels are A=0, B=1, C=2; the plus rate drives the forward reaction
        written left to right (e.g. p_plus is the AB -> BA rate).
        """
        r = np.zeros((3, 3))
        r[0, 1] = p_plus
        r[1, 0] = p_minus
        r[1, 2] = q_plus
        r[2, 1] = q_minus
        r[2, 0] = r_plus
        r[0, 2] = r_minus
        return cls(r, {"kind": "abc", "p": (p_plus, p_minus),
                       "q": (q_plus, q_minus), "r": (r_plus, r_minus)})

    def alpha_estimate(self, n_sites: int) -> np.ndarray:
        """N-scaled log-ratio asymmetry of the table where defined.

        Entries where either direction has zero rate come back as nan; the
        equidiffusive constructor reproduces its alpha input here exactly
        up to float rounding.
        """
        out = np.full_like(self.rates, np.nan)
        n = self.n_species
        for k in range(n):
            for l in range(n):
                if k != l and self.rates[k, l] > 0 and self.rates[l, k] > 0:
                    out[k, l] = n_sites * np.log(
                        self.rates[k, l] / self.rates[l, k])
        return out

    def describe(self) -> dict:
        """Flat metadata for sidecar files."""
        meta = {"n_species": self.n_species}
        for k in range(self.n_species):
            for l in range(self.n_species):
                if k != l:
                    meta[f"rate_{k}{l}"] = repr(float(self.rates[k, l]))
        for key, val in self.macro.items():
            if isinstance(val, np.ndarray):
                meta[f"macro_{key}"] = ";".join(
                    ",".join(repr(float(v)) for v in row) for row in val)
            else:
                meta[f"macro_{key}"] = str(val)
        return meta
