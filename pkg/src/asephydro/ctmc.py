"""Exact transient laws on small rings.

The full n^N state space is enumerated, the jump generator assembled as a
sparse matrix, and exp(tQ) applied to an initial point mass by
uniformization (Poisson-weighted powers of the jump kernel) with a
controlled truncation tail.  This is the oracle the samplers are tested
against; it is deliberately independent of the event engine and shares no
code with it beyond the rate table.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse, stats

from .rates import RateTable

__all__ = ["state_codes", "encode_states", "generator_matrix",
           "transient_law", "empirical_law", "total_variation"]

_MAX_STATES = 200_000


def _space_size(n_sites: int, n_species: int) -> int:
    size = n_species ** n_sites
    if size > _MAX_STATES:
        raise ValueError(
            f"state space {n_species}^{n_sites} = {size} exceeds "
            f"{_MAX_STATES}; the exact law is only for small rings")
    return size


def state_codes(n_sites: int, n_species: int) -> np.ndarray:
    """All occupancy vectors as an (n^N, N) array, row index = code.

    The code is the big-endian base-n reading of the occupancy, so
    encode_states(state_codes(...)) is the identity.
    """
    size = _space_size(n_sites, n_species)
    codes = np.arange(size)
    out = np.empty((size, n_sites), dtype=np.int64)
    for i in range(n_sites - 1, -1, -1):
        out[:, i] = codes % n_species
        codes //= n_species
    return out


def encode_states(occ: np.ndarray, n_species: int) -> np.ndarray:
    """Base-n codes of occupancy rows (works on a single vector too)."""
    occ = np.atleast_2d(np.asarray(occ, dtype=np.int64))
    n_sites = occ.shape[1]
    _space_size(n_sites, n_species)
    weights = n_species ** np.arange(n_sites - 1, -1, -1, dtype=np.int64)
    return occ @ weights


def generator_matrix(table: RateTable, n_sites: int) -> sparse.csr_matrix:
    """Jump generator Q over the full state space; rows sum to zero."""
    n_species = table.n_species
    states = state_codes(n_sites, n_species)
    size = states.shape[0]
    rows, cols, vals = [], [], []
    diag = np.zeros(size)
    weights = n_species ** np.arange(n_sites - 1, -1, -1, dtype=np.int64)
    for j in range(n_sites):
        j1 = (j + 1) % n_sites
        k = states[:, j]
        l = states[:, j1]
        rate = table.rates[k, l]
        active = np.nonzero(rate > 0.0)[0]
        if active.size == 0:
            continue
        # swapping sites j, j1 shifts the code by (l-k)*w_j + (k-l)*w_j1
        shift = ((l[active] - k[active]) * weights[j]
                 + (k[active] - l[active]) * weights[j1])
        rows.append(active)
        cols.append(active + shift)
        vals.append(rate[active])
        diag[active] -= rate[active]
    rows.append(np.arange(size))
    cols.append(np.arange(size))
    vals.append(diag)
    q = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size))
    return q.tocsr()


def transient_law(gen: sparse.csr_matrix, initial, t: float,
                  tol: float = 1e-10) -> np.ndarray:
    """Probability vector exp(tQ)' delta_initial with truncation tail < tol.

    initial is either a state code or an occupancy vector (whose length
    and the generator size determine the species count unambiguously).
    """
    size = gen.shape[0]
    if np.ndim(initial) == 0:
        idx = int(initial)
    else:
        initial = np.asarray(initial)
        n_species = round(size ** (1.0 / initial.shape[0]))
        idx = int(encode_states(initial, n_species)[0])
    p = np.zeros(size)
    p[idx] = 1.0
    if t == 0.0:
        return p
    lam = float(-gen.diagonal().min())
    if lam <= 0.0:
        return p
    mu = lam * t
    n_terms = int(stats.poisson.isf(tol / 2.0, mu)) + 2
    weights = stats.poisson.pmf(np.arange(n_terms + 1), mu)
    kernel = sparse.eye(size, format="csr") + gen / lam
    out = weights[0] * p
    for k in range(1, n_terms + 1):
        p = p @ kernel
        # uniformization keeps p a probability vector; clip rounding dust
        np.clip(p, 0.0, None, out=p)
        out += weights[k] * p
    return out / out.sum()


def empirical_law(snapshots: np.ndarray, n_species: int) -> np.ndarray:
    """Frequency vector over the full state space from sampled rows."""
    codes = encode_states(snapshots, n_species)
    size = n_species ** snapshots.shape[-1]
    return np.bincount(codes, minlength=size) / codes.shape[0]


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
