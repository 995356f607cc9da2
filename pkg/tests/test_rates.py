"""Rate-table constructors and their scaling identities."""

import numpy as np
import pytest

from asephydro.rates import RateTable


def test_binary_table_exact_values():
    # lam*N^2 +- mu*N/2 with zero slack, so the entries are pinned exactly
    t = RateTable.binary(lam=2.0, mu=3.0, n_sites=10)
    assert t.rates[1, 0] == 2.0 * 100 + 3.0 * 10 / 2
    assert t.rates[0, 1] == 2.0 * 100 - 3.0 * 10 / 2
    assert t.rates[0, 0] == 0.0 and t.rates[1, 1] == 0.0
    assert t.max_rate == t.rates[1, 0]


def test_binary_mean_is_symmetric_part():
    t = RateTable.binary(lam=0.7, mu=-1.3, n_sites=64)
    assert (t.rates[1, 0] + t.rates[0, 1]) / 2 == pytest.approx(0.7 * 64**2)


def test_binary_negative_rate_guard():
    with pytest.raises(ValueError, match="lam"):
        RateTable.binary(lam=1.0, mu=5.0, n_sites=2)
    # the boundary case is admissible: one direction shuts off exactly
    t = RateTable.binary(lam=1.0, mu=4.0, n_sites=2)
    assert t.rates[0, 1] == 0.0


def test_binary_rejects_nonpositive_lam():
    with pytest.raises(ValueError):
        RateTable.binary(lam=0.0, mu=0.0, n_sites=8)


def test_equidiffusive_log_ratio_is_alpha():
    alpha = np.array([[0.0, 1.5, -0.4],
                      [-1.5, 0.0, 2.0],
                      [0.4, -2.0, 0.0]])
    for n in (8, 64, 1024):
        t = RateTable.equidiffusive(diff=0.9, alpha=alpha, n_sites=n)
        est = t.alpha_estimate(n)
        off = ~np.eye(3, dtype=bool)
        assert np.abs(est[off] - alpha[off]).max() < 1e-9
        mean = (t.rates + t.rates.T) / 2
        target = 0.9 * n * n * np.cosh(alpha / (2 * n))
        assert np.abs(mean[off] - target[off]).max() < 1e-6 * 0.9 * n * n


def test_equidiffusive_validation():
    good = np.array([[0.0, 1.0], [-1.0, 0.0]])
    with pytest.raises(ValueError, match="positive"):
        RateTable.equidiffusive(diff=-1.0, alpha=good, n_sites=8)
    with pytest.raises(ValueError, match="antisymmetric"):
        RateTable.equidiffusive(diff=1.0, alpha=np.ones((2, 2)), n_sites=8)


def test_binary_matches_equidiffusive_to_first_order():
    # alpha[1][0] = mu/lam reproduces the binary asymmetry as N grows
    lam, mu = 1.0, 0.8
    alpha = np.array([[0.0, -mu / lam], [mu / lam, 0.0]])
    for n in (32, 128, 512):
        tb = RateTable.binary(lam, mu, n)
        te = RateTable.equidiffusive(lam, alpha, n)
        rel = np.abs(tb.rates[1, 0] - te.rates[1, 0]) / te.rates[1, 0]
        # exp(x) vs 1+x mismatch is O((mu/(2 lam N))^2)
        assert rel < (mu / (2 * lam * n)) ** 2


def test_abc_preset_layout():
    t = RateTable.abc(1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    assert t.n_species == 3
    assert t.rates[0, 1] == 1.0 and t.rates[1, 0] == 2.0
    assert t.rates[1, 2] == 3.0 and t.rates[2, 1] == 4.0
    assert t.rates[2, 0] == 5.0 and t.rates[0, 2] == 6.0


def test_general_matrix_validation():
    with pytest.raises(ValueError, match="negative rate"):
        RateTable(np.array([[0.0, -1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError, match="square"):
        RateTable(np.zeros((2, 3)))
    # diagonal entries are forced to zero regardless of input
    t = RateTable(np.array([[9.0, 1.0], [2.0, 9.0]]))
    assert t.rates[0, 0] == 0.0 and t.rates[1, 1] == 0.0


def test_alpha_estimate_handles_zero_rates():
    t = RateTable(np.array([[0.0, 0.0], [3.0, 0.0]]))
    est = t.alpha_estimate(16)
    assert np.isnan(est[1, 0]) and np.isnan(est[0, 1])


def test_describe_round_trips_entries():
    t = RateTable.binary(lam=1.0, mu=0.5, n_sites=32)
    meta = t.describe()
    assert float(meta["rate_10"]) == t.rates[1, 0]
    assert meta["macro_kind"] == "binary"
