"""Rescaled Wick powers: exact errors, certificates, and limit laws."""

import math

import numpy as np
import pytest

from wickchaos import (
    ZeroMeanError,
    constant,
    convergence_error,
    convergence_report,
    exp_vector,
    inner_product,
    limit_distribution_test,
    make_expansion,
    max_coeff_deviation,
    min_chaos_order,
    multi_indexes_of_degree,
    proof_bound,
    proof_bound_factors,
    rescaled_wick_power,
    univariate,
    wick_power,
    write_convergence_csv,
)

X11 = univariate([1.0, 1.0])  # 1 + He1


def _series_tail(hsq, start):
    return math.fsum(hsq**k / math.factorial(k) for k in range(start, start + 80))


# ---------------------------------------------------------------------------
# Rescaling
# ---------------------------------------------------------------------------


def test_rescaled_power_n1_normalizes():
    x = univariate([2.0, 1.0])
    r = rescaled_wick_power(x, 1)
    assert max_coeff_deviation(r, univariate([1.0, 0.5])) == 0.0


def test_rescaled_power_hand_coefficients():
    r = rescaled_wick_power(X11, 2)
    assert [c for _, c in r.terms()] == [1.0, 1.0, 0.25]


def test_rescaled_power_binomial_limit():
    # coefficient C(n,k) (c/n)^k approaches c^k/k!, the exponential
    # coefficients; the relative gap is ~ k(k-1)/2n
    c = 0.7
    x = univariate([1.0, c])
    for k in range(2, 5):
        prev = None
        for n in (512, 4096):
            ratio = rescaled_wick_power(x, n).coeff((k,)) / (c**k / math.factorial(k))
            assert abs(ratio - 1.0) < k * (k - 1) / n
            if prev is not None:
                assert abs(ratio - 1.0) < prev
            prev = abs(ratio - 1.0)


def test_rescaled_power_scale_invariance():
    x = univariate([0.8, 0.4, -0.2])
    for lam in (2.0, -0.3):
        for n in (3, 8):
            a = rescaled_wick_power(x, n)
            b = rescaled_wick_power(lam * x, n)
            scale = max(1.0, float(np.max(np.abs(a.coeffs))))
            assert max_coeff_deviation(a, b) / scale <= 1e-12


def test_zero_mean_is_rejected():
    z = univariate([0.0, 1.0, 0.5])
    for fn in (
        lambda: rescaled_wick_power(z, 4),
        lambda: convergence_error(z, 4),
        lambda: proof_bound(z, 4),
        lambda: limit_distribution_test(z, 4, 2000, 1),
    ):
        with pytest.raises(ZeroMeanError):
            fn()
    with pytest.raises(ZeroMeanError):
        rescaled_wick_power(univariate([1e-13, 1.0]), 2)


# ---------------------------------------------------------------------------
# Exact convergence error
# ---------------------------------------------------------------------------


def test_convergence_error_n2_closed_form():
    # 2!(1/4 - 1/2)^2 plus the exponential tail past degree 2
    expected = math.sqrt(0.125 + _series_tail(1.0, 3))
    assert convergence_error(X11, 2) == pytest.approx(expected, abs=1e-12)
    assert convergence_error(X11, 2) == pytest.approx(0.5859, abs=1e-4)


def test_convergence_error_strictly_decreasing():
    errors = [convergence_error(X11, 2**k) for k in range(1, 10)]
    assert all(a > b for a, b in zip(errors, errors[1:]))


def test_convergence_error_zero_first_kernel_family():
    # mean 1, h1 = 0: the limit is the constant 1
    x = univariate([1.0, 0.0, 1.0])
    errors = [convergence_error(x, n) for n in (2, 8, 32, 128)]
    assert all(a > b for a, b in zip(errors, errors[1:]))
    assert errors[-1] < 0.02
    # independent leading-order check: error ~ sqrt(2)/n from the degree-2 term
    assert errors[-1] == pytest.approx(math.sqrt(2.0) / 128, rel=0.05)


def test_convergence_error_exponential_fixed_point():
    # truncated exponential vectors reproduce themselves: error decays much
    # faster than for generic inputs
    e6 = exp_vector([0.6], 6).expansion
    assert convergence_error(e6, 8) < 1e-6
    assert convergence_error(e6, 8) < convergence_error(univariate([1.0, 0.6]), 8) / 1e4


def test_convergence_error_of_constant_is_zero():
    assert convergence_error(constant(1, 3.0), 5) == 0.0


def test_convergence_error_multivariate_matches_univariate():
    # a 2-d copy of the 1-d family embedded on the first coordinate
    x2 = make_expansion(2, [((0, 0), 1.0), ((1, 0), 1.0)])
    assert convergence_error(x2, 4) == pytest.approx(convergence_error(X11, 4), rel=1e-12)


# ---------------------------------------------------------------------------
# Certificate factors
# ---------------------------------------------------------------------------


def test_proof_bound_hand_factors_n2():
    f = proof_bound_factors(X11, 2)
    assert f.middle == pytest.approx(math.sqrt(math.exp(0.5) - 1.5), rel=1e-13)
    assert f.gamma_norm == pytest.approx(math.sqrt(1.5), rel=1e-14)
    assert f.geometric_sum == pytest.approx(1.0 + math.sqrt(1.5), rel=1e-13)
    assert f.prefactor == pytest.approx(math.e, rel=1e-15)
    assert f.bound == pytest.approx(math.e * f.middle * f.geometric_sum, rel=1e-14)
    assert convergence_error(X11, 2) <= f.bound * (1 + 1e-8)


def test_gamma_norm_power_approaches_exponential():
    f = proof_bound_factors(X11, 1024)
    assert abs(f.gamma_norm_pow / math.e - 1.0) < 0.01
    y = univariate([1.0, 0.5, 0.25])
    f = proof_bound_factors(y, 1024)
    assert abs(f.gamma_norm_pow / math.exp(0.25) - 1.0) < 0.01


def test_middle_factor_quadratic_decay():
    y = univariate([1.0, 0.5, 0.25])
    for n in (64, 128):
        ratio = proof_bound_factors(y, n).middle / proof_bound_factors(y, 2 * n).middle
        assert abs(ratio - 4.0) < 0.4


def test_degenerate_geometric_sum_for_constant_input():
    f = proof_bound_factors(constant(1, 2.0), 8)
    assert f.gamma_norm == 1.0
    assert f.geometric_sum == 8.0
    assert f.middle == 0.0
    assert f.bound == 0.0


def test_bound_dominates_error_randomized():
    rng = np.random.default_rng(15)
    for _ in range(25):
        dim = int(rng.integers(1, 3))
        pool = [a for k in range(1, 3) for a in multi_indexes_of_degree(dim, k)]
        picks = rng.choice(len(pool), size=min(3, len(pool)), replace=False)
        entries = {pool[int(i)]: float(rng.uniform(-1, 1)) for i in picks}
        entries[(0,) * dim] = float(rng.uniform(0.3, 1.0))
        x = make_expansion(dim, entries)
        for n in (2, 4, 8, 16):
            assert convergence_error(x, n) <= proof_bound(x, n) * (1 + 1e-8)


def test_proof_bound_requires_n_at_least_two():
    with pytest.raises(ValueError, match="n >= 2"):
        proof_bound(X11, 1)


# ---------------------------------------------------------------------------
# Zero-mean degeneracy
# ---------------------------------------------------------------------------


def test_min_chaos_order_examples():
    he1 = univariate([0.0, 1.0])
    assert min_chaos_order(he1, 5) == 5
    assert min_chaos_order(univariate([0.0, 1.0, 1.0]), 3) == 3
    assert min_chaos_order(univariate([1.0, 0.7]), 9) == 0
    empty = univariate([1.0]) - univariate([1.0])
    assert min_chaos_order(empty, 2) is None


def test_zero_mean_low_order_projections_vanish_exactly():
    rng = np.random.default_rng(19)
    for _ in range(30):
        dim = int(rng.integers(1, 4))
        pool = [a for k in range(1, 4) for a in multi_indexes_of_degree(dim, k)]
        picks = rng.choice(len(pool), size=min(4, len(pool)), replace=False)
        x = make_expansion(dim, {pool[int(i)]: float(rng.uniform(-1, 1)) for i in picks})
        n = int(rng.integers(2, 9))
        w = wick_power(x, n)
        assert min_chaos_order(x, n) >= n
        # orthogonality against every lower-degree polynomial, exactly
        low = make_expansion(
            dim, {a: float(rng.uniform(-1, 1)) for k in range(n) for a in multi_indexes_of_degree(dim, k)}
        )
        assert inner_product(w, low) == 0.0


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def test_convergence_report_schedule_and_rate():
    rep = convergence_report(X11, n_max=64)
    assert [e.n for e in rep.entries] == [2, 4, 8, 16, 32, 64]
    assert all(e.error <= e.bound * (1 + 1e-8) for e in rep.entries)
    assert all(a.error > b.error for a, b in zip(rep.entries, rep.entries[1:]))
    assert rep.input_hash
    y = univariate([1.0, 0.5, 0.25])
    rep = convergence_report(y, ns=[8 * 2**k for k in range(7)])
    assert -1.3 <= rep.fitted_rate <= -0.7


def test_convergence_report_rejects_small_n():
    with pytest.raises(ValueError, match=">= 2"):
        convergence_report(X11, ns=[1, 2])


def test_convergence_csv_round_trip(tmp_path):
    rep = convergence_report(X11, n_max=16)
    path = tmp_path / "report.csv"
    write_convergence_csv(rep, path, tool_version="0.1.0")
    write_convergence_csv(rep, tmp_path / "again.csv", tool_version="0.1.0")
    assert path.read_bytes() == (tmp_path / "again.csv").read_bytes()
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "n,error,bound,norm_gamma,rate_running"
    rows = [line.split(",") for line in lines[1:]]
    assert [int(r[0]) for r in rows] == [2, 4, 8, 16]
    assert rows[0][4] == "nan"
    for row, entry in zip(rows, rep.entries):
        assert float(row[1]) == entry.error
        assert float(row[2]) == entry.bound
        assert float(row[3]) == entry.norm_gamma


# ---------------------------------------------------------------------------
# Limit distribution sampling
# ---------------------------------------------------------------------------


def test_limit_distribution_lognormal_family():
    rep = limit_distribution_test(univariate([1.0, 0.5]), 32, 20000, seed=2)
    assert rep.target_mu == -0.125
    assert rep.target_sigma_sq == 0.25
    assert rep.ks_lognormal is not None and rep.ks_lognormal < 0.05
    assert rep.ks_log_normal is not None and rep.ks_log_normal < 0.05
    assert 0.0 <= rep.frac_nonpositive < 0.05
    assert rep.concentration_at_one is None


def test_limit_distribution_degenerate_point_mass():
    rep = limit_distribution_test(constant(1, 1.0), 8, 2000, seed=3)
    assert rep.ks_lognormal is None and rep.ks_log_normal is None
    assert rep.concentration_at_one == 1.0
    rep = limit_distribution_test(univariate([1.0, 0.0, 0.5]), 16, 2000, seed=4)
    assert rep.ks_lognormal is None
    assert 0.0 <= rep.concentration_at_one <= 1.0


def test_limit_distribution_nonnegative_square_family():
    from wickchaos import pointwise_product

    g = univariate([1.0, 0.3])
    x = pointwise_product(g, g)
    rep = limit_distribution_test(x, 32, 20000, seed=5)
    assert rep.frac_nonpositive < 0.01
    assert rep.ks_log_normal < 0.05


def test_limit_distribution_warns_below_minimum():
    with pytest.warns(UserWarning, match="minimum"):
        limit_distribution_test(univariate([1.0, 0.5]), 4, 10, seed=1)


def test_limit_distribution_sample_determinism():
    a = limit_distribution_test(univariate([1.0, 0.5]), 16, 5000, seed=11)
    b = limit_distribution_test(univariate([1.0, 0.5]), 16, 5000, seed=11)
    assert np.array_equal(a.batch.values, b.batch.values)
    assert a.ks_lognormal == b.ks_lognormal
