import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from rmtmoments.ensembles import HermitianMatrix, complete, sample_matrix
from rmtmoments.moments import (
    MomentKind,
    MomentMismatchError,
    MomentTable,
    PolynomialFamily,
    catalan,
    corner_moment_profile,
    erdos_turan_bracket,
    gauss_hermite_measure,
    gaussian_moment,
    hermite_sum_moment,
    krein_transform,
    modified_moment,
    modified_moment_from_raw,
    modified_trace_moment,
    modified_trace_moments,
    raw_moment,
    replicate_mean,
    semicircle_cdf,
    semicircle_moment,
    semicircle_quadrature,
    sonin_bound_check,
    trace_power_moment,
    trace_power_moments,
)
from rmtmoments.spectra import EmpiricalMeasure, eigenvalues, empirical_measure

# Erdos-Turan ratio constants frozen from calibration runs:
#   quadratures with 1e3..1e5 atoms, n0 in {5, 10, 20}, 401-point grid: max ratio 0.0373
#   Rademacher Wigner N = 1000, n0 = 20, seeds 0..99: max ratio 1.68
ET_C_QUADRATURE = 0.04
ET_C_WIGNER = 2.0

K3 = HermitianMatrix.from_upper(np.ones((3, 3)) - np.eye(3))


# ------------------------------------------------------------------ references


def test_reference_values():
    assert semicircle_moment(2) == Fraction(1, 4)
    assert semicircle_moment(4) == Fraction(1, 8)
    assert gaussian_moment(4) == 3
    for f in (semicircle_moment, gaussian_moment):
        assert f(0) == 1 and f(1) == 0
    assert [catalan(j) for j in range(6)] == [1, 1, 2, 5, 14, 42]


@given(st.integers(0, 40))
def test_semicircle_moment_catalan_product_form(m):
    if m % 2 == 0:
        assert 2**m * semicircle_moment(m) == Fraction(2, m + 2) * math.comb(m, m // 2)
    else:
        assert semicircle_moment(m) == 0


def test_semicircle_cdf_endpoints():
    assert semicircle_cdf(-1.0) == 0.0
    assert semicircle_cdf(0.0) == pytest.approx(0.5)
    assert semicircle_cdf(1.0) == pytest.approx(1.0)


# ------------------------------------------------------------------ raw moments


def test_raw_moment_examples():
    d0 = EmpiricalMeasure.point_mass(0.0)
    assert raw_moment(d0, 0) == 1.0
    assert all(raw_moment(d0, m) == 0.0 for m in range(1, 6))
    assert raw_moment(EmpiricalMeasure.uniform([-1.0, 1.0]), 2) == 1.0
    assert raw_moment(semicircle_quadrature(1000), 4) == pytest.approx(0.125, abs=1e-6)


def test_raw_moment_overflow():
    with pytest.raises(OverflowError):
        raw_moment(EmpiricalMeasure.point_mass(1e10), 40)
    with pytest.raises(ValueError):
        raw_moment(EmpiricalMeasure.point_mass(1.0), -1)


def test_moment_table_invariants():
    mu = EmpiricalMeasure.uniform([0.1, -0.4, 0.3], mass=2.0)
    raw = MomentTable(MomentKind.RAW, np.arange(4), np.array([raw_moment(mu, m) for m in range(4)]))
    mod = MomentTable(MomentKind.MODIFIED_CHEBYSHEV, np.arange(4), np.array([modified_moment(mu, n) for n in range(4)]))
    assert raw.values[0] == pytest.approx(2.0) and mod.values[0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        MomentTable(MomentKind.RAW, np.arange(1), np.array([np.inf]))


# ------------------------------------------------------------------ families


def test_recurrences():
    u = PolynomialFamily.chebyshev_u()
    assert u.coefficients(2) == [-1, 0, 4]
    assert u.coefficients(3) == [0, -4, 0, 8]
    he = PolynomialFamily.hermite()
    assert he.coefficients(3) == [0, -3, 0, 1]
    assert he.coefficients(4) == [3, 0, -6, 0, 1]


@pytest.mark.parametrize("kappa", [2, 3, 7, 10**6])
def test_nb_family_definition(kappa):
    u = PolynomialFamily.chebyshev_u()
    p = PolynomialFamily.non_backtracking(kappa)
    for n in range(2, 14):
        un, um = u.coefficients(n), u.coefficients(n - 2) + [0, 0]
        assert p.coefficients(n) == [a - Fraction(b, kappa - 1) for a, b in zip(un, um)]
    assert p.coefficients(0) == [1] and p.coefficients(1) == [0, 2]


def test_nb_family_large_kappa_limit():
    # P_n^(kappa) - U_n = -U_{n-2} / (kappa - 1) vanishes coefficientwise as kappa grows
    u = PolynomialFamily.chebyshev_u()
    p = PolynomialFamily.non_backtracking(10**6)
    for n in range(2, 5):
        err = max(abs(float(a - b)) for a, b in zip(p.coefficients(n), u.coefficients(n)))
        assert err <= 1e-5
    for n in range(5, 13):
        err = max(abs(float(a - b)) for a, b in zip(p.coefficients(n), u.coefficients(n)))
        bound = max(abs(c) for c in u.coefficients(n - 2)) / (10**6 - 1)
        assert err <= float(bound) * (1 + 1e-12)


def test_chebyshev_orthonormality():
    q = semicircle_quadrature(20)
    vals = PolynomialFamily.chebyshev_u().evaluate_all(q.locations, 12)
    gram = (vals * q.weights) @ vals.T
    assert np.max(np.abs(gram - np.eye(13))) <= 1e-10


def test_evaluate_matches_coefficients():
    x = np.linspace(-1.2, 1.2, 7)
    for fam in (PolynomialFamily.chebyshev_u(), PolynomialFamily.non_backtracking(5), PolynomialFamily.hermite()):
        for n in range(10):
            c = [float(v) for v in fam.coefficients(n)]
            assert np.allclose(fam.evaluate(x, n), np.polynomial.polynomial.polyval(x, c), atol=1e-9)


# ------------------------------------------------------------------ matrix moments


def test_trace_power_k3():
    assert trace_power_moment(K3, 2, 0) == 1.0
    assert trace_power_moment(K3, 2, 1) == 0.0
    assert trace_power_moment(K3, 2, 2) == pytest.approx(0.5, abs=1e-15)


def test_modified_trace_k3():
    nb = PolynomialFamily.non_backtracking(2)
    assert modified_trace_moment(K3, 2, nb, 0) == 1.0
    assert modified_trace_moment(K3, 2, nb, 2) == pytest.approx(0.0, abs=1e-15)
    assert modified_trace_moment(K3, 2, nb, 3) == pytest.approx(2.0, abs=1e-14)


def test_modified_trace_family_must_match_kappa():
    with pytest.raises(ValueError):
        modified_trace_moments(K3, 2, PolynomialFamily.non_backtracking(3), 2)


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 30), st.integers(0, 2**32 - 1), st.booleans())
def test_trace_moments_agree_with_spectrum(n, seed, cplx):
    g = complete(n)
    h = sample_matrix(g, "real_gaussian", "complex_gaussian" if cplx else "rademacher", seed)
    mu = empirical_measure(eigenvalues(h), 2 * math.sqrt(g.degree - 1))
    tm = trace_power_moments(h, g.degree, 10)
    for m in range(11):
        assert tm[m] == pytest.approx(raw_moment(mu, m), abs=1e-9, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 30), st.integers(0, 2**32 - 1))
def test_modified_moment_two_paths(n, seed):
    # matrix recurrence versus monomial expansion over raw moments
    g = complete(n)
    h = sample_matrix(g, "real_gaussian", "real_gaussian", seed)
    mu = empirical_measure(eigenvalues(h), 2 * math.sqrt(g.degree - 1))
    u = PolynomialFamily.chebyshev_u()
    rec = modified_trace_moments(h, g.degree, u, 12)
    for k in range(13):
        assert rec[k] == pytest.approx(modified_moment_from_raw(mu, k, u), abs=1e-8)
        assert rec[k] == pytest.approx(modified_moment(mu, k, u), abs=1e-8)


@given(st.lists(st.floats(-1.1, 1.1), min_size=1, max_size=10), st.integers(0, 12))
def test_modified_moment_two_paths_on_measures(xs, n):
    mu = EmpiricalMeasure.uniform(xs)
    assert modified_moment(mu, n) == pytest.approx(modified_moment_from_raw(mu, n), abs=1e-8)


def test_replicate_mean_is_thread_independent():
    def f(seed):
        return np.random.default_rng(seed).normal(size=3)

    a = replicate_mean(f, 16, 5, threads=1)
    b = replicate_mean(f, 16, 5, threads=4)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.stderr, b.stderr)


# ------------------------------------------------------------------ Hermite sums


def test_hermite_sum_examples():
    rng = np.random.default_rng(11)
    assert hermite_sum_moment(rng.normal(size=10), 0) == 1.0
    g = rng.normal(size=100_000)
    he3 = (g**3 - 3 * g) / math.sqrt(6)
    assert abs(hermite_sum_moment(g, 3)) <= 3 * he3.std() / math.sqrt(g.size)
    n = 100
    s = (2.0 * rng.binomial(n, 0.5, size=100_000) - n) / math.sqrt(n)
    he2 = (s**2 - 1) / math.sqrt(2)
    assert abs(hermite_sum_moment(s, 2)) <= 3 * he2.std() / math.sqrt(s.size)


# ------------------------------------------------------------------ Sonin


def test_sonin_two_point():
    mu = gauss_hermite_measure(2)
    assert np.allclose(mu.locations, [-1, 1]) and np.allclose(mu.weights, 0.5)
    rep = sonin_bound_check(mu, 3)
    assert rep.matched_up_to == 3
    assert rep.observed == pytest.approx(0.5 - ndtr(-1.0), abs=1e-12)
    assert rep.observed == pytest.approx(0.3413, abs=1e-4)
    assert rep.bound == pytest.approx(math.sqrt(math.pi / 2))
    assert rep.holds


def test_sonin_fine_gaussian():
    x = np.linspace(-12, 12, 200_001)
    w = np.exp(-x * x / 2)
    mu = EmpiricalMeasure(x, w / w.sum())
    rep = sonin_bound_check(mu, 8, rtol=1e-6)
    assert rep.observed < 1e-4 and rep.holds


def test_sonin_mismatch():
    with pytest.raises(MomentMismatchError) as err:
        sonin_bound_check(EmpiricalMeasure.point_mass(0.0), 2)
    assert err.value.order == 2


# ------------------------------------------------------------------ Erdos-Turan


def test_et_rho_formula():
    mu = semicircle_quadrature(50)
    assert erdos_turan_bracket(mu, 0.0, 10).rho == 1.0
    assert erdos_turan_bracket(mu, 1.0, 10).rho == pytest.approx(0.01)
    assert erdos_turan_bracket(mu, 0.5, 10).rho == 0.5


def test_et_quadrature_discrepancy_small():
    mu = semicircle_quadrature(5000)
    r = erdos_turan_bracket(mu, np.linspace(-1, 1, 101), 10)
    assert np.max(r.discrepancy) < 1e-3
    assert np.all(r.discrepancy <= ET_C_QUADRATURE * r.bracket)


def test_et_wigner_ratio_below_calibrated_constant():
    n = 1000
    xi = np.linspace(-1, 1, 401)
    h = sample_matrix(complete(n), "zero", "rademacher", 2024)
    mu = EmpiricalMeasure.uniform(eigenvalues(h).eigenvalues / (2 * math.sqrt(n - 1)))
    r = erdos_turan_bracket(mu, xi, 20)
    assert np.max(r.ratio) <= ET_C_WIGNER


# ------------------------------------------------------------------ corners and Krein


def test_corner_profile_trivial():
    alphas = np.array([0.5, 1.0, 2.0, 5.0])
    assert np.all(corner_moment_profile(EmpiricalMeasure.point_mass(1.0), 1.0, 0.1, alphas) == 1.0)
    assert np.all(corner_moment_profile(EmpiricalMeasure.point_mass(0.0), 1.0, 0.1, alphas) == 0.0)


def test_corner_profile_parity():
    mu = EmpiricalMeasure.uniform([-1.0, 1.0])
    assert np.allclose(corner_moment_profile(mu, 1.0, 0.1, [1.0, 2.0], parity="even"), 1.0)
    assert np.allclose(corner_moment_profile(mu, 1.0, 0.1, [1.0, 2.0], parity="odd"), 0.0)
    one_edge = EmpiricalMeasure.point_mass(-1.0)
    assert np.allclose(corner_moment_profile(one_edge, 1.0, 0.1, [1.0], parity="odd"), -1.0)


def test_corner_profile_wigner_decreasing():
    n = 800
    h = sample_matrix(complete(n), "zero", "rademacher", 3)
    mu = empirical_measure(eigenvalues(h), 2 * math.sqrt(n - 1))
    eta = n ** (-1 / 3)
    alphas = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    eps = raw_moment(mu, 2 * int(round(alphas[0] / eta / 2)))
    prof = corner_moment_profile(mu, eps, eta, alphas)
    assert prof[0] == pytest.approx(1.0)
    assert np.all(np.diff(prof) < 0)


def test_krein_examples():
    alpha = 1.3
    assert krein_transform(EmpiricalMeasure.point_mass(0.0), alpha, 1.0).value == alpha
    v = krein_transform(EmpiricalMeasure.point_mass(-math.pi**2 / alpha**2), alpha, 10.0)
    assert v.value == pytest.approx(0.0, abs=1e-15) and v.window == 10.0
    assert krein_transform(EmpiricalMeasure.point_mass(1.0), 1.0, 2.0).value == pytest.approx(math.sinh(1.0))
    # atoms outside the window are dropped
    assert krein_transform(EmpiricalMeasure.point_mass(5.0), 1.0, 2.0).value == 0.0
