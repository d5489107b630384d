import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import ks_2samp

from mc_cache import wigner_edge_samples
from rmtmoments.ensembles import complete, sample_matrix
from rmtmoments.spectra import (
    ConvergenceError,
    EmpiricalMeasure,
    RescaleParams,
    Spectrum,
    cdf,
    compose,
    edge_point_process,
    eigenvalues,
    empirical_measure,
    householder_tridiagonal,
    ks_two_sample,
    largest_eigenvalue,
    rescale,
    sup_cdf_distance,
    tridiagonal_ql_eigenvalues,
    write_measure_csv,
    write_spectrum_csv,
)

METHODS = ["lapack", "ql"]


def _charpoly(a):
    """Exact characteristic polynomial coefficients by cofactor expansion (highest degree first)."""
    n = len(a)

    def det(m):
        # m: matrix of polynomials (coefficient lists, lowest degree first)
        if len(m) == 1:
            return m[0][0]
        total = [Fraction(0)]
        for j in range(len(m)):
            minor = [row[:j] + row[j + 1 :] for row in m[1:]]
            sub = det(minor)
            prod = [Fraction(0)] * (len(m[0][j]) + len(sub) - 1)
            for p, x in enumerate(m[0][j]):
                for q, y in enumerate(sub):
                    prod[p + q] += x * y
            sign = -1 if j % 2 else 1
            size = max(len(total), len(prod))
            total = [(total[i] if i < len(total) else 0) + sign * (prod[i] if i < len(prod) else 0) for i in range(size)]
        return total

    m = [[[Fraction(a[i][j]), Fraction(-1)] if i == j else [Fraction(a[i][j])] for j in range(n)] for i in range(n)]
    return [float(c) for c in reversed(det(m))]


@pytest.mark.parametrize("method", METHODS)
def test_2x2_swap(method):
    assert np.allclose(eigenvalues(np.array([[0.0, 1.0], [1.0, 0.0]]), method).eigenvalues, [1, -1])


@pytest.mark.parametrize("method", METHODS)
def test_k3_adjacency(method):
    a = np.ones((3, 3)) - np.eye(3)
    assert np.allclose(eigenvalues(a, method).eigenvalues, [2, -1, -1], atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("method", METHODS)
def test_random_4x4_against_characteristic_polynomial(seed, method):
    rng = np.random.default_rng(seed)
    b = rng.integers(-5, 6, size=(4, 4))
    a = (b + b.T) / 2
    roots = np.sort(np.roots(_charpoly(a.tolist())).real)[::-1]
    assert np.allclose(eigenvalues(a, method).eigenvalues, roots, atol=1e-8)


def test_complex_embedding_matches_lapack():
    h = sample_matrix(complete(30), "real_gaussian", "complex_gaussian", 4)
    a = eigenvalues(h, "ql").eigenvalues
    b = eigenvalues(h, "lapack").eigenvalues
    assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(b))


def test_ql_iteration_cap_reported():
    d, e = householder_tridiagonal(np.asarray(sample_matrix(complete(40), "real_gaussian", "real_gaussian", 2)))
    with pytest.raises(ConvergenceError):
        tridiagonal_ql_eigenvalues(d, e, max_iter=0)


def test_largest_eigenvalue_matches_full():
    h = sample_matrix(complete(60), "zero", "rademacher", 8)
    assert largest_eigenvalue(h) == pytest.approx(eigenvalues(h).largest, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2**32 - 1), st.booleans())
def test_residual_and_trace_identities(n, seed, cplx):
    h = sample_matrix(complete(n), "real_gaussian", "complex_gaussian" if cplx else "real_gaussian", seed)
    a = np.asarray(h)
    ev = eigenvalues(h, "ql").eigenvalues
    norm = np.linalg.norm(a, 2)
    for lam in ev:
        smin = np.linalg.svd(a - lam * np.eye(n), compute_uv=False)[-1]
        assert smin <= 1e-8 * norm
    assert np.sum(ev) == pytest.approx(np.trace(a).real, rel=1e-10, abs=1e-10 * norm)
    assert np.sum(ev**2) == pytest.approx(np.trace(a @ a).real, rel=1e-10)


def test_spectrum_must_be_descending():
    with pytest.raises(ValueError):
        Spectrum(np.array([1.0, 2.0]))


def test_empirical_measure_scaled():
    mu = empirical_measure(Spectrum(np.array([2.0, -1.0, -1.0])), 2.0)
    assert np.allclose(mu.locations, [-0.5, -0.5, 1.0])
    assert np.allclose(mu.weights, 1 / 3)
    same = empirical_measure(Spectrum(np.array([2.0, -1.0])), 1.0)
    assert np.allclose(same.locations, [-1.0, 2.0])


def test_wigner_atoms_concentrate():
    n = 1000
    scale = 2 * math.sqrt(n - 1)
    for seed in range(20):
        mu = empirical_measure(eigenvalues(sample_matrix(complete(n), "zero", "rademacher", seed)), scale)
        assert mu.locations.min() >= -1.2 and mu.locations.max() <= 1.2


def test_rescale_examples():
    mu = EmpiricalMeasure.point_mass(1.5)
    out = rescale(mu, RescaleParams(1.0, 0.25, 0.5))
    assert out.locations.tolist() == [2.0] and out.weights.tolist() == [2.0]
    ident = rescale(mu, RescaleParams())
    assert ident.locations.tolist() == [1.5] and ident.weights.tolist() == [1.0]
    n = 9
    assert rescale(EmpiricalMeasure.point_mass(2 * math.sqrt(n)), RescaleParams(2 * math.sqrt(n))).locations[0] == 0.0


@given(
    st.lists(st.floats(-10, 10), min_size=1, max_size=8),
    st.tuples(st.floats(-4, 4), st.sampled_from([0.25, 0.5, 2.0, 4.0]), st.sampled_from([0.5, 1.0, 2.0])),
    st.tuples(st.floats(-4, 4), st.sampled_from([0.25, 0.5, 2.0, 4.0]), st.sampled_from([0.5, 1.0, 2.0])),
)
def test_rescale_composes(xs, p1, p2):
    # dyadic scales keep the comparison exact
    mu = EmpiricalMeasure.uniform(xs)
    p1, p2 = RescaleParams(*p1), RescaleParams(*p2)
    two = rescale(rescale(mu, p1), p2)
    one = rescale(mu, compose(p1, p2))
    assert np.allclose(two.locations, one.locations, rtol=1e-12, atol=1e-12)
    assert np.array_equal(two.weights, one.weights)


def test_edge_point_process_examples():
    n = 4
    pp = edge_point_process(Spectrum(np.array([5.0, 2 * math.sqrt(n), 0.0, -1.0])))
    assert pp.locations[-1] == pytest.approx(4 ** (1 / 6))
    assert pp.locations[-2] == 0.0
    assert np.all(pp.weights == 1.0)
    band_pp = edge_point_process(Spectrum(np.array([2 * math.sqrt(6.0)])), "band", w=3)
    assert band_pp.locations[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        edge_point_process(Spectrum(np.array([0.0])), "band")


def test_complex_wigner_largest_atom_mean():
    # regression band for N = 400, 2000 seeds (a beta = 2 edge)
    x = wigner_edge_samples("complex_gaussian")
    assert -2.2 <= x.mean() <= -1.4


def test_cdf_examples():
    d0 = EmpiricalMeasure.point_mass(0.0)
    assert cdf(d0, -1.0) == 0.0 and cdf(d0, 0.0) == 1.0
    assert sup_cdf_distance(d0, d0) == 0.0
    assert sup_cdf_distance(EmpiricalMeasure.uniform([0.0, 1.0]), d0) == 0.5
    with pytest.raises(ValueError):
        cdf(EmpiricalMeasure(np.array([]), np.array([])), 0.0)


measures = st.lists(st.integers(-5, 5), min_size=1, max_size=6).map(lambda v: EmpiricalMeasure.uniform([float(x) for x in v]))


@given(measures, measures, measures)
def test_sup_distance_is_a_metric(a, b, c):
    ab = sup_cdf_distance(a, b)
    assert ab == pytest.approx(sup_cdf_distance(b, a), abs=1e-15)
    assert ab <= sup_cdf_distance(a, c) + sup_cdf_distance(c, b) + 1e-12
    assert sup_cdf_distance(a, a) == 0.0


@pytest.mark.filterwarnings("ignore:divide by zero:RuntimeWarning")  # scipy's p-value for one-point samples
@settings(max_examples=30)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=30), st.lists(st.integers(-20, 20), min_size=1, max_size=30))
def test_ks_matches_scipy(a, b):
    assert ks_two_sample(a, b) == pytest.approx(ks_2samp(a, b, method="asymp").statistic, abs=1e-12)


def test_csv_writers():
    assert write_spectrum_csv(Spectrum(np.array([1.0, 0.5]))).splitlines() == ["index,value", "1,1.0", "2,0.5"]
    assert write_measure_csv(EmpiricalMeasure.point_mass(2.0, 0.5)).splitlines() == ["location,weight", "2.0,0.5"]
