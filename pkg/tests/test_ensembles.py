import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from rmtmoments.ensembles import (
    ConfigError,
    DistributionKind,
    EntryDistribution,
    GraphError,
    HermitianMatrix,
    Target,
    band,
    complete,
    ensemble_from_config,
    explicit,
    parse_config,
    periodic_distance,
    sample_matrix,
    truncate_matrix,
    write_matrix_csv,
)


def test_band_10_3_degree_and_edges():
    g = band(10, 3)
    assert g.degree == 6
    assert g.has_edge(1, 4)
    assert not g.has_edge(1, 5)
    assert periodic_distance(1, 5, 10) == 4


def test_complete_4():
    g = complete(4)
    assert g.degree == 3
    assert g.edge_count == 6


def test_band_too_wide_rejected():
    with pytest.raises(GraphError):
        band(6, 3)


def test_band_6_3_brute_force_ambiguity():
    # with W = N/2 the antipodal pair is reached both ways round the cycle
    n, w = 6, 3
    ways = [(l, (0 - 3 - l * n)) for l in range(-2, 3) if abs(0 - 3 - l * n) <= w]
    assert len(ways) == 2


def test_explicit_irregular_rejected():
    with pytest.raises(GraphError):
        explicit([[1], [0, 2], [1]])


def test_explicit_cycle_ok():
    g = explicit([[1, 3], [0, 2], [1, 3], [2, 0]])
    assert g.degree == 2
    assert g.edge_count == 4


@given(st.integers(3, 40), st.data())
def test_band_rows_have_2w_neighbours(n, data):
    w = data.draw(st.integers(1, (n - 1) // 2))
    g = band(n, w)
    assert np.all(g.adjacency.sum(axis=1) == 2 * w)
    assert not g.adjacency.diagonal().any()
    assert np.array_equal(g.adjacency, g.adjacency.T)


def test_sample_complete3_rademacher():
    h = sample_matrix(complete(3), "zero", "rademacher", 7)
    a = np.asarray(h)
    assert np.all(np.diag(a) == 0)
    off = a[~np.eye(3, dtype=bool)]
    assert set(np.abs(off)) == {1.0}
    assert np.array_equal(a, a.T)


def test_sample_deterministic():
    g = band(12, 2)
    a = sample_matrix(g, "real_gaussian", "real_gaussian", 99)
    b = sample_matrix(g, "real_gaussian", "real_gaussian", 99)
    assert np.asarray(a).tobytes() == np.asarray(b).tobytes()
    c = sample_matrix(g, "real_gaussian", "real_gaussian", 100)
    assert not np.array_equal(np.asarray(a), np.asarray(c))


def test_band_complex_unimodular_modulus_one():
    g = band(10, 3)
    h = sample_matrix(g, "zero", "complex_unimodular", 3)
    a = np.asarray(h)
    assert np.allclose(np.abs(a[g.adjacency]), 1.0, atol=1e-15)
    assert np.all(a[~g.adjacency] == 0)
    assert np.allclose(a, a.conj().T, atol=0)
    assert h.support_ok()


@pytest.mark.parametrize("kind", ["rademacher", "real_gaussian", "complex_unimodular", "complex_gaussian"])
def test_offdiag_moments(kind):
    d = EntryDistribution(kind)
    x = d.draw(np.random.default_rng(5), 200_000)
    assert abs(np.mean(x)) < 5 / math.sqrt(200_000)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(1.0, abs=0.02)
    assert d.variance == 1.0


def test_complex_on_diagonal_rejected():
    with pytest.raises(ValueError):
        EntryDistribution(DistributionKind.COMPLEX_GAUSSIAN, Target.DIAGONAL)


def test_zero_offdiag_rejected():
    with pytest.raises(ValueError):
        EntryDistribution("zero")


def test_hermitian_lower_derived_from_upper():
    a = np.array([[1.0, 2 + 1j], [5 - 7j, 3.0]])
    h = HermitianMatrix.from_upper(a)
    assert h[1, 0] == 2 - 1j
    with pytest.raises(ValueError):
        np.asarray(h.data)[0, 1] = 0


def test_truncate_infinite_threshold_identity():
    h = sample_matrix(complete(20), "real_gaussian", "real_gaussian", 1)
    t = truncate_matrix(h, math.inf)
    assert t.changed == 0
    assert np.array_equal(np.asarray(t.matrix), np.asarray(h))


def test_truncate_zero_threshold_rademacher():
    h = sample_matrix(complete(20), "zero", "rademacher", 1)
    t = truncate_matrix(h, 0.0)
    assert not np.asarray(t.matrix).any()
    assert t.changed == 20 * 19


def test_truncate_gaussian_fraction():
    n, seeds = 50, 120
    frac = []
    for s in range(seeds):
        h = sample_matrix(complete(n), "zero", "real_gaussian", s)
        frac.append(truncate_matrix(h, 1.0).changed / (n * (n - 1)))
    p = 2 * ndtr(-1.0)
    se = math.sqrt(p * (1 - p) / (seeds * n * (n - 1) / 2))
    assert abs(np.mean(frac) - p) <= 3 * se


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.0, 3.0))
def test_truncation_keeps_hermitian(seed, thr):
    h = sample_matrix(band(15, 4), "real_gaussian", "complex_gaussian", seed)
    a = np.asarray(truncate_matrix(h, thr).matrix)
    assert np.array_equal(a, a.conj().T)
    assert np.all(np.abs(a) <= thr)


def test_parse_config_and_ensemble():
    text = "# demo\nensemble.kind = band\nensemble.n = 10\nensemble.w = 3\noffdiag.kind = complex_unimodular\nseed = 4\n"
    cfg = parse_config(text)
    g, d, o = ensemble_from_config(cfg)
    assert g.degree == 6 and o.kind is DistributionKind.COMPLEX_UNIMODULAR
    assert cfg["seed"] == "4"


def test_parse_config_errors_carry_line_numbers():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("a = 1\nnot a pair\n")
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("a = 1\n\na = 2\n")
    with pytest.raises(ConfigError, match="missing key"):
        ensemble_from_config({"ensemble.kind": "band"})


def test_matrix_csv():
    h = HermitianMatrix.from_upper(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert write_matrix_csv(h).splitlines() == ["row,col,re,im", "0,1,1.0,0.0", "1,0,1.0,0.0"]
