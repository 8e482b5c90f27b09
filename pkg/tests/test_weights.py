"""Weight schemes: construction, parsing, sampling, and exact moments."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gebs import weights as W
from gebs.errors import ParameterError, ParseError, ShapeError, UnsupportedSchemeError


# ---------------------------------------------------------------------------
# Construction and parsing

def test_constructor_validation():
    with pytest.raises(ParameterError):
        W.delete_d_jackknife(5, 5)
    with pytest.raises(ParameterError):
        W.delete_d_jackknife(5, 0)
    with pytest.raises(ParameterError):
        W.dirichlet(5, 0.0)
    with pytest.raises(ParameterError):
        W.iid_uniform(5, 0.5, 0.4)
    with pytest.raises(ParameterError):
        W.iid_uniform(5, 0.3, 1.5)  # lo + hi != 2
    with pytest.raises(ParameterError):
        W.iid_exponential(5, rate=0.0)
    with pytest.raises(ParameterError):
        W.WeightScheme("nope", 5)
    with pytest.raises(ParameterError):
        W.multinomial(0)


def test_parse_scheme_grammar():
    assert W.parse_scheme("multinomial", 7) == W.multinomial(7)
    assert W.parse_scheme("jackknife:d=2", 7) == W.delete_d_jackknife(7, 2)
    assert W.parse_scheme("downweight:d=3", 7) == W.downweight_d_jackknife(7, 3)
    assert W.parse_scheme("dirichlet:alpha=4", 7) == W.dirichlet(7, 4.0)
    assert W.parse_scheme("uniform:0.5,1.5", 7) == W.iid_uniform(7, 0.5, 1.5)
    assert W.parse_scheme("uniform", 7) == W.iid_uniform(7, 0.5, 1.5)
    assert W.parse_scheme("exp", 7) == W.iid_exponential(7, 1.0)
    assert W.parse_scheme("moon:m=3", 7) == W.m_out_of_n(7, 3)
    assert W.parse_scheme("constant", 7) == W.constant(7)


def test_parse_scheme_errors():
    with pytest.raises(ParseError):
        W.parse_scheme("gaussian", 7)
    with pytest.raises(ParseError):
        W.parse_scheme("jackknife:k=2", 7)
    with pytest.raises(ParameterError):
        W.parse_scheme("jackknife:d=9", 7)  # d >= n


def test_labels():
    assert W.multinomial(5).label() == "multinomial"
    assert W.delete_d_jackknife(5, 2).label() == "jackknife(d=2)"


# ---------------------------------------------------------------------------
# Sampling invariants

ALL_SCHEMES = [
    W.multinomial(12),
    W.m_out_of_n(12, 5),
    W.delete_d_jackknife(12, 3),
    W.downweight_d_jackknife(12, 3),
    W.dirichlet(12, 4.0),
    W.iid_uniform(12, 0.5, 1.5),
    W.iid_exponential(12),
    W.constant(12),
]


@pytest.mark.parametrize("scheme", ALL_SCHEMES, ids=lambda s: s.label())
def test_sample_nonnegative_right_length(scheme):
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = W.sample(scheme, rng)
        assert w.shape == (scheme.n,)
        assert np.all(w >= 0)


@pytest.mark.parametrize("scheme", [s for s in ALL_SCHEMES if s.fixed_sum],
                         ids=lambda s: s.label())
def test_fixed_sum_schemes_sum_to_n(scheme):
    rng = np.random.default_rng(1)
    for _ in range(20):
        assert W.sample(scheme, rng).sum() == pytest.approx(scheme.n, abs=1e-9)


def test_jackknife_draw_shape():
    rng = np.random.default_rng(2)
    w = W.sample(W.delete_d_jackknife(10, 3), rng)
    assert np.count_nonzero(w == 0.0) == 3
    assert np.all(w[w > 0] == pytest.approx(10 / 7))


def test_sample_mean_is_one():
    rng = np.random.default_rng(3)
    for scheme in ALL_SCHEMES:
        draws = W.sample_many(scheme, 4000, rng)
        assert draws.mean() == pytest.approx(1.0, abs=0.05)


@given(n=st.integers(2, 30), d_frac=st.floats(0.01, 0.99))
@settings(max_examples=25, deadline=None)
def test_jackknife_weights_always_valid(n, d_frac):
    d = max(1, min(n - 1, int(d_frac * n)))
    scheme = W.delete_d_jackknife(n, d)
    w = W.sample(scheme, np.random.default_rng(0))
    assert w.sum() == pytest.approx(n)
    assert np.count_nonzero(w) == n - d


# ---------------------------------------------------------------------------
# Exact moments vs simulation and enumeration

def test_known_sigma2_values():
    n = 10
    assert W.theoretical_moments(W.multinomial(n)).sigma2 == pytest.approx((n - 1) / n)
    assert W.theoretical_moments(W.delete_d_jackknife(n, 1)).sigma2 == pytest.approx(1 / (n - 1))
    d = 3
    assert W.theoretical_moments(W.delete_d_jackknife(n, d)).sigma2 == pytest.approx(d / (n - d))
    assert W.theoretical_moments(W.iid_uniform(n, 0.5, 1.5)).sigma2 == pytest.approx(1.0 / 12)
    assert W.theoretical_moments(W.iid_exponential(n)).sigma2 == pytest.approx(1.0)
    alpha = 4.0
    # Dirichlet(alpha 1_n) scaled by n: var = n^2 * a(na - a) / ((na)^2 (na+1))
    a, na = alpha, n * alpha
    expect = n * n * (a * (na - a)) / (na * na * (na + 1.0))
    assert W.theoretical_moments(W.dirichlet(n, alpha)).sigma2 == pytest.approx(expect)
    assert W.theoretical_moments(W.constant(n)).sigma2 == 0.0


def test_iid_scheme_moments_factorize():
    mom = W.theoretical_moments(W.iid_exponential(9))
    # standardized exponential: all mixed moments over distinct indices factor
    assert mom.c11 == pytest.approx(0.0, abs=1e-12)
    assert mom.third_order[(2, 1)] == pytest.approx(0.0, abs=1e-12)
    assert mom.third_order[(3,)] == pytest.approx(2.0)  # skewness of Exp(1)
    assert mom.fourth_order[(2, 2)] == pytest.approx(1.0)
    assert mom.fourth_order[(4,)] == pytest.approx(9.0)  # E[(X-1)^4]/var^2 for Exp(1)


@pytest.mark.parametrize("scheme", [
    W.multinomial(6),
    W.m_out_of_n(6, 4),
    W.delete_d_jackknife(6, 2),
    W.downweight_d_jackknife(6, 2),
], ids=lambda s: s.label())
def test_theoretical_moments_match_enumeration(scheme):
    atoms = W.enumerate_support(scheme)
    draws = np.stack([a[0] for a in atoms])
    probs = np.array([a[1] for a in atoms])
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    emp = W.empirical_moments(draws, probs)
    mom = W.theoretical_moments(scheme)
    assert emp.sigma2 == pytest.approx(mom.sigma2, rel=1e-10)
    assert emp.c11 == pytest.approx(mom.c11, abs=1e-10)
    for pat in W.THIRD_ORDER_PATTERNS:
        assert emp.third_order[pat] == pytest.approx(mom.third_order[pat],
                                                     rel=1e-8, abs=1e-8)
    for pat in W.FOURTH_ORDER_PATTERNS:
        assert emp.fourth_order[pat] == pytest.approx(mom.fourth_order[pat],
                                                      rel=1e-8, abs=1e-8)


@pytest.mark.parametrize("scheme", [
    W.dirichlet(8, 2.0),
    W.iid_uniform(8, 0.5, 1.5),
    W.iid_exponential(8),
], ids=lambda s: s.label())
def test_theoretical_moments_match_simulation(scheme):
    draws = W.sample_many(scheme, 60000, np.random.default_rng(7))
    emp = W.empirical_moments(draws)
    mom = W.theoretical_moments(scheme)
    assert emp.sigma2 == pytest.approx(mom.sigma2, rel=0.03)
    assert emp.c11 == pytest.approx(mom.c11, abs=0.05)
    assert emp.third_order[(3,)] == pytest.approx(mom.third_order[(3,)], abs=0.15)
    assert emp.fourth_order[(2, 2)] == pytest.approx(mom.fourth_order[(2, 2)], abs=0.2)


def test_moments_pattern_lookup():
    mom = W.theoretical_moments(W.multinomial(8))
    assert mom.c((1, 1)) == mom.c11
    assert mom.c((1, 2)) == mom.third_order[(2, 1)]
    assert mom.c((2, 2)) == mom.c22
    assert mom.c((4,)) == mom.c4
    with pytest.raises(KeyError):
        mom.c((5,))


def test_raw_moment_pattern_too_long():
    with pytest.raises(ParameterError):
        W.raw_moment(W.multinomial(2), (1, 1, 1))


# ---------------------------------------------------------------------------
# Support enumeration

def test_support_sizes():
    assert W.support_size(W.multinomial(4)) == math.comb(7, 3)
    assert W.support_size(W.delete_d_jackknife(6, 2)) == 15
    assert W.support_size(W.constant(5)) == 1
    assert W.support_size(W.iid_exponential(5)) is None


def test_enumerate_support_rejects_infinite_and_oversized():
    with pytest.raises(UnsupportedSchemeError):
        W.enumerate_support(W.iid_uniform(5, 0.5, 1.5))
    with pytest.raises(UnsupportedSchemeError):
        W.enumerate_support(W.multinomial(30), max_atoms=100)


def test_enumerate_multinomial_probabilities():
    atoms = W.enumerate_support(W.multinomial(3))
    assert len(atoms) == math.comb(5, 2)
    probs = {tuple(w): p for w, p in atoms}
    assert sum(probs.values()) == pytest.approx(1.0)
    assert probs[(3.0, 0.0, 0.0)] == pytest.approx((1 / 3) ** 3)
    assert probs[(1.0, 1.0, 1.0)] == pytest.approx(6 * (1 / 3) ** 3)


def test_empirical_moments_input_validation():
    with pytest.raises(ShapeError):
        W.empirical_moments([[1.0, 1.0], [1.0, 1.0, 1.0]])
    with pytest.raises(ShapeError):
        W.empirical_moments([[1.0, 1.0]])
    with pytest.raises(ShapeError):
        W.empirical_moments(np.ones((4, 3)), probs=np.ones(5))


# ---------------------------------------------------------------------------
# Condition checking

def test_check_conditions_needs_grid():
    with pytest.raises(ParameterError):
        W.check_conditions(W.multinomial, [10, 20])


def test_constant_scheme_fails_basic_condition():
    report = W.check_conditions(W.constant, [10, 20, 40, 80], mc_draws=50)
    assert not report.bw
    assert not report.cltw
    assert not report.vw_a
    assert not report.vw_b
