import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radonlike.bilinear import BilinearMap, complex_multiplication, product_type, zero_map
from radonlike.curvature import SearchConfig
from radonlike.errors import DomainError, FitError, HypothesisError
from radonlike.sublevel import (
    det_multiaffine,
    double_integral_check,
    eval_F,
    f_lower_bound,
    fit_exponent,
    integral_F,
    log_F,
    multiaffine,
    perturbation_experiment,
    q_reference,
    rearrangement_check,
    sublevel_measure,
    sublevel_profile,
    tchebyshev_constant,
)

XT = BilinearMap(np.ones((1, 1, 1)))

# Frozen outputs of independent oracles (closed forms checked by quadrature).
PRODUCT_MEASURE = {  # 4 eps (1 + ln 1/eps)
    1e-1: 1.3210340371976184,
    1e-2: 0.22420680743952368,
    1e-3: 0.03163102111592855,
    1e-4: 0.004084136148790473,
}
PRODUCT_LS_SLOPE = 0.8424281930071138  # slope of the closed form over 25 log-spaced eps in [1e-4, 1e-1]
COMPLEX_INTEGRAL_F = 0.95081388274672  # radial quadrature, n = 2
REARRANGE_LHS = 0.969463606283417  # phi = u1 u2 + 1/2 on [-1, 1]^2, F with n = 2
REARRANGE_RHS = 4 / 3


# ---------------------------------------------------------------- measures


@pytest.mark.parametrize("eps", sorted(PRODUCT_MEASURE))
def test_product_measure_oracle(eps):
    m, ci = sublevel_measure(product_type(2), eps, 400_000, seed=11)
    assert abs(m - PRODUCT_MEASURE[eps]) <= ci


@pytest.mark.parametrize("eps", [0.05, 0.3, 1.0])
def test_complex_measure_is_disc_area(eps):
    m, ci = sublevel_measure(complex_multiplication(), eps, 400_000, seed=12)
    assert abs(m - math.pi * eps) <= ci


def test_xt_measure():
    # |{t in [-1,1] : |t| <= eps}| = 2 eps
    for eps in (0.01, 0.2):
        m, ci = sublevel_measure(XT, eps, 200_000, seed=3)
        assert abs(m - 2 * eps) <= ci


def test_profile_is_monotone_and_scales_exactly():
    eps = np.logspace(-4, 0, 9)
    Q = BilinearMap(np.random.default_rng(5).uniform(-1, 1, (2, 2, 2)))
    prof = sublevel_profile(Q, eps, 50_000, seed=4)
    assert list(prof.eps) == sorted(prof.eps, reverse=True)
    assert all(a >= b for a, b in zip(prof.hits, prof.hits[1:]))
    # det(2 N) = 4 det N, and the same points are thresholded
    scaled = sublevel_profile(BilinearMap(2 * Q.as_float()), 4 * eps, 50_000, seed=4)
    assert scaled.hits == prof.hits and scaled.measure == prof.measure


def test_workers_do_not_change_profiles():
    eps = np.logspace(-3, 0, 6)
    one = sublevel_profile(product_type(2), eps, 200_000, seed=9, workers=1)
    many = sublevel_profile(product_type(2), eps, 200_000, seed=9, workers=3)
    assert one == many


def test_profile_preconditions():
    with pytest.raises(DomainError):
        sublevel_profile(product_type(2), [0.1, 0.2, 0.3], 10_000)
    with pytest.raises(DomainError):
        sublevel_measure(product_type(2), 0.1, samples=10)
    with pytest.raises(DomainError):
        sublevel_measure(BilinearMap(np.zeros((1, 2, 2))), 0.1)
    assert q_reference(product_type(2)) == q_reference(product_type(2))
    assert q_reference(product_type(2)) != q_reference(complex_multiplication())


# --------------------------------------------------------------------- fits


def test_complex_fit_is_linear():
    prof = sublevel_profile(complex_multiplication(), np.logspace(-3, -0.5, 11), 1_000_000, seed=1)
    fit = fit_exponent(prof, thetas=(0.5, 0.9))
    assert abs(fit.theta_hat - 1.0) <= 0.05
    assert set(fit.c_theta) == {0.5, 0.9} and all(math.isfinite(v) for v in fit.c_theta.values())


def test_product_fit_matches_closed_form_slope():
    prof = sublevel_profile(product_type(2), np.logspace(-4, -1, 25), 1_000_000, seed=2)
    fit = fit_exponent(prof)
    assert fit.points == 25
    assert abs(fit.theta_hat - PRODUCT_LS_SLOPE) <= 0.03


def test_zero_map_has_flat_profile():
    prof = sublevel_profile(zero_map(2), np.logspace(-3, 0, 5), 10_000)
    fit = fit_exponent(prof, thetas=(0.5,))
    assert fit.theta_hat == 0.0 and fit.notes == ("every point saturated",)
    assert fit.c_theta[0.5] == pytest.approx(4.0 / 1e-3**0.5)


def test_fit_needs_usable_points():
    prof = sublevel_profile(product_type(2), [1e-9, 1e-8, 1e-7, 1e-6], 10_000)
    with pytest.raises(FitError):
        fit_exponent(prof)
    with pytest.raises(DomainError):
        fit_exponent(prof, thetas=(1.0,))


# ----------------------------------------------------------------- F values


def test_F_values():
    assert eval_F(1.0, 1) == pytest.approx(1 / 3, rel=1e-12)
    assert eval_F(math.e, 1) == pytest.approx(1 - 2 / math.e, rel=1e-10)
    assert eval_F(1.0, 2) == pytest.approx(0.2, rel=1e-12)
    assert eval_F(-1.0, 2) == eval_F(1.0, 2)
    assert eval_F(0.0, 1) == math.inf


def test_log_F_branches_agree_and_extend():
    import mpmath as mp

    for b in (0.5, 0.999, 1.0, 1.001, 3.0, 40.0):
        k = 3
        ref = mp.log(mp.quad(lambda r: r ** (k - 1) * mp.e ** (b * (1 - r)), [0, 1]))
        assert float(log_F(b, 1)) == pytest.approx(float(ref), rel=1e-10)
    huge = float(log_F(1e300, 2))
    assert math.isfinite(huge) and huge > 1e299


@given(st.floats(-6, 3), st.floats(0.01, 0.99), st.integers(1, 4))
def test_lower_bound_below_F(log10_s, theta, n):
    s = 10.0**log10_s
    assert f_lower_bound(theta, s, n) <= eval_F(s, n) * (1 + 1e-12)


@given(st.floats(-6, 3), st.floats(0.01, 2.0), st.integers(1, 4))
def test_F_decreasing(log10_s, factor, n):
    s = 10.0**log10_s
    assert eval_F(s * (1 + factor), n) <= eval_F(s, n)


def test_bound_and_constant_formulas():
    assert f_lower_bound(0.5, 1.0, 1) == pytest.approx(0.125 / 3)
    assert f_lower_bound(0.5, 4.0, 1) == pytest.approx(0.125 / 3 / 2)
    assert tchebyshev_constant(1.0, 0.5, 1) == pytest.approx(24.0)
    assert tchebyshev_constant(1.0, 0.1, 1) == pytest.approx(3 / 0.271, rel=1e-3)
    for bad in (0.0, 1.0):
        with pytest.raises(DomainError):
            f_lower_bound(bad, 1.0, 1)
    with pytest.raises(DomainError):
        tchebyshev_constant(math.inf, 0.5, 1)


# ---------------------------------------------------------------- integrals


def test_integral_F_xt_is_one():
    r = integral_F(XT, 400_000, seed=1)
    assert r.finite and abs(r.estimate - 1.0) <= r.ci_halfwidth


def test_integral_F_complex_oracle():
    r = integral_F(complex_multiplication(), 400_000, seed=2)
    assert r.finite and abs(r.estimate - COMPLEX_INTEGRAL_F) <= r.ci_halfwidth
    # below: F(1, 2) times the measure of {|det| <= 1} = pi
    assert r.estimate >= 0.2 * math.pi


def test_integral_F_zero_map_diverges():
    r = integral_F(zero_map(1), 10_000)
    assert not r.finite and r.estimate == math.inf


def test_tchebyshev_dominates_profile():
    integral = integral_F(XT, 200_000, seed=5)
    prof = sublevel_profile(XT, np.logspace(-5, 0, 11), 200_000, seed=6)
    for theta in (0.3, 0.5, 0.9):
        c = tchebyshev_constant(integral.estimate + integral.ci_halfwidth, theta, 1)
        for eps, m, ci in zip(prof.eps, prof.measure, prof.ci_halfwidth):
            assert m <= c * eps**theta + ci


@pytest.mark.parametrize("n,expected", [(1, 4.0), (2, 16.0)])
def test_double_integral_equality_at_zero(n, expected):
    r = double_integral_check(zero_map(n), 400_000, seed=3)
    assert r.passed and abs(r.estimate - expected) <= r.ci_halfwidth


@settings(max_examples=8)
@given(arrays(float, (2, 2, 2), elements=st.floats(-2, 2)))
def test_double_integral_bound_holds(c):
    r = double_integral_check(BilinearMap(c), 50_000, seed=7)
    assert r.bound == 16.0 and r.passed


def test_double_integral_complex():
    assert double_integral_check(complex_multiplication(), 200_000, seed=8).passed


# ------------------------------------------------------------ rearrangement


def test_rearrangement_quadrature_oracle():
    r = rearrangement_check({(1, 1): 1.0, (0, 0): 0.5}, [1, 1], 2, 400_000, seed=1)
    assert r.passed and not r.equality
    assert r.lhs == pytest.approx(REARRANGE_LHS, rel=0.02)
    assert r.rhs == pytest.approx(REARRANGE_RHS, rel=0.02)


def test_rearrangement_equality_when_extremal():
    r = rearrangement_check({(1, 1): 1.0}, [1, 1], 2, 50_000, seed=2)
    assert r.passed and r.equality and r.lhs == r.rhs


def test_rearrangement_hypothesis():
    with pytest.raises(HypothesisError):
        rearrangement_check({(2, 0): 1.0, (1, 1): 1.0}, [1, 1], 2)
    with pytest.raises(HypothesisError):
        multiaffine({(0, 2): 1.0})
    with pytest.raises(DomainError):
        rearrangement_check({(1, 1): 1.0}, [1], 2)


def test_rearrangement_without_leading_term_passes():
    # rhs = int F(0) = inf
    r = rearrangement_check({(1, 0): 1.0, (0, 1): 1.0}, [1, 1], 2, 10_000)
    assert r.passed and r.rhs == math.inf


@settings(max_examples=15)
@given(arrays(float, 4, elements=st.floats(-2, 2)), st.floats(0.2, 2), st.floats(0.2, 2))
def test_rearrangement_holds_on_boxes(c, a, b):
    phi = {(0, 0): c[0], (1, 0): c[1], (0, 1): c[2], (1, 1): c[3]}
    assert rearrangement_check(phi, [a, b], 2, 20_000, seed=4).passed


def test_det_multiaffine_is_multiaffine():
    Q = BilinearMap(np.random.default_rng(3).uniform(-1, 1, (2, 2, 2)))
    t = np.array([0.3, -0.7])
    terms = det_multiaffine(Q, t)
    assert all(max(e) <= 1 for e in terms)
    u = np.array([0.2, 0.5])
    direct = np.linalg.det(np.einsum("ijk,k->ij", Q.as_float(), t) + np.diag(u * t))
    assert sum(c * np.prod(u ** np.array(e)) for e, c in terms.items()) == pytest.approx(direct)


# ------------------------------------------------------------- perturbation


FAST = SearchConfig(seeds_per_dim=256, iterations=40)
SMALL_GRID = np.logspace(-8, 0, 33)


def test_perturbation_product_type_small():
    rep = perturbation_experiment(
        product_type(2), trials=4, eps_grid=SMALL_GRID, samples=1 << 20, max_fraction=0.05, search=FAST
    )
    assert rep.nondegenerate_fraction == 0.0
    assert all(r.verdict == "degenerate" for r in rep.records)
    # det = (1 + u1)(1 + u2) t1 t2: each trial fits the product slope
    assert all(abs(r.theta_hat - 0.84) < 0.1 for r in rep.records)


def test_perturbation_complex_stays_good():
    rep = perturbation_experiment(
        complex_multiplication(), trials=5, radius=0.1, eps_grid=SMALL_GRID, samples=1 << 20,
        max_fraction=0.05, search=FAST,
    )
    assert rep.good_theta_fraction == 1.0 and rep.nondegenerate_fraction == 1.0


def test_perturbation_records_are_prefix_stable():
    kw = dict(eps_grid=SMALL_GRID, samples=1 << 16, max_fraction=0.05, search=FAST, seed=3)
    short = perturbation_experiment(product_type(2), trials=2, **kw)
    longer = perturbation_experiment(product_type(2), trials=3, **kw)
    assert short.records == longer.records[:2]


def test_perturbation_empty_and_invalid():
    rep = perturbation_experiment(product_type(2), trials=0)
    assert rep.records == () and rep.good_theta_fraction is None and rep.nondegenerate_fraction is None
    with pytest.raises(DomainError):
        perturbation_experiment(product_type(2), trials=1, radius=0.0)
    with pytest.raises(DomainError):
        perturbation_experiment(product_type(2), trials=1, theta_target=1.0)
