import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special as sp

from minorant import analytic as an
from minorant import taurho as tr
from minorant.randkit import EULER_GAMMA, RngStream
from minorant.stats import ks_one_sample, quadrature

# high-precision reference values, computed once with arbitrary-precision
# arithmetic and frozen here
TAU_DENSITY_REF = {
    1: {0.1: 1.26624487774659642, 0.5: 0.5857864376269049512, 0.9: 0.85527836582477000667},
    2: {0.1: 1.6106725207065796739, 0.5: 0.34853361166599100166, 0.9: 0.18703973700700850204},
    3: {0.1: 1.1333633560322706653, 0.5: 0.11615535724213990591, 0.9: 0.022994548388026200512},
}
TAU_CDF_HALF = {1: 0.58578643762690495, 2: 0.88137358701954303, 3: 0.97419613757475294}

interior = st.floats(0.01, 0.99)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("t", [0.1, 0.5, 0.9])
def test_tau_density_reference(n, t):
    assert an.tau_density(n, t) == pytest.approx(TAU_DENSITY_REF[n][t], rel=1e-11)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_tau_cdf_reference(n):
    assert an.tau_cdf(n, 0.5) == pytest.approx(TAU_CDF_HALF[n], abs=1e-9)
    x, F = an.tau_cdf_table(n, 200)
    assert an.interpolated_cdf(x, F)(0.5) == pytest.approx(TAU_CDF_HALF[n], abs=1e-4)
    assert F[-1] == pytest.approx(1.0, abs=1e-8)


def test_tau1_closed_form():
    assert an.tau1_density(0.25) == pytest.approx(0.7698003589195010, abs=1e-14)
    for t in np.linspace(0.02, 0.98, 25):
        assert an.tau_density(1, t) == pytest.approx(an.tau1_density(t), rel=1e-10)


def test_generating_function():
    assert an.tau_density_gen(0.0, 0.3) == 0.0
    h = 1e-6
    d = (an.tau_density_gen(h, 0.25) - an.tau_density_gen(-h, 0.25)) / (2 * h)
    assert d == pytest.approx(0.7698003589195010, rel=1e-8)
    for z in (0.5, -0.5):
        for t in np.arange(0.1, 1.0, 0.1):
            series = sum(an.tau_density(n, t) * z ** n for n in range(1, 200))
            assert an.tau_density_gen(z, t) == pytest.approx(series, abs=1e-8)
    with pytest.raises(ValueError):
        an.tau_density_gen(1.5, 0.5)


def test_meander_intensity():
    assert an.meander_vertex_intensity(0.5) == pytest.approx(1.0838815410463170, abs=1e-14)
    assert an.tau_density_gen(1.0, 0.5) == an.meander_vertex_intensity(0.5)
    partial = sum(an.tau_density(n, 0.5) for n in range(1, 51))
    assert an.meander_vertex_intensity(0.5) == pytest.approx(partial, abs=1e-10)
    # 1 / (2t) blow-up at the left end, matched by the partial sums
    for t in (1e-4, 1e-6):
        assert 2 * t * an.meander_vertex_intensity(t) == pytest.approx(1.0, rel=0.01)
    t = 1e-3
    assert sum(an.tau_density(n, t) for n in range(1, 80)) == pytest.approx(an.meander_vertex_intensity(t), rel=1e-10)
    assert an.integrate_density(an.meander_vertex_intensity, 0.01, 0.99) < math.inf


def test_bm_intensities():
    assert an.bm_vertex_intensity(0.5) == 2.0
    assert quadrature(an.bm_vertex_intensity, 0.25, 0.75) == pytest.approx(math.log(3.0), abs=1e-10)
    # u = t / (1 - t) carries 1/(2t(1-t)) dt to 1/(2u) du
    for t in np.linspace(0.05, 0.95, 19):
        u = t / (1 - t)
        du_dt = 1.0 / (1 - t) ** 2
        assert an.bm_inf_vertex_intensity(u) * du_dt == pytest.approx(an.bm_vertex_intensity(t), rel=1e-12)


def test_laplace_and_mgf_limits():
    assert an.laplace_tau_a(0.0, 0.7) == 1.0
    for t in (0.3, 1.0, 5.0):
        assert an.laplace_tau_a(t, 0.0) == pytest.approx((1 + t) ** -0.5, rel=1e-14)
    assert an.charden_mgf(0.0, 0.0) == 1.0
    assert an.charden_mgf(0.4, 0.0) == pytest.approx(0.6 ** -0.5)
    with pytest.raises(ValueError):
        an.charden_mgf(0.9, 1.0)
    assert an.sigma_u_laplace(0.0, 3.0) == 1.0
    for a in (0.5, 2.0):
        assert an.sigma_u_laplace(a, 1e8) == pytest.approx((1 + 2 * a) ** -0.5, rel=1e-7)


def test_charden_monte_carlo():
    g = RngStream(1).generator
    G = g.standard_gamma(0.5, 1_000_000)
    R = np.sqrt(2 * g.standard_exponential(G.size))
    mc = np.mean(np.exp(0.2 * G + 0.3 * np.sqrt(G) * R))
    assert mc / an.charden_mgf(0.2, 0.3) == pytest.approx(1.0, abs=0.01)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_densities_integrate_to_one(n):
    assert an.integrate_density(lambda t: an.tau_density(n, t), 0.0, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_T_n_density():
    assert an.integrate_density(lambda t: an.T_n_density(t, 1), 0.0, math.inf, tol=1e-8) == \
        pytest.approx(1.0, abs=1e-6)
    assert an.T_n_density(1.0, 1) == pytest.approx(0.131953520733547955, rel=1e-8)
    for n, t in [(1, 0.5), (2, 1.0), (3, 2.0)]:
        assert an.depoissonized_T_n(t, n) == pytest.approx(an.T_n_density(t, n), abs=1e-6)


def test_yud_integrates_and_slope_mass():
    assert an.integrate_density(lambda t: an.y_u_density(t, 1.0), 0.0, math.inf) == pytest.approx(1.0, abs=1e-6)
    assert an.inverse_slope_mass(1.0) == pytest.approx(math.asinh(1.0))
    # Lambda' = -lambda
    h = 1e-6
    d = (an.inverse_slope_mass(2 + h) - an.inverse_slope_mass(2 - h)) / (2 * h)
    assert -d == pytest.approx(an.inverse_slope_intensity(2.0), rel=1e-7)


def test_arcsine_transform_examples():
    f1 = an.arcsine_transform(an.SeriesSpec(lambda n: np.ones(n.size), a=0.0, ratio_bound=1.0))
    assert f1(0.25) == pytest.approx(8.0 / 3.0, rel=1e-10)
    for u in (0.1, 0.5, 0.9):
        assert f1(u) == pytest.approx(2 / (math.pi * u) * math.acos(math.sqrt(u)), rel=1e-10)
    f2 = an.arcsine_transform(an.SeriesSpec(lambda n: np.ones(n.size), a=0.5, ratio_bound=1.0))
    for u in (0.2, 0.5, 0.8):
        assert f2(u) == pytest.approx(1.0 / u, abs=1e-12 / u)
    with pytest.raises(ValueError):
        an.SeriesSpec([1.0], a=1.0)


def test_arcsine_transform_against_quadrature():
    spec = an.SeriesSpec(lambda n: 1.0 / (2 * n + 3.0), a=0.5, ratio_bound=1.0)
    f = an.arcsine_transform(spec)
    for u in (0.3, 0.6):
        assert f(u) == pytest.approx(an.arcsine_transform_quadrature(spec.evaluate, u), rel=1e-8)


def test_alpha_sum_identity():
    for u in np.linspace(0.05, 0.95, 19):
        lhs = an.alpha_sum_density(u) + an.alpha_sum_density(1 - u) + an.arcsine_density(u)
        assert lhs == pytest.approx(1 / (2 * u * (1 - u)), abs=1e-8)


def test_alpha_minus1():
    assert an.alpha_minus1_density(0.3) == pytest.approx(0.692145483897997185, rel=1e-11)
    for t in (0.05, 0.2, 0.5, 0.9):
        assert an.alpha_minus1_series(t) == pytest.approx(an.alpha_minus1_closed(t), rel=1e-10)
        m = 1 - t
        ref = (sp.ellipk(m) - sp.ellipe(m)) / (math.pi * m * math.sqrt(t))
        assert an.alpha_minus1_closed(t) == pytest.approx(ref, rel=1e-12)
    assert an.integrate_density(an.alpha_minus1_density, 0.0, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_alpha_minus1_monte_carlo():
    m = 100_000
    g = RngStream(2).generator
    a0 = np.sin(0.5 * math.pi * g.random(m)) ** 2
    tau, rho = tr.init_batch(RngStream(3), "meander_t", m)
    t1, _ = tr.run_batch(RngStream(4), tau, rho, 1)
    th = np.linspace(0, 0.5 * math.pi, 201)

    def piece(lo, hi):
        return quadrature(lambda v: an.alpha_minus1_density(math.sin(v) ** 2) * math.sin(2 * v), lo, hi, tol=1e-11)
    F = np.concatenate(([0.0], np.cumsum([piece(a, b) for a, b in zip(th[:-1], th[1:])])))
    cdf = an.interpolated_cdf(np.sin(th) ** 2, F)
    assert ks_one_sample(a0 * t1[:, 1], cdf).statistic < 0.02


@pytest.mark.parametrize("n", [1, 2, 3])
def test_tau_density_vs_recursion(n):
    tau, rho = tr.init_batch(RngStream(5), "meander_t", 100_000)
    t, _ = tr.run_batch(RngStream(6, n), tau, rho, n)
    cdf = an.interpolated_cdf(*an.tau_cdf_table(n, 200))
    assert ks_one_sample(t[:, n], cdf).statistic < 0.007


@pytest.mark.parametrize("n", [1, 2, 3])
def test_tau_cdf_table_near_zero(n):
    cdf = an.interpolated_cdf(*an.tau_cdf_table(n))
    for x in (1e-12, 1e-9, 1e-6, 1e-4):
        assert cdf(x) == pytest.approx(an.tau_cdf(n, x), rel=1e-3, abs=1e-9)


@given(st.floats(-0.9, 0.9), st.floats(0.2, 3.0))
def test_integral_equation_balances(z, t):
    lhs, rhs = an.integral_equation_sides(z, t)
    assert lhs == pytest.approx(rhs, abs=1e-6)


@given(st.floats(-0.9, 0.9), interior)
def test_lemma_solution_matches_closed_form(z, u):
    assert an.lemma_solution(z, u) == pytest.approx(an.tau_density_gen(z, u), rel=1e-8, abs=1e-10)


def test_log_moment_constants():
    c = an.log_moment_constants()
    assert c["E_log_U"] == -1.0
    assert c["E_log_gamma_half"] == pytest.approx(sp.digamma(0.5), rel=1e-14)
    assert c["E_log_gamma_three_halves"] == pytest.approx(sp.digamma(1.5), rel=1e-12)
    assert c["E_log2_gamma_half"] == pytest.approx(8.79017382283133, rel=1e-13)
    assert c["E_log2_gamma_half"] == pytest.approx(sp.polygamma(1, 0.5) + sp.digamma(0.5) ** 2, rel=1e-13)
    assert c["E_log2_gamma_three_halves"] == pytest.approx(sp.polygamma(1, 1.5) + sp.digamma(1.5) ** 2, rel=1e-12)
    assert EULER_GAMMA == pytest.approx(np.euler_gamma, rel=1e-16)


def test_log_moments_monte_carlo():
    c = an.log_moment_constants()
    g = RngStream(7).generator
    m = 1_000_000
    lu = np.log(g.random(m))
    lh = np.log(g.standard_gamma(0.5, m))
    l3 = np.log(g.standard_gamma(1.5, m))
    samples = {
        "E_log_U": lu, "E_log_gamma_half": lh, "E_log_gamma_three_halves": l3,
        "E_log2_gamma_half": lh ** 2, "E_log2_gamma_three_halves": l3 ** 2,
    }
    for k, x in samples.items():
        se = x.std() / math.sqrt(m)
        # 1% relative, widened to 4 standard errors for the near-zero mean of log Gamma(3/2)
        assert abs(x.mean() - c[k]) < max(0.01 * abs(c[k]), 4 * se), k


def test_ith_face_length_density_integrates():
    for i in (1, 2):
        total = an.integrate_density(lambda x: an.ith_face_length_density(x, i), 0.0, math.inf, tol=1e-8)
        assert total == pytest.approx(1.0, abs=1e-5)


def test_curve_registry():
    c = an.curve("bmzo")
    x, y = c.tabulate(99)
    assert x[49] == 0.5 and y[49] == 2.0
    assert np.all(y > 0)
    assert an.curve("tau_density", n=2)(0.5) == pytest.approx(TAU_DENSITY_REF[2][0.5])
    assert an.curve("arcsine").total_mass() == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        c(1.5)
    with pytest.raises(KeyError):
        an.curve("nope")
    with pytest.raises(KeyError):
        an.curve("bmzo", n=2)
    for name in an.CURVE_NAMES:
        cv = an.curve(name)
        assert np.all(np.asarray(cv(cv.grid(5))) >= 0)
