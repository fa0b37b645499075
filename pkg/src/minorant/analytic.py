"""Closed-form densities, intensities and transforms of minorant functionals.

Notation: a(t) = arcosh(t**-0.5), so exp(a(t)) = (1 + sqrt(1 - t)) / sqrt(t).
tau_n is the time from the n-th vertex of a standard meander's minorant to
the right endpoint; T_n is the same quantity for the concave majorant of a
motion on [0, 2 Gamma_1], T_n = 2 Gamma_1/2 tau_n in law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .randkit import EULER_GAMMA, arcsinh, arcsinh_array, erfc, erfc_array
from .stats import quadrature

SERIES_TOL = 1e-12
MAX_TERMS = 2_000_000


class SeriesError(RuntimeError):
    pass


@dataclass
class AnalyticCurve:
    name: str
    evaluator: Callable
    support: tuple
    citation: str = ""
    eval_error_bound: float = 1e-10
    kind: str = "density"  # density | intensity | transform
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        lo, hi = self.support
        x = np.asarray(x, dtype=float)
        if np.any((x < lo) | (x > hi)):
            raise ValueError(f"{self.name}: argument outside support {self.support}")
        f = np.vectorize(lambda v: float(self.evaluator(float(v), **self.params)))
        out = f(x)
        return float(out) if out.ndim == 0 else out

    def grid(self, n: int) -> np.ndarray:
        """n interior points of the support (open ends are avoided)."""
        lo, hi = self.support
        if math.isinf(hi):
            hi = lo + 10.0
        return lo + (hi - lo) * (np.arange(1, n + 1) / (n + 1))

    def tabulate(self, n: int):
        x = self.grid(n)
        return x, self(x)

    def total_mass(self, tol: float = 1e-9) -> float:
        lo, hi = self.support
        return integrate_density(lambda v: self.evaluator(v, **self.params), lo, hi, tol)


def integrate_density(f: Callable, lo: float, hi: float, tol: float = 1e-9) -> float:
    """Integral of f over (lo, hi) with endpoint-singularity substitutions.

    On (0, 1) uses t = sin^2(theta); on (0, inf) splits at 1 and maps the
    inner part the same way.
    """
    if lo == 0.0 and hi == 1.0:
        def h(th):
            s = math.sin(th)
            return f(s * s) * 2.0 * s * math.cos(th)
        return quadrature(h, 0.0, 0.5 * math.pi, tol=tol, max_intervals=20000)
    if lo == 0.0 and math.isinf(hi):
        def h(th):
            s = math.sin(th)
            return f(s * s) * 2.0 * s * math.cos(th)
        return quadrature(h, 0.0, 0.5 * math.pi, tol=tol / 2, max_intervals=20000) + \
            quadrature(f, 1.0, math.inf, tol=tol / 2, max_intervals=20000)
    return quadrature(f, lo, hi, tol=tol, max_intervals=20000)


def a_of_t(t: float) -> float:
    """a(t) = arcosh(t^{-1/2}), computed as log((1 + sqrt(1-t)) / sqrt(t))."""
    if not 0.0 < t <= 1.0:
        raise ValueError("t must lie in (0, 1]")
    return math.log1p(math.sqrt(1.0 - t)) - 0.5 * math.log(t)


def _check_unit(t):
    if not 0.0 < t < 1.0:
        raise ValueError("t must lie in (0, 1)")


# --- meander vertex times ---------------------------------------------------------------

def tau_density_gen(z: float, t: float) -> float:
    """Generating function sum_n f_{tau_n}(t) z^n in closed form.

    z = 1 returns the vertex intensity and z = -1 its continuous limit.
    """
    _check_unit(t)
    if not -1.0 <= z <= 1.0:
        raise ValueError("need |z| <= 1")
    if z == 0.0:
        return 0.0
    if z == 1.0:
        return meander_vertex_intensity(t)
    s = math.sqrt(1.0 - t)
    a = a_of_t(t)
    if z == -1.0:
        return (s / (1.0 + s) - a) / (4.0 * s ** 3)
    bracket = -1.0 + (1.0 - z * s) / math.sqrt(t) * math.exp(z * a)
    return z * bracket / ((1.0 - z * z) * 2.0 * s ** 3)


def tau_density_terms(n: int, t: float, tol: float = SERIES_TOL):
    """Nonzero terms of the series for f_{tau_n}(t) and a bound on the tail."""
    if n < 1:
        raise ValueError("n must be positive")
    _check_unit(t)
    a = a_of_t(t)
    la = math.log(a)
    pref = 1.0 / (4.0 * (1.0 - t) ** 1.5)
    lgn = math.lgamma(n)
    terms = []
    k = n + 1  # (1 - (-1)^{n+k}) vanishes unless n + k is odd
    while True:
        # 2 * C(k-1, n-1) a^k / k!, with the binomial through log-gamma
        lt = math.log(2.0) + math.lgamma(k) - lgn - math.lgamma(k - n + 1) + k * la - math.lgamma(k + 1)
        term = pref * math.exp(lt)
        terms.append(term)
        r = k * a * a / ((k + 2.0) * (k - n + 1.0) * (k - n + 2.0))
        if r < 1.0:
            tail = term * r / (1.0 - r)
            if tail < tol * max(sum(terms), 1e-300) or tail < 1e-300:
                return terms, tail
        if len(terms) > MAX_TERMS:
            raise SeriesError("series did not converge")
        k += 2


def tau_density(n: int, t: float, tol: float = SERIES_TOL) -> float:
    """Density of tau_n at t in (0, 1) by its alternating-parity series."""
    terms, _ = tau_density_terms(n, t, tol)
    return math.fsum(terms)


def tau1_density(t: float) -> float:
    _check_unit(t)
    return (1.0 / math.sqrt(t) - 1.0) / (2.0 * (1.0 - t) ** 1.5)


def tau_cdf(n: int, x: float, tol: float = 1e-10) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    # substitute t = x sin^2(theta) to tame the 1/sqrt(t) endpoint
    def h(th):
        s = math.sin(th)
        return tau_density(n, x * s * s) * 2.0 * x * s * math.cos(th)
    return quadrature(h, 0.0, 0.5 * math.pi, tol=tol)


def tau_cdf_table(n: int, n_grid: int = 400, per_decade: int = 20, smallest: float = 1e-16,
                  switch: float = 1e-2):
    """(x, F(x)) for tau_n on the grid x = sin^2(theta), theta uniform above ``switch``.

    Mass between grid points is integrated in theta, which removes both
    endpoint singularities of the density. Below ``switch`` the grid is
    geometric down to ``smallest``: F rises like a power of log(1/x) near 0,
    so a uniform theta grid interpolates badly there.
    """
    th = np.linspace(0.0, 0.5 * math.pi, n_grid + 1)
    if per_decade > 0 and smallest < switch:
        k = int(math.ceil(per_decade * math.log10(switch / smallest)))
        small = np.arcsin(np.sqrt(np.geomspace(smallest, switch, k + 1)))
        th = np.concatenate(([0.0], small, th[th > small[-1]]))

    def h(v):
        sv = math.sin(v)
        t = sv * sv
        if t <= 0.0 or t >= 1.0:
            return 0.0
        return tau_density(n, t) * 2.0 * sv * math.cos(v)

    pieces = [quadrature(h, th[i - 1], th[i], tol=1e-11) for i in range(1, th.size)]
    F = np.concatenate(([0.0], np.cumsum(pieces)))
    return np.sin(th) ** 2, F


def interpolated_cdf(x_grid, F_grid):
    """Monotone CDF by linear interpolation in theta = asin(sqrt x)."""
    th = np.arcsin(np.sqrt(np.asarray(x_grid)))
    F = np.asarray(F_grid)

    def cdf(x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return np.interp(np.arcsin(np.sqrt(x)), th, F)
    return cdf


def meander_vertex_intensity(t: float) -> float:
    """Sum over n of f_{tau_n}(t): (1 - t + sqrt(1-t) - t a(t)) / (4 t (1-t)^{3/2})."""
    _check_unit(t)
    s = math.sqrt(1.0 - t)
    return (1.0 - t + s - t * a_of_t(t)) / (4.0 * t * s ** 3)


def bm_vertex_intensity(t: float) -> float:
    """Vertex intensity of the minorant of a motion on [0, 1]: 1 / (2 t (1-t))."""
    _check_unit(t)
    return 1.0 / (2.0 * t * (1.0 - t))


def bm_inf_vertex_intensity(u: float) -> float:
    """Vertex intensity for a motion on [0, inf): 1 / (2u)."""
    if not u > 0:
        raise ValueError("u must be positive")
    return 1.0 / (2.0 * u)


# --- transforms ---------------------------------------------------------------------------

def laplace_tau_a(t: float, a: float) -> float:
    """E exp(-t tau_a), tau_a the argmin of B(s) - a s on [0, Gamma_1]."""
    if not t > -1.0:
        raise ValueError("need t > -1")
    r = math.sqrt(2.0 + a * a)
    return (r - a) / (math.sqrt(2.0 + a * a + 2.0 * t) - a)


def charden_mgf(alpha: float, beta: float) -> float:
    """E exp(alpha G + beta sqrt(G) R), G ~ Gamma(1/2), R Rayleigh."""
    if not (alpha < 1.0 and 2.0 * alpha + beta * beta < 2.0):
        raise ValueError("need alpha < 1 and 2 alpha + beta^2 < 2")
    return 1.0 / (math.sqrt(1.0 - alpha) - beta / math.sqrt(2.0))


def sigma_u_laplace(a: float, u: float) -> float:
    """E exp(-a sigma_u), sigma_u the last time the majorant slope is >= 1/u."""
    if a < 0 or not u > 0:
        raise ValueError("need a >= 0 and u > 0")
    u2 = u * u
    return (1.0 + math.sqrt(1.0 + u2)) / (1.0 + math.sqrt(1.0 + u2 + 2.0 * a * u2))


def y_u_density(t: float, u: float) -> float:
    if not (t > 0 and u > 0):
        raise ValueError("need t > 0 and u > 0")
    r = math.sqrt(1.0 + u * u)
    return r * (1.0 + r) / (2.0 * u * u) * erfc(math.sqrt(t / 2.0) / u).value * math.exp(-t / 2.0)


def inverse_slope_intensity(u: float) -> float:
    return 1.0 / (u * math.sqrt(1.0 + u * u))


def inverse_slope_mass(u: float) -> float:
    """Mean number of majorant faces with slope below 1/u: asinh(1/u)."""
    return arcsinh(1.0 / u).value


ERFC_CUTOFF = 5.86  # erfc(5.86) ~ 1e-16


def T_n_density(t: float, n: int, tol: float = 1e-10) -> float:
    """Density of T_n: e^{-t/2}/2 * int_0^inf asinh^n(v)/n! erfc(v sqrt(t/2)) dv."""
    if not t > 0 or n < 1:
        raise ValueError("need t > 0 and n >= 1")
    c = math.sqrt(t / 2.0)
    vstar = ERFC_CUTOFF / c
    lf = math.lgamma(n + 1)

    def h(v):
        v = np.asarray(v, dtype=float)
        s = arcsinh_array(v)
        with np.errstate(divide="ignore"):
            w = np.where(s > 0, np.exp(n * np.log(np.where(s > 0, s, 1.0)) - lf), 0.0)
        return w * erfc_array(v * c)

    pts = [p for p in (1.0, 0.25 * vstar, 0.5 * vstar) if 0.0 < p < vstar]
    # scale the tolerance to the magnitude of the integral
    val = quadrature(h, 0.0, vstar, tol=tol, rel_tol=1e-12, vectorized=True, breakpoints=pts)
    return 0.5 * math.exp(-t / 2.0) * val


def depoissonized_T_n(t: float, n: int, tol: float = 1e-12) -> float:
    """int_0^1 f_{tau_n}(u) e^{-t/(2u)} / sqrt(2 pi t u) du."""
    def h(u):
        return tau_density(n, u) * math.exp(-t / (2.0 * u)) / math.sqrt(2.0 * math.pi * t * u)
    return integrate_density(h, 0.0, 1.0, tol)


# --- arcsine transform --------------------------------------------------------------------

@dataclass
class SeriesSpec:
    """g(u) = (1-u)^{-a} sum_n c_n (1-u)^n with c_n >= 0.

    ``coefficients`` is a callable n -> c_n (vectorized over integer arrays)
    or a finite sequence. ``ratio_bound`` bounds c_{n+1}/c_n from above for
    all n past the truncation point; it drives the geometric tail bound.
    """

    coefficients: Union[Callable, Sequence[float]]
    a: float = 0.0
    ratio_bound: float = 1.0
    tol: float = SERIES_TOL
    sign: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.a < 1.0:
            raise ValueError("exponent offset a must lie in [0, 1)")

    def coeffs(self, n_max: int) -> np.ndarray:
        if callable(self.coefficients):
            c = np.asarray(self.coefficients(np.arange(n_max)), dtype=float)
        else:
            c = np.zeros(n_max)
            src = np.asarray(self.coefficients, dtype=float)[:n_max]
            c[: src.size] = src
        if np.any(c < 0):
            raise ValueError("coefficients must be non-negative")
        return c

    def evaluate(self, u: float) -> float:
        q = 1.0 - u
        n = _terms_needed(q * self.ratio_bound, self.tol)
        c = self.coeffs(n)
        return self.sign * q ** (-self.a) * float(np.dot(c, q ** np.arange(n)))


def _terms_needed(r: float, tol: float) -> int:
    if r <= 0:
        return 1
    if r >= 1:
        raise SeriesError("series ratio bound >= 1: tail cannot be bounded")
    # term_n <= r^n * c_0-scale; tail after N terms <= r^N / (1 - r)
    n = int(math.ceil(math.log(tol * (1.0 - r)) / math.log(r))) + 8
    if n > MAX_TERMS:
        raise SeriesError("too many terms required")
    return max(n, 8)


def arcsine_transform(series: SeriesSpec) -> AnalyticCurve:
    """f(u) = (1 / sqrt(pi u)) sum_n Gamma(n-a+1)/Gamma(n-a+3/2) c_n (1-u)^{n-a+1/2}."""
    a = series.a

    def f(u: float) -> float:
        _check_unit(u)
        q = 1.0 - u
        # gamma-ratio factor decreases, so the coefficient ratio bound controls the tail
        n = _terms_needed(q * series.ratio_bound, series.tol)
        k = np.arange(n, dtype=float)
        lg = np.array([math.lgamma(v - a + 1.0) - math.lgamma(v - a + 1.5) for v in k])
        c = series.coeffs(n)
        terms = np.exp(lg) * c * q ** (k - a + 0.5)
        return series.sign * math.fsum(terms) / math.sqrt(math.pi * u)

    return AnalyticCurve("arcsine_transform", lambda u: f(u), (0.0, 1.0), kind="density",
                         params={}, eval_error_bound=series.tol)


def arcsine_transform_quadrature(g: Callable, u: float, a: float = 0.0, tol: float = 1e-12) -> float:
    """Oracle: (1/pi) int_u^1 v^{-3/2} (1-v)^{-1/2} g(u/v) dv.

    Substituting v = u + (1-u) sin^2(theta) removes the (1-v)^{-1/2} and
    (1 - u/v)^{-a} endpoint singularities for a <= 1/2.
    """
    _check_unit(u)
    w = 1.0 - u

    def h(th):
        s = math.sin(th)
        c = math.cos(th)
        v = u + w * s * s
        if v >= 1.0 or s == 0.0:
            return 0.0
        # (1-v)^{-1/2} dv = 2 sqrt(w) s d theta
        return v ** -1.5 * 2.0 * math.sqrt(w) * s * g(u / v)

    return quadrature(h, 0.0, 0.5 * math.pi, tol=tol, max_intervals=20000) / math.pi


def arcsine_density(u: float) -> float:
    _check_unit(u)
    return 1.0 / (math.pi * math.sqrt(u * (1.0 - u)))


def alpha_sum_density(u: float) -> float:
    """Sum over i >= 1 of the densities of the vertex times left of the minimum."""
    _check_unit(u)
    ac = math.acos(math.sqrt(u))
    return 0.25 * (1.0 / u + 2.0 / (math.pi * u) * ac
                   + 2.0 / math.pi * (ac / (1.0 - u) - 1.0 / math.sqrt(u * (1.0 - u))))


def _ellip_ke(m: float, m1: float):
    """Complete elliptic integrals K(m), E(m) by the AGM; m1 = 1 - m given exactly."""
    a, b = 1.0, math.sqrt(m1)
    c2 = m
    s = 0.5 * c2
    p = 0.5
    for _ in range(60):
        an = 0.5 * (a + b)
        c = 0.5 * (a - b)
        b = math.sqrt(a * b)
        a = an
        p *= 2.0
        s += p * c * c
        if abs(c) < 1e-17 * a:
            break
    K = math.pi / (2.0 * a)
    return K, K * (1.0 - s)


ALPHA_M1_SWITCH = 0.05


def alpha_minus1_series(t: float, tol: float = SERIES_TOL) -> float:
    """(1 / (2 sqrt(pi t))) sum_{n>=1} (1/2)_n Gamma(n-1/2) (1-t)^{n-1} / (n! (n-1)!)."""
    _check_unit(t)
    q = 1.0 - t
    # log of (1/2)_n / n! = lgamma(n+1/2) - lgamma(1/2) - lgamma(n+1)
    total = 0.0
    n = 1
    lhalf = math.lgamma(0.5)
    while True:
        lt = math.lgamma(n + 0.5) - lhalf - math.lgamma(n + 1) + math.lgamma(n - 0.5) - math.lgamma(n) \
            + (n - 1) * math.log(q)
        term = math.exp(lt)
        total += term
        # successive-term ratio is q (n+1/2)(n-1/2) / ((n+1) n) < q
        if term * q / (1.0 - q) < tol * total:
            break
        n += 1
        if n > MAX_TERMS:
            raise SeriesError("series did not converge")
    return total / (2.0 * math.sqrt(math.pi * t))


def alpha_minus1_closed(t: float) -> float:
    """(K(m) - E(m)) / (pi m sqrt t), m = 1 - t."""
    _check_unit(t)
    m = 1.0 - t
    K, E = _ellip_ke(m, t)
    return (K - E) / (math.pi * m * math.sqrt(t))


def alpha_minus1_density(t: float) -> float:
    """Density of the vertex time just left of the minimum for a motion on [0, 1]."""
    _check_unit(t)
    if t < ALPHA_M1_SWITCH:
        return alpha_minus1_closed(t)
    return alpha_minus1_series(t)


# --- integral-equation self-check ------------------------------------------------------------

def g_primitive(z: float, x: float) -> float:
    """G(x) = int_0^x ((v + sqrt(1+v^2))^z - 1) dv."""
    r = math.sqrt(1.0 + x * x)
    if z == 1.0:
        return 0.5 * (x * (x + r) + arcsinh(x).value) - x
    e = (x + r) ** z
    return (e * (x - z * r) + z) / (1.0 - z * z) - x


def integral_equation_sides(z: float, t: float, tol: float = 1e-11):
    """Both sides of int_0^1 F(z,u) e^{-t/(2u)} / sqrt(u) du = t e^{-t/2} int_0^inf e^{-t x^2/2} G(x) dx."""
    def lhs_f(u):
        return tau_density_gen(z, u) * math.exp(-t / (2.0 * u)) / math.sqrt(u)

    lhs = integrate_density(lhs_f, 0.0, 1.0, tol)
    xmax = math.sqrt(2.0 * 745.0 / t)
    rhs = t * math.exp(-t / 2.0) * quadrature(lambda x: math.exp(-t * x * x / 2.0) * g_primitive(z, x),
                                              0.0, xmax, tol=tol, max_intervals=20000)
    return lhs, rhs


def lemma_solution(z: float, u: float, h: float = 1e-6) -> float:
    """F(u) = (x G'(x) - G(x)) / (2 (1-u)^{3/2}) with x = sqrt((1-u)/u)."""
    _check_unit(u)
    x = math.sqrt((1.0 - u) / u)
    gprime = (x + math.sqrt(1.0 + x * x)) ** z - 1.0
    return (x * gprime - g_primitive(z, x)) / (2.0 * (1.0 - u) ** 1.5)


# --- face laws ----------------------------------------------------------------------------------

def ith_face_joint_density(x: float, s: float, i: int) -> float:
    """Joint density of (length, slope) of the i-th face of the theta=2 meander-side process."""
    if x <= 0 or s < 0:
        return 0.0
    phi = math.exp(-0.5 * s * s * x) / math.sqrt(2.0 * math.pi)
    p0 = 1.0 / (math.sqrt(1.0 + s * s) + s)  # sqrt(1 + s^2) - s without cancellation
    m = math.asinh(s)
    return x ** -0.5 * math.exp(-x / 2.0) * phi * p0 * m ** (i - 1) / math.factorial(i - 1)


def ith_face_length_density(x: float, i: int, tol: float = 1e-10) -> float:
    """Marginal length density of the i-th face, by integrating out the slope numerically.

    The slope is integrated in v = s sqrt(x), whose Gaussian factor does not
    depend on x, so short faces are as easy as long ones.
    """
    if x <= 0:
        return 0.0
    r = math.sqrt(x)
    return quadrature(lambda v: ith_face_joint_density(x, v / r, i) / r, 0.0, math.inf,
                      tol=tol, rel_tol=1e-10)


# --- log-moment constants -----------------------------------------------------------------------

def log_moment_constants() -> dict:
    g = EULER_GAMMA
    l2 = math.log(2.0)
    return {
        "E_log_U": -1.0,
        "E_log_gamma_half": -2.0 * l2 - g,
        "E_log_gamma_three_halves": 2.0 - g - 2.0 * l2,
        "E_log2_gamma_half": math.pi ** 2 / 2.0 + (g + 2.0 * l2) ** 2,
        "E_log2_gamma_three_halves": math.pi ** 2 / 2.0 + (g + 2.0 * l2 - 2.0) ** 2 - 4.0,
    }


# --- registry for tabulation ----------------------------------------------------------------------

def curve(name: str, **params) -> AnalyticCurve:
    """Named curve for tabulation; extra parameters bind keyword arguments."""
    table = {
        "bmzo": (bm_vertex_intensity, (0.0, 1.0), "intensity", {}),
        "bm_inf": (bm_inf_vertex_intensity, (0.0, math.inf), "intensity", {}),
        "intsmes": (meander_vertex_intensity, (0.0, 1.0), "intensity", {}),
        "tau_gen": (lambda t, z=0.5: tau_density_gen(z, t), (0.0, 1.0), "transform", {"z": 0.5}),
        "tau_density": (lambda t, n=1: tau_density(n, t), (0.0, 1.0), "density", {"n": 1}),
        "T_n_density": (lambda t, n=1: T_n_density(t, n), (0.0, math.inf), "density", {"n": 1}),
        "alpha_sum": (alpha_sum_density, (0.0, 1.0), "intensity", {}),
        "alpha_minus1": (alpha_minus1_density, (0.0, 1.0), "density", {}),
        "arcsine": (arcsine_density, (0.0, 1.0), "density", {}),
        "laplace_tau_a": (lambda t, a=1.0: laplace_tau_a(t, a), (0.0, math.inf), "transform", {"a": 1.0}),
        "siglap": (lambda a, u=1.0: sigma_u_laplace(a, u), (0.0, math.inf), "transform", {"u": 1.0}),
        "yud": (lambda t, u=1.0: y_u_density(t, u), (0.0, math.inf), "density", {"u": 1.0}),
        "lambda": (inverse_slope_intensity, (0.0, math.inf), "intensity", {}),
        "Lambda": (inverse_slope_mass, (0.0, math.inf), "transform", {}),
    }
    if name not in table:
        raise KeyError(f"unknown curve {name!r}; known: {sorted(table)}")
    fn, support, kind, defaults = table[name]
    p = dict(defaults)
    for k, v in params.items():
        if k not in defaults:
            raise KeyError(f"curve {name!r} takes no parameter {k!r}")
        p[k] = v
    return AnalyticCurve(name, fn, support, kind=kind, params=p)


CURVE_NAMES = ("bmzo", "bm_inf", "intsmes", "tau_gen", "tau_density", "T_n_density", "alpha_sum",
               "alpha_minus1", "arcsine", "laplace_tau_a", "siglap", "yud", "lambda", "Lambda")
