"""Verification toolbox: KS tests, Poisson chi-square, permutation
independence, moment checks and adaptive Gauss-Kronrod quadrature."""

from __future__ import annotations

import csv
import heapq
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .randkit import RngStream, gamma_q

P_FLOOR = 0.01


@dataclass
class TestReport:
    """Outcome of a single verification.

    ``passed`` holds iff the statistic is within ``threshold`` and, when a
    p-value is present and ``p_floor`` is set, the p-value is above the floor.
    """

    name: str
    statistic: float
    threshold: float
    p_value: Optional[float] = None
    n_samples: int = 0
    seed: Optional[int] = None
    passed: bool = False
    citation: str = ""
    kind: str = "upper"  # "upper": statistic <= threshold; "lower": statistic >= threshold
    p_floor: Optional[float] = None
    flags: list = field(default_factory=list)
    details: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def evaluate(self) -> "TestReport":
        if self.kind == "upper":
            ok = self.statistic <= self.threshold
        elif self.kind == "lower":
            ok = self.statistic >= self.threshold
        else:
            raise ValueError(f"unknown comparison kind {self.kind!r}")
        if self.p_floor is not None and self.p_value is not None:
            ok = ok and self.p_value > self.p_floor
        if self.details:
            ok = ok and all(d.passed for d in self.details)
        self.passed = bool(ok and math.isfinite(self.statistic))
        return self

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        op = "<=" if self.kind == "upper" else ">="
        p = "" if self.p_value is None else f" p={self.p_value:.4g}"
        stat = "n/a" if self.statistic is None else f"{self.statistic:.6g}"
        return f"[{status}] {self.name}: stat={stat} {op} {self.threshold:.6g}{p} n={self.n_samples}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["details"] = [x.to_dict() for x in self.details]
        return _jsonable(d)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "TestReport":
        d = dict(d)
        d["details"] = [cls.from_dict(x) for x in d.get("details", [])]
        return cls(**d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def combine(name: str, reports: Sequence[TestReport], citation: str = "") -> TestReport:
    """A report that passes iff every sub-report passes; statistic = #failures."""
    fails = sum(not r.passed for r in reports)
    rep = TestReport(
        name=name,
        statistic=float(fails),
        threshold=0.0,
        n_samples=max((r.n_samples for r in reports), default=0),
        citation=citation,
        details=list(reports),
    )
    return rep.evaluate()


def write_summary_csv(reports: Sequence[TestReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "passed", "statistic", "threshold", "p_value", "n_samples", "seed", "citation"])
        for r in reports:
            w.writerow([r.name, int(r.passed), repr(r.statistic), repr(r.threshold),
                        "" if r.p_value is None else repr(r.p_value), r.n_samples,
                        "" if r.seed is None else r.seed, r.citation])


# --- Kolmogorov-Smirnov --------------------------------------------------------

def kolmogorov_sf(lam: float) -> float:
    """P(sup |Brownian bridge| > lam)."""
    if lam <= 0:
        return 1.0
    if lam < 0.2:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if term < 1e-18:
            break
    return min(1.0, max(0.0, 2.0 * total))


def _clean(x, name) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if np.isnan(x).any():
        raise ValueError(f"{name} contains NaN")
    return x


def ks_statistic(samples, cdf: Callable, upper: float = math.inf) -> float:
    x = np.sort(_clean(samples, "samples"), kind="stable")
    n = x.size
    keep = x <= upper
    xs = x[keep]
    f = np.asarray(cdf(xs), dtype=float)
    i = np.arange(1, n + 1)[keep]
    if xs.size == 0:
        return 0.0
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    return float(max(d_plus, d_minus, 0.0))


def ks_one_sample(samples, cdf: Callable, threshold: float = math.inf, name: str = "ks_one_sample",
                  upper: float = math.inf, p_floor: Optional[float] = None, seed=None,
                  citation: str = "") -> TestReport:
    """Exact sup-distance between the empirical CDF and ``cdf``.

    Samples above ``upper`` are treated as right-censored: the supremum is
    taken only over points at or below it.
    """
    x = _clean(samples, "samples")
    if x.size < 1:
        raise ValueError("need at least one sample")
    d = ks_statistic(x, cdf, upper)
    n = x.size
    lam = (math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n)) * d
    return TestReport(name=name, statistic=d, threshold=threshold, p_value=kolmogorov_sf(lam),
                      n_samples=n, seed=seed, citation=citation, p_floor=p_floor).evaluate()


def _weighted_ecdf_at(x_sorted, w_cum, points):
    idx = np.searchsorted(x_sorted, points, side="right")
    out = np.zeros(points.shape)
    nz = idx > 0
    out[nz] = w_cum[idx[nz] - 1]
    return out


def ks_two_sample(a, b, threshold: float = math.inf, name: str = "ks_two_sample",
                  weights_a=None, weights_b=None, p_floor: Optional[float] = None, seed=None,
                  citation: str = "") -> TestReport:
    """Two-sample KS distance; optional importance weights on either sample.

    With weights the asymptotic p-value uses Kish effective sample sizes.
    """
    a = _clean(a, "a")
    b = _clean(b, "b")
    if a.size < 1 or b.size < 1:
        raise ValueError("both samples must be non-empty")

    def prep(x, w):
        order = np.argsort(x, kind="stable")
        xs = x[order]
        if w is None:
            wc = np.arange(1, x.size + 1) / x.size
            neff = x.size
        else:
            w = np.asarray(w, dtype=float).ravel()[order]
            if np.any(w < 0) or not np.isfinite(w).all():
                raise ValueError("weights must be finite and non-negative")
            wc = np.cumsum(w) / w.sum()
            neff = w.sum() ** 2 / np.sum(w * w)
        return xs, wc, neff

    xa, ca, na = prep(a, weights_a)
    xb, cb, nb = prep(b, weights_b)
    pts = np.concatenate([xa, xb])
    d = float(np.max(np.abs(_weighted_ecdf_at(xa, ca, pts) - _weighted_ecdf_at(xb, cb, pts))))
    ne = na * nb / (na + nb)
    lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
    return TestReport(name=name, statistic=d, threshold=threshold, p_value=kolmogorov_sf(lam),
                      n_samples=int(a.size + b.size), seed=seed, citation=citation,
                      p_floor=p_floor).evaluate()


def ks_critical(n: int, m: Optional[int] = None, alpha: float = 0.01) -> float:
    """Asymptotic KS critical value at level ``alpha``."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    ne = n if m is None else n * m / (n + m)
    return c / math.sqrt(ne)


# --- chi-square ------------------------------------------------------------------

def chi2_sf(x: float, df: int) -> float:
    if df <= 0:
        raise ValueError("df must be positive")
    return gamma_q(0.5 * df, 0.5 * max(x, 0.0))


def merge_low_bins(observed, expected, min_expected: float = 5.0):
    """Greedily merge adjacent bins until each expectation is >= min_expected."""
    obs = [float(o) for o in observed]
    exp = [float(e) for e in expected]
    mo, me = [], []
    co = ce = 0.0
    for o, e in zip(obs, exp):
        co += o
        ce += e
        if ce >= min_expected:
            mo.append(co)
            me.append(ce)
            co = ce = 0.0
    if ce > 0 or co > 0:
        if me:
            mo[-1] += co
            me[-1] += ce
        else:
            mo.append(co)
            me.append(ce)
    if not me or me[-1] < min_expected:
        raise ValueError("all bins merged away: expectations too small")
    return np.array(mo), np.array(me)


def chisq_poisson(bin_counts, bin_means, name: str = "chisq_poisson", n_fitted: int = 0,
                  p_floor: float = P_FLOOR, seed=None, citation: str = "") -> TestReport:
    """Pearson chi-square of observed counts against Poisson means.

    Bins with expectation below 5 are merged with their neighbours.
    ``n_fitted`` parameters estimated from the data reduce the degrees of freedom.
    """
    obs = np.asarray(bin_counts, dtype=float)
    mu = np.asarray(bin_means, dtype=float)
    if obs.shape != mu.shape:
        raise ValueError("bin_counts and bin_means must align")
    if np.any(mu <= 0):
        raise ValueError("bin means must be positive")
    mo, me = merge_low_bins(obs, mu)
    stat = float(np.sum((mo - me) ** 2 / me))
    df = len(me) - n_fitted
    if df < 1:
        raise ValueError("no degrees of freedom left after merging")
    p = chi2_sf(stat, df)
    rep = TestReport(name=name, statistic=p, threshold=p_floor, kind="lower", p_value=p,
                     n_samples=int(obs.sum()), seed=seed, citation=citation)
    rep.extra.update(chi2=stat, df=df, bins=len(me))
    return rep.evaluate()


def poisson_pmf(k: np.ndarray, mean: float) -> np.ndarray:
    k = np.asarray(k)
    return np.exp(-mean + k * math.log(mean) - np.array([math.lgamma(int(j) + 1) for j in k.ravel()]).reshape(k.shape))


def poisson_count_gof(counts, mean: Optional[float] = None, name: str = "poisson_gof",
                      p_floor: float = P_FLOOR, seed=None, citation: str = "") -> TestReport:
    """Chi-square goodness of fit of per-replica counts to a Poisson law.

    With ``mean=None`` the mean is estimated from the counts (one fitted parameter).
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.size
    fitted = mean is None
    mu = float(counts.mean()) if fitted else float(mean)
    kmax = int(counts.max()) if n else 0
    ks = np.arange(kmax + 1)
    observed = np.bincount(counts, minlength=kmax + 1).astype(float)
    expected = n * poisson_pmf(ks, mu)
    # upper tail mass goes in the last bin
    expected[-1] += n * max(0.0, 1.0 - poisson_pmf(ks, mu).sum())
    rep = chisq_poisson(observed, expected, name=name, n_fitted=int(fitted), p_floor=p_floor,
                        seed=seed, citation=citation)
    rep.n_samples = n
    rep.extra["mean"] = mu
    rep.extra["mean_fitted"] = fitted
    return rep


# --- independence ------------------------------------------------------------------

def _double_centered(x):
    d = np.abs(x[:, None] - x[None, :])
    return d - d.mean(axis=0)[None, :] - d.mean(axis=1)[:, None] + d.mean()


def distance_correlation(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a = _double_centered(x)
    b = _double_centered(y)
    dcov = np.mean(a * b)
    dvx = np.mean(a * a)
    dvy = np.mean(b * b)
    if dvx <= 0 or dvy <= 0:
        return 0.0
    return float(math.sqrt(max(dcov, 0.0) / math.sqrt(dvx * dvy)))


def independence_permutation(x, y, n_perm: int = 999, rng: Optional[RngStream] = None,
                             max_n: int = 1000, name: str = "independence_permutation",
                             p_floor: float = P_FLOOR, citation: str = "") -> TestReport:
    """Distance-covariance permutation test of independence.

    Pairs beyond ``max_n`` are thinned to the first ``max_n`` (the O(n^2)
    distance matrices bound the usable size).
    """
    if n_perm < 99:
        raise ValueError("n_perm must be at least 99")
    x = _clean(x, "x")
    y = _clean(y, "y")
    if x.size != y.size:
        raise ValueError("x and y must have equal length")
    if rng is None:
        rng = RngStream(0, 0)
    n = min(x.size, max_n)
    x = x[:n]
    y = y[:n]
    a = _double_centered(x)
    b = _double_centered(y)
    obs = float(np.mean(a * b))
    g = rng.generator
    exceed = 0
    for _ in range(n_perm):
        p = g.permutation(n)
        if float(np.mean(a * b[np.ix_(p, p)])) >= obs:
            exceed += 1
    pval = (exceed + 1) / (n_perm + 1)
    rep = TestReport(name=name, statistic=pval, threshold=p_floor, kind="lower", p_value=pval,
                     n_samples=n, seed=rng.master_seed, citation=citation)
    rep.extra["dcor"] = distance_correlation(x, y)
    return rep.evaluate()


def correlation_check(x, y, n_sigma: float = 3.0, name: str = "correlation_zero",
                      citation: str = "") -> TestReport:
    """Sample correlation within ``n_sigma`` standard errors (1/sqrt(n)) of zero."""
    x = _clean(x, "x")
    y = _clean(y, "y")
    r = float(np.corrcoef(x, y)[0, 1])
    z = abs(r) * math.sqrt(x.size)
    return TestReport(name=name, statistic=z, threshold=n_sigma, n_samples=x.size,
                      citation=citation, extra={"r": r}).evaluate()


def moment_check(samples, expected: float, rel_tol: Optional[float] = None,
                 abs_tol: Optional[float] = None, name: str = "moment", citation: str = "") -> TestReport:
    x = _clean(samples, "samples")
    m = float(np.mean(x))
    err = abs(m - expected)
    if rel_tol is not None:
        stat, thr = err / abs(expected), rel_tol
    elif abs_tol is not None:
        stat, thr = err, abs_tol
    else:
        raise ValueError("give rel_tol or abs_tol")
    se = float(np.std(x) / math.sqrt(x.size))
    return TestReport(name=name, statistic=stat, threshold=thr, n_samples=x.size, citation=citation,
                      extra={"mean": m, "expected": expected, "stderr": se}).evaluate()


def value_check(value: float, expected: float, tol: float, name: str = "value",
                relative: bool = False, citation: str = "") -> TestReport:
    err = abs(value - expected)
    if relative:
        err /= abs(expected)
    return TestReport(name=name, statistic=float(err), threshold=tol, citation=citation,
                      extra={"value": value, "expected": expected}).evaluate()


# --- quadrature ------------------------------------------------------------------

class QuadratureError(RuntimeError):
    pass


# 15-point Kronrod / 7-point Gauss abscissae and weights (QUADPACK qk15)
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WGFULL = np.zeros(15)
# gauss nodes are the odd-indexed kronrod nodes xgk[1], xgk[3], xgk[5], xgk[7]=0
for _j, _i in enumerate((1, 3, 5)):
    _WGFULL[_i] = _WG[_j]
    _WGFULL[14 - _i] = _WG[_j]
_WGFULL[7] = _WG[3]


def _gk15(f, a, b, vectorized):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c + h * _NODES
    if vectorized:
        fx = np.asarray(f(x), dtype=float)
    else:
        fx = np.array([f(xi) for xi in x], dtype=float)
    k = h * float(np.dot(_WK, fx))
    g = h * float(np.dot(_WGFULL, fx))
    return k, abs(k - g)


def _map_infinite(f, a, b):
    """Return (g, lo, hi) with int_a^b f = int_lo^hi g on a finite range."""
    if math.isinf(a) and math.isinf(b):
        def g(s):
            x = s / (1.0 - s * s)
            return f(x) * (1.0 + s * s) / (1.0 - s * s) ** 2
        return g, -1.0, 1.0
    if math.isinf(b):
        def g(s):
            x = a + s / (1.0 - s)
            return f(x) / (1.0 - s) ** 2
        return g, 0.0, 1.0
    if math.isinf(a):
        def g(s):
            x = b - (1.0 - s) / s
            return f(x) / s ** 2
        return g, 0.0, 1.0
    return f, a, b


def quadrature(f: Callable, a: float, b: float, tol: float = 1e-10, rel_tol: float = 1e-12,
               max_intervals: int = 4000, vectorized: bool = False, breakpoints: Sequence[float] = (),
               full_output: bool = False):
    """Globally adaptive 15-point Gauss-Kronrod integration of f over [a, b].

    Infinite limits are mapped to finite ones. The interval with the largest
    error estimate is bisected until the summed estimate is below
    max(tol, rel_tol * |I|). Endpoints are never evaluated. Raises
    QuadratureError if the budget is exhausted.
    """
    if a == b:
        return (0.0, 0.0) if full_output else 0.0
    sign = 1.0
    if a > b:
        a, b = b, a
        sign = -1.0
    g, lo, hi = _map_infinite(f, a, b)
    if (lo, hi) != (a, b):
        pts = [lo, hi]
    else:
        pts = sorted({a, b, *[p for p in breakpoints if a < p < b]})
    heap = []
    total = 0.0
    err = 0.0
    for l, r in zip(pts[:-1], pts[1:]):
        k, e = _gk15(g, l, r, vectorized)
        heapq.heappush(heap, (-e, l, r, k))
        total += k
        err += e
    n = len(heap)
    while err > max(tol, rel_tol * abs(total)):
        if n >= max_intervals:
            if full_output:
                raise QuadratureError(f"no convergence: estimate {total}, error {err}")
            raise QuadratureError(f"quadrature did not converge (error estimate {err:.3g} > tol {tol:.3g})")
        ne, l, r, k = heapq.heappop(heap)
        m = 0.5 * (l + r)
        if not (l < m < r):
            break
        k1, e1 = _gk15(g, l, m, vectorized)
        k2, e2 = _gk15(g, m, r, vectorized)
        heapq.heappush(heap, (-e1, l, m, k1))
        heapq.heappush(heap, (-e2, m, r, k2))
        total += k1 + k2 - k
        err += e1 + e2 + ne
        n += 1
    # recompute the sum to shed accumulated rounding from incremental updates
    total = math.fsum(item[3] for item in heap)
    err = sum(-item[0] for item in heap)
    if full_output:
        return sign * total, err
    return sign * total
