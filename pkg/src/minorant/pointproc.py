"""Poisson point process of minorant faces.

Faces of the convex minorant of Brownian motion on [0, theta * Gamma_1]
form a Poisson process in (length x, slope s) with intensity

    exp(-(x / 2) (2 / theta + s**2)) / sqrt(2 pi x).

Integrating out x gives the slope intensity 1 / sqrt(k + s**2), k = 2 / theta,
whose cumulative mass is asinh(s / sqrt(k)); integrating out s gives the
length intensity exp(-x / theta) / x. ``theta = inf`` (k = 0) is the
concave-majorant process of a motion on [0, inf), slope intensity 1 / s.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .hull import Face, MinorantDecomposition
from .randkit import RngStream, arcsinh_array, expint_e1
from .stats import TestReport, combine, correlation_check, independence_permutation, ks_one_sample

MIN_LAW_SAMPLES = 1000


@dataclass(frozen=True)
class FacePoint:
    length: float
    slope: float

    @property
    def increment(self) -> float:
        return self.length * self.slope


@dataclass
class FaceProcessSample:
    lengths: np.ndarray
    slopes: np.ndarray
    window: tuple = (-math.inf, math.inf, 0.0)  # (slope_lo, slope_hi, length_floor)
    total_time: Optional[float] = None
    remainder: float = 0.0
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self.lengths = np.asarray(self.lengths, dtype=float)
        self.slopes = np.asarray(self.slopes, dtype=float)

    def __len__(self) -> int:
        return int(self.lengths.size)

    @property
    def increments(self) -> np.ndarray:
        return self.lengths * self.slopes

    @property
    def points(self) -> list:
        return [FacePoint(float(x), float(s)) for x, s in zip(self.lengths, self.slopes)]

    def dump_csv(self, path, header: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow(["length", "slope", "increment"])
            for x, s in zip(self.lengths, self.slopes):
                w.writerow([repr(float(x)), repr(float(s)), repr(float(x * s))])


def _k(theta: float) -> float:
    if not theta > 0:
        raise ValueError("theta must be positive")
    return 0.0 if math.isinf(theta) else 2.0 / theta


def slope_mass(s, theta: float = 1.0):
    """Cumulative slope intensity: asinh(s / sqrt(k)), or log(s) when k = 0."""
    k = _k(theta)
    s = np.asarray(s, dtype=float)
    if k == 0.0:
        return np.log(s)
    return arcsinh_array(s / math.sqrt(k))


def slope_mass_inverse(m, theta: float = 1.0):
    k = _k(theta)
    m = np.asarray(m, dtype=float)
    if k == 0.0:
        return np.exp(m)
    return math.sqrt(k) * np.sinh(m)


def mean_count_slope_window(a: float, b: float, theta: float = 1.0) -> float:
    """Expected number of faces with slope in [a, b]; log((b+sqrt(2+b^2))/(a+sqrt(2+a^2))) at theta=1."""
    if not a < b:
        raise ValueError("need a < b")
    if math.isinf(a) or math.isinf(b):
        return math.inf
    return float(slope_mass(b, theta) - slope_mass(a, theta))


def mean_count_length_floor(x0: float, theta: float = 1.0) -> float:
    """Expected number of faces of length >= x0 (any slope): E1(x0 / theta)."""
    if math.isinf(theta):
        raise ValueError("length marginal is not integrable for theta = inf")
    return expint_e1(x0 / theta).value


def _lengths_given_slopes(g, slopes, k):
    return g.standard_gamma(0.5, size=slopes.size) * 2.0 / (k + slopes * slopes)


def sample_face_process(rng: RngStream, window=(-1.0, 1.0), theta: float = 1.0,
                        length_floor: float = 0.0) -> FaceProcessSample:
    """Poisson process of (length, slope) restricted to a window.

    Slopes come from the inverse of the slope mass on [a, b), lengths from
    the exact conditional Gamma(1/2) law. An unbounded slope window carries
    infinite mass and is only accepted together with a positive length floor,
    in which case lengths are drawn first from exp(-x/theta)/x on [floor, inf)
    and slopes given length are Normal(0, 1/x).
    """
    a, b = float(window[0]), float(window[1])
    if not a < b:
        raise ValueError("slope window must satisfy a < b")
    if length_floor < 0:
        raise ValueError("length_floor must be non-negative")
    k = _k(theta)
    g = rng.generator
    if math.isfinite(a) and math.isfinite(b):
        if k == 0.0 and a <= 0:
            raise ValueError("theta = inf needs a positive lower slope")
        lo, hi = float(slope_mass(a, theta)), float(slope_mass(b, theta))
        n = int(g.poisson(hi - lo))
        s = slope_mass_inverse(lo + (hi - lo) * g.random(n), theta)
        x = _lengths_given_slopes(g, s, k)
        keep = x >= length_floor
        return FaceProcessSample(x[keep], s[keep], (a, b, length_floor))
    if length_floor <= 0 or math.isinf(theta):
        raise ValueError("unbounded slope windows have infinite mass; give a length floor")
    y0 = length_floor / theta
    n = int(g.poisson(expint_e1(y0).value))
    y = np.empty(n)
    filled = 0
    # density e^{-y}/y on [y0, inf): propose y0 + Exp(1), accept with y0/y
    while filled < n:
        need = n - filled
        prop = y0 + g.standard_exponential(2 * need + 8)
        acc = prop[g.random(prop.size) * prop < y0]
        take = acc[:need]
        y[filled: filled + take.size] = take
        filled += take.size
    x = theta * y
    s = g.standard_normal(n) / np.sqrt(x)
    keep = (s >= a) & (s < b)
    return FaceProcessSample(x[keep], s[keep], (a, b, length_floor))


def sample_ordered_faces(rng: RngStream, n: int, theta: float = 2.0, start_slope: float = 0.0,
                         max_slope: float = math.inf) -> FaceProcessSample:
    """The first n faces above ``start_slope`` in increasing slope order.

    Slope masses above start_slope are partial sums of unit exponentials, so
    the i-th slope is exact; lengths follow the conditional Gamma(1/2) law.
    Faces beyond ``max_slope`` are dropped.
    """
    if n < 1:
        raise ValueError("n must be positive")
    k = _k(theta)
    g = rng.generator
    m0 = float(slope_mass(start_slope, theta))
    s = slope_mass_inverse(m0 + np.cumsum(g.standard_exponential(n)), theta)
    x = _lengths_given_slopes(g, s, k)
    keep = s <= max_slope
    return FaceProcessSample(x[keep], s[keep], (start_slope, max_slope, 0.0))


def ordered_faces_batch(rng: RngStream, m: int, n: int, theta: float = 2.0,
                        start_slope: float = 0.0):
    """(lengths, slopes) arrays of shape (m, n) for m independent ordered processes."""
    k = _k(theta)
    g = rng.generator
    m0 = float(slope_mass(start_slope, theta))
    s = slope_mass_inverse(m0 + np.cumsum(g.standard_exponential((m, n)), axis=1), theta)
    x = g.standard_gamma(0.5, size=(m, n)) * 2.0 / (k + s * s)
    return x, s


def stick_break_faces(rng: RngStream, n_terms: int, scale: float = 1.0) -> FaceProcessSample:
    """Faces of the minorant on [0, scale] by uniform stick-breaking.

    Lengths J_i = W_i prod_{j<i}(1 - W_j) (times ``scale``); increments
    sqrt(J_i) Z_i. The unbroken remainder is reported.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be positive")
    g = rng.generator
    w = g.random(n_terms)
    rest = np.concatenate(([1.0], np.cumprod(1.0 - w)))
    j = w * rest[:-1] * scale
    z = g.standard_normal(n_terms)
    slopes = z / np.sqrt(j)
    return FaceProcessSample(j, slopes, total_time=float(scale), remainder=float(rest[-1] * scale))


def stick_break_batch(rng: RngStream, m: int, n_terms: int):
    """(J, remainder) for m stick-breaking sequences; J has shape (m, n_terms)."""
    g = rng.generator
    w = g.random((m, n_terms))
    rest = np.cumprod(1.0 - w, axis=1)
    j = w.copy()
    j[:, 1:] *= rest[:, :-1]
    return j, rest[:, -1]


def assemble_minorant(points, start=(0.0, 0.0)) -> MinorantDecomposition:
    """Concatenate faces in order of increasing slope.

    ``points`` may be a FaceProcessSample or an iterable of FacePoint.
    Equal slopes are ordered by decreasing length and flagged.
    """
    if isinstance(points, FaceProcessSample):
        x, s = points.lengths, points.slopes
    else:
        pts = list(points)
        x = np.array([p.length for p in pts], dtype=float)
        s = np.array([p.slope for p in pts], dtype=float)
    if np.any(x <= 0):
        raise ValueError("face lengths must be positive")
    order = np.lexsort((-x, s))
    x, s = x[order], s[order]
    flags = []
    if s.size > 1 and np.any(np.diff(s) == 0):
        flags.append("slope_tie")
    t0, v0 = float(start[0]), float(start[1])
    times = t0 + np.concatenate(([0.0], np.cumsum(x)))
    values = v0 + np.concatenate(([0.0], np.cumsum(x * s)))
    faces = [Face(float(x[i]), float(s[i]), float(times[i]), float(values[i])) for i in range(x.size)]
    vertices = [(float(a), float(b)) for a, b in zip(times, values)]
    return MinorantDecomposition(faces, vertices, "motion", flags=flags)


# --- law checks ---------------------------------------------------------------------

def min_slope_survival(a):
    """P(S_1 > a) = sqrt(1 + a^2) - a for the meander-side process (theta = 2)."""
    a = np.asarray(a, dtype=float)
    return np.sqrt(1.0 + a * a) - a


def ith_slope_cdf(a, i: int):
    """CDF of the i-th smallest slope: P(Gamma(i) <= -log(sqrt(1+a^2) - a))."""
    from .randkit import gamma_p
    m = arcsinh_array(np.maximum(np.asarray(a, dtype=float), 0.0))
    return np.array([gamma_p(i, float(v)) for v in np.ravel(m)]).reshape(np.shape(m))


def chi2_1_cdf(x):
    from .randkit import erf_array
    x = np.asarray(x, dtype=float)
    return erf_array(np.sqrt(np.maximum(x, 0.0) / 2.0))


def ith_face_law_checks(lengths, slopes, i: int = 1, ks_threshold: float = 0.015,
                        rng: Optional[RngStream] = None, independence: bool = True) -> TestReport:
    """Checks on the i-th face (length, slope) of the theta=2 nonnegative-slope process.

    (a) slope against its CDF; (b) length * (1 + slope^2) against chi^2_1;
    (c) independence of the two.
    """
    if i < 1:
        raise ValueError("face index starts at 1")
    x = np.asarray(lengths, dtype=float)
    s = np.asarray(slopes, dtype=float)
    flags = []
    if x.size < MIN_LAW_SAMPLES:
        flags.append("insufficient_samples")
    w2 = x * (1.0 + s * s)
    reps = [
        ks_one_sample(s, lambda a: ith_slope_cdf(a, i), ks_threshold, name=f"face{i}_slope_law"),
        ks_one_sample(w2, chi2_1_cdf, ks_threshold, name=f"face{i}_length_chi2"),
    ]
    if independence:
        reps.append(independence_permutation(w2, s, rng=rng or RngStream(0, i),
                                             name=f"face{i}_independence"))
    out = combine(f"face{i}_laws", reps)
    out.flags.extend(flags)
    if flags:
        out.passed = False
    return out


def min_slope_face_law_checks(lengths, slopes, ks_threshold: float = 0.015,
                              rng: Optional[RngStream] = None) -> TestReport:
    """ith_face_law_checks at i = 1, plus the point value P(S_1 > 1) = sqrt(2) - 1."""
    rep = ith_face_law_checks(lengths, slopes, 1, ks_threshold, rng)
    s = np.asarray(slopes, dtype=float)
    frac = float(np.mean(s > 1.0))
    from .stats import value_check
    rep.details.append(value_check(frac, math.sqrt(2.0) - 1.0, 0.005, name="P(S1>1)"))
    rep.statistic = float(sum(not d.passed for d in rep.details))
    rep.evaluate()
    if "insufficient_samples" in rep.flags:
        rep.passed = False
    return rep


def window_counts(slopes_per_replica, edges) -> np.ndarray:
    """Counts per replica (rows) and half-open slope window (columns)."""
    edges = np.asarray(edges, dtype=float)
    out = np.zeros((len(slopes_per_replica), edges.size - 1), dtype=np.int64)
    for r, s in enumerate(slopes_per_replica):
        out[r] = np.histogram(np.asarray(s), bins=edges)[0]
    return out


def disjoint_window_independence(counts, n_sigma: float = 3.0) -> TestReport:
    """Pairwise correlation of counts in disjoint windows, each within n_sigma of zero."""
    counts = np.asarray(counts, dtype=float)
    reps = []
    for a in range(counts.shape[1]):
        for b in range(a + 1, counts.shape[1]):
            reps.append(correlation_check(counts[:, a], counts[:, b], n_sigma, name=f"corr_w{a}_w{b}"))
    return combine("disjoint_window_independence", reps)
