"""Greatest convex minorant / least concave majorant of a sampled path."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .pathsim import DiscretePath

COLLINEAR_RTOL = 1e-12


@dataclass(frozen=True)
class Face:
    length: float
    slope: float
    start_time: float
    start_value: float
    short: bool = False  # spans a single grid step

    @property
    def end_time(self) -> float:
        return self.start_time + self.length

    @property
    def end_value(self) -> float:
        return self.start_value + self.length * self.slope


@dataclass
class MinorantDecomposition:
    faces: list
    vertices: list
    source_kind: str = "motion"
    majorant: bool = False
    flags: list = field(default_factory=list)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([f.length for f in self.faces])

    @property
    def slopes(self) -> np.ndarray:
        return np.array([f.slope for f in self.faces])

    @property
    def vertex_times(self) -> np.ndarray:
        return np.array([v[0] for v in self.vertices])

    @property
    def vertex_values(self) -> np.ndarray:
        return np.array([v[1] for v in self.vertices])

    def evaluate(self, t) -> np.ndarray:
        """Piecewise-linear interpolation through the vertices."""
        return np.interp(t, self.vertex_times, self.vertex_values)

    def as_path(self) -> DiscretePath:
        return DiscretePath(self.vertex_times, self.vertex_values, self.source_kind)

    def dump_csv(self, path, header: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow(["face_index", "start_time", "start_value", "length", "slope"])
            for i, f in enumerate(self.faces):
                w.writerow([i, repr(f.start_time), repr(f.start_value), repr(f.length), repr(f.slope)])


@njit(cache=True)
def _lower_hull_indices(t, x, rtol):
    """Monotone-chain lower hull; returns vertex indices (endpoints included).

    A point is popped when the turn it makes is not strictly convex, with
    near-collinear triples (relative tolerance ``rtol``) treated as collinear.
    """
    n = t.shape[0]
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for k in range(n):
        while top >= 2:
            i = stack[top - 2]
            j = stack[top - 1]
            # slope(i, j) >= slope(j, k)  <=>  (x_j - x_i)(t_k - t_j) >= (x_k - x_j)(t_j - t_i)
            lhs = (x[j] - x[i]) * (t[k] - t[j])
            rhs = (x[k] - x[j]) * (t[j] - t[i])
            if lhs - rhs >= -rtol * (abs(lhs) + abs(rhs)):
                top -= 1
            else:
                break
        stack[top] = k
        top += 1
    return stack[:top].copy()


def _check_grid(times, values):
    t = np.ascontiguousarray(times, dtype=np.float64)
    x = np.ascontiguousarray(values, dtype=np.float64)
    if t.ndim != 1 or t.shape != x.shape:
        raise ValueError("times and values must be 1-d arrays of equal length")
    if t.size < 2:
        raise ValueError("need at least two points")
    if not np.all(np.diff(t) > 0):
        raise ValueError("time grid must be strictly increasing")
    if not (np.isfinite(t).all() and np.isfinite(x).all()):
        raise ValueError("non-finite path values")
    return t, x


def minorant_vertex_indices(times, values) -> np.ndarray:
    t, x = _check_grid(times, values)
    return _lower_hull_indices(t, x, COLLINEAR_RTOL)


def _decomposition(t, x, idx, kind, sign):
    faces = []
    for a, b in zip(idx[:-1], idx[1:]):
        length = t[b] - t[a]
        slope = (x[b] - x[a]) / length
        faces.append(Face(float(length), float(sign * slope), float(t[a]), float(sign * x[a]), short=bool(b - a == 1)))
    vertices = [(float(t[i]), float(sign * x[i])) for i in idx]
    dec = MinorantDecomposition(faces, vertices, kind, majorant=sign < 0)
    if faces and (faces[0].short or faces[-1].short):
        dec.flags.append("endpoint_short_face")
    return dec


def convex_minorant(path) -> MinorantDecomposition:
    """Exact greatest convex minorant of the graph {(t_i, x_i)} in one pass."""
    t, x = _check_grid(path.times, path.values)
    idx = _lower_hull_indices(t, x, COLLINEAR_RTOL)
    return _decomposition(t, x, idx, path.kind, 1.0)


def concave_majorant(path) -> MinorantDecomposition:
    """Least concave majorant, as the negated minorant of the negated path."""
    t, x = _check_grid(path.times, path.values)
    idx = _lower_hull_indices(t, -x, COLLINEAR_RTOL)
    return _decomposition(t, -x, idx, path.kind, -1.0)


@dataclass
class FaceSet:
    lengths: np.ndarray
    slopes: np.ndarray
    start_times: np.ndarray

    def __len__(self) -> int:
        return int(self.lengths.size)


def faces_in_window(decomp: MinorantDecomposition, slope_lo: float, slope_hi: float,
                    min_length: float = 0.0) -> FaceSet:
    """Faces with slope in [slope_lo, slope_hi) and length >= min_length."""
    if min_length < 0:
        raise ValueError("min_length must be non-negative")
    s = decomp.slopes
    L = decomp.lengths
    st = np.array([f.start_time for f in decomp.faces])
    if s.size == 0:
        return FaceSet(L, s, st)
    keep = (s >= slope_lo) & (s < slope_hi) & (L >= min_length)
    return FaceSet(L[keep], s[keep], st[keep])


def brute_force_minorant_indices(times, values) -> np.ndarray:
    """O(n^2) oracle: k is a vertex iff every chord across it passes strictly above.

    Equivalently max_{i<k} slope(i,k) < min_{j>k} slope(k,j); the two grid
    endpoints are always vertices.
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(values, dtype=float)
    n = t.size
    ds = (x[None, :] - x[:, None]) / np.where(np.eye(n, dtype=bool), 1.0, t[None, :] - t[:, None])
    out = [0]
    for k in range(1, n - 1):
        left = ds[:k, k].max()
        right = ds[k, k + 1:].min()
        # scale-aware strictness so that float noise on collinear points merges them
        tol = COLLINEAR_RTOL * 4 * (abs(left) + abs(right) + 1e-300)
        if left < right - tol:
            out.append(k)
    out.append(n - 1)
    return np.array(out, dtype=np.int64)


# --- batch kernels over rows of a 2-d array of paths on a shared grid ---------

@njit(cache=True)
def window_counts_batch(values, dt, edges, row_scale):
    """Per-row count of minorant faces with slope in [edges[j], edges[j+1]).

    ``values`` has one path per row on a uniform grid of step ``dt``; the
    slopes of row r are multiplied by ``row_scale[r]`` before binning.
    """
    m, n = values.shape
    nb = edges.shape[0] - 1
    out = np.zeros((m, nb), dtype=np.int64)
    t = np.arange(n) * dt
    for r in range(m):
        idx = _lower_hull_indices(t, values[r], COLLINEAR_RTOL)
        for q in range(idx.shape[0] - 1):
            a = idx[q]
            b = idx[q + 1]
            s = row_scale[r] * (values[r, b] - values[r, a]) / ((b - a) * dt)
            for j in range(nb):
                if edges[j] <= s < edges[j + 1]:
                    out[r, j] += 1
                    break
    return out


@njit(cache=True)
def argmin_slope_batch(values, dt, slopes):
    """Per-row, per-slope time index of the minimum of x(t) - a t.

    That is the vertex where the minorant slope crosses a, read off the hull.
    """
    m, n = values.shape
    out = np.zeros((m, slopes.shape[0]), dtype=np.int64)
    t = np.arange(n) * dt
    for r in range(m):
        idx = _lower_hull_indices(t, values[r], COLLINEAR_RTOL)
        for j in range(slopes.shape[0]):
            a = slopes[j]
            pos = idx[idx.shape[0] - 1]
            for q in range(idx.shape[0] - 1):
                s = (values[r, idx[q + 1]] - values[r, idx[q]]) / ((idx[q + 1] - idx[q]) * dt)
                if s > a:
                    pos = idx[q]
                    break
            out[r, j] = pos
    return out


@njit(cache=True)
def last_vertices_batch(values, dt, k):
    """Per-row times of the k vertices preceding the right endpoint.

    Entries are NaN when the minorant has fewer vertices.
    """
    m, n = values.shape
    out = np.full((m, k), np.nan)
    t = np.arange(n) * dt
    for r in range(m):
        idx = _lower_hull_indices(t, values[r], COLLINEAR_RTOL)
        nv = idx.shape[0]
        for j in range(k):
            if nv - 2 - j >= 0:
                out[r, j] = t[idx[nv - 2 - j]]
    return out


@njit(cache=True)
def first_faces_batch(values, dt, k):
    """Per-row (length, slope) of the first k faces from the left endpoint."""
    m, n = values.shape
    lengths = np.full((m, k), np.nan)
    slopes = np.full((m, k), np.nan)
    t = np.arange(n) * dt
    for r in range(m):
        idx = _lower_hull_indices(t, values[r], COLLINEAR_RTOL)
        for j in range(min(k, idx.shape[0] - 1)):
            a = idx[j]
            b = idx[j + 1]
            lengths[r, j] = (b - a) * dt
            slopes[r, j] = (values[r, b] - values[r, a]) / ((b - a) * dt)
    return lengths, slopes


@njit(cache=True)
def meander_taus_batch(walks, k):
    """Vertex times of meanders cut from motion rows, as tau_1..tau_k.

    Each row is split at its minimum, the longer side (the pre-minimum side
    reversed) is taken as a meander and normalized to unit length; tau_n is
    one minus the time of its n-th vertex after 0. NaN marks missing vertices.
    """
    m, n1 = walks.shape
    out = np.full((m, k), np.nan)
    buf = np.empty(n1)
    for r in range(m):
        j0 = 0
        lo = walks[r, 0]
        for j in range(1, n1):
            if walks[r, j] < lo:
                lo = walks[r, j]
                j0 = j
        post = n1 - 1 - j0
        if post >= j0:
            steps = post
            for j in range(steps + 1):
                buf[j] = walks[r, j0 + j] - lo
        else:
            steps = j0
            for j in range(steps + 1):
                buf[j] = walks[r, j0 - j] - lo
        if steps < 2:
            continue
        t = np.arange(steps + 1) / steps
        idx = _lower_hull_indices(t, buf[: steps + 1], COLLINEAR_RTOL)
        for q in range(min(k, idx.shape[0] - 1)):
            out[r, q] = 1.0 - t[idx[q + 1]]
    return out



@njit(cache=True)
def _fragment(T, X, c, post):
    """Meander fragment in its own coordinates, starting at the minimum."""
    if post:
        return T[c:] - T[c], X[c:] - X[c]
    return T[c] - T[c::-1], X[c::-1] - X[c]


@njit(cache=True)
def _first_faces_boundary(Ft, Fx, idx, k):
    """Lower boundary that decides the first k vertices of the hull.

    Up to the k-th vertex it is the hull itself; beyond it, the extension of
    the k-th face. Returns the boundary and the fragment index of vertex k.
    """
    n = Ft.shape[0]
    b = np.empty(n)
    kk = min(k, idx.shape[0] - 1)
    for q in range(kk):
        i0 = idx[q]
        i1 = idx[q + 1]
        s = (Fx[i1] - Fx[i0]) / (Ft[i1] - Ft[i0])
        for j in range(i0, i1 + 1):
            b[j] = Fx[i0] + s * (Ft[j] - Ft[i0])
    vk = idx[kk]
    if vk < n - 1:
        i0 = idx[kk - 1]
        s = (Fx[vk] - Fx[i0]) / (Ft[vk] - Ft[i0])
        for j in range(vk + 1, n):
            b[j] = Fx[vk] + s * (Ft[j] - Ft[vk])
    return b, vk


@njit(cache=True)
def _boundary_gaps(T, X, c, post, k):
    """Height of every point above the boundary that matters for it.

    Meander side: the first-k-faces boundary of the fragment hull;
    discarded side: the minimum level.
    """
    n = T.shape[0]
    d = np.empty(n)
    Ft, Fx = _fragment(T, X, c, post)
    idx = _lower_hull_indices(Ft, Fx, COLLINEAR_RTOL)
    b, _ = _first_faces_boundary(Ft, Fx, idx, k)
    m = X[c]
    for i in range(n):
        d[i] = X[i] - m
    for j in range(Ft.shape[0]):
        d[c + j if post else c - j] = Fx[j] - b[j]
    return d


@njit(cache=True)
def _refine_meander_row(t, x, k, threshold, min_gap, max_rounds):
    """Exact bridge refinement of one motion path until the first k meander vertices are resolved.

    An interval of duration h whose endpoints sit d0, d1 above a line dips
    below it with probability exp(-2 d0 d1 / h). Intervals are halved with
    exact bridge midpoints while that probability exceeds ``threshold``
    against the boundary that matters: the minimum level on the discarded
    side, and the hull (extended past vertex k) on the meander side.

    Points more than a safe margin above the full hull can never become
    vertices, so after the first pass only points near it are carried;
    intervals across dropped points are flagged as gaps and never split.
    Returns (T, X, rounds used) of the carried points.
    """
    n0 = t.shape[0]
    log_thr = np.log(threshold)
    dt = t[1] - t[0]
    margin = 4.0 * np.sqrt(-0.5 * log_thr * dt)
    c = np.argmin(x)
    post = 2.0 * (t[c] - t[0]) <= t[n0 - 1] - t[0]
    # compress against the whole hull: new early vertices relabel the faces,
    # so points near later faces must survive
    d = _boundary_gaps(t, x, c, post, n0)
    keep = np.zeros(n0, dtype=np.bool_)
    keep[0] = True
    keep[n0 - 1] = True
    for i in range(n0):
        if d[i] < margin:
            keep[i] = True
            if i > 0:
                keep[i - 1] = True
            if i < n0 - 1:
                keep[i + 1] = True
    nk = 0
    for i in range(n0):
        if keep[i]:
            nk += 1
    T = np.empty(nk)
    X = np.empty(nk)
    gap = np.zeros(nk, dtype=np.bool_)  # gap[i]: (i, i+1) is not a sampled interval
    p = 0
    last = -1
    for i in range(n0):
        if keep[i]:
            T[p] = t[i]
            X[p] = x[i]
            if p > 0 and i != last + 1:
                gap[p - 1] = True
            last = i
            p += 1
    rounds = 0
    while rounds < max_rounds:
        n = T.shape[0]
        c = np.argmin(X)
        m = X[c]
        post = 2.0 * (T[c] - T[0]) <= T[n - 1] - T[0]
        d = _boundary_gaps(T, X, c, post, k)
        mark = np.zeros(n - 1, dtype=np.bool_)
        nm = 0
        for i in range(n - 1):
            h = T[i + 1] - T[i]
            if gap[i] or h <= min_gap:
                continue
            d0 = max(d[i], 0.0)
            d1 = max(d[i + 1], 0.0)
            if -2.0 * d0 * d1 > log_thr * h:
                mark[i] = True
                nm += 1
        if nm == 0:
            break
        T2 = np.empty(n + nm)
        X2 = np.empty(n + nm)
        G2 = np.zeros(n + nm, dtype=np.bool_)
        p = 0
        for i in range(n - 1):
            T2[p] = T[i]
            X2[p] = X[i]
            G2[p] = gap[i]
            p += 1
            if mark[i]:
                h = T[i + 1] - T[i]
                T2[p] = T[i] + 0.5 * h
                X2[p] = 0.5 * (X[i] + X[i + 1]) + np.sqrt(0.25 * h) * np.random.standard_normal()
                p += 1
        T2[p] = T[n - 1]
        X2[p] = X[n - 1]
        T = T2
        X = X2
        gap = G2
        rounds += 1
    return T, X, rounds


@njit(cache=True)
def refined_meander_taus_batch(walks, k, seeds, threshold, min_gap, max_rounds):
    """tau_1..tau_k of meanders cut from motion rows on [0, 1], with exact refinement.

    Rows are motion on a uniform grid; each is refined by
    ``_refine_meander_row`` (bridge draws seeded per row from ``seeds``)
    before the longer fragment at the minimum is taken as the meander.
    Also returns the number of refinement rounds per row.
    """
    m, n1 = walks.shape
    out = np.full((m, k), np.nan)
    rounds = np.zeros(m, dtype=np.int64)
    t = np.arange(n1) / (n1 - 1.0)
    for r in range(m):
        np.random.seed(seeds[r])
        T, X, rounds[r] = _refine_meander_row(t, walks[r], k, threshold, min_gap, max_rounds)
        c = np.argmin(X)
        post = 2.0 * T[c] <= 1.0
        Ft, Fx = _fragment(T, X, c, post)
        idx = _lower_hull_indices(Ft, Fx, COLLINEAR_RTOL)
        L = Ft[Ft.shape[0] - 1]
        for q in range(min(k, idx.shape[0] - 1)):
            out[r, q] = 1.0 - Ft[idx[q + 1]] / L
    return out, rounds
