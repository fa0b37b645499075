import numpy as np
import pytest
from hypothesis import given, strategies as st

from minorant import hull
from minorant.pathsim import DiscretePath, bm_batch
from minorant.randkit import RngStream

paths = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=60)


def path_of(vals, horizon=1.0):
    v = np.asarray(vals, dtype=float)
    return DiscretePath(np.linspace(0, horizon, v.size), v)


def faces(dec):
    return [(round(f.length, 12), round(f.slope, 12)) for f in dec.faces]


def test_three_point_minorant():
    d = hull.convex_minorant(path_of([0, -1, 0]))
    assert faces(d) == [(0.5, -2.0), (0.5, 2.0)]
    assert d.vertices[1] == (0.5, -1.0)


def test_three_point_majorant():
    d = hull.concave_majorant(path_of([0, 1, 0]))
    assert faces(d) == [(0.5, 2.0), (0.5, -2.0)]
    assert d.majorant


def test_convex_input_is_its_own_minorant():
    t = np.linspace(0, 1, 11)
    d = hull.convex_minorant(DiscretePath(t, t ** 2))
    assert len(d.faces) == 10
    assert np.allclose(d.vertex_values, t ** 2)


def test_collinear_points_merge():
    d = hull.convex_minorant(path_of([0.0, 0.1, 0.2, 0.3, 0.4]))
    assert len(d.faces) == 1
    assert d.faces[0].slope == pytest.approx(0.4)


def test_rejects_bad_grids():
    with pytest.raises(ValueError):
        hull.minorant_vertex_indices([0, 0.5, 0.5, 1], [0, 1, 2, 3])
    with pytest.raises(ValueError):
        hull.minorant_vertex_indices([0], [0])


@given(paths)
def test_minorant_properties(vals):
    p = path_of(vals)
    d = hull.convex_minorant(p)
    scale = 1e-9 * (1 + np.abs(p.values).max())
    assert np.all(d.evaluate(p.times) <= p.values + scale)
    assert np.all(np.diff(d.slopes) > 0)
    assert d.vertex_times[0] == 0.0 and d.vertex_times[-1] == 1.0
    assert set(d.vertex_times) <= set(p.times)
    assert d.lengths.sum() == pytest.approx(1.0)
    for a, b in zip(d.faces[:-1], d.faces[1:]):
        assert a.end_time == pytest.approx(b.start_time)
        assert a.end_value == pytest.approx(b.start_value, abs=scale)


@given(paths)
def test_matches_brute_force(vals):
    p = path_of(vals)
    fast = hull.minorant_vertex_indices(p.times, p.values)
    slow = hull.brute_force_minorant_indices(p.times, p.values)
    assert np.array_equal(fast, slow)


def test_matches_brute_force_on_random_walks():
    g = RngStream(1).generator
    for _ in range(1000):
        n = int(g.integers(2, 101))
        t = np.cumsum(g.uniform(0.1, 1.0, n))
        t -= t[0]
        x = np.cumsum(g.standard_normal(n))
        assert np.array_equal(hull.minorant_vertex_indices(t, x), hull.brute_force_minorant_indices(t, x))


@given(paths)
def test_majorant_duality(vals):
    p = path_of(vals)
    maj = hull.concave_majorant(p)
    neg = hull.convex_minorant(p.negate())
    assert maj.vertex_times.tolist() == neg.vertex_times.tolist()
    assert np.array_equal(maj.vertex_values, -neg.vertex_values)
    assert np.all(np.diff(maj.slopes) < 0)
    assert np.all(maj.evaluate(p.times) >= p.values - 1e-9 * (1 + np.abs(p.values).max()))


@given(paths)
def test_idempotent(vals):
    d = hull.convex_minorant(path_of(vals))
    again = hull.convex_minorant(d.as_path())
    assert again.vertices == d.vertices


@given(paths, st.floats(-5, 5), st.floats(0.01, 5))
def test_window_partition_additivity(vals, lo, width):
    d = hull.convex_minorant(path_of(vals))
    edges = [-np.inf, lo, lo + width, np.inf]
    counts = [len(hull.faces_in_window(d, a, b)) for a, b in zip(edges[:-1], edges[1:])]
    assert sum(counts) == len(d.faces)
    assert len(hull.faces_in_window(d, -np.inf, np.inf)) == len(d.faces)
    assert len(hull.faces_in_window(d, lo, lo)) == 0


def test_window_length_floor():
    d = hull.convex_minorant(path_of([0, -0.5, -1.5, 0]))
    fs = hull.faces_in_window(d, -10, 10, min_length=0.5)
    assert len(fs) == 1 and fs.lengths[0] == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        hull.faces_in_window(d, -1, 1, min_length=-1)


def test_batch_kernels_agree_with_single_path():
    w = bm_batch(RngStream(2), 20, 200)
    dt = 1 / 200
    edges = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    counts = hull.window_counts_batch(w, dt, edges, np.ones(20))
    ln, sl = hull.first_faces_batch(w, dt, 3)
    am = hull.argmin_slope_batch(w, dt, np.array([0.0, 1.0]))
    lv = hull.last_vertices_batch(w, dt, 2)
    t = np.arange(201) * dt
    for r in range(20):
        d = hull.convex_minorant(DiscretePath(t, w[r]))
        for j in range(4):
            assert counts[r, j] == len(hull.faces_in_window(d, edges[j], edges[j + 1]))
        k = min(3, len(d.faces))
        assert np.allclose(ln[r, :k], d.lengths[:k]) and np.allclose(sl[r, :k], d.slopes[:k])
        for j, a in enumerate([0.0, 1.0]):
            assert am[r, j] == np.argmin(w[r] - a * t)
        vt = d.vertex_times
        assert lv[r, 0] == pytest.approx(vt[-2])


def test_meander_taus_are_ordered():
    w = bm_batch(RngStream(3), 200, 500)
    taus = hull.meander_taus_batch(w, 3)
    ok = ~np.isnan(taus).any(axis=1)
    assert ok.mean() > 0.5
    assert np.all(np.diff(taus[ok], axis=1) < 0)
    # a vertex at the right end of the grid reads as tau = 0
    assert np.all((taus[ok] >= 0) & (taus[ok] < 1))


def test_refined_taus_deterministic_and_ordered():
    w = bm_batch(RngStream(4), 50, 200)
    seeds = np.arange(50, dtype=np.int64)
    a, ra = hull.refined_meander_taus_batch(w, 3, seeds, 1e-4, 1e-9, 40)
    b, rb = hull.refined_meander_taus_batch(w, 3, seeds, 1e-4, 1e-9, 40)
    assert np.array_equal(a, b, equal_nan=True) and np.array_equal(ra, rb)
    ok = ~np.isnan(a).any(axis=1)
    assert np.all(np.diff(a[ok], axis=1) < 0)


def test_face_dump(tmp_path):
    d = hull.convex_minorant(path_of([0, -1, 0]))
    f = tmp_path / "faces.csv"
    d.dump_csv(f, "seed=1")
    lines = f.read_text().splitlines()
    assert lines[1] == "face_index,start_time,start_value,length,slope"
    assert len(lines) == 4
