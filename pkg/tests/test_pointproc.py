import math

import numpy as np
import pytest

from minorant import pointproc as pp
from minorant.pathsim import bm_batch
from minorant.randkit import RngStream, erf_array
from minorant.stats import chisq_poisson, ks_one_sample, ks_two_sample, poisson_count_gof


def pooled(samples):
    return np.concatenate([s.lengths for s in samples]), np.concatenate([s.slopes for s in samples])


def test_mean_counts():
    assert pp.mean_count_slope_window(0.0, 1.0) == pytest.approx(0.658478948462408354, abs=1e-14)
    assert pp.mean_count_slope_window(0.0, 1.0) == pytest.approx(math.log((1 + math.sqrt(3)) / math.sqrt(2)))
    assert pp.mean_count_length_floor(1.0) == pytest.approx(0.21938393439552027, abs=1e-14)
    assert pp.mean_count_slope_window(-1, math.inf) == math.inf
    with pytest.raises(ValueError):
        pp.mean_count_slope_window(1.0, 1.0)


def test_slope_mass_inverse_roundtrip():
    s = np.linspace(-5, 5, 21)
    for theta in (0.5, 1.0, 2.0):
        assert np.allclose(pp.slope_mass_inverse(pp.slope_mass(s, theta), theta), s)


def test_window_sampler_counts_and_slope_law():
    rng = RngStream(1)
    reps = [pp.sample_face_process(rng, (-2.0, 2.0)) for _ in range(20_000)]
    counts = np.array([len(r) for r in reps])
    assert poisson_count_gof(counts, pp.mean_count_slope_window(-2.0, 2.0)).p_value > 0.01
    x, s = pooled(reps)
    assert np.all((s >= -2) & (s < 2))
    edges = np.linspace(-2, 2, 11)
    obs = np.histogram(s, edges)[0]
    means = counts.size * np.diff(pp.slope_mass(edges))
    assert chisq_poisson(obs, means).p_value > 0.01
    # symmetry in the slope at theta = 1
    neg, pos = np.sum(s < 0), np.sum(s >= 0)
    assert abs(neg - pos) < 3 * math.sqrt(neg + pos)
    # length given slope: (k + s^2) L / 2 is Gamma(1/2)
    y = 0.5 * (2.0 + s * s) * x
    assert ks_one_sample(y, lambda v: erf_array(np.sqrt(v))).p_value > 0.01


def test_length_floor_count():
    rng = RngStream(2)
    counts = np.array([len(pp.sample_face_process(rng, (-math.inf, math.inf), length_floor=1.0))
                       for _ in range(100_000)])
    assert abs(counts.mean() / 0.21938393439552027 - 1) < 0.02
    with pytest.raises(ValueError):
        pp.sample_face_process(rng, (-math.inf, math.inf))


def test_theta_scales_lengths():
    rng = RngStream(3)
    reps = [pp.sample_face_process(rng, (-1.0, 1.0), theta=2.0) for _ in range(10_000)]
    x, s = pooled(reps)
    y = 0.5 * (1.0 + s * s) * x
    assert ks_one_sample(y, lambda v: erf_array(np.sqrt(v))).p_value > 0.01
    with pytest.raises(ValueError):
        pp.sample_face_process(rng, (-1.0, 1.0), theta=0.0)


def test_disjoint_windows_independent():
    rng = RngStream(4)
    edges = np.array([-2.0, -0.5, 0.5, 2.0])
    counts = pp.window_counts([pp.sample_face_process(rng, (-2.0, 2.0)).slopes for _ in range(10_000)], edges)
    assert pp.disjoint_window_independence(counts).passed


def test_stick_breaking():
    s = pp.stick_break_faces(RngStream(5), 30)
    assert np.all((s.lengths > 0) & (s.lengths < 1))
    assert s.lengths.sum() + s.remainder == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(s.increments, s.lengths * s.slopes)
    j, rest = pp.stick_break_batch(RngStream(6), 200_000, 5)
    assert abs(rest.mean() / 2 ** -5 - 1) < 0.03
    assert np.allclose(j.sum(axis=1) + rest, 1.0)
    j, rest = pp.stick_break_batch(RngStream(7), 10, 60)
    assert np.all(np.abs(j.sum(axis=1) - 1) < 1e-9)


def test_assemble_examples():
    d = pp.assemble_minorant([pp.FacePoint(1.0, 2.0)])
    assert d.vertices == [(0.0, 0.0), (1.0, 2.0)]
    d = pp.assemble_minorant([pp.FacePoint(1.0, 1.0), pp.FacePoint(1.0, -1.0)])
    assert d.vertices == [(0.0, 0.0), (1.0, -1.0), (2.0, 0.0)]
    d = pp.assemble_minorant([pp.FacePoint(1.0, 0.5), pp.FacePoint(2.0, 0.5)])
    assert "slope_tie" in d.flags and d.faces[0].length == 2.0
    with pytest.raises(ValueError):
        pp.assemble_minorant([pp.FacePoint(0.0, 1.0)])


def test_assembled_minimum_time_matches_paths():
    rng = RngStream(8)
    frac = []
    for _ in range(50_000):
        d = pp.assemble_minorant(pp.sample_face_process(rng, (-1000.0, 1000.0)))
        L = d.lengths
        frac.append(L[d.slopes < 0].sum() / L.sum() if L.size else 0.5)
    g = RngStream(9).generator
    direct = []
    for i in range(5):
        w = bm_batch(RngStream(9, i), 10_000, 1000)
        u = g.random(w.shape[0]) - 0.5
        t = np.abs((np.argmin(w, axis=1) + u) / 1000.0)
        direct.append(1.0 - np.abs(1.0 - t))
    assert ks_two_sample(np.array(frac), np.concatenate(direct)).statistic < 0.02


def test_meander_side_face_laws():
    x, s = pp.ordered_faces_batch(RngStream(10), 100_000, 3, theta=2.0)
    assert np.all(s[:, 0] > 0)
    assert np.all(np.diff(s, axis=1) > 0)
    rep = pp.min_slope_face_law_checks(x[:, 0], s[:, 0], rng=RngStream(11))
    assert rep.passed, rep.line()
    rep2 = pp.ith_face_law_checks(x[:, 1], s[:, 1], 2, rng=RngStream(12))
    assert rep2.passed
    assert rep2.details[1].statistic < 0.015
    assert pp.min_slope_survival(1.0) == pytest.approx(math.sqrt(2) - 1)
    assert pp.min_slope_survival(0.0) == 1.0


def test_ith_face_one_matches_min_slope_check():
    x, s = pp.ordered_faces_batch(RngStream(13), 5000, 1, theta=2.0)
    a = pp.ith_face_law_checks(x[:, 0], s[:, 0], 1, independence=False)
    b = pp.min_slope_face_law_checks(x[:, 0], s[:, 0])
    assert a.details[0].statistic == b.details[0].statistic
    assert not pp.ith_face_law_checks(x[:500, 0], s[:500, 0], 1, independence=False).passed


def test_count_below_slope_is_poisson():
    a = 1.0
    rng = RngStream(14)
    counts = np.array([len(pp.sample_face_process(rng, (0.0, a), theta=2.0)) for _ in range(20_000)])
    assert poisson_count_gof(counts, -math.log(math.sqrt(1 + a * a) - a)).p_value > 0.01


def test_ordered_faces_agree_with_window_sampler():
    x, s = pp.ordered_faces_batch(RngStream(15), 50_000, 1, theta=2.0)
    rng = RngStream(16)
    first = []
    for _ in range(50_000):
        r = pp.sample_face_process(rng, (0.0, 50.0), theta=2.0)
        if len(r):
            first.append(r.slopes.min())
    first = np.array(first)
    s1 = s[s[:, 0] < 50.0, 0]
    assert ks_two_sample(s1, first).p_value > 0.01


def test_point_dump(tmp_path):
    s = pp.stick_break_faces(RngStream(17), 4)
    f = tmp_path / "pts.csv"
    s.dump_csv(f, "seed=17")
    lines = f.read_text().splitlines()
    assert lines[1] == "length,slope,increment" and len(lines) == 6
