import math

import numpy as np
import pytest

from minorant import pathsim as ps
from minorant.randkit import RngStream, erf_array, erfc_array
from minorant.stats import ks_one_sample, ks_two_sample


def maxwell_cdf(x):
    x = np.asarray(x, dtype=float)
    return erf_array(x / math.sqrt(2.0)) - math.sqrt(2.0 / math.pi) * x * np.exp(-0.5 * x * x)


def rayleigh_cdf(x):
    return 1.0 - np.exp(-0.5 * np.asarray(x) ** 2)


def test_grid_and_kinds():
    p = ps.sample_bm(RngStream(1), 2.0, 10)
    assert p.times[0] == 0.0 and p.horizon == 2.0
    assert np.all(np.diff(p.times) > 0)
    assert len(p) == 11
    with pytest.raises(ValueError):
        ps.sample_bm(RngStream(1), 1.0, 1)
    with pytest.raises(ValueError):
        ps.sample_bm(RngStream(1), -1.0, 10)
    with pytest.raises(ValueError):
        ps.DiscretePath([0, 1], [0, 1], "levy")


def test_determinism():
    a = ps.sample_bridge(RngStream(7), 1.0, 0.3, 50).values
    b = ps.sample_bridge(RngStream(7), 1.0, 0.3, 50).values
    assert np.array_equal(a, b)


def test_bm_moments():
    w = ps.bm_batch(RngStream(2), 100_000, 8)
    assert abs(w[:, -1].var() - 1.0) < 0.02
    sd = np.sqrt(np.linspace(0, 1, 9)[1:] / 100_000)
    assert np.all(np.abs(w[:, 1:].mean(axis=0)) < 3 * sd + 1e-12)
    inc = np.diff(w, axis=1)
    lag1 = np.corrcoef(inc[:, :-1].ravel(), inc[:, 1:].ravel())[0, 1]
    assert abs(lag1) < 0.01


def test_bridge_endpoint_variance_and_reversal():
    p = ps.sample_bridge(RngStream(3), 2.0, -0.7, 20)
    assert p.values[-1] == -0.7 and p.endpoint == -0.7
    b = ps.bridge_batch(RngStream(3), 100_000, 4)
    assert abs(b[:, 2].var() - 0.25) < 0.01
    assert ks_two_sample(b[:, 1], b[:, 3]).statistic < 0.01


def test_bes3():
    r = ps.bes3_batch(RngStream(4), 100_000, 4)
    assert np.all(r >= 0)
    assert abs(np.mean(r[:, -1] ** 2) / 3.0 - 1.0) < 0.02
    assert ks_one_sample(r[:, -1], maxwell_cdf).statistic < 0.01
    with pytest.raises(ValueError):
        ps.bes3_batch(RngStream(4), 2, 4, start=-1.0)


def test_bes3_bridge_and_excursion():
    e = ps.sample_excursion(RngStream(5), 1.0, 200)
    assert e.values[-1] == 0.0 and np.all(e.values >= 0)
    b = ps.sample_bes3_bridge(RngStream(5), 1.0, 0.8, 200)
    assert b.values[-1] == 0.8


def test_meander_positive_and_rayleigh_endpoint():
    m = ps.sample_meander(RngStream(6), 1.0, 100)
    assert m.values[0] == 0.0 and np.all(m.values[1:] > 0)
    end = np.concatenate([ps.meander_endpoint_batch(RngStream(6, i), 3000, 10_000) for i in range(10)])
    assert ks_one_sample(end, rayleigh_cdf).statistic < 0.015


def test_meander_matches_reweighted_bes3():
    # BES(3) endpoints reweighted by sqrt(pi/2)/x carry the meander endpoint law
    r = ps.bes3_batch(RngStream(8), 200_000, 2)[:, -1]
    m = np.concatenate([ps.meander_endpoint_batch(RngStream(9, i), 2000, 10_000) for i in range(10)])
    assert ks_two_sample(m, r, weights_b=1.0 / r).statistic < 0.02


def test_argmin_is_arcsine():
    w = ps.bm_batch(RngStream(10), 100_000, 1000)
    # spread each grid argmin over its cell, reflecting at the ends, so the
    # endpoint atoms of the discrete walk do not show up as KS jumps
    u = RngStream(10, 1).generator.random(w.shape[0]) - 0.5
    t = np.abs((np.argmin(w, axis=1) + u) / 1000.0)
    t = 1.0 - np.abs(1.0 - t)
    cdf = lambda x: 2.0 / math.pi * np.arcsin(np.sqrt(np.clip(x, 0, 1)))
    assert ks_one_sample(t, cdf).statistic < 0.01


def test_brownian_scaling():
    c = 4.0
    a = ps.bm_batch(RngStream(11), 50_000, 8, horizon=c)[:, 4] / math.sqrt(c)
    b = ps.bm_batch(RngStream(12), 50_000, 8, horizon=1.0)[:, 4]
    rep = ks_two_sample(a, b)
    assert rep.p_value > 0.01


def test_first_passage_path():
    p = ps.sample_first_passage(RngStream(13), 1.0, 200)
    assert p.values[-1] == 1.0
    assert np.all(p.values[:-1] < 1.0)
    assert p.horizon == pytest.approx(p.times[-1])
    # reversed and reflected: starts at 0, ends at the level, stays nonnegative
    rev = 1.0 - p.values[::-1]
    assert rev[0] == 0.0 and rev[-1] == 1.0 and np.all(rev >= 0)
    with pytest.raises(ps.PassageCapExceeded):
        ps.sample_first_passage(RngStream(14), 50.0, 4, cap=1e-3)


def test_first_passage_time_law():
    cap = 1e3
    s = ps.first_passage_times(RngStream(15), 20_000, 1.0, 64, cap=cap)
    s = np.where(np.isnan(s), 2 * cap, s)
    # sigma_1 =d 1/Z^2, so P(sigma <= x) = erfc(1/sqrt(2x)); censored at the cap
    rep = ks_one_sample(s, lambda x: erfc_array(1.0 / np.sqrt(2.0 * x)), upper=cap)
    assert rep.statistic < 0.02


def test_bes3_minimum_uniform():
    mn = ps.bes3_minimum(RngStream(16), 10_000, 1.0)
    assert np.all((mn >= 0) & (mn <= 1))
    assert ks_one_sample(mn, lambda x: np.clip(x, 0, 1)).statistic < 0.02


def test_regrid_and_dump(tmp_path):
    v = np.array([0.0, 1.0, 0.0])
    assert np.allclose(ps.regrid(v, 4), [0, 0.5, 1, 0.5, 0])
    p = ps.sample_bm(RngStream(1), 1.0, 4)
    f = tmp_path / "p.csv"
    p.dump_csv(f, "seed=1")
    lines = f.read_text().splitlines()
    assert lines[0] == "# kind=motion seed=1"
    assert lines[1] == "time,value" and len(lines) == 7
