"""Acceptance checks, grouped into named suites.

Each check takes an ExperimentConfig and returns one TestReport whose
details hold the individual statistics. Default sample sizes are the
documented ones; ``config.replicas`` and ``config.grid_n`` scale them down
for quick runs (thresholds are never relaxed).
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

from . import analytic, hull, pathsim, pointproc, taurho
from .config import ExperimentConfig
from .randkit import RngStream, erf_array, expint_e1
from .stats import (TestReport, chisq_poisson, combine, independence_permutation, ks_one_sample,
                    ks_two_sample, moment_check, poisson_count_gof, value_check)

SHARD = 2000  # rows per simulation shard


def _stream(cfg: ExperimentConfig, *labels) -> RngStream:
    return RngStream(cfg.master_seed).child(*labels)


def _shards(m: int, size: int = SHARD):
    out, start = [], 0
    while start < m:
        out.append((start, min(size, m - start)))
        start += size
    return out


def _map(fn: Callable, jobs: list, workers: int) -> list:
    """Ordered map over jobs, in worker processes when workers > 1."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*jobs)))


def _runtime(name: str, seconds: float, limit: float) -> TestReport:
    return TestReport(name=name, statistic=seconds, threshold=limit, flags=["runtime"]).evaluate()


def _finish(rep: TestReport, cfg: ExperimentConfig, t0: float) -> TestReport:
    rep.seed = cfg.master_seed
    rep.extra["seconds"] = round(time.perf_counter() - t0, 3)
    return rep


def _chi2_1_cdf(x):
    return erf_array(np.sqrt(np.maximum(np.asarray(x, dtype=float), 0.0) / 2.0))


# --- C1: hull against the brute-force oracle -------------------------------------------------

def _oracle_path(g: np.random.Generator, i: int):
    n = int(g.integers(3, 101))
    kind = i % 5
    if kind == 0:  # Gaussian walk on a uniform grid
        t = np.arange(n, dtype=float)
        x = np.concatenate(([0.0], np.cumsum(g.standard_normal(n - 1))))
    elif kind == 1:  # integer lattice walk: many exact collinear runs and ties
        t = np.arange(n, dtype=float)
        x = np.concatenate(([0.0], np.cumsum(g.integers(-1, 2, n - 1)))).astype(float)
    elif kind == 2:  # irregular grid
        t = np.cumsum(g.exponential(size=n))
        x = g.standard_normal(n) * 3.0
    elif kind == 3:  # bridge on [0, 1]
        t = np.linspace(0.0, 1.0, n)
        w = np.concatenate(([0.0], np.cumsum(g.standard_normal(n - 1)))) / math.sqrt(n)
        x = w - t * w[-1]
    else:  # convex-ish path, every point a candidate vertex
        t = np.sort(g.uniform(0, 1, n))
        t[0], t[-1] = 0.0, 1.0
        t = np.unique(t)
        x = (t - 0.5) ** 2 + 1e-3 * g.standard_normal(t.size)
    return t, x


def check_hull_oracle(cfg: ExperimentConfig) -> TestReport:
    t0 = time.perf_counter()
    m = cfg.size(1000)
    g = _stream(cfg, "hull_oracle").generator
    hull.minorant_vertex_indices(np.arange(3.0), np.zeros(3))  # compile outside the clock
    start = time.perf_counter()
    mismatches = 0
    for i in range(m):
        t, x = _oracle_path(g, i)
        for sign in (1.0, -1.0):  # minorant and majorant
            fast = hull.minorant_vertex_indices(t, sign * x)
            slow = hull.brute_force_minorant_indices(t, sign * x)
            if fast.shape != slow.shape or np.any(fast != slow):
                mismatches += 1
    elapsed = time.perf_counter() - start
    exact = TestReport(name="hull_vs_brute_force_mismatches", statistic=float(mismatches), threshold=0.0,
                       n_samples=m, citation="greatest convex minorant of a finite graph").evaluate()
    exact.extra["matches"] = f"{m - mismatches}/{m}"
    rep = combine("C1 hull oracle", [exact, _runtime("hull_oracle_runtime_s", elapsed, 5.0)])
    rep.n_samples = m
    return _finish(rep, cfg, t0)


# --- C2: Poisson description of the faces of motion on [0, Gamma_1] --------------------------

def _window_count_shard(seed: int, stream_id: int, m: int, n: int, edges: np.ndarray) -> np.ndarray:
    rng = RngStream(seed, stream_id)
    gam = rng.child("horizon").generator.standard_exponential(m)
    w = pathsim.bm_batch(rng, m, n)
    # slopes of B on [0, G] are slopes of W on [0, 1] divided by sqrt(G)
    return hull.window_counts_batch(w, 1.0 / n, edges, 1.0 / np.sqrt(gam))


def check_poisson_description(cfg: ExperimentConfig) -> TestReport:
    t0 = time.perf_counter()
    m = cfg.size(100_000)
    n = cfg.grid(10_000)
    lo, hi = cfg.slope_window
    edges = np.linspace(lo, hi, 5)
    base = _stream(cfg, "poisson_description")
    jobs = [(base.master_seed, base.child(k).stream_id, size, n, edges) for k, (_, size) in enumerate(_shards(m))]
    counts = np.vstack(_map(_window_count_shard, jobs, cfg.workers))
    reps = []
    tol = cfg.tol("window_mean_rel", 0.05)
    for j in range(edges.size - 1):
        mu = pointproc.mean_count_slope_window(edges[j], edges[j + 1], theta=1.0)
        win = f"[{edges[j]:g},{edges[j + 1]:g})"
        reps.append(moment_check(counts[:, j], mu, rel_tol=tol, name=f"window_mean {win}",
                                 citation="mean face count in a slope window"))
        reps.append(poisson_count_gof(counts[:, j], name=f"window_poisson {win}",
                                      citation="face count in a slope window is Poisson"))
    reps.append(pointproc.disjoint_window_independence(counts))
    rep = combine("C2 Poisson description", reps)
    rep.n_samples = m
    rep.extra.update(grid=n, edges=edges.tolist())
    return _finish(rep, cfg, t0)


# --- C3: stick-breaking ----------------------------------------------------------------------

def check_stick_breaking(cfg: ExperimentConfig) -> TestReport:
    t0 = time.perf_counter()
    m = cfg.size(100_000)
    rng = _stream(cfg, "stick_breaking")
    j, rest = pointproc.stick_break_batch(rng, m, 60)
    gam = rng.child("scale").generator.standard_gamma(1.0, m)
    x = (j * gam[:, None]).ravel()
    edges = np.concatenate((np.geomspace(1e-3, 1.0, 10), [2.0, 4.0, 8.0]))
    obs = np.histogram(x, bins=edges)[0]
    e1 = np.array([expint_e1(float(v)).value for v in edges])
    means = m * (e1[:-1] - e1[1:])
    reps = [chisq_poisson(obs, means, name="length_bins_chi2",
                          citation="scaled stick-breaking lengths form a Poisson process, intensity e^-x/x"),
            value_check(float(np.max(rest)), 0.0, 1e-6, name="stick_remainder_max")]
    rep = combine("C3 stick-breaking", reps)
    rep.n_samples = m
    return _finish(rep, cfg, t0)


# --- C4: meander face laws -------------------------------------------------------------------

def check_meander_faces(cfg: ExperimentConfig) -> TestReport:
    """First two faces of a meander on [0, 2 Gamma_1/2], two independent constructions."""
    t0 = time.perf_counter()
    m = cfg.size(100_000)
    thr = cfg.tol("meander_face_ks", 0.015)
    reps = []
    # (a) the recursion started from the matching initial law
    rng = _stream(cfg, "meander_faces", "recursion")
    tau0, rho0 = taurho.init_batch(rng.child("init"), "meander_2gamma_half", m)
    tau, rho = taurho.run_batch(rng, tau0, rho0, 2)
    L, S = taurho.recursion_to_points_batch(tau, rho)
    # (b) the ordered Poisson process on nonnegative slopes
    Lp, Sp = pointproc.ordered_faces_batch(_stream(cfg, "meander_faces", "poisson"), m, 2, theta=2.0)
    for label, ll, ss in (("recursion", L, S), ("poisson", Lp, Sp)):
        for i in (0, 1):
            reps.append(ks_one_sample(ll[:, i] * (1.0 + ss[:, i] ** 2), _chi2_1_cdf, thr,
                                      name=f"{label}: L{i + 1}(1+S{i + 1}^2) vs chi2_1",
                                      citation="face length times (1 + slope^2) is chi-square(1)"))
        reps.append(value_check(float(np.mean(ss[:, 0] > 1.0)), math.sqrt(2.0) - 1.0, 0.005,
                                name=f"{label}: P(S1>1)"))
    reps.append(ks_two_sample(S[:, 1], Sp[:, 1], thr, name="S2 recursion vs poisson"))
    rep = combine("C4 meander face laws", reps)
    rep.n_samples = m
    return _finish(rep, cfg, t0)


# --- C5: equivalence of the recursion and the Poisson description ------------------------------

BOX_X = np.array([0.0, 0.02, 0.1, 0.3, 1.0, 3.0])
BOX_S = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 4.0])


def box_mean(x1: float, x2: float, s1: float, s2: float) -> float:
    """Mean number of faces in [x1,x2] x [s1,s2] for intensity e^{-x(2+s^2)/2}/sqrt(2 pi x)."""
    from .stats import quadrature

    def f(s):
        c = 2.0 + s * s
        a = erf_array(np.sqrt(np.array([c * x2 / 2.0, c * x1 / 2.0])))
        return float(a[0] - a[1]) / math.sqrt(c)
    return quadrature(f, s1, s2, tol=1e-12)


def check_equivalence(cfg: ExperimentConfig) -> TestReport:
    t0 = time.perf_counter()
    m = cfg.size(100_000)
    thr = cfg.tol("equivalence_ks", 0.02)
    reps = []
    # forward: recursion -> points, box counts against the intensity
    rng = _stream(cfg, "equivalence", "forward")
    counts = np.zeros((BOX_X.size - 1, BOX_S.size - 1))
    monotone = True
    for k, (_, size) in enumerate(_shards(m, 20_000)):
        r = rng.child(k)
        tau0, rho0 = taurho.init_batch(r.child("init"), "equiv_init", size)
        tau, rho = taurho.run_batch(r, tau0, rho0, 60)
        L, S = taurho.recursion_to_points_batch(tau, rho)
        monotone &= bool(np.all(np.diff(S, axis=1) > 0))
        counts += np.histogram2d(L.ravel(), S.ravel(), bins=(BOX_X, BOX_S))[0]
    means = np.array([[m * box_mean(BOX_X[i], BOX_X[i + 1], BOX_S[j], BOX_S[j + 1])
                       for j in range(BOX_S.size - 1)] for i in range(BOX_X.size - 1)])
    reps.append(chisq_poisson(counts.ravel(), means.ravel(), name="forward box counts",
                              citation="recursion faces form the Poisson process of faces"))
    reps.append(TestReport(name="forward slopes increasing", statistic=float(not monotone), threshold=0.0).evaluate())
    # converse: ordered points -> (tau_0, rho_0)
    Lp, Sp = pointproc.ordered_faces_batch(_stream(cfg, "equivalence", "converse"), m, 40, theta=1.0)
    tau0 = Lp.sum(axis=1)
    rho0 = (Sp * Lp).sum(axis=1)
    reps.append(ks_one_sample(tau0, lambda v: erf_array(np.sqrt(np.maximum(v, 0.0))), thr,
                              name="converse tau0 ~ Gamma(1/2)"))
    reps.append(ks_one_sample(rho0, lambda v: 1.0 - np.exp(-math.sqrt(2.0) * np.maximum(v, 0.0)), thr,
                              name="converse rho0 ~ Exp(sqrt 2)"))
    reps.append(ks_one_sample(rho0 ** 2 / (2.0 * tau0), lambda v: 1.0 - np.exp(-np.maximum(v, 0.0)), thr,
                              name="converse rho0^2/(2 tau0) ~ Exp(1)"))
    reps.append(independence_permutation(tau0, rho0 ** 2 / (2.0 * tau0), rng=_stream(cfg, "equivalence", "perm"),
                                         name="converse tau0 independent of rho0^2/(2 tau0)"))
    # recovered driving noise of the first step
    u = 1.0 - Sp[:, 0] * tau0 / rho0
    rest = tau0 - Lp[:, 0]
    z2 = (u * rho0) ** 2 * Lp[:, 0] / (tau0 * rest)
    reps.append(ks_one_sample(u, lambda v: np.clip(v, 0.0, 1.0), thr, name="converse U uniform"))
    reps.append(ks_one_sample(z2, _chi2_1_cdf, thr, name="converse Z^2 chi-square(1)"))
    # round trip on individual trajectories
    rt = _stream(cfg, "equivalence", "round_trip")
    worst = 0.0
    for i in range(1000 if cfg.replicas is None else min(1000, m)):
        traj = taurho.sample_trajectory(rt.child(i), "equiv_init", 30)
        pts = taurho.recursion_to_points(traj)
        back = taurho.points_to_recursion(pts, tail_length=traj.tau[-1],
                                          tail_moment=traj.rho[-1] + pts.slopes[-1] * traj.tau[-1])
        worst = max(worst, float(np.max(np.abs(back.tau - traj.tau) / traj.tau)),
                    float(np.max(np.abs(back.rho - traj.rho) / traj.rho)))
    reps.append(value_check(worst, 0.0, 1e-9, name="round trip max relative error"))
    rep = combine("C5 equivalence", reps)
    rep.n_samples = m
    return _finish(rep, cfg, t0)


# --- C6: identity battery ---------------------------------------------------------------------

def _s1_sample(g, m):
    """Draws with P(S > s) = sqrt(1+s^2) - s, by inversion."""
    p = 1.0 - g.random(m)
    return (1.0 - p * p) / (2.0 * p)


def _identity_bewid(cfg, g, h, m, thr):
    W, Z = g.standard_normal(m), g.standard_normal(m)
    U = g.random(m)
    R = np.sqrt(2.0 * g.standard_exponential(m))
    lhs = (W ** 2 + ((1.0 - U) * R) ** 2) / (1.0 + (U * R) ** 2 / Z ** 2)
    return [ks_two_sample(lhs, h.standard_normal(m) ** 2, thr, name="bewid")]


def _remid_pair(g, m):
    Z = g.standard_normal(m)
    U = g.random(m)
    R = np.sqrt(2.0 * g.standard_exponential(m))
    T = 2.0 * g.standard_gamma(0.5, m)
    first = (T + ((1.0 - U) * R) ** 2) / (1.0 + (U * R) ** 2 / Z ** 2)
    return first, (1.0 - U) * R / np.sqrt(T)


def _identity_remid(cfg, g, h, m, thr):
    first, second = _remid_pair(g, m)
    return [ks_two_sample(first, h.standard_normal(m) ** 2, thr, name="remid first coordinate"),
            ks_two_sample(second, _s1_sample(h, m), thr, name="remid second coordinate"),
            independence_permutation(first, second, rng=_stream(cfg, "identities", "perm"),
                                     name="remid independence")]


def _identity_rtudist(cfg, g, h, m, thr):
    _, second = _remid_pair(g, m)

    def cdf(s):
        s = np.maximum(s, 0.0)
        return 1.0 - (np.sqrt(1.0 + s * s) - s)
    return [ks_one_sample(second, cdf, thr, name="rtudist")]


def _identity_con2(cfg, g, h, m, thr):
    """Second face of a meander on [0, T] from shared variables, against the recursion."""
    U1, U2 = g.random(m), g.random(m)
    Z1, Z2 = g.standard_normal(m), g.standard_normal(m)
    R = np.sqrt(2.0 * g.standard_exponential(m))
    T = 2.0 * g.standard_gamma(0.5, m)
    q = Z1 ** 2 + (U1 * R) ** 2
    S2 = R / np.sqrt(T) * (1.0 - U1 * U2 + Z1 ** 2 * (1.0 - U2) / (U1 * R ** 2))
    L2 = T * (U1 * R * Z2) ** 2 / (q * (Z2 ** 2 + q * U2 ** 2))
    rr = _stream(cfg, "identities", "con2")
    tau0, rho0 = taurho.init_batch(rr.child("init"), "meander_2gamma_half", m)
    tau, rho = taurho.run_batch(rr, tau0, rho0, 2)
    Lr, Sr = taurho.recursion_to_points_batch(tau, rho)
    return [ks_two_sample(S2, Sr[:, 1], thr, name="con2 slope"),
            ks_two_sample(L2, Lr[:, 1], thr, name="con2 length"),
            ks_two_sample(L2 * (1.0 + S2 ** 2), Lr[:, 1] * (1.0 + Sr[:, 1] ** 2), thr, name="con2 joint L2(1+S2^2)"),
            ks_two_sample(L2 * S2, Lr[:, 1] * Sr[:, 1], thr, name="con2 joint L2*S2")]


def _identity_rdist(cfg, g, h, m, thr):
    S = 2.0 * g.standard_gamma(1.5, m) * g.random(m)
    lhs = S * g.random(m) ** 2 + g.standard_normal(m) ** 2
    return [ks_two_sample(lhs, 2.0 * h.standard_gamma(1.5, m) * h.random(m), thr, name="rdist")]


def _identity_cin(cfg, g, h, m, thr):
    lhs = g.random(m) * g.standard_gamma(0.5, m) + g.standard_gamma(0.5, m)
    return [ks_two_sample(lhs, h.random(m) * h.standard_gamma(1.5, m), thr, name="cin")]


IDENTITIES = {
    "bewid": _identity_bewid,
    "remid": _identity_remid,
    "rtudist": _identity_rtudist,
    "con2": _identity_con2,
    "rdist": _identity_rdist,
    "cin": _identity_cin,
}


def check_identity(cfg: ExperimentConfig, name: str) -> TestReport:
    if name not in IDENTITIES:
        raise ValueError(f"unknown identity {name!r}; expected one of {sorted(IDENTITIES)}")
    t0 = time.perf_counter()
    m = cfg.size(1_000_000)
    g = _stream(cfg, "identities", name, "lhs").generator
    h = _stream(cfg, "identities", name, "rhs").generator
    rep = combine(f"identity {name}", IDENTITIES[name](cfg, g, h, m, cfg.tol("identity_ks", 0.005)))
    rep.n_samples = m
    return _finish(rep, cfg, t0)


def check_identities(cfg: ExperimentConfig) -> TestReport:
    t0 = time.perf_counter()
    parts = [check_identity(cfg, name) for name in IDENTITIES]
    reps = [d for p in parts for d in p.details]
    elapsed = time.perf_counter() - t0
    reps.append(_runtime("identity_battery_runtime_s", elapsed, 120.0))
    rep = combine("C6 identity battery", reps)
    rep.n_samples = cfg.size(1_000_000)
    return _finish(rep, cfg, t0)


# --- C7: densities ------------------------------------------------------------------------------

def _poisson_tail(lam: float, k: int) -> float:
    """sum_{j > k} lam^j / j!, bounded by the first term times a geometric factor."""
    term = math.exp(k * math.log(lam) - math.lgamma(k + 1)) if lam > 0 else 0.0
    total = 0.0
    j = k
    while True:
        j += 1
        term *= lam / j
        total += term
        if term < 1e-18 * max(total, 1e-300):
            return total


def check_densities(cfg: ExperimentConfig) -> TestReport:
    t0 = time.perf_counter()
    reps = []
    ts = np.linspace(0.1, 0.9, 9)
    # generating function vs the series
    err = 0.0
    for z in (-0.5, 0.5):
        for t in ts:
            s = math.fsum(z ** n * analytic.tau_density(n, t) for n in range(1, 200))
            err = max(err, abs(s - analytic.tau_density_gen(z, t)))
    reps.append(value_check(err, 0.0, 1e-8, name="genft vs series sup error"))
    # normalization
    err = max(abs(analytic.integrate_density(lambda v, n=n: analytic.tau_density(n, v), 0.0, 1.0, 1e-10) - 1.0)
              for n in range(1, 6))
    reps.append(value_check(err, 0.0, 1e-6, name="tau_n densities integrate to 1 (n<=5)"))
    # intensity = sum of densities, with the tail bounded explicitly
    N = 50
    worst = 0.0
    for t in ts:
        s = math.fsum(analytic.tau_density(n, t) for n in range(1, N + 1))
        a = analytic.a_of_t(t)
        bound = _poisson_tail(2.0 * a, N) / (4.0 * (1.0 - t) ** 1.5) + 1e-12
        worst = max(worst, abs(analytic.meander_vertex_intensity(t) - s) / bound)
    reps.append(value_check(worst, 0.0, 1.0, name="intensity - partial sum within tail bound (ratio)"))
    # left/right/minimum decomposition of the motion's vertex intensity
    us = np.linspace(0.02, 0.98, 49)
    err = max(abs(analytic.alpha_sum_density(u) + analytic.alpha_sum_density(1 - u) + analytic.arcsine_density(u)
                  - analytic.bm_vertex_intensity(u)) for u in us)
    reps.append(value_check(err, 0.0, 1e-8, name="alpha sums + arcsine = 1/(2u(1-u))"))
    # arcsine transforms of the three worked series
    ones = lambda n: np.ones(np.shape(n))
    unit_a0 = analytic.arcsine_transform(analytic.SeriesSpec(ones, a=0.0))
    unit_a_half = analytic.arcsine_transform(analytic.SeriesSpec(ones, a=0.5))
    odd_recip = analytic.arcsine_transform(analytic.SeriesSpec(lambda n: 1.0 / (2.0 * n + 3.0), a=0.0))
    us = np.linspace(0.05, 0.95, 19)
    e1 = max(abs(unit_a0(u) - 2.0 / (math.pi * u) * math.acos(math.sqrt(u))) for u in us)
    e2 = max(abs(unit_a_half(u) - 1.0 / u) for u in us)
    e3 = max(abs(odd_recip(u) - 2.0 / math.pi * math.sqrt((1 - u) / u)
                 * (1.0 / (1 - u) - (1 - u) ** -1.5 * math.sqrt(u) * math.acos(math.sqrt(u)))) for u in us)
    reps.append(value_check(e1, 0.0, 1e-8, name="arcsine transform of 1/u"))
    reps.append(value_check(e2, 0.0, 1e-8, name="arcsine transform of 1/(u sqrt(1-u))"))
    reps.append(value_check(e3, 0.0, 1e-8, name="arcsine transform of the 1/(2n+3) series"))
    # de-Poissonization
    err = 0.0
    for n, t in ((1, 0.3), (1, 1.5), (2, 0.7), (3, 2.0), (4, 0.5)):
        err = max(err, abs(analytic.depoissonized_T_n(t, n) - analytic.T_n_density(t, n)))
    reps.append(value_check(err, 0.0, 1e-6, name="T_n density vs mixture of tau_n"))
    rep = combine("C7 densities", reps)
    return _finish(rep, cfg, t0)


# --- C8: Laplace transforms --------------------------------------------------------------------

def check_laplace(cfg: ExperimentConfig) -> TestReport:
    t0 = time.perf_counter()
    m = cfg.size(100_000)
    n = cfg.grid(2000)
    reps = []
    rng = _stream(cfg, "laplace")
    taus = {0.0: [], 1.0: []}
    for k, (_, size) in enumerate(_shards(m, 5000)):
        r = rng.child(k)
        gam = r.child("horizon").generator.standard_exponential(size)
        w = pathsim.bm_batch(r, size, n)
        grid = np.arange(n + 1) / n
        for a in taus:
            # B(t) - a t on [0, G] is sqrt(G) (W(u) - a sqrt(G) u) with t = G u
            idx = np.argmin(w - (a * np.sqrt(gam))[:, None] * grid[None, :], axis=1)
            taus[a].append(gam * idx / n)
    for a, chunks in taus.items():
        tau_a = np.concatenate(chunks)
        for t in (0.5, 1.0):
            reps.append(moment_check(np.exp(-t * tau_a), analytic.laplace_tau_a(t, a), rel_tol=0.01,
                                     name=f"E exp(-{t} tau_a), a={a:g}"))
    g = _stream(cfg, "laplace", "charden").generator
    mc = cfg.size(1_000_000)
    for al, be in ((0.2, 0.3), (-0.5, 0.5)):
        G = g.standard_gamma(0.5, mc)
        R = np.sqrt(2.0 * g.standard_exponential(mc))
        reps.append(moment_check(np.exp(al * G + be * np.sqrt(G) * R), analytic.charden_mgf(al, be), rel_tol=0.01,
                                 name=f"charden ({al:g},{be:g})"))
    err = max(abs(analytic.sigma_u_laplace(0.0, u) - 1.0) for u in (0.1, 1.0, 10.0))
    reps.append(value_check(err, 0.0, 1e-10, name="siglap a=0"))
    err = max(abs(analytic.sigma_u_laplace(a, 1e12) - (1.0 + 2.0 * a) ** -0.5) for a in (0.1, 1.0, 5.0))
    reps.append(value_check(err, 0.0, 1e-10, name="siglap u->inf"))
    rep = combine("C8 Laplace suite", reps)
    rep.n_samples = m
    return _finish(rep, cfg, t0)


# --- C9: stationarity ---------------------------------------------------------------------------

def _bridge_min_shard(seed: int, stream_id: int, m: int, n: int) -> np.ndarray:
    """-min b / sqrt(argmin b) for m bridges on n steps, with exact per-step minima."""
    rng = RngStream(seed, stream_id)
    b = pathsim.bridge_batch(rng, m, n)
    e = rng.child("minima").generator.standard_exponential((m, n))
    h = 1.0 / n
    lo = 0.5 * (b[:, :-1] + b[:, 1:] - np.sqrt((b[:, :-1] - b[:, 1:]) ** 2 + 2.0 * h * e))
    j = np.argmin(lo, axis=1)
    rows = np.arange(m)
    # the minimum sits inside step j; place it where the bridge from b_j to b_{j+1} bottoms out on average
    d0 = b[rows, j] - lo[rows, j]
    d1 = b[rows, j + 1] - lo[rows, j]
    when = (j + d0 / np.maximum(d0 + d1, 1e-300)) * h
    return -lo[rows, j] / np.sqrt(when)


def check_stationarity(cfg: ExperimentConfig) -> TestReport:
    t0 = time.perf_counter()
    m = cfg.size(100_000)
    reps = []
    cdf = taurho.stationary_rho_star_cdf
    rng = _stream(cfg, "stationarity")
    x0 = taurho.sample_stationary_rho_star(rng.child("init"), m)
    chain = taurho.rho_star_chain(rng.child("step"), x0, 1)
    fresh = taurho.sample_stationary_rho_star(rng.child("fresh"), m)
    reps.append(ks_two_sample(chain[:, 1], fresh, cfg.tol("one_step_ks", 0.01), name="one step preserves law"))
    reps.append(ks_one_sample(chain[:, 1], cdf, cfg.tol("one_step_ks", 0.01), name="one step vs stationary CDF"))
    far = taurho.rho_star_chain(rng.child("converge"), np.full(m, 10.0), 50)
    reps.append(ks_one_sample(far[:, 50], cdf, cfg.tol("convergence_ks", 0.02), name="50 steps from point mass 10"))
    reps.append(moment_check(fresh ** 2, 1.5, rel_tol=0.02, name="E rho*^2 = 3/2"))
    # pseudo-meander value at time one, from simulated bridges
    n = cfg.grid(2000)
    base = _stream(cfg, "stationarity", "pseudo_meander")
    jobs = [(base.master_seed, base.child(k).stream_id, size, n) for k, (_, size) in enumerate(_shards(m, 5000))]
    pm = np.concatenate(_map(_bridge_min_shard, jobs, cfg.workers))
    reps.append(ks_one_sample(pm, cdf, cfg.tol("pseudo_meander_ks", 0.015), name="pseudo-meander endpoint"))
    # Z(a)/sqrt(D(a)) for motion with drift -a, from the faces of slope above a on (0, inf)
    for a in (0.5, 1.0):
        L, S = pointproc.ordered_faces_batch(_stream(cfg, "stationarity", "groeneboom", a), m, 40,
                                             theta=math.inf, start_slope=a)
        keep = S <= 1e6
        D = np.where(keep, L, 0.0).sum(axis=1)
        Zm = np.where(keep, (S - a) * L, 0.0).sum(axis=1)
        reps.append(ks_one_sample(Zm / np.sqrt(D), cdf, cfg.tol("groeneboom_ks", 0.015),
                                  name=f"Z(a)/sqrt(D(a)) a={a:g}"))
        tau0, rho0 = taurho.init_batch(_stream(cfg, "stationarity", "cinlar", a), "groeneboom_Da", m, a=a)
        reps.append(ks_two_sample(D, tau0, cfg.tol("groeneboom_ks", 0.015), name=f"D(a) vs representation a={a:g}"))
        reps.append(ks_two_sample(Zm, rho0, cfg.tol("groeneboom_ks", 0.015), name=f"Z(a) vs representation a={a:g}"))
    rep = combine("C9 stationarity", reps)
    rep.n_samples = m
    return _finish(rep, cfg, t0)


# --- C10: central limit theorem ------------------------------------------------------------------

def check_clt(cfg: ExperimentConfig) -> TestReport:
    t0 = time.perf_counter()
    m = cfg.size(10_000)
    n = cfg.chain_length
    logt = taurho.log_tau_batch(_stream(cfg, "clt"), np.ones(m), np.ones(m), n)
    stat = taurho.clt_statistic(logt, n)
    normal = lambda x: 0.5 * (1.0 + erf_array(np.asarray(x) / math.sqrt(2.0)))
    reps = [ks_one_sample(stat, normal, cfg.tol("clt_ks", 0.03), name=f"(log tau_n + 2n)/(2 sqrt n), n={n}"),
            value_check(float(np.var(logt)), 4.0 * n, 0.1, relative=True, name="var log tau_n vs 4n")]
    elapsed = time.perf_counter() - t0
    reps.append(_runtime("clt_runtime_s", elapsed, 60.0))
    rep = combine("C10 CLT", reps)
    rep.n_samples = m
    return _finish(rep, cfg, t0)


# --- C11: hull-extracted meander vertex times -----------------------------------------------------

REFINE_THRESHOLD = 1e-5
REFINE_MIN_GAP = 1e-10
REFINE_MAX_ROUNDS = 80


def _hull_tau_shard(seed: int, stream_id: int, m: int, n: int, k: int) -> np.ndarray:
    rng = RngStream(seed, stream_id)
    w = pathsim.bm_batch(rng, m, n)
    seeds = rng.child("refine").generator.integers(0, 2**32 - 1, m)
    out, _ = hull.refined_meander_taus_batch(w, k, seeds, REFINE_THRESHOLD, REFINE_MIN_GAP, REFINE_MAX_ROUNDS)
    return out


def _grid_trend_shard(seed: int, stream_id: int, m: int, n: int, k: int):
    """Raw-grid tau on n and 2n steps, and the refined tau of the 4n-step path they are cut from."""
    rng = RngStream(seed, stream_id)
    w = pathsim.bm_batch(rng, m, 4 * n)
    seeds = rng.child("refine").generator.integers(0, 2**32 - 1, m)
    ref, _ = hull.refined_meander_taus_batch(w, k, seeds, REFINE_THRESHOLD, REFINE_MIN_GAP, REFINE_MAX_ROUNDS)
    coarse = hull.meander_taus_batch(np.ascontiguousarray(w[:, ::4]), k)
    fine = hull.meander_taus_batch(np.ascontiguousarray(w[:, ::2]), k)
    return ref, coarse, fine


def check_cross_method(cfg: ExperimentConfig) -> TestReport:
    t0 = time.perf_counter()
    m = cfg.size(100_000)
    n = cfg.grid(10_000)
    k = 3
    thr = cfg.tol("cross_method_ks", 0.02)
    base = _stream(cfg, "cross_method", "hull")
    jobs = [(base.master_seed, base.child(j).stream_id, size, n, k) for j, (_, size) in enumerate(_shards(m))]
    h = np.vstack(_map(_hull_tau_shard, jobs, cfg.workers))
    rr = _stream(cfg, "cross_method", "recursion")
    tau0, rho0 = taurho.init_batch(rr.child("init"), "meander_t", m, t=1.0)
    tau, _ = taurho.run_batch(rr, tau0, rho0, k)
    reps = []
    for q in range(k):
        hq = h[:, q]
        missing = int(np.isnan(hq).sum())
        hq = np.where(np.isnan(hq), 0.0, hq)  # a missing vertex counts against the check
        x, F = analytic.tau_cdf_table(q + 1)
        cdf = analytic.interpolated_cdf(x, F)
        r1 = ks_one_sample(hq, cdf, thr, name=f"tau_{q + 1}: hull vs density")
        r1.extra["missing_vertices"] = missing
        reps.append(r1)
        reps.append(ks_one_sample(tau[:, q + 1], cdf, thr, name=f"tau_{q + 1}: recursion vs density"))
        reps.append(ks_two_sample(hq, tau[:, q + 1], thr, name=f"tau_{q + 1}: hull vs recursion"))
    # grid-bias trend: raw-grid extraction must approach the refined one as the grid doubles
    mt = min(m, 10_000)
    tb = _stream(cfg, "cross_method", "trend")
    jobs = [(tb.master_seed, tb.child(j).stream_id, size, n, k) for j, (_, size) in enumerate(_shards(mt, 1000))]
    parts = _map(_grid_trend_shard, jobs, cfg.workers)
    ref = np.vstack([p[0] for p in parts])
    coarse = np.vstack([p[1] for p in parts])
    fine = np.vstack([p[2] for p in parts])
    for q in range(k):
        dc = ks_two_sample(np.nan_to_num(coarse[:, q]), np.nan_to_num(ref[:, q])).statistic
        df = ks_two_sample(np.nan_to_num(fine[:, q]), np.nan_to_num(ref[:, q])).statistic
        rep = TestReport(name=f"tau_{q + 1}: grid bias shrinks ({n} -> {2 * n} steps)", statistic=df,
                         threshold=dc, n_samples=mt)
        rep.extra.update(ks_coarse=dc, ks_fine=df)
        # strict decrease
        rep.passed = bool(df < dc)
        reps.append(rep)
    rep = combine("C11 cross-method", reps)
    rep.n_samples = m
    rep.extra.update(grid=n, refine_threshold=REFINE_THRESHOLD, refine_min_gap=REFINE_MIN_GAP)
    return _finish(rep, cfg, t0)


# --- suites ------------------------------------------------------------------------------------

CHECKS = {
    "C1": check_hull_oracle,
    "C2": check_poisson_description,
    "C3": check_stick_breaking,
    "C4": check_meander_faces,
    "C5": check_equivalence,
    "C6": check_identities,
    "C7": check_densities,
    "C8": check_laplace,
    "C9": check_stationarity,
    "C10": check_clt,
    "C11": check_cross_method,
}

SUITES = {
    "hull_oracle": ("C1",),
    "point_process": ("C2", "C3", "C4", "C5"),
    "taurho": ("C9", "C11"),
    "identities": ("C6",),
    "densities": ("C7", "C8"),
    "clt": ("C10",),
}
SUITES["all"] = tuple(CHECKS)


def run_checks(cfg: ExperimentConfig, suite: str, log: Callable = None) -> list:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; expected one of {sorted(SUITES)}")
    out = []
    for key in SUITES[suite]:
        rep = CHECKS[key](cfg)
        out.append(rep)
        if log is not None:
            log(rep)
    return out
