"""Discretized samplers for Brownian path fragments.

Single-path samplers return a :class:`DiscretePath`; the ``*_batch`` variants
return an ``(m, n_steps + 1)`` array of values on a shared uniform grid and
are what the Monte Carlo suites use.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .randkit import RngStream

KINDS = ("motion", "bridge", "bes3", "bes3_bridge", "meander", "excursion", "first_passage")
DEFAULT_PASSAGE_CAP = 1e4
BLOCK_ELEMENTS = 1 << 21  # cap on (active chains x steps) per block in first_passage_times


class PassageCapExceeded(RuntimeError):
    """First passage not reached within the simulated duration cap."""


@dataclass
class DiscretePath:
    times: np.ndarray
    values: np.ndarray
    kind: str = "motion"
    endpoint: Optional[float] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}")
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ValueError("times and values must be 1-d and aligned")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return int(self.times.size)

    def negate(self) -> "DiscretePath":
        return DiscretePath(self.times, -self.values, self.kind)

    def dump_csv(self, path, header: str = "") -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# kind={self.kind} {header}".rstrip() + "\n")
            w = csv.writer(fh)
            w.writerow(["time", "value"])
            for t, x in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(x))])


def _grid(horizon: float, n_steps: int) -> np.ndarray:
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    t = np.linspace(0.0, horizon, n_steps + 1)
    t[-1] = horizon
    return t


def _walk(g: np.random.Generator, m: int, n_steps: int, dt: float) -> np.ndarray:
    out = np.zeros((m, n_steps + 1))
    inc = g.standard_normal((m, n_steps))
    inc *= math.sqrt(dt)
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


# --- batch samplers ---------------------------------------------------------------

def bm_batch(rng: RngStream, m: int, n_steps: int, horizon: float = 1.0) -> np.ndarray:
    _grid(horizon, n_steps)
    return _walk(rng.generator, m, n_steps, horizon / n_steps)


def bridge_batch(rng: RngStream, m: int, n_steps: int, horizon: float = 1.0,
                 endpoint: float = 0.0) -> np.ndarray:
    t = _grid(horizon, n_steps)
    w = _walk(rng.generator, m, n_steps, horizon / n_steps)
    frac = t / horizon
    w -= w[:, -1:] * frac
    w += endpoint * frac
    w[:, -1] = endpoint
    return w


def bes3_batch(rng: RngStream, m: int, n_steps: int, horizon: float = 1.0,
               start: float = 0.0) -> np.ndarray:
    if start < 0:
        raise ValueError("start must be non-negative")
    g = rng.generator
    dt = horizon / n_steps
    _grid(horizon, n_steps)
    x = _walk(g, m, n_steps, dt) + start
    sq = x * x
    for _ in range(2):
        y = _walk(g, m, n_steps, dt)
        sq += y * y
    return np.sqrt(sq)


def bes3_bridge_batch(rng: RngStream, m: int, n_steps: int, horizon: float = 1.0,
                      endpoint: float = 0.0) -> np.ndarray:
    if endpoint < 0:
        raise ValueError("endpoint must be non-negative")
    x = bridge_batch(rng, m, n_steps, horizon, endpoint)
    sq = x * x
    for _ in range(2):
        y = bridge_batch(rng, m, n_steps, horizon, 0.0)
        sq += y * y
    out = np.sqrt(sq)
    out[:, -1] = endpoint
    return out


def excursion_batch(rng: RngStream, m: int, n_steps: int, horizon: float = 1.0) -> np.ndarray:
    return bes3_bridge_batch(rng, m, n_steps, horizon, 0.0)


@njit(cache=True)
def _meander_rows(walks, dt, horizon):
    """Longer Denisov fragment of each row, rescaled to ``horizon``.

    Returns (values, n_points) with rows padded by NaN beyond n_points.
    """
    m, n1 = walks.shape
    out = np.full((m, n1), np.nan)
    npts = np.zeros(m, dtype=np.int64)
    for r in range(m):
        k = 0
        lo = walks[r, 0]
        for j in range(1, n1):
            if walks[r, j] < lo:
                lo = walks[r, j]
                k = j
        post = n1 - 1 - k
        if post >= k:
            steps = post
            scale = math.sqrt(horizon / (steps * dt))
            for j in range(steps + 1):
                out[r, j] = (walks[r, k + j] - lo) * scale
        else:
            steps = k
            scale = math.sqrt(horizon / (steps * dt))
            for j in range(steps + 1):
                out[r, j] = (walks[r, k - j] - lo) * scale
        npts[r] = steps + 1
    return out, npts


def meander_fragments(rng: RngStream, m: int, n_aux: int, horizon: float = 1.0):
    """Meanders from the longer side of the minimum of a motion on n_aux steps.

    Each returned row i is a meander on a uniform grid of n_points[i] - 1
    steps over [0, horizon] (at least n_aux / 2 steps).
    """
    w = _walk(rng.generator, m, n_aux, 1.0 / n_aux)
    return _meander_rows(w, 1.0 / n_aux, float(horizon))


def meander_endpoint_batch(rng: RngStream, m: int, n_aux: int) -> np.ndarray:
    vals, npts = meander_fragments(rng, m, n_aux)
    return vals[np.arange(m), npts - 1]


def regrid(values: np.ndarray, n_steps: int, horizon: float = 1.0) -> np.ndarray:
    src = np.linspace(0.0, horizon, values.size)
    return np.interp(np.linspace(0.0, horizon, n_steps + 1), src, values)


# --- single paths -------------------------------------------------------------------

def sample_bm(rng: RngStream, horizon: float, n_steps: int) -> DiscretePath:
    return DiscretePath(_grid(horizon, n_steps), bm_batch(rng, 1, n_steps, horizon)[0], "motion")


def sample_bridge(rng: RngStream, horizon: float, endpoint: float, n_steps: int) -> DiscretePath:
    v = bridge_batch(rng, 1, n_steps, horizon, endpoint)[0]
    return DiscretePath(_grid(horizon, n_steps), v, "bridge", endpoint=float(endpoint))


def sample_bes3(rng: RngStream, horizon: float, start: float, n_steps: int) -> DiscretePath:
    return DiscretePath(_grid(horizon, n_steps), bes3_batch(rng, 1, n_steps, horizon, start)[0], "bes3")


def sample_bes3_bridge(rng: RngStream, horizon: float, endpoint: float, n_steps: int) -> DiscretePath:
    v = bes3_bridge_batch(rng, 1, n_steps, horizon, endpoint)[0]
    return DiscretePath(_grid(horizon, n_steps), v, "bes3_bridge", endpoint=float(endpoint))


def sample_excursion(rng: RngStream, horizon: float, n_steps: int) -> DiscretePath:
    v = excursion_batch(rng, 1, n_steps, horizon)[0]
    return DiscretePath(_grid(horizon, n_steps), v, "excursion", endpoint=0.0)


def sample_meander(rng: RngStream, horizon: float, n_steps: int,
                   n_aux: Optional[int] = None) -> DiscretePath:
    """Meander on [0, horizon] via the Denisov split of a motion.

    With ``n_aux`` given, the motion lives on that many steps and the
    fragment is linearly regridded to ``n_steps``; otherwise the fragment
    is used on its own grid.
    """
    _grid(horizon, n_steps)
    if n_aux is None:
        # fragments have at least half the auxiliary steps; keep sampling
        # until one has exactly n_steps steps would be wasteful, so regrid
        n_aux = 2 * n_steps
    while True:
        vals, npts = meander_fragments(rng, 1, n_aux, horizon)
        if npts[0] > 2:
            break
    frag = vals[0, : npts[0]]
    v = frag if npts[0] == n_steps + 1 else regrid(frag, n_steps, horizon)
    return DiscretePath(_grid(horizon, n_steps), v, "meander")


def sample_first_passage(rng: RngStream, level: float, n_steps: int,
                         cap: float = DEFAULT_PASSAGE_CAP) -> DiscretePath:
    """Motion run until it first reaches ``level``; horizon is the hitting time.

    ``n_steps`` is the number of grid steps per unit of level**2 time.
    Raises PassageCapExceeded when the path has not hit by cap * level**2.
    """
    if level <= 0:
        raise ValueError("level must be positive")
    dt = level * level / n_steps
    g = rng.generator
    chunks = [np.zeros(1)]
    x0 = 0.0
    steps_done = 0
    max_steps = int(math.ceil(cap * n_steps))
    block = max(256, n_steps)
    while steps_done < max_steps:
        nb = min(block, max_steps - steps_done)
        z = g.standard_normal(nb) * math.sqrt(dt)
        u = g.random(nb)
        x = x0 + np.cumsum(z)
        prev = np.concatenate(([x0], x[:-1]))
        hit = _crossing_mask(prev, x, u, level, dt)
        if hit.any():
            j = int(np.argmax(hit))
            seg = x[: j + 1].copy()
            seg[-1] = level
            chunks.append(seg)
            v = np.concatenate(chunks)
            return DiscretePath(np.arange(v.size) * dt, v, "first_passage", endpoint=float(level))
        chunks.append(x)
        x0 = float(x[-1])
        steps_done += nb
        block *= 2
    raise PassageCapExceeded(f"level {level} not reached within {cap} * level^2")


def _crossing_mask(prev, nxt, u, level, dt):
    """Grid step crosses ``level`` either at a grid point or between two.

    Between grid points the crossing probability of the Brownian bridge is
    exp(-2 (r - x_i)(r - x_{i+1}) / dt).
    """
    above = nxt >= level
    gap = (level - prev) * (level - nxt)
    p = np.exp(-2.0 * np.maximum(gap, 0.0) / dt)
    return above | ((p > 1e-16) & (u < p))


def first_passage_times(rng: RngStream, m: int, level: float, n_steps: int,
                        cap: float = DEFAULT_PASSAGE_CAP) -> np.ndarray:
    """Hitting times of ``level`` for m motions; NaN where cap is exceeded."""
    if level <= 0:
        raise ValueError("level must be positive")
    dt = level * level / n_steps
    g = rng.generator
    out = np.full(m, np.nan)
    pos = np.zeros(m)
    active = np.arange(m)
    steps_done = 0
    max_steps = int(math.ceil(cap * n_steps))
    block = max(64, min(n_steps // 4, BLOCK_ELEMENTS // m))
    while active.size and steps_done < max_steps:
        nb = min(block, max_steps - steps_done)
        z = g.standard_normal((active.size, nb))
        z *= math.sqrt(dt)
        u = g.random((active.size, nb))
        x = pos[active, None] + np.cumsum(z, axis=1)
        prev = np.concatenate((pos[active, None], x[:, :-1]), axis=1)
        hit = _crossing_mask(prev, x, u, level, dt)
        any_hit = hit.any(axis=1)
        first = np.argmax(hit, axis=1)
        done = active[any_hit]
        out[done] = (steps_done + first[any_hit] + 1) * dt
        pos[active] = x[:, -1]
        active = active[~any_hit]
        steps_done += nb
        block = min(block * 2, max(64, BLOCK_ELEMENTS // max(active.size, 1)))
    return out


@njit(cache=True)
def _bes3_minimum_kernel(seed, m, start, eps, stop_ratio):
    np.random.seed(seed)
    out = np.empty(m)
    for i in range(m):
        x0 = start
        x1 = 0.0
        x2 = 0.0
        r = start
        low = start
        while r < stop_ratio * low:
            dt = eps * r * r
            sd = math.sqrt(dt)
            x0 += sd * np.random.standard_normal()
            x1 += sd * np.random.standard_normal()
            x2 += sd * np.random.standard_normal()
            rn = math.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
            e = np.random.random()
            while e == 0.0:
                e = np.random.random()
            bmin = 0.5 * (r + rn - math.sqrt((r - rn) ** 2 - 2.0 * dt * math.log(e)))
            if bmin < low:
                low = max(bmin, 0.0)
            r = rn
        out[i] = low
    return out


def bes3_minimum(rng: RngStream, m: int, start: float, eps: float = 2e-3,
                 stop_ratio: float = 200.0) -> np.ndarray:
    """Overall minimum of a BES(3) started at ``start``.

    The 3-d motion is stepped with dt = eps * radius**2, the minimum over
    each step is taken from the Brownian bridge between the two radii, and
    a path is retired once its radius exceeds stop_ratio * running minimum
    (it then returns below that minimum with probability 1/stop_ratio).
    The inner loop runs on a compiled generator seeded from ``rng``.
    """
    if start <= 0:
        raise ValueError("start must be positive")
    seed = int(rng.generator.integers(0, 2**32 - 1))
    return _bes3_minimum_kernel(seed, int(m), float(start), float(eps), float(stop_ratio))
