"""The (tau, rho) recursion for minorant vertices, read right to left.

    rho_{n+1} = U_n rho_n
    tau_{n+1} = tau_n rho_{n+1}^2 / (tau_n Z_{n+1}^2 + rho_{n+1}^2)

tau_n is the time from the n-th vertex to the right endpoint and rho_n the
gap between the endpoint value and the intercept of the n-th face there.
In standardized form rho* = rho / sqrt(tau) and y = U rho*:

    tau_{n+1} / tau_n = y^2 / (Z^2 + y^2),   rho*_{n+1} = sqrt(Z^2 + y^2),

which is how log(tau_n) is accumulated once tau_n leaves double range.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .pointproc import FaceProcessSample
from .randkit import RngStream

LABELS = ("meander_t", "meander_2gamma_half", "equiv_init", "pseudo_meander", "groeneboom_Da")
TAU_FLOOR = 1e-300
RESIDUAL_RTOL = 1e-12


@dataclass(frozen=True)
class TauRhoState:
    tau: float
    rho: float
    index: int = 0

    @property
    def rho_star(self) -> float:
        return self.rho / math.sqrt(self.tau)


@dataclass
class TauRhoTrajectory:
    tau: np.ndarray
    rho: np.ndarray
    u: np.ndarray  # u[n] drives step n -> n+1
    z_sq: np.ndarray  # z_sq[n] is Z_{n+1}^2
    init_label: str = "custom"
    stop_reason: str = "length"
    log_tau: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.tau.size)

    @property
    def states(self) -> list:
        return [TauRhoState(float(t), float(r), i) for i, (t, r) in enumerate(zip(self.tau, self.rho))]

    @property
    def n_steps(self) -> int:
        return int(self.tau.size - 1)

    def residuals(self) -> tuple[np.ndarray, np.ndarray]:
        """Relative residuals of the two recursion identities on every step."""
        t0, t1 = self.tau[:-1], self.tau[1:]
        r0, r1 = self.rho[:-1], self.rho[1:]
        res_rho = np.abs(r1 - self.u * r0) / np.maximum(np.abs(r0), 1e-300)
        # tau_{n+1} (tau_n Z^2 + rho_{n+1}^2) = tau_n rho_{n+1}^2, divided through by tau_n rho_{n+1}^2
        res_tau = np.abs((t1 / t0) * (t0 * self.z_sq / (r1 * r1) + 1.0) - 1.0)
        return res_rho, res_tau

    def check_identities(self, rtol: float = RESIDUAL_RTOL) -> bool:
        if self.n_steps == 0:
            return True
        a, b = self.residuals()
        return bool(np.all(a <= rtol) and np.all(b <= rtol))

    def dump_csv(self, path, header: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow(["n", "tau", "rho", "u", "z_sq"])
            for i in range(self.tau.size):
                u = repr(float(self.u[i])) if i < self.u.size else ""
                z = repr(float(self.z_sq[i])) if i < self.z_sq.size else ""
                w.writerow([i, repr(float(self.tau[i])), repr(float(self.rho[i])), u, z])


def load_trajectory_csv(path) -> TauRhoTrajectory:
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            rows.append(line.rstrip("\n"))
    reader = csv.DictReader(rows)
    tau, rho, u, z = [], [], [], []
    for r in reader:
        tau.append(float(r["tau"]))
        rho.append(float(r["rho"]))
        if r["u"]:
            u.append(float(r["u"]))
            z.append(float(r["z_sq"]))
    return TauRhoTrajectory(np.array(tau), np.array(rho), np.array(u), np.array(z))


def step(state: TauRhoState, u: float, z_sq: float) -> TauRhoState:
    if not (0.0 < u <= 1.0):
        raise ValueError("u must lie in (0, 1]")
    if not z_sq > 0:
        raise ValueError("z_sq must be positive")
    if not (state.tau > 0 and state.rho > 0):
        raise ValueError("state must have positive tau and rho")
    rho = u * state.rho
    # ratio form: tau * rho^2 underflows long before tau itself does
    tau = state.tau / (1.0 + state.tau * z_sq / (rho * rho))
    return TauRhoState(tau, rho, state.index + 1)


# --- initial laws ---------------------------------------------------------------------

def init_batch(rng: RngStream, label: str, m: int, t: float = 1.0, a: float = 1.0):
    """Arrays (tau0, rho0) of size m drawn from the named initial law.

    meander_t            tau0 = t,            rho0 = sqrt(2 t Gamma_1)
    meander_2gamma_half  tau0 = 2 Gamma_1/2,  rho0 = sqrt(tau0) R,  R Rayleigh
    equiv_init           tau0 = Gamma_1/2,    rho0 = sqrt(2 tau0 Gamma_1)
    pseudo_meander       tau0 = 1,            rho0 = sqrt(2 U Gamma_3/2)
    groeneboom_Da        a^2 tau0 = 2 G (1 - sqrt U)^2, a rho0 = 2 G sqrt U (1 - sqrt U), G ~ Gamma_3/2
    """
    g = rng.generator
    if label == "meander_t":
        if t <= 0:
            raise ValueError("t must be positive")
        tau = np.full(m, float(t))
        rho = np.sqrt(2.0 * t * g.standard_exponential(m))
    elif label == "meander_2gamma_half":
        tau = 2.0 * g.standard_gamma(0.5, m)
        rho = np.sqrt(tau) * np.sqrt(2.0 * g.standard_exponential(m))
    elif label == "equiv_init":
        tau = g.standard_gamma(0.5, m)
        rho = np.sqrt(2.0 * tau * g.standard_exponential(m))
    elif label == "pseudo_meander":
        tau = np.ones(m)
        rho = np.sqrt(2.0 * g.random(m) * g.standard_gamma(1.5, m))
    elif label == "groeneboom_Da":
        if a <= 0:
            raise ValueError("a must be positive")
        gam = g.standard_gamma(1.5, m)
        su = np.sqrt(g.random(m))
        tau = 2.0 * gam * (1.0 - su) ** 2 / (a * a)
        rho = 2.0 * gam * su * (1.0 - su) / a
    else:
        raise ValueError(f"unknown init label {label!r}; expected one of {LABELS}")
    return tau, rho


def init(rng: RngStream, label: str, t: float = 1.0, a: float = 1.0) -> TauRhoState:
    tau, rho = init_batch(rng, label, 1, t=t, a=a)
    return TauRhoState(float(tau[0]), float(rho[0]), 0)


# --- trajectories ----------------------------------------------------------------------

def run(rng: RngStream, state: TauRhoState, n: int, label: str = "custom",
        floor: float = TAU_FLOOR) -> TauRhoTrajectory:
    """Step n times from ``state``.

    Stored states stop once tau would drop below ``floor`` (stop reason
    "underflow"), but log(tau) is tracked for all n steps through the
    standardized form, so ``log_tau`` always has n + 1 entries.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    g = rng.generator
    us = g.random(n)
    zs = g.standard_normal(n) ** 2
    tau = [state.tau]
    rho = [state.rho]
    logt = [math.log(state.tau)]
    rs = state.rho / math.sqrt(state.tau)
    reason = "length"
    cur = state
    for i in range(n):
        y = us[i] * rs
        y2 = y * y
        logt.append(logt[-1] + math.log(y2 / (zs[i] + y2)))
        rs = math.sqrt(zs[i] + y2)
        if reason == "length":
            nxt = step(cur, us[i], zs[i])
            if nxt.tau < floor or nxt.rho <= 0:
                reason = "underflow"
                continue
            tau.append(nxt.tau)
            rho.append(nxt.rho)
            cur = nxt
    return TauRhoTrajectory(np.array(tau), np.array(rho), np.asarray(us[: len(tau) - 1]),
                            np.asarray(zs[: len(tau) - 1]), label, reason, np.array(logt))


def sample_trajectory(rng: RngStream, label: str, n: int, t: float = 1.0, a: float = 1.0) -> TauRhoTrajectory:
    return run(rng, init(rng.child("init"), label, t=t, a=a), n, label)


def run_batch(rng: RngStream, tau0: np.ndarray, rho0: np.ndarray, n: int):
    """Vectorized recursion over m chains: returns (tau, rho) of shape (m, n+1)."""
    g = rng.generator
    m = tau0.size
    tau = np.empty((m, n + 1))
    rho = np.empty((m, n + 1))
    tau[:, 0] = tau0
    rho[:, 0] = rho0
    for i in range(n):
        u = g.random(m)
        z2 = g.standard_normal(m) ** 2
        r = u * rho[:, i]
        rho[:, i + 1] = r
        tau[:, i + 1] = tau[:, i] / (1.0 + tau[:, i] * z2 / (r * r))
    return tau, rho


def log_tau_batch(rng: RngStream, tau0: np.ndarray, rho0: np.ndarray, n: int) -> np.ndarray:
    """log(tau_n) for m chains, accumulated from log increments (no underflow)."""
    g = rng.generator
    logt = np.log(tau0).astype(float)
    rs = rho0 / np.sqrt(tau0)
    for _ in range(n):
        y2 = (g.random(rs.size) * rs) ** 2
        z2 = g.standard_normal(rs.size) ** 2
        logt += np.log(y2) - np.log(z2 + y2)
        rs = np.sqrt(z2 + y2)
    return logt


def rho_star_chain(rng: RngStream, init_rho_star, n: int) -> np.ndarray:
    """rho*_{k+1} = sqrt(Z^2 + U^2 rho*_k^2); returns shape (n+1,) or (m, n+1)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    x0 = np.atleast_1d(np.asarray(init_rho_star, dtype=float))
    if np.any(x0 < 0):
        raise ValueError("initial value must be non-negative")
    g = rng.generator
    out = np.empty((x0.size, n + 1))
    out[:, 0] = x0
    for i in range(n):
        u = g.random(x0.size)
        z = g.standard_normal(x0.size)
        out[:, i + 1] = np.sqrt(z * z + (u * out[:, i]) ** 2)
    return out[0] if np.ndim(init_rho_star) == 0 else out


def stationary_rho_star_cdf(y):
    """CDF of sqrt(2 Gamma_3/2 U): with c = y^2/2, erf(sqrt c) - 2 sqrt(c/pi) e^{-c} + 2c erfc(sqrt c)."""
    from .randkit import erf_array, erfc_array
    y = np.maximum(np.asarray(y, dtype=float), 0.0)
    c = 0.5 * y * y
    rc = np.sqrt(c)
    return erf_array(rc) - 2.0 * np.sqrt(c / math.pi) * np.exp(-c) + 2.0 * c * erfc_array(rc)


def sample_stationary_rho_star(rng: RngStream, m: int) -> np.ndarray:
    g = rng.generator
    return np.sqrt(2.0 * g.standard_gamma(1.5, m) * g.random(m))


# --- equivalence map --------------------------------------------------------------------

def recursion_to_points(traj: TauRhoTrajectory) -> FaceProcessSample:
    """Faces i = 1..n: lengths tau_{i-1} - tau_i, slopes sum_{j<=i} (rho_{j-1} - rho_j) / tau_{j-1}."""
    tau, rho = traj.tau, traj.rho
    lengths = tau[:-1] - tau[1:]
    slopes = np.cumsum((rho[:-1] - rho[1:]) / tau[:-1])
    return FaceProcessSample(lengths, slopes, (0.0, math.inf, 0.0), total_time=float(tau[0]),
                             remainder=float(tau[-1]))


def recursion_to_points_batch(tau: np.ndarray, rho: np.ndarray):
    lengths = tau[:, :-1] - tau[:, 1:]
    slopes = np.cumsum((rho[:, :-1] - rho[:, 1:]) / tau[:, :-1], axis=1)
    return lengths, slopes


def points_to_recursion(points: FaceProcessSample, tail_length: float = 0.0,
                        tail_moment: float = 0.0) -> TauRhoTrajectory:
    """Inverse map from slope-ordered faces.

    tau_i = sum_{j>i} L_j and rho_i = sum_{j>i} S_j L_j - S_i sum_{j>i} L_j,
    with S_0 = 0. Faces beyond the supplied ones enter through
    ``tail_length`` (sum of their lengths) and ``tail_moment`` (sum of
    slope * length); leaving them at zero truncates, and the recovered
    (tau_i, rho_i) are then exact for the finite set. The recovered driving
    noise is u_i = rho_{i+1} / rho_i and z_i^2 = rho_{i+1}^2 (tau_i - tau_{i+1}) / (tau_i tau_{i+1}).
    """
    x = np.asarray(points.lengths, dtype=float)
    s = np.asarray(points.slopes, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one face")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("lengths must be positive and summable")
    if np.any(np.diff(s) <= 0) or s[0] < 0:
        raise ValueError("slopes must be non-negative and strictly increasing")
    # suffix sums over j > i, for i = 0..n
    ltail = np.concatenate((np.cumsum(x[::-1])[::-1], [0.0])) + tail_length
    mtail = np.concatenate((np.cumsum((s * x)[::-1])[::-1], [0.0])) + tail_moment
    s_i = np.concatenate(([0.0], s))
    tau = ltail
    rho = mtail - s_i * ltail
    if tail_length == 0.0:
        # the last state is exhausted; keep only strictly positive states
        tau, rho, s_i = tau[:-1], rho[:-1], s_i[:-1]
    u = rho[1:] / rho[:-1]
    z_sq = rho[1:] ** 2 * (tau[:-1] - tau[1:]) / (tau[:-1] * tau[1:])
    return TauRhoTrajectory(tau, rho, u, z_sq, "from_points", "points")


def clt_statistic(log_tau_n, n: int):
    """(log tau_n + 2 n) / (2 sqrt n); accepts a trajectory or log values."""
    if isinstance(log_tau_n, TauRhoTrajectory):
        traj = log_tau_n
        if traj.log_tau is None or traj.log_tau.size <= n:
            raise ValueError("trajectory too short or exhausted")
        log_tau_n = traj.log_tau[n]
    if n < 1:
        raise ValueError("n must be positive")
    return (np.asarray(log_tau_n) + 2.0 * n) / (2.0 * math.sqrt(n))
