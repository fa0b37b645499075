"""Seeded random streams, elementary samplers and the scalar special functions.

Streams are counter-based: a Philox generator keyed by ``(master_seed, stream_id)``
so that any replica can be regenerated on its own, in any order, on any worker.
"""

from __future__ import annotations

import hashlib
import math
from typing import NamedTuple

import numpy as np

_MASK64 = (1 << 64) - 1
EULER_GAMMA = 0.57721566490153286061
_SQRT_PI = math.sqrt(math.pi)
_EPS = 2.220446049250313e-16


class DomainError(ValueError):
    """Raised when a special function is evaluated outside its domain."""


def derive_stream_id(*labels) -> int:
    """Hash an arbitrary label path (strings, ints) to a 64-bit stream id."""
    h = hashlib.blake2b(digest_size=8)
    for lab in labels:
        h.update(repr(lab).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


class RngStream:
    """A reproducible random stream identified by ``(master_seed, stream_id)``.

    Two streams with the same pair produce identical sequences; distinct
    stream ids use distinct Philox keys and share no state.
    """

    def __init__(self, master_seed: int, stream_id: int = 0):
        if stream_id < 0:
            raise ValueError("stream_id must be non-negative")
        self.master_seed = int(master_seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self.generator = np.random.Generator(
            np.random.Philox(key=[self.master_seed, self.stream_id])
        )

    def child(self, *labels) -> "RngStream":
        """An independent stream derived from this one and ``labels``."""
        return RngStream(self.master_seed, derive_stream_id(self.stream_id, *labels))

    @property
    def counter(self) -> int:
        st = self.generator.bit_generator.state["state"]
        c = st["counter"]
        return int(c[0]) | (int(c[1]) << 64)

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected RngStream or int seed, got {type(rng).__name__}")


def _out(x, size):
    return float(x[0]) if size is None else x


def _n(size):
    return 1 if size is None else size


# --- elementary distributions -------------------------------------------------

def sample_uniform(rng: RngStream, size=None):
    """Uniform on the open interval (0, 1); 53-bit midpoint lattice."""
    k = rng.generator.integers(0, 1 << 53, size=_n(size), dtype=np.int64)
    return _out((k + 0.5) * 2.0**-53, size)


def sample_normal(rng: RngStream, size=None):
    return _out(rng.generator.standard_normal(_n(size)), size)


def sample_exponential(rng: RngStream, rate: float = 1.0, size=None):
    if not rate > 0:
        raise ValueError("rate must be positive")
    return _out(rng.generator.standard_exponential(_n(size)) / rate, size)


def sample_gamma(rng: RngStream, shape: float, size=None):
    """Gamma(shape, 1).

    Shapes 1/2 and 3/2 use the exact representations Z**2/2 and
    Z**2/2 + Exp(1); other shapes defer to numpy's standard_gamma.
    """
    if not shape > 0:
        raise ValueError(f"gamma shape must be positive, got {shape}")
    n = _n(size)
    g = rng.generator
    if shape == 0.5:
        x = 0.5 * g.standard_normal(n) ** 2
    elif shape == 1.0:
        x = g.standard_exponential(n)
    elif shape == 1.5:
        x = 0.5 * g.standard_normal(n) ** 2 + g.standard_exponential(n)
    else:
        x = g.standard_gamma(shape, n)
    return _out(x, size)


def sample_rayleigh(rng: RngStream, size=None):
    """Density r exp(-r^2/2); R^2 = 2 Exp(1)."""
    return _out(np.sqrt(2.0 * rng.generator.standard_exponential(_n(size))), size)


def sample_arcsine(rng: RngStream, size=None):
    """Density 1/(pi sqrt(x(1-x))) on (0, 1)."""
    u = sample_uniform(rng, _n(size))
    return _out(np.sin(0.5 * np.pi * u) ** 2, size)


def sample_chi2_1(rng: RngStream, size=None):
    return _out(rng.generator.standard_normal(_n(size)) ** 2, size)


# --- special functions --------------------------------------------------------

class SpecialValue(NamedTuple):
    value: float
    abs_error_bound: float

    def __float__(self) -> float:
        return self.value


ERF_SWITCH = 2.5  # series below, continued fraction above
ERFC_SWITCH = 1.0  # erfc uses the continued fraction from here to keep relative accuracy


def _erf_series(x: float) -> tuple[float, float]:
    # erf(x) = 2/sqrt(pi) exp(-x^2) sum_n 2^n x^(2n+1) / (2n+1)!!, all terms positive
    if x == 0.0:
        return 0.0, 0.0
    x2 = 2.0 * x * x
    term = x
    total = x
    n = 0
    while True:
        n += 1
        term *= x2 / (2 * n + 1)
        total += term
        if term <= 1e-17 * total and x2 / (2 * n + 3) < 0.5:
            break
    pref = 2.0 / _SQRT_PI * math.exp(-x * x)
    val = pref * total
    tail = pref * term  # geometric tail with ratio < 1/2
    return val, tail + 8 * n * _EPS * abs(val)


def _erfc_cf(x: float) -> tuple[float, float]:
    # erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), modified Lentz
    tiny = 1e-300
    f = x
    c = x
    d = 0.0
    k = 0
    while True:
        k += 1
        a = 0.5 * k
        d = x + a * d
        d = 1.0 / (d if d != 0.0 else tiny)
        c = x + a / c
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16 or k > 500:
            break
    val = math.exp(-x * x) / (_SQRT_PI * f)
    return val, 4 * k * _EPS * val + abs(delta - 1.0) * val


def _erf_scalar(x: float) -> tuple[float, float]:
    ax = abs(x)
    if ax <= ERF_SWITCH:
        v, e = _erf_series(ax)
    else:
        c, e = _erfc_cf(ax)
        v = 1.0 - c
        e += _EPS
    return (v if x >= 0 else -v), e


def _erfc_scalar(x: float) -> tuple[float, float]:
    if x >= ERFC_SWITCH:
        return _erfc_cf(x)
    if x < -ERF_SWITCH:
        c, e = _erfc_cf(-x)
        return 2.0 - c, e + 2 * _EPS
    v, e = _erf_scalar(x)
    return 1.0 - v, e + _EPS


def erf(x: float) -> SpecialValue:
    if math.isnan(x):
        raise DomainError("erf of NaN")
    return SpecialValue(*_erf_scalar(float(x)))


def erfc(x: float) -> SpecialValue:
    if math.isnan(x):
        raise DomainError("erfc of NaN")
    return SpecialValue(*_erfc_scalar(float(x)))


def arcsinh(x: float) -> SpecialValue:
    """log(x + sqrt(1 + x^2)), evaluated without cancellation for x < 0."""
    x = float(x)
    ax = abs(x)
    if ax < 1e-8:
        v = ax
    elif ax > 1e150:
        v = math.log(ax) + math.log(2.0)
    else:
        v = math.log1p(ax + ax * ax / (1.0 + math.sqrt(1.0 + ax * ax)))
    v = math.copysign(v, x)
    return SpecialValue(v, 4 * _EPS * max(abs(v), 1e-300))


def arcosh(x: float) -> SpecialValue:
    """log(x + sqrt(x^2 - 1)) for x >= 1."""
    x = float(x)
    if not x >= 1.0:
        raise DomainError(f"arcosh requires x >= 1, got {x}")
    if x > 1e150:
        v = math.log(x) + math.log(2.0)
    else:
        y = x - 1.0
        v = math.log1p(y + math.sqrt(y * (x + 1.0)))
    return SpecialValue(v, 4 * _EPS * max(v, 1e-300))


def expint_e1(x: float) -> SpecialValue:
    """Exponential integral E1(x) = int_x^inf e^-t / t dt, x > 0."""
    x = float(x)
    if not x > 0:
        raise DomainError(f"expint_e1 requires x > 0, got {x}")
    if x <= 1.0:
        # -gamma - log x - sum_k (-x)^k / (k k!)
        total = 0.0
        term = 1.0
        k = 0
        while True:
            k += 1
            term *= -x / k
            contrib = term / k
            total += contrib
            if abs(contrib) < 1e-18:
                break
        v = -EULER_GAMMA - math.log(x) - total
        return SpecialValue(v, 16 * _EPS * (abs(v) + abs(math.log(x)) + 1.0))
    # continued fraction e^-x / (x + 1 - 1^2/(x + 3 - 2^2/(x + 5 - ...))), modified Lentz
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    i = 0
    while True:
        i += 1
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16 or i > 1000:
            break
    v = h * math.exp(-x)
    return SpecialValue(v, 4 * i * _EPS * v)


# Stirling coefficients B_2k / (2k (2k-1)), k = 1..8
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _lgamma_pos(x: float) -> float:
    shift = 0.0
    if x < 12.0:
        prod = 1.0
        while x < 12.0:
            prod *= x
            x += 1.0
        shift = math.log(prod)
    inv = 1.0 / x
    inv2 = inv * inv
    s = 0.0
    p = inv
    for c in _STIRLING:
        s += c * p
        p *= inv2
    return (x - 0.5) * math.log(x) - x + _HALF_LOG_2PI + s - shift


def log_gamma(x: float) -> SpecialValue:
    """log|Gamma(x)|; reflection for x < 1/2, poles at non-positive integers."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"log_gamma has a pole at {x}")
    if x < 0.5:
        s = abs(math.sin(math.pi * x))
        v = math.log(math.pi / s) - _lgamma_pos(1.0 - x)
    else:
        v = _lgamma_pos(x)
    return SpecialValue(v, 32 * _EPS * (abs(v) + 1.0))


def gamma_p(s: float, x: float) -> float:
    """Regularized lower incomplete gamma P(s, x)."""
    if s <= 0:
        raise DomainError("gamma_p requires s > 0")
    if x <= 0:
        return 0.0
    if x < s + 1.0:
        ap = s
        term = 1.0 / s
        total = term
        for _ in range(10000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        return total * math.exp(-x + s * math.log(x) - _lgamma_pos(s))
    return 1.0 - gamma_q(s, x)


def gamma_q(s: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(s, x) = 1 - P(s, x)."""
    if s <= 0:
        raise DomainError("gamma_q requires s > 0")
    if x <= 0:
        return 1.0
    if x < s + 1.0:
        return 1.0 - gamma_p(s, x)
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + s * math.log(x) - _lgamma_pos(s)) * h


# --- vectorized counterparts (same algorithms, fixed-depth) --------------------

def erf_array(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(ax)
    lo = ax <= ERF_SWITCH
    if lo.any():
        xs = ax[lo]
        x2 = 2.0 * xs * xs
        term = xs.copy()
        total = xs.copy()
        for n in range(1, 90):
            term *= x2 / (2 * n + 1)
            total += term
        out[lo] = 2.0 / _SQRT_PI * np.exp(-xs * xs) * total
    hi = ~lo
    if hi.any():
        out[hi] = 1.0 - _erfc_cf_array(ax[hi])
    return np.copysign(out, x)


def _erfc_cf_array(x: np.ndarray) -> np.ndarray:
    # backward evaluation of the same continued fraction at fixed depth
    f = x.copy()
    for k in range(200, 0, -1):
        f = x + (0.5 * k) / f
    return np.exp(-x * x) / (_SQRT_PI * f)


def erfc_array(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    hi = x >= ERFC_SWITCH
    lo = x < -ERF_SWITCH
    mid = ~(hi | lo)
    if hi.any():
        out[hi] = _erfc_cf_array(x[hi])
    if lo.any():
        out[lo] = 2.0 - _erfc_cf_array(-x[lo])
    if mid.any():
        out[mid] = 1.0 - erf_array(x[mid])
    return out


def arcsinh_array(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    with np.errstate(over="ignore"):
        v = np.where(
            ax > 1e150,
            np.log(np.maximum(ax, 1.0)) + math.log(2.0),
            np.log1p(ax + ax * ax / (1.0 + np.sqrt(1.0 + ax * ax))),
        )
    return np.copysign(v, x)


def arcosh_array(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 1.0):
        raise DomainError("arcosh requires x >= 1")
    y = x - 1.0
    return np.log1p(y + np.sqrt(y * (x + 1.0)))
