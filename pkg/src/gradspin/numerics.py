"""Special functions, seeded random streams, samplers and quadrature.

Log-gamma and the polygamma functions are thin, domain-checked wrappers over
:mod:`scipy.special` (Cephes implementations).  Ratios of Gamma functions are
always formed as ``exp`` of log-gamma differences so that occupations in the
thousands do not overflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

__all__ = [
    "RngStream",
    "QuadratureResult",
    "QuadratureError",
    "mix64",
    "as_generator",
    "log_gamma",
    "digamma",
    "trigamma",
    "gamma_ratio",
    "sample_beta",
    "sample_gamma",
    "sample_geometric_mean",
    "sample_negative_binomial",
    "geometric_pmf",
    "negative_binomial_pmf",
    "beta_binomial_pmf",
    "integrate_01",
]

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix64(seed: int, stream_id: int) -> int:
    """Mix a base seed and a stream index into one 64-bit seed.

    Two rounds of the SplitMix64 finalizer (Steele, Lea & Flood 2014)::

        mix64(seed, id) = splitmix64(splitmix64(seed) ^ id)

    Distinct stream ids give well separated PCG64 seeds.
    """
    return _splitmix64(_splitmix64(seed & _MASK64) ^ (stream_id & _MASK64))


@dataclass
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    The stream is backed by a PCG64 generator seeded with
    :func:`mix64`.  It is single-owner: pass it around, never share it between
    threads.
    """

    seed: int
    stream_id: int = 0
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")
        self.generator = np.random.Generator(np.random.PCG64(mix64(self.seed, self.stream_id)))

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def _check_positive(name: str, value: float) -> None:
    if not (value > 0) or not math.isfinite(value):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")


# ---------------------------------------------------------------------------
# special functions


def log_gamma(x):
    """ln Gamma(x) for x > 0 (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("log_gamma requires x > 0")
    out = special.gammaln(arr)
    return float(out) if out.ndim == 0 else out


def digamma(x):
    """psi(x) = d/dx ln Gamma(x) for x > 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("digamma requires x > 0")
    out = special.digamma(arr)
    return float(out) if out.ndim == 0 else out


def trigamma(x):
    """psi'(x), positive and decreasing on x > 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("trigamma requires x > 0")
    out = special.polygamma(1, arr)
    return float(out) if out.ndim == 0 else out


def gamma_ratio(num, den):
    """prod Gamma(num_i) / prod Gamma(den_j), via log-gamma differences."""
    return math.exp(sum(log_gamma(a) for a in num) - sum(log_gamma(b) for b in den))


# ---------------------------------------------------------------------------
# samplers


def sample_beta(a: float, b: float, rng, size=None):
    _check_positive("a", a)
    _check_positive("b", b)
    return as_generator(rng).beta(a, b, size=size)


def sample_gamma(shape: float, scale: float, rng, size=None):
    _check_positive("shape", shape)
    _check_positive("scale", scale)
    return as_generator(rng).gamma(shape, scale, size=size)


def sample_geometric_mean(rho: float, rng, size=None):
    """Geometric law on {0, 1, ...} with mean ``rho``.

    P(k) = (1/(1+rho)) * (rho/(1+rho))**k.
    """
    _check_positive("rho", rho)
    # numpy counts trials up to the first success (support starts at 1)
    return as_generator(rng).geometric(1.0 / (1.0 + rho), size=size) - 1


def sample_negative_binomial(r: float, rho: float, rng, size=None):
    """Negative binomial on {0, 1, ...} with mean ``r * rho``.

    P(k) = (1/(1+rho))**r (rho/(1+rho))**k Gamma(r+k) / (k! Gamma(r)).
    """
    _check_positive("r", r)
    _check_positive("rho", rho)
    return as_generator(rng).negative_binomial(r, 1.0 / (1.0 + rho), size=size)


def geometric_pmf(k, rho: float):
    _check_positive("rho", rho)
    k = np.asarray(k)
    return np.exp(-np.log1p(rho) + k * (np.log(rho) - np.log1p(rho)))


def negative_binomial_pmf(k, r: float, rho: float):
    _check_positive("r", r)
    _check_positive("rho", rho)
    k = np.asarray(k, dtype=float)
    logp = (
        -r * np.log1p(rho)
        + k * (np.log(rho) - np.log1p(rho))
        + special.gammaln(r + k)
        - special.gammaln(k + 1.0)
        - special.gammaln(r)
    )
    return np.exp(logp)


def beta_binomial_pmf(n: int, k, alpha0: float, beta0: float):
    """C(n, k) B(k + alpha0, n - k + beta0) / B(alpha0, beta0)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    _check_positive("alpha0", alpha0)
    _check_positive("beta0", beta0)
    karr = np.asarray(k)
    if np.any((karr < 0) | (karr > n)):
        raise ValueError(f"k must lie in 0..{n}")
    kf = karr.astype(float)
    logp = (
        special.gammaln(n + 1.0)
        - special.gammaln(kf + 1.0)
        - special.gammaln(n - kf + 1.0)
        + special.betaln(kf + alpha0, n - kf + beta0)
        - special.betaln(alpha0, beta0)
    )
    out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float


class QuadratureError(RuntimeError):
    pass


def integrate_01(f: Callable[[float], float], tol: float = 1e-12, limit: int = 400,
                 f_reflected: Callable[[float], float] | None = None) -> QuadratureResult:
    """Integrate ``f`` over [0, 1] by adaptive Gauss-Kronrod quadrature.

    Each half is integrated in theta with u = sin(theta)**2, which turns
    endpoint singularities u**(a-1) (1-u)**(b-1) into sin**(2a-1) cos**(2b-1).
    Near u = 1 a double cannot resolve 1 - u, so for strong singularities
    pass ``f_reflected(w) = f(1 - w)`` evaluated without forming 1 - w; the
    upper half is then integrated in w.  ``f`` is never evaluated at u = 0
    or u = 1.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    upper = f_reflected if f_reflected is not None else (lambda w: f(1.0 - w))

    def half(h: Callable[[float], float]) -> tuple[float, float]:
        def g(theta: float) -> float:
            sn = math.sin(theta)
            u = sn * sn
            if u <= 0.0:
                return 0.0
            return h(u) * 2.0 * sn * math.cos(theta)

        return integrate.quad(g, 0.0, math.pi / 4, epsabs=tol * 0.05, epsrel=0.0, limit=limit)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            v1, e1 = half(f)
            v2, e2 = half(upper)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature did not converge: {exc}") from exc
    value, err = v1 + v2, abs(e1) + abs(e2)
    if not math.isfinite(value) or err > tol:
        raise QuadratureError(f"quadrature error estimate {err:.3e} exceeds tolerance {tol:.3e}")
    return QuadratureResult(value=float(value), abs_error_estimate=float(err))
