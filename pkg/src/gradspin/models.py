"""The three gradient spin models: exchange rules, jump rates, closed forms.

Each model acts on a bond (x, x+1).  ``gKMP`` redistributes the pair energy
with a Beta(2s, 2s) fraction, ``dKMP`` redistributes the pair particle count
uniformly, and ``Harm`` moves k particles from one site to its neighbour at
a rate that only depends on the departure occupation.

Two routes to every generator quantity are provided: closed forms, and
brute-force expectations of the bond kernel (quadrature for gKMP, finite sums
for the particle models).  Tests compare one against the other.
"""

from __future__ import annotations

import enum
import math
import threading
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .numerics import integrate_01, log_gamma


class ModelKind(str, enum.Enum):
    GKMP = "gKMP"
    DKMP = "dKMP"
    HARM = "Harm"

    @classmethod
    def parse(cls, value: "str | ModelKind") -> "ModelKind":
        if isinstance(value, cls):
            return value
        lowered = str(value).strip().lower()
        for kind in cls:
            if kind.value.lower() == lowered:
                return kind
        raise ValueError(f"unknown model kind {value!r}; expected one of gKMP, dKMP, Harm")


@dataclass(frozen=True)
class ModelSpec:
    """Model kind plus spin ``s`` (dKMP is the s = 1/2 member only)."""

    kind: ModelKind
    spin: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        spin = float(self.spin)
        object.__setattr__(self, "spin", spin)
        if not (spin > 0) or not math.isfinite(spin):
            raise ValueError(f"spin must be positive, got {self.spin!r}")
        if self.kind is ModelKind.DKMP and spin != 0.5:
            raise ValueError("dKMP is only defined here for spin 1/2")
        if self.kind is ModelKind.HARM and spin < 0.5:
            warnings.warn(
                f"Harm model with spin {spin} < 1/2: attractiveness is not established in this range",
                stacklevel=2,
            )

    @property
    def two_s(self) -> float:
        return 2.0 * self.spin

    @property
    def is_particle(self) -> bool:
        return self.kind is not ModelKind.GKMP

    @property
    def diffusion(self) -> float:
        return diffusion_coefficient(self)

    def __str__(self) -> str:
        if self.kind is ModelKind.DKMP:
            return "dKMP"
        return f"{self.kind.value}(s={self.spin:g})"


@dataclass(frozen=True)
class BondEvent:
    """One event of the dynamics.

    ``site`` is the left end of the bond for gKMP/dKMP and the departure site
    for Harm; ``direction`` is +1/-1 for Harm jumps and +1 otherwise.  The
    payload is the Beta fraction u (gKMP), the new left occupation r (dKMP) or
    the number of jumping particles k (Harm).
    """

    site: int
    direction: int
    payload: float
    time: float


def diffusion_coefficient(spec: ModelSpec) -> float:
    if spec.kind is ModelKind.HARM:
        return 1.0 / spec.two_s
    return 0.5


def redistribution_weight(s: float, u):
    """Beta(2s, 2s) density gamma_s(u) on the open interval (0, 1)."""
    if not s > 0:
        raise ValueError("s must be positive")
    uarr = np.asarray(u, dtype=float)
    if np.any((uarr <= 0) | (uarr >= 1)):
        raise ValueError("u must lie in the open interval (0, 1)")
    a = 2.0 * s
    lognorm = special.gammaln(2 * a) - 2 * special.gammaln(a)
    out = np.exp(lognorm + (a - 1.0) * (np.log(uarr) + np.log1p(-uarr)))
    return float(out) if out.ndim == 0 else out


def mixing_integral(s: float) -> float:
    """I(s) = E[u(1-u)] under Beta(2s, 2s), equal to s / (4s + 1)."""
    return s / (4.0 * s + 1.0)


def apply_gkmp_exchange(eta_x: float, eta_y: float, u: float) -> tuple[float, float]:
    total = eta_x + eta_y
    left = u * total
    return left, total - left


def apply_dkmp_exchange(eta_x: int, eta_y: int, r: int) -> tuple[int, int]:
    total = eta_x + eta_y
    if not 0 <= r <= total:
        raise ValueError(f"r={r} outside 0..{total}")
    return r, total - r


# ---------------------------------------------------------------------------
# Harmonic rates


def harm_rates(n: int, s: float) -> np.ndarray:
    """Rates c^k for k = 1..n of moving k particles off a site holding n."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return np.zeros(0)
    a = 2.0 * s
    k = np.arange(1, n + 1, dtype=float)
    logr = special.gammaln(n + 1.0) + special.gammaln(n - k + a) - special.gammaln(n - k + 1.0) - special.gammaln(n + a)
    return np.exp(logr) / k


def harm_rate(n: int, k: int, s: float) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        return 0.0
    a = 2.0 * s
    logr = log_gamma(n + 1.0) + log_gamma(n - k + a) - log_gamma(n - k + 1.0) - log_gamma(n + a)
    return math.exp(logr) / k


def harm_total_rate(n: int, s: float) -> float:
    """Sum over k of c^k(n): the total rate for one jump direction."""
    return float(harm_rates(n, s).sum())


class HarmRateCache:
    """Cumulative Harm rate tables, grown lazily to the largest occupancy seen.

    For occupancy n the cumulative sums C_1..C_n live in
    ``cum[offsets[n] : offsets[n] + n]``; ``totals[n] = C_n``.  Growth builds
    new arrays, so array references handed out earlier remain valid.
    """

    def __init__(self, s: float, capacity: int = 16):
        if not s > 0:
            raise ValueError("s must be positive")
        self.s = float(s)
        self._lock = threading.Lock()
        self.capacity = -1
        self.cum = np.zeros(0)
        self.offsets = np.zeros(1, dtype=np.int64)
        self.totals = np.zeros(1)
        self.ensure(capacity)

    def ensure(self, n: int) -> None:
        if n <= self.capacity:
            return
        with self._lock:
            if n <= self.capacity:
                return
            new_cap = max(n, 2 * self.capacity, 16)
            start = self.capacity + 1
            parts = [self.cum]
            offsets = np.empty(new_cap + 1, dtype=np.int64)
            totals = np.empty(new_cap + 1)
            offsets[:start] = self.offsets[:start]
            totals[:start] = self.totals[:start]
            pos = self.cum.size
            for m in range(max(start, 0), new_cap + 1):
                c = np.cumsum(harm_rates(m, self.s))
                offsets[m] = pos
                totals[m] = c[-1] if m > 0 else 0.0
                parts.append(c)
                pos += m
            self.cum = np.concatenate(parts)
            self.offsets = offsets
            self.totals = totals
            self.capacity = new_cap

    def total(self, n: int) -> float:
        self.ensure(n)
        return float(self.totals[n])

    def cumulative(self, n: int) -> np.ndarray:
        self.ensure(n)
        o = self.offsets[n]
        return self.cum[o : o + n]


# ---------------------------------------------------------------------------
# bond generator: closed forms and kernel expectations


def bond_expectation(spec: ModelSpec, a, b, f: Callable[[float, float], float], tol: float = 1e-12) -> float:
    """L_{x,x+1} f at local state (eta_x, eta_{x+1}) = (a, b), by brute force.

    For gKMP ``tol`` is relative to the magnitude of f on the bond.

    ``f`` must be a function of the two bond occupations only.  gKMP
    integrates against the Beta density; the particle models enumerate the
    jump kernel exactly.
    """
    base = f(a, b)
    if spec.kind is ModelKind.GKMP:
        total = a + b
        s = spec.spin

        def integrand(u: float) -> float:
            return redistribution_weight(s, u) * (f(u * total, (1.0 - u) * total) - base)

        def reflected(w: float) -> float:
            # u = 1 - w; the Beta(2s, 2s) density is symmetric
            return redistribution_weight(s, w) * (f((1.0 - w) * total, w * total) - base)

        # absolute tolerance relative to the size of f on the bond
        scale = max(1.0, abs(base), abs(f(total, 0.0)), abs(f(0.0, total)), abs(f(total / 2, total / 2)))
        return integrate_01(integrand, tol=tol * scale, f_reflected=reflected).value
    a, b = int(a), int(b)
    if spec.kind is ModelKind.DKMP:
        n = a + b
        return sum(f(r, n - r) - base for r in range(n + 1)) / (n + 1)
    out = 0.0
    for k, c in enumerate(harm_rates(a, spec.spin), start=1):
        out += c * (f(a - k, b + k) - base)
    for k, c in enumerate(harm_rates(b, spec.spin), start=1):
        out += c * (f(a + k, b - k) - base)
    return out


def generator_eta(spec: ModelSpec, config, x: int, method: str = "closed") -> float:
    """Microscopic generator applied to eta_x (no N**2 factor)."""
    eta = np.asarray(config)
    n = eta.size
    left, mid, right = eta[(x - 1) % n], eta[x], eta[(x + 1) % n]
    if method == "closed":
        return diffusion_coefficient(spec) * float(right + left - 2 * mid)
    if method == "kernel":
        # bond (x, x+1) acting on its left end, bond (x-1, x) on its right end
        return bond_expectation(spec, mid, right, lambda p, q: p) + bond_expectation(spec, left, mid, lambda p, q: q)
    raise ValueError(f"unknown method {method!r}")


def generator_product(spec: ModelSpec, a, b) -> float:
    """Closed form of L_{x,x+1}(eta_x eta_{x+1}) at (eta_x, eta_{x+1}) = (a, b)."""
    if spec.kind is ModelKind.GKMP:
        return (a + b) ** 2 * mixing_integral(spec.spin) - a * b
    if spec.kind is ModelKind.DKMP:
        return a * a / 6 + b * b / 6 - 2.0 * a * b / 3 - a / 6 - b / 6
    t = spec.two_s
    return (a - b) ** 2 / t - (a * a + b * b + t * a + t * b) / (t * (t + 1.0))


def carre_du_champ_bond(spec: ModelSpec, a, b) -> float:
    """D (a - b)**2 - L_{x,x+1}(eta_x eta_{x+1}): the per-bond fluctuation term."""
    return diffusion_coefficient(spec) * (a - b) ** 2 - generator_product(spec, a, b)


def instantaneous_current(spec: ModelSpec, config, x: int) -> float:
    eta = np.asarray(config)
    return diffusion_coefficient(spec) * float(eta[(x + 1) % eta.size] - eta[x])
