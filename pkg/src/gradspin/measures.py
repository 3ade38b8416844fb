"""Invariant measures, their moments, and profile-associated initial measures.

Invariant marginals with parameter rho:

* gKMP: Gamma(shape 2s, scale rho), mean 2s*rho
* dKMP: geometric with mean rho
* Harm: negative binomial with r = 2s and mean 2s*rho

A profile rho0 is turned into a product measure whose site means equal
rho0(x/N), i.e. the local parameter is rho0/(2s) for gKMP and Harm and rho0
for dKMP.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import special, stats

from .models import ModelKind, ModelSpec
from .numerics import as_generator, log_gamma


class DominationError(ValueError):
    """A local marginal is not stochastically dominated by the reference one."""


# ---------------------------------------------------------------------------
# profiles


class Profile:
    """A bounded, 1-periodic density profile rho0 on the unit torus."""

    name: str = "profile"

    def __call__(self, u):
        raise NotImplementedError

    def sup(self) -> float:
        return float(np.max(self(np.linspace(0.0, 1.0, 4096, endpoint=False))))

    def inf(self) -> float:
        return float(np.min(self(np.linspace(0.0, 1.0, 4096, endpoint=False))))

    def __repr__(self) -> str:
        return f"Profile({self.name!r})"


@dataclass(frozen=True, repr=False)
class ConstProfile(Profile):
    c: float

    def __post_init__(self):
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValueError("constant profile value must be finite and >= 0")

    @property
    def name(self) -> str:
        return f"const:{self.c:g}"

    def __call__(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.c)

    def sup(self) -> float:
        return self.c

    def inf(self) -> float:
        return self.c


@dataclass(frozen=True, repr=False)
class SineProfile(Profile):
    """a + b sin(2 pi u) with a > |b|."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > abs(self.b)):
            raise ValueError("sine profile needs a > |b|")

    @property
    def name(self) -> str:
        return f"sine:{self.a:g},{self.b:g}"

    def __call__(self, u):
        return self.a + self.b * np.sin(2.0 * np.pi * np.asarray(u, dtype=float))

    def sup(self) -> float:
        return self.a + abs(self.b)

    def inf(self) -> float:
        return self.a - abs(self.b)


@dataclass(frozen=True, repr=False)
class StepProfile(Profile):
    """c1 on [0, u_star), c2 on [u_star, 1)."""

    c1: float
    c2: float
    u_star: float

    def __post_init__(self):
        if min(self.c1, self.c2) < 0:
            raise ValueError("step profile values must be >= 0")
        if not 0 < self.u_star < 1:
            raise ValueError("step location must lie in (0, 1)")

    @property
    def name(self) -> str:
        return f"step:{self.c1:g},{self.c2:g},{self.u_star:g}"

    def __call__(self, u):
        v = np.mod(np.asarray(u, dtype=float), 1.0)
        return np.where(v < self.u_star, self.c1, self.c2).astype(float)

    def sup(self) -> float:
        return max(self.c1, self.c2)

    def inf(self) -> float:
        return min(self.c1, self.c2)


class TableProfile(Profile):
    """Tabulated profile evaluated at the nearest grid point (periodically)."""

    def __init__(self, u, values, source: str = "<array>"):
        u = np.mod(np.asarray(u, dtype=float), 1.0)
        values = np.asarray(values, dtype=float)
        if u.ndim != 1 or u.shape != values.shape or u.size == 0:
            raise ValueError("table profile needs matching 1-D u and value arrays")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("table profile values must be finite and >= 0")
        order = np.argsort(u, kind="stable")
        self.u = u[order]
        self.values = values[order]
        self.source = source

    @property
    def name(self) -> str:
        return f"table:{self.source}"

    @classmethod
    def from_csv(cls, path) -> "TableProfile":
        us, vs = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    us.append(float(row[0]))
                    vs.append(float(row[1]))
                except ValueError:
                    if us:  # only a leading header row may be non-numeric
                        raise
        return cls(us, vs, source=str(path))

    def __call__(self, u):
        v = np.mod(np.asarray(u, dtype=float), 1.0)
        # periodic nearest neighbour among the grid points
        ext_u = np.concatenate([self.u - 1.0, self.u, self.u + 1.0])
        ext_v = np.concatenate([self.values] * 3)
        idx = np.clip(np.searchsorted(ext_u, v), 1, ext_u.size - 1)
        left = ext_u[idx - 1]
        right = ext_u[idx]
        pick = np.where(v - left <= right - v, idx - 1, idx)
        return ext_v[pick]

    def sup(self) -> float:
        return float(self.values.max())

    def inf(self) -> float:
        return float(self.values.min())


def parse_profile(text: str) -> Profile:
    """Parse a preset: ``const:c``, ``sine:a,b``, ``step:c1,c2,u*``, ``table:<path>``."""
    if not isinstance(text, str) or ":" not in text:
        raise ValueError(f"profile preset must look like 'kind:args', got {text!r}")
    kind, _, args = text.partition(":")
    kind = kind.strip().lower()
    if kind == "table":
        path = Path(args.strip())
        if not path.is_file():
            raise ValueError(f"profile table {str(path)!r} not found")
        return TableProfile.from_csv(path)
    try:
        nums = [float(a) for a in args.split(",")] if args.strip() else []
    except ValueError as exc:
        raise ValueError(f"bad numbers in profile preset {text!r}") from exc
    if kind == "const" and len(nums) == 1:
        return ConstProfile(nums[0])
    if kind == "sine" and len(nums) == 2:
        return SineProfile(*nums)
    if kind == "step" and len(nums) == 3:
        return StepProfile(*nums)
    raise ValueError(f"unknown or malformed profile preset {text!r}")


# ---------------------------------------------------------------------------
# invariant measures


@dataclass(frozen=True)
class InvariantSpec:
    model: ModelSpec
    rho: float

    def __post_init__(self):
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ValueError(f"rho must be positive, got {self.rho!r}")

    @property
    def mean(self) -> float:
        return mean_for_parameter(self.model, self.rho)


@dataclass(frozen=True)
class InitialMeasureSpec:
    model: ModelSpec
    profile: Profile
    rho_hat: float

    def __post_init__(self):
        if not (self.rho_hat > 0 and math.isfinite(self.rho_hat)):
            raise ValueError(f"rho_hat must be positive, got {self.rho_hat!r}")


class Moment(NamedTuple):
    value: float
    kind: str  # "raw" or "factorial"


def mean_for_parameter(model: ModelSpec, rho):
    return rho if model.kind is ModelKind.DKMP else model.two_s * rho


def parameter_for_mean(model: ModelSpec, mean):
    return mean if model.kind is ModelKind.DKMP else mean / model.two_s


def _sample_marginal(model: ModelSpec, rho: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Independent draws with per-site parameter ``rho`` (zero where rho == 0)."""
    rho = np.asarray(rho, dtype=float)
    pos = rho > 0
    safe = np.where(pos, rho, 1.0)
    if model.kind is ModelKind.GKMP:
        out = gen.gamma(model.two_s, safe)
        return np.where(pos, out, 0.0)
    if model.kind is ModelKind.DKMP:
        out = gen.geometric(1.0 / (1.0 + safe)) - 1
    else:
        out = gen.negative_binomial(model.two_s, 1.0 / (1.0 + safe))
    return np.where(pos, out, 0).astype(np.int64)


def sample_invariant(ispec: InvariantSpec, N: int, rng) -> np.ndarray:
    return _sample_marginal(ispec.model, np.full(N, ispec.rho), as_generator(rng))


def moment(ispec: InvariantSpec, m: int) -> Moment:
    """Closed-form m-th moment of the invariant marginal.

    Raw moment for gKMP, factorial moment E[eta (eta-1) ... (eta-m+1)] for the
    particle models.
    """
    if m < 0 or int(m) != m:
        raise ValueError("m must be a non-negative integer")
    model, rho = ispec.model, ispec.rho
    if model.kind is ModelKind.DKMP:
        return Moment(math.factorial(m) * rho**m, "factorial")
    value = rho**m * math.exp(log_gamma(model.two_s + m) - log_gamma(model.two_s))
    return Moment(value, "raw" if model.kind is ModelKind.GKMP else "factorial")


def empirical_moment(samples, m: int, kind: str) -> tuple[float, float]:
    """Sample (raw or factorial) moment of order m and its standard error."""
    x = np.asarray(samples, dtype=float)
    if kind == "raw":
        terms = x**m
    elif kind == "factorial":
        terms = np.ones_like(x)
        for j in range(m):
            terms = terms * (x - j)
    else:
        raise ValueError(kind)
    return float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(terms.size))


def raw_second_moment(ispec: InvariantSpec) -> float:
    m1 = moment(ispec, 1).value
    m2 = moment(ispec, 2)
    return m2.value if m2.kind == "raw" else m2.value + m1


def variance(ispec: InvariantSpec) -> float:
    return raw_second_moment(ispec) - moment(ispec, 1).value ** 2


def local_parameters(imspec: InitialMeasureSpec, N: int) -> np.ndarray:
    rho0 = np.asarray(imspec.profile(np.arange(N) / N), dtype=float)
    if np.any(rho0 < 0) or not np.all(np.isfinite(rho0)):
        raise ValueError("profile must be finite and non-negative")
    return parameter_for_mean(imspec.model, rho0)


def sample_profile_measure(imspec: InitialMeasureSpec, N: int, rng) -> np.ndarray:
    return _sample_marginal(imspec.model, local_parameters(imspec, N), as_generator(rng))


# ---------------------------------------------------------------------------
# monotone coupling


def quantile(model: ModelSpec, rho, u):
    """Inverse CDF of the invariant marginal with parameter ``rho`` at ``u``."""
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    pos = rho > 0
    safe = np.where(pos, rho, 1.0)
    if model.kind is ModelKind.GKMP:
        out = safe * special.gammaincinv(model.two_s, u)
        return np.where(pos, out, 0.0)
    if model.kind is ModelKind.DKMP:
        q = safe / (1.0 + safe)
        with np.errstate(divide="ignore"):
            k = np.ceil(np.log1p(-u) / np.log(q)) - 1.0
        out = np.maximum(k, 0.0)
    else:
        out = stats.nbinom.ppf(u, model.two_s, 1.0 / (1.0 + safe))
    return np.where(pos, out, 0).astype(np.int64)


def marginal_cdf(model: ModelSpec, rho: float, z):
    z = np.asarray(z, dtype=float)
    if rho <= 0:
        return np.where(z >= 0, 1.0, 0.0)
    if model.kind is ModelKind.GKMP:
        return special.gammainc(model.two_s, np.maximum(z, 0.0) / rho)
    k = np.floor(z)
    if model.kind is ModelKind.DKMP:
        return np.where(k >= 0, 1.0 - (rho / (1.0 + rho)) ** (k + 1.0), 0.0)
    return np.where(k >= 0, stats.nbinom.cdf(k, model.two_s, 1.0 / (1.0 + rho)), 0.0)


def check_domination(model: ModelSpec, rho_loc: float, rho_hat: float, tail: float = 1e-12) -> None:
    """Raise DominationError unless CDF(rho_loc) >= CDF(rho_hat) on a grid.

    The grid runs up to the (1 - tail) quantile of the dominating marginal;
    beyond it the ordering follows from monotonicity of the marginal family in
    its parameter.
    """
    if rho_loc <= 0:
        return
    top = float(quantile(model, rho_hat, 1.0 - tail))
    if model.is_particle:
        grid = np.arange(0.0, top + 1.0)
    else:
        grid = np.linspace(0.0, top, 2049)[1:]
    lo = marginal_cdf(model, rho_loc, grid)
    hi = marginal_cdf(model, rho_hat, grid)
    worst = float(np.max(hi - lo))
    if worst > 1e-12:
        raise DominationError(
            f"marginal with parameter {rho_loc:g} is not dominated by parameter {rho_hat:g} "
            f"(CDF crossing by {worst:.3e})"
        )


def sample_dominated_pair(imspec: InitialMeasureSpec, N: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Profile configuration eta and nu_{rho_hat} configuration xi with eta <= xi.

    Both are inverse-CDF transforms of the same per-site uniforms.
    """
    model = imspec.model
    rho_loc = local_parameters(imspec, N)
    # each marginal family is stochastically increasing in its parameter,
    # so the largest local parameter is the binding case
    check_domination(model, float(rho_loc.max()), imspec.rho_hat)
    u = as_generator(rng).random(N)
    eta = quantile(model, rho_loc, u)
    xi = quantile(model, np.full(N, imspec.rho_hat), u)
    if np.any(eta > xi):
        raise DominationError("inverse-CDF coupling produced an order violation")
    return eta, xi
