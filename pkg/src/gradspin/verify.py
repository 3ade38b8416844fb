"""Exact-identity batteries: generator, Beta-binomial sums, I(s), bond products, key bound.

Each suite returns a :class:`SuiteResult` with its worst residual, so the
same code backs both the test-suite and the ``verify`` command.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .models import (
    ModelKind,
    ModelSpec,
    bond_expectation,
    diffusion_coefficient,
    generator_eta,
    generator_product,
    mixing_integral,
    redistribution_weight,
)
from .numerics import RngStream, integrate_01

GRADIENT_SPECS = (
    ModelSpec(ModelKind.GKMP, 0.5),
    ModelSpec(ModelKind.GKMP, 1.0),
    ModelSpec(ModelKind.DKMP, 0.5),
    ModelSpec(ModelKind.HARM, 0.5),
    ModelSpec(ModelKind.HARM, 1.0),
)
PRODUCT_SPECS = GRADIENT_SPECS + (ModelSpec(ModelKind.GKMP, 2.0), ModelSpec(ModelKind.HARM, 2.0))
IDENTITY_A = (0.5, 1.0, 1.7, 2.0, 4.0, 6.0)
MIXING_S = (0.25, 0.5, 1.0, 2.0, 5.0)
CORRUPTION = 1.1


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst_residual: float
    tolerance: float
    checked: int
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _finish(name, worst, tol, checked, t0) -> SuiteResult:
    return SuiteResult(name, bool(worst <= tol), float(worst), tol, checked, time.perf_counter() - t0)


def gradient_suite(n_configs: int = 200, seed: int = 0, corrupt_diffusion: bool = False,
                   specs=GRADIENT_SPECS, sites: int = 8, max_value: int = 50) -> list[SuiteResult]:
    """L eta_x from the jump kernel against D (eta_{x+1} + eta_{x-1} - 2 eta_x).

    With ``corrupt_diffusion`` the closed form uses a wrong D, a negative
    control that must fail.
    """
    out = []
    for j, spec in enumerate(specs):
        t0 = time.perf_counter()
        gen = RngStream(seed, j).generator
        tol = 1e-7 if spec.kind is ModelKind.GKMP else 1e-9
        D = diffusion_coefficient(spec) * (CORRUPTION if corrupt_diffusion else 1.0)
        worst = 0.0
        for _ in range(n_configs):
            if spec.is_particle:
                eta = gen.integers(0, max_value + 1, sites)
            else:
                eta = gen.uniform(0.0, max_value, sites)
            x = int(gen.integers(sites))
            kernel = generator_eta(spec, eta, x, method="kernel")
            closed = D * float(eta[(x + 1) % sites] + eta[x - 1] - 2 * eta[x])
            worst = max(worst, abs(kernel - closed))
        out.append(_finish(f"gradient[{spec}]", worst, tol, n_configs, t0))
    return out


def _beta_binomial_terms(n: int, a: float) -> np.ndarray:
    """T_k = Gamma(n+1) Gamma(a-k+n) / (Gamma(a+n) Gamma(n-k+1)), k = 1..n, by recurrence."""
    k = np.arange(1, n)
    ratios = (n - k) / (a + n - k - 1.0)
    first = n / (a + n - 1.0)
    return first * np.concatenate(([1.0], np.cumprod(ratios)))


def identity_suite(n_max: int = 200, a_values=IDENTITY_A, tol: float = 1e-10) -> SuiteResult:
    """sum_k T_k = n/a and sum_k k T_k = (a+n) n / (a (a+1)), relative residuals."""
    t0 = time.perf_counter()
    worst = 0.0
    checked = 0
    for a in a_values:
        for n in range(1, n_max + 1):
            T = _beta_binomial_terms(n, a)
            k = np.arange(1, n + 1)
            for lhs, rhs in ((T.sum(), n / a), ((k * T).sum(), (a + n) * n / (a * (a + 1.0)))):
                worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
                checked += 1
    return _finish("beta-binomial identities", worst, tol, checked, t0)


def mixing_suite(s_values=MIXING_S, tol: float = 1e-10) -> SuiteResult:
    """Quadrature of u(1-u) against the Beta(2s, 2s) density versus s/(4s+1)."""
    t0 = time.perf_counter()
    worst = 0.0
    for s in s_values:

        def f(u, s=s):
            return redistribution_weight(s, u) * u * (1.0 - u)

        # the integrand is symmetric, so it is its own reflection
        val = integrate_01(f, tol=1e-13, f_reflected=f).value
        worst = max(worst, abs(val - mixing_integral(s)))
    return _finish("I(s) quadrature", worst, tol, len(s_values), t0)


def product_suite(n_max: int = 60, specs=PRODUCT_SPECS, n_real: int = 100, seed: int = 0,
                  tol: float = 1e-8) -> list[SuiteResult]:
    """Closed-form L_{x,x+1}(eta_x eta_{x+1}) against the jump-kernel expectation.

    Exhaustive over a + b <= n_max for particle models; ``n_real`` random real
    pairs in [0, n_max) for gKMP.
    """
    out = []
    for j, spec in enumerate(specs):
        t0 = time.perf_counter()
        if spec.is_particle:
            pairs = [(a, n - a) for n in range(n_max + 1) for a in range(n + 1)]
        else:
            gen = RngStream(seed, 100 + j).generator
            pairs = [tuple(p) for p in gen.uniform(0.0, n_max, (n_real, 2))]
        worst = 0.0
        for a, b in pairs:
            brute = bond_expectation(spec, a, b, lambda p, q: p * q)
            worst = max(worst, abs(brute - generator_product(spec, a, b)))
        out.append(_finish(f"generator product[{spec}]", worst, tol, len(pairs), t0))
    return out


def key_bound_suite(n_max: int = 100, n_real: int = 10_000, seed: int = 0, specs=PRODUCT_SPECS) -> list[SuiteResult]:
    """D (a-b)^2 - L(ab) <= D (a^2 + b^2); the residual is the largest excess (0 if none)."""
    out = []
    for j, spec in enumerate(specs):
        t0 = time.perf_counter()
        D = diffusion_coefficient(spec)
        if spec.is_particle:
            a, b = np.meshgrid(np.arange(n_max + 1.0), np.arange(n_max + 1.0))
        else:
            gen = RngStream(seed, 200 + j).generator
            a, b = gen.uniform(0.0, n_max, (2, n_real))
        lhs = D * (a - b) ** 2 - generator_product(spec, a, b)
        rhs = D * (a * a + b * b)
        excess = float(np.max(lhs - rhs))
        scale = float(np.max(rhs)) or 1.0
        tol = 1e-12 * scale
        out.append(_finish(f"key bound[{spec}]", max(excess, 0.0), tol, int(np.size(a)), t0))
    return out


def run_all(n_max: int | None = None, corrupt_diffusion: bool = False, seed: int = 0) -> list[SuiteResult]:
    """All batteries at default sizes; ``n_max`` caps every integer grid."""

    def cap(default: int) -> int:
        return default if n_max is None else min(default, n_max)

    results = gradient_suite(seed=seed, corrupt_diffusion=corrupt_diffusion, max_value=cap(50))
    results.append(identity_suite(cap(200)))
    results.append(mixing_suite())
    results += product_suite(cap(60), seed=seed)
    results += key_bound_suite(cap(100), seed=seed)
    return results


def worst_relative(results: list[SuiteResult]) -> float:
    """Largest residual-to-tolerance ratio across suites (<= 1 means all pass)."""
    return max((r.worst_residual / r.tolerance if r.tolerance else math.inf) for r in results)
