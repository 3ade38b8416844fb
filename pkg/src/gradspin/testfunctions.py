"""Smooth periodic test functions G: 1, cos(2 pi m u), sin(2 pi m u) for m <= 8."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_MODE = 8
_ID = re.compile(r"^(one|cos|sin)(\d*)$")


@dataclass(frozen=True)
class TestFunction:
    """Closed-form test function with its lattice data on an N-site torus."""

    __test__ = False  # not a pytest class

    id: str
    family: str  # "one", "cos" or "sin"
    mode: int

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "one":
            return np.ones_like(u)
        arg = 2.0 * np.pi * self.mode * u
        return np.cos(arg) if self.family == "cos" else np.sin(arg)

    def laplacian(self, u):
        """Continuum second derivative."""
        if self.family == "one":
            return np.zeros_like(np.asarray(u, dtype=float))
        return -((2.0 * np.pi * self.mode) ** 2) * self(u)

    def grid(self, N: int) -> np.ndarray:
        return self(np.arange(N) / N)

    def discrete_laplacian(self, N: int) -> np.ndarray:
        g = self.grid(N)
        return N * N * (np.roll(g, -1) + np.roll(g, 1) - 2.0 * g)

    def discrete_gradient(self, N: int) -> np.ndarray:
        """nabla^+_N G(x/N) = N (G((x+1)/N) - G(x/N))."""
        g = self.grid(N)
        return N * (np.roll(g, -1) - g)


@lru_cache(maxsize=None)
def get_test_function(id: str) -> TestFunction:
    m = _ID.match(id.strip())
    if not m:
        raise ValueError(f"unknown test function {id!r}; use one, cosM or sinM with 1 <= M <= {MAX_MODE}")
    family, digits = m.group(1), m.group(2)
    if family == "one":
        if digits:
            raise ValueError("'one' takes no mode")
        return TestFunction("one", "one", 0)
    mode = int(digits) if digits else 1
    if not 1 <= mode <= MAX_MODE:
        raise ValueError(f"mode must be in 1..{MAX_MODE}, got {mode}")
    return TestFunction(f"{family}{mode}", family, mode)


def preset_ids() -> list[str]:
    return ["one"] + [f"{f}{m}" for m in range(1, MAX_MODE + 1) for f in ("cos", "sin")]
