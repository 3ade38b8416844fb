"""Hydrodynamic comparison: empirical pairings and binned profiles against the heat equation.

The reference solution is spectral: the Fourier coefficients of the initial
profile are damped exactly by exp(-D (2 pi k)^2 t), so the only errors left in
a comparison are Monte Carlo noise and lattice effects.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import ObservationPlan, make_state, parallel_map, run_diffusive
from .measures import InitialMeasureSpec, Profile, parse_profile, sample_profile_measure
from .models import ModelSpec, diffusion_coefficient
from .numerics import RngStream
from .testfunctions import TestFunction, get_test_function, preset_ids

FFT_POINTS = 4096
NORMS = ("L1", "L2", "sup-pairing")


def pair(config, G: TestFunction | str, N: int | None = None) -> float:
    """<pi^N, G> = (1/N) sum_x eta_x G(x/N)."""
    eta = np.asarray(config, dtype=float)
    N = eta.size if N is None else N
    if eta.size != N:
        raise ValueError(f"configuration has {eta.size} sites, expected {N}")
    g = get_test_function(G) if isinstance(G, str) else G
    return float(eta @ g.grid(N) / N)


# ---------------------------------------------------------------------------
# heat equation


@dataclass(frozen=True)
class HeatSolution:
    """rho(t, u) = sum_k c_k exp(-D (2 pi k)^2 t) exp(2 pi i k u), |k| <= K_max."""

    D: float
    coefficients: np.ndarray  # c_k for k = -K_max..K_max

    @property
    def K_max(self) -> int:
        return (self.coefficients.size - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K_max, self.K_max + 1)

    def coefficient(self, k: int, t: float = 0.0) -> complex:
        if abs(k) > self.K_max:
            return 0.0j
        return complex(self.coefficients[k + self.K_max]) * math.exp(-self.D * (2 * math.pi * k) ** 2 * t)

    def __call__(self, t: float, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        k = self.modes
        damp = np.exp(-self.D * (2 * np.pi * k) ** 2 * t)
        phase = np.exp(2j * np.pi * np.multiply.outer(u, k))
        out = phase @ (self.coefficients * damp)
        return out.real

    def integral(self, G: TestFunction | str, t: float) -> float:
        """Exact int_0^1 G(u) rho(t, u) du for a preset test function."""
        g = get_test_function(G) if isinstance(G, str) else G
        if g.family == "one":
            return self.coefficient(0, t).real
        c = self.coefficient(g.mode, t)
        return c.real if g.family == "cos" else -c.imag


def solve_heat(profile: Profile | str, D: float, K_max: int = 64) -> HeatSolution:
    """Spectral solution of d_t rho = D rho'' on the unit torus."""
    if not D > 0:
        raise ValueError("D must be positive")
    if K_max < 1:
        raise ValueError("K_max must be >= 1")
    prof = parse_profile(profile) if isinstance(profile, str) else profile
    K_max = min(K_max, FFT_POINTS // 2 - 1)
    u = np.arange(FFT_POINTS) / FFT_POINTS
    vals = np.asarray(prof(u), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("profile must be finite")
    # trapezoid rule on a periodic grid == DFT
    spec = np.fft.fft(vals) / FFT_POINTS
    k = np.arange(-K_max, K_max + 1)
    coeffs = spec[k % FFT_POINTS]
    # enforce c_{-k} = conj(c_k) exactly
    coeffs = 0.5 * (coeffs + np.conj(coeffs[::-1]))
    return HeatSolution(float(D), coeffs)


# ---------------------------------------------------------------------------
# binned profiles and errors


def binned_profile(config, N: int, B: int) -> np.ndarray:
    """Block averages of the configuration over B equal bins."""
    eta = np.asarray(config, dtype=float)
    if eta.shape[-1] != N:
        raise ValueError(f"configuration has {eta.shape[-1]} sites, expected {N}")
    if B < 1 or N % B:
        raise ValueError(f"bin count {B} does not divide N={N}")
    return eta.reshape(*eta.shape[:-1], B, N // B).mean(axis=-1)


def bin_positions(B: int, N: int | None = None) -> np.ndarray:
    """Reference points of the bins: the mean site position x/N of each block.

    Without N the geometric bin centers (b + 1/2)/B are returned.
    """
    b = np.arange(B)
    if N is None:
        return (b + 0.5) / B
    w = N // B
    return (b * w + (w - 1) / 2.0) / N


def hydro_error(mean_binned_profile, heat_solution: HeatSolution, t: float, norm: str = "L1",
                N: int | None = None, pairings: dict[str, float] | None = None) -> float:
    """Distance of a replica-averaged observation to rho(t, .).

    L1/L2 compare the binned profile with rho sampled at :func:`bin_positions`
    (as a Riemann sum over the bins).  ``sup-pairing`` takes the largest
    |mean pairing - int G rho(t)| over the entries of ``pairings``.
    """
    if norm == "sup-pairing":
        if not pairings:
            raise ValueError("sup-pairing needs the mean pairings")
        return float(max(abs(v - heat_solution.integral(g, t)) for g, v in pairings.items()))
    prof = np.asarray(mean_binned_profile, dtype=float)
    ref = heat_solution(t, bin_positions(prof.size, N))
    diff = prof - ref
    if norm == "L1":
        return float(np.mean(np.abs(diff)))
    if norm == "L2":
        return float(np.sqrt(np.mean(diff * diff)))
    raise ValueError(f"unknown norm {norm!r}; choose from {NORMS}")


# ---------------------------------------------------------------------------
# experiments


def simulate_snapshots(spec: ModelSpec, profile: Profile, N: int, t_list, R: int, seed: int,
                       threads: int | None = None, rho_hat: float | None = None) -> np.ndarray:
    """Configurations at each time for replicas 0..R-1, shape (R, T, N).

    Replica r uses stream (seed, r) for both the initial draw and the dynamics.
    """
    imspec = InitialMeasureSpec(spec, profile, rho_hat if rho_hat is not None else max(profile.sup(), 1e-12))
    times = tuple(float(t) for t in t_list)

    def one(r: int) -> np.ndarray:
        rng = RngStream(seed, r)
        eta0 = sample_profile_measure(imspec, N, rng)
        state = make_state(spec, eta0, rng)
        rec = run_diffusive(state, spec, ObservationPlan(times, snapshots=True))
        return rec.snapshots

    return np.stack(parallel_map(one, range(R), threads))


def _jackknife(values: np.ndarray, stat) -> tuple[float, float]:
    """stat(mean over replicas) and its jackknife standard error (axis 0 = replicas)."""
    R = values.shape[0]
    total = values.sum(axis=0)
    full = stat(total / R)
    if R < 2:
        return full, math.nan
    loo = np.array([stat((total - values[r]) / (R - 1)) for r in range(R)])
    se = math.sqrt((R - 1) / R * float(np.sum((loo - loo.mean()) ** 2)))
    return full, se


@dataclass
class ConvergenceRow:
    N: int
    t: float
    norm: str
    error: float
    se: float


@dataclass
class ConvergenceTable:
    model: str
    spin: float
    D: float
    profile: str
    bins: int
    replicas: int
    seed: int
    rows: list[ConvergenceRow] = field(default_factory=list)
    # (N, t) -> (mean binned profile, per-bin standard error)
    profiles: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def error(self, N: int, t: float, norm: str = "L1") -> ConvergenceRow:
        for row in self.rows:
            if row.N == N and row.t == t and row.norm == norm:
                return row
        raise KeyError((N, t, norm))

    def monotone_in_N(self, norm: str = "L1", z: float = 2.0) -> bool:
        """Errors decrease with N for every t, allowing z combined standard errors."""
        for t in sorted({r.t for r in self.rows}):
            cells = sorted((r for r in self.rows if r.t == t and r.norm == norm), key=lambda r: r.N)
            for a, b in zip(cells, cells[1:]):
                if b.error > a.error + z * math.hypot(a.se, b.se):
                    return False
        return True

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "t", "norm", "error", "se"])
        for r in self.rows:
            w.writerow([r.N, repr(r.t), r.norm, repr(r.error), repr(r.se)])
        return buf.getvalue()

    def profiles_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "t", "bin", "u", "mean", "se"])
        for (N, t), (mean, se) in sorted(self.profiles.items()):
            for b, (u, m, s) in enumerate(zip(bin_positions(mean.size, N), mean, se)):
                w.writerow([N, repr(t), b, repr(float(u)), repr(float(m)), repr(float(s))])
        return buf.getvalue()


def convergence_experiment(spec: ModelSpec, profile: Profile | str, N_list, t_list, R: int, seed: int,
                           bins: int = 32, norms=NORMS, threads: int | None = None,
                           K_max: int = 64) -> ConvergenceTable:
    """Error of the replica-averaged observation against the heat equation, per (N, t).

    Deterministic given the seed.  Standard errors are jackknife estimates
    over replicas.
    """
    prof = parse_profile(profile) if isinstance(profile, str) else profile
    if R < 1:
        raise ValueError("need at least one replica")
    for N in N_list:
        if N % bins:
            raise ValueError(f"bin count {bins} does not divide N={N}")
    for norm in norms:
        if norm not in NORMS:
            raise ValueError(f"unknown norm {norm!r}")
    D = diffusion_coefficient(spec)
    heat = solve_heat(prof, D, K_max)
    table = ConvergenceTable(spec.kind.value, spec.spin, D, prof.name, bins, R, seed)
    funcs = [get_test_function(g) for g in preset_ids()]
    for N in N_list:
        snaps = simulate_snapshots(spec, prof, N, t_list, R, seed, threads).astype(float)
        grids = np.array([g.grid(N) for g in funcs])
        for i, t in enumerate(t_list):
            binned = binned_profile(snaps[:, i], N, bins)  # (R, B)
            mean = binned.mean(axis=0)
            se = binned.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.full(bins, math.nan)
            table.profiles[(N, float(t))] = (mean, se)
            pairs = snaps[:, i] @ grids.T / N  # (R, G)
            for norm in norms:
                if norm == "sup-pairing":

                    def stat(p, t=t):
                        return hydro_error(None, heat, t, norm, pairings={g.id: v for g, v in zip(funcs, p)})

                    err, err_se = _jackknife(pairs, stat)
                else:
                    err, err_se = _jackknife(binned, lambda m, t=t, norm=norm: hydro_error(m, heat, t, norm, N=N))
                table.rows.append(ConvergenceRow(N, float(t), norm, float(err), float(err_se)))
    return table


def manifest(config: dict, content_hash: str, extra: dict | None = None) -> str:
    """JSON manifest embedding the resolved configuration."""
    doc = {"config": config, "content_hash": content_hash}
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# single-mode decay


@dataclass(frozen=True)
class DecayFit:
    rate: float
    se: float
    times: tuple[float, ...]
    amplitudes: tuple[float, ...]  # mean pairing at t over mean pairing at 0


def fit_decay_rate(pairings_0, pairings_t, t_list) -> DecayFit:
    """Exponential decay rate of a mean pairing from per-replica samples.

    ``pairings_0`` has shape (R,), ``pairings_t`` shape (R, T).  The amplitude
    at t is the ratio of replica sums, and the rate is a weighted least-squares
    fit of -log(amplitude) = rate * t through the origin.  Weights and the
    reported standard error come from the jackknife over replicas.
    """
    p0 = np.asarray(pairings_0, dtype=float)
    pt = np.asarray(pairings_t, dtype=float)
    t = np.asarray(t_list, dtype=float)
    R = p0.size
    if pt.shape != (R, t.size):
        raise ValueError("pairings_t must have shape (R, len(t_list))")

    def logs(s0, st):
        with np.errstate(divide="ignore", invalid="ignore"):
            return -np.log(st / s0)

    S0, St = p0.sum(), pt.sum(axis=0)
    y = logs(S0, St)
    loo = np.array([logs(S0 - p0[r], St - pt[r]) for r in range(R)])
    var = (R - 1) / R * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0)
    w = 1.0 / np.maximum(var, 1e-300)

    def rate_of(yy):
        return float(np.sum(w * t * yy) / np.sum(w * t * t))

    rate = rate_of(y)
    rloo = np.array([rate_of(row) for row in loo])
    se = math.sqrt((R - 1) / R * float(np.sum((rloo - rloo.mean()) ** 2)))
    return DecayFit(rate, se, tuple(float(v) for v in t), tuple(float(v) for v in St / S0))


def mode_decay(spec: ModelSpec, profile: Profile | str, t_list, R: int, N: int, seed: int,
               G: str = "sin1", threads: int | None = None) -> DecayFit:
    """Fitted decay rate of <pi_t, G>; compare with D (2 pi m)^2."""
    prof = parse_profile(profile) if isinstance(profile, str) else profile
    times = (0.0,) + tuple(float(t) for t in t_list)
    snaps = simulate_snapshots(spec, prof, N, times, R, seed, threads).astype(float)
    g = get_test_function(G).grid(N) / N
    pairs = snaps @ g  # (R, T+1)
    return fit_decay_rate(pairs[:, 0], pairs[:, 1:], t_list)
