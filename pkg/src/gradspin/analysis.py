"""Attractiveness checks and martingale diagnostics.

The particle models are checked through the tail-sum conditions on their
multi-particle jump rates; gKMP is checked pathwise with the basic coupling.
The martingale part measures the Dynkin martingale of a test function and its
carre du champ along simulated paths.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .engine import make_state, parallel_map, run_diffusive, ObservationPlan
from .measures import (
    InitialMeasureSpec,
    InvariantSpec,
    raw_second_moment,
    sample_dominated_pair,
    sample_invariant,
    sample_profile_measure,
)
from .models import ModelKind, ModelSpec, carre_du_champ_bond, harm_rates
from .numerics import RngStream, as_generator
from .testfunctions import TestFunction, get_test_function

CRITERION_TOL = 1e-12
MAX_RECORDED = 10_000


# ---------------------------------------------------------------------------
# rate criterion


@dataclass(frozen=True)
class OrderedLocalPair:
    """Bond occupations of two ordered configurations xi <= zeta.

    alpha = xi_x, beta = xi_{x+1}, gamma = zeta_x, delta = zeta_{x+1}.
    """

    alpha: int
    beta: int
    gamma: int
    delta: int

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma, self.delta) < 0:
            raise ValueError("occupations must be non-negative")
        if self.alpha > self.gamma or self.beta > self.delta:
            raise ValueError("pair is not ordered: need alpha <= gamma and beta <= delta")


def _require_particle(spec: ModelSpec) -> None:
    if not spec.is_particle:
        raise ValueError(f"{spec.kind.value} has no jump rates; use basic_coupling_gkmp")


def tail_rate_sum(spec: ModelSpec, n_from: int, n_partner: int, threshold: int) -> float:
    """Sum of c^{k'} over k' > threshold for a jump from a site holding ``n_from``.

    dKMP moves k' = 1..n_from particles at rate 1/(n_from + n_partner + 1)
    each; Harm uses its Gamma-ratio rates and ignores ``n_partner``.
    """
    _require_particle(spec)
    if threshold < -1:
        raise ValueError("threshold must be >= -1")
    first = max(threshold + 1, 1)
    if first > n_from:
        return 0.0
    if spec.kind is ModelKind.DKMP:
        return (n_from - first + 1) / (n_from + n_partner + 1)
    return float(harm_rates(n_from, spec.spin)[first - 1 :].sum())


@dataclass(frozen=True)
class CriterionCheck:
    passed: bool
    lhs: float
    rhs: float
    margin: float  # >= 0 when the inequality holds


def check_att1(spec: ModelSpec, pair: OrderedLocalPair, ell: int) -> CriterionCheck:
    """Tail of xi beyond delta - beta + ell must not exceed the tail of zeta beyond ell."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    lhs = tail_rate_sum(spec, pair.alpha, pair.beta, pair.delta - pair.beta + ell)
    rhs = tail_rate_sum(spec, pair.gamma, pair.delta, ell)
    return CriterionCheck(lhs - rhs <= CRITERION_TOL, lhs, rhs, rhs - lhs)


def check_att2(spec: ModelSpec, pair: OrderedLocalPair, k: int) -> CriterionCheck:
    """Tail of xi beyond k must dominate the tail of zeta beyond gamma - alpha + k."""
    if k < 0:
        raise ValueError("k must be >= 0")
    lhs = tail_rate_sum(spec, pair.alpha, pair.beta, k)
    rhs = tail_rate_sum(spec, pair.gamma, pair.delta, pair.gamma - pair.alpha + k)
    return CriterionCheck(rhs - lhs <= CRITERION_TOL, lhs, rhs, lhs - rhs)


@dataclass
class CriterionReport:
    model: str
    spin: float
    n_max: int
    l_max: int
    checked: int = 0
    n_violations: int = 0
    worst_margin: float = math.inf
    report_only: bool = False
    violations: list[tuple] = field(default_factory=list)  # first MAX_RECORDED only

    @property
    def passed(self) -> bool:
        return self.n_violations == 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        out["violations"] = [list(v) for v in self.violations]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def violations_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["criterion", "alpha", "beta", "gamma", "delta", "index", "lhs", "rhs"])
        for v in self.violations:
            w.writerow([v[0], *v[1:6], repr(float(v[6])), repr(float(v[7]))])
        return buf.getvalue()


def _tail_table(spec: ModelSpec, n_max: int, t_max: int) -> np.ndarray:
    """tab[n, j] = sum of c^{k'}(n) over k' >= j, for j = 0..t_max+1 (Harm)."""
    tab = np.zeros((n_max + 1, t_max + 2))
    for n in range(1, n_max + 1):
        rates = harm_rates(n, spec.spin)
        tails = np.cumsum(rates[::-1])[::-1]  # tails[j-1] = sum_{k' >= j}
        width = min(n, t_max + 1)
        tab[n, 1 : width + 1] = tails[:width]
        tab[n, 0] = tails[0]
    return tab


def scan_criterion(spec: ModelSpec, n_max: int, l_max: int) -> CriterionReport:
    """Exhaustive att1/att2 scan over ordered tuples with entries <= n_max.

    ``l_max`` bounds both ell (att1) and k (att2).  For Harm with 2s < 1 the
    report is marked report-only: the outcome is recorded but carries no
    verdict.
    """
    _require_particle(spec)
    if n_max < 1 or l_max < 1:
        raise ValueError("bounds must be >= 1")
    report = CriterionReport(spec.kind.value, spec.spin, n_max, l_max)
    report.report_only = spec.kind is ModelKind.HARM and spec.two_s < 1.0
    idx = np.arange(l_max + 1)
    lo, hi = np.triu_indices(n_max + 1)  # lo <= hi
    beta, delta = lo[:, None], hi[:, None]
    t_max = 2 * n_max + l_max + 1

    if spec.kind is ModelKind.DKMP:

        def tail(n, partner, t):
            first = np.maximum(t + 1, 1)
            return np.maximum(n - first + 1, 0) / (n + partner + 1.0)

    else:
        tab = _tail_table(spec, n_max, t_max)

        def tail(n, partner, t):
            j = np.minimum(np.maximum(t + 1, 1), t_max + 1)
            return tab[n, j]

    for alpha in range(n_max + 1):
        for gamma in range(alpha, n_max + 1):
            for name, lhs, rhs, margin in _criterion_blocks(tail, alpha, gamma, beta, delta, idx):
                report.checked += margin.size
                report.worst_margin = min(report.worst_margin, float(margin.min()))
                bad = margin < -CRITERION_TOL
                nbad = int(bad.sum())
                if not nbad:
                    continue
                report.n_violations += nbad
                room = MAX_RECORDED - len(report.violations)
                for r, c in zip(*np.nonzero(bad)):
                    if room <= 0:
                        break
                    report.violations.append(
                        (name, alpha, int(lo[r]), gamma, int(hi[r]), int(idx[c]), float(lhs[r, c]), float(rhs[r, c]))
                    )
                    room -= 1
    return report


def _criterion_blocks(tail, alpha, gamma, beta, delta, idx):
    zero = np.zeros_like(beta)
    a = zero + alpha
    g = zero + gamma
    lhs1 = tail(a, beta, delta - beta + idx)
    rhs1 = tail(g, delta, zero + idx)
    yield "att1", lhs1, rhs1, rhs1 - lhs1
    lhs2 = tail(a, beta, zero + idx)
    rhs2 = tail(g, delta, gamma - alpha + idx + zero)
    yield "att2", lhs2, rhs2, lhs2 - rhs2


# ---------------------------------------------------------------------------
# gKMP basic coupling


class CouplingViolation(AssertionError):
    """The coupled gKMP copies left the sitewise order."""


@dataclass
class CouplingResult:
    eta: np.ndarray
    xi: np.ndarray
    events: int
    exact_violations: int  # eta > xi by any amount (rounding-level)
    violations: int  # eta > xi by more than the rounding allowance


def basic_coupling_gkmp(eta0, xi0, spec: ModelSpec, micro_T: float, rng, tol_ulps: float = 1.0,
                        strict: bool = True) -> CouplingResult:
    """Drive two gKMP copies with shared clocks and shared Beta fractions.

    Order is checked at the two updated sites after every event.  Violations
    within ``tol_ulps`` units in the last place are tallied separately, since
    ``S - u S`` involves one rounding; a larger violation raises
    :class:`CouplingViolation` when ``strict``.
    """
    if spec.kind is not ModelKind.GKMP:
        raise ValueError("basic coupling is implemented for gKMP only")
    eta = np.array(eta0, dtype=np.float64)
    xi = np.array(xi0, dtype=np.float64)
    if eta.shape != xi.shape or eta.ndim != 1:
        raise ValueError("configurations must be 1-D arrays of equal length")
    if np.any(eta > xi):
        raise ValueError("initial configurations are not ordered (need eta0 <= xi0)")
    gen = as_generator(rng)
    N = eta.size
    clock = np.array([0.0, -math.log1p(-gen.random()) / N])
    viol = np.zeros(2, dtype=np.int64)
    events = K.coupled_gkmp(eta, xi, clock, float(micro_T), gen, spec.two_s, float(tol_ulps), viol)
    result = CouplingResult(eta, xi, int(events), int(viol[0]), int(viol[1]))
    if strict and result.violations:
        raise CouplingViolation(f"{result.violations} order violations beyond {tol_ulps} ulp")
    return result


# ---------------------------------------------------------------------------
# monotone comparison with the dominating invariant measure


@dataclass(frozen=True)
class DominationEstimate:
    observable: str
    lhs_mean: float
    lhs_se: float
    rhs: float

    @property
    def ordered(self) -> bool:
        """LHS <= RHS within four standard errors."""
        return self.lhs_mean <= self.rhs + 4.0 * self.lhs_se

    @property
    def strict(self) -> bool:
        """LHS below RHS by more than four standard errors."""
        return self.lhs_mean < self.rhs - 4.0 * self.lhs_se


def monotone_domination_mc(spec: ModelSpec, imspec: InitialMeasureSpec, macro_t: float, R: int, N: int = 64,
                           seed: int = 0, threads: int | None = None) -> list[DominationEstimate]:
    """Compare E[f(eta(N^2 t))] from the profile measure with E_{nu_rho_hat}[f].

    Monotone observables f = sum eta_x and sum eta_x**2.  Each replica draws
    the dominated pair (so the domination is checked), then evolves the lower
    copy; the upper side is stationary, so its expectation is closed-form.
    """
    if imspec.model != spec:
        raise ValueError("measure spec and model differ")
    if R < 2:
        raise ValueError("need at least two replicas")

    def one(r: int) -> tuple[float, float]:
        rng = RngStream(seed, r)
        eta, _ = sample_dominated_pair(imspec, N, rng)
        state = make_state(spec, eta, rng)
        rec = run_diffusive(state, spec, ObservationPlan((macro_t,), snapshots=True))
        x = rec.snapshots[-1].astype(float)
        return float(x.sum()), float((x * x).sum())

    vals = np.array(parallel_map(one, range(R), threads))
    ref = InvariantSpec(spec, imspec.rho_hat)
    rhs = (N * ref.mean, N * raw_second_moment(ref))
    out = []
    for j, name in enumerate(("sum", "sum_sq")):
        col = vals[:, j]
        out.append(DominationEstimate(name, float(col.mean()), float(col.std(ddof=1) / math.sqrt(R)), float(rhs[j])))
    return out


# ---------------------------------------------------------------------------
# martingale diagnostics


def carre_du_champ(spec: ModelSpec, config, G_grid, N: int | None = None) -> float:
    """(1/N^2) sum_x (grad^+_N G(x/N))^2 [D (eta_x - eta_{x+1})^2 - L_{x,x+1}(eta_x eta_{x+1})]."""
    eta = np.asarray(config, dtype=float)
    g = np.asarray(G_grid, dtype=float)
    N = eta.size if N is None else N
    if eta.size != N or g.size != N:
        raise ValueError("configuration and grid must have N entries")
    grad = N * (np.roll(g, -1) - g)
    phi = carre_du_champ_bond(spec, eta, np.roll(eta, -1))
    return float(np.sum(grad * grad * phi) / (N * N))


@dataclass
class MartingaleRecord:
    test_function: str
    martingale: np.ndarray  # M_t per replica
    quadratic_variation: np.ndarray  # int_0^t Upsilon ds per replica

    def __post_init__(self):
        self.martingale = np.asarray(self.martingale, dtype=float)
        self.quadratic_variation = np.asarray(self.quadratic_variation, dtype=float)
        if not (np.all(np.isfinite(self.martingale)) and np.all(np.isfinite(self.quadratic_variation))):
            raise ValueError("martingale record has non-finite entries")

    def summary(self) -> dict:
        m = self.martingale
        q = self.quadratic_variation
        R = m.size
        mean = float(m.mean())
        se = float(m.std(ddof=1) / math.sqrt(R)) if R > 1 else math.nan
        # E[M^2] estimates the same quantity as E[int Upsilon]
        second = float(np.mean(m * m))
        qmean = float(q.mean())
        return {
            "test_function": self.test_function,
            "replicas": R,
            "mean": mean,
            "se": se,
            "z": mean / se if se > 0 else 0.0,
            "variance": float(m.var(ddof=1)) if R > 1 else math.nan,
            "second_moment": second,
            "mean_qv": qmean,
            "ratio": float(m.var(ddof=1)) / qmean if qmean > 0 and R > 1 else math.nan,
            "max_abs": float(np.max(np.abs(m))),
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _initial(spec: ModelSpec, imspec, N: int, rng) -> np.ndarray:
    if isinstance(imspec, InvariantSpec):
        return sample_invariant(imspec, N, rng)
    return sample_profile_measure(imspec, N, rng)


def dynkin_diagnostics(spec: ModelSpec, imspec: InitialMeasureSpec | InvariantSpec, G: str | TestFunction,
                       macro_t: float, R: int, N: int = 64, seed: int = 0,
                       threads: int | None = None) -> MartingaleRecord:
    """Sample M_t(G) and int_0^t Upsilon ds over R independent replicas.

    The drift integral is accumulated exactly between events (the path is
    piecewise constant), so E[M_t] = 0 and E[M_t^2] = E[int Upsilon] hold
    without discretization error.
    """
    if imspec.model != spec:
        raise ValueError("measure spec and model differ")
    g = get_test_function(G) if isinstance(G, str) else G

    def one(r: int) -> tuple[float, float]:
        rng = RngStream(seed, r)
        eta0 = _initial(spec, imspec, N, rng)
        state = make_state(spec, eta0, rng, trackers=[g])
        plan = ObservationPlan((macro_t,), snapshots=False, martingales=(g.id,))
        rec = run_diffusive(state, spec, plan)
        return float(rec.martingale[g.id][-1]), float(rec.quadratic_variation[g.id][-1])

    vals = np.array(parallel_map(one, range(R), threads)).reshape(R, 2)
    return MartingaleRecord(g.id, vals[:, 0], vals[:, 1])
