"""Exact continuous-time simulation on the torus with diffusive observation.

gKMP and dKMP ring one rate-1 clock per bond, so the total rate is N and the
bond is uniform.  Harm keeps a Fenwick tree over the 2N directional site rates
and picks the number of jumping particles from a cached cumulative table.

Observables are read from the cadlag path: the value reported at macroscopic
time t is the state after the last event with micro time <= N**2 t.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .fenwick import RateIndex, fen_build
from .lattice import energy_config, particle_config
from .measures import InitialMeasureSpec, InvariantSpec, parse_profile, sample_invariant, sample_profile_measure
from .models import BondEvent, HarmRateCache, ModelKind, ModelSpec, carre_du_champ_bond, diffusion_coefficient
from .numerics import RngStream
from .testfunctions import TestFunction, get_test_function

logger = logging.getLogger(__name__)

_NO_LIMIT = np.iinfo(np.int64).max
_CODES = {ModelKind.GKMP: K.GKMP, ModelKind.DKMP: K.DKMP, ModelKind.HARM: K.HARM}
_caches: dict[float, HarmRateCache] = {}


class FrozenStateError(RuntimeError):
    """No event can occur: every rate vanishes (empty Harm configuration)."""


def harm_cache(s: float) -> HarmRateCache:
    """Process-wide Harm rate table for spin ``s`` (growth is serialized)."""
    cache = _caches.get(s)
    if cache is None:
        cache = _caches.setdefault(s, HarmRateCache(s))
    return cache


@dataclass
class Trackers:
    """Dynkin martingale bookkeeping for a set of test functions."""

    functions: list[TestFunction]
    lap: np.ndarray
    grad2: np.ndarray
    current: np.ndarray
    integral: np.ndarray

    @classmethod
    def empty(cls, N: int) -> "Trackers":
        return cls([], np.zeros((0, N)), np.zeros((0, N)), np.zeros((0, 2)), np.zeros((0, 2)))

    @classmethod
    def for_functions(cls, functions: list[TestFunction], N: int) -> "Trackers":
        m = len(functions)
        lap = np.array([g.discrete_laplacian(N) for g in functions]).reshape(m, N)
        grad2 = np.array([g.discrete_gradient(N) ** 2 for g in functions]).reshape(m, N)
        return cls(list(functions), lap, grad2, np.zeros((m, 2)), np.zeros((m, 2)))

    def refresh(self, spec: ModelSpec, eta: np.ndarray) -> None:
        """Recompute the running drift and carre du champ from scratch."""
        if not self.functions:
            return
        N = eta.size
        x = eta.astype(float)
        phi = carre_du_champ_bond(spec, x, np.roll(x, -1))
        self.current[:, 0] = self.lap @ x / N
        self.current[:, 1] = self.grad2 @ phi / (N * N)


@dataclass
class SimState:
    spec: ModelSpec
    config: np.ndarray
    rng: RngStream
    micro_time: float = 0.0
    next_event_time: float = math.inf
    event_count: int = 0
    trackers: Trackers | None = None
    rate_index: RateIndex | None = None
    cache: HarmRateCache | None = None
    _last: np.ndarray = field(default_factory=lambda: np.zeros(3), repr=False)
    _rebuild_counter: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64), repr=False)

    @property
    def N(self) -> int:
        return self.config.size

    @property
    def macro_time(self) -> float:
        return self.micro_time / self.N**2

    def total_rate(self) -> float:
        if self.spec.kind is ModelKind.HARM:
            return self.rate_index.total
        return float(self.N)

    def recomputed_rates(self) -> np.ndarray:
        """Directional Harm rates rebuilt from the configuration."""
        totals = self.cache.totals
        return np.repeat(totals[self.config], 2)


def make_state(spec: ModelSpec, config, rng: RngStream, trackers: list[str] | list[TestFunction] | None = None,
               micro_time: float = 0.0) -> SimState:
    """Wrap a configuration into a simulation state and draw the first clock."""
    eta = particle_config(config) if spec.is_particle else energy_config(config)
    state = SimState(spec=spec, config=eta, rng=rng, micro_time=float(micro_time))
    if spec.kind is ModelKind.HARM:
        state.cache = harm_cache(spec.spin)
        _ensure_capacity(state)
        state.rate_index = RateIndex(state.recomputed_rates())
    funcs = [get_test_function(g) if isinstance(g, str) else g for g in (trackers or [])]
    state.trackers = Trackers.for_functions(funcs, eta.size) if funcs else Trackers.empty(eta.size)
    state.trackers.refresh(spec, eta)
    state.next_event_time = _draw_holding(state)
    return state


def _draw_holding(state: SimState) -> float:
    rate = state.total_rate()
    if rate <= 0:
        return math.inf
    return state.micro_time - math.log1p(-state.rng.generator.random()) / rate


def _harm_cap(state: SimState) -> int:
    mass = int(state.config.sum())
    return np.iinfo(np.int64).max // 4 if state.cache.capacity >= mass else state.cache.capacity


def _ensure_capacity(state: SimState) -> None:
    mass = int(state.config.sum())
    need = min(2 * int(state.config.max(initial=0)), mass)
    state.cache.ensure(max(need, 1))


def _advance(state: SimState, t_end: float, max_events: int) -> int:
    """Run events with time <= t_end (at most ``max_events``); return the count."""
    spec, eta, tr = state.spec, state.config, state.trackers
    clock = np.array([state.micro_time, state.next_event_time])
    gen = state.rng.generator
    done = 0
    if spec.kind is ModelKind.GKMP:
        done = K.advance_gkmp(eta, clock, t_end, gen, spec.two_s, max_events,
                              tr.lap, tr.grad2, tr.current, tr.integral, state._last)
    elif spec.kind is ModelKind.DKMP:
        done = K.advance_dkmp(eta, clock, t_end, gen, max_events,
                              tr.lap, tr.grad2, tr.current, tr.integral, state._last)
    else:
        ri = state.rate_index
        while True:
            cache = state.cache
            n, status = K.advance_harm(
                eta, clock, t_end, gen, spec.two_s, max_events - done,
                cache.cum, cache.offsets, cache.totals, _harm_cap(state),
                ri.values, ri.tree, state._rebuild_counter,
                tr.lap, tr.grad2, tr.current, tr.integral, state._last,
            )
            done += n
            if status == K.STATUS_GROW:
                _ensure_capacity(state)
                if done < max_events:
                    continue
            break
    state.micro_time = float(clock[0])
    state.next_event_time = float(clock[1])
    state.event_count += int(done)
    return int(done)


def step(state: SimState, spec: ModelSpec | None = None) -> BondEvent:
    """Perform exactly one event and report it."""
    if spec is not None and spec != state.spec:
        raise ValueError("spec does not match the state's model")
    if math.isinf(state.next_event_time):
        raise FrozenStateError("all rates vanish; no event can occur")
    _advance(state, math.inf, 1)
    site, direction, payload = state._last
    return BondEvent(site=int(site), direction=int(direction), payload=float(payload), time=state.micro_time)


def advance_to(state: SimState, micro_time: float) -> int:
    """Advance the path to ``micro_time`` (frozen states just move the clock)."""
    if micro_time < state.micro_time:
        raise ValueError("cannot advance backwards in time")
    return _advance(state, float(micro_time), _NO_LIMIT)


# ---------------------------------------------------------------------------
# observation


@dataclass(frozen=True)
class ObservationPlan:
    macro_times: tuple[float, ...]
    snapshots: bool = True
    pairings: tuple[str, ...] = ()
    martingales: tuple[str, ...] = ()

    def __post_init__(self):
        times = tuple(float(t) for t in self.macro_times)
        if any(not (t >= 0 and math.isfinite(t)) for t in times):
            raise ValueError("observation times must be finite and >= 0")
        if list(times) != sorted(times):
            raise ValueError("observation times must be non-decreasing")
        object.__setattr__(self, "macro_times", times)
        object.__setattr__(self, "pairings", tuple(self.pairings))
        object.__setattr__(self, "martingales", tuple(self.martingales))


@dataclass
class Recording:
    """Observables along one trajectory, one entry per scheduled macro time."""

    macro_times: np.ndarray
    mass: np.ndarray
    events: np.ndarray
    snapshots: np.ndarray | None = None
    pairings: dict[str, np.ndarray] = field(default_factory=dict)
    martingale: dict[str, np.ndarray] = field(default_factory=dict)
    quadratic_variation: dict[str, np.ndarray] = field(default_factory=dict)


def pairing(config, G: TestFunction) -> float:
    eta = np.asarray(config, dtype=float)
    return float(eta @ G.grid(eta.size) / eta.size)


def run_diffusive(state: SimState, spec: ModelSpec, plan: ObservationPlan) -> Recording:
    """Simulate to N**2 * max(plan times), recording at each scheduled time.

    Martingale test functions must have been attached to the state as
    trackers (see :func:`make_state`); M_t is measured from the state's time
    at the start of this call.
    """
    if spec != state.spec:
        raise ValueError("spec does not match the state's model")
    N = state.N
    T = len(plan.macro_times)
    if T and plan.macro_times[0] * N * N < state.micro_time:
        raise ValueError("observation times precede the current state time")
    tracked = [g.id for g in state.trackers.functions]
    missing = [g for g in plan.martingales if get_test_function(g).id not in tracked]
    if missing:
        raise ValueError(f"martingale functions {missing} are not tracked by this state")
    D = diffusion_coefficient(spec)
    pair_funcs = {g: get_test_function(g) for g in dict.fromkeys(plan.pairings + plan.martingales)}
    rec = Recording(
        macro_times=np.array(plan.macro_times),
        mass=np.zeros(T, dtype=state.config.dtype),
        events=np.zeros(T, dtype=np.int64),
        snapshots=np.zeros((T, N), dtype=state.config.dtype) if plan.snapshots else None,
        pairings={g: np.zeros(T) for g in pair_funcs},
        martingale={g: np.zeros(T) for g in plan.martingales},
        quadratic_variation={g: np.zeros(T) for g in plan.martingales},
    )
    start_pair = {g: pairing(state.config, f) for g, f in pair_funcs.items()}
    row = {g.id: j for j, g in enumerate(state.trackers.functions)}
    base_int = state.trackers.integral.copy()
    for i, t in enumerate(plan.macro_times):
        advance_to(state, t * N * N)
        state.trackers.refresh(spec, state.config)
        rec.mass[i] = state.config.sum()
        rec.events[i] = state.event_count
        if rec.snapshots is not None:
            rec.snapshots[i] = state.config
        for g, f in pair_funcs.items():
            rec.pairings[g][i] = pairing(state.config, f)
        for g in plan.martingales:
            j = row[get_test_function(g).id]
            drift, qv = state.trackers.integral[j] - base_int[j]
            rec.martingale[g][i] = rec.pairings[g][i] - start_pair[g] - D * drift
            rec.quadratic_variation[g][i] = qv
    return rec


# ---------------------------------------------------------------------------
# replicas


@dataclass
class ReplicaResult:
    replica: int
    recording: Recording | None
    initial: np.ndarray | None = None
    error: str | None = None


def initial_configuration(experiment, spec: ModelSpec, N: int, rng: RngStream) -> np.ndarray:
    if experiment.rho is not None:
        return sample_invariant(InvariantSpec(spec, experiment.rho), N, rng)
    profile = parse_profile(experiment.profile)
    rho_hat = experiment.rho_hat if experiment.rho_hat is not None else 1.0
    return sample_profile_measure(InitialMeasureSpec(spec, profile, rho_hat), N, rng)


def run_replica(experiment, replica: int, N: int | None = None) -> ReplicaResult:
    """One trajectory: initial draw and dynamics both use stream (seed, replica)."""
    spec = experiment.spec
    size = N if N is not None else experiment.N
    rng = RngStream(experiment.seed, replica)
    try:
        eta0 = initial_configuration(experiment, spec, size, rng)
        state = make_state(spec, eta0, rng, trackers=list(experiment.martingale))
        plan = ObservationPlan(
            tuple(experiment.times),
            snapshots=experiment.snapshots,
            pairings=tuple(experiment.test_functions),
            martingales=tuple(experiment.martingale),
        )
        return ReplicaResult(replica, run_diffusive(state, spec, plan), initial=eta0)
    except (OSError, ValueError, FrozenStateError) as exc:
        logger.warning("replica %d failed: %s", replica, exc)
        return ReplicaResult(replica, None, error=f"{type(exc).__name__}: {exc}")


def default_threads() -> int:
    env = os.environ.get("GRADSPIN_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_replicas(experiment, N: int | None = None, replicas=None, threads: int | None = None) -> list[ReplicaResult]:
    """Independent trajectories for each replica index, ordered by index.

    Kernels release the GIL, so a thread pool gives real parallelism; each
    replica owns its stream, so results do not depend on scheduling.
    """
    indices = list(range(experiment.replicas)) if replicas is None else list(replicas)
    if not indices:
        raise ValueError("need at least one replica")
    workers = threads or experiment.threads
    results = parallel_map(lambda r: run_replica(experiment, r, N), indices, workers)
    return sorted(results, key=lambda res: res.replica)


def parallel_map(fn, items, threads: int | None = None) -> list:
    """``[fn(i) for i in items]`` on a thread pool; order is preserved."""
    items = list(items)
    workers = threads or default_threads()
    if workers == 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def rebuild_rate_index(state: SimState) -> None:
    """Rebuild the Fenwick tree from its entries (drops accumulated rounding)."""
    if state.rate_index is not None:
        fen_build(state.rate_index.values, state.rate_index.tree)
        state._rebuild_counter[0] = 0
