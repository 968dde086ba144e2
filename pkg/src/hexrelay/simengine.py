"""Time-slotted relay network simulation and the strategy comparison sweep.

A trial is a :class:`Scenario` (grid, user placement and session schedule,
all drawn from the trial seed) replayed under one :class:`Strategy`.  All
strategies of the same seed see exactly the same users and sessions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .hexgeom import NORMALS, SQRT3, HexGrid, Point, build_grid, candidate_relays_batch
from .netmodel import (
    DEAD_TOL,
    DEFAULT_CAPACITY,
    DEFAULT_ENERGY,
    P_IDLE,
    P_SESSION,
    MobileUser,
    RelayStation,
    Session,
    Strategy,
)
from .predictor import DEFAULT_EPS, PredictorState

__all__ = [
    "SimConfig",
    "MetricsRecord",
    "Workload",
    "Scenario",
    "World",
    "SweepRow",
    "SWEEP_MUS",
    "place_users",
    "build_workload",
    "assemble_scenario",
    "make_scenario",
    "make_world",
    "run_slot",
    "run_trial",
    "run_scenario",
    "run_experiment",
]

SWEEP_MUS = tuple(range(200, 801, 50))
CENTRAL_CELL = 0


@dataclass(frozen=True)
class SimConfig:
    n_cells: int = 20
    n_mus: int = 400
    hot_cell_weight: float = 5.0
    session_start_prob: float = 0.05
    mean_session_len: float = 20.0
    rate: float = 1.0
    horizon: int = 2000
    strategy: Strategy = Strategy.EB_BY_MU
    seed: int = 42
    eps: float = DEFAULT_EPS
    p_idle: float = P_IDLE
    p_session: float = P_SESSION
    initial_energy: float = DEFAULT_ENERGY
    capacity: int = DEFAULT_CAPACITY
    radius: float = 1.0
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        checks = [
            (self.n_cells >= 1, "n_cells must be >= 1"),
            (self.n_mus >= 0, "n_mus must be >= 0"),
            (self.hot_cell_weight >= 1, "hot_cell_weight must be >= 1"),
            (0 <= self.session_start_prob <= 1, "session_start_prob must be in [0, 1]"),
            (self.mean_session_len >= 1, "mean_session_len must be >= 1"),
            (self.rate > 0, "rate must be positive"),
            (self.horizon >= 0, "horizon must be >= 0"),
            (0 <= self.seed < 2**64, "seed must fit in 64 bits"),
            (self.eps > 0, "eps must be positive"),
            (self.p_idle >= 0, "p_idle must be >= 0"),
            (self.p_session >= 0, "p_session must be >= 0"),
            (self.initial_energy > 0, "initial_energy must be positive"),
            (self.capacity >= 1, "capacity must be >= 1"),
            (self.radius > 0, "radius must be positive"),
            (self.dt > 0, "dt must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)
        for name in ("n_cells", "n_mus", "horizon", "seed", "capacity"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ValueError(f"{name} must be an integer")


@dataclass(frozen=True)
class MetricsRecord:
    aggregate_throughput: float
    relay_lifetimes: tuple[int, ...]
    avg_lifetime: float
    blocked_sessions: int
    delivered: float = 0.0


@dataclass(frozen=True)
class Workload:
    """Session schedule sorted by (start slot, initiating user)."""

    start: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    length: np.ndarray

    def __len__(self):
        return len(self.start)


@dataclass(frozen=True)
class Scenario:
    grid: HexGrid
    positions: np.ndarray   # (n_mus, 2)
    cells: np.ndarray       # (n_mus,)
    workload: Workload
    same_cell: np.ndarray   # (n_sessions,) bool
    candidates: np.ndarray  # (n_sessions, 3); zeros for same-cell sessions

    def users(self) -> list[MobileUser]:
        return [MobileUser(i, Point(*p), int(c))
                for i, (p, c) in enumerate(zip(self.positions, self.cells))]


def _seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    # independent PCG64 streams for placement and for the session schedule
    placement, sessions = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(placement), np.random.default_rng(sessions)


def _place_arrays(grid: HexGrid, n_mus: int, hot_cell_weight: float,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if n_mus < 0:
        raise ValueError("n_mus must be >= 0")
    weights = np.ones(grid.n_cells)
    weights[CENTRAL_CELL] = hot_cell_weight
    cells = rng.choice(grid.n_cells, size=n_mus, p=weights / weights.sum()).astype(np.int64)

    half_w, half_h = grid.radius * SQRT3 / 2.0, grid.radius
    # strictly inside, so every user has a well-defined exit edge
    limit = half_w - grid.tol
    pos = np.empty((n_mus, 2))
    todo = np.arange(n_mus)
    while len(todo):
        u = rng.random((len(todo), 2))
        rel = (u * 2.0 - 1.0) * np.array([half_w, half_h])
        ok = (rel @ NORMALS.T).max(axis=1) < limit
        pos[todo[ok]] = grid.centers[cells[todo[ok]]] + rel[ok]
        todo = todo[~ok]
    return pos, cells


def place_users(grid: HexGrid, n_mus: int, hot_cell_weight: float,
                rng: np.random.Generator) -> list[MobileUser]:
    """Scatter users over the grid, favouring the central cell.

    Each user picks a cell with weight ``hot_cell_weight`` for cell 0 and 1
    for every other cell, then a uniform position inside that hexagon.
    """
    pos, cells = _place_arrays(grid, n_mus, hot_cell_weight, rng)
    return [MobileUser(i, Point(*pos[i]), int(cells[i])) for i in range(n_mus)]


def build_workload(n_mus: int, horizon: int, start_prob: float, mean_len: float,
                   rng: np.random.Generator) -> Workload:
    """Draw every session of a trial up front.

    An idle user starts a call in each slot with probability ``start_prob``;
    calls last a geometric number of slots with mean ``mean_len`` and go to
    a uniformly chosen other user.  A user places one call at a time.
    Drawing the schedule before the run keeps it identical across strategies.
    """
    empty = np.empty(0, dtype=np.int64)
    if n_mus < 2 or horizon <= 0 or start_prob <= 0:
        return Workload(empty, empty, empty, empty)

    starts, srcs, lengths = [], [], []
    t = np.zeros(n_mus, dtype=np.int64)
    users = np.arange(n_mus)
    while len(users):
        t = t + rng.geometric(start_prob, size=len(users)) - 1
        live = t < horizon
        users, t = users[live], t[live]
        length = rng.geometric(1.0 / mean_len, size=len(users))
        starts.append(t)
        srcs.append(users)
        lengths.append(length)
        t = t + length

    start = np.concatenate(starts)
    src = np.concatenate(srcs)
    length = np.concatenate(lengths).astype(np.int64)
    order = np.lexsort((src, start))
    start, src, length = start[order], src[order], length[order]
    dst = rng.integers(0, n_mus - 1, size=len(src))
    dst = dst + (dst >= src)
    return Workload(start.astype(np.int64), src.astype(np.int64), dst.astype(np.int64), length)


def assemble_scenario(grid: HexGrid, positions: np.ndarray, cells: np.ndarray,
                      workload: Workload) -> Scenario:
    """Attach per-session geometry (same-cell flag, candidate relays) to a schedule."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    cells = np.asarray(cells, dtype=np.int64)
    same = cells[workload.src] == cells[workload.dst]
    cand = np.zeros((len(workload), 3), dtype=np.int64)
    cross = np.flatnonzero(~same)
    src, dst = workload.src[cross], workload.dst[cross]
    cand[cross] = candidate_relays_batch(grid, positions[src], cells[src], positions[dst])
    return Scenario(grid, positions, cells, workload, same, cand)


def make_scenario(config: SimConfig) -> Scenario:
    grid = build_grid(config.n_cells, config.radius)
    place_rng, session_rng = _seed_streams(config.seed)
    pos, cells = _place_arrays(grid, config.n_mus, config.hot_cell_weight, place_rng)
    wl = build_workload(config.n_mus, config.horizon, config.session_start_prob,
                        config.mean_session_len, session_rng)
    return assemble_scenario(grid, pos, cells, wl)


@dataclass
class World:
    """Mutable state of one trial: relay arrays, session arrays, counters."""

    config: SimConfig
    scenario: Scenario
    energy: np.ndarray
    a_hat: np.ndarray
    var: np.ndarray
    last_energy: np.ndarray
    death: np.ndarray        # slot count at death, -1 while alive
    load: np.ndarray         # active sessions per relay
    drained: np.ndarray      # cumulative energy spent per relay
    s_start: np.ndarray
    s_end: np.ndarray
    s_relay: np.ndarray
    s_blocked: np.ndarray
    active: np.ndarray
    counters: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))
    slot: int = 0
    backend: str | None = None

    @property
    def grid(self) -> HexGrid:
        return self.scenario.grid

    @property
    def delivered(self) -> float:
        return float(self.counters[_kernels.DELIVERED]) * self.config.rate

    def active_sessions(self) -> np.ndarray:
        return self.active[:self.counters[_kernels.N_ACTIVE]]

    def relays(self) -> list[RelayStation]:
        cfg = self.config
        out = []
        for r in range(len(self.energy)):
            out.append(RelayStation(
                id=r,
                edge_id=r,
                energy=float(self.energy[r]),
                initial_energy=cfg.initial_energy,
                predictor=PredictorState(a_hat=float(self.a_hat[r]), v=float(self.var[r]),
                                         eps=cfg.eps, last_energy=float(self.last_energy[r])),
                active_sessions=int(self.load[r]),
                capacity=cfg.capacity,
                death_slot=None if self.death[r] < 0 else int(self.death[r]),
            ))
        return out

    def sessions(self) -> list[Session]:
        wl = self.scenario.workload
        out = []
        for i in self.active_sessions():
            code = int(self.s_relay[i])
            out.append(Session(
                id=int(i),
                src_mu=int(wl.src[i]),
                dst_mu=int(wl.dst[i]),
                rate=self.config.rate,
                remaining_slots=int(self.s_end[i] - self.slot),
                relay_id=code if code >= 0 else None,
                blocked=code == _kernels.PENDING,
            ))
        return out

    def advance(self, n_slots: int) -> "World":
        cfg = self.config
        t1 = min(self.slot + n_slots, cfg.horizon)
        if t1 <= self.slot:
            return self
        _kernels.run_slots(
            self.slot, t1, int(cfg.strategy), float(cfg.dt), float(cfg.p_idle),
            float(cfg.p_session), int(cfg.capacity), float(cfg.eps),
            float(DEAD_TOL * cfg.initial_energy),
            self.energy, self.a_hat, self.var, self.last_energy, self.death, self.load,
            self.drained, self.s_start, self.s_end, self.scenario.candidates,
            self.s_relay, self.s_blocked, self.active, self.counters,
            backend=self.backend,
        )
        self.slot = t1
        return self

    def metrics(self) -> MetricsRecord:
        horizon = self.config.horizon
        lifetimes = np.where(self.death >= 0, self.death, horizon)
        delivered = self.delivered
        return MetricsRecord(
            aggregate_throughput=delivered / horizon if horizon > 0 else 0.0,
            relay_lifetimes=tuple(int(x) for x in lifetimes),
            avg_lifetime=float(lifetimes.mean()),
            blocked_sessions=int(self.s_blocked.sum()),
            delivered=delivered,
        )


def make_world(config: SimConfig, scenario: Scenario | None = None,
               backend: str | None = None) -> World:
    if scenario is None:
        scenario = make_scenario(config)
    n_relay = scenario.grid.n_relays
    wl = scenario.workload
    s_relay = np.where(scenario.same_cell, _kernels.DIRECT, _kernels.PENDING).astype(np.int64)
    return World(
        config=config,
        scenario=scenario,
        energy=np.full(n_relay, float(config.initial_energy)),
        a_hat=np.zeros(n_relay),
        var=np.zeros(n_relay),
        # primed with the initial charge, so the first slot's drain is a measurement
        last_energy=np.full(n_relay, float(config.initial_energy)),
        death=np.full(n_relay, -1, dtype=np.int64),
        load=np.zeros(n_relay, dtype=np.int64),
        drained=np.zeros(n_relay),
        s_start=wl.start,
        s_end=wl.start + wl.length,
        s_relay=s_relay,
        s_blocked=np.zeros(len(wl), dtype=np.int64),
        active=np.zeros(max(len(wl), 1), dtype=np.int64),
        backend=backend,
    )


def run_slot(world: World) -> World:
    """Advance ``world`` by one slot in place and return it.

    Slot order: admit new sessions, select relays for waiting sessions,
    deliver, drain relays, step predictors, expire finished sessions,
    re-select for sessions whose relay just died.
    """
    return world.advance(1)


def run_scenario(config: SimConfig, scenario: Scenario, backend: str | None = None) -> MetricsRecord:
    world = make_world(config, scenario, backend)
    world.advance(config.horizon)
    return world.metrics()


def run_trial(config: SimConfig, backend: str | None = None) -> MetricsRecord:
    """Run one seeded trial; identical ``config`` gives an identical record."""
    return run_scenario(config, make_scenario(config), backend)


@dataclass(frozen=True)
class SweepRow:
    n_mus: int
    strategy: Strategy
    throughput_mean: float
    throughput_std: float
    lifetime_mean: float
    lifetime_std: float
    blocked_mean: float
    trials: int


def _std(xs: Sequence[float]) -> float:
    return float(np.std(xs, ddof=1)) if len(xs) > 1 else 0.0


def run_experiment(base_config: SimConfig, mu_counts: Iterable[int] = SWEEP_MUS,
                   strategies: Iterable[Strategy] = tuple(Strategy), trials: int = 10,
                   backend: str | None = None) -> list[SweepRow]:
    """Average every strategy over ``trials`` seeds at each user count.

    Trial ``k`` uses seed ``base_config.seed + k``; the three strategies of a
    trial share one scenario.  Rows come back sorted by (n_mus, strategy label).
    """
    strategies = tuple(Strategy(s) for s in strategies)
    rows = []
    for n_mus in mu_counts:
        per = {s: [] for s in strategies}
        for k in range(trials):
            cfg = replace(base_config, n_mus=int(n_mus), seed=base_config.seed + k)
            scen = make_scenario(cfg)
            for s in strategies:
                per[s].append(run_scenario(replace(cfg, strategy=s), scen, backend))
        for s in strategies:
            recs = per[s]
            tp = [r.aggregate_throughput for r in recs]
            lt = [r.avg_lifetime for r in recs]
            rows.append(SweepRow(
                n_mus=int(n_mus),
                strategy=s,
                throughput_mean=float(np.mean(tp)) if recs else math.nan,
                throughput_std=_std(tp),
                lifetime_mean=float(np.mean(lt)) if recs else math.nan,
                lifetime_std=_std(lt),
                blocked_mean=float(np.mean([r.blocked_sessions for r in recs])) if recs else math.nan,
                trials=len(recs),
            ))
    rows.sort(key=lambda r: (r.n_mus, r.strategy.label))
    return rows


def config_fields() -> list[str]:
    return [f.name for f in fields(SimConfig)]
