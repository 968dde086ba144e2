"""Network entities and the detection / prediction / selection handover protocol."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

from .hexgeom import HexGrid, Point, SameCellError, candidate_relays
from .predictor import PredictorState, predict_energy

__all__ = [
    "BLOCKED",
    "SAME_CELL",
    "DEAD_TOL",
    "DEFAULT_ENERGY",
    "DEFAULT_CAPACITY",
    "Strategy",
    "RelayStation",
    "MobileUser",
    "Session",
    "make_relays",
    "detection",
    "prediction",
    "selection",
    "select_relay",
    "drain",
]

# sentinel outcomes of relay selection; relay ids are always >= 0
BLOCKED = -1
SAME_CELL = -2

# energy at or below this fraction of the initial charge counts as empty
DEAD_TOL = 1e-9

DEFAULT_ENERGY = 25000.0
DEFAULT_CAPACITY = 15
P_IDLE = 0.1
P_SESSION = 1.0


class Strategy(enum.IntEnum):
    NO_EB = 0
    EB_BY_BS = 1
    EB_BY_MU = 2

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Strategy":
        for s, name in _LABELS.items():
            if name == label:
                return s
        raise ValueError(f"unknown strategy {label!r}; expected one of {sorted(_LABELS.values())}")


_LABELS = {Strategy.NO_EB: "no-eb", Strategy.EB_BY_BS: "eb-bs", Strategy.EB_BY_MU: "eb-mu"}


@dataclass(frozen=True)
class RelayStation:
    id: int
    edge_id: int
    energy: float
    initial_energy: float
    predictor: PredictorState = field(default_factory=PredictorState)
    active_sessions: int = 0
    capacity: int = DEFAULT_CAPACITY
    death_slot: int | None = None

    def __post_init__(self):
        if not self.initial_energy > 0:
            raise ValueError("initial_energy must be positive")
        if not 0 <= self.energy <= self.initial_energy:
            raise ValueError(f"energy {self.energy!r} outside [0, initial_energy]")

    @property
    def alive(self) -> bool:
        return self.death_slot is None and self.energy > 0

    def admits(self) -> bool:
        return self.alive and self.active_sessions < self.capacity


@dataclass(frozen=True)
class MobileUser:
    id: int
    position: Point
    cell_id: int


@dataclass
class Session:
    id: int
    src_mu: int
    dst_mu: int
    rate: float
    remaining_slots: int
    relay_id: int | None = None
    blocked: bool = False


def make_relays(grid: HexGrid, initial_energy: float = DEFAULT_ENERGY,
                capacity: int = DEFAULT_CAPACITY,
                eps: float | None = None) -> list[RelayStation]:
    """Fully charged relays, one per grid edge, with primed predictors."""
    pstate = PredictorState(last_energy=float(initial_energy)) if eps is None else \
        PredictorState(eps=eps, last_energy=float(initial_energy))
    return [
        RelayStation(id=e.relay_id, edge_id=e.id, energy=float(initial_energy),
                     initial_energy=float(initial_energy), predictor=pstate,
                     capacity=capacity)
        for e in grid.edges
    ]


def detection(mu: MobileUser, dst: MobileUser, grid: HexGrid) -> list[int]:
    """Relays that receive the initiator's detection message.

    Raises:
        SameCellError: both users are in the same cell.
    """
    if mu.cell_id == dst.cell_id:
        raise SameCellError(f"users {mu.id} and {dst.id} share cell {mu.cell_id}")
    return candidate_relays(grid, mu.position, dst.position)


def prediction(rs: RelayStation, dt: float = 1.0) -> float:
    # read-only: the filter advances once per slot in the engine, not per query
    if not rs.alive:
        return 0.0
    return predict_energy(rs.energy, rs.predictor.a_hat, dt)


def selection(candidates: Sequence[tuple[int, float]]) -> int:
    """Relay with the highest reported energy, lowest id on ties.

    Returns :data:`BLOCKED` when every candidate reports zero energy.
    """
    if not candidates:
        raise ValueError("selection needs at least one candidate")
    best_id, best_val = min(candidates, key=lambda c: (-c[1], c[0]))
    if best_val <= 0:
        return BLOCKED
    return best_id


def select_relay(strategy: Strategy, mu: MobileUser, dst: MobileUser, grid: HexGrid,
                 relays: Sequence[RelayStation], dt: float = 1.0) -> int:
    """Pick the serving relay for a new session under ``strategy``.

    ``relays`` is indexed by relay id.  Returns a relay id, :data:`BLOCKED`
    or :data:`SAME_CELL`.  Capacity is not considered here; admission is
    the engine's job.
    """
    try:
        cands = detection(mu, dst, grid)
    except SameCellError:
        return SAME_CELL

    strategy = Strategy(strategy)
    if strategy is Strategy.NO_EB:
        return cands[0] if relays[cands[0]].alive else BLOCKED

    live = [relays[c] for c in cands if relays[c].alive]
    if not live:
        return BLOCKED
    if strategy is Strategy.EB_BY_BS:
        return selection([(r.id, r.energy) for r in live])
    return selection([(r.id, prediction(r, dt)) for r in live])


def drain(rs: RelayStation, dt: float = 1.0, slot: int = 0, p_idle: float = P_IDLE,
          p_session: float = P_SESSION) -> RelayStation:
    """Spend one step of idle plus per-session power.

    ``slot`` is recorded as the death slot if the relay empties now; a dead
    relay drops all its sessions.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if rs.death_slot is not None:
        return rs
    energy = rs.energy - (p_idle + p_session * rs.active_sessions) * dt
    if energy <= DEAD_TOL * rs.initial_energy:
        return replace(rs, energy=0.0, active_sessions=0, death_slot=slot)
    return replace(rs, energy=energy)
