"""Two-parameter recursive estimate of a relay's energy trend.

A relay keeps only its filtered per-slot energy change (``a_hat``) and the
variance of that estimate (``v``).  Each new energy reading updates both, and
the potential energy for the next slot is the current reading pushed forward
by ``a_hat``.  The same noise constant ``eps`` is used for the variance
growth and for the blending factor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = [
    "DEFAULT_EPS",
    "GOLDEN_GAIN",
    "PredictorState",
    "PredictorStateError",
    "measure_acceleration",
    "evolve",
    "blending_factor",
    "update",
    "predict_energy",
    "step",
    "replay",
]

DEFAULT_EPS = 0.05
# steady-state blending factor, (sqrt(5) - 1) / 2
GOLDEN_GAIN = (math.sqrt(5.0) - 1.0) / 2.0


class PredictorStateError(RuntimeError):
    """The predictor was asked to evolve before seeing any energy reading."""


@dataclass(frozen=True)
class PredictorState:
    a_hat: float = 0.0
    v: float = 0.0
    eps: float = DEFAULT_EPS
    last_energy: float | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps!r}")
        if not self.v >= 0:
            raise ValueError(f"variance must be non-negative, got {self.v!r}")
        if not math.isfinite(self.a_hat):
            raise ValueError("a_hat must be finite")

    @property
    def initialized(self) -> bool:
        return self.last_energy is not None


def _check_dt(dt: float) -> None:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")


def measure_acceleration(e_now: float, e_prev: float, dt: float = 1.0) -> float:
    """Energy change per unit time between two readings (negative when draining)."""
    _check_dt(dt)
    return (e_now - e_prev) / dt


def evolve(state: PredictorState) -> tuple[float, float]:
    """Carry the estimate one slot forward: ``(a_hat, v + eps)``."""
    if not state.initialized:
        raise PredictorStateError("predictor has no energy reading yet")
    return state.a_hat, state.v + state.eps


def blending_factor(v_minus: float, eps: float) -> float:
    if v_minus < 0:
        raise ValueError(f"v_minus must be non-negative, got {v_minus!r}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    return v_minus / (v_minus + eps)


def update(state: PredictorState, a_measured: float) -> PredictorState:
    """Blend a measured acceleration into the state and shrink the variance."""
    a_minus, v_minus = evolve(state)
    gain = blending_factor(v_minus, state.eps)
    return replace(
        state,
        a_hat=a_minus + gain * (a_measured - a_minus),
        v=(1.0 - gain) * v_minus,
    )


def predict_energy(e_now: float, a_hat: float, dt: float = 1.0) -> float:
    """Energy expected one step ahead, never below zero."""
    _check_dt(dt)
    return max(0.0, e_now + a_hat * dt)


def step(state: PredictorState, e_now: float, dt: float = 1.0) -> tuple[PredictorState, float]:
    """Feed one energy reading; return the new state and the potential energy.

    The first reading only primes the state, so its prediction is the reading
    itself.
    """
    _check_dt(dt)
    if not state.initialized:
        return replace(state, last_energy=float(e_now)), float(e_now)
    a = measure_acceleration(e_now, state.last_energy, dt)
    new = replace(update(state, a), last_energy=float(e_now))
    return new, predict_energy(e_now, new.a_hat, dt)


def replay(history, eps: float = DEFAULT_EPS, dt: float = 1.0) -> tuple[PredictorState, float]:
    """Run :func:`step` over an energy history from a fresh state."""
    state = PredictorState(eps=eps)
    predicted = float("nan")
    for e in history:
        state, predicted = step(state, e, dt)
    return state, predicted
