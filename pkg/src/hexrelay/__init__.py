"""Energy-balancing relay selection for hexagonal cellular networks."""
from .hexgeom import (
    Edge,
    GeometryError,
    HexCell,
    HexGrid,
    Point,
    SameCellError,
    boundary_intersection,
    build_grid,
    candidate_relays,
    cell_of,
)
from .netmodel import BLOCKED, SAME_CELL, MobileUser, RelayStation, Session, Strategy
from .predictor import PredictorState
from .simengine import MetricsRecord, SimConfig, run_experiment, run_trial

__version__ = "0.1.0"
