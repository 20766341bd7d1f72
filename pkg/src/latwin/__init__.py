"""Windowed lattice of consistent global states over asynchronous event streams.

The library keeps, at runtime, the lattice of consistent global states whose
constituents all lie inside per-process sliding windows; evaluates
Possibly/Definitely properties over it; and ships a brute-force oracle, a
seeded stream simulator, and a sweep harness for the accompanying metrics.
"""

from .clocks import (
    EventId,
    LocalState,
    VectorClock,
    concurrent,
    event_happens_before,
    merge,
    state_happens_before,
)
from .detection import DetectionOutcome, Modality, Property, detect, eval_cgs
from .engine import LatWinEngine, LatWinView, ReorderQueue, UpdateReport, WindowBuffer
from .lattice import (
    FullLattice,
    GlobalState,
    build_full_lattice,
    is_consistent,
    is_convex_sublattice,
    join,
    meet,
    precede,
)
from .simulate import SimConfig, deliver, generate, ground_truth
from .trace import Trace

__version__ = "0.1.0"

__all__ = [
    "DetectionOutcome",
    "EventId",
    "FullLattice",
    "GlobalState",
    "LatWinEngine",
    "LatWinView",
    "LocalState",
    "Modality",
    "Property",
    "ReorderQueue",
    "SimConfig",
    "Trace",
    "UpdateReport",
    "VectorClock",
    "WindowBuffer",
    "build_full_lattice",
    "concurrent",
    "deliver",
    "detect",
    "eval_cgs",
    "event_happens_before",
    "generate",
    "ground_truth",
    "is_consistent",
    "is_convex_sublattice",
    "join",
    "meet",
    "merge",
    "precede",
    "state_happens_before",
]
