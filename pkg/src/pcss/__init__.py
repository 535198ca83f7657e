"""Discrete-event simulator for server-based global-EDF scheduling with
capacity sharing/stealing and deadline-aware work stealing of pjobs."""

from .engine import SimConfig, Simulation, run
from .model import (
    ArrivalModel, JobTemplate, Segment, SimulationError, SpecError, TaskSet, TaskSpec,
    utilization,
)
from .trace import Trace
from .workload import GenParams, generate, load_spec

__all__ = [
    "ArrivalModel", "GenParams", "JobTemplate", "Segment", "SimConfig", "Simulation",
    "SimulationError", "SpecError", "TaskSet", "TaskSpec", "Trace", "generate", "load_spec",
    "run", "utilization",
]
__version__ = "0.1.0"
