"""Batch-dynamic graph algorithms on a simulated MPC cluster, built on l0 sketches."""

from .connectivity import Connectivity, Update, dele, ins
from .euler_tour import EulerForest
from .l0_sketch import L0Sketch, SketchBank, SketchParams
from .matching import AKLYMatching, GreedyMatching, SizeEstimator, Tester
from .mpc_engine import EngineConfig, MPCEngine
from .msf_apps import ApproxMSF, Bipartiteness, ExactMSF

__all__ = [
    "AKLYMatching", "ApproxMSF", "Bipartiteness", "Connectivity", "EngineConfig", "EulerForest",
    "ExactMSF", "GreedyMatching", "L0Sketch", "MPCEngine", "SizeEstimator", "SketchBank", "SketchParams",
    "Tester", "Update", "dele", "ins",
]
__version__ = "0.1.0"
