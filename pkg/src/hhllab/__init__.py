"""HHL quantum linear-system solver: exact simulation, applications and resource estimates."""
from . import circuit, heat, hhl, linalg, powerflow, resources, synthesis, transforms
from .circuit import Circuit, Gate, QuantumState, gate, run, stats
from .hhl import HHLConfig, HHLSolution, HHLSolver, build, solve
from .linalg import LinearSystem, prepare
from .transforms import decompose, fuse

__all__ = [
    "Circuit", "Gate", "HHLConfig", "HHLSolution", "HHLSolver", "LinearSystem", "QuantumState",
    "build", "circuit", "decompose", "fuse", "gate", "heat", "hhl", "linalg", "powerflow",
    "prepare", "resources", "run", "solve", "stats", "synthesis", "transforms",
]
__version__ = "0.1.0"
