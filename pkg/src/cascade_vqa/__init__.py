"""Variational quantum solver for the FEM-discretized 3D heat equation.

Builds the stiffness system K u = f on a cube grid whose nodes map onto the
basis states of an n-qubit register, minimizes the normalized energy cost
over layered rotation/entangler circuits simulated exactly, and supports
cold, uniform-superposition and cascade (coarse-to-fine remeshing) starts.
"""

from .ansatz import AnsatzSpec, BoundCircuit, build, build_composed, default_spec
from .fem_grid import (BoundarySpec, DirichletFace, GridSpec, GridSystem,
                       NeumannPatch, assemble, default_boundary, prolong,
                       raw_stiffness, solve_classical)
from .optimizer import OptimizerConfig, OptimResult, minimize
from .qsim import GateOp, apply, load_statevector, run, save_statevector, zero_state
from .sampling import ShotResult, reconstruct, sample
from .vqa import (CascadeSource, CostContext, Metrics, RunRecord,
                  build_cascade_circuit, cost, init_cold, init_uniform, metrics,
                  r_opt, remesh_permutation, run_campaign)

__all__ = [
    "AnsatzSpec", "BoundCircuit", "BoundarySpec", "CascadeSource", "CostContext",
    "DirichletFace", "GateOp", "GridSpec", "GridSystem", "Metrics", "NeumannPatch",
    "OptimResult", "OptimizerConfig", "RunRecord", "ShotResult", "apply",
    "assemble", "build", "build_cascade_circuit", "build_composed",
    "cost", "default_boundary", "default_spec", "init_cold", "init_uniform",
    "load_statevector", "metrics", "minimize", "prolong", "r_opt",
    "raw_stiffness", "reconstruct", "remesh_permutation", "run", "run_campaign",
    "sample", "save_statevector", "solve_classical", "zero_state",
]

__version__ = "0.1.0"
