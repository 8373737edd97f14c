"""Bound-constrained optimization with block-circulant FFT scaling.

Public surface: linear operators (:mod:`bcopt.ops`), block-circulant
machinery (:mod:`bcopt.circulant`), the scaling metric
(:mod:`bcopt.scaling`), objective models (:mod:`bcopt.model`), synthetic CT
problems (:mod:`bcopt.ct`), face CG (:mod:`bcopt.krylov`), the compact
L-BFGS operator (:mod:`bcopt.lbfgs`), and the three solvers
(:mod:`bcopt.solvers`).
"""

from .circulant import BlockCirculantOp, SpectralBlocks, bc_apply, block_diagonalize
from .kernels import BACKEND as kernel_backend
from .lbfgs import CompactLBFGS
from .model import QuadraticModel, ReconModel, hessian_approx_bc
from .ops import DiagonalOp, FaceMask, IdentityOp, LinOp, MatrixOp, compose, restrict
from .scaling import DenseScaling, IdentityScaling, ScalingOp, build_scaling
from .solvers import (
    SolverConfig,
    SolverResult,
    SolverTrace,
    solve_lbfgsb,
    solve_spg,
    solve_tron,
)

__all__ = [
    "BlockCirculantOp",
    "SpectralBlocks",
    "bc_apply",
    "block_diagonalize",
    "kernel_backend",
    "CompactLBFGS",
    "QuadraticModel",
    "ReconModel",
    "hessian_approx_bc",
    "DiagonalOp",
    "FaceMask",
    "IdentityOp",
    "LinOp",
    "MatrixOp",
    "compose",
    "restrict",
    "DenseScaling",
    "IdentityScaling",
    "ScalingOp",
    "build_scaling",
    "SolverConfig",
    "SolverResult",
    "SolverTrace",
    "solve_lbfgsb",
    "solve_spg",
    "solve_tron",
]

__version__ = "0.1.0"
