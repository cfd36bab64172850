"""Eigenvalue drift of elliptic Dirichlet problems under domain perturbation.

The package models a background Hilbert space with energy and mass inner
products, measures subspace proximity through projector distances, and
predicts eigenvalue shifts through a small correction eigenproblem, with a
2D P1 finite element realization and a reproducible experiment harness.
"""

from .eigsolve import SymmetricPencil, count_in_interval, solve_pencil
from .hilbert import (
    Corrector,
    EigenDecomposition,
    EnergySpace,
    Subspace,
    apply_B,
    apply_T2,
    compute_rho,
    compute_rho0,
    embedding_constant,
    intersection_subspace,
    project,
    sigma_distance,
    sigma_star,
    solve_corrector,
    solve_operator_eigs,
)

__version__ = "0.1.0"

__all__ = [
    "SymmetricPencil",
    "solve_pencil",
    "count_in_interval",
    "EnergySpace",
    "Subspace",
    "EigenDecomposition",
    "Corrector",
    "embedding_constant",
    "project",
    "sigma_distance",
    "sigma_star",
    "solve_operator_eigs",
    "apply_T2",
    "solve_corrector",
    "apply_B",
    "compute_rho",
    "compute_rho0",
    "intersection_subspace",
    "__version__",
]
