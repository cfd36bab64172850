"""Eigenvalue drift pipeline.

Given eigendecompositions of the reference and the perturbed subspace, this
module localizes the perturbed eigenvalues near a chosen reference group,
assembles the small correction eigenproblem whose eigenvalues shift the
reciprocal eigenvalue to first order, and compares prediction against
measurement with explicit remainder bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eigsolve import (
    NotPositiveDefiniteError,
    SymmetricPencil,
    count_in_interval,
    solve_pencil,
)
from .hilbert import (
    EigenDecomposition,
    Subspace,
    _check_energy_orthonormal,
    compute_rho,
    corrector_block,
)

__all__ = [
    "CorrectionProblem",
    "LocalizationResult",
    "PredictionRow",
    "ScenarioCell",
    "GateError",
    "LocalizationError",
    "CorrectionGramError",
    "SIGMA_GATE",
    "spectral_window",
    "localize",
    "eigenvector_proximity",
    "assemble_correction",
    "predict_and_check",
    "inclusion_bounds",
    "collar_stability_check",
]

# admission threshold for the asymptotic pipeline: refuse when
# sqrt(lambda_1 + ... + lambda_m) * sqrt(sigma) reaches 1/2, which keeps the
# projected-eigenspace Gram safely positive definite
SIGMA_GATE = 0.5


class GateError(RuntimeError):
    """Subspace distance too large for the asymptotic pipeline."""


class LocalizationError(RuntimeError):
    """Perturbed eigenvalue count near the reference group is wrong."""

    def __init__(self, message, window, count, expected):
        super().__init__(message)
        self.window = window
        self.count = count
        self.expected = expected


class CorrectionGramError(RuntimeError):
    """Projected eigenspace Gram lost positive definiteness."""


@dataclass
class CorrectionProblem:
    """The J_m x J_m correction pencil for one reference eigenvalue group.

    lhs is the symmetric left form, gram the Gram of the projected
    eigenvectors; tau holds the pencil's eigenvalues ascending.  rho is the
    remainder magnitude of the group, sigma the projector distance.
    """

    lhs: np.ndarray
    gram: np.ndarray
    lam_m: float
    sigma: float
    rho: float
    tau: np.ndarray


@dataclass
class LocalizationResult:
    """Perturbed eigenvalues matched to a reference group.

    mu_inv is ascending; vectors holds the corresponding eigenvectors as
    columns.  counted records whether the open spectral window contained
    exactly the group's multiplicity; admitted additionally requires the
    distance gate to pass.  gate_value is Lambda_m * sqrt(sigma).
    """

    mu: np.ndarray
    mu_inv: np.ndarray
    window: tuple
    vectors: np.ndarray
    counted: bool
    gate_value: float
    admitted: bool


@dataclass
class PredictionRow:
    """One (group member) line of measured-versus-predicted drift."""

    k: int
    lambda_inv: float
    mu_inv: float
    tau: float
    predicted_mu_inv: float
    remainder: float
    bound: float
    ratio: float


@dataclass
class ScenarioCell:
    """Everything the harness measured for one (eps, m) cell."""

    eps: float
    m: int
    lam_m: float
    multiplicity: int
    sigma: float
    sigma_star: float
    rho: float
    rho0: float
    gate_value: float
    admitted: bool
    tracked: bool
    direction: str
    mu_inv: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    proximity: list = field(default_factory=list)
    t_norm2_range: tuple = (0.0, 0.0)
    psi_norm2_range: tuple = (0.0, 0.0)
    collar_energy_max: float = 0.0
    sym_diff_area: float = 0.0
    group_spread: float = 0.0
    error: str | None = None

    def resolved_rows(self, factor: float = 10.0) -> list:
        """Rows whose drift exceeds the group's own splitting resolution.

        A grouped near-degenerate reference eigenvalue carries an O(h^2)
        internal spread; drifts below that floor measure the grouping
        artifact, not the perturbation.
        """
        floor = factor * self.group_spread
        return [
            row for row in self.rows if abs(row.mu_inv - row.lambda_inv) >= floor
        ]


def spectral_window(eigs1: EigenDecomposition, m: int) -> tuple:
    """Open window around 1/lambda_m bounded by the midpoints of the
    adjacent reciprocal gaps (the canonical concrete localization window)."""
    lam_m = float(eigs1.values[m - 1])
    hi = np.inf if m == 1 else 0.5 * (1.0 / lam_m + 1.0 / float(eigs1.values[m - 2]))
    if m < eigs1.n_groups:
        lo = 0.5 * (1.0 / lam_m + 1.0 / float(eigs1.values[m]))
    elif eigs1.complete:
        lo = 0.0
    else:
        raise LocalizationError(
            f"reference decomposition does not resolve the group after m={m}; "
            "request more eigenvalues",
            window=None,
            count=None,
            expected=None,
        )
    return (lo, hi)


def localize(
    eigs1: EigenDecomposition,
    eigs2: EigenDecomposition,
    m: int,
    sigma: float,
    strict: bool = True,
) -> LocalizationResult:
    """The J_m perturbed eigenvalues nearest the m-th reference group.

    In strict mode the distance gate and the window count are enforced as
    errors; otherwise failures are recorded on the result (``admitted``,
    ``counted``) and the nearest J_m eigenvalues are returned regardless.
    """
    lam_m, _, j_m = eigs1.group(m)
    gate_value = float(np.sqrt(eigs1.cumulative_sum(m) * max(sigma, 0.0)))
    if strict and gate_value >= SIGMA_GATE:
        raise GateError(
            f"distance gate: sqrt(sum of the first {m} eigenvalues) * sqrt(sigma) "
            f"= {gate_value:.3f} >= {SIGMA_GATE}; the subspaces are too far apart"
        )
    lo, hi = spectral_window(eigs1, m)
    flat_mu = eigs2.flat_values()
    mu_inv_all = 1.0 / flat_mu
    in_window = (mu_inv_all > lo) & (mu_inv_all < hi)
    count = count_in_interval(mu_inv_all, lo, hi)
    counted = count == j_m
    if strict and not counted:
        raise LocalizationError(
            f"localization failed for group m={m}: window ({lo:.6e}, {hi:.6e}) "
            f"in the reciprocal scale contains {count} eigenvalues, expected {j_m} "
            f"(lambda_m^-1 = {1.0 / lam_m:.6e}, sqrt(sigma) = {np.sqrt(max(sigma, 0)):.3e})",
            window=(lo, hi),
            count=count,
            expected=j_m,
        )
    if counted:
        chosen = np.flatnonzero(in_window)
    else:
        chosen = np.argsort(np.abs(mu_inv_all - 1.0 / lam_m), kind="stable")[:j_m]
    vectors_flat = np.hstack(eigs2.spaces)
    sel = chosen[np.argsort(mu_inv_all[chosen], kind="stable")]
    return LocalizationResult(
        mu=flat_mu[sel],
        mu_inv=mu_inv_all[sel],
        window=(lo, hi),
        vectors=vectors_flat[:, sel],
        counted=counted,
        gate_value=gate_value,
        admitted=counted and gate_value < SIGMA_GATE,
    )


def eigenvector_proximity(
    u: np.ndarray, x_m: np.ndarray, h2: Subspace, sigma: float
) -> float:
    """||U - P_m U|| / (sqrt(sigma) ||U||) with P_m projecting onto S2 X_m."""
    space = h2.parent
    u = space.check_vector(u)
    projected_basis = h2.project_block(np.atleast_2d(x_m.T).T)
    p_m = Subspace.from_basis(space, projected_basis)
    num = space.energy_norm(u - p_m.project(u))
    denom_u = space.energy_norm(u)
    if sigma <= 0.0:
        if num <= 1e-12 * max(denom_u, 1.0):
            return 0.0
        raise ValueError(
            f"zero distance but nonzero projection defect {num:.3e}; inputs inconsistent"
        )
    return float(num / (np.sqrt(sigma) * denom_u))


def assemble_correction(
    h1: Subspace, h2: Subspace, x_m: np.ndarray, lam_m: float, sigma: float
) -> CorrectionProblem:
    """Correction pencil of a reference eigenvalue group.

    lhs_ij = (1/lam)[(Psi_i, Psi_j) - (T phi_i, T phi_j)
                     - (Psi_i, phi_j) - (phi_i, Psi_j)],
    gram_ij = (S phi_i, S phi_j), with S the projector onto the perturbed
    subspace.  For a shrinking domain the Psi terms vanish and the pencil is
    negative semidefinite; for a growing one the T terms vanish and it is
    positive semidefinite.
    """
    h1.same_parent(h2)
    space = h1.parent
    x_m = np.atleast_2d(np.asarray(x_m, dtype=float))
    if x_m.shape[0] != space.dim:
        x_m = x_m.T
    _check_energy_orthonormal(space, x_m)
    s_block = h2.project_block(x_m)
    t_block = x_m - s_block
    psi_block = corrector_block(h2, x_m, lam_m)
    a = space.energy_gram
    pp = psi_block.T @ a @ psi_block
    tt = t_block.T @ a @ t_block
    px = psi_block.T @ a @ x_m
    lhs = (pp - tt - px - px.T) / lam_m
    gram = s_block.T @ a @ s_block
    try:
        pencil = SymmetricPencil(lhs, gram)
    except NotPositiveDefiniteError as exc:
        raise CorrectionGramError(
            "projected eigenspace Gram is not positive definite "
            f"(smallest eigenvalue {exc.smallest_eig:.3e}); the subspace distance "
            "is too large for the projected eigenvectors to stay independent"
        ) from exc
    tau, _ = solve_pencil(pencil)
    rho = compute_rho(h1, h2, x_m, lam_m, sigma)
    return CorrectionProblem(
        lhs=pencil.a, gram=pencil.b, lam_m=lam_m, sigma=sigma, rho=rho, tau=tau
    )


def predict_and_check(cp: CorrectionProblem, measured_mu: np.ndarray) -> list:
    """Pair predicted reciprocal shifts with measured eigenvalues.

    Both sides are ordered ascending in the reciprocal scale (eigenvalues
    are matched by multiplicity ordering, not by eigenvector tracking).
    """
    measured_mu = np.asarray(measured_mu, dtype=float)
    tau = np.sort(np.asarray(cp.tau, dtype=float))
    if measured_mu.size != tau.size:
        raise ValueError(
            f"measured list has length {measured_mu.size}, correction pencil "
            f"has {tau.size} eigenvalues"
        )
    lam_inv = 1.0 / cp.lam_m
    mu_inv = np.sort(1.0 / measured_mu)
    rows = []
    for k, (mi, tk) in enumerate(zip(mu_inv, tau), start=1):
        predicted = lam_inv + tk
        remainder = abs(mi - predicted)
        bound = cp.rho + abs(tk) * cp.sigma
        if bound > 0.0:
            ratio = remainder / bound
        else:
            ratio = 0.0 if remainder <= 1e-12 else np.inf
        rows.append(
            PredictionRow(
                k=k,
                lambda_inv=lam_inv,
                mu_inv=float(mi),
                tau=float(tk),
                predicted_mu_inv=float(predicted),
                remainder=float(remainder),
                bound=float(bound),
                ratio=float(ratio),
            )
        )
    return rows


def _direction_of(h1: Subspace, h2: Subspace) -> str:
    """DOF-set relation of a nodal pair: equal/shrink/expand/none."""
    if h1.kind != "nodal" or h2.kind != "nodal":
        return "none"
    i1, i2 = set(h1.indices.tolist()), set(h2.indices.tolist())
    if i1 == i2:
        return "equal"
    if i2 < i1:
        return "shrink"
    if i1 < i2:
        return "expand"
    return "none"


def inclusion_bounds(cells: list, direction: str) -> tuple:
    """Fitted constants sandwiching the drift by complement norms.

    For a shrinking domain the drift |mu_k^-1 - lambda_m^-1| is compared
    against min/max of ||T phi||^2 over the unit eigenspace sphere; for a
    growing one against ||Psi_phi||^2.  Returns (c, C): the largest lower
    and smallest upper constant valid across all non-degenerate rows.
    """
    if direction not in ("shrink", "expand"):
        raise ValueError(f"direction must be 'shrink' or 'expand', got {direction!r}")
    lower = np.inf
    upper = 0.0
    used = 0
    for cell in cells:
        if cell.error or not cell.tracked:
            continue
        if cell.direction not in (direction, "equal"):
            raise ValueError(
                f"cell eps={cell.eps}, m={cell.m} has direction {cell.direction!r}, "
                f"inconsistent with {direction!r}"
            )
        norms = cell.t_norm2_range if direction == "shrink" else cell.psi_norm2_range
        lo2, hi2 = norms
        for row in cell.rows:
            shift = abs(row.mu_inv - row.lambda_inv)
            if hi2 <= 1e-14:
                if shift > 1e-12:
                    raise ValueError("zero complement norm with nonzero drift")
                continue  # exact row, skipped from the fit
            upper = max(upper, shift / hi2)
            if lo2 > 1e-14:
                lower = min(lower, shift / lo2)
            used += 1
    if used == 0:
        raise ValueError("no usable rows to fit inclusion bounds")
    return (float(lower if np.isfinite(lower) else 0.0), float(upper))


def collar_stability_check(cells: list) -> list:
    """Ratio of eigenvalue drift to collar gradient energy per row.

    Each cell must carry the maximal collar gradient energy over its unit
    eigenspace sphere and the symmetric-difference area; emits one entry
    per (eps, m, k) with both stability ratios.
    """
    table = []
    for cell in cells:
        if cell.error or not cell.tracked:
            continue
        if cell.collar_energy_max < 0:
            raise ValueError("collar energy missing on a tracked cell")
        for row in cell.rows:
            shift = abs(row.mu_inv - row.lambda_inv)
            den = cell.collar_energy_max
            area = cell.sym_diff_area
            table.append(
                {
                    "eps": cell.eps,
                    "m": cell.m,
                    "k": row.k,
                    "shift": shift,
                    "collar_energy": den,
                    "ratio": (shift / den) if den > 1e-300 else 0.0,
                    "sym_diff_area": area,
                    "area_ratio": (shift / area) if area > 1e-300 else 0.0,
                }
            )
    if not table:
        raise ValueError("no tracked rows for the collar stability table")
    return table
