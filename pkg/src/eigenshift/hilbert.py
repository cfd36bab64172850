"""Finite-dimensional model of a pair of nested spectral problems.

An :class:`EnergySpace` is R^N equipped with two inner products given by
Gram matrices: the energy product (u, v) = u' A v and the mass product
<u, v> = u' M v.  Closed subspaces carry energy-orthogonal projectors, and
the module provides the quantities that control how eigenvalues of the
associated compact operators move from one subspace to another: the
projector distance sigma, the complement constant sigma*, the bridge
operator B, correctors, and the remainder magnitudes rho and rho0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .eigsolve import NotPositiveDefiniteError, SymmetricPencil, solve_pencil

__all__ = [
    "EnergySpace",
    "Subspace",
    "EigenDecomposition",
    "Corrector",
    "DimensionMismatchError",
    "SubspaceRankError",
    "IllConditionedIntersectionError",
    "NotInSubspaceError",
    "DEFAULT_GROUP_TOL",
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
]

DEFAULT_GROUP_TOL = 1e-6

# principal-angle cosine thresholds for intersection detection
_COS_INTERSECT = 1.0 - 1e-10
_COS_AMBIGUOUS = 1.0 - 1e-6


class DimensionMismatchError(ValueError):
    """Vector or matrix does not match the ambient dimension."""


class SubspaceRankError(ValueError):
    """Basis is numerically rank deficient."""


class NotInSubspaceError(ValueError):
    """A vector required to lie in a subspace does not."""


class IllConditionedIntersectionError(ValueError):
    """Principal angles too close to the detection threshold to classify.

    The full cosine spectrum is attached as ``cosines``.
    """

    def __init__(self, cosines: np.ndarray):
        self.cosines = np.asarray(cosines)
        super().__init__(
            "intersection detection is ill conditioned; principal-angle cosines: "
            + np.array2string(self.cosines, precision=12)
        )


def _check_gram(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square, got shape {mat.shape}")
    scale = np.abs(mat).max()
    if scale > 0 and np.abs(mat - mat.T).max() > 1e-12 * scale:
        raise ValueError(f"{name} is not symmetric to 1e-12 relative")
    return 0.5 * (mat + mat.T)


class EnergySpace:
    """Ambient space: dimension plus energy and mass Gram matrices.

    Both Grams must be symmetric positive definite; positivity is verified
    by Cholesky factorization at construction (which also guarantees the
    embedding constant is finite and positive).
    """

    def __init__(self, energy_gram: np.ndarray, mass_gram: np.ndarray):
        energy_gram = _check_gram(energy_gram, "energy_gram")
        mass_gram = _check_gram(mass_gram, "mass_gram")
        if energy_gram.shape != mass_gram.shape:
            raise ValueError("energy_gram and mass_gram must have the same shape")
        try:
            self._energy_chol = np.linalg.cholesky(energy_gram)
        except np.linalg.LinAlgError:
            smallest = float(np.linalg.eigvalsh(energy_gram)[0])
            raise NotPositiveDefiniteError("energy_gram", smallest) from None
        try:
            np.linalg.cholesky(mass_gram)
        except np.linalg.LinAlgError:
            smallest = float(np.linalg.eigvalsh(mass_gram)[0])
            raise NotPositiveDefiniteError("mass_gram", smallest) from None
        self.energy_gram = energy_gram
        self.mass_gram = mass_gram
        self.dim = energy_gram.shape[0]

    def check_vector(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"vector of length {u.shape[0]} in a space of dimension {self.dim}"
            )
        return u

    def energy_inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(self.check_vector(u) @ self.energy_gram @ self.check_vector(v))

    def mass_inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(self.check_vector(u) @ self.mass_gram @ self.check_vector(v))

    def energy_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(self.energy_inner(u, u), 0.0)))

    def mass_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(self.mass_inner(u, u), 0.0)))

    def whole(self) -> "Subspace":
        """The whole space as a nodal subspace."""
        return Subspace.nodal(self, np.arange(self.dim))


class Subspace:
    """Closed subspace of an :class:`EnergySpace`.

    Either nodal (spanned by coordinate vectors at a recorded index set) or
    general (spanned by the columns of an explicit basis).  Projections are
    energy orthogonal.  The energy-orthonormalized basis is cached; for
    nodal subspaces projection goes through a Cholesky factor of the
    restricted energy Gram instead, which is cheaper at mesh scale.
    """

    def __init__(self, parent: EnergySpace, basis: np.ndarray, *, _indices=None):
        self.parent = parent
        self._indices = None if _indices is None else np.asarray(_indices, dtype=int)
        if self._indices is not None:
            self.dim = int(self._indices.size)
            if self.dim < 1:
                raise SubspaceRankError("nodal subspace needs a nonempty index set")
            self._basis_raw = None
        else:
            basis = np.asarray(basis, dtype=float)
            if basis.ndim != 2 or basis.shape[0] != parent.dim:
                raise DimensionMismatchError(
                    f"basis of shape {basis.shape} in a space of dimension {parent.dim}"
                )
            if basis.shape[1] < 1:
                raise SubspaceRankError("basis needs at least one column")
            self._basis_raw = basis
            self.dim = basis.shape[1]
        self._onb = None
        self._restricted_chol = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def nodal(cls, parent: EnergySpace, indices) -> "Subspace":
        indices = np.unique(np.asarray(indices, dtype=int))
        if indices.size and (indices[0] < 0 or indices[-1] >= parent.dim):
            raise DimensionMismatchError("nodal index out of range")
        return cls(parent, None, _indices=indices)

    @classmethod
    def from_basis(cls, parent: EnergySpace, basis: np.ndarray) -> "Subspace":
        return cls(parent, basis)

    # -- structure ----------------------------------------------------------

    @property
    def kind(self) -> str:
        return "nodal" if self._indices is not None else "general"

    @property
    def indices(self) -> np.ndarray:
        if self._indices is None:
            raise ValueError("general subspace has no nodal index set")
        return self._indices

    @property
    def basis(self) -> np.ndarray:
        """Raw spanning columns (identity columns for nodal subspaces)."""
        if self._basis_raw is None:
            eye = np.zeros((self.parent.dim, self.dim))
            eye[self._indices, np.arange(self.dim)] = 1.0
            self._basis_raw = eye
        return self._basis_raw

    def orthonormal_basis(self) -> np.ndarray:
        """Energy-orthonormal basis B with B' A B = I (cached)."""
        if self._onb is None:
            ell = self.parent._energy_chol
            yb = ell.T @ self.basis
            scale = np.linalg.norm(yb, axis=0)
            if np.any(scale <= 0.0):
                raise SubspaceRankError("basis contains a zero column")
            svals = np.linalg.svd(yb / scale, compute_uv=False)
            if svals[-1] < 1e-10:
                raise SubspaceRankError(
                    f"basis is rank deficient: smallest singular value {svals[-1]:.3e}"
                )
            q, _ = np.linalg.qr(yb)
            self._onb = sla.solve_triangular(ell, q, lower=True, trans="T")
        return self._onb

    def _restricted_energy_solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve A_II x = rhs on the nodal index set."""
        if self._restricted_chol is None:
            sub = self.parent.energy_gram[np.ix_(self._indices, self._indices)]
            self._restricted_chol = sla.cho_factor(sub, lower=True)
        return sla.cho_solve(self._restricted_chol, rhs)

    def restricted_grams(self) -> tuple[np.ndarray, np.ndarray]:
        """Energy and mass Grams restricted to this subspace's coordinates."""
        if self.kind == "nodal":
            idx = np.ix_(self._indices, self._indices)
            return self.parent.energy_gram[idx], self.parent.mass_gram[idx]
        b = self.orthonormal_basis()
        a_res = b.T @ self.parent.energy_gram @ b
        m_res = b.T @ self.parent.mass_gram @ b
        return a_res, m_res

    def embed(self, coords: np.ndarray) -> np.ndarray:
        """Map subspace coordinates back to ambient vectors."""
        coords = np.asarray(coords, dtype=float)
        if self.kind == "nodal":
            out_shape = (self.parent.dim,) + coords.shape[1:]
            out = np.zeros(out_shape)
            out[self._indices] = coords
            return out
        return self.orthonormal_basis() @ coords

    # -- operators ----------------------------------------------------------

    def project_block(self, u: np.ndarray) -> np.ndarray:
        """Energy-orthogonal projection, applied columnwise."""
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.parent.dim:
            raise DimensionMismatchError(
                f"vector of length {u.shape[0]} in a space of dimension {self.parent.dim}"
            )
        if self.kind == "nodal":
            rhs = (self.parent.energy_gram @ u)[self._indices]
            out_shape = (self.parent.dim,) + u.shape[1:]
            out = np.zeros(out_shape)
            out[self._indices] = self._restricted_energy_solve(rhs)
            return out
        b = self.orthonormal_basis()
        return b @ (b.T @ (self.parent.energy_gram @ u))

    def project(self, u: np.ndarray) -> np.ndarray:
        return self.project_block(u)

    def apply_k(self, u: np.ndarray) -> np.ndarray:
        """Compact solution operator on this subspace: (K u, v) = <u, v>."""
        u = np.asarray(u, dtype=float)
        if self.kind == "nodal":
            rhs = (self.parent.mass_gram @ u)[self._indices]
            out_shape = (self.parent.dim,) + u.shape[1:]
            out = np.zeros(out_shape)
            out[self._indices] = self._restricted_energy_solve(rhs)
            return out
        b = self.orthonormal_basis()
        return b @ (b.T @ (self.parent.mass_gram @ u))

    def contains(self, u: np.ndarray, tol: float = 1e-8) -> bool:
        u = self.parent.check_vector(u)
        norm = self.parent.energy_norm(u)
        if norm == 0.0:
            return True
        return self.parent.energy_norm(u - self.project(u)) <= tol * norm

    def same_parent(self, other: "Subspace") -> None:
        if self.parent is not other.parent:
            raise ValueError("subspaces must share the same parent space")


@dataclass
class EigenDecomposition:
    """Eigenvalues of the restricted spectral problem, grouped into eigenspaces.

    ``values[g]`` is the g-th distinct eigenvalue, ``spaces[g]`` the ambient
    N x J_g matrix of energy-orthonormal eigenvectors, ``multiplicities[g]``
    its dimension.  ``complete`` records whether the whole spectrum was
    computed; for partial solves ``n_computed`` = sum of multiplicities.
    """

    values: np.ndarray
    spaces: list
    multiplicities: np.ndarray
    group_tol: float
    dim_solved: int
    complete: bool
    spreads: np.ndarray = None  # per group: max |1/lam_i - 1/lam_mean| over members

    @property
    def n_groups(self) -> int:
        return len(self.values)

    @property
    def n_computed(self) -> int:
        return int(self.multiplicities.sum())

    def group(self, m: int) -> tuple[float, np.ndarray, int]:
        """1-based access: (eigenvalue, eigenspace basis, multiplicity)."""
        if not 1 <= m <= self.n_groups:
            raise IndexError(f"group index {m} outside 1..{self.n_groups}")
        return float(self.values[m - 1]), self.spaces[m - 1], int(self.multiplicities[m - 1])

    def flat_values(self) -> np.ndarray:
        """Eigenvalues repeated by multiplicity, ascending."""
        return np.repeat(self.values, self.multiplicities)

    def cumulative_sum(self, m: int) -> float:
        """Sum of the first m distinct eigenvalues."""
        return float(self.values[:m].sum())


@dataclass
class Corrector:
    """Solution of the corrector equation for one eigenvector.

    ``value`` lies in the target subspace and satisfies
    (value, w) = (source, w) - lam <source, w> for all w in the subspace.
    """

    source: np.ndarray
    value: np.ndarray
    residual_norm: float


# -- module operations -------------------------------------------------------


def embedding_constant(space: EnergySpace) -> float:
    """Smallest c0 with mass_norm(u) <= c0 * energy_norm(u) for all u."""
    theta, _ = solve_pencil(SymmetricPencil(space.mass_gram, space.energy_gram))
    return float(np.sqrt(max(theta[-1], 0.0)))


def project(sub: Subspace, u: np.ndarray) -> np.ndarray:
    """Energy-orthogonal projection of u onto sub."""
    return sub.project(sub.parent.check_vector(u))


def apply_T2(h2: Subspace, phi: np.ndarray) -> np.ndarray:
    """Complement part phi - S2 phi."""
    phi = h2.parent.check_vector(phi)
    return phi - h2.project(phi)


def _nodal_pair(h1: Subspace, h2: Subspace) -> bool:
    return h1.kind == "nodal" and h2.kind == "nodal"


def _nodal_complement(h1: Subspace, h2: Subspace):
    """Basis of (H1 + H2) minus-energy (H1 cap H2) for nodal pairs.

    Returns (C, inter_indices) where C is N x k with k = |I1 xor I2|;
    C is None when the subspaces coincide.
    """
    space = h1.parent
    i1, i2 = set(h1.indices.tolist()), set(h2.indices.tolist())
    inter = np.array(sorted(i1 & i2), dtype=int)
    diff = np.array(sorted(i1 ^ i2), dtype=int)
    if diff.size == 0:
        return None, inter
    cols = np.zeros((space.dim, diff.size))
    cols[diff, np.arange(diff.size)] = 1.0
    if inter.size:
        s0 = Subspace.nodal(space, inter)
        cols = cols - s0.project_block(cols)
    return cols, inter


def sigma_distance(h1: Subspace, h2: Subspace) -> float:
    """Best constant in |(S1 - S2) u|^2 <= sigma ||u||^2 over the parent space."""
    h1.same_parent(h2)
    space = h1.parent
    if _nodal_pair(h1, h2):
        cols, _ = _nodal_complement(h1, h2)
        if cols is None:
            return 0.0
        diff = h1.project_block(cols) - h2.project_block(cols)
        num = diff.T @ space.mass_gram @ diff
        den = cols.T @ space.energy_gram @ cols
        theta, _ = solve_pencil(SymmetricPencil(num, den))
        return float(max(theta[-1], 0.0))
    b1, b2 = h1.orthonormal_basis(), h2.orthonormal_basis()
    s1 = b1 @ (b1.T @ space.energy_gram)
    s2 = b2 @ (b2.T @ space.energy_gram)
    diff = s1 - s2
    num = diff.T @ space.mass_gram @ diff
    theta, _ = solve_pencil(SymmetricPencil(num, space.energy_gram))
    return float(max(theta[-1], 0.0))


def intersection_subspace(h1: Subspace, h2: Subspace) -> Subspace | None:
    """H1 cap H2, or None when it is trivial.

    Nodal pairs intersect combinatorially through their index sets; general
    pairs through principal angles with cosine threshold 1 - 1e-10.  Cosines
    falling in the ambiguous band (1 - 1e-6, 1 - 1e-10) raise, with the full
    spectrum attached.
    """
    h1.same_parent(h2)
    space = h1.parent
    if _nodal_pair(h1, h2):
        inter = np.array(sorted(set(h1.indices.tolist()) & set(h2.indices.tolist())), dtype=int)
        if inter.size == 0:
            return None
        return Subspace.nodal(space, inter)
    ell = space._energy_chol
    q1 = ell.T @ h1.orthonormal_basis()
    q2 = ell.T @ h2.orthonormal_basis()
    u, cosines, _ = np.linalg.svd(q1.T @ q2)
    cosines = np.clip(cosines, 0.0, None)
    ambiguous = (cosines > _COS_AMBIGUOUS) & (cosines < _COS_INTERSECT)
    if np.any(ambiguous):
        raise IllConditionedIntersectionError(cosines)
    k = int(np.count_nonzero(cosines >= _COS_INTERSECT))
    if k == 0:
        return None
    basis = sla.solve_triangular(ell, q1 @ u[:, :k], lower=True, trans="T")
    return Subspace.from_basis(space, basis)


def sigma_star(h1: Subspace, h2: Subspace) -> float:
    """Best constant in |u|^2 <= sigma* ||u||^2 on (H1+H2) energy-orthogonal
    to H1 cap H2; zero when the sum equals the intersection."""
    h1.same_parent(h2)
    space = h1.parent
    if _nodal_pair(h1, h2):
        cols, _ = _nodal_complement(h1, h2)
        if cols is None:
            return 0.0
        num = cols.T @ space.mass_gram @ cols
        den = cols.T @ space.energy_gram @ cols
        theta, _ = solve_pencil(SymmetricPencil(num, den))
        return float(max(theta[-1], 0.0))
    inter = intersection_subspace(h1, h2)
    ell = space._energy_chol
    q1 = ell.T @ h1.orthonormal_basis()
    q2 = ell.T @ h2.orthonormal_basis()
    stacked = np.hstack([q1, q2])
    u, svals, _ = np.linalg.svd(stacked, full_matrices=False)
    rank = int(np.count_nonzero(svals > 1e-10 * svals[0]))
    q_sum = u[:, :rank]
    k_int = 0 if inter is None else inter.dim
    if rank == k_int:
        return 0.0
    if k_int:
        q_int = ell.T @ inter.orthonormal_basis()
        resid = q_sum - q_int @ (q_int.T @ q_sum)
        uu, _, _ = np.linalg.svd(resid, full_matrices=False)
        comp = uu[:, : rank - k_int]
    else:
        comp = q_sum
    vecs = sla.solve_triangular(ell, comp, lower=True, trans="T")
    gram = vecs.T @ space.mass_gram @ vecs
    theta = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    return float(max(theta[-1], 0.0))


def solve_operator_eigs(
    sub: Subspace, group_tol: float = DEFAULT_GROUP_TOL, n_lowest: int | None = None
) -> EigenDecomposition:
    """Solve (phi, v) = lambda <phi, v> restricted to sub.

    Eigenvalues come out ascending, grouped into eigenspaces wherever the
    relative gap is at most ``group_tol``; each group's basis is
    energy-orthonormal in the ambient coordinates.  ``n_lowest`` asks for a
    partial spectrum (the trailing, possibly split group is dropped).
    """
    if group_tol <= 0:
        raise ValueError(f"group_tol must be positive, got {group_tol}")
    a_res, m_res = sub.restricted_grams()
    d = a_res.shape[0]
    partial = n_lowest is not None and n_lowest < d
    request = min(d, n_lowest + 3) if partial else None
    # (phi, v) = lambda <phi, v> restricted: A_res c = lambda M_res c
    lam, coords = solve_pencil(SymmetricPencil(a_res, m_res), n_lowest=request)
    groups = _group_boundaries(lam, group_tol)
    if partial and len(groups) > 1:
        groups = groups[:-1]
    elif partial and len(groups) == 1 and request < d:
        raise ValueError(
            "partial solve cannot separate a trailing eigenvalue group; increase n_lowest"
        )
    values, spaces, mults, spreads = [], [], [], []
    for sel in groups:
        lam_g = float(lam[sel].mean())
        block = coords[:, sel]
        # pencil vectors are A-orthonormal up to scaling by sqrt(lambda)
        block = block / np.sqrt(lam[sel])[np.newaxis, :]
        gram = block.T @ a_res @ block
        block = block @ _inv_sqrt(gram)
        ambient = sub.embed(block)
        _certify_group(a_res, m_res, block, lam_g, lam[sel])
        values.append(lam_g)
        spaces.append(_fix_block_signs(ambient))
        mults.append(block.shape[1])
        spreads.append(float(np.abs(1.0 / lam[sel] - 1.0 / lam_g).max()))
    return EigenDecomposition(
        values=np.array(values),
        spaces=spaces,
        multiplicities=np.array(mults, dtype=int),
        group_tol=group_tol,
        dim_solved=d,
        complete=not partial,
        spreads=np.array(spreads),
    )


def _group_boundaries(lam: np.ndarray, tol: float) -> list:
    groups, start = [], 0
    for i in range(1, lam.size):
        if lam[i] - lam[i - 1] > tol * max(abs(lam[i]), abs(lam[i - 1])):
            groups.append(slice(start, i))
            start = i
    groups.append(slice(start, lam.size))
    return groups


def _inv_sqrt(gram: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (gram + gram.T))
    if w[0] <= 0:
        raise SubspaceRankError("eigenspace block lost rank during orthonormalization")
    return v @ np.diag(1.0 / np.sqrt(w)) @ v.T


def _fix_block_signs(block: np.ndarray) -> np.ndarray:
    for j in range(block.shape[1]):
        k = int(np.argmax(np.abs(block[:, j])))
        if block[k, j] < 0:
            block[:, j] = -block[:, j]
    return block


def _certify_group(a_res, m_res, block, lam_g, lam_members) -> None:
    # residual of K x = lambda_m^-1 x in the restricted energy norm; grouped
    # eigenvalues that are merely close (not equal) contribute their spread
    # in the reciprocal scale on top of the 1e-8 solver allowance
    k_block = np.linalg.solve(a_res, m_res @ block)
    resid = k_block - block / lam_g
    num = np.sqrt(np.maximum(np.einsum("ij,ij->j", resid, a_res @ resid), 0.0))
    den = np.sqrt(np.maximum(np.einsum("ij,ij->j", block, a_res @ block), 0.0))
    spread = float(np.abs(1.0 / lam_members - 1.0 / lam_g).max())
    if np.any(num > (1e-8 + spread) * den):
        raise ValueError(
            f"eigenrelation residual {num.max():.3e} exceeds the certified bound"
        )


def solve_corrector(h2: Subspace, phi: np.ndarray, lam_m: float) -> Corrector:
    """Element of h2 carrying the eigen-residual of phi at eigenvalue lam_m.

    Solves (psi, w) = (phi, w) - lam_m <phi, w> for all w in h2.
    """
    space = h2.parent
    phi = space.check_vector(phi)
    rhs = space.energy_gram @ phi - lam_m * (space.mass_gram @ phi)
    if h2.kind == "nodal":
        coords = h2._restricted_energy_solve(rhs[h2.indices])
        value = np.zeros(space.dim)
        value[h2.indices] = coords
        resid = (space.energy_gram @ value - rhs)[h2.indices]
    else:
        b = h2.orthonormal_basis()
        value = b @ (b.T @ rhs)
        resid = b.T @ (space.energy_gram @ value - rhs)
    residual_norm = float(np.linalg.norm(resid))
    # the value must lie in h2 by construction
    in_span = space.energy_norm(value - h2.project(value))
    if in_span > 1e-10 * max(space.energy_norm(value), 1.0):
        raise ValueError("corrector left its subspace; restricted Gram is suspect")
    return Corrector(source=phi, value=value, residual_norm=residual_norm)


def corrector_block(h2: Subspace, block: np.ndarray, lam_m: float) -> np.ndarray:
    """Correctors of all columns at once (shares the factorization)."""
    space = h2.parent
    rhs = space.energy_gram @ block - lam_m * (space.mass_gram @ block)
    if h2.kind == "nodal":
        out = np.zeros_like(block)
        out[h2.indices] = h2._restricted_energy_solve(rhs[h2.indices])
        return out
    b = h2.orthonormal_basis()
    return b @ (b.T @ rhs)


def apply_B(h1: Subspace, h2: Subspace, v: np.ndarray) -> np.ndarray:
    """Bridge operator K2 S2 v - S2 K1 v for v in H1."""
    h1.same_parent(h2)
    space = h1.parent
    v = space.check_vector(v)
    norm = space.energy_norm(v)
    if norm > 0 and space.energy_norm(v - h1.project(v)) > 1e-8 * norm:
        raise NotInSubspaceError("apply_B requires its argument to lie in H1")
    return h2.apply_k(h2.project(v)) - h2.project(h1.apply_k(v))


def _check_energy_orthonormal(space: EnergySpace, block: np.ndarray) -> None:
    gram = block.T @ space.energy_gram @ block
    if np.abs(gram - np.eye(gram.shape[0])).max() > 1e-8:
        raise ValueError("eigenspace basis must be energy-orthonormal")


def compute_rho(
    h1: Subspace, h2: Subspace, x_m: np.ndarray, lam_m: float, sigma: float
) -> float:
    """Remainder magnitude: max over unit-energy phi in the eigenspace of
    sigma ||Psi_phi||^2 + |T phi|^2 + |Psi_phi|^2.

    Assembled exactly as the largest eigenvalue of the induced quadratic
    form on the eigenspace coordinates.
    """
    h1.same_parent(h2)
    space = h1.parent
    x_m = np.atleast_2d(np.asarray(x_m, dtype=float))
    if x_m.shape[0] != space.dim:
        x_m = x_m.T
    _check_energy_orthonormal(space, x_m)
    t_block = x_m - h2.project_block(x_m)
    psi_block = corrector_block(h2, x_m, lam_m)
    form = (
        sigma * (psi_block.T @ space.energy_gram @ psi_block)
        + t_block.T @ space.mass_gram @ t_block
        + psi_block.T @ space.mass_gram @ psi_block
    )
    theta = np.linalg.eigvalsh(0.5 * (form + form.T))
    return float(max(theta[-1], 0.0))


def compute_rho0(h1: Subspace, h2: Subspace, x_m: np.ndarray, lam_m: float) -> float:
    """Intersection-based remainder magnitude: max over unit-energy phi of
    ||T0 phi||^2 + ||Psi_phi||^2 with T0 = I - (projector onto H1 cap H2)."""
    h1.same_parent(h2)
    space = h1.parent
    x_m = np.atleast_2d(np.asarray(x_m, dtype=float))
    if x_m.shape[0] != space.dim:
        x_m = x_m.T
    _check_energy_orthonormal(space, x_m)
    inter = intersection_subspace(h1, h2)
    t0_block = x_m if inter is None else x_m - inter.project_block(x_m)
    psi_block = corrector_block(h2, x_m, lam_m)
    form = (
        t0_block.T @ space.energy_gram @ t0_block
        + psi_block.T @ space.energy_gram @ psi_block
    )
    theta = np.linalg.eigvalsh(0.5 * (form + form.T))
    return float(max(theta[-1], 0.0))
