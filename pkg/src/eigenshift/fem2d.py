"""P1 finite elements on a structured triangulation of the unit square.

The background square D = [0,1]^2 is split into n x n cells, each cut along
the lower-left to upper-right diagonal (the mesh is invariant under the
coordinate swap, which keeps degenerate eigenvalue pairs exactly degenerate
at the discrete level).  Subdomains are unions of mesh triangles; carving
one out yields a nodal subspace of the background energy space, so domain
perturbations become genuine subspace perturbations of a single discrete
problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hilbert import EnergySpace, Subspace

__all__ = [
    "BackgroundMesh",
    "CoefficientField",
    "DomainSpec",
    "MeshError",
    "unit_square_mesh",
    "assemble",
    "carve_subspace",
    "gradient_energy",
    "hadamard_slope",
    "collar_elements",
    "region_area",
    "symmetric_difference_area",
    "suggested_group_tol",
]

_REF_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # reference P1 gradients
_PROBE_ANGLES = np.linspace(0.0, np.pi, 8, endpoint=False)


class MeshError(ValueError):
    """Invalid mesh, domain specification, or region."""


class BackgroundMesh:
    """Conforming triangle mesh of the unit square with vertex classification.

    vertices: (nv, 2) array; triangles: (nt, 3) int array, positively
    oriented; h: nominal edge length.  Vertices strictly inside D are the
    degrees of freedom of the background space, in vertex order.
    """

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray, h: float):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=int)
        self.h = float(h)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must be an (nt, 3) array")
        self._validate_geometry()
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        eps = 1e-12
        self.interior_mask = (x > eps) & (x < 1 - eps) & (y > eps) & (y < 1 - eps)
        self.dof_of_vertex = np.full(len(self.vertices), -1, dtype=int)
        self.dof_of_vertex[self.interior_mask] = np.arange(int(self.interior_mask.sum()))
        self.interior_vertices = np.flatnonzero(self.interior_mask)
        self.n_dofs = int(self.interior_mask.sum())
        # per-vertex incident triangle counts, for interiority of carved domains
        self._incident_total = np.zeros(len(self.vertices), dtype=int)
        np.add.at(self._incident_total, self.triangles.ravel(), 1)

    def _validate_geometry(self) -> None:
        p = self.vertices[self.triangles]
        cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
            p[:, 1, 1] - p[:, 0, 1]
        ) * (p[:, 2, 0] - p[:, 0, 0])
        self.areas = 0.5 * cross
        bad = np.flatnonzero(self.areas <= 1e-14)
        if bad.size:
            raise MeshError(f"triangle {bad[0]} is degenerate or negatively oriented")
        edges = {}
        for t, tri in enumerate(self.triangles):
            for a, b in ((0, 1), (1, 2), (2, 0)):
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                edges[key] = edges.get(key, 0) + 1
        if any(count > 2 for count in edges.values()):
            raise MeshError("mesh is not conforming: an edge is shared by >2 triangles")

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BackgroundMesh":
        return cls(np.array(data["vertices"]), np.array(data["triangles"]), data["h"])


def unit_square_mesh(n: int) -> BackgroundMesh:
    """Structured mesh with n x n cells, diagonals along y = x."""
    if n < 2:
        raise MeshError(f"need at least 2 cells per side, got {n}")
    side = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(side, side)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(ix, iy):
        return iy * (n + 1) + ix

    tris = []
    for iy in range(n):
        for ix in range(n):
            a, b = vid(ix, iy), vid(ix + 1, iy)
            c, d = vid(ix + 1, iy + 1), vid(ix, iy + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    return BackgroundMesh(vertices, np.array(tris), 1.0 / n)


class CoefficientField:
    """Symmetric 2x2 coefficient A(x) with a declared ellipticity constant.

    The declared nu is verified against probe directions at every quadrature
    point during assembly: nu |xi|^2 <= xi' A xi <= |xi|^2 / nu.
    """

    def __init__(self, evaluator, nu: float, name: str = "custom"):
        if not 0.0 < nu <= 1.0:
            raise ValueError(f"ellipticity constant must be in (0, 1], got {nu}")
        self.evaluator = evaluator
        self.nu = float(nu)
        self.name = name

    @classmethod
    def identity(cls) -> "CoefficientField":
        eye = np.eye(2)
        return cls(lambda _: eye, nu=1.0, name="identity")

    @classmethod
    def constant(cls, matrix, nu: float) -> "CoefficientField":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (2, 2) or abs(matrix[0, 1] - matrix[1, 0]) > 1e-14:
            raise ValueError("constant coefficient must be a symmetric 2x2 matrix")
        return cls(lambda _: matrix, nu=nu, name="constant")

    @classmethod
    def checker(cls, nu: float, cells: int = 4) -> "CoefficientField":
        """Checkerboard of identity and nu*identity tiles, cells x cells."""
        eye = np.eye(2)

        def evaluate(point):
            ix = int(np.floor(point[0] * cells))
            iy = int(np.floor(point[1] * cells))
            return eye if (ix + iy) % 2 == 0 else nu * eye

        return cls(evaluate, nu=nu, name=f"checker({nu})")

    def sample(self, points: np.ndarray) -> np.ndarray:
        mats = np.array([np.asarray(self.evaluator(p), dtype=float) for p in points])
        if mats.shape[1:] != (2, 2):
            raise ValueError("coefficient evaluator must return 2x2 matrices")
        asym = np.abs(mats[:, 0, 1] - mats[:, 1, 0]).max() if len(mats) else 0.0
        if asym > 1e-12:
            raise ValueError("coefficient matrices must be symmetric")
        directions = np.column_stack([np.cos(_PROBE_ANGLES), np.sin(_PROBE_ANGLES)])
        quad = np.einsum("di,nij,dj->nd", directions, mats, directions)
        if quad.min() < self.nu - 1e-10 or quad.max() > 1.0 / self.nu + 1e-10:
            raise ValueError(
                "declared ellipticity constant violated at a quadrature point: "
                f"range [{quad.min():.6e}, {quad.max():.6e}] vs nu={self.nu}"
            )
        return mats


@dataclass
class DomainSpec:
    """Mesh-conforming polygonal subdomain of the background square.

    kinds: square_shrink (inset eps from the boundary), square_expand
    (outset eps from a base inset), boundary_notch (triangles near an
    anchor on the boundary removed), l_shape (corner square removed),
    element_mask (explicit kept element ids).  eps must be a nonnegative
    multiple of the mesh size; non-conforming values are rejected.
    """

    kind: str
    eps: float = 0.0
    anchor: tuple = (0.5, 1.0)
    base: float = 0.25
    elements: list = field(default_factory=list)

    _KINDS = ("square_shrink", "square_expand", "boundary_notch", "l_shape", "element_mask")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise MeshError(f"unknown domain kind {self.kind!r}")
        if self.eps < 0:
            raise MeshError("eps must be nonnegative")
        if self.kind == "boundary_notch":
            x0, y0 = self.anchor
            on_boundary = (
                abs(x0) < 1e-12 or abs(x0 - 1) < 1e-12 or abs(y0) < 1e-12 or abs(y0 - 1) < 1e-12
            )
            inside = -1e-12 <= x0 <= 1 + 1e-12 and -1e-12 <= y0 <= 1 + 1e-12
            if not (on_boundary and inside):
                raise MeshError(f"notch anchor {self.anchor} must lie on the boundary of D")

    def _check_conforming(self, h: float, value: float, what: str) -> None:
        ratio = value / h
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, abs(ratio)):
            raise MeshError(
                f"{what}={value} is not a multiple of the mesh size h={h}; "
                "non-conforming perturbations are rejected, not approximated"
            )

    def kept_elements(self, mesh: BackgroundMesh) -> np.ndarray:
        """Ids of the triangles making up the domain."""
        if self.kind == "element_mask":
            ids = np.unique(np.asarray(self.elements, dtype=int))
            if ids.size and (ids[0] < 0 or ids[-1] >= mesh.n_triangles):
                raise MeshError("element_mask contains an unknown element id")
            return ids
        self._check_conforming(mesh.h, self.eps, "eps")
        cen = mesh.centroids()
        if self.kind == "square_shrink":
            lo, hi = self.eps, 1.0 - self.eps
            keep = (
                (cen[:, 0] > lo) & (cen[:, 0] < hi) & (cen[:, 1] > lo) & (cen[:, 1] < hi)
            )
        elif self.kind == "square_expand":
            self._check_conforming(mesh.h, self.base, "base")
            if self.eps > self.base + 1e-12:
                raise MeshError(
                    f"expansion eps={self.eps} exceeds the base inset {self.base}"
                )
            lo, hi = self.base - self.eps, 1.0 - self.base + self.eps
            keep = (
                (cen[:, 0] > lo) & (cen[:, 0] < hi) & (cen[:, 1] > lo) & (cen[:, 1] < hi)
            )
        elif self.kind == "boundary_notch":
            keep = np.linalg.norm(cen - np.asarray(self.anchor), axis=1) > self.eps
        elif self.kind == "l_shape":
            keep = ~((cen[:, 0] > 1.0 - self.eps) & (cen[:, 1] > 1.0 - self.eps))
        return np.flatnonzero(keep)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "eps": self.eps}
        if self.kind == "boundary_notch":
            out["anchor"] = list(self.anchor)
        if self.kind == "square_expand":
            out["base"] = self.base
        if self.kind == "element_mask":
            out["elements"] = [int(e) for e in self.elements]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DomainSpec":
        return cls(
            kind=data["kind"],
            eps=data.get("eps", 0.0),
            anchor=tuple(data.get("anchor", (0.5, 1.0))),
            base=data.get("base", 0.25),
            elements=data.get("elements", []),
        )


def _element_matrices(mesh: BackgroundMesh, coeff_mats: np.ndarray):
    """Per-triangle 3x3 stiffness (with coefficients) and mass matrices."""
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns are edges
    inv_jac = np.linalg.inv(jac)
    grads = np.einsum("tji,kj->tki", inv_jac, _REF_GRADS)  # (nt, 3, 2) physical gradients
    a_grads = np.einsum("tij,tkj->tki", coeff_mats, grads)
    stiff = np.einsum("tki,tli->tkl", grads, a_grads) * mesh.areas[:, None, None]
    mass_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    mass = mesh.areas[:, None, None] * mass_ref[None, :, :]
    return stiff, mass


def assemble(mesh: BackgroundMesh, coeff: CoefficientField) -> EnergySpace:
    """Energy space of the background square: P1 stiffness and mass Grams
    on the interior vertices, with the coefficient sampled at centroids."""
    coeff_mats = coeff.sample(mesh.centroids())
    stiff_loc, mass_loc = _element_matrices(mesh, coeff_mats)
    n = mesh.n_dofs
    dofs = mesh.dof_of_vertex[mesh.triangles]  # (nt, 3), -1 for boundary vertices
    stiffness = np.zeros((n, n))
    mass = np.zeros((n, n))
    for i in range(3):
        for j in range(3):
            rows, cols = dofs[:, i], dofs[:, j]
            ok = (rows >= 0) & (cols >= 0)
            np.add.at(stiffness, (rows[ok], cols[ok]), stiff_loc[ok, i, j])
            np.add.at(mass, (rows[ok], cols[ok]), mass_loc[ok, i, j])
    stiffness = 0.5 * (stiffness + stiffness.T)
    mass = 0.5 * (mass + mass.T)
    return EnergySpace(stiffness, mass)


def carve_subspace(space: EnergySpace, mesh: BackgroundMesh, dom: DomainSpec) -> Subspace:
    """Nodal subspace of the functions supported on the domain's interior.

    A vertex is a degree of freedom of the carved space when it is interior
    to D and every triangle incident to it belongs to the domain.
    """
    if space.dim != mesh.n_dofs:
        raise MeshError("energy space does not match the mesh")
    kept = dom.kept_elements(mesh)
    kept_count = np.zeros(len(mesh.vertices), dtype=int)
    np.add.at(kept_count, mesh.triangles[kept].ravel(), 1)
    inside = mesh.interior_mask & (kept_count == mesh._incident_total)
    dof_ids = mesh.dof_of_vertex[inside]
    if dof_ids.size == 0:
        raise MeshError(f"domain {dom.kind}(eps={dom.eps}) has an empty interior")
    return Subspace.nodal(space, dof_ids)


def _vertex_values(mesh: BackgroundMesh, u: np.ndarray) -> np.ndarray:
    """Extend a DOF coefficient vector by zero to all vertices."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_dofs,):
        raise MeshError(f"coefficient vector must have length {mesh.n_dofs}")
    values = np.zeros(len(mesh.vertices))
    values[mesh.interior_vertices] = u
    return values


def gradient_energy(
    space: EnergySpace, mesh: BackgroundMesh, region: np.ndarray, u: np.ndarray
) -> float:
    """Integral of |grad u|^2 over a set of triangles (coefficients ignored)."""
    region = np.asarray(region, dtype=int)
    if region.size and (region.min() < 0 or region.max() >= mesh.n_triangles):
        raise MeshError("region contains an unknown element id")
    values = _vertex_values(mesh, u)
    p = mesh.vertices[mesh.triangles[region]]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    inv_jac = np.linalg.inv(jac)
    grads = np.einsum("tji,kj->tki", inv_jac, _REF_GRADS)
    local = values[mesh.triangles[region]]  # (nt, 3)
    grad_u = np.einsum("tk,tki->ti", local, grads)
    return float(np.sum(mesh.areas[region] * np.einsum("ti,ti->t", grad_u, grad_u)))


def gradient_energy_form(
    space: EnergySpace, mesh: BackgroundMesh, region: np.ndarray, block: np.ndarray
) -> np.ndarray:
    """Quadratic form of the region gradient energy on a block of vectors."""
    region = np.asarray(region, dtype=int)
    block = np.atleast_2d(np.asarray(block, dtype=float))
    if block.shape[0] != mesh.n_dofs:
        block = block.T
    values = np.zeros((len(mesh.vertices), block.shape[1]))
    values[mesh.interior_vertices] = block
    p = mesh.vertices[mesh.triangles[region]]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    inv_jac = np.linalg.inv(jac)
    grads = np.einsum("tji,kj->tki", inv_jac, _REF_GRADS)
    local = values[mesh.triangles[region]]  # (nt, 3, nb)
    grad_u = np.einsum("tkb,tki->tib", local, grads)
    return np.einsum("tib,tic,t->bc", grad_u, grad_u, mesh.areas[region])


def region_area(mesh: BackgroundMesh, region: np.ndarray) -> float:
    return float(mesh.areas[np.asarray(region, dtype=int)].sum())


def symmetric_difference_area(
    mesh: BackgroundMesh, dom1: DomainSpec, dom2: DomainSpec
) -> float:
    """Area of the symmetric difference of two domains (exact, element-wise)."""
    k1 = set(dom1.kept_elements(mesh).tolist())
    k2 = set(dom2.kept_elements(mesh).tolist())
    return region_area(mesh, np.array(sorted(k1 ^ k2), dtype=int)) if k1 ^ k2 else 0.0


def collar_elements(mesh: BackgroundMesh, dom: DomainSpec, q: float = 2.0) -> np.ndarray:
    """Boundary layer of the reference domain matched to a perturbation.

    For global perturbations (square_shrink / square_expand) this is the
    strip of the reference domain within q*eps of its boundary; for local
    ones (boundary_notch / l_shape) it is the part of the reference domain
    within the q*eps neighborhood of the perturbation site.
    """
    if q <= 1.0:
        raise MeshError(f"collar factor q must exceed 1, got {q}")
    cen = mesh.centroids()
    reach = q * dom.eps
    if dom.kind == "square_shrink":
        lo, hi = reach, 1.0 - reach
        inner = (cen[:, 0] > lo) & (cen[:, 0] < hi) & (cen[:, 1] > lo) & (cen[:, 1] < hi)
        collar = ~inner
    elif dom.kind == "square_expand":
        b = dom.base
        in_ref = (
            (cen[:, 0] > b) & (cen[:, 0] < 1 - b) & (cen[:, 1] > b) & (cen[:, 1] < 1 - b)
        )
        lo, hi = b + reach, 1.0 - b - reach
        inner = (cen[:, 0] > lo) & (cen[:, 0] < hi) & (cen[:, 1] > lo) & (cen[:, 1] < hi)
        collar = in_ref & ~inner
    elif dom.kind == "boundary_notch":
        collar = np.linalg.norm(cen - np.asarray(dom.anchor), axis=1) <= reach
    elif dom.kind == "l_shape":
        collar = (cen[:, 0] > 1.0 - reach) & (cen[:, 1] > 1.0 - reach)
    else:
        raise MeshError(f"no collar notion for domain kind {dom.kind!r}")
    ids = np.flatnonzero(collar)
    if ids.size == 0:
        raise MeshError("collar region is empty")
    return ids


def hadamard_slope(
    mesh: BackgroundMesh, space: EnergySpace, eigenpair, shift_profile
) -> float:
    """First-order boundary sensitivity of an eigenvalue of the full square.

    Integrates |normal derivative|^2 times the per-side shift over the four
    sides, recovering the normal derivative by a one-sided difference across
    the first interior vertex layer and integrating with the trapezoid rule.
    The eigenfunction must be L2-normalized.
    """
    lam, phi = eigenpair
    if space.dim != mesh.n_dofs:
        raise MeshError("energy space does not match the mesh")
    norm = float(phi @ space.mass_gram @ phi)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"eigenfunction must be L2-normalized, got |phi|^2={norm:.6e}")
    if np.isscalar(shift_profile):
        sides = [float(shift_profile)] * 4
    else:
        sides = [float(s) for s in shift_profile]
        if len(sides) != 4:
            raise ValueError("shift profile must be a scalar or 4 per-side values")
    values = _vertex_values(mesh, phi)
    n = int(round(1.0 / mesh.h))
    h = mesh.h

    def vid(ix, iy):
        return iy * (n + 1) + ix

    # (boundary vertex, first interior neighbor along the inward normal)
    walks = [
        [(vid(i, 0), vid(i, 1)) for i in range(n + 1)],      # bottom
        [(vid(n, i), vid(n - 1, i)) for i in range(n + 1)],  # right
        [(vid(i, n), vid(i, n - 1)) for i in range(n + 1)],  # top
        [(vid(0, i), vid(1, i)) for i in range(n + 1)],      # left
    ]
    total = 0.0
    for side_value, walk in zip(sides, walks):
        flux_sq = np.array([(values[inner] / h) ** 2 for _, inner in walk])
        weights = np.full(n + 1, h)
        weights[0] = weights[-1] = h / 2.0
        total += side_value * float(weights @ flux_sq)
    return total


def suggested_group_tol(h: float) -> float:
    """Mesh-aware relative gap for eigenvalue grouping (discrete splitting
    of degenerate continuum eigenvalues scales like h^2 relative)."""
    return 10.0 * h * h
