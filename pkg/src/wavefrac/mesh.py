"""Mapped quadrilateral meshes.

The mesh is generated from a logically Cartesian grid on a reference rectangle,
pushed through a geometry map, and then stored as plain cell/face arrays so the
discretization code never needs to know about the grid structure.  Cell maps are
bilinear in the mapped corner positions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from . import reference

LEFT, RIGHT, BOTTOM, TOP = 0, 1, 2, 3
SIDE_NAMES = ("left", "right", "bottom", "top")


class Tag(str, Enum):
    NEUMANN = "neumann"      # traction data from a pulse
    DIRICHLET = "dirichlet"  # prescribed velocity
    FREE = "free"            # zero traction
    SLIP = "slip"            # zero normal velocity, zero shear traction


@dataclass(frozen=True)
class GeometryMap:
    """Reference rectangle plus the map onto the physical domain.

    `kind` is ``"rectangle"`` (identity) or ``"curved-bar"``.  `side_tags` gives
    the boundary condition on the images of x1 = lo, x1 = hi, x2 = lo, x2 = hi.
    """

    kind: str = "rectangle"
    x1: tuple[float, float] = (0.0, 1.0)
    x2: tuple[float, float] = (0.0, 1.0)
    side_tags: tuple[Tag, Tag, Tag, Tag] = (Tag.FREE, Tag.FREE, Tag.FREE, Tag.FREE)

    def __post_init__(self):
        if self.kind not in ("rectangle", "curved-bar"):
            raise ValueError(f"unknown geometry kind {self.kind!r}")
        if not (self.x1[1] > self.x1[0] and self.x2[1] > self.x2[0]):
            raise ValueError("reference rectangle must have positive extents")
        object.__setattr__(self, "side_tags", tuple(Tag(t) for t in self.side_tags))

    def __call__(self, ref: np.ndarray) -> np.ndarray:
        ref = np.asarray(ref, dtype=float)
        if self.kind == "rectangle":
            return ref.copy()
        x1, x2 = ref[..., 0], ref[..., 1]
        c, s = np.cos(0.5 * math.pi * x1), np.sin(0.5 * math.pi * x1)
        return np.stack([x1 + x2 * s, c + x2 * c], axis=-1)

    def jacobian(self, ref: np.ndarray) -> np.ndarray:
        ref = np.asarray(ref, dtype=float)
        out = np.zeros(ref.shape[:-1] + (2, 2))
        if self.kind == "rectangle":
            out[..., 0, 0] = out[..., 1, 1] = 1.0
            return out
        x1, x2 = ref[..., 0], ref[..., 1]
        k = 0.5 * math.pi
        c, s = np.cos(k * x1), np.sin(k * x1)
        out[..., 0, 0] = 1 + x2 * k * c
        out[..., 0, 1] = s
        out[..., 1, 0] = -k * s * (1 + x2)
        out[..., 1, 1] = c
        return out

    def grid_shape(self, level: int) -> tuple[int, int]:
        """Cells per reference direction for mesh size h = 2**-level."""
        if level < 0:
            raise ValueError("level must be non-negative")
        h = 2.0 ** -level
        shape = []
        for lo, hi in (self.x1, self.x2):
            n = (hi - lo) / h
            if n < 1 - 1e-12 or abs(n - round(n)) > 1e-9:
                raise ValueError(
                    f"extent {hi - lo} is not a positive multiple of h = 2^-{level}")
            shape.append(int(round(n)))
        return shape[0], shape[1]


@dataclass
class Mesh:
    geometry: GeometryMap
    level: int
    ref_vertices: np.ndarray
    vertices: np.ndarray
    cells: np.ndarray               # (nc, 4) counterclockwise
    face_cells: np.ndarray          # (nf, 2) left, right (-1 on the boundary)
    face_local: np.ndarray          # (nf, 2) local edge index in left/right cell
    face_vertices: np.ndarray       # (nf, 2) ordered as traversed by the left cell
    normals: np.ndarray             # (nf, 2) outward from the left cell
    lengths: np.ndarray             # (nf,)
    face_side: np.ndarray           # (nf,) reference side, -1 for interior faces
    face_tag: list = field(default_factory=list)  # Tag or None per face

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.face_cells)

    @property
    def h(self) -> float:
        return 2.0 ** -self.level

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] < 0)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] >= 0)

    def faces_with_tag(self, tag: Tag) -> np.ndarray:
        return np.array([f for f in self.boundary_faces if self.face_tag[f] == tag], dtype=int)

    def cell_geometry(self, xi: np.ndarray):
        """Physical points, Jacobians and determinants at reference points `xi`.

        Shapes: x (nc, m, 2), J (nc, m, 2, 2), det (nc, m).
        """
        val, grad = reference.q1_shape(xi)
        X = self.vertices[self.cells]                       # (nc, 4, 2)
        x = np.einsum("mi,cid->cmd", val, X)
        J = np.einsum("mik,cid->cmdk", grad, X)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        return x, J, det

    def cell_areas(self) -> np.ndarray:
        pts, w = reference.tensor_gauss(2)
        _, _, det = self.cell_geometry(pts)
        return det @ w

    def edge_normal(self, cell: int, edge: int) -> np.ndarray:
        a = self.vertices[self.cells[cell, edge]]
        b = self.vertices[self.cells[cell, (edge + 1) % 4]]
        d = b - a
        return np.array([d[1], -d[0]]) / np.hypot(*d)


def _build_faces(cells: np.ndarray, nv: int):
    nc = len(cells)
    a = cells.ravel()
    b = np.roll(cells, -1, axis=1).ravel()
    key = np.minimum(a, b).astype(np.int64) * nv + np.maximum(a, b)
    uniq, first, inverse, counts = np.unique(
        key, return_index=True, return_inverse=True, return_counts=True)
    if np.any(counts > 2):
        raise ValueError("non-manifold mesh: an edge is shared by more than two cells")
    nf = len(uniq)
    face_cells = -np.ones((nf, 2), dtype=int)
    face_local = -np.ones((nf, 2), dtype=int)
    face_cells[:, 0] = first // 4
    face_local[:, 0] = first % 4
    slots = np.arange(nc * 4)
    second = slots != first[inverse]
    face_cells[inverse[second], 1] = slots[second] // 4
    face_local[inverse[second], 1] = slots[second] % 4
    face_vertices = np.column_stack([a[first], b[first]])
    return face_cells, face_local, face_vertices


def _assemble(geometry: GeometryMap, level: int, ref_vertices: np.ndarray,
              cells: np.ndarray, side_of_face) -> Mesh:
    vertices = geometry(ref_vertices)
    face_cells, face_local, face_vertices = _build_faces(cells, len(vertices))
    d = vertices[face_vertices[:, 1]] - vertices[face_vertices[:, 0]]
    lengths = np.hypot(d[:, 0], d[:, 1])
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]
    face_side = -np.ones(len(face_cells), dtype=int)
    bnd = np.flatnonzero(face_cells[:, 1] < 0)
    face_side[bnd] = side_of_face(bnd, face_vertices)
    face_tag = [None] * len(face_cells)
    for f in bnd:
        face_tag[f] = geometry.side_tags[face_side[f]]
    mesh = Mesh(geometry, level, ref_vertices, vertices, cells, face_cells, face_local,
                face_vertices, normals, lengths, face_side, face_tag)
    _check_jacobians(mesh)
    return mesh


def _check_jacobians(mesh: Mesh) -> None:
    pts, _ = reference.tensor_gauss(3)
    pts = np.vstack([pts, reference.CORNERS])
    _, _, det = mesh.cell_geometry(pts)
    if np.any(det <= 0):
        bad = np.unique(np.nonzero(det <= 0)[0])
        raise ValueError(f"non-positive Jacobian in {len(bad)} cells (first: {bad[0]})")


def build_mesh(geometry: GeometryMap, level: int) -> Mesh:
    """Uniform grid of mesh size 2**-level on the reference rectangle, mapped."""
    n1, n2 = geometry.grid_shape(level)
    s1 = np.linspace(*geometry.x1, n1 + 1)
    s2 = np.linspace(*geometry.x2, n2 + 1)
    X1, X2 = np.meshgrid(s1, s2, indexing="xy")
    ref = np.column_stack([X1.ravel(), X2.ravel()])
    idx = np.arange((n1 + 1) * (n2 + 1)).reshape(n2 + 1, n1 + 1)
    cells = np.column_stack([
        idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel(),
        idx[1:, 1:].ravel(), idx[1:, :-1].ravel()])

    def side_of_face(bnd, fv):
        mid = 0.5 * (ref[fv[bnd, 0]] + ref[fv[bnd, 1]])
        side = np.full(len(bnd), -1)
        tol = 1e-12 * max(geometry.x1[1] - geometry.x1[0], geometry.x2[1] - geometry.x2[0])
        side[np.abs(mid[:, 0] - geometry.x1[0]) < tol] = LEFT
        side[np.abs(mid[:, 0] - geometry.x1[1]) < tol] = RIGHT
        side[np.abs(mid[:, 1] - geometry.x2[0]) < tol] = BOTTOM
        side[np.abs(mid[:, 1] - geometry.x2[1]) < tol] = TOP
        return side

    return _assemble(geometry, level, ref, cells, side_of_face)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every cell into four; new vertices are mapped through the geometry."""
    nv, nf = mesh.n_vertices, mesh.n_faces
    fv = mesh.face_vertices
    edge_mid = 0.5 * (mesh.ref_vertices[fv[:, 0]] + mesh.ref_vertices[fv[:, 1]])
    centers = mesh.ref_vertices[mesh.cells].mean(axis=1)
    ref = np.vstack([mesh.ref_vertices, edge_mid, centers])

    # face index of each (cell, local edge)
    cell_edge_face = np.empty((mesh.n_cells, 4), dtype=int)
    for side in (0, 1):
        ok = mesh.face_cells[:, side] >= 0
        cell_edge_face[mesh.face_cells[ok, side], mesh.face_local[ok, side]] = np.flatnonzero(ok)
    mid = nv + cell_edge_face
    ctr = nv + nf + np.arange(mesh.n_cells)
    children = []
    for i in range(4):
        children.append(np.column_stack(
            [mesh.cells[:, i], mid[:, i], ctr, mid[:, (i - 1) % 4]]))
    cells = np.stack(children, axis=1).reshape(-1, 4)

    def side_of_face(bnd, child_fv):
        # every child boundary edge joins one old vertex and one parent-edge midpoint
        parent = np.maximum(child_fv[bnd, 0], child_fv[bnd, 1]) - nv
        return mesh.face_side[parent]

    return _assemble(mesh.geometry, mesh.level + 1, ref, cells, side_of_face)


def cell_quadrature(mesh: Mesh, cell: int, n: int):
    """Mapped n x n Gauss rule on one cell: physical points and weights."""
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell {cell} out of range")
    pts, w = reference.tensor_gauss(n)
    val, grad = reference.q1_shape(pts)
    X = mesh.vertices[mesh.cells[cell]]
    J = np.einsum("mik,id->mdk", grad, X)
    det = np.linalg.det(J)
    return val @ X, w * det


def face_quadrature(mesh: Mesh, face: int, n: int):
    """n-point Gauss rule on a straight face: physical points and weights."""
    if not 0 <= face < mesh.n_faces:
        raise IndexError(f"face {face} out of range")
    s, w = reference.gauss(n)
    s = 0.5 * (s + 1)
    a, b = mesh.vertices[mesh.face_vertices[face]]
    return a + s[:, None] * (b - a), 0.5 * w * mesh.lengths[face]


def mapped_area(geometry: GeometryMap, n: int = 40) -> float:
    """Area of the exact mapped domain by Gauss quadrature of det(D phi)."""
    x, w = reference.gauss(n)
    u1 = 0.5 * (geometry.x1[1] - geometry.x1[0])
    u2 = 0.5 * (geometry.x2[1] - geometry.x2[0])
    p1 = geometry.x1[0] + u1 * (x + 1)
    p2 = geometry.x2[0] + u2 * (x + 1)
    P1, P2 = np.meshgrid(p1, p2, indexing="ij")
    J = geometry.jacobian(np.stack([P1, P2], axis=-1))
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    return float(np.einsum("i,j,ij->", w, w, np.abs(det)) * u1 * u2)


def curved_bar(level: int, half_width: float = 0.03125,
               end_tag: Tag = Tag.NEUMANN, side_tag: Tag = Tag.FREE) -> Mesh:
    geo = GeometryMap("curved-bar", (-0.5, 0.5), (-half_width, half_width),
                      (end_tag, end_tag, side_tag, side_tag))
    return build_mesh(geo, level)
