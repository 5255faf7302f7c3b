"""Discrete models of closed Riemannian manifolds.

Two discretization families are supported: periodic tensor grids
(flat tori in dimension 2 or 3) and closed triangulated surfaces
embedded in 3-space.  Every mesh carries per-vertex measure weights
``w_v > 0`` that play the role of the Riemannian measure; their sum is
the total volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

MAX_SUBDIVISIONS = 7


class MeshFormatError(ValueError):
    """File could not be parsed as the documented OFF subset."""


class OpenSurfaceError(ValueError):
    """Triangulation is not a closed 2-manifold (boundary or non-manifold edge)."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FlatTorusMesh:
    """Uniform periodic grid on a rectangular torus of dimension 2 or 3."""

    grid_shape: tuple[int, ...]
    side_lengths: tuple[float, ...]
    measure_weights: np.ndarray

    kind = "flat_torus"

    @property
    def dim(self) -> int:
        return len(self.grid_shape)

    @property
    def vertex_count(self) -> int:
        return int(np.prod(self.grid_shape))

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(L / m for m, L in zip(self.grid_shape, self.side_lengths))

    @property
    def volume(self) -> float:
        return float(np.sum(self.measure_weights))

    def coordinates(self) -> np.ndarray:
        """Grid-point coordinates, shape (vertex_count, dim), C-order indexing."""
        axes = [h * np.arange(m) for m, h in zip(self.grid_shape, self.spacings)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)


@dataclass(frozen=True)
class TriangleSurfaceMesh:
    """Closed triangulated surface in R^3 with barycentric-lumped vertex areas."""

    vertices: np.ndarray
    triangles: np.ndarray
    measure_weights: np.ndarray
    triangle_areas: np.ndarray
    edge_count: int

    kind = "triangle_surface"
    dim = 2

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    @property
    def volume(self) -> float:
        return float(np.sum(self.measure_weights))

    def coordinates(self) -> np.ndarray:
        return self.vertices


ManifoldMesh = Union[FlatTorusMesh, TriangleSurfaceMesh]


@dataclass(frozen=True)
class CurvatureField:
    """Per-vertex Gauss curvature and (surface-only) mean curvature."""

    gauss: np.ndarray
    mean: np.ndarray


def build_flat_torus(dims: Sequence[tuple[int, float]]) -> FlatTorusMesh:
    """Build a uniform grid on the flat torus with the given axes.

    Parameters
    ----------
    dims : sequence of (grid_size, side_length)
        One entry per axis; two or three axes are supported.  Each grid
        size must be at least 4 and each side length positive.

    Returns
    -------
    FlatTorusMesh
        Mesh whose vertex weights are all equal to the grid-cell volume,
        so that the total measure is the product of the side lengths.
    """
    dims = list(dims)
    if not 2 <= len(dims) <= 3:
        raise ValueError(f"flat torus needs 2 or 3 axes, got {len(dims)}")
    shape = []
    sides = []
    for m, L in dims:
        if int(m) != m or int(m) < 4:
            raise ValueError(f"grid size must be an integer >= 4, got {m}")
        if not (L > 0):
            raise ValueError(f"side length must be positive, got {L}")
        shape.append(int(m))
        sides.append(float(L))
    n = int(np.prod(shape))
    cell = 1.0
    for m, L in zip(shape, sides):
        cell *= L / m
    w = _freeze(np.full(n, cell))
    return FlatTorusMesh(tuple(shape), tuple(sides), w)


# Regular icosahedron: 12 vertices on circumscribed sphere, 20 CCW-outward faces.
_PHI = (1.0 + math.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        [-1.0, _PHI, 0.0], [1.0, _PHI, 0.0], [-1.0, -_PHI, 0.0], [1.0, -_PHI, 0.0],
        [0.0, -1.0, _PHI], [0.0, 1.0, _PHI], [0.0, -1.0, -_PHI], [0.0, 1.0, -_PHI],
        [_PHI, 0.0, -1.0], [_PHI, 0.0, 1.0], [-_PHI, 0.0, -1.0], [-_PHI, 0.0, 1.0],
    ]
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [5, 4, 9], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def build_icosphere(subdivisions: int, radius: float) -> TriangleSurfaceMesh:
    """Subdivided icosahedron projected onto the sphere of the given radius.

    ``subdivisions`` quadrisects every face that many times, giving
    ``10 * 4**s + 2`` vertices.  Faces stay counter-clockwise when seen
    from outside, so normals point outward.
    """
    if int(subdivisions) != subdivisions or subdivisions < 0:
        raise ValueError(f"subdivisions must be a nonnegative integer, got {subdivisions}")
    if subdivisions > MAX_SUBDIVISIONS:
        raise ValueError(f"subdivisions capped at {MAX_SUBDIVISIONS}, got {subdivisions}")
    if not (radius > 0):
        raise ValueError(f"radius must be positive, got {radius}")

    verts = [v / np.linalg.norm(v) * radius for v in _ICO_VERTS]
    faces = [tuple(f) for f in _ICO_FACES]

    for _ in range(int(subdivisions)):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            idx = midpoint.get(key)
            if idx is None:
                p = verts[i] + verts[j]
                p = p / np.linalg.norm(p) * radius
                verts.append(p)
                idx = len(verts) - 1
                midpoint[key] = idx
            return idx

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces

    return _build_surface(np.asarray(verts, dtype=float), np.asarray(faces, dtype=np.int64))


def load_mesh(path: str | Path) -> TriangleSurfaceMesh:
    """Parse an OFF file (triangle faces only) into a validated closed surface.

    The accepted format is line-oriented: a header line ``OFF``, a counts
    line ``V F E``, then ``V`` lines of vertex coordinates and ``F`` lines
    ``3 i j k`` of zero-based triangle indices.  Blank lines are skipped.

    Raises
    ------
    MeshFormatError
        On any syntactic problem, including non-triangle faces.
    OpenSurfaceError
        If some edge does not have exactly two incident triangles.
    """
    text = Path(path).read_text()
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise MeshFormatError(f"{path}: empty file")
    if lines[0] != "OFF":
        raise MeshFormatError(f"{path}: missing OFF header")
    if len(lines) < 2:
        raise MeshFormatError(f"{path}: missing counts line")
    counts = lines[1].split()
    if len(counts) < 2:
        raise MeshFormatError(f"{path}: counts line needs vertex and face counts")
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except ValueError as exc:
        raise MeshFormatError(f"{path}: bad counts line {lines[1]!r}") from exc
    body = lines[2:]
    if len(body) != nv + nf:
        raise MeshFormatError(
            f"{path}: expected {nv} vertex and {nf} face lines, found {len(body)}"
        )

    verts = np.empty((nv, 3))
    for i, ln in enumerate(body[:nv]):
        parts = ln.split()
        if len(parts) != 3:
            raise MeshFormatError(f"{path}: vertex line {i} is not 'x y z': {ln!r}")
        try:
            verts[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise MeshFormatError(f"{path}: bad vertex line {ln!r}") from exc
    if not np.all(np.isfinite(verts)):
        raise MeshFormatError(f"{path}: non-finite vertex coordinate")

    tris = np.empty((nf, 3), dtype=np.int64)
    for i, ln in enumerate(body[nv:]):
        parts = ln.split()
        if not parts or parts[0] != "3":
            raise MeshFormatError(f"{path}: face line {i} is not a triangle: {ln!r}")
        if len(parts) != 4:
            raise MeshFormatError(f"{path}: face line {i} needs exactly 3 indices: {ln!r}")
        try:
            tris[i] = [int(p) for p in parts[1:]]
        except ValueError as exc:
            raise MeshFormatError(f"{path}: bad face line {ln!r}") from exc
    if tris.size and (tris.min() < 0 or tris.max() >= nv):
        raise MeshFormatError(f"{path}: face index out of range")

    return _build_surface(verts, tris)


def _build_surface(vertices: np.ndarray, triangles: np.ndarray) -> TriangleSurfaceMesh:
    """Validate and assemble a closed triangle surface."""
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshFormatError("vertices must be an (n, 3) array")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshFormatError("triangles must be an (f, 3) array")
    if vertices.shape[0] < 4:
        raise MeshFormatError("a closed surface needs at least 4 vertices")
    if (
        (triangles[:, 0] == triangles[:, 1])
        | (triangles[:, 1] == triangles[:, 2])
        | (triangles[:, 0] == triangles[:, 2])
    ).any():
        raise MeshFormatError("degenerate face with repeated vertex index")

    # closed-manifold check: every undirected edge in exactly 2 triangles
    edges = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    if (counts == 1).any():
        bad = uniq[counts == 1][0]
        raise OpenSurfaceError(f"boundary edge {tuple(bad)}: surface is not closed")
    if (counts > 2).any():
        bad = uniq[counts > 2][0]
        raise OpenSurfaceError(f"edge {tuple(bad)} shared by more than two triangles")

    areas = _triangle_areas(vertices, triangles)
    if (areas <= 0).any():
        raise MeshFormatError("zero-area triangle")

    w = np.zeros(vertices.shape[0])
    np.add.at(w, triangles.ravel(), np.repeat(areas / 3.0, 3))
    if (w <= 0).any():
        raise MeshFormatError("isolated vertex with zero measure weight")

    return TriangleSurfaceMesh(
        vertices=_freeze(np.ascontiguousarray(vertices, dtype=float)),
        triangles=_freeze(np.ascontiguousarray(triangles, dtype=np.int64)),
        measure_weights=_freeze(w),
        triangle_areas=_freeze(areas),
        edge_count=len(uniq),
    )


def _triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def _corner_angles(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Interior angles, shape (triangle_count, 3), one per corner."""
    p = vertices[triangles]  # (F, 3, 3)
    angles = np.empty((triangles.shape[0], 3))
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        cosang = np.einsum("ij,ij->i", u, v) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
        )
        angles[:, k] = np.arccos(np.clip(cosang, -1.0, 1.0))
    return angles


def cotangent_stiffness(mesh: TriangleSurfaceMesh) -> sp.csr_matrix:
    """Cotangent-weight Dirichlet form of a triangle surface.

    Symmetric, zero row sums; the quadratic form is the Dirichlet energy
    of the piecewise-linear interpolant, hence positive semidefinite even
    when obtuse triangles produce negative edge weights.
    """
    if mesh.kind != "triangle_surface":
        raise ValueError("cotangent stiffness is defined for triangle surfaces only")
    tris = mesh.triangles
    angles = _corner_angles(mesh.vertices, tris)
    # half-cotangent at the corner opposite each edge
    half_cot = 0.5 / np.tan(angles)
    rows, cols, vals = [], [], []
    for k in range(3):
        i = tris[:, (k + 1) % 3]
        j = tris[:, (k + 2) % 3]
        wk = half_cot[:, k]
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-wk, -wk, wk, wk]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    n = mesh.vertex_count
    S = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    S.sum_duplicates()
    return S


def vertex_normals(mesh: TriangleSurfaceMesh) -> np.ndarray:
    """Area-weighted vertex normals; outward when faces are CCW from outside."""
    a = mesh.vertices[mesh.triangles[:, 0]]
    b = mesh.vertices[mesh.triangles[:, 1]]
    c = mesh.vertices[mesh.triangles[:, 2]]
    face_n = np.cross(b - a, c - a)  # length = 2 * area
    normals = np.zeros_like(mesh.vertices)
    for k in range(3):
        np.add.at(normals, mesh.triangles[:, k], face_n)
    norms = np.linalg.norm(normals, axis=1)
    norms[norms == 0] = 1.0
    return normals / norms[:, None]


def curvature(mesh: ManifoldMesh) -> CurvatureField:
    """Discrete Gauss and mean curvature of a closed triangle surface.

    Gauss curvature is the angle defect divided by the vertex measure
    weight, which makes the weighted total exactly ``2 * pi * chi`` up
    to rounding.  Mean curvature comes from the cotangent mean-curvature
    normal, signed against the outward vertex normal (positive on a
    sphere with outward orientation).
    """
    if mesh.kind != "triangle_surface":
        raise ValueError(
            "curvature needs an embedded triangle surface; flat tori are "
            "intrinsically flat (use a zero field)"
        )
    tris = mesh.triangles
    angles = _corner_angles(mesh.vertices, tris)
    angle_sum = np.zeros(mesh.vertex_count)
    np.add.at(angle_sum, tris.ravel(), angles.ravel())
    defect = 2.0 * np.pi - angle_sum
    gauss = defect / mesh.measure_weights

    S = cotangent_stiffness(mesh)
    mean_normal = S @ mesh.vertices  # approx w_v * 2H * outward normal
    normals = vertex_normals(mesh)
    mean = np.einsum("ij,ij->i", mean_normal, normals) / (2.0 * mesh.measure_weights)
    return CurvatureField(gauss=_freeze(gauss), mean=_freeze(mean))


def euler_characteristic(mesh: TriangleSurfaceMesh) -> int:
    """V - E + F of a triangle surface."""
    if mesh.kind != "triangle_surface":
        raise ValueError("Euler characteristic is computed for triangle surfaces only")
    return mesh.vertex_count - mesh.edge_count + mesh.triangle_count
