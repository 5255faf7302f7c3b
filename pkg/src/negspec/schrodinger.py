"""Assembly of the discrete Schrodinger operator -Laplacian - V.

The operator is represented as the symmetric pencil (A, W) with
``A = S - W diag(V)``: S is the stiffness (weak-form Laplacian), W the
diagonal matrix of measure weights.  The generalized Rayleigh quotient
``(u^T A u) / (u^T W u)`` is then the exact discrete counterpart of
``(int |grad u|^2 - int V u^2) / int u^2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .geometry import FlatTorusMesh, ManifoldMesh, cotangent_stiffness


class ObtuseTriangleWarning(UserWarning):
    """Some cotangent weight is negative (obtuse triangle); kept, not clamped."""


@dataclass(frozen=True)
class Potential:
    """Bounded per-vertex potential with an explicit L-infinity cap."""

    values: np.ndarray
    cap: float

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("potential values must be a 1-D array")
        if not (self.cap > 0):
            raise ValueError(f"cap must be positive, got {self.cap}")
        if vals.size and np.max(np.abs(vals)) > self.cap:
            raise ValueError(
                f"potential exceeds cap: max |V| = {np.max(np.abs(vals))} > {self.cap}"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "cap", float(self.cap))

    @classmethod
    def constant(cls, mesh: ManifoldMesh, value: float, cap: Optional[float] = None) -> "Potential":
        if cap is None:
            cap = max(abs(value), 1.0)
        return cls(np.full(mesh.vertex_count, float(value)), cap)

    @classmethod
    def from_values(cls, mesh: ManifoldMesh, values, cap: Optional[float] = None) -> "Potential":
        vals = np.asarray(values, dtype=float)
        if vals.shape != (mesh.vertex_count,):
            raise ValueError(
                f"potential length {vals.shape} does not match vertex count {mesh.vertex_count}"
            )
        if cap is None:
            amax = float(np.max(np.abs(vals))) if vals.size else 0.0
            cap = amax if amax > 0 else 1.0
        return cls(vals, cap)

    @property
    def size(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class SchrodingerSystem:
    """Assembled pencil (A, W) for one mesh and one potential."""

    stiffness: sp.csr_matrix
    weights: np.ndarray
    potential: Potential
    matrix: sp.csr_matrix  # A = S - W diag(V)
    mesh: ManifoldMesh
    negative_cotan: bool = False

    @property
    def size(self) -> int:
        return self.weights.size

    def weight_matrix(self) -> sp.dia_matrix:
        return sp.diags(self.weights)


def _torus_stiffness(mesh: FlatTorusMesh) -> sp.csr_matrix:
    """Periodic (2n+1)-point finite-difference Laplacian scaled by cell measure."""
    cell = float(np.prod(mesh.spacings))
    S = None
    for axis, (m, h) in enumerate(zip(mesh.grid_shape, mesh.spacings)):
        ones = np.ones(m)
        T = sp.diags([2 * ones, -ones[:-1], -ones[:-1]], [0, 1, -1]).tolil()
        T[0, m - 1] += -1.0
        T[m - 1, 0] += -1.0
        T = (cell / h**2) * T.tocsr()
        term = None
        for a, ma in enumerate(mesh.grid_shape):
            block = T if a == axis else sp.identity(ma, format="csr")
            term = block if term is None else sp.kron(term, block, format="csr")
        S = term if S is None else S + term
    S.sum_duplicates()
    return S.tocsr()


def stiffness_matrix(mesh: ManifoldMesh) -> sp.csr_matrix:
    """Weak-form discrete Laplacian: symmetric, zero row sums.

    Flat tori get the standard periodic finite-difference stencil scaled
    by the cell measure; triangle surfaces get the cotangent Laplacian.
    A warning is emitted when obtuse triangles make some off-diagonal
    weight negative (the matrix is kept exact, see ``ObtuseTriangleWarning``).
    """
    if mesh.kind == "flat_torus":
        return _torus_stiffness(mesh)
    S = cotangent_stiffness(mesh)
    if _has_negative_cotan(S):
        warnings.warn(
            "negative cotangent weight (obtuse triangle); kept without clamping",
            ObtuseTriangleWarning,
            stacklevel=2,
        )
    return S


def _has_negative_cotan(S: sp.csr_matrix) -> bool:
    coo = S.tocoo()
    off = coo.row != coo.col
    return bool(np.any(coo.data[off] > 1e-14))


def assemble(mesh: ManifoldMesh, potential: Potential) -> SchrodingerSystem:
    """Assemble A = S - W diag(V) against the measure weights W."""
    if potential.size != mesh.vertex_count:
        raise ValueError(
            f"potential has {potential.size} values for {mesh.vertex_count} vertices"
        )
    w = mesh.measure_weights
    if mesh.kind == "flat_torus":
        S = _torus_stiffness(mesh)
        neg = False
    else:
        S = cotangent_stiffness(mesh)
        neg = _has_negative_cotan(S)
    A = (S - sp.diags(w * potential.values)).tocsr()
    return SchrodingerSystem(
        stiffness=S,
        weights=w,
        potential=potential,
        matrix=A,
        mesh=mesh,
        negative_cotan=neg,
    )
