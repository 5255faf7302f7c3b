"""Eigenvalue counting and eigenpair computation for the pencil (A, W).

The headline quantity, the number of negative eigenvalues, is computed
from the inertia of a symmetric factorization of ``A + shift W`` and
never touches an iterative eigensolver.  Eigenpairs use a dense solver
below ``DENSE_LIMIT`` vertices and shift-invert Lanczos above it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .schrodinger import SchrodingerSystem

DENSE_LIMIT = 2000
DEFAULT_SHIFT_FRACTION = 1e-9


class FactorizationError(RuntimeError):
    """Symmetric factorization hit a (near-)singular pivot; retry with a nudged shift."""


@dataclass
class SpectralResult:
    """Lowest eigenpairs of (A, W), ascending and W-orthonormal."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column k is the eigenvector of eigenvalues[k]
    k_requested: int
    residual_norms: np.ndarray
    valid: bool = True
    message: str = ""


def spectral_scale(system: SchrodingerSystem) -> float:
    """Gershgorin-type bound on |eigenvalues| of (A, W); used to scale tolerances."""
    row_abs = np.asarray(np.abs(system.matrix).sum(axis=1)).ravel()
    return float(np.max(row_abs / system.weights))


def _negative_pivots_sparse(B: sp.csc_matrix) -> int:
    """Inertia via SuperLU in symmetric mode (diagonal pivoting).

    With a symmetric fill-reducing permutation and a zero diagonal-pivot
    threshold the factorization is a permuted LDL^T, so Sylvester's law
    gives the negative-eigenvalue count from the signs of diag(U).
    """
    try:
        lu = spla.splu(
            B,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:  # "Factor is exactly singular"
        raise FactorizationError(str(exc)) from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        # off-diagonal pivot was forced; the product is no longer a congruence
        raise FactorizationError("row/column permutations differ (pivot breakdown)")
    d = lu.U.diagonal()
    dmax = np.max(np.abs(d))
    if dmax == 0 or np.min(np.abs(d)) < 1e-13 * dmax:
        raise FactorizationError("near-singular pivot in LDL^T")
    return int(np.sum(d < 0))


def count_negative(system: SchrodingerSystem, shift: float | None = None) -> int:
    """Number of eigenvalues of (A, W) strictly below ``-shift``.

    ``shift`` is the guard band against the exactly-zero eigenvalues that
    appear at constrained maximizers; it defaults to a tiny fraction of
    the spectral scale.  The count is the inertia of ``A + shift W``; on
    factorization breakdown the shift is nudged and the factorization
    retried a few times before giving up.
    """
    if shift is None:
        shift = DEFAULT_SHIFT_FRACTION * spectral_scale(system)
    if shift < 0:
        raise ValueError(f"shift must be nonnegative, got {shift}")
    W = system.weight_matrix()
    scale = spectral_scale(system)
    attempt_shift = float(shift)
    last_error: FactorizationError | None = None
    for attempt in range(6):
        B = (system.matrix + attempt_shift * W).tocsc()
        try:
            return _negative_pivots_sparse(B)
        except FactorizationError as exc:
            last_error = exc
            # nudge upward only: stays on the same side of any exact zero
            attempt_shift = attempt_shift + (2.0**attempt) * 1e-12 * max(scale, 1.0)
    raise FactorizationError(
        f"inertia count failed after retries (last shift {attempt_shift}): {last_error}"
    )


def _residuals(system: SchrodingerSystem, vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    A = system.matrix
    w = system.weights
    res = np.empty(vals.size)
    for i in range(vals.size):
        u = vecs[:, i]
        wu = w * u
        res[i] = np.linalg.norm(A @ u - vals[i] * wu) / np.linalg.norm(wu)
    return res


def lowest_eigenpairs(
    system: SchrodingerSystem,
    k: int,
    tol: float = 1e-10,
    seed: int = 0,
) -> SpectralResult:
    """k smallest eigenpairs of (A, W), W-orthonormal, ascending.

    Deterministic for a fixed ``seed`` (it seeds the Lanczos start
    vector).  Below ``DENSE_LIMIT`` vertices a dense symmetric solver is
    used instead; non-convergence of the sparse path returns a partial
    result flagged ``valid=False`` rather than raising.
    """
    n = system.size
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= n:
        raise ValueError(f"k = {k} must be below the vertex count {n}")
    w = system.weights
    if n < DENSE_LIMIT:
        A = system.matrix.toarray()
        vals, vecs = la.eigh(A, np.diag(w), subset_by_index=[0, k - 1])
        return SpectralResult(
            eigenvalues=vals,
            eigenvectors=vecs,
            k_requested=k,
            residual_norms=_residuals(system, vals, vecs),
        )

    vals, y, valid, message = _block_inverse_iteration(system, k, tol, seed)
    d = 1.0 / np.sqrt(w)
    vecs = d[:, None] * y
    # exact W-normalization (the similarity transform is only rounding-exact)
    norms = np.sqrt(np.einsum("ij,ij->j", vecs, w[:, None] * vecs))
    vecs = vecs / norms
    return SpectralResult(
        eigenvalues=vals,
        eigenvectors=vecs,
        k_requested=k,
        residual_norms=_residuals(system, vals, vecs) if vals.size else np.empty(0),
        valid=valid,
        message=message,
    )


def _block_inverse_iteration(
    system: SchrodingerSystem,
    k: int,
    tol: float,
    seed: int,
    maxiter: int = 300,
):
    """Seeded block inverse iteration with Rayleigh-Ritz on (A, W).

    Works on the symmetrized standard form M = W^(-1/2) A W^(-1/2) with a
    single factorization of M - sigma*I, sigma strictly below the
    spectrum.  The block is wider than k so that exactly degenerate
    clusters (ubiquitous on symmetric meshes) are resolved in full.
    """
    n = system.size
    d = 1.0 / np.sqrt(system.weights)
    D = sp.diags(d)
    M = (D @ system.matrix @ D).tocsr()
    vmax = float(np.max(system.potential.values)) if system.potential.size else 0.0
    sigma = -(max(vmax, 0.0) + 2.0)  # lambda_min >= -max(V)+ since S is PSD
    lu = spla.splu((M - sigma * sp.identity(n, format="csr")).tocsc())

    width = min(n - 1, k + max(8, k // 2))
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, width))
    scale = max(abs(sigma), float(np.abs(M).sum(axis=1).max()))
    vals = np.zeros(width)
    for _ in range(maxiter):
        X, _ = np.linalg.qr(lu.solve(X))
        H = X.T @ (M @ X)
        H = 0.5 * (H + H.T)
        vals, Z = la.eigh(H)
        X = X @ Z
        R = M @ X[:, :k] - X[:, :k] * vals[:k]
        if float(np.max(np.linalg.norm(R, axis=0))) <= tol * scale:
            return vals[:k], X[:, :k], True, ""
    return vals[:k], X[:, :k], False, f"block iteration not converged in {maxiter} sweeps"


def lambda_k(system: SchrodingerSystem, k: int, tol: float = 1e-10, seed: int = 0) -> float:
    """k-th smallest eigenvalue of (A, W) (1-indexed, multiplicity counted)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    res = lowest_eigenpairs(system, k, tol=tol, seed=seed)
    if not res.valid:
        raise FactorizationError(f"eigensolver failed: {res.message}")
    return float(res.eigenvalues[k - 1])


def subspace_sup_rayleigh(system: SchrodingerSystem, basis: np.ndarray) -> float:
    """Supremum of the Rayleigh quotient over the span of the basis columns."""
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.shape[0] == system.size and basis.ndim == 2:
        B = basis
    else:
        B = basis.T
    if B.shape[0] != system.size:
        raise ValueError("basis rows must match the vertex count")
    Ar = B.T @ (system.matrix @ B)
    Wr = B.T @ (system.weights[:, None] * B)
    vals = la.eigh(Ar, Wr, eigvals_only=True)
    return float(vals[-1])


def minmax_gap(
    system: SchrodingerSystem,
    k: int,
    trials: int,
    seed: int = 0,
) -> float:
    """Minimum over random k-dimensional subspaces of (sup Rayleigh) - lambda_k.

    The minmax principle makes the result nonnegative up to solver
    tolerance, and it approaches zero when a trial subspace approaches
    the span of the first k eigenvectors.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    lam_k = lambda_k(system, k, seed=seed)
    rng = np.random.default_rng(seed)
    best = np.inf
    for _ in range(trials):
        B = rng.standard_normal((system.size, k))
        best = min(best, subspace_sup_rayleigh(system, B) - lam_k)
    return float(best)
