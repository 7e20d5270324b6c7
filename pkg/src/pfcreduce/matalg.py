"""Dense real matrix foundations used by every other module.

Kronecker/Vec algebra, perpendicular projection operators, symmetric
eigendecomposition with a deterministic ordering and sign convention,
subspace geometry, and positive-definite log-determinants.  Everything here
is a pure function of its arguments: identical inputs give bit-identical
outputs, and nothing mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError

# One relative tolerance for every rank decision in the package.
RANK_RTOL = 1e-10

# Eigenvalues within this (relative, floored at 1) are treated as tied when
# fixing a deterministic eigenvector order.
EIG_TIE_TOL = 1e-10

# Reject Kronecker products whose result would exceed this many entries;
# the Vec-form identities are only ever needed at desk scale.
KRON_ELEMENT_BUDGET = 10**8


def as_matrix(A, name: str = "matrix") -> np.ndarray:
    """Validate and return ``A`` as a 2-D float64 array with finite entries."""
    M = np.asarray(A, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise DataError(f"{name} must be a 2-D matrix with at least one row and column")
    if not np.all(np.isfinite(M)):
        raise DataError(f"{name} contains non-finite entries")
    return M


def symmetrize(S: np.ndarray) -> np.ndarray:
    """Average away floating-point asymmetry of a nominally symmetric matrix."""
    return 0.5 * (S + S.T)


def check_symmetric(S, name: str = "matrix", tol: float = 1e-12) -> np.ndarray:
    """Validate symmetry entrywise (relative to each entry, floored at 1)."""
    M = as_matrix(S, name)
    if M.shape[0] != M.shape[1]:
        raise DataError(f"{name} must be square, got {M.shape}")
    bound = tol * np.maximum(1.0, np.abs(M))
    if np.any(np.abs(M - M.T) > bound):
        raise DataError(f"{name} is not symmetric within tolerance {tol:g}")
    return symmetrize(M)


def kron(A, B) -> np.ndarray:
    """Kronecker product with block (i, j) equal to ``A[i, j] * B``."""
    Am = as_matrix(A, "A")
    Bm = as_matrix(B, "B")
    n_out = Am.shape[0] * Bm.shape[0] * Am.shape[1] * Bm.shape[1]
    if n_out > KRON_ELEMENT_BUDGET:
        raise DataError(
            f"kron result would hold {n_out} entries, above the budget of "
            f"{KRON_ELEMENT_BUDGET}; this routine is meant for small checks"
        )
    return np.kron(Am, Bm)


def vec(A) -> np.ndarray:
    """Stack the columns of ``A`` into a single (rows*cols) x 1 column."""
    M = as_matrix(A, "A")
    return M.reshape(-1, 1, order="F").copy()


def ppo(A) -> np.ndarray:
    """Perpendicular projection operator onto the column space of ``A``.

    Rank-deficient input is handled through an SVD; singular values below
    ``RANK_RTOL`` times the largest are treated as zero.
    """
    M = as_matrix(A, "A")
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        return np.zeros((M.shape[0], M.shape[0]))
    r = int(np.sum(s > RANK_RTOL * s[0]))
    Ur = U[:, :r]
    return symmetrize(Ur @ Ur.T)


def matrix_rank(A) -> int:
    """Numerical rank under the package-wide ``RANK_RTOL`` policy."""
    M = as_matrix(A, "A")
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


def apply_canonical_signs(V: np.ndarray) -> np.ndarray:
    """Return a copy of ``V`` with each column's largest-magnitude entry positive.

    Ties in magnitude are broken by the lowest row index.
    """
    W = np.array(V, dtype=float, copy=True)
    for j in range(W.shape[1]):
        i = int(np.argmax(np.abs(W[:, j])))
        if W[i, j] < 0.0:
            W[:, j] = -W[:, j]
    return W


def is_orthonormal(Z, tol: float = 1e-10) -> bool:
    """True when the columns of ``Z`` are orthonormal within ``tol``."""
    M = as_matrix(Z, "Z")
    G = M.T @ M
    return bool(np.max(np.abs(G - np.eye(M.shape[1]))) <= tol)


def require_orthonormal(Z, name: str = "Z", tol: float = 1e-10) -> np.ndarray:
    M = as_matrix(Z, name)
    if M.shape[1] > M.shape[0]:
        raise DataError(f"{name} has more columns than rows ({M.shape})")
    if not is_orthonormal(M, tol):
        raise DataError(f"{name} does not have orthonormal columns within {tol:g}")
    return M


def orthonormalize(M) -> np.ndarray:
    """Orthonormal basis (canonical signs) for the column space of ``M``.

    The input must have full column rank; only the span is preserved.
    """
    A = as_matrix(M, "M")
    Q, R = np.linalg.qr(A)
    if np.min(np.abs(np.diag(R))) <= RANK_RTOL * max(1.0, np.max(np.abs(np.diag(R)))):
        raise NumericalError("columns to orthonormalize are numerically dependent")
    return apply_canonical_signs(Q)


def orthonormal_complement(Z) -> np.ndarray:
    """Orthonormal basis (canonical signs) of the orthogonal complement of C(Z).

    ``Z`` must itself have orthonormal columns.  For a square ``Z`` the
    complement is empty and a q x 0 matrix is returned.
    """
    M = require_orthonormal(Z, "Z")
    q, d = M.shape
    if d == q:
        return np.zeros((q, 0))
    Qfull, _ = np.linalg.qr(M, mode="complete")
    comp = Qfull[:, d:]
    # Re-anchor on the exact input: the complete QR may rotate within C(Z).
    comp = comp - M @ (M.T @ comp)
    comp, _ = np.linalg.qr(comp)
    return apply_canonical_signs(comp)


@dataclass(frozen=True)
class EigDecomp:
    """Full symmetric eigendecomposition, eigenvalues sorted descending.

    ``vectors`` is square with orthonormal, canonically signed columns;
    column ``j`` pairs with ``values[j]``.
    """

    values: np.ndarray
    vectors: np.ndarray


def sym_eig(S) -> EigDecomp:
    """Eigendecomposition of a symmetric matrix with deterministic ordering.

    Eigenvalues come back in non-increasing order.  Eigenvalues that agree
    within ``EIG_TIE_TOL`` (relative, floored at 1) form a tie group whose
    vectors are ordered lexicographically by their canonically signed entries.
    """
    M = check_symmetric(S, "S")
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc
    order = np.argsort(w)[::-1]
    w = w[order]
    V = apply_canonical_signs(V[:, order])

    # Deterministic order inside tie groups.
    q = w.size
    i = 0
    while i < q:
        j = i + 1
        while j < q and abs(w[i] - w[j]) <= EIG_TIE_TOL * max(1.0, abs(w[i])):
            j += 1
        if j - i > 1:
            cols = sorted(range(i, j), key=lambda k: tuple(V[:, k]))
            V[:, i:j] = V[:, cols]
            w[i:j] = w[cols]
        i = j
    return EigDecomp(values=w, vectors=V)


def subspace_distance(A, B) -> float:
    """Normalized projection distance between two equal-rank subspaces.

    Returns ``||P_A - P_B||_F / sqrt(2 d)``: 0 exactly when the column
    spaces agree, 1 when they are orthogonal.
    """
    Am = require_orthonormal(A, "A")
    Bm = require_orthonormal(B, "B")
    if Am.shape != Bm.shape:
        raise DataError(f"subspace bases must share a shape, got {Am.shape} vs {Bm.shape}")
    d = Am.shape[1]
    overlap = np.linalg.norm(Am.T @ Bm, "fro") ** 2
    return float(np.sqrt(max(0.0, 1.0 - overlap / d)))


def logdet_pd(S) -> float:
    """Log-determinant of a symmetric positive definite matrix.

    Raises ``NumericalError`` when the smallest eigenvalue is at or below
    ``1e-12`` times the largest (insufficient data or a degenerate model).
    """
    M = check_symmetric(S, "S")
    w = np.linalg.eigvalsh(M)
    lam_min, lam_max = float(w[0]), float(w[-1])
    if lam_max <= 0.0 or lam_min <= 1e-12 * lam_max:
        raise NumericalError("not positive definite")
    return float(np.sum(np.log(w)))
