"""Dense symmetric linear algebra shared by every selection method.

All routines work on plain float64 numpy arrays. Covariance and Gram
matrices estimated from data can be numerically singular, so every
inversion goes through the same jitter policy: if the smallest eigenvalue
of A falls below 1e-12 * trace(A)/n, add 1e-10 * trace(A)/n to the
diagonal before factorizing.
"""

from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, InvalidInputError, SingularMatrixError

# jitter policy thresholds, relative to the mean diagonal trace(A)/n
JITTER_TRIGGER = 1e-12
JITTER_SIZE = 1e-10

# conjugate gradient iteration cap, as a multiple of the dimension
CG_CAP_FACTOR = 10


class EigenPair(NamedTuple):
    values: np.ndarray   # ascending
    vectors: np.ndarray  # orthonormal columns, values[k] <-> vectors[:, k]


class PowerResult(NamedTuple):
    value: float
    converged: bool
    iterations: int


def check_symmetric(M, name="matrix"):
    """Validate a square symmetric finite matrix and return it as float64."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {M.shape}")
    if M.shape[0] < 1:
        raise InvalidInputError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    if not np.array_equal(M, M.T):
        # tolerate roundoff-level asymmetry from accumulated products
        if np.abs(M - M.T).max() > 1e-10 * max(1.0, np.abs(M).max()):
            raise InvalidInputError(f"{name} is not symmetric")
        M = (M + M.T) / 2.0
    return M


def sym_eig(M) -> EigenPair:
    """Eigendecomposition of a symmetric matrix.

    Returns ascending eigenvalues and orthonormal eigenvectors with a
    deterministic sign convention: the largest-magnitude component of
    each eigenvector is nonnegative.
    """
    M = check_symmetric(M)
    values, vectors = np.linalg.eigh(M)
    for k in range(vectors.shape[1]):
        j = int(np.argmax(np.abs(vectors[:, k])))
        if vectors[j, k] < 0:
            vectors[:, k] = -vectors[:, k]
    return EigenPair(values, vectors)


def stabilize_spd(A):
    """Apply the jitter policy to a symmetric matrix meant to be SPD.

    Returns (A_stable, min_eigenvalue_before_jitter). The caller decides
    whether a still-indefinite result is an error.
    """
    A = check_symmetric(A)
    n = A.shape[0]
    min_eig = float(np.linalg.eigvalsh(A)[0])
    scale = np.trace(A) / n
    if min_eig < JITTER_TRIGGER * scale:
        A = A + (JITTER_SIZE * scale) * np.eye(n)
    return A, min_eig


def solve_spd(A, B):
    """Solve A X = B for symmetric positive definite A.

    The jitter policy is applied first; if A is still not positive
    definite after jitter, a SingularMatrixError is raised naming the
    smallest eigenvalue.
    """
    A2, min_eig = stabilize_spd(A)
    B = np.asarray(B, dtype=float)
    try:
        np.linalg.cholesky(A2)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(
            f"matrix is singular beyond jitter (min eigenvalue {min_eig:.3e})",
            min_eigenvalue=min_eig,
        )
    return np.linalg.solve(A2, B)


def conjugate_gradient(A, b, tol=1e-8, max_iter=None):
    """Conjugate gradient solve of A x = b for symmetric PSD A.

    Parameters
    ----------
    A : (n, n) symmetric PSD array.
    b : (n,) right-hand side.
    tol : stop when ||A x - b||_2 <= tol * ||b||_2.
    max_iter : iteration cap, default 10 n.

    Raises ConvergenceError reporting the final residual if the cap is
    reached without meeting the tolerance.
    """
    A = check_symmetric(A)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = A.shape[0]
    if b.shape[0] != n:
        raise InvalidInputError(f"b has length {b.shape[0]}, expected {n}")
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    if max_iter is None:
        max_iter = CG_CAP_FACTOR * n

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(n)

    x = np.zeros(n)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    for _ in range(max_iter):
        if np.sqrt(rs) <= tol * b_norm:
            return x
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            # direction of zero curvature; PSD system, restart from the residual
            r = b - A @ x
            p = r.copy()
            rs = float(r @ r)
            Ap = A @ p
            pAp = float(p @ Ap)
            if pAp <= 0.0:
                break
        alpha = rs / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    residual = float(np.linalg.norm(A @ x - b))
    if residual <= tol * b_norm:
        return x
    raise ConvergenceError(
        f"conjugate gradient did not reach tol {tol:g} within {max_iter} "
        f"iterations (residual {residual:.3e})",
        residual=residual,
    )


def power_method(A, tol=1e-10, max_iter=1000, seed=0) -> PowerResult:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Returns the estimate together with a convergence flag; the flag is
    False when max_iter is exhausted before two consecutive Rayleigh
    quotients agree to relative tol.
    """
    A = check_symmetric(A)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)
    lam = float(v @ A @ v)
    for it in range(1, max_iter + 1):
        w = A @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            # A annihilates v; for PSD A this means lambda_max on this
            # start vector is 0, retry once with a fresh direction
            v = rng.normal(size=n)
            v /= np.linalg.norm(v)
            continue
        v = w / norm
        lam_new = float(v @ A @ v)
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return PowerResult(lam_new, True, it)
        lam = lam_new
    return PowerResult(lam, False, max_iter)
