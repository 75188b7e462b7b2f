"""
Dense real linear-algebra kernels.

Everything here works on float64 numpy arrays. ``expm`` and ``cost_gramian``
accept stacks of matrices (leading batch axes) so that the Monte Carlo code can
push many path segments through one call.
"""

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

__all__ = [
    "SingularMatrixError",
    "expm",
    "kron",
    "vec",
    "unvec",
    "min_eig_sym",
    "symmetrize",
    "asymmetry",
    "solve_linear",
    "cost_gramian",
    "gramian_and_expm",
]

# Absolute floor used by every relative tolerance in the package.
ABS_FLOOR = 1e-14

# Degree-13 Pade coefficients and the matching 1-norm bound (Higham 2005).
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a linear system is singular to working precision.

    ``rcond`` holds LAPACK's reciprocal 1-norm condition estimate.
    """

    def __init__(self, message, rcond=0.0):
        super().__init__(message)
        self.rcond = rcond


def _as_square_stack(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def _pade13(X):
    b = _PADE13
    ident = np.broadcast_to(np.eye(X.shape[-1]), X.shape)
    X2 = X @ X
    X4 = X2 @ X2
    X6 = X2 @ X4
    U = X @ (
        X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2)
        + b[7] * X6
        + b[5] * X4
        + b[3] * X2
        + b[1] * ident
    )
    V = (
        X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2)
        + b[6] * X6
        + b[4] * X4
        + b[2] * X2
        + b[0] * ident
    )
    return np.linalg.solve(V - U, V + U)


def expm(A, t=1.0):
    """Matrix exponential ``e^{A t}``.

    Scaling and squaring around a degree-13 Pade approximant. The number of
    squarings is chosen per matrix from its 1-norm, so a stack of matrices
    with very different norms is handled in one call.

    Parameters
    ----------
    A : array_like, shape (..., n, n)
        Square matrix or stack of square matrices.
    t : float or array_like
        Time multiplier, broadcast against the leading axes of ``A``. May be
        zero or negative.

    Returns
    -------
    ndarray, shape (..., n, n)
    """
    A = _as_square_stack(A)
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("t must be finite")
    X = A * t[..., None, None]
    if X.shape[-1] == 0:
        return X.copy()

    norm1 = np.abs(X).sum(axis=-2).max(axis=-1)
    mant, expo = np.frexp(norm1 / _THETA13)
    s = np.where(norm1 > _THETA13, expo - (mant == 0.5), 0).astype(int)
    X = X / np.ldexp(1.0, s)[..., None, None]

    F = _pade13(X)
    if F.ndim == 2:
        for _ in range(int(s)):
            F = F @ F
        return F
    smax = int(s.max()) if s.size else 0
    for k in range(smax):
        sel = s > k
        F[sel] = F[sel] @ F[sel]
    return F


def kron(A, B):
    """Kronecker product; ``vec(A X B^T) == kron(B, A) @ vec(X)``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("kron operands must be finite")
    return np.kron(A, B)


def vec(X):
    """Column-stacking vectorization."""
    return np.asarray(X, dtype=float).reshape(-1, order="F")


def unvec(x, n):
    return np.asarray(x, dtype=float).reshape((n, n), order="F")


def symmetrize(M):
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def asymmetry(M):
    """Relative asymmetry ``max|M - M^T| / max(||M||_F, floor)``."""
    M = np.asarray(M, dtype=float)
    return float(np.abs(M - M.T).max() / max(np.linalg.norm(M), ABS_FLOOR))


def min_eig_sym(M):
    """Smallest eigenvalue of the symmetric part of ``M``."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return float(np.linalg.eigvalsh(symmetrize(M))[0])


def solve_linear(L, b, rcond_min=None):
    """Solve ``L x = b`` by pivoted LU.

    Raises :class:`SingularMatrixError` when the reciprocal condition estimate
    falls below ``rcond_min`` (default ``n * eps``) or the residual check
    ``||Lx - b|| <= 1e-9 (||L||_F ||x|| + ||b||)`` fails.
    """
    L = _as_square_stack(L, "L")
    b = np.asarray(b, dtype=float)
    n = L.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"rhs has length {b.shape[0]}, expected {n}")
    if rcond_min is None:
        rcond_min = n * np.finfo(float).eps

    lu, piv, info = lapack.dgetrf(L)
    if info > 0:
        raise SingularMatrixError(f"exactly singular pivot at {info - 1}", 0.0)
    anorm = np.abs(L).sum(axis=0).max()
    rcond, _ = lapack.dgecon(lu, anorm, norm="1")
    if rcond < rcond_min:
        raise SingularMatrixError(f"matrix is singular to working precision (rcond={rcond:.3e})", rcond)

    x = sla.lu_solve((lu, piv), b, check_finite=False)
    resid = np.linalg.norm(L @ x - b)
    bound = 1e-9 * (np.linalg.norm(L) * np.linalg.norm(x) + np.linalg.norm(b)) + ABS_FLOOR
    if not resid <= bound:
        raise SingularMatrixError(f"residual {resid:.3e} exceeds {bound:.3e}", rcond)
    return x


def gramian_and_expm(A, T):
    """Return ``(W(T), e^{AT})`` for one matrix ``A`` and lengths ``T``.

    ``x^T W(T) x`` is the integral of ``||e^{A s} x||^2`` over ``[0, T]``.
    The block exponential of ``[[-A^T, I], [0, A]]`` gives ``W`` on a short
    base interval; longer intervals are reached by repeated doubling,
    ``W(2h) = W(h) + E(h)^T W(h) E(h)``, which avoids the cancellation the
    one-shot block exponential suffers for large ``||A|| T``.

    ``T`` may be a scalar or a 1-d array; the result then has a leading axis.
    """
    A = _as_square_stack(A)
    if A.ndim != 2:
        raise ValueError("A must be a single square matrix")
    T = np.asarray(T, dtype=float)
    if not np.all(np.isfinite(T)):
        raise ValueError("T must be finite")
    if np.any(T < 0):
        raise ValueError("T must be non-negative")
    n = A.shape[0]

    anorm = np.abs(A).sum(axis=0).max()
    with np.errstate(divide="ignore"):
        k = np.ceil(np.log2(anorm * T))
    k = np.where(np.isfinite(k) & (k > 0), k, 0).astype(int)
    if k.ndim:
        # One doubling count for the whole stack: shorter base steps are
        # harmless and the stack then needs no per-item masking.
        k = np.full_like(k, k.max() if k.size else 0)
    h = T / np.ldexp(1.0, k)

    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -A.T
    block[:n, n:] = np.eye(n)
    block[n:, n:] = A
    F = expm(block, h)
    E = F[..., n:, n:]
    W = np.swapaxes(E, -1, -2) @ F[..., :n, n:]

    for _ in range(int(k.max()) if k.size else 0):
        W = W + np.swapaxes(E, -1, -2) @ W @ E
        E = E @ E
    return symmetrize(W), E


def cost_gramian(A, T):
    """Finite-horizon cost Gramian ``W(T) = int_0^T e^{A^T s} e^{A s} ds``."""
    return gramian_and_expm(A, T)[0]
