"""
Dense complex matrix kernel.

Matrices are 2d numpy arrays of dtype complex128; stacks of matrices are 3d
arrays whose first axis indexes the matrices. Every function is pure.
"""

import numpy as np
import scipy.linalg as sla

from utils.config import ALG_TOL, RANK_RTOL

from .errors import NotHermitianError, NotPositiveError, ShapeMismatchError


def as_matrix(a):
    """Coerce to a finite complex 2d array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ShapeMismatchError(f"expected a 2d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def matmul(a, b):
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def adjoint(a):
    return as_matrix(a).conj().T


def operator_norm(a):
    """Largest singular value."""
    a = as_matrix(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def hermitian_part(a):
    a = as_matrix(a)
    return 0.5 * (a + a.conj().T)


def is_hermitian(a, tol=ALG_TOL):
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        return False
    scale = max(operator_norm(a), 1.0)
    return operator_norm(a - a.conj().T) <= tol * scale


def min_eig_hermitian(a, tol=ALG_TOL):
    """Smallest eigenvalue of a Hermitian matrix."""
    a = as_matrix(a)
    if not is_hermitian(a, tol):
        raise NotHermitianError("min_eig_hermitian needs a Hermitian matrix")
    return float(np.linalg.eigvalsh(hermitian_part(a))[0])


def psd_sqrt(a, inverse=False, tol=ALG_TOL, rtol=RANK_RTOL):
    """
    Square root of a Hermitian PSD matrix.

    Eigenvalues down to -tol * max(‖a‖, 1) are clipped to zero; anything lower
    raises NotPositiveError.

    With inverse=True the inverse square root is taken on the support of `a`
    (eigenvalues above rtol * largest), which is the inverse inside any corner
    algebra whose unit is the support projection.
    """
    a = as_matrix(a)
    if not is_hermitian(a, tol):
        raise NotHermitianError("psd_sqrt needs a Hermitian matrix")
    w, v = np.linalg.eigh(hermitian_part(a))
    scale = max(float(np.max(np.abs(w))) if w.size else 0.0, 0.0)
    if w.size and w[0] < -tol * max(scale, 1.0):
        raise NotPositiveError(f"negative eigenvalue {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    if inverse:
        keep = w > rtol * scale if scale > 0 else np.zeros_like(w, dtype=bool)
        f = np.zeros_like(w)
        f[keep] = 1.0 / np.sqrt(w[keep])
    else:
        f = np.sqrt(w)
    return (v * f) @ v.conj().T


def rank_cutoff(s, rtol=RANK_RTOL, atol=ALG_TOL):
    """Singular values at or below max(rtol·s_max, atol·max(1, s_max)) count as zero."""
    top = float(s[0]) if len(s) else 0.0
    return max(rtol * top, atol * max(1.0, top))


def nullspace(op, rtol=RANK_RTOL, atol=ALG_TOL):
    """Orthonormal kernel basis as the columns of an (n, k) array."""
    op = as_matrix(op)
    if op.shape[0] == 0:
        return np.eye(op.shape[1], dtype=np.complex128)
    _, s, vh = sla.svd(op, full_matrices=True)
    rank = int(np.sum(s > rank_cutoff(s, rtol, atol)))
    if rank == 0:
        return np.eye(op.shape[1], dtype=np.complex128)
    return vh[rank:].conj().T


def solve_least_squares(op, rhs):
    """Minimum-norm least-squares solution and the residual norm of op @ x - rhs."""
    op = as_matrix(op)
    rhs = np.asarray(rhs, dtype=np.complex128)
    if rhs.shape[0] != op.shape[0]:
        raise ShapeMismatchError(f"rhs has {rhs.shape[0]} rows, operator has {op.shape[0]}")
    x, _, _, _ = sla.lstsq(op, rhs)
    residual = float(np.linalg.norm(op @ x - rhs))
    return x, residual


def flatten_stack(vectors):
    """Rows of the returned 2d array are the flattened input matrices."""
    arr = np.asarray(vectors, dtype=np.complex128)
    if arr.ndim < 2:
        raise ShapeMismatchError("expected a stack of matrices")
    return arr.reshape(arr.shape[0], -1)


def span_rank(vectors, tol=RANK_RTOL, atol=ALG_TOL):
    """Numerical rank of the span; the cutoff is rank_cutoff(s, tol, atol)."""
    if len(vectors) == 0:
        return 0
    s = sla.svdvals(flatten_stack(vectors))
    return int(np.sum(s > rank_cutoff(s, tol, atol)))


def orthonormal_span(vectors, rtol=RANK_RTOL, atol=ALG_TOL):
    """HS-orthonormal basis of the span of a stack of equally shaped matrices."""
    arr = np.asarray(vectors, dtype=np.complex128)
    if arr.shape[0] == 0:
        return arr
    shape = arr.shape[1:]
    flat = arr.reshape(arr.shape[0], -1)
    u, s, _ = sla.svd(flat.T, full_matrices=False)
    rank = int(np.sum(s > rank_cutoff(s, rtol, atol)))
    cols = u[:, :rank]
    return cols.T.reshape((rank,) + shape)


def condition_number(w, rtol=RANK_RTOL):
    """max/min over the eigenvalues above rtol times the largest."""
    w = np.abs(np.asarray(w, dtype=float))
    if w.size == 0 or w.max() == 0:
        return np.inf
    kept = w[w > rtol * w.max()]
    return float(kept.max() / kept.min())
