"""
Action of a matrix exponential on a vector.

Small problems use the dense exponential; larger ones build an Arnoldi basis
(which reduces to Lanczos for Hermitian operators) and exponentiate the small
projected matrix. When the basis limit is reached without convergence the
time interval is split into substeps.
"""
from __future__ import annotations

from typing import Callable, Union

import numpy as np
from scipy.linalg import expm

DENSE_LIMIT = 256
KRYLOV_TOL = 1e-10
KRYLOV_MAX_VECTORS = 50

MatVec = Callable[[np.ndarray], np.ndarray]


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError("Non-finite entries in the exponential solver")


def local_expm_apply(heff: Union[np.ndarray, MatVec], v: np.ndarray, factor: complex,
                     dense_limit: int = DENSE_LIMIT, tol: float = KRYLOV_TOL,
                     max_vectors: int = KRYLOV_MAX_VECTORS) -> np.ndarray:
    """
    Computes ``exp(factor * H) @ v``.

    Args:
        heff: Either the matrix ``H`` or a function applying it to a flat vector.
        v: The vector (any shape; it is flattened and the result reshaped back).
        factor: Scalar multiplying ``H`` in the exponent.
        dense_limit: Dimensions up to this use the dense exponential when
            ``heff`` is a matrix.
    """
    shape = np.shape(v)
    vec = np.asarray(v, dtype=complex).reshape(-1)
    _check_finite(vec, np.asarray(factor))
    if factor == 0 or not np.any(vec):
        return vec.reshape(shape).copy()
    if isinstance(heff, np.ndarray):
        _check_finite(heff)
        if heff.shape != (vec.size, vec.size):
            raise ValueError(f"Operator of shape {heff.shape} cannot act on a vector of size {vec.size}")
        if vec.size <= dense_limit:
            with np.errstate(over="ignore", invalid="ignore"):
                out = expm(factor * heff) @ vec
            _check_finite(out)
            return out.reshape(shape)
        matrix = heff
        matvec = lambda x: matrix @ x
    else:
        matvec = heff
    return _krylov(matvec, vec, complex(factor), tol, max_vectors).reshape(shape)


def _krylov(matvec: MatVec, vec: np.ndarray, factor: complex, tol: float, max_vectors: int,
            depth: int = 0) -> np.ndarray:
    n = vec.size
    m_max = min(max_vectors, n)
    beta = np.linalg.norm(vec)
    basis = np.zeros((m_max + 1, n), dtype=complex)
    hess = np.zeros((m_max + 1, m_max), dtype=complex)
    basis[0] = vec / beta
    for j in range(m_max):
        w = matvec(basis[j])
        _check_finite(w)
        for _ in range(2):  # re-orthogonalise once for stability
            coeffs = basis[:j + 1].conj() @ w
            w = w - coeffs @ basis[:j + 1]
            hess[:j + 1, j] += coeffs
        h_next = np.linalg.norm(w)
        small = expm(factor * hess[:j + 1, :j + 1])[:, 0]
        # Invariant subspace found or the residual estimate is below tolerance.
        if h_next < 1e-14 * max(1.0, np.abs(hess[:j + 1, :j + 1]).max()) \
                or beta * h_next * abs(factor) * abs(small[j]) < tol or j + 1 == n:
            return beta * (small @ basis[:j + 1])
        hess[j + 1, j] = h_next
        basis[j + 1] = w / h_next
    if depth > 20:
        raise FloatingPointError("Krylov exponential did not converge")
    half = _krylov(matvec, vec, factor / 2, tol / 2, max_vectors, depth + 1)
    return _krylov(matvec, half, factor / 2, tol / 2, max_vectors, depth + 1)
