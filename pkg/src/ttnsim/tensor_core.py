"""
Dense complex tensor arithmetic.

Tensors are plain ``numpy.ndarray`` objects of dtype ``complex128`` stored in
row-major order. This module provides random generation, contraction along
arbitrary leg pairs, and the QR/SVD splittings used throughout the package,
including the truncation of small singular values.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import BinaryIO, Sequence, Tuple

import numpy as np

DTYPE = np.complex128

# Singular values below this fraction of the largest one count as exact zeros.
ZERO_THRESHOLD = 1e-15

_MAGIC = b"TTNT"
_VERSION = 1


class TruncationWarning(UserWarning):
    """Issued when a truncation would discard every singular value."""


class SplitMode(Enum):
    """
    How to choose the dimension of the bond created by a decomposition.

    For a matricised tensor of shape ``(m, n)``:

    FULL: the new bond has dimension ``m``.
    KEEP: the new bond has dimension ``n``.
    REDUCED: the new bond has dimension ``min(m, n)``.
    """
    FULL = "full"
    KEEP = "keep"
    REDUCED = "reduced"

    def bond_dimension(self, m: int, n: int) -> int:
        if self is SplitMode.FULL:
            return m
        if self is SplitMode.KEEP:
            return n
        return min(m, n)


class ContractionMode(Enum):
    """Which factor of an SVD absorbs the singular values."""
    INTO_U = "u"
    INTO_V = "v"


@dataclass(frozen=True)
class SvdParameters:
    """
    Truncation parameters for singular value decompositions.

    Attributes:
        max_bond_dim: Keep at most this many singular values.
        rel_tol: Discard ``s`` whenever ``s < rel_tol * s_max``.
        total_tol: Discard ``s`` whenever ``s < total_tol``.
        renorm: Rescale the kept singular values to the norm of the
            untruncated vector.
    """
    max_bond_dim: int | None = None
    rel_tol: float = 0.0
    total_tol: float = 0.0
    renorm: bool = False

    def __post_init__(self):
        if self.max_bond_dim is not None and self.max_bond_dim < 1:
            raise ValueError(f"max_bond_dim must be at least 1, got {self.max_bond_dim}")
        if self.rel_tol < 0 or self.total_tol < 0:
            raise ValueError("Truncation tolerances must be non-negative")


def random_tensor(shape: Sequence[int], seed: int | np.random.Generator | None = None) -> np.ndarray:
    """
    Draws a tensor with standard complex normal entries ``(a + ib)/sqrt(2)``.

    Args:
        shape: The leg dimensions. An empty shape yields a scalar tensor.
        seed: Seed or generator for reproducible draws.
    """
    shape = tuple(int(d) for d in shape)
    if any(d < 1 for d in shape):
        raise ValueError(f"degenerate shape {shape}: all dimensions must be positive")
    rng = np.random.default_rng(seed)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return np.asarray((re + 1j * im) / np.sqrt(2), dtype=DTYPE)


def contract(a: np.ndarray, b: np.ndarray,
             legs_a: Sequence[int], legs_b: Sequence[int]) -> np.ndarray:
    """
    Contracts ``legs_a`` of ``a`` with ``legs_b`` of ``b``.

    The remaining legs of ``a`` come first, followed by the remaining legs
    of ``b``, each group in its original order.
    """
    legs_a = tuple(legs_a)
    legs_b = tuple(legs_b)
    if len(legs_a) != len(legs_b):
        raise ValueError(f"Cannot pair {len(legs_a)} legs of a with {len(legs_b)} legs of b")
    for la, lb in zip(legs_a, legs_b):
        if a.shape[la] != b.shape[lb]:
            raise ValueError(f"Dimension mismatch: leg {la} of a has dimension "
                             f"{a.shape[la]}, leg {lb} of b has dimension {b.shape[lb]}")
    return np.tensordot(a, b, axes=(legs_a, legs_b))


def transpose(a: np.ndarray, permutation: Sequence[int]) -> np.ndarray:
    permutation = tuple(permutation)
    if sorted(permutation) != list(range(a.ndim)):
        raise ValueError(f"{permutation} is not a permutation of {a.ndim} legs")
    return np.ascontiguousarray(np.transpose(a, permutation))


def reshape(a: np.ndarray, new_shape: Sequence[int]) -> np.ndarray:
    new_shape = tuple(int(d) for d in new_shape)
    if int(np.prod(new_shape, dtype=np.int64)) != a.size:
        raise ValueError(f"Cannot reshape {a.shape} with {a.size} entries into {new_shape}")
    return np.reshape(a, new_shape)


def _check_partition(ndim: int, legs1: Sequence[int], legs2: Sequence[int]):
    claimed = list(legs1) + list(legs2)
    if sorted(claimed) != list(range(ndim)):
        raise ValueError(f"Legs {tuple(legs1)} and {tuple(legs2)} do not partition "
                         f"the {ndim} legs of the tensor")


def _matricise(a: np.ndarray, row_legs: Sequence[int], col_legs: Sequence[int]):
    _check_partition(a.ndim, row_legs, col_legs)
    row_shape = tuple(a.shape[i] for i in row_legs)
    col_shape = tuple(a.shape[i] for i in col_legs)
    m = int(np.prod(row_shape, dtype=np.int64))
    n = int(np.prod(col_shape, dtype=np.int64))
    mat = np.transpose(a, tuple(row_legs) + tuple(col_legs)).reshape(m, n)
    return mat, row_shape, col_shape


def tensor_qr(a: np.ndarray, q_legs: Sequence[int], r_legs: Sequence[int],
              mode: SplitMode = SplitMode.REDUCED) -> Tuple[np.ndarray, np.ndarray]:
    """
    QR decomposition of a tensor with respect to a bipartition of its legs.

    Returns ``(Q, R)`` where Q carries ``q_legs`` followed by the new bond
    and R carries the new bond followed by ``r_legs``. Whenever the requested
    bond exceeds what the decomposition provides, both factors are padded
    with zeros; Q is then completed to an isometry where possible.
    """
    mat, q_shape, r_shape = _matricise(a, q_legs, r_legs)
    m, n = mat.shape
    target = mode.bond_dimension(m, n)
    if target <= min(m, n):
        q, r = np.linalg.qr(mat, mode="reduced")
        q, r = q[:, :target], r[:target, :]
    else:
        # Only FULL with m > n or KEEP with n > m end up here.
        if m >= target:
            q, r = np.linalg.qr(mat, mode="complete")
            q = q[:, :target]
            r = r[:target, :]
        else:
            q, r = np.linalg.qr(mat, mode="reduced")
            q = np.pad(q, ((0, 0), (0, target - q.shape[1])))
            r = np.pad(r, ((0, target - r.shape[0]), (0, 0)))
    q = np.asarray(q, dtype=DTYPE).reshape(q_shape + (target,))
    r = np.asarray(r, dtype=DTYPE).reshape((target,) + r_shape)
    return q, r


def tensor_svd(a: np.ndarray, u_legs: Sequence[int], v_legs: Sequence[int],
               mode: SplitMode = SplitMode.REDUCED) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Singular value decomposition of a tensor along a leg bipartition.

    Returns ``(U, S, V)`` with the new bond as the last leg of U and the
    first leg of V; ``S`` is a real vector sorted in descending order.
    REDUCED drops singular values that are zero relative to the largest one.
    FULL and KEEP return the full factors.
    """
    mat, u_shape, v_shape = _matricise(a, u_legs, v_legs)
    m, n = mat.shape
    full = mode is not SplitMode.REDUCED
    u, s, vh = np.linalg.svd(mat, full_matrices=full)
    if mode is SplitMode.REDUCED:
        keep = _nonzero_count(s)
        u, s, vh = u[:, :keep], s[:keep], vh[:keep, :]
    else:
        target = mode.bond_dimension(m, n)
        u = u[:, :target] if u.shape[1] >= target else np.pad(u, ((0, 0), (0, target - u.shape[1])))
        vh = vh[:target, :] if vh.shape[0] >= target else np.pad(vh, ((0, target - vh.shape[0]), (0, 0)))
        s = np.pad(s, (0, max(0, target - len(s))))[:target]
    bond = len(s)
    u = np.asarray(u, dtype=DTYPE).reshape(u_shape + (bond,))
    vh = np.asarray(vh, dtype=DTYPE).reshape((bond,) + v_shape)
    return u, s, vh


def _nonzero_count(s: np.ndarray) -> int:
    if len(s) == 0 or s[0] == 0:
        return min(1, len(s))
    return max(1, int(np.count_nonzero(s >= ZERO_THRESHOLD * s[0])))


def truncate_singular_values(s: np.ndarray, params: SvdParameters) -> Tuple[np.ndarray, np.ndarray]:
    """
    Applies the truncation policy to a descending vector of singular values.

    Returns the kept values and the discarded values. Relative and total
    tolerances are applied first, then the ``max_bond_dim`` cap. At least
    one value is always kept.
    """
    s = np.asarray(s, dtype=float)
    if len(s) == 0:
        return s, s
    s_max = s[0]
    keep = (s >= params.rel_tol * s_max) & (s >= params.total_tol)
    keep &= s >= ZERO_THRESHOLD * s_max
    n_keep = int(np.count_nonzero(keep))
    if params.max_bond_dim is not None:
        n_keep = min(n_keep, params.max_bond_dim)
    if n_keep == 0:
        warnings.warn("All singular values were truncated; keeping the largest one.",
                      TruncationWarning, stacklevel=3)
        n_keep = 1
    kept = s[:n_keep].copy()
    discarded = s[n_keep:]
    if params.renorm:
        norm_before = np.linalg.norm(s)
        norm_after = np.linalg.norm(kept)
        if norm_after > 0:
            kept *= norm_before / norm_after
    return kept, discarded


def truncated_svd(a: np.ndarray, u_legs: Sequence[int], v_legs: Sequence[int],
                  params: SvdParameters = SvdParameters()
                  ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD followed by truncation of the singular values according to ``params``."""
    u, s, vh = tensor_svd(a, u_legs, v_legs, mode=SplitMode.REDUCED)
    kept, _ = truncate_singular_values(s, params)
    n = len(kept)
    return u[..., :n], kept, vh[:n, ...]


def contr_truncated_svd_splitting(a: np.ndarray, u_legs: Sequence[int], v_legs: Sequence[int],
                                  params: SvdParameters = SvdParameters(),
                                  contr_mode: ContractionMode = ContractionMode.INTO_V
                                  ) -> Tuple[np.ndarray, np.ndarray]:
    """Truncated SVD with the singular values absorbed into U or V."""
    u, s, vh = truncated_svd(a, u_legs, v_legs, params)
    if contr_mode is ContractionMode.INTO_U:
        return u * s, vh
    return u, s.reshape((-1,) + (1,) * (vh.ndim - 1)) * vh


def save_tensor(fh: BinaryIO, tensor: np.ndarray):
    """Writes a tensor in the ``TTNT`` binary layout."""
    tensor = np.asarray(tensor, dtype=DTYPE)
    fh.write(_MAGIC)
    fh.write(struct.pack("<HH", _VERSION, tensor.ndim))
    fh.write(struct.pack(f"<{tensor.ndim}Q", *tensor.shape))
    fh.write(np.ascontiguousarray(tensor).astype("<c16").tobytes(order="C"))


def load_tensor(fh: BinaryIO) -> np.ndarray:
    """Reads a tensor written by :func:`save_tensor`."""
    magic = fh.read(4)
    if magic != _MAGIC:
        raise ValueError(f"Not a tensor blob (magic {magic!r})")
    version, degree = struct.unpack("<HH", fh.read(4))
    if version != _VERSION:
        raise ValueError(f"Unsupported tensor format version {version}")
    shape = struct.unpack(f"<{degree}Q", fh.read(8 * degree))
    count = int(np.prod(shape, dtype=np.int64))
    data = np.frombuffer(fh.read(16 * count), dtype="<c16")
    if data.size != count:
        raise ValueError("Truncated tensor blob")
    return data.astype(DTYPE).reshape(shape)
