"""Orthonormal DCT-II basis applied along the temporal (row) axis."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import InvalidDimensionError


@dataclass(frozen=True)
class DctBasis:
    size: int
    forward: np.ndarray
    inverse: np.ndarray


@lru_cache(maxsize=None)
def dct_basis(T: int) -> DctBasis:
    """Return the T x T orthonormal DCT-II matrix and its transpose as the inverse.

    Row k of ``forward`` is ``s_k * cos(pi * (2n + 1) * k / (2T))`` with
    ``s_0 = sqrt(1/T)`` and ``s_k = sqrt(2/T)`` otherwise.
    """
    if int(T) != T or T < 1:
        raise InvalidDimensionError(f"DCT size must be a positive integer, got {T!r}")
    T = int(T)
    k = np.arange(T)[:, None]
    n = np.arange(T)[None, :]
    mat = np.cos(np.pi * (2 * n + 1) * k / (2 * T)) * np.sqrt(2.0 / T)
    mat[0, :] = np.sqrt(1.0 / T)
    mat.setflags(write=False)
    inv = np.ascontiguousarray(mat.T)
    inv.setflags(write=False)
    return DctBasis(T, mat, inv)


def _check(basis, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2 or x.shape[-2] != basis.size:
        raise InvalidDimensionError(
            f"expected temporal axis of length {basis.size}, got shape {x.shape}"
        )
    return x


def apply_dct(basis: DctBasis, x) -> np.ndarray:
    """Transform ``x`` (T x C, or batched B x T x C) into DCT coefficients."""
    return np.matmul(basis.forward, _check(basis, x))


def apply_idct(basis: DctBasis, y) -> np.ndarray:
    return np.matmul(basis.inverse, _check(basis, y))
