"""Eigenvalues and eigenvectors of small real symmetric matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray


class MatrixError(ValueError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class EigenResult:
    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64]
    sweeps: int


def _off_norm(matrix: NDArray[np.float64]) -> float:
    upper = np.triu(matrix, k=1)
    return float(math.sqrt(2.0 * np.sum(upper * upper)))


def jacobi(matrix: ArrayLike, *, rel_tol: float = 1e-13, max_sweeps: int = 64) -> EigenResult:
    """Diagonalise a symmetric matrix by cyclic Jacobi rotations.

    Sweeps continue until the off-diagonal Frobenius norm drops below
    ``rel_tol * max(|trace|, |A|_F)``. Eigenvalues are returned in ascending
    order with eigenvectors as columns; each eigenvector is sign-normalised
    so that its first nonzero coefficient is positive.
    """

    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"Matrix must be square, got shape {a.shape}")
    scale = max(abs(float(np.trace(a))), float(np.linalg.norm(a)))
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
        raise MatrixError("Matrix must be symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    threshold = rel_tol * scale
    sweeps = 0
    while _off_norm(a) > threshold and sweeps < max_sweeps:
        for p in range(n):
            for q in range(p + 1, n):
                if a[p, q] != 0.0:
                    _rotate(p, q, a, v)
        sweeps += 1

    order = np.argsort(np.diag(a), kind="stable")
    values = np.diag(a)[order]
    vectors = v[:, order]
    for col in range(n):
        vectors[:, col] = canonical_sign(vectors[:, col])
    return EigenResult(eigenvalues=values, eigenvectors=vectors, sweeps=sweeps)


def _rotate(p: int, q: int, a: NDArray[np.float64], v: NDArray[np.float64]) -> None:
    """Rotate in the (p, q) plane so that ``a[p, q]`` becomes zero."""

    app, aqq, apq = a[p, p], a[q, q], a[p, q]
    phi = 0.5 * math.atan2(2.0 * apq, aqq - app)
    c, s = math.cos(phi), math.sin(phi)
    rotation = np.eye(a.shape[0])
    rotation[p, p] = c
    rotation[q, q] = c
    rotation[p, q] = s
    rotation[q, p] = -s
    a[:] = rotation.T @ a @ rotation
    a[p, q] = a[q, p] = 0.0
    v[:] = v @ rotation


def canonical_sign(vector: NDArray[np.float64], *, tol: float = 1e-12) -> NDArray[np.float64]:
    """Flip ``vector`` so its first coefficient above ``tol`` in magnitude is positive."""

    for value in vector:
        if abs(value) > tol:
            return vector if value > 0 else -vector
    return vector


__all__ = ["DimensionError", "EigenResult", "MatrixError", "canonical_sign", "jacobi"]
