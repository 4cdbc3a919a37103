"""Coefficient arithmetic for su(2) and V (x) su(2).

Elements of su(2) are stored as three real coefficients in the basis
``e_k = -i * sigma_k``. In this basis the trace form ``-1/2 tr(bc)`` is the
Euclidean dot product and the bracket is ``[b, c] = 2 (b x c)``. All array
functions broadcast over leading axes; the last axis holds the coefficients.
A Higgs value is an array of shape ``(..., vdim, 3)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

LIE_DIM = 3
MAX_VDIM = 4

LieVector = NDArray[np.float64]


def _levi_civita(n: int) -> NDArray[np.float64]:
    tensor = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i, j in itertools.combinations(range(n), 2) if perm[i] > perm[j])
        tensor[perm] = -1.0 if inversions % 2 else 1.0
    return tensor


LEVI_CIVITA_3 = _levi_civita(3)
LEVI_CIVITA_4 = _levi_civita(4)
LEVI_CIVITA_3.setflags(write=False)
LEVI_CIVITA_4.setflags(write=False)


def as_lie_vector(value: ArrayLike) -> LieVector:
    array = np.asarray(value, dtype=float)
    if array.shape[-1:] != (LIE_DIM,):
        raise ValueError(f"su(2) coefficients need a trailing axis of length 3, got shape {array.shape}")
    return array


def commutator(b: ArrayLike, c: ArrayLike) -> LieVector:
    """Return ``[b, c] = 2 (b x c)``."""

    return 2.0 * np.cross(as_lie_vector(b), as_lie_vector(c))


def inner(b: ArrayLike, c: ArrayLike) -> NDArray[np.float64]:
    """Return ``<b, c> = -1/2 tr(bc)``, the coefficient dot product."""

    return np.sum(as_lie_vector(b) * as_lie_vector(c), axis=-1)


def norm_squared(value: ArrayLike) -> NDArray[np.float64]:
    """Return ``sum_c |a_c|^2`` for Higgs values of shape ``(..., vdim, 3)``."""

    array = as_lie_vector(value)
    if array.ndim < 2:
        raise ValueError("norm_squared expects a Higgs value; use inner(b, b) for su(2) elements")
    return np.sum(array * array, axis=(-2, -1))


def contract(value: ArrayLike, v: ArrayLike) -> LieVector:
    """Return ``a(v) = sum_c v_c a_c``."""

    return np.einsum("...ck,c->...k", as_lie_vector(value), np.asarray(v, dtype=float))


def pairwise_commutators(value: ArrayLike) -> NDArray[np.float64]:
    """Return ``[a_b, a_c]`` for all component pairs, shape ``(..., vdim, vdim, 3)``."""

    array = as_lie_vector(value)
    return commutator(array[..., :, None, :], array[..., None, :, :])


def wedge_square(value: ArrayLike) -> NDArray[np.float64]:
    """Return ``sum_{b<c} |[a_b, a_c]|^2``; zero iff all components commute."""

    return 0.5 * commutator_sum(value)


def commutator_sum(value: ArrayLike) -> NDArray[np.float64]:
    """Return ``sum_{b,c} |[a_b, a_c]|^2``, which equals ``sum_c |[a_c, a]|^2``."""

    brackets = pairwise_commutators(value)
    return np.sum(brackets * brackets, axis=(-3, -2, -1))


def double_commutator(value: ArrayLike) -> NDArray[np.float64]:
    """Return ``sum_c [a_c, [a_b, a_c]]`` for every component ``b``."""

    array = as_lie_vector(value)
    brackets = pairwise_commutators(array)  # [..., b, c] = [a_b, a_c]
    return np.sum(commutator(array[..., None, :, :], brackets), axis=-2)


def commutator_gram(value: ArrayLike) -> NDArray[np.float64]:
    """Return ``sum_d <[a_d, a_b], [a_d, a_c]>`` as a ``(..., vdim, vdim)`` matrix."""

    brackets = pairwise_commutators(value)  # [..., d, b] = [a_d, a_b]
    return np.einsum("...dbk,...dck->...bc", brackets, brackets)


@dataclass(frozen=True, slots=True)
class HiggsValue:
    """A single point value in V (x) su(2)."""

    components: NDArray[np.float64]

    def __post_init__(self) -> None:
        array = as_lie_vector(self.components)
        if array.ndim != 2 or not 1 <= array.shape[0] <= MAX_VDIM:
            raise ValueError(f"HiggsValue needs shape (vdim, 3) with vdim in 1..4, got {array.shape}")
        object.__setattr__(self, "components", array)

    @classmethod
    def zero(cls, vdim: int) -> "HiggsValue":
        return cls(np.zeros((vdim, LIE_DIM)))

    @property
    def vdim(self) -> int:
        return int(self.components.shape[0])

    def norm_squared(self) -> float:
        return float(norm_squared(self.components))

    def along(self, v: ArrayLike) -> LieVector:
        return contract(self.components, v)

    def wedge_square(self) -> float:
        return float(wedge_square(self.components))


__all__ = [
    "HiggsValue",
    "LEVI_CIVITA_3",
    "LEVI_CIVITA_4",
    "LIE_DIM",
    "LieVector",
    "MAX_VDIM",
    "as_lie_vector",
    "commutator",
    "commutator_gram",
    "commutator_sum",
    "contract",
    "double_commutator",
    "inner",
    "norm_squared",
    "pairwise_commutators",
    "wedge_square",
]
