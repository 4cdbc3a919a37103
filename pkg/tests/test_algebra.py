from __future__ import annotations

import numpy as np
import pytest

from gaugelab.core.algebra import (
    HiggsValue,
    as_lie_vector,
    commutator,
    commutator_gram,
    commutator_sum,
    contract,
    double_commutator,
    inner,
    norm_squared,
    wedge_square,
)

E1, E2, E3 = np.eye(3)


def test_commutator_of_basis_elements() -> None:
    assert np.allclose(commutator(E1, E2), 2 * E3)
    assert np.allclose(commutator(E2, E3), 2 * E1)
    assert np.allclose(commutator(E2, E1), -2 * E3)


def test_bracket_matches_pauli_matrices() -> None:
    sigma = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]])]

    def to_matrix(b: np.ndarray) -> np.ndarray:
        return sum(-1j * coeff * s for coeff, s in zip(b, sigma))

    rng = np.random.default_rng(3)
    b, c = rng.normal(size=(2, 3))
    mb, mc = to_matrix(b), to_matrix(c)
    assert np.allclose(mb @ mc - mc @ mb, to_matrix(commutator(b, c)))
    assert np.isclose(-0.5 * np.trace(mb @ mc).real, inner(b, c))


def test_bracket_identities_on_random_pairs() -> None:
    rng = np.random.default_rng(2024)
    b, c, d = rng.normal(size=(3, 1000, 3))
    pauli = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]])
    mb, mc = (np.einsum("mk,kij->mij", -1j * v, pauli) for v in (b, c))
    matrix_bracket = mb @ mc - mc @ mb
    assert np.allclose(np.einsum("mk,kij->mij", -1j * commutator(b, c), pauli), matrix_bracket, rtol=0, atol=1e-12)
    assert np.allclose(commutator(b, c), 2.0 * np.cross(b, c))

    bracket = commutator(b, c)
    scale = 4.0 * inner(b, b) * inner(c, c)
    gap = inner(bracket, bracket) - (scale - 4.0 * inner(b, c) ** 2)
    assert np.max(np.abs(gap) / scale) < 1e-12

    sizes = np.linalg.norm(b, axis=1) * np.linalg.norm(c, axis=1) * np.linalg.norm(d, axis=1)
    cyclic = commutator(b, commutator(c, d)) + commutator(c, commutator(d, b)) + commutator(d, commutator(b, c))
    assert np.max(np.linalg.norm(cyclic, axis=1) / sizes) < 1e-12
    shift = inner(commutator(b, c), d) - inner(b, commutator(c, d))
    assert np.max(np.abs(shift) / sizes) < 1e-12


def test_wedge_square_of_two_orthogonal_components() -> None:
    value = np.array([E1, E2])
    assert np.isclose(commutator_sum(value), 8.0)
    assert np.isclose(wedge_square(value), 4.0)


def test_commuting_components_have_zero_wedge() -> None:
    value = np.array([E1, -3 * E1, 0.5 * E1])
    assert wedge_square(value) == 0.0
    assert np.allclose(double_commutator(value), 0.0)


def test_double_commutator_matches_explicit_sum() -> None:
    rng = np.random.default_rng(11)
    value = rng.normal(size=(4, 3))
    expected = np.array(
        [sum(commutator(value[c], commutator(value[b], value[c])) for c in range(4)) for b in range(4)]
    )
    assert np.allclose(double_commutator(value), expected)


def test_commutator_gram_trace_is_commutator_sum() -> None:
    rng = np.random.default_rng(5)
    values = rng.normal(size=(6, 3, 3))
    gram = commutator_gram(values)
    assert gram.shape == (6, 3, 3)
    assert np.allclose(np.trace(gram, axis1=1, axis2=2), commutator_sum(values))
    assert np.allclose(gram, np.swapaxes(gram, 1, 2))


def test_contract_and_norm() -> None:
    value = np.array([E1, 2 * E2])
    assert np.allclose(contract(value, [1.0, 1.0]), E1 + 2 * E2)
    assert np.isclose(norm_squared(value), 5.0)


def test_invalid_coefficients() -> None:
    with pytest.raises(ValueError, match="trailing axis"):
        as_lie_vector(np.zeros(4))
    with pytest.raises(ValueError, match="Higgs value"):
        norm_squared(E1)


def test_higgs_value() -> None:
    value = HiggsValue(np.array([E1, E2]))
    assert value.vdim == 2
    assert np.isclose(value.norm_squared(), 2.0)
    assert np.isclose(value.wedge_square(), 4.0)
    assert np.allclose(value.along([0.0, 1.0]), E2)
    assert HiggsValue.zero(3).norm_squared() == 0.0
    with pytest.raises(ValueError, match="vdim in 1..4"):
        HiggsValue(np.zeros((5, 3)))
