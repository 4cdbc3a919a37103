from __future__ import annotations

import numpy as np
import pytest

from gaugelab.core.algebra import commutator
from gaugelab.core.fieldkit import (
    UNIT_SPHERE_AREA,
    HiggsField,
    affine_connection,
    affine_field,
    as_points,
    ball_integral,
    central_difference,
    covariant_derivative,
    covariant_laplacian,
    curvature,
    elementary_two_form,
    hodge_split,
    hodge_star,
    product_connection,
    shell_integral,
    sphere_quadrature,
    sphere_sum,
    standard_points,
    two_form_norm,
    weighted_sum,
    zero_field,
)
from gaugelab.services.solutions import build_solution, ps_monopole


@pytest.mark.parametrize("n", [3, 4])
def test_sphere_weights_sum_to_area(n: int) -> None:
    q = sphere_quadrature(n, 8)
    assert np.isclose(q.total, UNIT_SPHERE_AREA[n], rtol=1e-14)
    assert np.allclose(np.linalg.norm(q.nodes, axis=1), 1.0)
    assert q.size == q.weights.size == q.nodes.shape[0]


def test_sphere_quadrature_integrates_polynomials() -> None:
    q = sphere_quadrature(4, 12)
    assert np.isclose(sphere_sum(lambda x: x[:, 0] ** 2, 1.0, q), np.pi**2 / 2, rtol=1e-10)
    assert np.isclose(sphere_sum(lambda x: x[:, 3] * x[:, 1], 1.0, q), 0.0, atol=1e-12)
    q3 = sphere_quadrature(3, 12)
    assert np.isclose(sphere_sum(lambda x: x[:, 2] ** 4, 1.0, q3), 4 * np.pi / 5, rtol=1e-10)


def test_quadrature_arrays_are_read_only_and_cached() -> None:
    q = sphere_quadrature(3, 6)
    assert sphere_quadrature(3, 6) is q
    with pytest.raises(ValueError):
        q.weights[0] = 1.0


def test_sphere_quadrature_rejects_bad_arguments() -> None:
    with pytest.raises(ValueError, match="at least 4"):
        sphere_quadrature(4, 3)
    with pytest.raises(ValueError, match="supports"):
        sphere_quadrature(5, 8)


def test_shell_and_ball_volumes() -> None:
    q = sphere_quadrature(4, 8)
    assert np.isclose(shell_integral(lambda x: np.ones(x.shape[0]), 2.0, q), 2 * np.pi**2 * 8.0)
    assert np.isclose(ball_integral(lambda x: np.ones(x.shape[0]), 2.0, q, 8), np.pi**2 / 2 * 16.0)
    annulus = ball_integral(lambda x: np.ones(x.shape[0]), 2.0, q, 8, inner=1.0)
    assert np.isclose(annulus, np.pi**2 / 2 * 15.0)
    q3 = sphere_quadrature(3, 8)
    shifted = ball_integral(lambda x: np.ones(x.shape[0]), 1.5, q3, 8, center=[1.0, 2.0, 3.0])
    assert np.isclose(shifted, 4 * np.pi / 3 * 1.5**3)


def test_ball_integral_of_matrix_valued_integrand() -> None:
    q = sphere_quadrature(4, 10)
    result = ball_integral(lambda x: np.einsum("mi,mj->mij", x, x), 1.0, q, 8)
    assert result.shape == (4, 4)
    assert np.allclose(result, np.eye(4) * np.pi**2 / 12, atol=1e-12)


def test_weighted_sum_paths_agree() -> None:
    rng = np.random.default_rng(1)
    weights = rng.random(50)
    values = rng.normal(size=(50, 3, 2))
    assert np.allclose(weighted_sum(weights, values, True), weighted_sum(weights, values, False))


def test_as_points_shapes() -> None:
    points, single = as_points([1.0, 2.0, 3.0], 3)
    assert single and points.shape == (1, 3)
    with pytest.raises(ValueError, match="dimension 4"):
        as_points(np.zeros((2, 3)), 4)


def test_standard_points_are_seeded_and_inside_the_ball() -> None:
    first = standard_points(40, radius=5.0, dim=4, seed=9)
    second = standard_points(40, radius=5.0, dim=4, seed=9)
    assert np.array_equal(first, second)
    assert np.all(np.linalg.norm(first, axis=1) <= 5.0)


def test_affine_field_derivatives() -> None:
    rng = np.random.default_rng(2)
    linear = rng.normal(size=(4, 2, 3))
    a = affine_field(rng.normal(size=(2, 3)), linear, dim=4)
    x = rng.normal(size=(5, 4))
    assert a.mode == "analytic" and a.numeric().mode == "numeric"
    assert np.allclose(a.partials(x), a.numeric().partials(x), atol=1e-9)
    assert np.allclose(covariant_derivative(a, product_connection(4), x), a.partials(x))
    assert np.allclose(covariant_laplacian(a, product_connection(4), x), 0.0, atol=1e-8)


def test_single_point_calls_drop_the_batch_axis() -> None:
    a = affine_field(np.ones((3, 3)), dim=3)
    assert a([0.0, 1.0, 2.0]).shape == (3, 3)
    assert covariant_derivative(a, product_connection(3), [0.0, 0.0, 0.0]).shape == (3, 3, 3)
    assert covariant_derivative(a, product_connection(3), np.zeros((2, 3)), alpha=1).shape == (2, 3, 3)


def test_constant_connection_curvature_is_a_bracket() -> None:
    rng = np.random.default_rng(4)
    const = rng.normal(size=(4, 3))
    A = affine_connection(const, dim=4)
    form = curvature(A, np.zeros(4))
    expected = commutator(const[:, None, :], const[None, :, :])
    assert np.allclose(form, expected)


def test_linear_connection_curvature() -> None:
    linear = np.zeros((3, 3, 3))
    linear[0, 1] = [0.0, 0.0, 1.0]  # A_2 = x_1 e3
    A = affine_connection(linear=linear, dim=3)
    form = curvature(A, [0.3, -0.2, 0.5])
    assert np.allclose(form[0, 1], [0.0, 0.0, 1.0])
    assert np.allclose(form[1, 0], [0.0, 0.0, -1.0])
    assert np.allclose(form[0, 2], 0.0)


def test_covariant_laplacian_with_constant_connection() -> None:
    const = np.zeros((4, 3))
    const[0] = [1.0, 0.0, 0.0]
    A = affine_connection(const, dim=4)
    a = affine_field(np.array([[0.0, 1.0, 0.0]]), dim=4)
    # -[A_1, [A_1, e2]] = -[e1, 2 e3] = 4 e2
    assert np.allclose(covariant_laplacian(a, A, np.zeros(4))[0], [0.0, 4.0, 0.0], atol=1e-8)


def test_hodge_star_is_an_involution() -> None:
    rng = np.random.default_rng(6)
    raw = rng.normal(size=(4, 4, 3))
    form = raw - np.swapaxes(raw, 0, 1)
    assert np.allclose(hodge_star(hodge_star(form)), form)
    plus, minus = hodge_split(form)
    assert np.allclose(plus + minus, form)
    assert np.allclose(hodge_star(plus), plus)
    assert np.allclose(hodge_star(minus), -minus)


def test_elementary_forms_have_the_expected_duality() -> None:
    sigma = [0.0, 0.0, 1.0]
    selfdual = elementary_two_form(4, {(0, 1): 1.0, (2, 3): 1.0}, sigma)
    antiselfdual = elementary_two_form(4, {(0, 1): 1.0, (2, 3): -1.0}, sigma)
    assert np.allclose(hodge_star(selfdual), selfdual)
    assert np.allclose(hodge_star(antiselfdual), -antiselfdual)
    assert np.isclose(two_form_norm(selfdual), np.sqrt(2.0))


def test_hodge_star_needs_four_dimensions() -> None:
    with pytest.raises(ValueError, match="n = 4"):
        hodge_star(np.zeros((3, 3, 3)))


def test_zero_field() -> None:
    a = zero_field(4, 2)
    assert np.allclose(a(np.ones((3, 4))), 0.0)
    assert a.vdim == 2


def test_monopole_partials_match_finite_differences() -> None:
    m = ps_monopole()
    x = standard_points(10, radius=3.0, dim=3, seed=12)
    assert np.allclose(m.higgs.partials(x), m.higgs.numeric().partials(x), atol=1e-8)
    assert np.allclose(m.connection.partials(x), m.connection.numeric().partials(x), atol=1e-8)


def test_central_difference_is_fourth_order() -> None:
    def func(points: np.ndarray) -> np.ndarray:
        return np.sin(points[:, 0]) * np.exp(points[:, 1])

    x = np.array([[0.4, -0.3, 0.2]])
    exact = np.array([[np.cos(0.4) * np.exp(-0.3), np.sin(0.4) * np.exp(-0.3), 0.0]])
    coarse = np.max(np.abs(central_difference(func, x, 0.1) - exact))
    fine = np.max(np.abs(central_difference(func, x, 0.05) - exact))
    assert 12.0 < coarse / fine < 20.0


def test_hodge_projectors() -> None:
    rng = np.random.default_rng(8)
    raw = rng.normal(size=(5, 4, 4, 3))
    form = raw - np.swapaxes(raw, 1, 2)
    plus, minus = hodge_split(form)
    assert np.allclose(hodge_split(plus)[0], plus)
    assert np.allclose(hodge_split(minus)[1], minus)
    assert np.allclose(hodge_split(minus)[0], 0.0)
    assert np.allclose(hodge_split(plus)[1], 0.0)


def _radius_squared_field() -> HiggsField:
    def evaluator(points: np.ndarray) -> np.ndarray:
        return np.sum(points * points, axis=1)[:, None, None] * np.array([1.0, 0.0, 0.0])

    def derivative(points: np.ndarray) -> np.ndarray:
        return 2.0 * points[:, :, None, None] * np.array([1.0, 0.0, 0.0])

    return HiggsField(4, 1, evaluator, derivative)


def test_laplacian_of_radius_squared() -> None:
    a = _radius_squared_field()
    x = standard_points(6, radius=2.0, dim=4, seed=4)
    expected = np.broadcast_to([[-8.0, 0.0, 0.0]], (6, 1, 3))
    assert np.allclose(covariant_laplacian(a, product_connection(4), x), expected, atol=1e-8)
    assert np.allclose(covariant_laplacian(a.numeric(), product_connection(4), x), expected, atol=1e-6)


def test_laplacian_of_lifted_monopole() -> None:
    pair = build_solution("ps-lift", verify=False)
    x = standard_points(40, radius=3.0, dim=4, seed=13)
    x = x[np.linalg.norm(x[:, :3], axis=1) > 0.5]
    # nabla^dagger nabla (Phi dx4) vanishes for the monopole
    analytic = covariant_laplacian(pair.field, pair.connection, x)
    numeric = covariant_laplacian(pair.field.numeric(), pair.connection.numeric(), x)
    assert np.allclose(analytic, 0.0, atol=1e-7)
    assert np.allclose(numeric, analytic, atol=1e-6)


def test_ball_integral_of_radius_squared() -> None:
    q = sphere_quadrature(4, 8)
    value = ball_integral(lambda x: np.sum(x * x, axis=1), 1.0, q, 8)
    assert np.isclose(value, np.pi**2 / 3, rtol=1e-12)
