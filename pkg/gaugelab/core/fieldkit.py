"""Field evaluators, gauge-covariant calculus and sphere/ball quadrature.

Evaluators are batched: they take points of shape ``(m, n)``. A Higgs field
returns ``(m, vdim, 3)`` and its derivative ``(m, n, vdim, 3)`` with
``[:, beta, c] = d_beta a_c``. A connection returns ``(m, n, 3)`` and its
derivative ``(m, n, n, 3)`` with ``[:, beta, alpha] = d_beta A_alpha``.
Public calculus functions accept a single point ``(n,)`` or a batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import roots_legendre

from gaugelab.config import settings
from gaugelab.core.algebra import LEVI_CIVITA_4, LIE_DIM, MAX_VDIM, commutator, contract
from gaugelab.utils.stencils import DERIV1_5P_4O, DERIV2_5P_4O, OFFSETS_5P

Evaluator = Callable[[NDArray[np.float64]], NDArray[np.float64]]

SUPPORTED_DIMS = (3, 4)
UNIT_SPHERE_AREA = {3: 4.0 * np.pi, 4: 2.0 * np.pi**2}


def as_points(x: ArrayLike, dim: int) -> Tuple[NDArray[np.float64], bool]:
    points = np.asarray(x, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    if points.ndim != 2 or points.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return points, single


def unbatch(values: NDArray[np.float64], single: bool) -> NDArray[np.float64]:
    return values[0] if single else values


def _fd_scale(points: NDArray[np.float64], step: float) -> NDArray[np.float64]:
    return step * (1.0 + np.linalg.norm(points, axis=1))


def central_difference(func: Evaluator, points: NDArray[np.float64], step: float) -> NDArray[np.float64]:
    """4th-order central first derivatives of ``func`` along every axis.

    Returns an array of shape ``(m, n, *out)``. The step at each point is
    ``step * (1 + |x|)``.
    """

    m, n = points.shape
    h = _fd_scale(points, step)
    offsets = OFFSETS_5P[[0, 1, 3, 4]]
    weights = DERIV1_5P_4O[[0, 1, 3, 4]]
    eye = np.eye(n)
    shifted = points[None, None] + offsets[:, None, None, None] * h[None, None, :, None] * eye[None, :, None, :]
    values = func(shifted.reshape(-1, n))
    values = values.reshape((offsets.size, n, m) + values.shape[1:])
    deriv = np.tensordot(weights, values, axes=1)
    deriv = deriv / h.reshape((1, m) + (1,) * (deriv.ndim - 2))
    return np.moveaxis(deriv, 0, 1)


def second_difference(func: Evaluator, points: NDArray[np.float64], step: float) -> NDArray[np.float64]:
    """4th-order central second derivatives ``d_alpha^2 func``, shape ``(m, n, *out)``."""

    m, n = points.shape
    h = _fd_scale(points, step)
    eye = np.eye(n)
    shifted = points[None, None] + OFFSETS_5P[:, None, None, None] * h[None, None, :, None] * eye[None, :, None, :]
    values = func(shifted.reshape(-1, n))
    values = values.reshape((OFFSETS_5P.size, n, m) + values.shape[1:])
    deriv = np.tensordot(DERIV2_5P_4O, values, axes=1)
    deriv = deriv / (h * h).reshape((1, m) + (1,) * (deriv.ndim - 2))
    return np.moveaxis(deriv, 0, 1)


def _diagonal(values: NDArray[np.float64]) -> NDArray[np.float64]:
    """Pick ``[:, alpha, alpha, ...]`` from an ``(m, n, n, ...)`` array."""

    idx = np.arange(values.shape[1])
    return values[:, idx, idx]


@dataclass(frozen=True, slots=True)
class GaugeConnection:
    """An su(2)-valued 1-form on R^n, ``A = sum_alpha A_alpha dx_alpha``."""

    dim: int
    evaluator: Evaluator
    derivative: Optional[Evaluator] = None
    step: float = field(default_factory=lambda: settings.fd_step)
    label: str = ""

    def __post_init__(self) -> None:
        if self.dim not in SUPPORTED_DIMS:
            raise ValueError(f"unsupported dimension {self.dim}")

    @property
    def mode(self) -> str:
        return "analytic" if self.derivative is not None else "numeric"

    def __call__(self, x: ArrayLike) -> NDArray[np.float64]:
        points, single = as_points(x, self.dim)
        return unbatch(self.evaluator(points), single)

    def partials(self, x: ArrayLike) -> NDArray[np.float64]:
        points, single = as_points(x, self.dim)
        if self.derivative is not None:
            return unbatch(self.derivative(points), single)
        return unbatch(central_difference(self.evaluator, points, self.step), single)

    def numeric(self, step: Optional[float] = None) -> "GaugeConnection":
        """The same connection with derivatives taken by finite differences."""

        return GaugeConnection(self.dim, self.evaluator, None, step or self.step, self.label)

    def scaled(self, coeff: float) -> "GaugeConnection":
        base = self.evaluator

        def evaluator(points: NDArray[np.float64]) -> NDArray[np.float64]:
            return coeff * base(points)

        derivative = None
        if self.derivative is not None:
            base_derivative = self.derivative

            def derivative(points: NDArray[np.float64]) -> NDArray[np.float64]:
                return coeff * base_derivative(points)

        return GaugeConnection(self.dim, evaluator, derivative, self.step, self.label)

    def shifted(self, higgs: "HiggsField", coeff: float) -> "GaugeConnection":
        """Return ``A + coeff * a`` with ``a`` read as an su(2)-valued 1-form."""

        if higgs.vdim != self.dim or higgs.dim != self.dim:
            raise ValueError("shifting a connection needs a Higgs field with vdim equal to the dimension")

        def evaluator(points: NDArray[np.float64]) -> NDArray[np.float64]:
            return self.evaluator(points) + coeff * higgs.evaluator(points)

        derivative = None
        if self.derivative is not None and higgs.derivative is not None:
            base, extra = self.derivative, higgs.derivative

            def derivative(points: NDArray[np.float64]) -> NDArray[np.float64]:
                return base(points) + coeff * extra(points)

        return GaugeConnection(self.dim, evaluator, derivative, self.step, self.label)

    def lifted(self, dim: int = 4) -> "GaugeConnection":
        """Pull back along the projection R^dim -> R^self.dim onto the first coordinates."""

        if dim < self.dim:
            raise ValueError("can only lift to a higher dimension")
        base_dim = self.dim

        def evaluator(points: NDArray[np.float64]) -> NDArray[np.float64]:
            out = np.zeros((points.shape[0], dim, LIE_DIM))
            out[:, :base_dim] = self.evaluator(np.ascontiguousarray(points[:, :base_dim]))
            return out

        derivative = None
        if self.derivative is not None:
            base = self.derivative

            def derivative(points: NDArray[np.float64]) -> NDArray[np.float64]:
                out = np.zeros((points.shape[0], dim, dim, LIE_DIM))
                out[:, :base_dim, :base_dim] = base(np.ascontiguousarray(points[:, :base_dim]))
                return out

        return GaugeConnection(dim, evaluator, derivative, self.step, self.label)


@dataclass(frozen=True, slots=True)
class HiggsField:
    """A section of V (x) su(2) over R^n."""

    dim: int
    vdim: int
    evaluator: Evaluator
    derivative: Optional[Evaluator] = None
    step: float = field(default_factory=lambda: settings.fd_step)
    label: str = ""

    def __post_init__(self) -> None:
        if self.dim not in SUPPORTED_DIMS:
            raise ValueError(f"unsupported dimension {self.dim}")
        if not 1 <= self.vdim <= MAX_VDIM:
            raise ValueError(f"vdim must lie in 1..{MAX_VDIM}, got {self.vdim}")

    @property
    def mode(self) -> str:
        return "analytic" if self.derivative is not None else "numeric"

    def __call__(self, x: ArrayLike) -> NDArray[np.float64]:
        points, single = as_points(x, self.dim)
        return unbatch(self.evaluator(points), single)

    def partials(self, x: ArrayLike) -> NDArray[np.float64]:
        points, single = as_points(x, self.dim)
        if self.derivative is not None:
            return unbatch(self.derivative(points), single)
        return unbatch(central_difference(self.evaluator, points, self.step), single)

    def second_partials(self, x: ArrayLike) -> NDArray[np.float64]:
        """Diagonal second derivatives ``d_alpha d_alpha a``, shape ``(m, n, vdim, 3)``."""

        points, single = as_points(x, self.dim)
        if self.derivative is not None:
            values = _diagonal(central_difference(self.derivative, points, self.step))
        else:
            values = second_difference(self.evaluator, points, self.step)
        return unbatch(values, single)

    def numeric(self, step: Optional[float] = None) -> "HiggsField":
        return HiggsField(self.dim, self.vdim, self.evaluator, None, step or self.step, self.label)

    def scaled(self, coeff: float) -> "HiggsField":
        base = self.evaluator

        def evaluator(points: NDArray[np.float64]) -> NDArray[np.float64]:
            return coeff * base(points)

        derivative = None
        if self.derivative is not None:
            base_derivative = self.derivative

            def derivative(points: NDArray[np.float64]) -> NDArray[np.float64]:
                return coeff * base_derivative(points)

        return HiggsField(self.dim, self.vdim, evaluator, derivative, self.step, self.label)

    def plus(self, other: "HiggsField", coeff: float = 1.0) -> "HiggsField":
        if (other.dim, other.vdim) != (self.dim, self.vdim):
            raise ValueError("fields must share dimension and vdim")
        left, right = self.evaluator, other.evaluator

        def evaluator(points: NDArray[np.float64]) -> NDArray[np.float64]:
            return left(points) + coeff * right(points)

        derivative = None
        if self.derivative is not None and other.derivative is not None:
            left_d, right_d = self.derivative, other.derivative

            def derivative(points: NDArray[np.float64]) -> NDArray[np.float64]:
                return left_d(points) + coeff * right_d(points)

        return HiggsField(self.dim, self.vdim, evaluator, derivative, self.step, self.label)

    def along(self, v: ArrayLike) -> "HiggsField":
        """Return ``a(v) = sum_c v_c a_c`` as a vdim-1 field."""

        weights = np.asarray(v, dtype=float)
        if weights.shape != (self.vdim,):
            raise ValueError(f"expected a vector of length {self.vdim}")
        base = self.evaluator

        def evaluator(points: NDArray[np.float64]) -> NDArray[np.float64]:
            return contract(base(points), weights)[:, None, :]

        derivative = None
        if self.derivative is not None:
            base_derivative = self.derivative

            def derivative(points: NDArray[np.float64]) -> NDArray[np.float64]:
                return contract(base_derivative(points), weights)[:, :, None, :]

        return HiggsField(self.dim, 1, evaluator, derivative, self.step, self.label)

    def components(self, indices: Sequence[int]) -> "HiggsField":
        picked = list(indices)
        base = self.evaluator

        def evaluator(points: NDArray[np.float64]) -> NDArray[np.float64]:
            return base(points)[:, picked]

        derivative = None
        if self.derivative is not None:
            base_derivative = self.derivative

            def derivative(points: NDArray[np.float64]) -> NDArray[np.float64]:
                return base_derivative(points)[:, :, picked]

        return HiggsField(self.dim, len(picked), evaluator, derivative, self.step, self.label)


def affine_field(const: ArrayLike, linear: ArrayLike | None = None, *, dim: int) -> HiggsField:
    """``a(x) = const + sum_beta x_beta linear[beta]`` with analytic derivatives."""

    c = np.array(const, dtype=float)
    vdim = c.shape[0]
    lin = np.zeros((dim, vdim, LIE_DIM)) if linear is None else np.array(linear, dtype=float)
    if lin.shape != (dim, vdim, LIE_DIM):
        raise ValueError(f"linear part must have shape {(dim, vdim, LIE_DIM)}, got {lin.shape}")

    def evaluator(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return c[None] + np.einsum("mb,bck->mck", points, lin)

    def derivative(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.broadcast_to(lin, (points.shape[0],) + lin.shape).copy()

    return HiggsField(dim, vdim, evaluator, derivative, label="affine")


def zero_field(dim: int, vdim: int) -> HiggsField:
    return affine_field(np.zeros((vdim, LIE_DIM)), dim=dim)


def affine_connection(const: ArrayLike | None = None, linear: ArrayLike | None = None, *, dim: int) -> GaugeConnection:
    """``A_alpha(x) = const[alpha] + sum_beta x_beta linear[beta, alpha]``."""

    c = np.zeros((dim, LIE_DIM)) if const is None else np.array(const, dtype=float)
    lin = np.zeros((dim, dim, LIE_DIM)) if linear is None else np.array(linear, dtype=float)
    if c.shape != (dim, LIE_DIM) or lin.shape != (dim, dim, LIE_DIM):
        raise ValueError("connection coefficients have the wrong shape")

    def evaluator(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return c[None] + np.einsum("mb,bak->mak", points, lin)

    def derivative(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.broadcast_to(lin, (points.shape[0],) + lin.shape).copy()

    return GaugeConnection(dim, evaluator, derivative, label="affine")


def product_connection(dim: int) -> GaugeConnection:
    conn = affine_connection(dim=dim)
    return GaugeConnection(dim, conn.evaluator, conn.derivative, label="product")


def covariant_derivative(
    a: HiggsField, A: GaugeConnection, x: ArrayLike, alpha: Optional[int] = None
) -> NDArray[np.float64]:
    """``d_alpha a + [A_alpha, a]``; every direction ``(…, n, vdim, 3)`` when ``alpha`` is None."""

    if a.dim != A.dim:
        raise ValueError("field and connection live on different spaces")
    points, single = as_points(x, a.dim)
    values = a.evaluator(points)
    result = a.partials(points) + commutator(A.evaluator(points)[:, :, None, :], values[:, None, :, :])
    if alpha is not None:
        if not 0 <= alpha < a.dim:
            raise ValueError(f"direction index must lie in 0..{a.dim - 1}")
        result = result[:, alpha]
    return unbatch(result, single)


def curvature(A: GaugeConnection, x: ArrayLike) -> NDArray[np.float64]:
    """``F_ab = d_a A_b - d_b A_a + [A_a, A_b]`` as an ``(…, n, n, 3)`` two-form."""

    points, single = as_points(x, A.dim)
    d = A.partials(points)
    conn = A.evaluator(points)
    form = d - np.swapaxes(d, 1, 2) + commutator(conn[:, :, None, :], conn[:, None, :, :])
    return unbatch(form, single)


def covariant_laplacian(a: HiggsField, A: GaugeConnection, x: ArrayLike) -> NDArray[np.float64]:
    """``nabla^dagger nabla a = -sum_alpha nabla_alpha nabla_alpha a`` on flat R^n."""

    if a.dim != A.dim:
        raise ValueError("field and connection live on different spaces")
    points, single = as_points(x, a.dim)
    values = a.evaluator(points)[:, None]
    first = a.partials(points)
    second = a.second_partials(points)
    conn = A.evaluator(points)[:, :, None, :]
    div_conn = _diagonal(A.partials(points))[:, :, None, :]
    inner = (
        second
        + commutator(div_conn, values)
        + 2.0 * commutator(conn, first)
        + commutator(conn, commutator(conn, values))
    )
    return unbatch(-np.sum(inner, axis=1), single)


def _check_four_form(omega: NDArray[np.float64]) -> None:
    if omega.shape[-3:-1] != (4, 4):
        raise ValueError("the Hodge star on two-forms is only defined here for n = 4")


def hodge_star(omega: ArrayLike) -> NDArray[np.float64]:
    """``(*w)_ab = 1/2 eps_abcd w_cd`` with orientation dx1 dx2 dx3 dx4."""

    form = np.asarray(omega, dtype=float)
    _check_four_form(form)
    return 0.5 * np.einsum("abcd,...cdk->...abk", LEVI_CIVITA_4, form)


def hodge_split(omega: ArrayLike) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Return the self-dual and anti-self-dual parts ``(w+, w-)``."""

    form = np.asarray(omega, dtype=float)
    star = hodge_star(form)
    return 0.5 * (form + star), 0.5 * (form - star)


def two_form_norm(omega: ArrayLike) -> NDArray[np.float64]:
    """``sqrt(sum_{a<b} |w_ab|^2)`` for antisymmetric forms."""

    form = np.asarray(omega, dtype=float)
    return np.sqrt(0.5 * np.sum(form * form, axis=(-3, -2, -1)))


def elementary_two_form(dim: int, coefficients: Mapping[Tuple[int, int], float], sigma: ArrayLike) -> NDArray[np.float64]:
    """Build ``sum c_ab dx_a ^ dx_b (x) sigma`` from ``{(a, b): c_ab}``."""

    form = np.zeros((dim, dim, LIE_DIM))
    s = np.asarray(sigma, dtype=float)
    for (alpha, beta), coeff in coefficients.items():
        form[alpha, beta] += coeff * s
        form[beta, alpha] -= coeff * s
    return form


@dataclass(frozen=True, slots=True)
class SphereQuadrature:
    dim: int
    level: int
    nodes: NDArray[np.float64]
    weights: NDArray[np.float64]

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))

    @property
    def size(self) -> int:
        return int(self.weights.size)


def _polar_rule(level: int, power: int, exact: float) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    t, w = roots_legendre(level)
    theta = 0.5 * np.pi * (t + 1.0)
    weights = 0.5 * np.pi * w * np.sin(theta) ** power
    return theta, weights * (exact / np.sum(weights))


@lru_cache(maxsize=32)
def sphere_quadrature(n: int, level: int) -> SphereQuadrature:
    """Product rule on S^{n-1}: Gauss-Legendre in polar angles, trapezoid in azimuth."""

    if n not in SUPPORTED_DIMS:
        raise ValueError(f"sphere quadrature supports n in {SUPPORTED_DIMS}, got {n}")
    if level < 4:
        raise ValueError(f"quadrature level must be at least 4, got {level}")
    count = 2 * level
    phi = 2.0 * np.pi * np.arange(count) / count
    phi_w = np.full(count, 2.0 * np.pi / count)
    if n == 3:
        theta, theta_w = _polar_rule(level, 1, 2.0)
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        nodes = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
        weights = np.outer(theta_w, phi_w)
    else:
        theta1, theta1_w = _polar_rule(level, 2, 0.5 * np.pi)
        theta2, theta2_w = _polar_rule(level, 1, 2.0)
        t1, t2, ph = np.meshgrid(theta1, theta2, phi, indexing="ij")
        nodes = np.stack(
            [
                np.sin(t1) * np.sin(t2) * np.cos(ph),
                np.sin(t1) * np.sin(t2) * np.sin(ph),
                np.sin(t1) * np.cos(t2),
                np.cos(t1),
            ],
            axis=-1,
        )
        weights = theta1_w[:, None, None] * theta2_w[None, :, None] * phi_w[None, None, :]
    nodes = np.ascontiguousarray(nodes.reshape(-1, n))
    weights = np.ascontiguousarray(weights.reshape(-1))
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return SphereQuadrature(dim=n, level=level, nodes=nodes, weights=weights)


def weighted_sum(weights: NDArray[np.float64], values: NDArray[np.float64], deterministic: Optional[bool] = None) -> NDArray[np.float64]:
    """``sum_i w_i values_i`` over the leading axis.

    The deterministic path avoids BLAS so the summation order is fixed.
    """

    use_fixed = settings.deterministic if deterministic is None else deterministic
    if use_fixed:
        return np.einsum("i,i...->...", weights, values)
    return np.tensordot(weights, values, axes=1)


def sphere_sum(
    f: Evaluator,
    r: float,
    q: SphereQuadrature,
    *,
    center: ArrayLike | None = None,
    deterministic: Optional[bool] = None,
) -> NDArray[np.float64] | float:
    """``sum_i w_i f(p + r node_i)``: the shell integral without the ``r^{n-1}`` factor."""

    points = r * q.nodes
    if center is not None:
        points = points + np.asarray(center, dtype=float)[None, :]
    values = np.asarray(f(points), dtype=float)
    result = weighted_sum(q.weights, values, deterministic)
    return float(result) if np.ndim(result) == 0 else result


def shell_integral(
    f: Evaluator,
    r: float,
    q: SphereQuadrature,
    *,
    center: ArrayLike | None = None,
    deterministic: Optional[bool] = None,
) -> NDArray[np.float64] | float:
    """``int_{|x - p| = r} f``."""

    if r <= 0:
        raise ValueError("radius must be positive")
    return r ** (q.dim - 1) * sphere_sum(f, r, q, center=center, deterministic=deterministic)


def ball_integral(
    f: Evaluator,
    r: float,
    q: SphereQuadrature,
    radial_level: Optional[int] = None,
    *,
    inner: float = 0.0,
    center: ArrayLike | None = None,
    deterministic: Optional[bool] = None,
) -> NDArray[np.float64] | float:
    """``int_{inner <= |x - p| <= r} f`` with Gauss-Legendre in the radius."""

    if r <= 0 or not 0.0 <= inner < r:
        raise ValueError("need 0 <= inner < r")
    level = radial_level or settings.radial_level
    t, w = roots_legendre(level)
    half = 0.5 * (r - inner)
    radii = inner + half * (t + 1.0)
    total: NDArray[np.float64] | float = 0.0
    for rho, weight in zip(radii, w * half):
        total = total + weight * rho ** (q.dim - 1) * np.asarray(
            sphere_sum(f, float(rho), q, center=center, deterministic=deterministic)
        )
    return float(total) if np.ndim(total) == 0 else np.asarray(total)


def standard_points(
    count: int = 100, radius: float = 5.0, dim: int = 4, seed: Optional[int] = None
) -> NDArray[np.float64]:
    """Seeded points uniformly distributed in the ball of the given radius."""

    rng = np.random.default_rng(settings.seed if seed is None else seed)
    directions = rng.normal(size=(count, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.random(count) ** (1.0 / dim)
    return directions * radii[:, None]


__all__ = [
    "Evaluator",
    "GaugeConnection",
    "HiggsField",
    "SphereQuadrature",
    "UNIT_SPHERE_AREA",
    "affine_connection",
    "as_points",
    "affine_field",
    "ball_integral",
    "central_difference",
    "covariant_derivative",
    "covariant_laplacian",
    "curvature",
    "elementary_two_form",
    "hodge_split",
    "hodge_star",
    "product_connection",
    "second_difference",
    "shell_integral",
    "sphere_quadrature",
    "sphere_sum",
    "standard_points",
    "two_form_norm",
    "unbatch",
    "weighted_sum",
    "zero_field",
]
