"""Pointwise residuals of the field equations, the stress tensor and the Pohozaev check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from gaugelab.config import settings
from gaugelab.core.algebra import (
    LEVI_CIVITA_3,
    LEVI_CIVITA_4,
    commutator,
    commutator_sum,
    double_commutator,
    pairwise_commutators,
)
from gaugelab.core.fieldkit import (
    GaugeConnection,
    HiggsField,
    as_points,
    ball_integral,
    covariant_derivative,
    covariant_laplacian,
    curvature,
    hodge_split,
    shell_integral,
    sphere_quadrature,
    two_form_norm,
    unbatch,
)
from gaugelab.services.solutions import MonopolePair, SolutionPair, shifted_pair

EQUATIONS = ("eq11", "kw", "kw_half", "vw", "monopole", "wedge", "covconst")

# Oriented frame of self-dual 2-forms: dx12 + dx34, dx13 + dx42, dx14 + dx23.
SELF_DUAL_FRAME = np.zeros((3, 4, 4))
for _k, ((_a, _b), (_c, _d)) in enumerate((((0, 1), (2, 3)), ((0, 2), (3, 1)), ((0, 3), (1, 2)))):
    for _i, _j in ((_a, _b), (_c, _d)):
        SELF_DUAL_FRAME[_k, _i, _j] = 1.0
        SELF_DUAL_FRAME[_k, _j, _i] = -1.0
SELF_DUAL_FRAME.setflags(write=False)

# J[k, g, d] = 1/2 eps_{g j l d} w^k_{jl}
_FRAME_DUAL = 0.5 * np.einsum("gjld,kjl->kgd", LEVI_CIVITA_4, SELF_DUAL_FRAME)
_FRAME_DUAL.setflags(write=False)

VW_SCALE = 2.0 ** -0.25


@dataclass(slots=True)
class ResidualReport:
    equation: str
    points: NDArray[np.float64]
    norms: NDArray[np.float64]
    components: Dict[str, NDArray[np.float64]] = field(default_factory=dict)
    tau: Optional[float] = None

    def max_norm(self) -> float:
        return float(np.max(self.norms)) if self.norms.size else 0.0

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.norms * self.norms))) if self.norms.size else 0.0

    @property
    def label(self) -> str:
        return f"kw({self.tau:g})" if self.equation == "kw" and self.tau is not None else self.equation


@dataclass(slots=True)
class KWResidual:
    plus: NDArray[np.float64]
    minus: NDArray[np.float64]
    divergence: NDArray[np.float64]

    def component_norms(self) -> Dict[str, NDArray[np.float64]]:
        return {
            "plus": two_form_norm(self.plus),
            "minus": two_form_norm(self.minus),
            "divergence": np.linalg.norm(self.divergence, axis=-1),
        }


@dataclass(frozen=True, slots=True)
class VafaWittenSplit:
    connection: GaugeConnection
    alpha: HiggsField
    phi: HiggsField


@dataclass(slots=True)
class VWResidual:
    selfdual: NDArray[np.float64]
    oneform: NDArray[np.float64]

    def component_norms(self) -> Dict[str, NDArray[np.float64]]:
        return {
            "selfdual": np.sqrt(np.sum(self.selfdual**2, axis=(-2, -1))),
            "oneform": np.sqrt(np.sum(self.oneform**2, axis=(-2, -1))),
        }


@dataclass(slots=True)
class StressTensor:
    points: NDArray[np.float64]
    values: NDArray[np.float64]


@dataclass(slots=True)
class PohozaevReport:
    r: float
    lhs: float
    rhs: float
    gap: float


def _combine(components: Dict[str, NDArray[np.float64]]) -> NDArray[np.float64]:
    return np.sqrt(sum(values * values for values in components.values()))


def _require_one_forms(pair: SolutionPair) -> None:
    if pair.dim != 4 or pair.vdim != 4:
        raise ValueError("this equation needs n = 4 and a 1-form valued field (vdim = 4)")


def residual_eq11(pair: SolutionPair, x: ArrayLike) -> NDArray[np.float64]:
    """``nabla^dagger nabla a + sum_c [a_c, [a, a_c]]`` per component."""

    points, single = as_points(x, pair.dim)
    values = pair.field.evaluator(points)
    result = covariant_laplacian(pair.field, pair.connection, points) + double_commutator(values)
    return unbatch(result, single)


def residual_kw(pair: SolutionPair, tau: float, x: ArrayLike) -> KWResidual:
    """The three Kapustin-Witten expressions at ``x`` (batched)."""

    _require_one_forms(pair)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    points, _ = as_points(x, 4)
    nabla = covariant_derivative(pair.field, pair.connection, points)
    form = curvature(pair.connection, points) - pairwise_commutators(pair.field.evaluator(points))
    d_a = nabla - np.swapaxes(nabla, 1, 2)
    form_plus, form_minus = hodge_split(form)
    d_plus, d_minus = hodge_split(d_a)
    return KWResidual(
        plus=(1.0 - tau) * form_plus - tau * d_plus,
        minus=tau * form_minus + (1.0 - tau) * d_minus,
        divergence=-np.einsum("maak->mk", nabla),
    )


def split_vafa_witten(pair: SolutionPair) -> VafaWittenSplit:
    """Read ``a`` as ``phi = 2^{-1/4} a_1`` and ``alpha_k = 2^{-1/4} a_{k+1}``."""

    _require_one_forms(pair)
    return VafaWittenSplit(
        connection=pair.connection,
        alpha=pair.field.components([1, 2, 3]).scaled(VW_SCALE),
        phi=pair.field.components([0]).scaled(VW_SCALE),
    )


def residual_vw(split: VafaWittenSplit, x: ArrayLike) -> VWResidual:
    points, _ = as_points(x, 4)
    form = curvature(split.connection, points)
    selfdual_part = 0.25 * np.einsum("kab,mabx->mkx", SELF_DUAL_FRAME, form)
    alpha = split.alpha.evaluator(points)
    phi = split.phi.evaluator(points)
    brackets = pairwise_commutators(alpha)
    selfdual = (
        selfdual_part
        - np.einsum("kbc,mbcx->mkx", LEVI_CIVITA_3, brackets) / (2.0 * np.sqrt(2.0))
        - commutator(phi, alpha) / np.sqrt(2.0)
    )
    nabla_phi = covariant_derivative(split.phi, split.connection, points)[:, :, 0]
    nabla_alpha = covariant_derivative(split.alpha, split.connection, points)
    oneform = nabla_phi - np.einsum("kgd,mgkx->mdx", _FRAME_DUAL, nabla_alpha)
    return VWResidual(selfdual=selfdual, oneform=oneform)


def residual_monopole(m: MonopolePair, x: ArrayLike) -> NDArray[np.float64]:
    """``F_ij - eps_ijk nabla_k Phi``."""

    points, single = as_points(x, 3)
    nabla_phi = covariant_derivative(m.higgs, m.connection, points)[:, :, 0]
    result = curvature(m.connection, points) - np.einsum("ijk,mkx->mijx", LEVI_CIVITA_3, nabla_phi)
    return unbatch(result, single)


def energy_density(pair: SolutionPair, x: ArrayLike) -> NDArray[np.float64]:
    """``|nabla a|^2 + 1/2 sum_{b,c} |[a_b, a_c]|^2``."""

    points, single = as_points(x, pair.dim)
    nabla = covariant_derivative(pair.field, pair.connection, points)
    result = np.sum(nabla * nabla, axis=(1, 2, 3)) + 0.5 * commutator_sum(pair.field.evaluator(points))
    return unbatch(result, single)


def shift_duality_residual(pair: SolutionPair, x: ArrayLike) -> Dict[str, NDArray[np.float64]]:
    """Anti-self-dual part of ``F_{A+a}`` and self-dual part of ``F_{A-a}``."""

    _require_one_forms(pair)
    points, _ = as_points(x, 4)
    _, plus_asd = hodge_split(curvature(shifted_pair(pair, 1), points))
    minus_sd, _ = hodge_split(curvature(shifted_pair(pair, -1), points))
    return {"plus_shift_asd": two_form_norm(plus_asd), "minus_shift_sd": two_form_norm(minus_sd)}


def _stress_terms(pair: SolutionPair, v: ArrayLike, points: NDArray[np.float64]):
    direction = pair.field.along(v)
    nabla_b = covariant_derivative(direction, pair.connection, points)[:, :, 0]
    b = direction.evaluator(points)[:, 0]
    values = pair.field.evaluator(points)
    brackets = commutator(values, b[:, None, :])  # [a_c, b]
    return nabla_b, b, values, brackets


def stress_tensor(pair: SolutionPair, v: ArrayLike, x: ArrayLike) -> StressTensor:
    """``S_ab = <nabla_a b, nabla_b b> - 1/2 delta_ab (|nabla b|^2 + sum_c |[a_c, b]|^2)`` with ``b = a(v)``."""

    points, _ = as_points(x, pair.dim)
    nabla_b, _, _, brackets = _stress_terms(pair, v, points)
    trace = np.sum(nabla_b * nabla_b, axis=(1, 2)) + np.sum(brackets * brackets, axis=(1, 2))
    values = np.einsum("max,mbx->mab", nabla_b, nabla_b) - 0.5 * trace[:, None, None] * np.eye(pair.dim)[None]
    return StressTensor(points=points, values=values)


def stress_divergence_source(pair: SolutionPair, v: ArrayLike, x: ArrayLike) -> NDArray[np.float64]:
    """Right-hand side of ``d_b S_ab`` for solutions of eq11.

    ``<F_ba, [b, nabla_b b]> - sum_c <[nabla_a a_c, b], [a_c, b]>``.
    """

    points, _ = as_points(x, pair.dim)
    nabla_b, b, _, brackets = _stress_terms(pair, v, points)
    form = curvature(pair.connection, points)
    twisted = commutator(b[:, None, :], nabla_b)  # [b, nabla_beta b]
    source = np.einsum("mbax,mbx->ma", form, twisted)
    nabla_a = covariant_derivative(pair.field, pair.connection, points)  # [m, alpha, c]
    moved = commutator(nabla_a, b[:, None, None, :])
    return source - np.einsum("macx,mcx->ma", moved, brackets)


def stress_divergence(pair: SolutionPair, v: ArrayLike, x: ArrayLike, step: Optional[float] = None) -> NDArray[np.float64]:
    """``d_b S_ab`` by 4th-order central differences of the stress tensor."""

    points, _ = as_points(x, pair.dim)
    h = (step or settings.fd_step) * (1.0 + np.linalg.norm(points, axis=1))
    weights = {-2: 1.0 / 12.0, -1: -8.0 / 12.0, 1: 8.0 / 12.0, 2: -1.0 / 12.0}
    result = np.zeros((points.shape[0], pair.dim))
    for beta in range(pair.dim):
        shift = np.zeros(pair.dim)
        shift[beta] = 1.0
        for offset, weight in weights.items():
            shifted = points + offset * h[:, None] * shift[None, :]
            result += weight * stress_tensor(pair, v, shifted).values[:, :, beta] / h[:, None]
    return result


def pohozaev_check(
    pair: SolutionPair,
    v: ArrayLike,
    r: float,
    angular_level: Optional[int] = None,
    radial_level: Optional[int] = None,
) -> PohozaevReport:
    """Evaluate both sides of the Pohozaev identity on ``B_r`` by quadrature."""

    n = pair.dim
    q = sphere_quadrature(n, angular_level or settings.angular_level)

    def boundary(points: NDArray[np.float64]) -> NDArray[np.float64]:
        nabla_b, _, _, brackets = _stress_terms(pair, v, points)
        radial = np.einsum("ma,max->mx", points, nabla_b) / np.linalg.norm(points, axis=1)[:, None]
        return (
            np.sum(radial * radial, axis=1)
            - 0.5 * np.sum(nabla_b * nabla_b, axis=(1, 2))
            - 0.5 * np.sum(brackets * brackets, axis=(1, 2))
        )

    def bulk(points: NDArray[np.float64]) -> NDArray[np.float64]:
        nabla_b, _, _, brackets = _stress_terms(pair, v, points)
        return 0.5 * (n - 2) * np.sum(nabla_b * nabla_b, axis=(1, 2)) + 0.5 * n * np.sum(brackets * brackets, axis=(1, 2))

    def source(points: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.einsum("ma,ma->m", points, stress_divergence_source(pair, v, points))

    boundary_term = r * float(shell_integral(boundary, r, q))
    bulk_term = float(ball_integral(bulk, r, q, radial_level))
    lhs = boundary_term + bulk_term
    rhs = float(ball_integral(source, r, q, radial_level))
    # the two sides can cancel to zero, so measure against the largest single term
    scale = max(abs(boundary_term), abs(bulk_term), abs(rhs))
    gap = 0.0 if scale == 0.0 else abs(lhs - rhs) / scale
    return PohozaevReport(r=r, lhs=lhs, rhs=rhs, gap=gap)


def _component_names(prefix: str, count: int) -> List[str]:
    return [f"{prefix}{index + 1}" for index in range(count)]


def residual_report(
    pair: Union[SolutionPair, MonopolePair],
    equation: str,
    points: ArrayLike,
    tau: Optional[float] = None,
) -> ResidualReport:
    """Per-point and per-component residual norms for one equation."""

    if equation not in EQUATIONS:
        raise ValueError(f"Unknown equation {equation!r}; expected one of {EQUATIONS}")
    if equation == "monopole":
        if not isinstance(pair, MonopolePair):
            raise ValueError("the monopole equation needs a MonopolePair")
        pts, _ = as_points(points, 3)
        norms = two_form_norm(residual_monopole(pair, pts))
        return ResidualReport("monopole", pts, norms, {"bogomolny": norms})
    if isinstance(pair, MonopolePair):
        raise ValueError(f"equation {equation!r} needs a SolutionPair")

    pts, _ = as_points(points, pair.dim)
    if equation == "eq11":
        values = residual_eq11(pair, pts)
        parts = np.linalg.norm(values, axis=-1)
        components = dict(zip(_component_names("a", pair.vdim), parts.T))
    elif equation in ("kw", "kw_half"):
        tau = 0.5 if equation == "kw_half" else tau
        if tau is None:
            raise ValueError("the kw equation needs a tau value")
        components = residual_kw(pair, tau, pts).component_norms()
        return ResidualReport("kw", pts, _combine(components), components, tau=tau)
    elif equation == "vw":
        components = residual_vw(split_vafa_witten(pair), pts).component_norms()
    elif equation == "wedge":
        brackets = pairwise_commutators(pair.field.evaluator(pts))
        components = {"wedge": np.sqrt(0.5 * np.sum(brackets * brackets, axis=(1, 2, 3)))}
    else:
        nabla = covariant_derivative(pair.field, pair.connection, pts)
        components = {"nabla": np.sqrt(np.sum(nabla * nabla, axis=(1, 2, 3)))}
    return ResidualReport(equation, pts, _combine(components), components)


def claim_residuals(pair: SolutionPair, points: ArrayLike) -> Dict[str, float]:
    """Worst residual for every equation the pair claims to solve."""

    claims = pair.claims
    values: Dict[str, float] = {}
    if claims.eq11:
        values["eq11"] = residual_report(pair, "eq11", points).max_norm()
    for tau in claims.kw:
        values[f"kw({tau:g})"] = residual_report(pair, "kw", points, tau=tau).max_norm()
    if claims.vw:
        values["vw"] = residual_report(pair, "vw", points).max_norm()
    if claims.wedge_zero:
        values["wedge"] = residual_report(pair, "wedge", points).max_norm()
    if claims.covariantly_constant:
        values["covconst"] = residual_report(pair, "covconst", points).max_norm()
    return values


__all__ = [
    "EQUATIONS",
    "KWResidual",
    "PohozaevReport",
    "ResidualReport",
    "SELF_DUAL_FRAME",
    "StressTensor",
    "VWResidual",
    "VafaWittenSplit",
    "claim_residuals",
    "energy_density",
    "pohozaev_check",
    "residual_eq11",
    "residual_kw",
    "residual_monopole",
    "residual_report",
    "residual_vw",
    "shift_duality_residual",
    "split_vafa_witten",
    "stress_divergence",
    "stress_divergence_source",
    "stress_tensor",
]
