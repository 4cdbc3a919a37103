"""Closed-form gauge pairs and the solution registry."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray

from gaugelab.config import settings
from gaugelab.core.algebra import LEVI_CIVITA_3, LEVI_CIVITA_4, LIE_DIM
from gaugelab.core.fieldkit import (
    GaugeConnection,
    HiggsField,
    affine_connection,
    affine_field,
    ball_integral,
    covariant_derivative,
    product_connection,
    sphere_quadrature,
    standard_points,
)

# Below this value of t = 2|x| the profile functions use their Taylor series.
SERIES_CUTOFF = 0.05
UNIT_TOL = 1e-12


class HodgeConventionError(RuntimeError):
    """Raised when neither sign of the monopole lift solves the tau = 1/2 system."""

    def __init__(self, residuals: Dict[int, float], tol: float) -> None:
        detail = ", ".join(f"sign={sign:+d}: {value:.3e}" for sign, value in residuals.items())
        super().__init__(f"No lift sign solves the tau=1/2 system below {tol:g} ({detail})")
        self.residuals = residuals
        self.tol = tol


class ClaimViolationError(RuntimeError):
    """Raised when a constructed pair fails one of its claimed equations."""

    def __init__(self, label: str, claim: str, value: float, tol: float) -> None:
        super().__init__(f"Solution {label!r} violates claim {claim}: residual {value:.3e} > {tol:g}")
        self.label = label
        self.claim = claim
        self.value = value
        self.tol = tol


@dataclass(frozen=True, slots=True)
class Claims:
    eq11: bool = False
    kw: Tuple[float, ...] = ()
    vw: bool = False
    wedge_zero: bool = False
    covariantly_constant: bool = False

    def solves_kw(self, tau: float) -> bool:
        return any(abs(tau - claimed) < 1e-12 for claimed in self.kw)

    def names(self) -> List[str]:
        items = []
        if self.eq11:
            items.append("eq11")
        items.extend(f"kw({tau:g})" for tau in self.kw)
        if self.vw:
            items.append("vw")
        if self.wedge_zero:
            items.append("wedge")
        if self.covariantly_constant:
            items.append("covconst")
        return items


@dataclass(frozen=True, slots=True)
class MonopolePair:
    connection: GaugeConnection
    higgs: HiggsField


@dataclass(frozen=True, slots=True)
class SolutionPair:
    connection: GaugeConnection
    field: HiggsField
    label: str
    claims: Claims = Claims()

    def __post_init__(self) -> None:
        if self.connection.dim != self.field.dim:
            raise ValueError("connection and field must live on the same space")

    @property
    def dim(self) -> int:
        return self.field.dim

    @property
    def vdim(self) -> int:
        return self.field.vdim


@dataclass(frozen=True, slots=True)
class SolutionInfo:
    label: str
    description: str
    claims: Tuple[str, ...]


def _profile(t: NDArray[np.float64]) -> Tuple[NDArray[np.float64], ...]:
    """Return ``m, m'/t, q, q'/t`` for ``m = coth t/t - 1/t^2`` and ``q = 1/t^2 - 1/(t sinh t)``."""

    small = t < SERIES_CUTOFF
    ts = np.where(small, t, 0.0)
    t2 = ts * ts
    m_s = 1.0 / 3.0 + t2 * (-1.0 / 45.0 + t2 * (2.0 / 945.0 + t2 * (-1.0 / 4725.0 + t2 * 2.0 / 93555.0)))
    mp_s = -2.0 / 45.0 + t2 * (8.0 / 945.0 + t2 * (-6.0 / 4725.0 + t2 * 16.0 / 93555.0))
    q_s = 1.0 / 6.0 + t2 * (-7.0 / 360.0 + t2 * (31.0 / 15120.0 - t2 * 127.0 / 604800.0))
    qp_s = -7.0 / 180.0 + t2 * (31.0 / 3780.0 - t2 * 127.0 / 100800.0)

    tl = np.where(small, 1.0, t)
    decay = np.expm1(-2.0 * tl)  # e^{-2t} - 1, never zero here
    coth = 1.0 - 2.0 * np.exp(-2.0 * tl) / decay
    csch = -2.0 * np.exp(-tl) / decay
    m_l = coth / tl - 1.0 / tl**2
    mp_l = -csch * csch / tl - coth / tl**2 + 2.0 / tl**3
    q_l = 1.0 / tl**2 - csch / tl
    qp_l = -2.0 / tl**3 + csch * coth / tl + csch / tl**2
    return (
        np.where(small, m_s, m_l),
        np.where(small, mp_s, mp_l / tl),
        np.where(small, q_s, q_l),
        np.where(small, qp_s, qp_l / tl),
    )


def ps_monopole() -> MonopolePair:
    """Charge-one spherically symmetric monopole for the bracket ``[b, c] = 2 b x c``.

    With ``t = 2|x|``: ``Phi = -x (coth t - 1/t)/|x|`` and
    ``A^a_i = eps_aij x_j (1 - t/sinh t)/(2|x|^2)``.
    """

    def radial(points: NDArray[np.float64]) -> Tuple[NDArray[np.float64], ...]:
        t = 2.0 * np.linalg.norm(points, axis=1)
        m, mp_t, q, qp_t = _profile(t)
        return 2.0 * m, 8.0 * mp_t, 2.0 * q, 8.0 * qp_t

    def higgs(points: NDArray[np.float64]) -> NDArray[np.float64]:
        u, _, _, _ = radial(points)
        return (-points * u[:, None])[:, None, :]

    def higgs_derivative(points: NDArray[np.float64]) -> NDArray[np.float64]:
        u, du_r, _, _ = radial(points)
        eye = np.eye(3)
        # [m, k, a] = d_k Phi^a
        d = -(eye[None] * u[:, None, None] + points[:, :, None] * points[:, None, :] * du_r[:, None, None])
        return d[:, :, None, :]

    def connection(points: NDArray[np.float64]) -> NDArray[np.float64]:
        _, _, w, _ = radial(points)
        return np.einsum("aij,mj->mia", LEVI_CIVITA_3, points) * w[:, None, None]

    def connection_derivative(points: NDArray[np.float64]) -> NDArray[np.float64]:
        _, _, w, dw_r = radial(points)
        # [m, k, i, a] = d_k A_i^a
        constant = np.einsum("aik->kia", LEVI_CIVITA_3)[None] * w[:, None, None, None]
        rotated = np.einsum("ail,ml->mia", LEVI_CIVITA_3, points)
        return constant + points[:, :, None, None] * rotated[:, None] * dw_r[:, None, None, None]

    return MonopolePair(
        connection=GaugeConnection(3, connection, connection_derivative, label="ps"),
        higgs=HiggsField(3, 1, higgs, higgs_derivative, label="ps"),
    )


def _lift_higgs(phi: HiggsField, sign: int) -> HiggsField:
    """``a = sign * Phi dx_4`` as a vdim-4 field on R^4."""

    def evaluator(points: NDArray[np.float64]) -> NDArray[np.float64]:
        out = np.zeros((points.shape[0], 4, LIE_DIM))
        out[:, 3] = sign * phi.evaluator(np.ascontiguousarray(points[:, :3]))[:, 0]
        return out

    derivative = None
    if phi.derivative is not None:
        base = phi.derivative

        def derivative(points: NDArray[np.float64]) -> NDArray[np.float64]:
            out = np.zeros((points.shape[0], 4, 4, LIE_DIM))
            out[:, :3, 3] = sign * base(np.ascontiguousarray(points[:, :3]))[:, :, 0]
            return out

    return HiggsField(4, 4, evaluator, derivative, phi.step, "ps-lift")


def lift_to_r4(m: MonopolePair, sign: Optional[int] = None, *, tol: Optional[float] = None) -> SolutionPair:
    """Pull the monopole back to R^4 and set ``a = sign * Phi dx_4``.

    With no sign given both signs are tried and the one solving the
    tau = 1/2 system on the standard point set is kept.
    """

    from gaugelab.services.residuals import residual_report

    threshold = settings.residual_tol if tol is None else tol
    connection = m.connection.lifted(4)
    claims = Claims(eq11=True, kw=(0.5,), wedge_zero=True)
    if sign is not None:
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return SolutionPair(connection, _lift_higgs(m.higgs, sign), "ps-lift", claims)

    points = standard_points(dim=4)
    residuals: Dict[int, float] = {}
    for candidate in (1, -1):
        pair = SolutionPair(connection, _lift_higgs(m.higgs, candidate), "ps-lift", claims)
        value = residual_report(pair, "kw", points, tau=0.5).max_norm()
        residuals[candidate] = value
        if value < threshold:
            logger.debug("solutions.lift_sign", sign=candidate, residual=value)
            return pair
    raise HodgeConventionError(residuals, threshold)


def _require_unit(name: str, vector: NDArray[np.float64]) -> None:
    if abs(float(np.linalg.norm(vector)) - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} must be a unit vector")


COMMUTING_KINDS = ("constant", "linear_selfdual", "radial_harmonic")


def commuting_mode(kind: str, v: ArrayLike, sigma: ArrayLike, dim: int = 4) -> SolutionPair:
    """Harmonic modes ``s (x) sigma`` with the product connection.

    ``constant`` places ``sigma`` along ``v``; the two 1-form modes use all of
    V = R^n and ignore ``v`` beyond its unit check.
    """

    vec = np.asarray(v, dtype=float)
    s = np.asarray(sigma, dtype=float)
    _require_unit("v", vec)
    _require_unit("sigma", s)
    connection = product_connection(dim)
    if kind == "constant":
        higgs = affine_field(np.outer(vec, s), dim=dim)
        four = dim == 4 and vec.size == 4
        claims = Claims(
            eq11=True,
            kw=(0.0, 0.5, 1.0) if four else (),
            vw=four,
            wedge_zero=True,
            covariantly_constant=True,
        )
    elif kind == "linear_selfdual":
        if dim != 4 or vec.size != 4:
            raise ValueError("linear_selfdual needs n = vdim = 4")
        linear = np.zeros((4, 4, LIE_DIM))
        # s = -x2 dx1 + x1 dx2 - x4 dx3 + x3 dx4
        linear[1, 0] = -s
        linear[0, 1] = s
        linear[3, 2] = -s
        linear[2, 3] = s
        higgs = affine_field(np.zeros((4, LIE_DIM)), linear, dim=4)
        claims = Claims(eq11=True, kw=(0.0,), vw=True, wedge_zero=True)
    elif kind == "radial_harmonic":
        if vec.size != dim:
            raise ValueError("radial_harmonic needs vdim = n")
        linear = np.einsum("bc,k->bck", np.eye(dim), s)
        higgs = affine_field(np.zeros((dim, LIE_DIM)), linear, dim=dim)
        claims = Claims(eq11=True, wedge_zero=True)
    else:
        raise ValueError(f"Unknown commuting mode {kind!r}; expected one of {COMMUTING_KINDS}")
    return SolutionPair(connection, replace(higgs, label=kind), kind, claims)


def tau_coefficients(tau: float) -> Tuple[float, float]:
    """Return ``(beta, gamma)`` with ``A^ = A + beta a`` and ``a^ = gamma a``."""

    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie strictly between 0 and 1, got {tau}")
    denom = 2.0 * tau * (1.0 - tau)
    return (1.0 - 2.0 * tau) / denom, (1.0 - 2.0 * tau + 2.0 * tau * tau) / denom


def _check_transformable(p: SolutionPair, tau: float) -> None:
    if p.vdim != 4 or p.dim != 4:
        raise ValueError("the tau-transform acts on 1-form valued fields on R^4")
    if not p.claims.wedge_zero:
        raise ValueError("the tau-transform needs a pair with a ^ a = 0")
    if not p.claims.solves_kw(tau):
        raise ValueError(f"pair {p.label!r} does not claim the tau={tau:g} system")


def tau_transform(p: SolutionPair, tau: float) -> SolutionPair:
    """Map a tau-solution with ``a ^ a = 0`` to a solution of the tau = 1/2 system."""

    beta, gamma = tau_coefficients(tau)
    _check_transformable(p, tau)
    connection = p.connection.shifted(p.field, beta) if beta != 0.0 else p.connection
    claims = Claims(eq11=True, kw=(0.5,), wedge_zero=True)
    return SolutionPair(connection, p.field.scaled(gamma), f"{p.label}->tau0.5", claims)


def inverse_tau_transform(p: SolutionPair, tau: float) -> SolutionPair:
    """Map a tau = 1/2 solution with ``a ^ a = 0`` to a solution of the tau system."""

    beta, gamma = tau_coefficients(tau)
    _check_transformable(p, 0.5)
    higgs = p.field.scaled(1.0 / gamma)
    connection = p.connection.shifted(higgs, -beta) if beta != 0.0 else p.connection
    claims = Claims(eq11=True, kw=(tau,), wedge_zero=True)
    return SolutionPair(connection, higgs, f"{p.label}->tau{tau:g}", claims)


DEFAULT_ABELIAN_MATRIX = np.array(
    [
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
)
DEFAULT_ABELIAN_MATRIX.setflags(write=False)


def abelian_pair(
    alpha: ArrayLike | None = None,
    sigma: ArrayLike = (1.0, 0.0, 0.0),
    c: ArrayLike = (1.0, 0.0, 0.0, 0.0),
) -> SolutionPair:
    """``A = alpha sigma`` with ``alpha_b = sum_g M_bg x_g`` and a constant ``a = c (x) sigma``.

    ``d alpha`` must be anti-self-dual.
    """

    matrix = DEFAULT_ABELIAN_MATRIX if alpha is None else np.asarray(alpha, dtype=float)
    if matrix.shape != (4, 4):
        raise ValueError("alpha must be given as a 4x4 matrix")
    s = np.asarray(sigma, dtype=float)
    _require_unit("sigma", s)
    coeffs = np.asarray(c, dtype=float)
    # (d alpha)_{gb} = d_g alpha_b - d_b alpha_g = M_bg - M_gb
    d_alpha = matrix.T - matrix
    star = 0.5 * np.einsum("abcd,cd->ab", LEVI_CIVITA_4, d_alpha)
    if np.max(np.abs(d_alpha + star)) > 1e-12:
        raise ValueError("d alpha must be anti-self-dual")
    linear = np.einsum("bg,k->gbk", matrix, s)
    connection = affine_connection(linear=linear, dim=4)
    higgs = affine_field(np.outer(coeffs, s), dim=4)
    four = coeffs.size == 4
    claims = Claims(
        eq11=True,
        kw=(0.0,) if four else (),
        vw=four,
        wedge_zero=True,
        covariantly_constant=True,
    )
    return SolutionPair(connection, higgs, "abelian", claims)


def shifted_pair(p: SolutionPair, sign: int) -> GaugeConnection:
    """``A + sign * a``; self-dual curvature for +1, anti-self-dual for -1 on tau = 1/2 pairs."""

    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return p.connection.shifted(p.field, float(sign))


def monopole_energy(m: MonopolePair, r: float, angular_level: Optional[int] = None, radial_level: Optional[int] = None) -> float:
    """``int_{B_r} |nabla Phi|^2``; tends to 2 pi for the charge-one monopole."""

    q = sphere_quadrature(3, angular_level or settings.angular_level)

    def density(points: NDArray[np.float64]) -> NDArray[np.float64]:
        grad = covariant_derivative(m.higgs, m.connection, points)
        return np.sum(grad * grad, axis=(1, 2, 3))

    return float(ball_integral(density, r, q, radial_level))


def _build_ps_lift() -> SolutionPair:
    return lift_to_r4(ps_monopole())


def _build_const_mode() -> SolutionPair:
    return commuting_mode("constant", (1.0, 0.0, 0.0, 0.0), (1.0, 0.0, 0.0))


def _build_linear_mode() -> SolutionPair:
    return commuting_mode("linear_selfdual", (1.0, 0.0, 0.0, 0.0), (0.0, 0.0, 1.0))


def _build_abelian() -> SolutionPair:
    return abelian_pair(c=(0.5, -1.0, 0.25, 2.0))


def _build_tau_quarter() -> SolutionPair:
    pair = inverse_tau_transform(_build_ps_lift(), 0.25)
    return replace(pair, label="tau-quarter")


_REGISTRY: Dict[str, Tuple[str, Callable[[], SolutionPair]]] = {
    "ps-lift": ("charge-one monopole lifted to R^4, a = Phi dx4", _build_ps_lift),
    "const-mode": ("constant commuting mode along e1", _build_const_mode),
    "linear-mode": ("linear 1-form mode with self-dual ds", _build_linear_mode),
    "abelian": ("abelian connection with anti-self-dual curvature", _build_abelian),
    "tau-quarter": ("ps-lift mapped to the tau=1/4 system", _build_tau_quarter),
}


def list_solutions() -> List[SolutionInfo]:
    infos = []
    for label, (description, factory) in _REGISTRY.items():
        infos.append(SolutionInfo(label, description, tuple(factory().claims.names())))
    return infos


def verify_claims(pair: SolutionPair, points: Optional[NDArray[np.float64]] = None, tol: Optional[float] = None) -> Dict[str, float]:
    """Check every claimed equation; raise ``ClaimViolationError`` on the first failure."""

    from gaugelab.services.residuals import claim_residuals

    threshold = settings.residual_tol if tol is None else tol
    sample = standard_points(dim=pair.dim) if points is None else points
    values = claim_residuals(pair, sample)
    for claim, value in values.items():
        if not value < threshold:
            raise ClaimViolationError(pair.label, claim, value, threshold)
    return values


def build_solution(label: str, verify: bool = True, *, points: Optional[NDArray[np.float64]] = None, tol: Optional[float] = None) -> SolutionPair:
    try:
        _, factory = _REGISTRY[label]
    except KeyError as exc:
        raise ValueError(f"Unknown solution label: {label}") from exc
    pair = factory()
    if verify:
        values = verify_claims(pair, points, tol)
        logger.debug("solutions.verified", label=label, worst=max(values.values(), default=0.0))
    return pair


def solution_labels() -> Sequence[str]:
    return tuple(_REGISTRY)


__all__ = [
    "COMMUTING_KINDS",
    "ClaimViolationError",
    "Claims",
    "HodgeConventionError",
    "MonopolePair",
    "SolutionInfo",
    "SolutionPair",
    "abelian_pair",
    "build_solution",
    "commuting_mode",
    "inverse_tau_transform",
    "lift_to_r4",
    "list_solutions",
    "monopole_energy",
    "ps_monopole",
    "shifted_pair",
    "solution_labels",
    "tau_coefficients",
    "tau_transform",
    "verify_claims",
]
