"""Radial diagnostics of a gauge pair: shell norms, frequencies, the T matrix and profiles."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from numpy.typing import ArrayLike, NDArray

from gaugelab.config import settings
from gaugelab.core.algebra import commutator_gram, contract
from gaugelab.core.fieldkit import (
    GaugeConnection,
    HiggsField,
    SphereQuadrature,
    ball_integral,
    covariant_derivative,
    sphere_quadrature,
    sphere_sum,
)
from gaugelab.services.solutions import SolutionPair
from gaugelab.utils.jacobi import EigenResult, canonical_sign, jacobi
from gaugelab.utils.stencils import nonuniform_first_derivative

# kappa^2 at or below this value is treated as zero.
KAPPA_FLOOR = 1e-24
MONOTONE_SLACK = 1e-9
DEGENERATE_RTOL = 1e-12
PROFILE_COLUMNS = ["r", "kappa", "N", "lambda_min", "lambda_max", "trace_T", "kappa_v", "N_v", "P_uv"]


class VanishingKappaError(RuntimeError):
    """Raised when the shell norm in a frequency denominator vanishes."""

    def __init__(self, r: float, which: str = "kappa") -> None:
        super().__init__(f"{which} vanishes at r={r:g}; the field is zero on the sphere")
        self.r = r
        self.which = which


class FlatRadiusNotFoundError(RuntimeError):
    """Raised when no sample in the search window has N <= sqrt(eps)."""

    def __init__(self, report: "FlatRadiusReport") -> None:
        super().__init__(report.branch)
        self.report = report


@dataclass(slots=True)
class TMatrix:
    r: float
    entries: NDArray[np.float64]
    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def smallest(self) -> NDArray[np.float64]:
        return self.eigenvectors[:, 0]

    @property
    def largest(self) -> NDArray[np.float64]:
        return self.eigenvectors[:, -1]

    @property
    def rank(self) -> int:
        return int(np.sum(self.eigenvalues > DEGENERATE_RTOL * max(self.trace, 0.0)))

    @property
    def is_degenerate(self) -> bool:
        return self.lambda_min <= DEGENERATE_RTOL * self.trace

    def quadratic(self, u: ArrayLike, v: Optional[ArrayLike] = None) -> float:
        left = np.asarray(u, dtype=float)
        right = left if v is None else np.asarray(v, dtype=float)
        return float(left @ self.entries @ right)


def _quadrature(n: int, q: Optional[SphereQuadrature]) -> SphereQuadrature:
    return q if q is not None else sphere_quadrature(n, settings.angular_level)


def _unit(v: ArrayLike, size: int) -> NDArray[np.float64]:
    vec = np.asarray(v, dtype=float)
    if vec.shape != (size,) or abs(float(np.linalg.norm(vec)) - 1.0) > 1e-12:
        raise ValueError(f"expected a unit vector of length {size}")
    return vec


def shell_t_entries(a: HiggsField, r: float, q: Optional[SphereQuadrature] = None) -> NDArray[np.float64]:
    """``r^{1-n} int_{|x|=r} <a_b, a_c>``."""

    if r <= 0:
        raise ValueError("radius must be positive")
    quad = _quadrature(a.dim, q)

    def integrand(points: NDArray[np.float64]) -> NDArray[np.float64]:
        values = a.evaluator(points)
        return np.einsum("mbx,mcx->mbc", values, values)

    entries = np.asarray(sphere_sum(integrand, r, quad))
    return 0.5 * (entries + entries.T)


def kappa(a: HiggsField, r: float, q: Optional[SphereQuadrature] = None) -> float:
    """``(r^{1-n} int_{|x|=r} |a|^2)^{1/2}``."""

    if r <= 0:
        raise ValueError("radius must be positive")
    quad = _quadrature(a.dim, q)

    def integrand(points: NDArray[np.float64]) -> NDArray[np.float64]:
        values = a.evaluator(points)
        return np.sum(values * values, axis=(1, 2))

    return math.sqrt(max(float(sphere_sum(integrand, r, quad)), 0.0))


def kappa_v(a: HiggsField, v: ArrayLike, r: float, q: Optional[SphereQuadrature] = None) -> float:
    return kappa(a.along(_unit(v, a.vdim)), r, q)


def energy_gram(
    a: HiggsField,
    A: GaugeConnection,
    r: float,
    q: Optional[SphereQuadrature] = None,
    radial_level: Optional[int] = None,
    *,
    inner: float = 0.0,
) -> NDArray[np.float64]:
    """``G_bc = int (<nabla a_b, nabla a_c> + sum_d <[a_d, a_b], [a_d, a_c]>)`` over the ball or annulus."""

    quad = _quadrature(a.dim, q)

    def integrand(points: NDArray[np.float64]) -> NDArray[np.float64]:
        nabla = covariant_derivative(a, A, points)
        return np.einsum("mabx,macx->mbc", nabla, nabla) + commutator_gram(a.evaluator(points))

    gram = np.asarray(ball_integral(integrand, r, quad, radial_level, inner=inner))
    return 0.5 * (gram + gram.T)


def _ratio(numerator: float, r: float, n: int, kappa_sq: float, which: str) -> float:
    if not kappa_sq > KAPPA_FLOOR:
        raise VanishingKappaError(r, which)
    return numerator / (r ** (n - 2) * kappa_sq)


def frequency(
    a: HiggsField,
    A: GaugeConnection,
    r: float,
    q: Optional[SphereQuadrature] = None,
    radial_level: Optional[int] = None,
) -> float:
    """``N(r) = trace G / (r^{n-2} kappa^2)``."""

    gram = energy_gram(a, A, r, q, radial_level)
    return _ratio(float(np.trace(gram)), r, a.dim, kappa(a, r, q) ** 2, "kappa")


def frequency_v(
    a: HiggsField,
    A: GaugeConnection,
    v: ArrayLike,
    r: float,
    q: Optional[SphereQuadrature] = None,
    radial_level: Optional[int] = None,
) -> float:
    vec = _unit(v, a.vdim)
    gram = energy_gram(a, A, r, q, radial_level)
    return _ratio(float(vec @ gram @ vec), r, a.dim, kappa_v(a, vec, r, q) ** 2, "kappa_v")


def t_matrix(a: HiggsField, r: float, q: Optional[SphereQuadrature] = None) -> TMatrix:
    entries = shell_t_entries(a, r, q)
    result = jacobi(entries)
    return TMatrix(r=r, entries=entries, eigenvalues=result.eigenvalues, eigenvectors=result.eigenvectors)


def cross_correlation(a: HiggsField, u: ArrayLike, v: ArrayLike, r: float, q: Optional[SphereQuadrature] = None) -> float:
    """``P(r) = u^T T(r) v``."""

    left, right = _unit(u, a.vdim), _unit(v, a.vdim)
    return float(left @ shell_t_entries(a, r, q) @ right)


def cross_correlation_rate(
    a: HiggsField,
    A: GaugeConnection,
    u: ArrayLike,
    v: ArrayLike,
    r: float,
    q: Optional[SphereQuadrature] = None,
    radial_level: Optional[int] = None,
) -> float:
    """``dP/dr = 2 u^T G v / r^{n-1}`` for solutions of eq11."""

    left, right = _unit(u, a.vdim), _unit(v, a.vdim)
    gram = energy_gram(a, A, r, q, radial_level)
    return 2.0 * float(left @ gram @ right) / r ** (a.dim - 1)


def local_average(
    a: HiggsField,
    v: ArrayLike,
    p: ArrayLike,
    s: float,
    q: Optional[SphereQuadrature] = None,
    radial_level: Optional[int] = None,
) -> float:
    """``M_v(p, s) = (s^{-n} int_{|x-p|<=s} |a(v)|^2)^{1/2}``."""

    vec = _unit(v, a.vdim)
    quad = _quadrature(a.dim, q)

    def integrand(points: NDArray[np.float64]) -> NDArray[np.float64]:
        values = contract(a.evaluator(points), vec)
        return np.sum(values * values, axis=1)

    total = float(ball_integral(integrand, s, quad, radial_level, center=p))
    return math.sqrt(max(total, 0.0) / s**a.dim)


def local_shell_average(a: HiggsField, v: ArrayLike, p: ArrayLike, s: float, q: Optional[SphereQuadrature] = None) -> float:
    """``K_v(p, s) = (s^{1-n} int_{|x-p|=s} |a(v)|^2)^{1/2}``."""

    vec = _unit(v, a.vdim)
    quad = _quadrature(a.dim, q)

    def integrand(points: NDArray[np.float64]) -> NDArray[np.float64]:
        values = contract(a.evaluator(points), vec)
        return np.sum(values * values, axis=1)

    return math.sqrt(max(float(sphere_sum(integrand, s, quad, center=p)), 0.0))


def track_eigenvectors(previous: NDArray[np.float64], current: EigenResult, *, cluster_tol: float = 1e-10) -> NDArray[np.float64]:
    """Follow ``previous`` (a unit vector) into the smallest eigenspace of ``current``.

    A simple smallest eigenvalue gives its eigenvector, sign-aligned with
    ``previous``. A repeated one gives the normalised projection of
    ``previous`` onto the eigenspace, falling back to the eigenvector of
    maximal overlap when the projection is small.
    """

    values, vectors = current.eigenvalues, current.eigenvectors
    scale = max(abs(float(values[-1])), 1.0)
    cluster = vectors[:, values <= values[0] + cluster_tol * scale]
    if cluster.shape[1] > 1:
        projected = cluster @ (cluster.T @ previous)
        norm = float(np.linalg.norm(projected))
        if norm > 0.5:
            return projected / norm
        overlaps = np.abs(cluster.T @ previous)
        chosen = cluster[:, int(np.argmax(overlaps))]
    else:
        chosen = cluster[:, 0]
    dot = float(chosen @ previous)
    if dot < 0:
        return -chosen
    return chosen if dot > 0 else canonical_sign(chosen)


def log_derivative(radii: Sequence[float], values: Sequence[float], index: int) -> float:
    """``d ln f / dr`` at ``radii[index]`` from a 5-point local polynomial fit."""

    r = np.asarray(radii, dtype=float)
    f = np.asarray(values, dtype=float)
    if r.size < 5:
        raise ValueError("need at least 5 samples for the 5-point stencil")
    start = min(max(index - 2, 0), r.size - 5)
    window = slice(start, start + 5)
    return nonuniform_first_derivative(r[window], np.log(f[window]), float(r[index]))


@dataclass(slots=True)
class RadialProfile:
    label: str
    dim: int
    radii: NDArray[np.float64]
    kappa: NDArray[np.float64]
    frequency: NDArray[np.float64]
    lambda_min: NDArray[np.float64]
    lambda_max: NDArray[np.float64]
    trace_t: NDArray[np.float64]
    kappa_v: NDArray[np.float64]
    frequency_v: NDArray[np.float64]
    cross: NDArray[np.float64]
    t_matrices: List[NDArray[np.float64]] = field(default_factory=list)
    grams: List[NDArray[np.float64]] = field(default_factory=list)
    tracked: Optional[NDArray[np.float64]] = None
    u: Optional[NDArray[np.float64]] = None
    v: Optional[NDArray[np.float64]] = None

    @property
    def samples(self) -> int:
        return int(self.radii.size)


def _annulus_grams(
    a: HiggsField,
    A: GaugeConnection,
    radii: NDArray[np.float64],
    q: SphereQuadrature,
    radial_level: int,
    workers: int,
) -> List[NDArray[np.float64]]:
    """Gram matrices on ``B_{r_0}`` and on each annulus ``r_{i-1} <= |x| <= r_i``."""

    annulus_level = max(4, radial_level // 8)
    jobs = [(float(radii[0]), 0.0, radial_level)]
    jobs.extend((float(radii[i]), float(radii[i - 1]), annulus_level) for i in range(1, radii.size))

    def run(job: Tuple[float, float, int]) -> NDArray[np.float64]:
        outer, inner, level = job
        return energy_gram(a, A, outer, q, level, inner=inner)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            pieces = list(executor.map(run, jobs))
    else:
        pieces = [run(job) for job in jobs]
    totals = []
    running = np.zeros((a.vdim, a.vdim))
    for piece in pieces:
        running = running + piece
        totals.append(running)
    return totals


def build_profile(
    pair: SolutionPair,
    r_min: float,
    r_max: float,
    samples: int,
    q: Optional[SphereQuadrature] = None,
    radial_level: Optional[int] = None,
    workers: Optional[int] = None,
) -> RadialProfile:
    """Tabulate the radial diagnostics on a geometric radius grid."""

    if not 0 < r_min < r_max:
        raise ValueError(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
    if samples < 2:
        raise ValueError("samples must be at least 2")
    a, A, n = pair.field, pair.connection, pair.dim
    quad = _quadrature(n, q)
    level = radial_level or settings.radial_level
    radii = np.geomspace(r_min, r_max, samples)
    grams = _annulus_grams(a, A, radii, quad, level, workers or settings.workers)

    t_entries = [shell_t_entries(a, float(r), quad) for r in radii]
    decompositions = [jacobi(entries) for entries in t_entries]
    first = decompositions[0]
    u, v = first.eigenvectors[:, -1].copy(), first.eigenvectors[:, 0].copy()

    tracked = np.zeros((samples, a.vdim))
    current = v
    for index, result in enumerate(decompositions):
        current = current if index == 0 else track_eigenvectors(current, result)
        tracked[index] = current

    kappa_col = np.zeros(samples)
    freq_col = np.zeros(samples)
    kappa_v_col = np.zeros(samples)
    freq_v_col = np.full(samples, np.nan)
    cross_col = np.zeros(samples)
    degenerate_v = False
    for index, r in enumerate(radii):
        entries, gram, vec = t_entries[index], grams[index], tracked[index]
        kappa_sq = float(np.trace(entries))
        freq_col[index] = _ratio(float(np.trace(gram)), float(r), n, kappa_sq, "kappa")
        kappa_col[index] = math.sqrt(kappa_sq)
        kappa_v_sq = float(vec @ entries @ vec)
        kappa_v_col[index] = math.sqrt(max(kappa_v_sq, 0.0))
        if kappa_v_sq > KAPPA_FLOOR:
            freq_v_col[index] = float(vec @ gram @ vec) / (float(r) ** (n - 2) * kappa_v_sq)
        else:
            degenerate_v = True
        cross_col[index] = float(u @ entries @ v)

    values = np.array([result.eigenvalues for result in decompositions])
    profile = RadialProfile(
        label=pair.label,
        dim=n,
        radii=radii,
        kappa=kappa_col,
        frequency=freq_col,
        lambda_min=values[:, 0],
        lambda_max=values[:, -1],
        trace_t=np.array([np.trace(entries) for entries in t_entries]),
        kappa_v=kappa_v_col,
        frequency_v=freq_v_col,
        cross=cross_col,
        t_matrices=t_entries,
        grams=grams,
        tracked=tracked,
        u=u,
        v=v,
    )
    first_t = TMatrix(float(radii[0]), t_entries[0], first.eigenvalues, first.eigenvectors)
    if first_t.is_degenerate:
        logger.warning(
            "diagnostics.degenerate_t",
            label=pair.label,
            r=float(radii[0]),
            rank=first_t.rank,
            hint="T has a zero eigenvalue; restrict V to the span of the field",
        )
    if degenerate_v:
        logger.warning("diagnostics.vanishing_kappa_v", label=pair.label, hint="N_v is undefined where kappa_v = 0")
    logger.info("profile.built", label=pair.label, samples=samples, r_min=r_min, r_max=r_max)
    return profile


def profile_to_frame(profile: RadialProfile) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "r": profile.radii,
            "kappa": profile.kappa,
            "N": profile.frequency,
            "lambda_min": profile.lambda_min,
            "lambda_max": profile.lambda_max,
            "trace_T": profile.trace_t,
            "kappa_v": profile.kappa_v,
            "N_v": profile.frequency_v,
            "P_uv": profile.cross,
        },
        columns=PROFILE_COLUMNS,
    )


def profile_from_frame(frame: pd.DataFrame, label: str = "", dim: int = 4) -> RadialProfile:
    missing = [column for column in PROFILE_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"profile table is missing columns: {', '.join(missing)}")
    columns = {name: frame[name].to_numpy(dtype=float) for name in PROFILE_COLUMNS}
    return RadialProfile(
        label=label,
        dim=dim,
        radii=columns["r"],
        kappa=columns["kappa"],
        frequency=columns["N"],
        lambda_min=columns["lambda_min"],
        lambda_max=columns["lambda_max"],
        trace_t=columns["trace_T"],
        kappa_v=columns["kappa_v"],
        frequency_v=columns["N_v"],
        cross=columns["P_uv"],
    )


@dataclass(frozen=True, slots=True)
class SearchParams:
    epsilon: float
    rho: float
    window_exponent: float = 30.0
    report_constant: float = 10.0
    min_samples: int = 50

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.rho <= 1.0:
            raise ValueError(f"rho must exceed 1, got {self.rho}")

    @property
    def window(self) -> Tuple[float, float]:
        return self.rho ** (1.0 - self.window_exponent * math.sqrt(self.epsilon)), self.rho


@dataclass(slots=True)
class SearchCheck:
    name: str
    value: float
    bound: float
    passed: bool
    detail: str = ""


@dataclass(slots=True)
class FlatRadiusReport:
    radius: Optional[float]
    window: Tuple[float, float]
    coverage: float
    samples_in_window: int
    sub_window: Optional[Tuple[float, float]] = None
    checks: List[SearchCheck] = field(default_factory=list)
    branch: str = ""

    @property
    def passed(self) -> bool:
        return self.radius is not None and all(check.passed for check in self.checks)


def _upper_check(name: str, values: NDArray[np.float64], bound: float) -> SearchCheck:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return SearchCheck(name, float("nan"), bound, True, "undefined on the sub-window (kappa_v = 0); restrict V")
    worst = float(np.max(finite))
    return SearchCheck(name, worst, bound, worst < bound)


def _lower_check(name: str, values: NDArray[np.float64], reference: float, bound: float) -> SearchCheck:
    if not reference > 0 or not np.all(np.isfinite(values)):
        return SearchCheck(name, float("nan"), bound, True, "undefined on the sub-window (zero reference)")
    worst = float(np.min(values) / reference)
    return SearchCheck(name, worst, bound, worst >= bound)


def find_flat_radius(profile: RadialProfile, params: SearchParams) -> FlatRadiusReport:
    """Largest sampled radius in the search window with ``N <= sqrt(eps)``, with its checks."""

    eps = params.epsilon
    if eps >= 0.01:
        logger.warning("search.large_epsilon", epsilon=eps, hint="the window statements assume eps < 1/100")
    lo, hi = params.window
    radii = profile.radii
    window = (max(lo, float(radii[0])), min(hi, float(radii[-1])))
    coverage = 0.0
    if window[1] > window[0]:
        coverage = (math.log(window[1]) - math.log(window[0])) / (math.log(hi) - math.log(lo))
    inside = (radii >= window[0]) & (radii <= window[1])
    count = int(np.sum(inside))
    if count < params.min_samples:
        raise ValueError(
            f"profile has {count} samples in the search window [{lo:.6g}, {hi:.6g}] "
            f"(coverage {coverage:.1%}); at least {params.min_samples} are needed"
        )

    threshold = math.sqrt(eps)
    candidates = np.flatnonzero(inside & (profile.frequency <= threshold))
    if candidates.size == 0:
        report = FlatRadiusReport(
            radius=None,
            window=window,
            coverage=coverage,
            samples_in_window=count,
            branch=(
                f"growth branch: N > sqrt(eps) = {threshold:.6g} at every sampled radius in the window, "
                f"so kappa grows at least like r^sqrt(eps) across it"
            ),
        )
        raise FlatRadiusNotFoundError(report)

    index = int(candidates[-1])
    r_star = float(radii[index])
    sub = (eps ** (1.0 / (8 * profile.dim)) * r_star, r_star)
    in_sub = (radii >= sub[0]) & (radii <= sub[1])
    small = eps**0.25
    floor = 1.0 - params.report_constant * small * abs(math.log(eps))
    checks = [
        _upper_check("N < eps^(1/4)", profile.frequency[in_sub], small),
        _lower_check("kappa >= (1 - C eps^(1/4)|ln eps|) kappa(r)", profile.kappa[in_sub], float(profile.kappa[index]), floor),
        _upper_check("N_v < eps^(1/4)", profile.frequency_v[in_sub], small),
        _lower_check(
            "kappa_v >= (1 - C eps^(1/4)|ln eps|) kappa_v(r)",
            profile.kappa_v[in_sub],
            float(profile.kappa_v[index]),
            floor,
        ),
    ]
    report = FlatRadiusReport(
        radius=r_star,
        window=window,
        coverage=coverage,
        samples_in_window=count,
        sub_window=sub,
        checks=checks,
        branch=f"flat branch: N({r_star:.6g}) = {profile.frequency[index]:.6g} <= sqrt(eps) = {threshold:.6g}",
    )
    logger.info("search.found", label=profile.label, radius=r_star, passed=report.passed)
    return report


__all__ = [
    "FlatRadiusNotFoundError",
    "FlatRadiusReport",
    "KAPPA_FLOOR",
    "MONOTONE_SLACK",
    "PROFILE_COLUMNS",
    "RadialProfile",
    "SearchCheck",
    "SearchParams",
    "TMatrix",
    "VanishingKappaError",
    "build_profile",
    "cross_correlation",
    "cross_correlation_rate",
    "energy_gram",
    "find_flat_radius",
    "frequency",
    "frequency_v",
    "kappa",
    "kappa_v",
    "local_average",
    "local_shell_average",
    "log_derivative",
    "profile_from_frame",
    "profile_to_frame",
    "shell_t_entries",
    "t_matrix",
    "track_eigenvectors",
]
