"""Lattice gradient flow for the master equation at a fixed connection.

The discrete energy lives on the edges of a uniform Cartesian grid. Along
every axis it combines squared covariant differences over ``h``-edges and
``2h``-edges with Richardson weights ``4/3`` and ``-1/3``, which makes the
Euler-Lagrange stencil at interior nodes the standard 4th-order one. The
boundary layer (two nodes deep) carries Dirichlet data and never moves.

Checkpoint layout (little-endian)::

    b"GLCK"                 magic
    uint32 n                grid dimension
    uint32 vdim             components of the field
    uint64 * n              nodes per axis
    float64                 spacing
    float64 * n             origin (coordinates of node 0)
    float64 * (prod(nodes) * vdim * 3)   values, row-major, su(2) index last
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from functools import reduce
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from gaugelab.config import settings
from gaugelab.core.algebra import LIE_DIM, commutator, commutator_sum, double_commutator
from gaugelab.core.fieldkit import GaugeConnection, product_connection
from gaugelab.services.solutions import SolutionPair

CHECKPOINT_MAGIC = b"GLCK"
FROZEN_DEPTH = 2
MAX_HALVINGS = 50


class NonConvergenceError(RuntimeError):
    """The flow hit its iteration cap or could not find a descent step."""

    def __init__(self, reason: str, trace: Sequence[float], gradient_norm: float) -> None:
        super().__init__(f"flow did not converge: {reason} (max |g| = {gradient_norm:.3e})")
        self.reason = reason
        self.trace = list(trace)
        self.gradient_norm = gradient_norm


class CheckpointError(RuntimeError):
    """A checkpoint file is missing, truncated or malformed."""


def _axis_slice(ndim: int, axis: int, start: Optional[int], stop: Optional[int]) -> Tuple[slice, ...]:
    index = [slice(None)] * ndim
    index[axis] = slice(start, stop)
    return tuple(index)


@dataclass(frozen=True)
class LatticeState:
    """Field values on a uniform grid plus the fixed connection samples.

    ``node_connection[..., alpha, :]`` is ``A_alpha`` at the nodes and
    ``edge_connection[alpha]`` is ``A_alpha`` at the midpoints of the
    ``h``-edges along axis ``alpha``.
    """

    spacing: float
    origin: NDArray[np.float64]
    values: NDArray[np.float64]
    node_connection: NDArray[np.float64]
    edge_connection: Tuple[NDArray[np.float64], ...]
    step: float = 0.0
    label: str = ""
    _mask: NDArray[np.bool_] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if any(size < 2 * FROZEN_DEPTH + 1 for size in self.nodes):
            raise ValueError(f"need at least {2 * FROZEN_DEPTH + 1} nodes per axis, got {self.nodes}")
        mask = np.zeros(self.nodes, dtype=bool)
        mask[tuple(slice(FROZEN_DEPTH, size - FROZEN_DEPTH) for size in self.nodes)] = True
        object.__setattr__(self, "_mask", mask)

    @property
    def nodes(self) -> Tuple[int, ...]:
        return tuple(self.values.shape[:-2])

    @property
    def dim(self) -> int:
        return len(self.nodes)

    @property
    def vdim(self) -> int:
        return int(self.values.shape[-2])

    @property
    def variable(self) -> NDArray[np.bool_]:
        """Nodes the flow may move."""

        return self._mask

    def coordinates(self) -> NDArray[np.float64]:
        """Node coordinates, shape ``(*nodes, n)``."""

        axes = [self.origin[i] + self.spacing * np.arange(size) for i, size in enumerate(self.nodes)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def with_values(self, values: NDArray[np.float64], step: Optional[float] = None) -> "LatticeState":
        if values.shape != self.values.shape:
            raise ValueError(f"expected values of shape {self.values.shape}, got {values.shape}")
        return replace(self, values=values, step=self.step if step is None else step)


@dataclass(slots=True)
class FlowResult:
    state: LatticeState
    trace: List[float]
    gradient_norm: float
    iterations: int


def _grid_points(origin: NDArray[np.float64], spacing: float, nodes: Sequence[int]) -> NDArray[np.float64]:
    axes = [origin[i] + spacing * np.arange(size) for i, size in enumerate(nodes)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(nodes))


def _sample_connection(
    connection: GaugeConnection, origin: NDArray[np.float64], spacing: float, nodes: Tuple[int, ...]
) -> Tuple[NDArray[np.float64], Tuple[NDArray[np.float64], ...]]:
    n = len(nodes)
    node_conn = connection.evaluator(_grid_points(origin, spacing, nodes)).reshape(*nodes, n, LIE_DIM)
    edges = []
    for alpha in range(n):
        shape = list(nodes)
        shape[alpha] -= 1
        shift = np.zeros(n)
        shift[alpha] = 0.5 * spacing
        points = _grid_points(origin + shift, spacing, shape)
        edges.append(connection.evaluator(points)[:, alpha].reshape(*shape, LIE_DIM))
    return node_conn, tuple(edges)


def smooth_bump(state: LatticeState) -> NDArray[np.float64]:
    """``prod_i sin(pi (x_i - x_0) / (2L))`` with ``2L`` the box width; zero on the box faces."""

    widths = [(size - 1) * state.spacing for size in state.nodes]
    factors = [np.sin(np.pi * state.spacing * np.arange(size) / width) for size, width in zip(state.nodes, widths)]
    return reduce(np.multiply.outer, factors)


def sample_pair(pair: SolutionPair, state: LatticeState) -> NDArray[np.float64]:
    """Values of ``pair.field`` at the grid nodes of ``state``."""

    if pair.dim != state.dim or pair.vdim != state.vdim:
        raise ValueError("pair and lattice have different shapes")
    points = state.coordinates().reshape(-1, state.dim)
    return pair.field.evaluator(points).reshape(*state.nodes, state.vdim, LIE_DIM)


def lattice_from_pair(
    pair: SolutionPair,
    nodes: int | None = None,
    half_width: float | None = None,
    perturbation: float | None = None,
) -> LatticeState:
    """Sample ``pair`` on the box ``[-L, L]^n``.

    With ``perturbation`` set, the variable nodes get
    ``perturbation * sup|a| * smooth_bump`` added to every coefficient.
    """

    size = nodes or settings.relax_nodes
    width = half_width or settings.relax_half_width
    n = pair.dim
    grid = (size,) * n
    spacing = 2.0 * width / (size - 1)
    origin = np.full(n, -width)
    node_conn, edge_conn = _sample_connection(pair.connection, origin, spacing, grid)
    values = pair.field.evaluator(_grid_points(origin, spacing, grid)).reshape(*grid, pair.vdim, LIE_DIM)
    state = LatticeState(spacing, origin, values, node_conn, edge_conn, label=pair.label)
    if perturbation:
        sup = float(np.max(np.sqrt(np.sum(values * values, axis=(-2, -1)))))
        direction = np.ones((pair.vdim, LIE_DIM)) / math.sqrt(pair.vdim * LIE_DIM)
        bump = np.where(state.variable, smooth_bump(state), 0.0)
        state = state.with_values(values + perturbation * sup * bump[..., None, None] * direction)
    logger.info("relax.lattice", label=pair.label, nodes=size, dim=n, spacing=spacing, perturbation=perturbation or 0.0)
    return state


def _trapezoid(size: int, spacing: float) -> NDArray[np.float64]:
    weights = np.full(size, spacing)
    weights[[0, -1]] *= 0.5
    return weights


def _outer(vectors: Sequence[NDArray[np.float64]]) -> NDArray[np.float64]:
    return reduce(np.multiply.outer, vectors)


def _edge_weights(state: LatticeState, alpha: int, span: int) -> NDArray[np.float64]:
    """Quadrature weights of the ``span * h`` edges along ``alpha``."""

    h = state.spacing
    vectors = [_trapezoid(size, h) for size in state.nodes]
    count = state.nodes[alpha] - span
    along = np.full(count, h)
    if span == 1:
        along[[0, -1]] = 7.0 * h / 8.0
    vectors[alpha] = along
    return _outer(vectors)


def _edge_differences(state: LatticeState, values: NDArray[np.float64], alpha: int, span: int):
    """Covariant differences on the ``span * h`` edges and the connection used."""

    ndim = values.ndim
    lo = values[_axis_slice(ndim, alpha, None, -span)]
    hi = values[_axis_slice(ndim, alpha, span, None)]
    if span == 1:
        conn = state.edge_connection[alpha]
    else:
        conn = state.node_connection[..., alpha, :][_axis_slice(ndim - 2, alpha, 1, -1)]
    conn = conn[..., None, :]
    diff = (hi - lo) / (span * state.spacing) + commutator(conn, 0.5 * (lo + hi))
    return diff, conn


_RICHARDSON = {1: 4.0 / 3.0, 2: -1.0 / 3.0}


def energy(state: LatticeState, values: Optional[NDArray[np.float64]] = None) -> float:
    """Discrete ``int (|nabla_A a|^2 + 1/2 sum_{b,c} |[a_b, a_c]|^2)`` over the box."""

    a = state.values if values is None else values
    total = 0.0
    for alpha in range(state.dim):
        for span, coeff in _RICHARDSON.items():
            diff, _ = _edge_differences(state, a, alpha, span)
            total += coeff * float(np.sum(_edge_weights(state, alpha, span) * np.sum(diff * diff, axis=(-2, -1))))
    node_weights = _outer([_trapezoid(size, state.spacing) for size in state.nodes])
    total += 0.5 * float(np.sum(node_weights * commutator_sum(a)))
    return total


def _raw_gradient(state: LatticeState, a: NDArray[np.float64]) -> NDArray[np.float64]:
    """Exact derivative of :func:`energy` with respect to every node value."""

    grad = np.zeros_like(a)
    ndim = a.ndim
    for alpha in range(state.dim):
        for span, coeff in _RICHARDSON.items():
            diff, conn = _edge_differences(state, a, alpha, span)
            weighted = 2.0 * coeff * _edge_weights(state, alpha, span)[..., None, None]
            length = span * state.spacing
            rotated = 0.5 * commutator(conn, diff)
            grad[_axis_slice(ndim, alpha, None, -span)] += weighted * (-diff / length - rotated)
            grad[_axis_slice(ndim, alpha, span, None)] += weighted * (diff / length - rotated)
    node_weights = _outer([_trapezoid(size, state.spacing) for size in state.nodes])
    grad += 2.0 * node_weights[..., None, None] * double_commutator(a)
    return grad


def gradient(state: LatticeState, values: Optional[NDArray[np.float64]] = None) -> NDArray[np.float64]:
    """Energy gradient per unit volume at the variable nodes, zero on the boundary.

    At interior nodes this is the discrete ``2 (nabla^dagger nabla a + sum_c [a_c, [a, a_c]])``.
    """

    a = state.values if values is None else values
    raw = _raw_gradient(state, a) / state.spacing**state.dim
    return np.where(state.variable[..., None, None], raw, 0.0)


def max_gradient_norm(grad: NDArray[np.float64]) -> float:
    return float(np.max(np.sqrt(np.sum(grad * grad, axis=(-2, -1)))))


def rms_distance(state: LatticeState, reference: NDArray[np.float64]) -> float:
    """RMS of ``|a - reference|`` over the variable nodes."""

    diff = (state.values - reference)[state.variable]
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=(-2, -1)))))


def flow(
    state: LatticeState,
    tol: Optional[float] = None,
    max_iters: Optional[int] = None,
    *,
    checkpoint: str | os.PathLike[str] | None = None,
    checkpoint_every: Optional[int] = None,
) -> FlowResult:
    """Descend the discrete energy with Barzilai-Borwein steps.

    A step is accepted only if it does not raise the energy; otherwise it is
    halved, at most ``MAX_HALVINGS`` times. Stops once the largest node norm
    of the gradient drops below ``tol``.
    """

    tol = settings.relax_tol if tol is None else tol
    max_iters = settings.relax_max_iters if max_iters is None else max_iters
    every = checkpoint_every or settings.checkpoint_every
    if tol <= 0:
        raise ValueError("tol must be positive")

    values = state.values
    current = energy(state, values)
    grad = gradient(state, values)
    norm = max_gradient_norm(grad)
    trace = [current]
    step = state.step or 0.02 * state.spacing**2

    iteration = 0
    while norm >= tol:
        if iteration >= max_iters:
            raise NonConvergenceError(f"iteration cap {max_iters} reached", trace, norm)
        trial_step = step
        for _ in range(MAX_HALVINGS + 1):
            candidate = values - trial_step * grad
            candidate_energy = energy(state, candidate)
            if candidate_energy <= current:
                break
            trial_step *= 0.5
        else:
            raise NonConvergenceError("no descent step after halving", trace, norm)

        new_grad = gradient(state, candidate)
        s = candidate - values
        y = new_grad - grad
        curvature = float(np.sum(s * y))
        step = float(np.sum(s * s)) / curvature if curvature > 0 else trial_step

        values, grad, current = candidate, new_grad, candidate_energy
        norm = max_gradient_norm(grad)
        trace.append(current)
        iteration += 1
        if iteration % every == 0:
            logger.info("relax.progress", iteration=iteration, energy=current, gradient=norm, step=step)
            if checkpoint:
                save_checkpoint(state.with_values(values, step), checkpoint)

    result = state.with_values(values, step)
    if checkpoint:
        save_checkpoint(result, checkpoint)
    logger.info("relax.converged", iterations=iteration, energy=current, gradient=norm)
    return FlowResult(state=result, trace=trace, gradient_norm=norm, iterations=iteration)


def save_checkpoint(state: LatticeState, path: str | os.PathLike[str]) -> Path:
    """Write ``state`` in the ``GLCK`` layout; the file is replaced atomically."""

    target = Path(path)
    header = b"".join(
        [
            CHECKPOINT_MAGIC,
            np.array([state.dim, state.vdim], dtype="<u4").tobytes(),
            np.array(state.nodes, dtype="<u8").tobytes(),
            np.array([state.spacing], dtype="<f8").tobytes(),
            np.asarray(state.origin, dtype="<f8").tobytes(),
        ]
    )
    partial = target.with_name(target.name + ".part")
    partial.write_bytes(header + np.ascontiguousarray(state.values, dtype="<f8").tobytes(order="C"))
    os.replace(partial, target)
    return target


def load_checkpoint(
    path: str | os.PathLike[str], connection: Optional[GaugeConnection] = None, label: str = ""
) -> LatticeState:
    """Read a ``GLCK`` file; ``connection`` defaults to the product connection."""

    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 12:
        raise CheckpointError(f"{path}: truncated header")
    n, vdim = (int(value) for value in np.frombuffer(raw, dtype="<u4", count=2, offset=4))
    if n < 1 or vdim < 1:
        raise CheckpointError(f"{path}: invalid dimensions n={n} vdim={vdim}")
    header = 12 + 8 * n + 8 + 8 * n
    if len(raw) < header:
        raise CheckpointError(f"{path}: truncated header")
    nodes = tuple(int(value) for value in np.frombuffer(raw, dtype="<u8", count=n, offset=12))
    spacing = float(np.frombuffer(raw, dtype="<f8", count=1, offset=12 + 8 * n)[0])
    origin = np.frombuffer(raw, dtype="<f8", count=n, offset=20 + 8 * n).astype(float)
    count = math.prod(nodes) * vdim * LIE_DIM
    if len(raw) != header + 8 * count:
        raise CheckpointError(f"{path}: expected {count} values, found {(len(raw) - header) / 8:g}")
    if not spacing > 0:
        raise CheckpointError(f"{path}: spacing must be positive")
    values = np.frombuffer(raw, dtype="<f8", count=count, offset=header).astype(float).reshape(*nodes, vdim, LIE_DIM)

    conn = connection or product_connection(n)
    if conn.dim != n:
        raise CheckpointError(f"{path}: connection dimension {conn.dim} does not match grid dimension {n}")
    node_conn, edge_conn = _sample_connection(conn, origin, spacing, nodes)
    try:
        return LatticeState(spacing, origin, values, node_conn, edge_conn, label=label)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc


__all__ = [
    "CHECKPOINT_MAGIC",
    "CheckpointError",
    "FlowResult",
    "LatticeState",
    "NonConvergenceError",
    "energy",
    "flow",
    "gradient",
    "lattice_from_pair",
    "load_checkpoint",
    "max_gradient_norm",
    "rms_distance",
    "sample_pair",
    "save_checkpoint",
    "smooth_bump",
]
