from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from gaugelab.core.fieldkit import affine_connection, affine_field, product_connection, zero_field
from gaugelab.services.relax import (
    CHECKPOINT_MAGIC,
    CheckpointError,
    NonConvergenceError,
    energy,
    flow,
    gradient,
    lattice_from_pair,
    load_checkpoint,
    max_gradient_norm,
    rms_distance,
    sample_pair,
    save_checkpoint,
    smooth_bump,
)
from gaugelab.services.solutions import SolutionPair, build_solution, commuting_mode, ps_monopole

E1, E2, E3 = np.eye(3)


def _harmonic_pair() -> SolutionPair:
    return commuting_mode("radial_harmonic", (1.0, 0.0, 0.0), (0.0, 0.0, 1.0), dim=3)


def _twisted_pair() -> SolutionPair:
    rng = np.random.default_rng(17)
    connection = affine_connection(rng.normal(size=(3, 3)), 0.5 * rng.normal(size=(3, 3, 3)), dim=3)
    field = affine_field(rng.normal(size=(2, 3)), rng.normal(size=(3, 2, 3)), dim=3)
    return SolutionPair(connection, field, "twisted")


def test_zero_field_is_already_relaxed() -> None:
    pair = SolutionPair(product_connection(3), zero_field(3, 1), "zero")
    state = lattice_from_pair(pair, nodes=6, half_width=1.0)
    assert energy(state) == 0.0
    assert max_gradient_norm(gradient(state)) == 0.0
    result = flow(state, tol=1e-8, max_iters=10)
    assert result.iterations == 0
    assert result.trace == [0.0]


def test_energy_of_constant_noncommuting_field() -> None:
    value = np.zeros((4, 3))
    value[0], value[1] = E1, E2
    pair = SolutionPair(product_connection(4), affine_field(value, dim=4), "noncommuting")
    state = lattice_from_pair(pair, nodes=5, half_width=0.5)
    # 1/2 sum_{b,c} |[a_b, a_c]|^2 = |2 e3|^2 = 4 on a unit box
    assert np.isclose(energy(state), 4.0)


def test_linear_field_energy_is_exact() -> None:
    pair = _harmonic_pair()
    state = lattice_from_pair(pair, nodes=7, half_width=1.0)
    # |nabla a|^2 = 3 everywhere on a box of volume 8
    assert np.isclose(energy(state), 24.0)
    assert max_gradient_norm(gradient(state)) < 1e-10


def test_gradient_matches_directional_derivative() -> None:
    state = lattice_from_pair(_twisted_pair(), nodes=6, half_width=1.0, perturbation=0.3)
    rng = np.random.default_rng(3)
    direction = np.where(state.variable[..., None, None], rng.normal(size=state.values.shape), 0.0)
    t = 1e-5
    slope = (energy(state, state.values + t * direction) - energy(state, state.values - t * direction)) / (2 * t)
    predicted = float(np.sum(gradient(state) * direction)) * state.spacing**state.dim
    assert np.isclose(slope, predicted, rtol=1e-6)


def test_gradient_vanishes_on_frozen_nodes() -> None:
    state = lattice_from_pair(_twisted_pair(), nodes=6, half_width=1.0)
    grad = gradient(state)
    assert np.all(grad[~state.variable] == 0.0)
    assert np.any(grad[state.variable] != 0.0)


def test_lattice_shape_and_perturbation() -> None:
    pair = _harmonic_pair()
    plain = lattice_from_pair(pair, nodes=7, half_width=1.0)
    moved = lattice_from_pair(pair, nodes=7, half_width=1.0, perturbation=0.1)
    assert plain.nodes == (7, 7, 7)
    assert plain.spacing == pytest.approx(1.0 / 3.0)
    assert np.allclose(plain.origin, -1.0)
    assert np.array_equal(moved.values[~moved.variable], plain.values[~plain.variable])
    assert rms_distance(moved, plain.values) > 0.0
    assert np.allclose(sample_pair(pair, plain), plain.values)
    bump = smooth_bump(plain)
    assert np.allclose(bump[0], 0.0) and np.allclose(bump[:, :, -1], 0.0, atol=1e-15)
    with pytest.raises(ValueError, match="at least 5 nodes"):
        lattice_from_pair(pair, nodes=4, half_width=1.0)


def test_flow_returns_to_the_harmonic_field(tmp_path: Path) -> None:
    pair = _harmonic_pair()
    exact = lattice_from_pair(pair, nodes=9, half_width=1.0)
    state = lattice_from_pair(pair, nodes=9, half_width=1.0, perturbation=0.1)
    target = tmp_path / "state.glck"
    result = flow(state, tol=1e-6, max_iters=3000, checkpoint=target, checkpoint_every=10)
    assert result.gradient_norm < 1e-6
    assert all(later <= earlier for earlier, later in zip(result.trace, result.trace[1:]))
    assert rms_distance(result.state, exact.values) < 1e-5
    assert np.array_equal(result.state.values[~state.variable], state.values[~state.variable])
    assert target.exists() and not (tmp_path / "state.glck.part").exists()
    restored = load_checkpoint(target, label="radial_harmonic")
    assert np.array_equal(restored.values, result.state.values)


def test_flow_reports_the_iteration_cap() -> None:
    state = lattice_from_pair(_harmonic_pair(), nodes=7, half_width=1.0, perturbation=0.1)
    with pytest.raises(NonConvergenceError) as info:
        flow(state, tol=1e-12, max_iters=2)
    assert "iteration cap" in info.value.reason
    assert len(info.value.trace) == 3
    with pytest.raises(ValueError, match="tol"):
        flow(state, tol=0.0)


def test_checkpoint_round_trip(tmp_path: Path) -> None:
    pair = _twisted_pair()
    state = lattice_from_pair(pair, nodes=5, half_width=1.0, perturbation=0.2)
    path = save_checkpoint(state, tmp_path / "twisted.glck")
    raw = path.read_bytes()
    assert raw[:4] == CHECKPOINT_MAGIC
    assert len(raw) == 4 + 8 + 3 * 8 + 8 + 3 * 8 + 5**3 * 2 * 3 * 8
    loaded = load_checkpoint(path, pair.connection, label="twisted")
    assert loaded.nodes == state.nodes
    assert loaded.spacing == state.spacing
    assert np.array_equal(loaded.origin, state.origin)
    assert np.array_equal(loaded.values, state.values)
    assert np.isclose(energy(loaded), energy(state))


def test_checkpoint_errors(tmp_path: Path) -> None:
    state = lattice_from_pair(_harmonic_pair(), nodes=5, half_width=1.0)
    path = save_checkpoint(state, tmp_path / "good.glck")
    raw = path.read_bytes()

    bad_magic = tmp_path / "magic.glck"
    bad_magic.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(CheckpointError, match="bad magic"):
        load_checkpoint(bad_magic)

    truncated = tmp_path / "short.glck"
    truncated.write_bytes(raw[:-8])
    with pytest.raises(CheckpointError, match="expected"):
        load_checkpoint(truncated)

    with pytest.raises(CheckpointError, match="cannot read"):
        load_checkpoint(tmp_path / "absent.glck")

    with pytest.raises(CheckpointError, match="connection dimension"):
        load_checkpoint(path, product_connection(4))


@pytest.mark.slow
def test_monopole_gradient_converges_at_fourth_order() -> None:
    m = ps_monopole()
    pair = SolutionPair(m.connection, m.higgs, "monopole-3d")
    coarse = lattice_from_pair(pair, nodes=16, half_width=1.8)
    fine = lattice_from_pair(pair, nodes=31, half_width=1.8)
    ratio = max_gradient_norm(gradient(coarse)) / max_gradient_norm(gradient(fine))
    assert ratio > 8.0


@pytest.mark.slow
def test_perturbed_monopole_relaxes_to_the_discrete_solution() -> None:
    m = ps_monopole()
    pair = SolutionPair(m.connection, m.higgs, "monopole-3d")
    reference = flow(lattice_from_pair(pair, nodes=10, half_width=1.8), tol=1e-7, max_iters=5000)
    perturbed = flow(lattice_from_pair(pair, nodes=10, half_width=1.8, perturbation=0.1), tol=1e-7, max_iters=5000)
    assert perturbed.trace[-1] <= perturbed.trace[0]
    assert rms_distance(perturbed.state, reference.state.values) < 1e-5


@pytest.mark.slow
def test_perturbed_lift_returns_to_the_exact_sample() -> None:
    pair = build_solution("ps-lift", verify=False)
    state = lattice_from_pair(pair, nodes=16, half_width=1.8, perturbation=0.1)
    result = flow(state, tol=1e-6, max_iters=10000)
    assert result.gradient_norm < 1e-6
    assert all(later <= earlier for earlier, later in zip(result.trace, result.trace[1:]))
    assert rms_distance(result.state, sample_pair(pair, result.state)) < 1e-3


@pytest.mark.slow
def test_lift_seeded_at_the_discrete_solution_converges_at_once() -> None:
    pair = build_solution("ps-lift", verify=False)
    exact = lattice_from_pair(pair, nodes=16, half_width=1.8)

    try:
        steps = flow(exact, tol=1e-6, max_iters=5).trace
    except NonConvergenceError as error:
        steps = error.trace
    assert len(steps) <= 6
    assert all(later <= earlier for earlier, later in zip(steps, steps[1:]))

    relaxed = flow(exact, tol=1e-6, max_iters=10000)
    assert all(later <= earlier for earlier, later in zip(relaxed.trace, relaxed.trace[1:]))
    assert rms_distance(relaxed.state, exact.values) < 1e-3

    reseeded = flow(relaxed.state, tol=1e-6, max_iters=5)
    assert reseeded.iterations <= 5
    assert reseeded.trace[-1] <= reseeded.trace[0]
