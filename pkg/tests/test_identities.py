from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from gaugelab.core.config import RunConfig
from gaugelab.core.fieldkit import sphere_quadrature
from gaugelab.services.diagnostics import RadialProfile, build_profile
from gaugelab.services.identities import (
    claim_checks,
    cross_correlation_checks,
    eigenvalue_rate_check,
    energy_gradient_check,
    frequency_derivative_check,
    frequency_identity_checks,
    integrated_identity_check,
    monotonicity_checks,
    off_solution_gradient_check,
    run_identity_suite,
    sandwich_check,
    shift_duality_check,
    t_derivative_bound_check,
)
from gaugelab.services.solutions import Claims, build_solution

Q4 = sphere_quadrature(4, 8)


def _small_config(solution: str) -> RunConfig:
    return RunConfig(
        solution=solution,
        r_min=0.5,
        r_max=10.0,
        samples=12,
        angular_level=8,
        radial_level=16,
        points=10,
        seed=7,
    )


@pytest.mark.parametrize("label", ["const-mode", "linear-mode"])
def test_identity_suite_passes_for_commuting_modes(label: str) -> None:
    pair = build_solution(label, verify=False)
    results = run_identity_suite(pair, _small_config(label))
    failed = [(result.name, result.value, result.bound) for result in results if not result.passed]
    assert not failed
    names = [result.name for result in results]
    assert "Pohozaev gap at r=3" in names
    assert "stress divergence" in names


def test_shift_duality_runs_only_for_half_system_pairs() -> None:
    const = run_identity_suite(build_solution("const-mode", verify=False), _small_config("const-mode"))
    linear = run_identity_suite(build_solution("linear-mode", verify=False), _small_config("linear-mode"))
    shift = "F(A+a) self-dual, F(A-a) anti-self-dual"
    assert shift in [result.name for result in const]
    assert shift not in [result.name for result in linear]


def test_linear_mode_frequency_identities() -> None:
    pair = build_solution("linear-mode", verify=False)
    for result in frequency_identity_checks(pair, Q4, 8):
        assert result.passed, result
        assert result.detail == "N=1"
    assert integrated_identity_check(pair, Q4, 8).passed
    assert frequency_derivative_check(pair, Q4, 8).passed
    assert eigenvalue_rate_check(pair, Q4, 8).passed
    assert all(result.passed for result in cross_correlation_checks(pair, Q4, 8))


def test_energy_gradient_check_for_a_stationary_pair() -> None:
    pair = build_solution("linear-mode", verify=False)
    result = energy_gradient_check(pair, Q4, 16, seed=3)
    assert result.passed
    assert result.value < 1e-3


def test_energy_gradient_off_solution() -> None:
    pair = build_solution("ps-lift", verify=False)
    result = off_solution_gradient_check(pair, sphere_quadrature(4, 12), 24, seed=3)
    assert result.passed, result
    assert abs(float(result.detail.partition("=")[2])) > 1e-6


def test_off_solution_check_catches_a_wrong_residual(monkeypatch: pytest.MonkeyPatch) -> None:
    from gaugelab.services import identities

    exact = identities.residual_eq11
    monkeypatch.setattr(identities, "residual_eq11", lambda pair, x: 2.0 * exact(pair, x))
    pair = build_solution("ps-lift", verify=False)
    assert not off_solution_gradient_check(pair, sphere_quadrature(4, 12), 24, seed=3).passed


def test_claim_checks_flag_false_claims() -> None:
    pair = build_solution("linear-mode", verify=False)
    lying = replace(pair, claims=Claims(eq11=True, kw=(1.0,)))
    results = {result.name: result for result in claim_checks(lying, _small_config("linear-mode"))}
    assert results["claim eq11"].passed
    assert not results["claim kw(1)"].passed


def test_shift_duality_check_for_lifted_monopole() -> None:
    pair = build_solution("ps-lift", verify=False)
    points = np.random.default_rng(5).uniform(-2.0, 2.0, size=(10, 4))
    assert shift_duality_check(pair, points).passed


def test_monotonicity_failure_is_reported() -> None:
    radii = np.array([1.0, 2.0, 3.0])
    profile = RadialProfile(
        label="synthetic",
        dim=4,
        radii=radii,
        kappa=np.array([2.0, 1.5, 1.6]),
        frequency=np.array([0.1, -0.2, 0.3]),
        lambda_min=np.array([1.0, 1.0, 1.0]),
        lambda_max=np.array([1.0, 1.0, 1.0]),
        trace_t=np.array([4.0, 4.0, 4.0]),
        kappa_v=np.ones(3),
        frequency_v=np.zeros(3),
        cross=np.zeros(3),
    )
    results = {result.name: result for result in monotonicity_checks(profile)}
    assert not results["kappa non-decreasing"].passed
    assert results["kappa non-decreasing"].value == pytest.approx(0.25)
    assert results["lambda_min non-decreasing"].passed
    assert not results["N >= 0"].passed


@pytest.mark.slow
def test_identity_suite_for_lifted_monopole() -> None:
    config = replace(_small_config("ps-lift"), angular_level=16, radial_level=48, samples=40, r_max=50.0)
    pair = build_solution("ps-lift", verify=False)
    results = run_identity_suite(pair, config)
    failed = [(result.name, result.value, result.bound) for result in results if not result.passed]
    assert not failed
    assert "kappa(50) -> sqrt(2) pi" in [result.name for result in results]


@pytest.mark.slow
@pytest.mark.parametrize("label", ["ps-lift", "const-mode", "linear-mode", "abelian", "tau-quarter"])
def test_profile_monotonicity_for_every_registry_solution(label: str) -> None:
    pair = build_solution(label, verify=False)
    profile = build_profile(pair, 0.5, 20.0, 100, sphere_quadrature(4, 24), 32, workers=1)
    for result in monotonicity_checks(profile):
        assert result.passed, result
    assert sandwich_check(profile).passed
    assert t_derivative_bound_check(profile).passed
