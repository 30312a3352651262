import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from estimators import (
    HolderTargets,
    boundary_decay,
    decay_profile,
    default_alpha_beta,
    dyadic_lags,
    holder_exponent_space,
    holder_exponent_time,
    limiting_exponents,
    space_increments,
    target_exponents,
    target_violations,
    weighted_field,
    weighted_holder_field,
)
from solver import Trajectory
from weight import make_psi


def still(values):
    """A single-snapshot trajectory holding ``values``."""
    return Trajectory(times=np.array([0.0]), values=np.atleast_2d(np.asarray(values, dtype=float)))


def grid(N):
    return np.linspace(0.0, 1.0, N + 1)


def test_admissible_parameters_have_no_violations():
    assert target_violations(0.3, 0.25, 32.0, 1.0) == []
    alpha, beta = default_alpha_beta(0.3, 32.0)
    assert target_violations(0.3, 0.25, 32.0, 1.0, alpha, beta) == []


@pytest.mark.parametrize(
    "args, expected",
    [
        ((0.2, 0.25, 32.0, 1.0), "kappa <= lambda (need kappa in (lambda, 1/2))"),
        ((0.25, 0.0, 10.0, 1.0), "p <= 6/(1-2*kappa)"),
        ((0.3, 0.25, 32.0, 0.0), "theta <= 0 (need theta in (0, 1+p(1/2+kappa)])"),
        ((0.25, 0.0, 16.0, 20.0), "theta > 1+p(1/2+kappa)"),
        ((0.3, 0.25, 32.0, 40.0), "p <= 2*lambda*theta/(1-2*lambda)"),
    ],
)
def test_target_violations_name_the_inequality(args, expected):
    assert expected in target_violations(*args)


def test_target_violations_on_alpha_beta():
    assert "alpha <= 1/p" in target_violations(0.25, 0.0, 16.0, 1.0, alpha=0.05, beta=0.07)
    assert "beta <= alpha" in target_violations(0.25, 0.0, 16.0, 1.0, alpha=0.08, beta=0.07)
    assert "beta >= 1/4-kappa/2-1/(2p)" in target_violations(0.25, 0.0, 16.0, 1.0, alpha=0.07, beta=0.2)


def test_every_violation_is_reported():
    problems = target_violations(0.2, 0.25, 4.0, 0.0)
    assert len(problems) >= 3


def test_holder_targets_reject_bad_parameters():
    with pytest.raises(ValueError, match="kappa <= lambda"):
        HolderTargets.with_defaults(kappa=0.2, lam=0.25, p=32.0, theta=1.0)


def test_space_exponent_near_its_limit():
    targets = HolderTargets(kappa=0.01, lam=0.0, p=1000.0, theta=1.0, alpha=0.0011, beta=0.0012)
    assert targets.space_exponent == pytest.approx(0.4866)
    assert targets.time_exponent == pytest.approx(0.0001)


def test_time_exponent_near_its_limit():
    targets = HolderTargets(kappa=0.01, lam=0.0, p=1000.0, theta=1.0, alpha=0.2444, beta=0.24445)
    assert targets.time_exponent == pytest.approx(0.2434)


def test_weight_and_cutoff_exponents():
    targets = HolderTargets.with_defaults(kappa=0.3, lam=0.25, p=32.0, theta=1.0)
    assert targets.weight_exponent == pytest.approx(-0.5 - 0.3)
    assert targets.cutoff_exponent == pytest.approx(0.8)
    bundle = target_exponents(targets)
    assert bundle["interior_space"] == pytest.approx(0.5 - 0.3 - 3.0 / 32.0)
    assert bundle["limit_time"] == pytest.approx(0.1)
    assert bundle["space"] < bundle["limit_space"]
    assert bundle["time"] < bundle["limit_time"]


@settings(max_examples=50, deadline=None)
@given(
    k1=st.floats(min_value=0.01, max_value=0.44),
    k2=st.floats(min_value=0.01, max_value=0.44),
)
def test_targets_decrease_with_kappa(k1, k2):
    lo, hi = sorted((k1, k2))
    if hi - lo < 1e-6:
        return
    a = HolderTargets.with_defaults(kappa=lo, lam=0.0, p=100.0, theta=1.0)
    b = HolderTargets.with_defaults(kappa=hi, lam=0.0, p=100.0, theta=1.0)
    assert a.space_exponent > b.space_exponent
    assert a.time_exponent > b.time_exponent


def test_limiting_exponents():
    assert limiting_exponents(0.25) == pytest.approx((0.125, 0.25))
    assert limiting_exponents(0.0) == pytest.approx((0.25, 0.5))


def test_dyadic_lags():
    assert dyadic_lags(1000, 4) == [2, 4, 8, 16, 32]
    assert dyadic_lags(8) == [1, 2, 4, 8]
    with pytest.raises(ValueError):
        dyadic_lags(4)


def test_space_increments_statistics():
    values = np.array([0.0, 1.0, 0.0, 3.0, 0.0])
    assert space_increments(values, [1], 0, 4, "max")[0] == 3.0
    assert space_increments(values, [1], 0, 4, "mean")[0] == pytest.approx(2.0)
    assert space_increments(values, [2], 0, 4, "median")[0] == 0.0


def test_space_estimator_on_linear_field():
    est = holder_exponent_space(still(grid(1024)))
    assert est["defined"]
    assert est["estimate"] == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("gamma", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
def test_space_estimator_recovers_cusp_exponent(gamma):
    u = np.abs(grid(4096) - 0.5) ** gamma
    est = holder_exponent_space(still(u), statistic="max")
    assert est["estimate"] == pytest.approx(gamma, abs=0.05)


def test_space_estimator_on_zero_field_is_undefined():
    est = holder_exponent_space(still(np.zeros(257)))
    assert not est["defined"]
    assert np.isnan(est["estimate"])


def test_time_estimator_on_linear_growth():
    times = np.linspace(0.0, 1.0, 65)
    values = np.outer(times, np.sin(np.pi * grid(32)))
    est = holder_exponent_time(Trajectory(times=times, values=values))
    assert est["defined"]
    assert est["estimate"] == pytest.approx(1.0, abs=1e-9)


def test_time_estimator_on_brownian_path():
    rng = np.random.default_rng(12)
    S = 4097
    times = np.linspace(0.0, 1.0, S)
    path = np.concatenate(([0.0], np.cumsum(rng.normal(scale=np.sqrt(1.0 / (S - 1)), size=S - 1))))
    values = np.repeat(path[:, None], 9, axis=1)
    est = holder_exponent_time(Trajectory(times=times, values=values))
    assert est["estimate"] == pytest.approx(0.5, abs=0.05)


def test_time_estimator_needs_enough_snapshots():
    times = np.linspace(0.0, 1.0, 32)
    est = holder_exponent_time(Trajectory(times=times, values=np.ones((32, 9))))
    assert not est["defined"]


def test_time_estimator_rejects_uneven_snapshots():
    times = np.linspace(0.0, 1.0, 65) ** 2
    with pytest.raises(ValueError):
        holder_exponent_time(Trajectory(times=times, values=np.outer(times, grid(8))))


def test_boundary_decay_of_parabola():
    x = grid(4096)
    est = boundary_decay(still(x * (1.0 - x)), fit_window=(2.0 / 4096, 0.02))
    assert est["estimate"] == pytest.approx(1.0, abs=0.02)
    assert est["sides"][0] == pytest.approx(est["sides"][1])


def test_boundary_decay_of_weight_power():
    psi = make_psi(1.0, 1.0)
    x = grid(4096)
    est = boundary_decay(still(psi(x) ** 0.7), fit_window=(2.0 / 4096, 0.02))
    assert est["estimate"] == pytest.approx(0.7, abs=0.05)


def test_boundary_decay_window_checks():
    x = grid(4096)
    traj = still(x * (1.0 - x))
    with pytest.raises(ValueError):
        boundary_decay(traj, fit_window=(0.001, 0.002))
    with pytest.raises(ValueError):
        boundary_decay(traj, fit_window=(0.01, 0.2))


def test_decay_profile_is_mirrored():
    x = grid(64)
    prof = decay_profile(still(x), fit_window=(2.0 / 64, 0.25))
    assert np.allclose(prof["left"], prof["rho"])
    assert np.allclose(prof["right"], 1.0 - prof["rho"])


def test_weighted_field_divides_by_weight_power():
    psi = make_psi(1.0, 1.0)
    x = grid(64)
    v = weighted_field(still(psi(x) ** 0.5), 0.5, psi)
    assert v.values[0, 0] == 0.0 and v.values[0, -1] == 0.0
    assert np.allclose(v.values[0, 1:-1], 1.0)


def test_weighted_holder_field_on_zero_field():
    targets = HolderTargets.with_defaults(kappa=0.25, lam=0.0, p=16.0, theta=1.0)
    traj = Trajectory(times=np.linspace(0.0, 0.1, 65), values=np.zeros((65, 65)))
    report = weighted_holder_field(traj, targets, make_psi(1.0, 1.0))
    assert report.weighted_sup == 0.0
    assert report.weighted_sup_finite
    assert not report.space_exponent["defined"]
    assert not report.time_exponent["defined"]
    assert all(report.checks.values())
    assert report.to_dict()["targets"]["space"] == pytest.approx(targets.space_exponent)


def test_weighted_holder_field_reports_cutoff_margin():
    psi = make_psi(1.0, 1.0)
    targets = HolderTargets.with_defaults(kappa=0.25, lam=0.0, p=16.0, theta=1.0)
    x = grid(64)
    times = np.linspace(0.0, 0.1, 65)
    values = np.repeat((4.0 * psi(x))[None, :], 65, axis=0)
    held = weighted_holder_field(Trajectory(times=times, values=values, m=1.0, nu=0.5), targets, psi)
    assert held.weighted_sup_finite
    assert held.max_weighted_sup == pytest.approx(4.0 * np.sqrt(psi.maximum), rel=1e-12)
    assert held.cutoff_threshold == pytest.approx(1.0 / np.sqrt(psi.maximum), rel=1e-12)
    assert not held.weighted_sup_bounded
    assert not held.checks["weighted_sup_bounded"]
    loose = weighted_holder_field(Trajectory(times=times, values=values, m=100.0, nu=0.5), targets, psi)
    assert loose.weighted_sup_bounded


def _rough_fields():
    rng = np.random.default_rng(7)
    space = np.cumsum(rng.normal(size=1025))
    time = np.cumsum(rng.normal(size=(65, 17)), axis=0)
    return still(space), Trajectory(times=np.linspace(0.0, 1.0, 65), values=time)


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(min_value=1e-3, max_value=1e3))
def test_estimates_ignore_amplitude(scale):
    space, time = _rough_fields()
    scaled_space = still(scale * space.values)
    scaled_time = Trajectory(times=time.times, values=scale * time.values)
    assert holder_exponent_space(scaled_space)["estimate"] == pytest.approx(
        holder_exponent_space(space)["estimate"], abs=1e-9
    )
    assert holder_exponent_time(scaled_time)["estimate"] == pytest.approx(
        holder_exponent_time(time)["estimate"], abs=1e-9
    )


@pytest.mark.parametrize("gamma", [0.3, 0.7])
def test_cusp_estimate_is_stable_under_refinement(gamma):
    coarse, fine = (
        holder_exponent_space(still(np.abs(grid(N) - 0.5) ** gamma), statistic="max")["estimate"] for N in (2048, 4096)
    )
    assert abs(fine - coarse) < 0.02


def test_parabola_estimates_are_stable_under_refinement():
    interior, decay = [], []
    for N in (1024, 2048):
        x = grid(N)
        traj = still(x * (1.0 - x))
        interior.append(holder_exponent_space(traj)["estimate"])
        decay.append(boundary_decay(traj, fit_window=(0.004, 0.02))["estimate"])
    assert abs(interior[1] - interior[0]) < 0.02
    assert abs(decay[1] - decay[0]) < 0.02


def test_time_cusp_estimate_is_stable_under_refinement():
    estimates = []
    for S in (129, 257):
        times = np.linspace(0.0, 1.0, S)
        values = np.outer(np.abs(times - 0.5) ** 0.5, np.sin(np.pi * grid(16)))
        estimates.append(holder_exponent_time(Trajectory(times=times, values=values), statistic="max")["estimate"])
    assert estimates[0] == pytest.approx(0.5, abs=0.02)
    assert abs(estimates[1] - estimates[0]) < 0.02
