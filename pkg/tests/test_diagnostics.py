import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharpfront import ConfigError, ConvergenceError, eval_profile
from sharpfront.diagnostics import (
    EnvelopeParams,
    build_envelopes,
    check_comparison,
    convergence_report,
    estimate_shift,
    eval_envelopes,
    lyapunov_series,
    lyapunov_summary,
    track_shift,
)
from sharpfront.pde import Domain, InitialData, SchemeCtrl, Trajectory, run

DOM = Domain()
Z = DOM.z


@pytest.fixture(scope="module")
def step_env(cubic, cubic_profile):
    v0 = InitialData("step").resolve(DOM)
    return v0, build_envelopes(cubic, cubic_profile, Z, v0, 0.05)


def test_q0_interval_step_data(step_env, cubic):
    _, p = step_env
    eta, s0 = 0.05, cubic.s0
    lo, hi = max(1 - 1.0, eta), 1 - s0 - 2 * eta
    assert p.q0_sub_interval == pytest.approx((lo, hi), abs=1e-15)
    assert (lo, hi) == pytest.approx((0.05, 0.15))
    assert p.q0_sub == pytest.approx(0.10, abs=1e-15)


def test_envelope_constants(step_env, cubic):
    _, p = step_env
    assert p.mu == min(p.mu_under, p.mu_over) > 0
    assert p.nu >= (1 + p.L / p.mu) / p.omega * (1 - 1e-15)
    assert p.omega > 0 and p.L >= 0
    assert p.xi_inf_sub == pytest.approx(p.nu * p.q0_sub + p.z_star_sub)


@pytest.mark.parametrize("family", ["cubic", "holder"])
def test_z_star_for_exact_profile(request, family):
    spec = request.getfixturevalue(family)
    table = request.getfixturevalue(f"{family}_profile")
    v0 = InitialData("profile_perturbation", epsilon=0.0).resolve(DOM, table)
    p = build_envelopes(spec, table, Z, v0, 0.05)
    span = table.z_of_u(1 - p.q0_sub) - table.z_of_u(p.q0_sub)
    assert math.isfinite(p.z_star_sub) and p.z_star_sub <= 0
    assert abs(p.z_star_sub) <= span


def test_eta_bound_rejected(cubic, cubic_profile):
    v0 = InitialData("step").resolve(DOM)
    with pytest.raises(ConfigError):
        build_envelopes(cubic, cubic_profile, Z, v0, 0.25 / 3)


def test_envelope_limit(step_env, cubic_profile):
    _, p = step_env
    v1, v2 = eval_envelopes(p, cubic_profile, Z, 1e6)
    assert np.allclose(v1, eval_profile(cubic_profile, Z - p.xi_inf_sub), atol=1e-15)
    assert np.allclose(v2, eval_profile(cubic_profile, Z + p.xi_inf_sup), atol=1e-15)


def test_holder_far_left(holder, holder_profile):
    v0 = InitialData("step").resolve(DOM)
    p = build_envelopes(holder, holder_profile, Z, v0, 0.05)
    for t in (0.0, 3.0):
        zl = holder_profile.z0 - p.xi(t)[1] - 1.0
        v1, v2 = eval_envelopes(p, holder_profile, np.array([zl]), t)
        assert v1[0] == 0.0
        assert v2[0] == pytest.approx(p.q(t)[1], abs=1e-15)


@given(st.floats(0, 50), st.floats(0.001, 50))
def test_envelope_dynamics(t, dt):
    p = EnvelopeParams(0.05, 0.01, 0.02, 0.02, 0.06, 100.0, 0.1, 0.35, 30.0, 40.0, 0.0, 0.0, 0.01, 0.3)
    q_a, q_b = p.q(t), p.q(t + dt)
    x_a, x_b = p.xi(t), p.xi(t + dt)
    for i in range(2):
        assert q_b[i] < q_a[i] and x_b[i] > x_a[i]


@settings(max_examples=20)
@given(st.floats(-5, 5), st.floats(0.1, 3.0), st.sampled_from(["step", "smoothed_step", "profile_perturbation"]),
       st.floats(-3, 3), st.sampled_from(["cubic", "holder"]), st.floats(0, 20))
def test_sandwich_and_order(request, at, width, kind, shift, family, t):
    spec = request.getfixturevalue(family)
    table = request.getfixturevalue(f"{family}_profile")
    v0 = InitialData(kind, at=at, width=width, shift=shift, epsilon=0.0).resolve(DOM, table)
    p = build_envelopes(spec, table, Z, v0, 0.05)
    v1, v2 = eval_envelopes(p, table, Z, 0.0)
    assert np.all(v1 <= v0) and np.all(v0 <= v2)
    w1, w2 = eval_envelopes(p, table, Z, t)
    assert np.all(w1 <= w2)


def test_comparison_trivial_envelopes(cubic_profile):
    # xi so large that v1 = 0 and v2 = 1 everywhere
    p = EnvelopeParams(0.05, 0.01, 0.02, 0.02, 0.06, 1.0, 0.1, 0.1, 1e6, 1e6, 0.0, 0.0, 0.01, 0.3)
    d = Domain(-5, 5, 100)
    traj = Trajectory(d, 0.35, [0.0, 1.0], [np.zeros(101), np.zeros(101)])
    assert check_comparison(traj, p, cubic_profile) == 0.0


def test_comparison_detects_corruption(cubic, cubic_profile, step_env):
    v0, p = step_env
    traj = run(cubic, cubic_profile.c_star, DOM, v0, SchemeCtrl(), 1.0, 0.5)
    assert check_comparison(traj, p, cubic_profile) <= 1e-8
    bad = dataclasses.replace(traj, snapshots=[v + 0.1 for v in traj.snapshots])
    assert check_comparison(bad, p, cubic_profile) == pytest.approx(0.1, abs=1e-3)


def test_lyapunov_needs_three_snapshots(cubic):
    traj = Trajectory(Domain(-1, 1, 10), 0.35, [0.0, 0.1], [np.zeros(11), np.zeros(11)])
    with pytest.raises(ConvergenceError, match="insufficient sampling"):
        lyapunov_series(traj, cubic)


@pytest.fixture(scope="module")
def stationary(cubic, cubic_profile):
    v0 = InitialData("profile_perturbation", epsilon=0.0).resolve(DOM, cubic_profile)
    return run(cubic, cubic_profile.c_star, DOM, v0, SchemeCtrl(), 2.0, 0.1)


def test_lyapunov_stationary(cubic, stationary):
    samples = lyapunov_series(stationary, cubic)
    E = np.array([s.E for s in samples])
    assert np.max(np.abs(E - E[0])) <= 1e-6 * abs(E[0])
    diss = [s.dissipation for s in samples[1:-1]]
    assert min(diss) >= 0.0 and max(diss) <= 1e-8
    assert lyapunov_summary(samples)["non_increasing"]


def test_shift_exact_and_translated(cubic_profile):
    dz = DOM.dz
    est = estimate_shift(eval_profile(cubic_profile, Z), Z, cubic_profile)
    assert abs(est.zeta) <= dz and abs(est.zeta_lsq - est.zeta) <= 2 * dz
    est = estimate_shift(eval_profile(cubic_profile, Z + 2.0), Z, cubic_profile)
    assert abs(est.zeta - 2.0) <= dz and abs(est.zeta_lsq - est.zeta) <= 2 * dz
    assert not est.flagged


def test_shift_errors_and_flags(cubic_profile):
    with pytest.raises(ConvergenceError, match="front not in domain"):
        estimate_shift(np.zeros_like(Z), Z, cubic_profile)
    v = eval_profile(cubic_profile, Z)
    v[100] = 0.9
    assert estimate_shift(v, Z, cubic_profile, lsq=False).flagged


@given(st.integers(-300, 300), st.floats(-5, 5))
def test_shift_equivariance(cubic_profile, m, s):
    v = eval_profile(cubic_profile, Z + s)
    a = estimate_shift(v, Z, cubic_profile, lsq=False).zeta
    w = np.roll(v, -m)
    if m > 0:
        w[-m:] = v[-1]
    elif m < 0:
        w[:-m] = v[0]
    b = estimate_shift(w, Z, cubic_profile, lsq=False).zeta
    assert abs((b - a) - m * DOM.dz) <= 1e-9


def test_convergence_report_exact_profile(cubic, cubic_profile, stationary):
    report, track, _ = convergence_report(stationary, cubic_profile, cubic)
    assert abs(report["zeta_inf"]) <= DOM.dz
    assert report["final_sup_dist"] <= 1e-5
    assert all(d >= 0 for d in track.sup_dist)
    # converged from the start: level and least-squares shifts agree everywhere
    assert max(abs(a - b) for a, b in zip(track.zeta, track.zeta_lsq)) <= 2 * DOM.dz


def test_convergence_report_needs_ten(cubic, cubic_profile):
    v0 = InitialData("step").resolve(DOM)
    traj = run(cubic, cubic_profile.c_star, DOM, v0, SchemeCtrl(), 0.2, 0.1)
    with pytest.raises(ConvergenceError):
        convergence_report(traj, cubic_profile, cubic)


def test_track_shift_lengths(stationary, cubic_profile):
    track = track_shift(stationary, cubic_profile, lsq=False)
    assert len(track.t) == len(stationary) == len(track.sup_dist)
