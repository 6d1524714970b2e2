import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sharpfront import ConfigError, HypothesisViolation, ReactionSpec
from sharpfront import pde
from sharpfront.diagnostics import ordering_violation
from sharpfront.pde import (
    Domain,
    InitialData,
    SchemeCtrl,
    check_guards,
    check_h5,
    green_weights,
    heat_step,
    read_trajectory_binary,
    read_trajectory_csv,
    run,
    trajectory_bytes,
    trajectory_csv,
    write_trajectory_binary,
)

SCHEMES = ["imex_fd", "splitting_green"]
SMALL = Domain(-10.0, 10.0, 1000)


def test_domain_validation():
    assert Domain().dz == pytest.approx(0.01)
    with pytest.raises(ConfigError):
        Domain(1.0, -1.0, 10)


def test_h5_examples(cubic):
    d = Domain()
    assert check_h5(InitialData("step").resolve(d), cubic, 0.05).ok
    assert not check_h5(np.full(d.n_cells + 1, 0.75), cubic, 0.05).ok
    v = InitialData("smoothed_step", width=1.0, left=0.7).resolve(d)
    res = check_h5(v, cubic, 0.05)
    assert not res.ok and "0.7" in res.message


def test_initial_data_range(holder_profile):
    d = SMALL
    for data in (
        InitialData("step", at=1.0),
        InitialData("smoothed_step", width=2.0),
        InitialData("profile_perturbation", epsilon=0.05, shift=1.0),
        InitialData("table", table_z=(-1.0, 1.0), table_v=(0.0, 1.0)),
    ):
        v = data.resolve(d, holder_profile)
        assert v.min() >= 0 and v.max() <= 1
        assert v[0] == 0.0 and v[-1] == 1.0


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("value", [0.0, 1.0])
def test_equilibria(holder, scheme, value):
    v0 = np.full(SMALL.n_cells + 1, value)
    traj = run(holder, 0.48, SMALL, v0, SchemeCtrl(scheme), 1.0, 0.5)
    # the tridiagonal solve reproduces the constant up to round-off
    assert np.max(np.abs(traj.final.v - value)) <= 1e-14


def test_t_end_zero(cubic):
    v0 = InitialData("step").resolve(SMALL)
    traj = run(cubic, 0.35, SMALL, v0, SchemeCtrl(), 0.0, 0.1)
    assert len(traj) == 1 and traj.times == [0.0]
    assert np.array_equal(traj.snapshots[0], v0)


def _stationary_drift(spec, profile, n, dt, scheme):
    # on [-40, 40] the truncation error U(-40) ~ 3e-12 is negligible
    d = Domain(-40.0, 40.0, n)
    v0 = InitialData("profile_perturbation", epsilon=0.0).resolve(d, profile)
    traj = run(spec, profile.c_star, d, v0, SchemeCtrl(scheme, dt=dt), 2.0, 2.0)
    return np.max(np.abs(traj.final.v - v0))


def test_stationary_profile_drift_imex(cubic, cubic_profile):
    coarse = _stationary_drift(cubic, cubic_profile, 2000, 0.004, "imex_fd")
    fine = _stationary_drift(cubic, cubic_profile, 4000, 0.002, "imex_fd")
    assert fine * 2 <= coarse


def test_stationary_profile_drift_splitting(cubic, cubic_profile):
    # O(dt^2) splitting error; what remains is the accuracy of the table itself
    assert _stationary_drift(cubic, cubic_profile, 2000, 0.004, "splitting_green") <= 1e-6


@pytest.mark.parametrize("family", ["cubic", "holder"])
def test_imex_self_convergence(request, family):
    spec = request.getfixturevalue(family)
    sols = []
    for n in (400, 800, 1600):
        d = Domain(-20.0, 20.0, n)
        v0 = InitialData("smoothed_step", width=1.0).resolve(d)
        sols.append(run(spec, 0.4, d, v0, SchemeCtrl(dt=5e-4), 2.0, 2.0).final.v)
    e1 = np.max(np.abs(sols[0] - sols[1][::2]))
    e2 = np.max(np.abs(sols[1] - sols[2][::2]))
    order = math.log2(e1 / e2)
    assert order >= (1.8 if family == "cubic" else 1.0)


def test_dt_guard(holder):
    with pytest.raises(ConfigError, match=r"dt\*max_slope\(f\) <= 0.5"):
        check_guards(holder, 0.5, Domain(), SchemeCtrl(dt=1.0))


def test_peclet_guard(cubic):
    out = check_guards(cubic, 500.0, Domain(), SchemeCtrl(), errors=[])
    assert any("Peclet" in m for m in out)


def test_kernel_support_guard(cubic):
    with pytest.raises(ConfigError, match="kernel support"):
        check_guards(cubic, 0.3, Domain(-1, 1, 20), SchemeCtrl("splitting_green", dt=0.5))


def test_h5_enforced_by_run(cubic):
    v0 = np.full(SMALL.n_cells + 1, 0.75)
    with pytest.raises(HypothesisViolation):
        run(cubic, 0.35, SMALL, v0, SchemeCtrl(), 1.0, 0.1, eta=0.05)


def test_nonfinite_aborts(cubic, monkeypatch):
    v0 = InitialData("step").resolve(SMALL)
    calls = {"n": 0}
    real = pde._f_nodes

    def poisoned(spec, v):
        calls["n"] += 1
        out = real(spec, v)
        return out * np.nan if calls["n"] > 30 else out

    monkeypatch.setattr(pde, "_f_nodes", poisoned)
    traj = run(cubic, 0.35, SMALL, v0, SchemeCtrl(), 1.0, 0.01)
    assert traj.aborted and "non-finite" in traj.message
    assert all(np.all(np.isfinite(s)) for s in traj.snapshots)


def test_pure_diffusion_variance():
    dz, dt = 0.01, 0.002
    z = dz * np.arange(-2000, 2001)
    v = np.exp(-(z**2) / 0.5)
    for _ in range(5):
        new = heat_step(v, dz, dt, 0.0)
        mass0, mass1 = v.sum(), new.sum()
        var0 = (z**2 * v).sum() / mass0 - ((z * v).sum() / mass0) ** 2
        var1 = (z**2 * new).sum() / mass1 - ((z * new).sum() / mass1) ** 2
        assert abs((var1 - var0) - 2 * dt) <= 1e-6
        v = new


def test_kernel_is_normalised():
    w = green_weights(0.01, 0.002, 0.48)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    m = (w.size - 1) // 2
    mean = np.sum(w * 0.01 * np.arange(-m, m + 1))
    assert mean == pytest.approx(0.48 * 0.002, rel=1e-6)


@given(arrays(float, 300, elements=st.floats(0.0, 1.0)), st.floats(-1.0, 1.0))
def test_heat_step_translation_equivariance(v, c):
    dz, dt = 0.01, 0.002
    m = (green_weights(dz, dt, c).size - 1) // 2
    a = heat_step(v[:-1], dz, dt, c)
    b = heat_step(v[1:], dz, dt, c)
    inner = slice(m + 1, v.size - m - 2)
    assert np.array_equal(a[1:][inner], b[inner])


def _ordered_pair(draw_v, gap):
    v = np.sort(draw_v)
    w = np.clip(v + gap, 0.0, 1.0)
    v[0] = w[0] = 0.0
    v[-1] = w[-1] = 1.0
    return v, w


def _check_ordered(spec, v, w, ctrl, t_end=0.5):
    d = Domain(-2.0, 2.0, v.size - 1)
    a = run(spec, 0.4, d, v, ctrl, t_end, 0.05)
    b = run(spec, 0.4, d, w, ctrl, t_end, 0.05)
    assert ordering_violation(a, b) <= 1e-10
    for traj in (a, b):
        assert traj.clamp_max <= 1e-12
        assert all(s.min() >= 0.0 and s.max() <= 1.0 for s in traj.snapshots)


FAMILIES = st.sampled_from([ReactionSpec.cubic(0.75), ReactionSpec.holder(0.75, 0.5)])
# the monotone members: Strang splitting with a positive kernel, and backward Euler
MONOTONE = st.sampled_from([SchemeCtrl("splitting_green"), SchemeCtrl("imex_fd", theta=1.0)])


@settings(max_examples=15)
@given(
    arrays(float, 401, elements=st.floats(0.0, 1.0)),
    arrays(float, 401, elements=st.floats(0.0, 0.5)),
    MONOTONE,
    FAMILIES,
)
def test_comparison_preserved_arbitrary_data(v, gap, ctrl, spec):
    v, w = _ordered_pair(v, gap)
    _check_ordered(spec, v, w, ctrl)


@settings(max_examples=15)
@given(
    st.floats(-1.0, 1.0),
    st.floats(0.0, 0.5),
    st.floats(0.05, 1.0),
    st.sampled_from(["step", "smoothed_step"]),
    st.sampled_from(SCHEMES),
    FAMILIES,
)
def test_comparison_preserved_front_data(at, lead, width, kind, scheme, spec):
    # Crank-Nicolson at dt/dz^2 = 20 is not a monotone scheme; for front-like
    # data ordered by translation it still preserves order
    d = Domain(-2.0, 2.0, 400)
    v = InitialData(kind, at=at, width=width).resolve(d)
    w = InitialData(kind, at=at - lead, width=width).resolve(d)
    _check_ordered(spec, v, w, SchemeCtrl(scheme), t_end=1.0)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_range_and_clamp_step_data(holder, scheme):
    v0 = InitialData("step").resolve(SMALL)
    traj = run(holder, 0.48, SMALL, v0, SchemeCtrl(scheme), 3.0, 0.5)
    assert traj.clamp_max <= 1e-12
    assert all(s.min() >= 0.0 and s.max() <= 1.0 for s in traj.snapshots)


def test_binary_layout_and_roundtrip(cubic, tmp_path):
    d = Domain(-1.0, 1.0, 8)
    v0 = InitialData("smoothed_step", width=0.5).resolve(d)
    traj = run(cubic, 0.35, d, v0, SchemeCtrl(dt=0.01), 0.05, 0.02)
    raw = trajectory_bytes(traj)
    n, dz, zmin = np.frombuffer(raw[:8], "<i8")[0], *np.frombuffer(raw[8:24], "<f8")
    assert (n, dz, zmin) == (8, 0.25, -1.0)
    assert len(raw) == 24 + len(traj) * 8 * (1 + 9)
    path = tmp_path / "t.bin"
    write_trajectory_binary(path, traj)
    back = read_trajectory_binary(path, 0.35)
    assert back.times == traj.times
    assert all(np.array_equal(a, b) for a, b in zip(back.snapshots, traj.snapshots))


def test_csv_roundtrip(cubic, tmp_path):
    d = Domain(-1.0, 1.0, 8)
    v0 = InitialData("smoothed_step", width=0.5).resolve(d)
    traj = run(cubic, 0.35, d, v0, SchemeCtrl(dt=0.01), 0.05, 0.02)
    text = trajectory_csv(traj)
    assert text.splitlines()[0] == "t,z,v"
    path = tmp_path / "t.csv"
    path.write_text(text)
    back = read_trajectory_csv(path, 0.35)
    assert np.allclose(back.times, traj.times, rtol=0, atol=0)
    assert all(np.array_equal(a, b) for a, b in zip(back.snapshots, traj.snapshots))


def test_run_is_deterministic(holder):
    v0 = InitialData("step").resolve(SMALL)
    a = run(holder, 0.48, SMALL, v0, SchemeCtrl(), 1.0, 0.5)
    b = run(holder, 0.48, SMALL, v0, SchemeCtrl(), 1.0, 0.5)
    assert trajectory_bytes(a) == trajectory_bytes(b)
