"""Envelopes, comparison monitoring, the weighted energy, and shift tracking."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConvergenceError, HypothesisViolation
from .pde import Domain, InitialData, SchemeCtrl, Trajectory, check_h5, plateaus, run
from .profile import ProfileTable, eval_profile
from .reaction import ReactionSpec, eval_F, estimate_secant_constants, one_sided_lipschitz


@dataclass(frozen=True)
class EnvelopeParams:
    eta: float
    delta: float
    mu: float
    mu_under: float
    mu_over: float
    nu: float
    q0_sub: float
    q0_sup: float
    xi_inf_sub: float
    xi_inf_sup: float
    z_star_sub: float
    z_star_sup: float
    omega: float
    L: float
    q0_sub_interval: tuple = ()
    q0_sup_interval: tuple = ()

    def q(self, t):
        decay = np.exp(-self.mu * np.asarray(t, dtype=float))
        return self.q0_sub * decay, self.q0_sup * decay

    def xi(self, t):
        q1, q2 = self.q(t)
        return self.xi_inf_sub - self.nu * q1, self.xi_inf_sup - self.nu * q2

    def to_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["q0_sub_interval"] = list(self.q0_sub_interval)
        out["q0_sup_interval"] = list(self.q0_sup_interval)
        return out


def _omega(profile: ProfileTable, delta):
    """``min sqrt(y)`` over ``[delta, 1 - delta]`` from the tabulated slopes."""
    u, s = profile.u_values, profile.slopes
    inside = (u > delta) & (u < 1.0 - delta)
    ends = np.interp([delta, 1.0 - delta], u, s)
    return float(min(ends.min(), s[inside].min() if inside.any() else np.inf))


def _min_translate(ok, lo, hi, tol=1e-12):
    """Smallest ``x`` in ``[lo, hi]`` with ``ok(x)``, for monotone ``ok``."""
    while not ok(hi):
        hi = hi + 2.0 * (hi - lo) + 1.0
    while ok(lo):
        lo = lo - 2.0 * (hi - lo) - 1.0
    for _ in range(200):
        if hi - lo <= tol * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def sub_translate(profile, z, v0, q0):
    """Smallest ``z*`` with ``U(z - z*) - q0 <= v0(z)`` at every node."""
    need = v0 + q0 < 1.0
    if not need.any():
        return -math.inf
    zz, target = z[need], v0[need] + q0
    guess = float(np.max(zz - profile.z_of_u(np.clip(target, 0.0, 1.0))))

    def ok(s):
        return bool(np.all(eval_profile(profile, zz - s) - q0 <= v0[need]))

    return _min_translate(ok, guess - 0.01, guess + 0.01)


def sup_translate(profile, z, v0, q0):
    """Smallest ``z*`` with ``U(z + z*) + q0 >= v0(z)`` at every node."""
    need = v0 - q0 > 0.0
    if not need.any():
        return -math.inf
    zz, target = z[need], v0[need] - q0
    guess = float(np.max(profile.z_of_u(np.clip(target, 0.0, 1.0)) - zz))

    def ok(s):
        return bool(np.all(eval_profile(profile, zz + s) + q0 >= v0[need]))

    return _min_translate(ok, guess - 0.01, guess + 0.01)


def build_envelopes(spec: ReactionSpec, profile: ProfileTable, z, v0, eta: float) -> EnvelopeParams:
    """Constants of the sub/supersolution pair for the initial data ``v0``."""
    z = np.asarray(z, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    secant = estimate_secant_constants(spec, eta)
    h5 = check_h5(v0, spec, eta)
    left, right = plateaus(v0)
    sub_lo, sub_hi = max(1.0 - right, eta), 1.0 - spec.s0 - 2.0 * eta
    sup_lo, sup_hi = max(left, eta), spec.s0 - 2.0 * eta
    if not (sub_lo < sub_hi and sup_lo < sup_hi) or not h5.ok:
        raise HypothesisViolation(
            f"eta too large for these initial data: admissible q0 intervals "
            f"({sub_lo:.6g}, {sub_hi:.6g}) and ({sup_lo:.6g}, {sup_hi:.6g})"
        )
    q_sub = 0.5 * (sub_lo + sub_hi)
    q_sup = 0.5 * (sup_lo + sup_hi)
    mu = min(secant["mu_under"], secant["mu_over"])
    L = one_sided_lipschitz(spec)
    omega = _omega(profile, secant["delta"])
    nu = (1.0 + L / mu) / omega
    zs_sub = sub_translate(profile, z, v0, q_sub)
    zs_sup = sup_translate(profile, z, v0, q_sup)
    return EnvelopeParams(
        eta=eta,
        delta=secant["delta"],
        mu=mu,
        mu_under=secant["mu_under"],
        mu_over=secant["mu_over"],
        nu=nu,
        q0_sub=q_sub,
        q0_sup=q_sup,
        xi_inf_sub=nu * q_sub + zs_sub,
        xi_inf_sup=nu * q_sup + zs_sup,
        z_star_sub=zs_sub,
        z_star_sup=zs_sup,
        omega=omega,
        L=L,
        q0_sub_interval=(sub_lo, sub_hi),
        q0_sup_interval=(sup_lo, sup_hi),
    )


def eval_envelopes(params: EnvelopeParams, profile: ProfileTable, z, t):
    """``(v1, v2)`` at ``(z, t)``."""
    q1, q2 = params.q(t)
    x1, x2 = params.xi(t)
    z = np.asarray(z, dtype=float)
    v1 = np.maximum(eval_profile(profile, z - x1) - q1, 0.0)
    v2 = np.minimum(eval_profile(profile, z + x2) + q2, 1.0)
    return v1, v2


def check_comparison(traj: Trajectory, params: EnvelopeParams, profile: ProfileTable) -> float:
    """Largest envelope violation ``max(v1 - v, v - v2, 0)`` over the trajectory."""
    worst = 0.0
    z = traj.z
    for t, v in zip(traj.times, traj.snapshots):
        v1, v2 = eval_envelopes(params, profile, z, t)
        worst = max(worst, float(np.max(v1 - v)), float(np.max(v - v2)))
    return worst


def ordering_violation(a: Trajectory, b: Trajectory) -> float:
    """``max(a - b, 0)`` over common snapshots; zero when ``a <= b`` is preserved."""
    worst = 0.0
    for va, vb in zip(a.snapshots, b.snapshots):
        worst = max(worst, float(np.max(va - vb)))
    return worst


# weighted energy


@dataclass(frozen=True)
class LyapunovSample:
    t: float
    E: float
    dissipation: float
    residual: float


def energy(v, z, c, spec: ReactionSpec, interval=None):
    """``int (v_z**2 / 2 - F(v)) e^{cz} dz``.

    The gradient term uses cell differences at cell midpoints; the
    potential term is a nodal trapezoid.
    """
    v = np.asarray(v, dtype=float)
    if interval is not None:
        sel = (z >= interval[0]) & (z <= interval[1])
        z, v = z[sel], v[sel]
    dz = np.diff(z)
    zm = 0.5 * (z[1:] + z[:-1])
    grad = 0.5 * np.sum((np.diff(v) / dz) ** 2 * np.exp(c * zm) * dz)
    pot = np.trapezoid(-eval_F(spec, v) * np.exp(c * z), z)
    return float(grad + pot)


def lyapunov_series(traj: Trajectory, spec: ReactionSpec, c=None, interval=None):
    """Energy, dissipation ``int v_t**2 e^{cz}`` and the identity residual.

    ``v_t`` and ``dE/dt`` are centred differences of the snapshots, so the
    check does not depend on the stepper.  The default interval is the
    whole domain, where the Dirichlet ends make the boundary flux vanish.
    """
    if len(traj) < 3:
        raise ConvergenceError("insufficient sampling: need at least 3 snapshots")
    c = traj.c if c is None else c
    z = traj.z
    sel = slice(None)
    if interval is not None:
        sel = (z >= interval[0]) & (z <= interval[1])
    t = np.asarray(traj.times)
    E = np.array([energy(v, z, c, spec, interval) for v in traj.snapshots])
    w = np.exp(c * z[sel])
    out = []
    for k in range(len(t)):
        if 0 < k < len(t) - 1:
            span = t[k + 1] - t[k - 1]
            vt = (traj.snapshots[k + 1][sel] - traj.snapshots[k - 1][sel]) / span
            diss = float(np.trapezoid(vt**2 * w, z[sel]))
            rate = (E[k + 1] - E[k - 1]) / span
            res = abs(rate + diss)
        else:
            diss, res = math.nan, math.nan
        out.append(LyapunovSample(float(t[k]), float(E[k]), diss, res))
    return out


def lyapunov_summary(samples, slack=1e-6):
    E = np.array([s.E for s in samples])
    diss = np.array([s.dissipation for s in samples[1:-1]])
    res = np.array([s.residual for s in samples[1:-1]])
    increase = float(np.max(np.diff(E))) if E.size > 1 else 0.0
    scale = abs(E[0])
    return {
        "E0": float(E[0]),
        "max_increase": increase,
        "non_increasing": bool(increase <= slack * scale),
        "max_dissipation": float(np.max(diss)),
        "max_identity_residual": float(np.max(res)),
        "relative_identity_residual": float(np.max(res) / np.max(diss)) if np.max(diss) > 0 else 0.0,
    }


# shift tracking


@dataclass
class ShiftEstimate:
    zeta: float
    zeta_lsq: float
    crossings: int
    flagged: bool


def _crossings(v, z, level):
    above = v >= level
    idx = np.flatnonzero(above[1:] != above[:-1])
    zc = []
    for i in idx:
        a, b = v[i], v[i + 1]
        zc.append(z[i] + (z[i + 1] - z[i]) * (level - a) / (b - a))
    return np.array(zc)


def estimate_shift(v, z, profile: ProfileTable, lsq=True) -> ShiftEstimate:
    """``zeta`` with ``v(z) ~ U(z + zeta)`` from the ``s0`` level crossing.

    With several crossings the one nearest to the midpoint of the total
    variation is used and the estimate is flagged.
    """
    v = np.asarray(v, dtype=float)
    zc = _crossings(v, z, profile.s0)
    if zc.size == 0:
        raise ConvergenceError("front not in domain: no crossing of the level s0")
    if zc.size == 1:
        zcross = float(zc[0])
    else:
        tv = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(v)))])
        zmid = float(np.interp(0.5 * tv[-1], tv, z))
        zcross = float(zc[np.argmin(np.abs(zc - zmid))])
    zeta = -zcross
    zeta_lsq = math.nan
    if lsq:
        res = minimize_scalar(
            lambda s: float(np.sum((v - eval_profile(profile, z + s)) ** 2)),
            bounds=(zeta - 1.0, zeta + 1.0),
            method="bounded",
            options={"xatol": 1e-10},
        )
        zeta_lsq = float(res.x)
    return ShiftEstimate(zeta, zeta_lsq, int(zc.size), bool(zc.size > 1))


@dataclass
class ShiftTrack:
    t: list = field(default_factory=list)
    zeta: list = field(default_factory=list)
    zeta_lsq: list = field(default_factory=list)
    sup_dist: list = field(default_factory=list)
    flagged: list = field(default_factory=list)


def sup_distance(v, z, profile, zeta):
    return float(np.max(np.abs(np.asarray(v) - eval_profile(profile, z + zeta))))


def track_shift(traj: Trajectory, profile: ProfileTable, lsq=True) -> ShiftTrack:
    track = ShiftTrack()
    z = traj.z
    for t, v in zip(traj.times, traj.snapshots):
        est = estimate_shift(v, z, profile, lsq=lsq)
        track.t.append(float(t))
        track.zeta.append(est.zeta)
        track.zeta_lsq.append(est.zeta_lsq)
        track.sup_dist.append(sup_distance(v, z, profile, est.zeta))
        track.flagged.append(est.flagged)
    return track


def zeta_at(track: ShiftTrack, t):
    return float(np.interp(t, track.t, track.zeta))


def stability_probe(
    spec: ReactionSpec,
    profile: ProfileTable,
    domain: Domain = Domain(),
    ctrl: SchemeCtrl = SchemeCtrl(),
    epsilons=(0.01, 0.02, 0.05),
    t_end: float = 20.0,
    snapshot_every: float = 0.5,
):
    """``max_t sup_z |v - U| / eps`` for bump perturbations ``U + eps exp(-(z/4)**2)``.

    Returns ``(C', ratios)``; the distance is to the unshifted profile, as
    in the stability statement.
    """
    z = domain.z
    U = eval_profile(profile, z)
    ratios = {}
    for eps in epsilons:
        v0 = InitialData("profile_perturbation", epsilon=eps).resolve(domain, profile)
        traj = run(spec, profile.c_star, domain, v0, ctrl, t_end, snapshot_every)
        worst = max(float(np.max(np.abs(v - U))) for v in traj.snapshots)
        ratios[float(eps)] = worst / eps
    return max(ratios.values()), ratios


def convergence_report(
    traj: Trajectory,
    profile: ProfileTable,
    spec: ReactionSpec,
    stability=None,
    cauchy_window=20.0,
    monotone_slack=1e-4,
):
    """Summary of the approach to a translate of the wave profile."""
    track = track_shift(traj, profile)
    if len(track.t) < 10:
        raise ConvergenceError("convergence report needs at least 10 snapshots")
    n = len(track.t)
    tail = np.asarray(track.sup_dist[n // 2 :])
    monotone = bool(np.all(np.diff(tail) <= monotone_slack))
    t_end = track.t[-1]
    zeta_inf = track.zeta[-1]
    cauchy = abs(zeta_inf - zeta_at(track, max(t_end - cauchy_window, 0.0)))
    samples = lyapunov_series(traj, spec)
    lyap = lyapunov_summary(samples)
    report = {
        "zeta_inf": zeta_inf,
        "zeta_inf_lsq": track.zeta_lsq[-1],
        "final_sup_dist": track.sup_dist[-1],
        "zeta_cauchy": cauchy,
        "monotone_tail": monotone,
        "lyapunov_ok": lyap["non_increasing"],
        "lyapunov": lyap,
        "multiple_crossings_flagged": int(sum(track.flagged)),
        "stability_constant_estimate": None,
    }
    if stability is not None:
        report["stability_constant_estimate"] = stability[0]
        report["stability_ratios"] = {str(k): v for k, v in stability[1].items()}
    return report, track, samples
