"""Moving-frame reaction-diffusion solver ``v_t = v_zz + c v_z + f(v)``.

Two independent discretisations:

* ``imex_fd``: theta-scheme finite differences for diffusion and centred
  advection, explicit reaction, Dirichlet ends held at their initial
  values (0 and 1 for resolved initial data).
* ``splitting_green``: Strang splitting with the drift-shifted heat kernel
  as the linear propagator and SSP-RK2 reaction half steps.

The explicit reaction update is clipped to ``[0, 1]``.  For a Hölder
reaction the exact local flow reaches an equilibrium in finite time, and
the clip is the discrete counterpart of that.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import lapack
from scipy.ndimage import correlate1d

from .errors import ConfigError, HypothesisViolation
from .io import atomic_write, csv_text
from .reaction import ReactionSpec, eval_f, max_slope

SCHEMES = ("imex_fd", "splitting_green")
DATA_KINDS = ("step", "smoothed_step", "profile_perturbation", "table")


@dataclass(frozen=True)
class Domain:
    z_min: float = -40.0
    z_max: float = 40.0
    n_cells: int = 8000

    def __post_init__(self):
        if not self.z_max > self.z_min:
            raise ConfigError("domain requires z_min < z_max")
        if self.n_cells < 4:
            raise ConfigError("domain requires n_cells >= 4")

    @property
    def dz(self):
        return (self.z_max - self.z_min) / self.n_cells

    @property
    def z(self):
        return self.z_min + self.dz * np.arange(self.n_cells + 1)


@dataclass
class State:
    t: float
    v: np.ndarray
    step: int = 0


@dataclass(frozen=True)
class InitialData:
    """Initial data description; :meth:`resolve` samples it on a grid.

    ``profile_perturbation`` adds ``epsilon * exp(-(z/4)**2)`` to the wave
    profile translated by ``shift``; ``table`` linearly interpolates
    ``(table_z, table_v)`` with constant extension.
    """

    kind: str = "step"
    at: float = 0.0
    width: float = 1.0
    epsilon: float = 0.0
    shift: float = 0.0
    left: float = 0.0
    right: float = 1.0
    table_z: tuple | None = None
    table_v: tuple | None = None

    def __post_init__(self):
        if self.kind not in DATA_KINDS:
            raise ConfigError(f"unknown initial data kind {self.kind!r}")
        if not (0.0 <= self.left <= 1.0 and 0.0 <= self.right <= 1.0):
            raise ConfigError("initial plateaus must lie in [0,1]")
        if self.kind == "smoothed_step" and not self.width > 0.0:
            raise ConfigError("smoothed_step requires width > 0")
        if self.kind == "table":
            if self.table_z is None or self.table_v is None or len(self.table_z) != len(self.table_v):
                raise ConfigError("table data requires equal-length z and v columns")

    def resolve(self, domain: Domain, profile=None) -> np.ndarray:
        z = domain.z
        if self.kind == "step":
            v = np.where(z < self.at, self.left, self.right)
            v = np.where(z == self.at, 0.5 * (self.left + self.right), v)
        elif self.kind == "smoothed_step":
            s = 0.5 * (1.0 + np.tanh((z - self.at) / self.width))
            v = self.left + (self.right - self.left) * s
        elif self.kind == "profile_perturbation":
            if profile is None:
                raise ConfigError("profile_perturbation requires a wave profile")
            from .profile import eval_profile

            v = eval_profile(profile, z + self.shift) + self.epsilon * np.exp(-((z / 4.0) ** 2))
        else:
            v = np.interp(z, np.asarray(self.table_z, float), np.asarray(self.table_v, float))
        v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
        v[0], v[-1] = 0.0, 1.0
        return v


@dataclass(frozen=True)
class SchemeCtrl:
    scheme: str = "imex_fd"
    dt: float = 0.002
    theta: float = 0.5
    kernel_cutoff_sigmas: float = 8.0
    rannacher_steps: int = 4

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if not self.dt > 0.0:
            raise ConfigError("dt must be positive")
        if not 0.5 <= self.theta <= 1.0:
            raise ConfigError("theta must lie in [0.5, 1]")
        if not self.kernel_cutoff_sigmas > 0.0:
            raise ConfigError("kernel_cutoff_sigmas must be positive")


@dataclass
class H5Result:
    ok: bool
    left_plateau: float
    right_plateau: float
    message: str = ""

    def to_dict(self):
        return {
            "ok": self.ok,
            "left_plateau": self.left_plateau,
            "right_plateau": self.right_plateau,
            "message": self.message,
        }


def plateaus(v) -> tuple[float, float]:
    """``v(-inf)`` and ``v(+inf)`` estimates: max / min over the outer 10% of nodes."""
    v = np.asarray(v, dtype=float)
    m = max(1, v.size // 10)
    return float(np.max(v[:m])), float(np.min(v[-m:]))


def check_h5(v0, spec: ReactionSpec, eta: float) -> H5Result:
    """Plateau condition with a ``2 eta`` margin on both sides of ``s0``."""
    left, right = plateaus(v0)
    ok = left < spec.s0 - 2.0 * eta and right > spec.s0 + 2.0 * eta
    msg = "" if ok else (
        f"plateaus v0(-inf)={left:.6g}, v0(+inf)={right:.6g} do not satisfy "
        f"v0(-inf) < s0-2*eta < s0+2*eta < v0(+inf) with s0={spec.s0:g}, eta={eta:g}"
    )
    return H5Result(bool(ok), left, right, msg)


def check_guards(spec: ReactionSpec, c: float, domain: Domain, ctrl: SchemeCtrl, errors=None):
    """Stability guards; returns the list of violated inequalities (raises if ``errors`` is None)."""
    out = []
    slope = max_slope(spec)
    if ctrl.dt * slope > 0.5:
        out.append(f"stability guard dt*max_slope(f) <= 0.5 violated: {ctrl.dt:g}*{slope:.6g} = {ctrl.dt * slope:.6g}")
    if ctrl.scheme == "imex_fd" and abs(c) * domain.dz / 2.0 >= 1.0:
        out.append(f"cell Peclet guard |c|*dz/2 < 1 violated: {abs(c) * domain.dz / 2.0:.6g}")
    if ctrl.scheme == "splitting_green":
        half = _kernel_half_width(domain.dz, ctrl.dt, c, ctrl.kernel_cutoff_sigmas)
        if 2 * half + 1 > domain.n_cells:
            out.append("kernel support exceeds the domain")
    if errors is not None:
        errors.extend(out)
        return out
    if out:
        raise ConfigError("; ".join(out), out)
    return out


def _f_nodes(spec, v):
    """``f(v)``, evaluated only where ``0 < v < 1`` (it vanishes elsewhere)."""
    if spec.kind == "cubic":
        return eval_f(spec, v)
    out = np.zeros_like(v)
    idx = np.flatnonzero((v > 0.0) & (v < 1.0))
    out[idx] = eval_f(spec, v[idx])
    return out


def _reaction_euler(spec, v, dt):
    return np.clip(v + dt * _f_nodes(spec, v), 0.0, 1.0)


def _reaction_heun(spec, v, dt):
    """SSP-RK2: average of ``v`` and two clipped Euler steps.

    Each clipped Euler stage is non-decreasing in ``v`` (for Hölder ``f`` the
    region where ``1 + dt f'`` < 0 is clipped to an equilibrium), so the
    substep is order preserving.
    """
    once = _reaction_euler(spec, v, dt)
    return 0.5 * (v + _reaction_euler(spec, once, dt))


@lru_cache(maxsize=16)
def _imex_factor(n_cells, dz, c, dt, theta):
    """LU factors of ``I - theta dt A`` on the interior nodes."""
    n = n_cells - 1
    lower = 1.0 / dz**2 - c / (2.0 * dz)
    upper = 1.0 / dz**2 + c / (2.0 * dz)
    dl = np.full(n - 1, -theta * dt * lower)
    d = np.full(n, 1.0 + 2.0 * theta * dt / dz**2)
    du = np.full(n - 1, -theta * dt * upper)
    dl, d, du, du2, ipiv, info = lapack.dgttrf(dl, d, du)
    if info != 0:
        raise ConfigError("tridiagonal factorisation failed; check dt and dz")
    return dl, d, du, du2, ipiv, lower, upper


def _imex_once(spec, v, c, dz, dt, theta):
    n_cells = v.size - 1
    dl, d, du, du2, ipiv, lower, upper = _imex_factor(n_cells, dz, c, dt, theta)
    r = _reaction_euler(spec, v, dt)
    rhs = r[1:-1].copy()
    if theta < 1.0:
        av = lower * v[:-2] - 2.0 / dz**2 * v[1:-1] + upper * v[2:]
        rhs += (1.0 - theta) * dt * av
    # Dirichlet values are the (fixed) boundary entries of v
    bl, br = v[0], v[-1]
    rhs[0] += theta * dt * lower * bl
    rhs[-1] += theta * dt * upper * br
    x, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
    if info != 0:
        raise ConfigError("tridiagonal solve failed")
    out = np.empty_like(v)
    out[1:-1] = x
    out[0], out[-1] = bl, br
    return out


def _clamp(v):
    excess = max(0.0, -float(v.min()), float(v.max()) - 1.0)
    if excess > 0.0:
        np.clip(v, 0.0, 1.0, out=v)
    return v, excess


def step_imex(state: State, spec: ReactionSpec, c: float, dz: float, ctrl: SchemeCtrl):
    """One ``imex_fd`` step; returns ``(new_state, clamp_magnitude)``.

    With ``theta < 1`` the first ``rannacher_steps`` steps are replaced by
    two backward-Euler half steps to damp the non-smooth start.
    """
    if ctrl.theta < 1.0 and state.step < ctrl.rannacher_steps:
        half = 0.5 * ctrl.dt
        v = _imex_once(spec, state.v, c, dz, half, 1.0)
        v = _imex_once(spec, v, c, dz, half, 1.0)
    else:
        v = _imex_once(spec, state.v, c, dz, ctrl.dt, ctrl.theta)
    v, excess = _clamp(v)
    return State(state.t + ctrl.dt, v, state.step + 1), excess


def _kernel_half_width(dz, dt, c, sigmas):
    sigma = math.sqrt(2.0 * dt)
    return int(math.ceil((sigmas * sigma + abs(c) * dt) / dz))


@lru_cache(maxsize=16)
def green_weights(dz, dt, c, sigmas=8.0):
    """Normalised samples of the drift-shifted heat kernel, offsets ``-m..m``.

    Weight ``k`` multiplies ``v(z + (k - m) dz)``, so the linear step is
    ``v_new(z) = sum_y G(z - y + c dt; dt) v(y)``.
    """
    m = _kernel_half_width(dz, dt, c, sigmas)
    offs = dz * np.arange(-m, m + 1)
    x = offs - c * dt
    w = np.exp(-(x**2) / (4.0 * dt))
    w[np.abs(x) > sigmas * math.sqrt(2.0 * dt)] = 0.0
    return w / w.sum()


def heat_step(v, dz, dt, c, sigmas=8.0):
    """Convolution with the drift-shifted kernel, boundary plateaus extended."""
    w = green_weights(dz, dt, c, sigmas)
    if w.size > v.size:
        raise ConfigError("kernel support exceeds the domain")
    return correlate1d(v, w, mode="nearest")


def step_splitting(state: State, spec: ReactionSpec, c: float, dz: float, ctrl: SchemeCtrl):
    """One Strang step (half reaction, full kernel convolution, half reaction)."""
    dt = ctrl.dt
    bl, br = state.v[0], state.v[-1]
    v = _reaction_heun(spec, state.v, 0.5 * dt)
    v[0], v[-1] = bl, br
    v = heat_step(v, dz, dt, c, ctrl.kernel_cutoff_sigmas)
    v, excess = _clamp(v)
    v = _reaction_heun(spec, v, 0.5 * dt)
    v[0], v[-1] = bl, br
    return State(state.t + dt, v, state.step + 1), excess


@dataclass
class Trajectory:
    domain: Domain
    c: float
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    clamp_max: float = 0.0
    aborted: bool = False
    message: str = ""

    @property
    def z(self):
        return self.domain.z

    @property
    def final(self):
        return State(self.times[-1], self.snapshots[-1])

    def array(self):
        return np.vstack(self.snapshots)

    def __len__(self):
        return len(self.times)


def run(
    spec: ReactionSpec,
    c: float,
    domain: Domain,
    v0,
    ctrl: SchemeCtrl = SchemeCtrl(),
    t_end: float = 10.0,
    snapshot_every: float = 0.1,
    sink=None,
    eta: float | None = None,
    check_guard: bool = True,
) -> Trajectory:
    """Advance ``v0`` to ``t_end`` and collect snapshots.

    ``eta`` enables the plateau check; leave it ``None`` for equilibrium
    runs.  ``sink(t, v)`` receives every snapshot as it is taken.
    """
    v0 = np.asarray(v0, dtype=float)
    if v0.shape != (domain.n_cells + 1,):
        raise ConfigError("initial vector does not match the domain")
    if np.any(v0 < 0.0) or np.any(v0 > 1.0) or not np.all(np.isfinite(v0)):
        raise HypothesisViolation("initial data must take values in [0,1]")
    if eta is not None:
        h5 = check_h5(v0, spec, eta)
        if not h5.ok:
            raise HypothesisViolation(h5.message)
    if check_guard:
        check_guards(spec, c, domain, ctrl)
    stepper = step_imex if ctrl.scheme == "imex_fd" else step_splitting
    n_steps = int(round(t_end / ctrl.dt))
    every = max(1, int(round(snapshot_every / ctrl.dt)))
    traj = Trajectory(domain, c)
    state = State(0.0, v0.copy())

    def take(s):
        snap = s.v.copy()
        snap.setflags(write=False)
        traj.times.append(s.t)
        traj.snapshots.append(snap)
        if sink is not None:
            sink(s.t, snap)

    take(state)
    dz = domain.dz
    for k in range(1, n_steps + 1):
        new, excess = stepper(state, spec, c, dz, ctrl)
        new.t = k * ctrl.dt
        if not np.all(np.isfinite(new.v)):
            traj.aborted = True
            traj.message = f"non-finite value at t={new.t:g}; kept the last good snapshot"
            break
        traj.clamp_max = max(traj.clamp_max, excess)
        state = new
        if k % every == 0 or k == n_steps:
            take(state)
    return traj


# trajectory files

_HEADER = struct.Struct("<qdd")


def trajectory_bytes(traj: Trajectory) -> bytes:
    """Little-endian layout: ``int64 n_cells, float64 dz, float64 z_min``,
    then per snapshot ``float64 t`` followed by ``n_cells + 1`` float64 values."""
    d = traj.domain
    parts = [_HEADER.pack(d.n_cells, d.dz, d.z_min)]
    for t, v in zip(traj.times, traj.snapshots):
        parts.append(np.asarray([t], dtype="<f8").tobytes())
        parts.append(np.asarray(v, dtype="<f8").tobytes())
    return b"".join(parts)


def write_trajectory_binary(path, traj: Trajectory):
    atomic_write(path, trajectory_bytes(traj), mode="wb")


def read_trajectory_binary(path, c: float = 0.0) -> Trajectory:
    with open(path, "rb") as fh:
        raw = fh.read()
    n_cells, dz, z_min = _HEADER.unpack_from(raw, 0)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    width = n_cells + 2
    if body.size % width:
        raise ConfigError("truncated trajectory file")
    body = body.reshape(-1, width)
    domain = Domain(z_min, z_min + n_cells * dz, n_cells)
    traj = Trajectory(domain, c)
    for row in body:
        traj.times.append(float(row[0]))
        traj.snapshots.append(np.array(row[1:]))
    return traj


def trajectory_csv(traj: Trajectory) -> str:
    z = traj.z
    t = np.repeat(np.asarray(traj.times), z.size)
    zz = np.tile(z, len(traj.times))
    v = np.concatenate(traj.snapshots) if traj.snapshots else np.empty(0)
    return csv_text(["t", "z", "v"], [t, zz, v])


def read_trajectory_csv(path, c: float = 0.0) -> Trajectory:
    from .io import read_csv

    _, cols = read_csv(path)
    t, z, v = cols["t"], cols["z"], cols["v"]
    times = np.unique(t)
    n = z.size // times.size
    zn = z[:n]
    dz = (zn[-1] - zn[0]) / (n - 1)
    domain = Domain(float(zn[0]), float(zn[0] + (n - 1) * dz), n - 1)
    traj = Trajectory(domain, c)
    for k, tk in enumerate(times):
        traj.times.append(float(tk))
        traj.snapshots.append(v[k * n : (k + 1) * n].copy())
    return traj
