"""Wave speed from the first-order boundary value problem for ``y = U'(z)**2``.

Writing ``r = U`` and ``y(r) = |dU/dz|**2`` turns the travelling-wave ODE
``U'' + c U' + f(U) = 0`` into

    dy/dr = -2 (c sqrt(y+) + f(r)),    y(0) = y(1) = 0,

which has a solution for exactly one speed ``c*``.  Shooting forward from
``r = 0``, the terminal behaviour is monotone in ``c``: too slow a speed
leaves ``y(1) > 0``, too fast a speed drives ``y`` to zero before ``r = 1``.
Bisection on that classification locates ``c*``.

The integration runs on the angle ``theta`` with ``r = sin(theta)**2``.
Hölder singularities ``r**a`` and ``(1 - r)**a`` become powers of
``sin`` and ``cos``, and the nodes cluster quadratically at both ends,
which keeps classical RK4 accurate right up to the endpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import ConvergenceError, HypothesisViolation
from .reaction import ReactionSpec, eval_F, eval_f


@dataclass(frozen=True)
class WaveControl:
    """Resolution and tolerances for :func:`integrate_y` and :func:`solve_speed`."""

    n_nodes: int = 2048
    balance_tol: float = 1e-10
    start_eps: float | None = None


@dataclass
class YSolution:
    c: float
    r_grid: np.ndarray
    y_values: np.ndarray
    dy_values: np.ndarray
    start_coeff: float
    terminal: str
    terminal_value: float
    theta: np.ndarray = field(repr=False, default=None)

    @property
    def y1(self):
        return float(self.y_values[-1])

    def at(self, r):
        """Cubic Hermite interpolation of ``y`` (uses the exact slopes)."""
        spline = CubicHermiteSpline(self.r_grid, self.y_values, self.dy_values)
        return np.maximum(spline(r), 0.0)


@dataclass
class SpeedResult:
    c_star: float
    y: YSolution
    identity_residual: float
    bisection_iterations: int
    bracket: tuple

    def to_dict(self):
        return {
            "c_star": self.c_star,
            "identity_residual": self.identity_residual,
            "iterations": self.bisection_iterations,
            "bracket": list(self.bracket),
            "terminal": self.y.terminal,
            "y1": self.y.y1,
        }


class _Grid:
    """Angle grid with a node exactly at ``s0`` and precomputed reaction terms."""

    def __init__(self, spec: ReactionSpec, n_nodes: int):
        half = 0.5 * math.pi
        th0 = math.asin(math.sqrt(spec.s0))
        n0 = min(max(2, round(n_nodes * th0 / half)), n_nodes - 2)
        theta = np.concatenate(
            [np.linspace(0.0, th0, n0 + 1), np.linspace(th0, half, n_nodes - n0 + 1)[1:]]
        )
        r = np.sin(theta) ** 2
        r[0], r[n0], r[-1] = 0.0, spec.s0, 1.0
        mid = 0.5 * (theta[1:] + theta[:-1])
        self.theta = theta
        self.r = r
        self.h = np.diff(theta)
        self.w = np.sin(2.0 * theta)
        self.w[-1] = 0.0
        self.wm = np.sin(2.0 * mid)
        self.g = eval_f(spec, r) * self.w
        self.gm = eval_f(spec, np.sin(mid) ** 2) * self.wm
        self.f = eval_f(spec, r)


def _start_value(spec, c, eps, substeps=256):
    """``y(eps)`` from an implicit march of ``y' = -2(c sqrt(y) + f)`` on ``[0, eps]``.

    The antiderivative is integrated exactly; the drag term is trapezoidal
    in ``sqrt(y)``, falling back to backward Euler when the trapezoid
    quadratic has no nonnegative root.
    """
    r = eps * np.linspace(0.0, 1.0, substeps + 1) ** 2
    F = eval_F(spec, r)
    y = 0.0
    for j in range(substeps):
        d = r[j + 1] - r[j]
        gain = y - 2.0 * (F[j + 1] - F[j])
        rhs = gain - c * d * math.sqrt(y)
        if rhs >= 0.0:
            u = 0.5 * (-c * d + math.sqrt(c * c * d * d + 4.0 * rhs))
        else:
            u = -c * d + math.sqrt(c * c * d * d + max(gain, 0.0))
        y = u * u
    return y


_GRID_CACHE: dict = {}


def _grid(spec, n_nodes):
    key = (spec, n_nodes)
    grid = _GRID_CACHE.get(key)
    if grid is None:
        if len(_GRID_CACHE) > 32:
            _GRID_CACHE.clear()
        grid = _GRID_CACHE[key] = _Grid(spec, n_nodes)
    return grid


def integrate_y(spec: ReactionSpec, c: float, ctrl: WaveControl = WaveControl()) -> YSolution:
    """Shoot ``y`` from ``r = 0`` with speed ``c`` and classify the terminal state.

    ``terminal`` is ``"positive_at_one"``, ``"hit_zero"`` (``terminal_value``
    holds the crossing point) or ``"balanced"`` (``|y(1)| <= balance_tol``).
    """
    if c < 0.0:
        raise ValueError("speed must be non-negative")
    grid = _grid(spec, ctrl.n_nodes)
    h, w, wm, g, gm, fr = grid.h, grid.w, grid.wm, grid.g, grid.gm, grid.f
    n = grid.r.size
    y = np.zeros(n)
    eps = grid.r[1] if ctrl.start_eps is None else ctrl.start_eps
    start = 1
    if ctrl.start_eps is not None:
        start = int(np.searchsorted(grid.r, eps))
        eps = grid.r[start]
    y[start] = _start_value(spec, c, eps)
    if start > 1:
        y[1:start] = [_start_value(spec, c, ri) for ri in grid.r[1:start]]
    sqrt = math.sqrt
    yk = float(y[start])
    last = n - 1
    stop = None
    for k in range(start, last):
        hk = float(h[k])
        wk, wmk, wn = float(w[k]), float(wm[k]), float(w[k + 1])
        gk, gmk, gn = float(g[k]), float(gm[k]), float(g[k + 1])
        k1 = -2.0 * (c * sqrt(yk if yk > 0.0 else 0.0) * wk + gk)
        ya = yk + 0.5 * hk * k1
        k2 = -2.0 * (c * sqrt(ya if ya > 0.0 else 0.0) * wmk + gmk)
        ya = yk + 0.5 * hk * k2
        k3 = -2.0 * (c * sqrt(ya if ya > 0.0 else 0.0) * wmk + gmk)
        ya = yk + hk * k3
        k4 = -2.0 * (c * sqrt(ya if ya > 0.0 else 0.0) * wn + gn)
        ynew = yk + hk * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if ynew < 0.0 and fr[k + 1] <= 0.0 and c > 0.0:
            # y cannot vanish where f < 0; stiff overshoot, project onto
            # the slow manifold c sqrt(y) = -f
            ynew = (fr[k + 1] / c) ** 2
        y[k + 1] = ynew
        if ynew < 0.0 and k + 1 < last:
            stop = k + 1
            break
        yk = ynew
    if stop is not None:
        r0, r1 = grid.r[stop - 1], grid.r[stop]
        rbar = r0 + (r1 - r0) * y[stop - 1] / (y[stop - 1] - y[stop])
        m = stop + 1
        r_grid, y_vals = grid.r[:m].copy(), y[:m].copy()
        terminal, value = "hit_zero", float(rbar)
    else:
        r_grid, y_vals = grid.r.copy(), y
        y1 = float(y[-1])
        if abs(y1) <= ctrl.balance_tol:
            terminal = "balanced"
        elif y1 > 0.0:
            terminal = "positive_at_one"
        else:
            terminal = "hit_zero"
        value = y1
    dy = -2.0 * (c * np.sqrt(np.maximum(y_vals, 0.0)) + eval_f(spec, r_grid))
    a0 = spec.alpha0
    start_coeff = float(y[start] / eps ** (1.0 + a0)) if eps > 0 else 0.0
    return YSolution(c, r_grid, y_vals, dy, start_coeff, terminal, value, grid.theta[: r_grid.size])


@dataclass
class TailMarch:
    """Similarity solution ``y = d**(1 + a) Y(log d)`` near an equilibrium.

    ``d`` is the distance to the equilibrium (``r`` or ``1 - r``); ``z``
    accumulates ``int dd / sqrt(y)`` from ``d = 0`` (left as ``nan`` when
    that integral diverges).
    """

    a: float
    x: np.ndarray
    Y: np.ndarray
    z: np.ndarray

    def y_at(self, d):
        xd = np.log(d)
        return d ** (1.0 + self.a) * np.interp(xd, self.x, self.Y)

    def z_at(self, d):
        return np.interp(np.log(d), self.x, self.z)


def _forcing(spec, side, d):
    """``-f(d)/d**a`` (lower side) or ``f(1-d)/d**a`` (upper side)."""
    if side == "lower":
        if d < 1e-12:
            return spec.gamma0
        return -float(eval_f(spec, d)) / d**spec.alpha0
    if d < 1e-8:
        return spec.gamma1
    return float(eval_f(spec, 1.0 - d)) / d**spec.alpha1


def similarity_tail(spec: ReactionSpec, c: float, side: str, d_end: float, dx: float = 0.05):
    """RK4 march of the similarity variable from ``d ~ 1e-300`` up to ``d_end``.

    In ``x = log d`` the scaled ``Y`` relaxes towards its local balance at
    rate ``1 + a``, so the march is stable and free of underflow.
    """
    a = spec.alpha0 if side == "lower" else spec.alpha1
    sign = -1.0 if side == "lower" else 1.0
    kappa = 0.5 * (1.0 - a)
    x_end = math.log(d_end)
    span = 40.0 if kappa == 0.0 else min(max(40.0, 36.0 / kappa), 680.0 + x_end)
    n = max(int(math.ceil(span / dx)), 8)
    x = np.linspace(x_end - span, x_end, n + 1)
    h = x[1] - x[0]

    def rhs(xv, Y):
        d = math.exp(xv)
        eps = math.exp(kappa * xv)
        Yp = Y if Y > 0.0 else 0.0
        root = math.sqrt(Yp)
        return (
            2.0 * _forcing(spec, side, d) - (1.0 + a) * Y + sign * 2.0 * c * eps * root,
            eps / root if root > 0.0 else 0.0,
        )

    g = spec.gamma0 if side == "lower" else spec.gamma1
    if a == 1.0:
        root = 0.5 * (sign * c + math.sqrt(c * c + 4.0 * g))
        Y0 = root * root
    else:
        Y0 = 2.0 * g / (1.0 + a)
    Y = np.empty(n + 1)
    z = np.empty(n + 1)
    Y[0] = Y0
    z[0] = math.exp(kappa * x[0]) / (kappa * math.sqrt(Y0)) if kappa > 0.0 else 0.0
    for k in range(n):
        xk, yk = x[k], Y[k]
        k1, q1 = rhs(xk, yk)
        k2, q2 = rhs(xk + 0.5 * h, yk + 0.5 * h * k1)
        k3, q3 = rhs(xk + 0.5 * h, yk + 0.5 * h * k2)
        k4, q4 = rhs(xk + h, yk + h * k3)
        Y[k + 1] = yk + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        z[k + 1] = z[k] + h * (q1 + 2.0 * q2 + 2.0 * q3 + q4) / 6.0
    if kappa == 0.0:
        z[:] = np.nan
    return TailMarch(a, x, Y, z)


def integrate_y_upper(spec: ReactionSpec, c: float, ctrl: WaveControl = WaveControl()):
    """``y`` on ``[s0, 1]`` shot backwards from ``y(1) = 0``.

    Returns ``(theta, r, y)`` over the grid nodes from ``s0`` to ``1``.  Used
    for the profile near ``r = 1``, where the forward shot carries its
    terminal miss.
    """
    grid = _grid(spec, ctrl.n_nodes)
    k0 = int(np.argmin(np.abs(grid.r - spec.s0)))
    h, w, wm, g, gm = grid.h, grid.w, grid.wm, grid.g, grid.gm
    n = grid.r.size
    y = np.zeros(n)
    d = 1.0 - grid.r[n - 2]
    y[n - 2] = float(similarity_tail(spec, c, "upper", d).y_at(d))
    sqrt = math.sqrt
    yk = float(y[n - 2])
    for k in range(n - 2, k0, -1):
        hk = -float(h[k - 1])
        wk, wmk, wn = float(w[k]), float(wm[k - 1]), float(w[k - 1])
        gk, gmk, gn = float(g[k]), float(gm[k - 1]), float(g[k - 1])
        k1 = -2.0 * (c * sqrt(yk) * wk + gk)
        ya = yk + 0.5 * hk * k1
        k2 = -2.0 * (c * sqrt(max(ya, 0.0)) * wmk + gmk)
        ya = yk + 0.5 * hk * k2
        k3 = -2.0 * (c * sqrt(max(ya, 0.0)) * wmk + gmk)
        ya = yk + hk * k3
        k4 = -2.0 * (c * sqrt(max(ya, 0.0)) * wn + gn)
        yk = max(yk + hk * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0, 0.0)
        y[k - 1] = yk
    return grid.theta[k0:].copy(), grid.r[k0:].copy(), y[k0:]


def _too_slow(sol: YSolution) -> bool:
    if sol.terminal == "positive_at_one":
        return True
    if sol.terminal == "balanced":
        return sol.y1 >= 0.0
    return False


def speed_lower_bound(spec: ReactionSpec, n=4001):
    """``-F(1) / int_0^1 sqrt(-2F)``; valid because ``y_c <= -2F`` for ``c >= 0``."""
    r = np.linspace(0.0, 1.0, n)
    root = np.sqrt(np.maximum(-2.0 * eval_F(spec, r), 0.0))
    return float(-eval_F(spec, 1.0) / np.trapezoid(root, r))


def solve_speed(
    spec: ReactionSpec,
    bracket=None,
    tol: float = 1e-8,
    ctrl: WaveControl = WaveControl(),
    max_iter: int = 200,
) -> SpeedResult:
    """Bisection on the terminal classification of :func:`integrate_y`.

    A caller bracket that does not straddle the speed is widened
    automatically (``c = 0`` is always too slow when ``F(1) < 0``).
    """
    F1 = float(eval_F(spec, 1.0))
    if not F1 < 0.0:
        raise HypothesisViolation("no positive-speed wave exists: F(1) >= 0")
    if bracket is None:
        lo = 0.9 * speed_lower_bound(spec)
        hi = max(2.0 * lo, 1e-3)
    else:
        lo, hi = map(float, bracket)
    lo = max(lo, 0.0)
    if not _too_slow(integrate_y(spec, lo, ctrl)):
        lo = 0.0
    expand = 0
    while _too_slow(integrate_y(spec, hi, ctrl)):
        lo, hi = hi, 2.0 * hi + 1e-3
        expand += 1
        if expand > 60:
            raise ConvergenceError("could not bracket the wave speed")
    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _too_slow(integrate_y(spec, mid, ctrl)):
            lo = mid
        else:
            hi = mid
        iterations += 1
        if iterations > max_iter:
            raise ConvergenceError("bisection did not converge")
    c_star = 0.5 * (lo + hi)
    # the slow side keeps y > 0 on (0, 1); that is the solution handed on
    sol = integrate_y(spec, lo, ctrl)
    sol.c = c_star
    if abs(sol.y1) <= ctrl.balance_tol:
        sol.terminal = "balanced"
    result = SpeedResult(c_star, sol, 0.0, iterations, (lo, hi))
    result.identity_residual = verify_speed_identity(spec, result)
    return result


def sqrt_y_integral(sol: YSolution) -> float:
    """``int_0^1 sqrt(y) dr`` computed in the angle variable."""
    theta = sol.theta
    integrand = np.sqrt(np.maximum(sol.y_values, 0.0)) * np.sin(2.0 * theta)
    return float(np.trapezoid(integrand, theta))


def verify_speed_identity(spec: ReactionSpec, result: SpeedResult, c=None) -> float:
    """Residual ``|c int_0^1 sqrt(y) dr + F(1)|`` of the energy identity."""
    c = result.c_star if c is None else c
    return abs(c * sqrt_y_integral(result.y) + float(eval_F(spec, 1.0)))
