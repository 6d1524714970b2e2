"""Wave profile ``U(z)`` from the balanced solution of the speed problem.

The inverse profile is ``z(U) = int_{s0}^U dr / sqrt(y(r))``.  Near the
equilibria ``y ~ A r**(1 + a)``, so the integrand behaves like
``r**(-(1 + a)/2)``: integrable (finite front end) when ``a < 1`` and
logarithmically divergent (exponential tail) when ``a = 1``.

Quadrature runs on the same angle grid as the shooting (``r = sin^2``),
where the integrand becomes ``theta**(-a)`` times a smooth factor; product
integration against that weight handles both cases, including the
closed-form contribution of the innermost cell for finite ends.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import ConvergenceError, HypothesisViolation
from .reaction import ReactionSpec, eval_f
from .wave import SpeedResult, WaveControl, integrate_y_upper, similarity_tail

FINITE_MARGIN = 0.05
CAUCHY_RATIO = 0.99
TAIL_CELLS = 16


@dataclass(frozen=True)
class ProfileTable:
    """Monotone tabulated profile normalised by ``U(0) = s0``.

    ``z0`` / ``z1`` are ``-inf`` / ``+inf`` for exponential tails.
    """

    s0: float
    c_star: float
    z_nodes: np.ndarray
    u_values: np.ndarray
    slopes: np.ndarray
    z0: float
    z1: float
    tail_exponents: tuple = (1.0, 1.0)
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def finite_left(self):
        return math.isfinite(self.z0)

    @property
    def finite_right(self):
        return math.isfinite(self.z1)

    def __call__(self, z):
        return eval_profile(self, z)

    def z_of_u(self, u):
        """Inverse profile on the node range (linear in ``z``-space beyond it)."""
        u = np.asarray(u, dtype=float)
        return np.interp(u, self.u_values, self.z_nodes)

    def slope(self, z):
        """``U'(z)``, the derivative of the interpolant."""
        return _spline(self).derivative()(np.clip(z, self.z_nodes[0], self.z_nodes[-1]))

    def summary(self):
        return {
            "c_star": self.c_star,
            "s0": self.s0,
            "z0": self.z0,
            "z1": self.z1,
            "width": front_width(self),
        }


def _tail_fit(r, y):
    """Exponent and prefactor of ``y ~ A r**p`` from the innermost nodes."""
    sel = slice(1, 9)
    p, logA = np.polyfit(np.log(r[sel]), np.log(y[sel]), 1)
    return float(p), float(math.exp(logA))


def _moments(t0, t1, a):
    if a == 1.0:
        m0 = math.log(t1 / t0)
    else:
        m0 = (t1 ** (1.0 - a) - t0 ** (1.0 - a)) / (1.0 - a)
    m1 = (t1 ** (2.0 - a) - t0 ** (2.0 - a)) / (2.0 - a)
    return m0, m1


def _product_cumulative(t, G, a):
    """``int_{t[0]}^{t[k]} s**(-a) G(s) ds`` with ``G`` piecewise linear."""
    out = np.zeros(t.size)
    for k in range(t.size - 1):
        t0, t1 = t[k], t[k + 1]
        m0, m1 = _moments(t0, t1, a)
        slope = (G[k + 1] - G[k]) / (t1 - t0)
        out[k + 1] = out[k] + G[k] * m0 + slope * (m1 - t0 * m0)
    return out


def _finite_end(p_fit):
    """Finite front end iff ``y ~ d**p`` with ``p`` clearly below 2."""
    return p_fit < 2.0 - FINITE_MARGIN


def _cauchy_ratio(t, g, m=8):
    """Ratio of consecutive dyadic-shell increments of the tail integral.

    About ``2**(a - 1)`` for an integrable ``t**(-a)`` singularity and
    about 1 for the logarithmic case.
    """
    if 8 * m >= t.size:
        return float("nan")
    inner = np.trapezoid(g[2 * m : 4 * m + 1], t[2 * m : 4 * m + 1])
    outer = np.trapezoid(g[4 * m : 8 * m + 1], t[4 * m : 8 * m + 1])
    return float(inner / outer)


def reconstruct_profile(spec: ReactionSpec, speed: SpeedResult, ctrl: WaveControl | None = None) -> ProfileTable:
    """Tabulate ``U`` at the shooting nodes and locate the front ends.

    The lower half uses the forward shot; the upper half is re-shot from
    ``y(1) = 0`` at ``c*`` so that the terminal miss does not contaminate
    the tail near ``U = 1``.
    """
    sol = speed.y
    if sol.r_grid[-1] != 1.0 or sol.r_grid.size < 10:
        raise HypothesisViolation("corrupt y input: shooting did not reach r = 1")
    n_nodes = sol.r_grid.size - 1 if ctrl is None else ctrl.n_nodes
    ctrl = WaveControl(n_nodes=n_nodes)
    c = speed.c_star
    k0 = int(np.argmin(np.abs(sol.r_grid - spec.s0)))
    th_lo, r_lo, y_lo = sol.theta[: k0 + 1], sol.r_grid[: k0 + 1], sol.y_values[: k0 + 1]
    th_hi, r_hi, y_hi = integrate_y_upper(spec, c, ctrl)
    if np.any(y_lo[1:] <= 0.0) or np.any(y_hi[:-1] <= 0.0):
        raise HypothesisViolation("corrupt y input: y must be positive on (0, 1)")
    half = 0.5 * math.pi
    g_lo = np.zeros(k0 + 1)
    g_lo[1:] = np.sin(2.0 * th_lo[1:]) / np.sqrt(y_lo[1:])
    phi = half - th_hi[::-1]
    phi[0] = 0.0
    y_up = y_hi[::-1]
    g_hi = np.zeros(phi.size)
    g_hi[1:] = np.sin(2.0 * phi[1:]) / np.sqrt(y_up[1:])

    p0, _ = _tail_fit(r_lo, y_lo)
    p1, _ = _tail_fit(1.0 - r_hi[::-1], y_up)
    if _finite_end(p0) != (spec.alpha0 < 1.0) or _finite_end(p1) != (spec.alpha1 < 1.0):
        raise ConvergenceError(
            f"fitted tail exponents ({p0:.3f}, {p1:.3f}) disagree with the reaction term"
        )
    a0, a1 = spec.alpha0, spec.alpha1
    d_lo = r_lo
    d_hi = 1.0 - r_hi[::-1]
    d_hi[0] = 0.0
    tail0 = similarity_tail(spec, c, "lower", d_lo[TAIL_CELLS]) if a0 < 1.0 else None
    tail1 = similarity_tail(spec, c, "upper", d_hi[TAIL_CELLS]) if a1 < 1.0 else None
    z_left, z0 = _side_coordinates(th_lo, d_lo, g_lo, a0, tail0)
    z_right, z1 = _side_coordinates(phi, d_hi, g_hi, a1, tail1)

    z = np.concatenate([-z_left[:-1], [0.0], z_right[::-1][1:]])
    u = np.concatenate([r_lo, r_hi[1:]])
    yy = np.concatenate([y_lo, y_hi[1:]])
    nodes = slice(1, u.size - 1)
    z_nodes = z[nodes]
    u_values = u[nodes].copy()
    slopes = np.sqrt(yy[nodes])

    rho0 = _cauchy_ratio(th_lo, g_lo)
    rho1 = _cauchy_ratio(phi, g_hi)
    diagnostics = {
        "fitted_exponent_left": p0,
        "fitted_exponent_right": p1,
        "cauchy_ratio_left": rho0,
        "cauchy_ratio_right": rho1,
        "cauchy_finite_left": bool(rho0 < CAUCHY_RATIO),
        "cauchy_finite_right": bool(rho1 < CAUCHY_RATIO),
        "matching_gap": float(abs(y_lo[-1] - y_hi[0])),
    }
    diagnostics["consistent"] = (diagnostics["cauchy_finite_left"] == (a0 < 1.0)) and (
        diagnostics["cauchy_finite_right"] == (a1 < 1.0)
    )
    if np.any(np.diff(z_nodes) <= 0.0):
        raise HypothesisViolation("reconstructed profile is not strictly monotone")
    return ProfileTable(
        spec.s0, c, z_nodes, u_values, slopes, -z0, z1, (a0, a1), diagnostics
    )


def _side_coordinates(t, d, g, a, tail):
    """Distance ``int g`` from each node to the ``s0`` node.

    ``t`` runs from the equilibrium (``t[0] = 0``) to ``s0``; ``d`` is the
    matching distance in ``r`` and ``g`` behaves like ``t**(-a)`` at
    ``t = 0``.  The innermost ``TAIL_CELLS`` come from the similarity march
    when the end is finite.  Returns the distances and the total.
    """
    if tail is None:
        G = g[1:] * t[1:] ** a
        cum = _product_cumulative(t[1:], G, a)
        dist = np.concatenate([[np.inf], cum[-1] - cum])
        return dist, math.inf
    K = TAIL_CELLS
    G = g[K:] * t[K:] ** a
    cum = _product_cumulative(t[K:], G, a)
    dist = np.empty(t.size)
    dist[K:] = cum[-1] - cum
    zt = tail.z_at(d[1 : K + 1])
    dist[1:K] = dist[K] + (zt[-1] - zt[:-1])
    total = dist[K] + zt[-1]
    dist[0] = total
    return dist, float(total)


_SPLINES: dict = {}


def _spline(table: ProfileTable):
    key = id(table)
    hit = _SPLINES.get(key)
    if hit is not None and hit[0] is table:
        return hit[1]
    z, u, m = table.z_nodes, table.u_values, table.slopes.copy()
    # Fritsch-Carlson limiter keeps the Hermite interpolant monotone
    delta = np.diff(u) / np.diff(z)
    for left, right in ((m[:-1], delta), (m[1:], delta)):
        ratio = left / right
        over = ratio > 3.0
        left[over] = 3.0 * right[over]
    spline = CubicHermiteSpline(z, u, m)
    if len(_SPLINES) > 64:
        _SPLINES.clear()
    _SPLINES[key] = (table, spline)
    return spline


def eval_profile(table: ProfileTable, z):
    """Evaluate ``U(z)`` with constant extensions beyond finite front ends."""
    z = np.asarray(z, dtype=float)
    zl, zr = table.z_nodes[0], table.z_nodes[-1]
    ul, ur = table.u_values[0], table.u_values[-1]
    ml, mr = table.slopes[0], table.slopes[-1]
    inside = np.clip(z, zl, zr)
    out = _spline(table)(inside)
    left = z < zl
    if np.any(left):
        if table.finite_left:
            span = zl - table.z0
            k = 2.0 / (1.0 - table.tail_exponents[0])
            x = np.clip((z[left] - table.z0) / span, 0.0, 1.0)
            out[left] = ul * x**k
        else:
            out[left] = ul * np.exp((ml / ul) * (z[left] - zl))
    right = z > zr
    if np.any(right):
        if table.finite_right:
            span = table.z1 - zr
            k = 2.0 / (1.0 - table.tail_exponents[1])
            x = np.clip((table.z1 - z[right]) / span, 0.0, 1.0)
            out[right] = 1.0 - (1.0 - ur) * x**k
        else:
            out[right] = 1.0 - (1.0 - ur) * np.exp(-(mr / (1.0 - ur)) * (z[right] - zr))
    out = np.clip(out, 0.0, 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def front_width(table: ProfileTable) -> float:
    """``z1 - z0``; infinite unless both ends are finite."""
    if table.finite_left and table.finite_right:
        return float(table.z1 - table.z0)
    return math.inf


def ode_residual(table: ProfileTable, spec: ReactionSpec, dz: float, lo=0.01, hi=0.99):
    """Max centred-difference residual of ``U'' + c U' + f(U)`` on a uniform grid."""
    za, zb = table.z_of_u(lo), table.z_of_u(hi)
    z = np.arange(za, zb, dz)
    u = eval_profile(table, z)
    upp = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dz**2
    up = (u[2:] - u[:-2]) / (2.0 * dz)
    res = upp + table.c_star * up + eval_f(spec, u[1:-1])
    return float(np.max(np.abs(res)))
