"""Bistable reaction terms with possibly non-Lipschitz equilibria.

Three families are supported:

``cubic``
    ``f(s) = s (1 - s) (s - s0)`` on the whole line.
``holder_bistable``
    ``f(s) = s**a0 (1 - s)**a1 (s - s0)`` on ``[0, 1]``, extended by
    ``f(s) = -s`` for ``s < 0`` and ``f(s) = 1 - s`` for ``s > 1``.
``user_table``
    piecewise linear interpolation of tabulated values on ``[0, 1]`` with
    the same extension as ``holder_bistable``.

Besides evaluation of ``f`` and its antiderivative ``F(r) = int_0^r f``,
this module checks the structural hypotheses numerically and searches for
the secant constants used by the sub/supersolution construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import beta, betainc

from .errors import ConfigError, HypothesisViolation

KINDS = ("cubic", "holder_bistable", "user_table")


@dataclass(frozen=True)
class ReactionSpec:
    """Parametric bistable reaction term with zeros at 0, ``s0`` and 1."""

    kind: str = "cubic"
    s0: float = 0.75
    alpha0: float = 1.0
    alpha1: float = 1.0
    table_s: tuple = field(default=(), repr=False)
    table_f: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown reaction kind {self.kind!r}")
        if not 0.0 < self.s0 < 1.0:
            raise ConfigError("s0 must lie in (0,1)")
        if self.kind == "cubic":
            object.__setattr__(self, "alpha0", 1.0)
            object.__setattr__(self, "alpha1", 1.0)
        for name in ("alpha0", "alpha1"):
            a = getattr(self, name)
            if not 0.0 < a <= 1.0:
                raise ConfigError(f"{name} must lie in (0,1]")
        if self.kind == "user_table":
            s, fv = _normalise_table(self.table_s, self.table_f, self.s0)
            object.__setattr__(self, "table_s", tuple(s))
            object.__setattr__(self, "table_f", tuple(fv))

    @classmethod
    def cubic(cls, s0=0.75):
        return cls("cubic", s0)

    @classmethod
    def holder(cls, s0=0.75, alpha0=0.5, alpha1=None):
        return cls("holder_bistable", s0, alpha0, alpha0 if alpha1 is None else alpha1)

    @classmethod
    def from_table(cls, s, f, s0):
        return cls("user_table", s0, 1.0, 1.0, tuple(s), tuple(f))

    @property
    def gamma0(self):
        """Limit of ``-f(r) / r**alpha0`` as ``r -> 0+``."""
        if self.kind == "user_table":
            s, fv = self.table_s, self.table_f
            return -fv[1] / s[1]
        return self.s0

    @property
    def gamma1(self):
        """Limit of ``f(r) / (1 - r)**alpha1`` as ``r -> 1-``."""
        if self.kind == "user_table":
            s, fv = self.table_s, self.table_f
            return fv[-2] / (1.0 - s[-2])
        return 1.0 - self.s0

    def f(self, s):
        return eval_f(self, s)

    def F(self, r):
        return eval_F(self, r)


def _normalise_table(s, fv, s0):
    s = np.asarray(s, dtype=float)
    fv = np.asarray(fv, dtype=float)
    if s.ndim != 1 or s.shape != fv.shape or s.size < 2:
        raise ConfigError("user_table needs matching 1-d arrays of nodes and values")
    keep = (s > 0.0) & (s < 1.0) & (np.abs(s - s0) > 1e-14)
    s = np.concatenate([[0.0, s0, 1.0], s[keep]])
    fv = np.concatenate([[0.0, 0.0, 0.0], fv[keep]])
    order = np.argsort(s, kind="stable")
    s, fv = s[order], fv[order]
    if np.any(np.diff(s) <= 0.0):
        raise ConfigError("user_table nodes must be distinct")
    return s, fv


def eval_f(spec: ReactionSpec, s):
    """Evaluate the reaction term; scalar in, scalar out."""
    x = np.asarray(s, dtype=float)
    if spec.kind == "cubic":
        out = x * (1.0 - x) * (x - spec.s0)
    else:
        inside = np.clip(x, 0.0, 1.0)
        if spec.kind == "holder_bistable":
            core = inside**spec.alpha0 * (1.0 - inside) ** spec.alpha1 * (inside - spec.s0)
        else:
            core = np.interp(inside, spec.table_s, spec.table_f)
        out = np.where(x < 0.0, -x, np.where(x > 1.0, 1.0 - x, core))
        # exact zeros at the equilibria
        out = np.where((x == 0.0) | (x == 1.0) | (x == spec.s0), 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _incomplete_beta(x, a, b):
    return betainc(a, b, x) * beta(a, b)


def eval_F(spec: ReactionSpec, r):
    """Antiderivative ``F(r) = int_0^r f(s) ds``.

    Closed forms are used for every family (incomplete Beta functions for the
    Hölder family), so the result is accurate to rounding error.
    """
    x = np.asarray(r, dtype=float)
    if spec.kind == "cubic":
        s0 = spec.s0
        out = -(x**4) / 4.0 + (1.0 + s0) * x**3 / 3.0 - s0 * x**2 / 2.0
    else:
        inside = np.clip(x, 0.0, 1.0)
        if spec.kind == "holder_bistable":
            a, b = spec.alpha0, spec.alpha1
            core = _incomplete_beta(inside, a + 2.0, b + 1.0) - spec.s0 * _incomplete_beta(
                inside, a + 1.0, b + 1.0
            )
        else:
            core = _table_antiderivative(spec, inside)
        F1 = eval_F(spec, 1.0) if np.any(x > 1.0) else 0.0
        out = np.where(x < 0.0, -(x**2) / 2.0, np.where(x > 1.0, F1 - (x - 1.0) ** 2 / 2.0, core))
    if np.ndim(out) == 0:
        return float(out)
    return out


def _table_antiderivative(spec, r):
    s = np.asarray(spec.table_s)
    fv = np.asarray(spec.table_f)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (fv[1:] + fv[:-1]) * np.diff(s))])
    k = np.clip(np.searchsorted(s, r, side="right") - 1, 0, s.size - 2)
    h = r - s[k]
    slope = (fv[k + 1] - fv[k]) / (s[k + 1] - s[k])
    return cum[k] + fv[k] * h + 0.5 * slope * h**2


@dataclass
class HypothesisReport:
    h1_ok: bool
    h2_alpha_estimate: float
    alpha0_estimate: float
    alpha1_estimate: float
    h3_L: float
    h4: dict | None
    F1: float
    violations: list

    @property
    def ok(self):
        return not self.violations

    def to_dict(self):
        return {
            "h1_ok": self.h1_ok,
            "h2_alpha_estimate": self.h2_alpha_estimate,
            "alpha0_estimate": self.alpha0_estimate,
            "alpha1_estimate": self.alpha1_estimate,
            "h3_L": self.h3_L,
            "h4": self.h4,
            "F1": self.F1,
            "violations": [list(v) for v in self.violations],
        }


def holder_exponents(spec: ReactionSpec):
    """Log-log regression of ``|f|`` near both equilibria."""
    r = np.geomspace(1e-7, 1e-5, 25)
    a0 = np.polyfit(np.log(r), np.log(np.abs(eval_f(spec, r)) + 1e-300), 1)[0]
    a1 = np.polyfit(np.log(r), np.log(np.abs(eval_f(spec, 1.0 - r)) + 1e-300), 1)[0]
    return float(a0), float(a1)


def one_sided_lipschitz(spec: ReactionSpec, grid_n=1000):
    """Largest upward secant slope over grid pairs at least ``1/grid_n`` apart."""
    s = np.linspace(0.0, 1.0, grid_n + 1)
    fv = eval_f(spec, s)
    ds = s[None, :] - s[:, None]
    df = fv[None, :] - fv[:, None]
    mask = ds >= 1.0 / grid_n - 1e-12
    slopes = np.where(mask, df / np.where(mask, ds, 1.0), -np.inf)
    return max(0.0, float(slopes.max()))


def max_slope(spec: ReactionSpec, grid_n=1000):
    """Bound on ``|f'|`` used for the explicit-reaction step guard."""
    s = np.linspace(0.0, 1.0, grid_n + 1)
    sec = np.abs(np.diff(eval_f(spec, s))) * grid_n
    return max(one_sided_lipschitz(spec, grid_n), float(sec.max()))


def default_eta(spec: ReactionSpec, eta=0.05):
    bound = min(spec.s0, 1.0 - spec.s0) / 3.0
    return min(eta, 0.9 * bound)


def check_hypotheses(spec: ReactionSpec, grid_n=1000, eta=None) -> HypothesisReport:
    """Grid verification of the sign pattern, ``F < 0``, Hölder exponents,
    the one-sided Lipschitz constant and the secant conditions.

    Never raises on a violation; offending checks are collected instead.
    """
    if grid_n < 100:
        raise ConfigError("grid_n must be at least 100")
    violations = []
    s0 = spec.s0
    r = np.linspace(0.0, 1.0, grid_n + 1)[1:]
    fv = eval_f(spec, r)
    below, above = r < s0, (r > s0) & (r < 1.0)
    for mask, sign, name in ((below, -1.0, "(0,s0)"), (above, 1.0, "(s0,1)")):
        bad = mask & ~(sign * fv > 0.0)
        if bad.any():
            violations.append(("H1", float(r[bad][0]), f"f has wrong sign on {name}"))
    outside = np.linspace(0.0, 2.0, grid_n + 1)[1:]
    if np.any(eval_f(spec, -outside) <= 0.0):
        violations.append(("H1", -float(outside[0]), "f must be positive on (-inf,0)"))
    if np.any(eval_f(spec, 1.0 + outside) >= 0.0):
        violations.append(("H1", 1.0 + float(outside[0]), "f must be negative on (1,inf)"))
    Fv = eval_F(spec, r)
    F1 = float(eval_F(spec, 1.0))
    if F1 >= -1e-14:
        violations.append(("H1", 1.0, f"F(1)={F1:.3g} not < 0"))
    elif np.any(Fv[:-1] >= 0.0):
        violations.append(("H1", float(r[:-1][Fv[:-1] >= 0][0]), "F(r) not < 0"))
    h1_ok = not violations

    a0, a1 = holder_exponents(spec)
    L = one_sided_lipschitz(spec, grid_n)

    h4 = None
    eta = default_eta(spec) if eta is None else eta
    try:
        h4 = {"eta": eta, **estimate_secant_constants(spec, eta)}
    except (HypothesisViolation, ConfigError) as exc:
        violations.append(("H4", eta, str(exc)))
    return HypothesisReport(h1_ok, min(a0, a1), a0, a1, L, h4, F1, violations)


def secant_minima(spec: ReactionSpec, eta, delta, resolution=1e-3):
    """Grid minima of the two secant quotients for a given ``delta``."""
    s0 = spec.s0
    s = np.unique(np.concatenate([np.arange(0.0, delta, resolution), [delta]]))
    q_lo = _q_grid(s0 - 2.0 * eta, resolution)
    quot = (eval_f(spec, s[:, None]) - eval_f(spec, s[:, None] + q_lo[None, :])) / q_lo[None, :]
    mu_under = float(quot.min())
    s1 = 1.0 - s
    q_hi = _q_grid(1.0 - s0 - 2.0 * eta, resolution)
    quot = (eval_f(spec, s1[:, None] - q_hi[None, :]) - eval_f(spec, s1[:, None])) / q_hi[None, :]
    mu_over = float(quot.min())
    return mu_under, mu_over


def _q_grid(qmax, resolution):
    q = np.arange(resolution, qmax, resolution)
    return np.unique(np.concatenate([q, [min(0.1 * resolution, qmax), qmax]]))


def estimate_secant_constants(spec: ReactionSpec, eta, resolution=1e-3, max_halvings=30):
    """Largest ``delta`` (halving from ``eta``) with positive secant minima."""
    bound = min(spec.s0, 1.0 - spec.s0) / 3.0
    if not 0.0 < eta < bound:
        raise ConfigError(f"eta must satisfy 0 < eta < min(s0,1-s0)/3 = {bound:.6g}")
    delta = eta
    for _ in range(max_halvings):
        delta *= 0.5
        mu_under, mu_over = secant_minima(spec, eta, delta, resolution)
        if mu_under > 0.0 and mu_over > 0.0:
            return {"delta": delta, "mu_under": mu_under, "mu_over": mu_over}
    raise HypothesisViolation(f"H4 not satisfied at this eta={eta:g}")
