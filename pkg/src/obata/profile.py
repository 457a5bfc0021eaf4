"""Profile ODE u'' + f(u) = 0: dense solve, critical points, energy certificate.

The solution carries its conserved-energy certificate: with h the
antiderivative of f vanishing at u0, the quantity u'^2 + 2 h(u) equals
v0^2 along the whole trajectory, and the maximal drift over the stored
nodes is recorded on the result.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

from . import expr as ex

DEFAULT_T_MAX = 50.0
DEFAULT_U_ESCAPE = 1e6
DEFAULT_TOL = 1e-10
EVENT_XTOL = 1e-12
_SUBSAMPLES = 8  # per accepted solver step, for slope-zero bracketing


class ConstantSolutionError(ValueError):
    """f(u0) = 0 with zero slope: the solution is the constant u0."""


class IntegrationError(RuntimeError):
    """Integrator failure; carries the last reached state."""

    def __init__(self, message: str, t: float, u: float, up: float):
        super().__init__(message)
        self.t, self.u, self.up = t, u, up


@dataclass(frozen=True)
class Event:
    t: float
    kind: str  # slope_zero | escape | budget


@dataclass
class Profile:
    """Immutable result of one profile solve."""

    f: ex.Expr
    f_text: str
    u0: float
    v0: float
    t_grid: np.ndarray
    u: np.ndarray
    up: np.ndarray
    events: list[Event]
    energy_max_drift: float
    t_end: float
    _dense: object = field(repr=False, default=None)

    def __call__(self, t):
        """Dense-output evaluation: returns (u, u')."""
        out = self._dense(t)
        return out[0], out[1]

    def to_json_dict(self) -> dict:
        return {
            "f_text": self.f_text,
            "u0": self.u0,
            "v0": self.v0,
            "nodes": [
                {"t": float(t), "u": float(u), "up": float(up)}
                for t, u, up in zip(self.t_grid, self.u, self.up)
            ],
            "events": [{"t": e.t, "kind": e.kind} for e in self.events],
            "energy_max_drift": self.energy_max_drift,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["t", "u", "up"])
        for t, u, up in zip(self.t_grid, self.u, self.up):
            writer.writerow([repr(float(t)), repr(float(u)), repr(float(up))])
        return buf.getvalue()


def _locate_zero(g, lo: float, hi: float) -> float:
    """Bisection for a sign change of g on [lo, hi] to EVENT_XTOL in t."""
    glo = g(lo)
    for _ in range(200):
        if hi - lo <= EVENT_XTOL:
            break
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if glo * gm <= 0.0:
            hi = mid
        else:
            lo, glo = mid, gm
    return 0.5 * (lo + hi)


def solve_profile(
    f: ex.Expr,
    u0: float,
    v0: float = 0.0,
    t_max: float = DEFAULT_T_MAX,
    rtol: float = DEFAULT_TOL,
    atol: float = DEFAULT_TOL,
    u_escape: float = DEFAULT_U_ESCAPE,
    f_text: str | None = None,
    max_step: float = np.inf,
) -> Profile:
    """Integrate u'' + f(u) = 0, u(0)=u0, u'(0)=v0 up to t_max.

    Stops early when |u| exceeds u_escape (escape event).  All strictly
    positive zeros of u' are located on the dense output by sign-change
    bracketing plus bisection and recorded as slope_zero events.

    A located zero of u' is only accepted when u'' = -f(u) is nonzero there
    (a critical point of a nonconstant solution always has f(u) != 0) and
    the bracketing values of u' sit above the integrator noise floor; this
    rejects the spurious sign flips produced while a trajectory crawls
    toward a degenerate equilibrium.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if v0 == 0.0 and abs(ex.evaluate(f, u0)) <= 1e-12:
        raise ConstantSolutionError(
            f"f({u0}) = 0 with zero initial slope: constant solution"
        )

    def rhs(t, y):
        return [y[1], -ex.evaluate(f, y[0])]

    def escape(t, y):
        return abs(y[0]) - u_escape

    escape.terminal = True

    sol = solve_ivp(
        rhs,
        (0.0, t_max),
        [u0, v0],
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=escape,
        max_step=max_step,
    )
    if not sol.success and sol.status != 1:
        t_last = sol.t[-1]
        y_last = sol.y[:, -1]
        raise IntegrationError(sol.message, t_last, y_last[0], y_last[1])

    t_end = sol.t[-1]
    dense = sol.sol

    events: list[Event] = []
    up_of = lambda t: dense(t)[1]
    noise_floor = 100.0 * atol

    def accept(t_star: float) -> bool:
        if t_star <= EVENT_XTOL:
            return False
        u_star = float(dense(t_star)[0])
        return abs(ex.evaluate(f, u_star)) > 1e-7

    for a, b in zip(sol.t[:-1], sol.t[1:]):
        sub = np.linspace(a, b, _SUBSAMPLES + 1)
        vals = dense(sub)[1]
        for x0, x1, g0, g1 in zip(sub[:-1], sub[1:], vals[:-1], vals[1:]):
            if g0 == 0.0:
                if x0 > 0.0 and accept(float(x0)):
                    events.append(Event(float(x0), "slope_zero"))
                continue
            if g0 * g1 < 0.0 and max(abs(g0), abs(g1)) > noise_floor:
                t_star = _locate_zero(up_of, float(x0), float(x1))
                if accept(t_star):
                    events.append(Event(t_star, "slope_zero"))
    if sol.status == 1:
        events.append(Event(float(t_end), "escape"))
    else:
        events.append(Event(float(t_end), "budget"))

    # energy certificate: u'^2 + 2 h(u) - v0^2 with h(s) = int_{u0}^{s} f
    fc = ex.as_callable(f)
    order = np.argsort(sol.y[0])
    drift = 0.0
    h_acc = 0.0
    prev_s = u0
    h_at = {}
    for s in sol.y[0][order]:
        h_acc += quad(fc, prev_s, s, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        h_at[float(s)] = h_acc
        prev_s = s
    for t, u, up in zip(sol.t, sol.y[0], sol.y[1]):
        e = up * up + 2.0 * h_at[float(u)] - v0 * v0
        drift = max(drift, abs(e))

    return Profile(
        f=f,
        f_text=f_text if f_text is not None else ex.to_text(f),
        u0=u0,
        v0=v0,
        t_grid=sol.t.copy(),
        u=sol.y[0].copy(),
        up=sol.y[1].copy(),
        events=events,
        energy_max_drift=float(drift),
        t_end=float(t_end),
        _dense=dense,
    )


def detect_T(p: Profile) -> Event:
    """First strictly positive slope-zero event, else the budget/escape event.

    Only meaningful for profiles started at a critical point (v0 = 0): the
    returned time is the radius T of the model manifold when the pair is of
    compact type.
    """
    if p.v0 != 0.0:
        raise ValueError("detect_T requires a profile started with v0 = 0")
    for e in p.events:
        if e.kind == "slope_zero" and e.t > 0.0:
            return e
    return p.events[-1]


def _backward_dense(p: Profile, depth: float):
    """Independent re-integration on [-depth, 0] for evenness checks."""
    sol = solve_ivp(
        lambda t, y: [y[1], -ex.evaluate(p.f, y[0])],
        (0.0, -depth),
        [p.u0, p.v0],
        method="DOP853",
        rtol=DEFAULT_TOL,
        atol=DEFAULT_TOL,
        dense_output=True,
    )
    if not sol.success:
        raise IntegrationError(sol.message, sol.t[-1], sol.y[0, -1], sol.y[1, -1])
    return sol.sol


def symmetry_residual(p: Profile, t0: float, span: float, n: int = 200) -> float:
    """max over a grid of |u(t0 + tau) - u(t0 - tau)| for tau in [0, span].

    Negative times (reached when t0 < span) are covered by a fresh backward
    integration, so the evenness of the profile is checked against an
    independently computed arc rather than by construction.
    """
    if t0 + span > p.t_end + 1e-12:
        raise ValueError("span exceeds the integrated domain")
    is_start = t0 == 0.0 and p.v0 == 0.0
    if not is_start and not any(
        e.kind == "slope_zero" and abs(e.t - t0) <= 1e-9 for e in p.events
    ):
        raise ValueError(f"t0={t0} is not a critical point of the profile")
    back = None
    if t0 - span < 0.0:
        back = _backward_dense(p, span - t0 + 1e-9)

    def u_at(t: float) -> float:
        if t >= 0.0:
            return float(p._dense(t)[0])
        return float(back(t)[0])

    taus = np.linspace(0.0, span, n)
    return max(abs(u_at(t0 + tau) - u_at(t0 - tau)) for tau in taus)


def periodicity_probe(p: Profile, tol: float = 1e-8) -> dict:
    """Detect periodic profiles from consecutive critical points.

    With v0 = 0 the solution is symmetric about every critical point, so two
    consecutive slope-zero times t1 < t2 force period 2 (t2 - t1) provided the
    state returns to (u0, 0).
    """
    if p.v0 != 0.0:
        raise ValueError("periodicity probe requires v0 = 0")
    zeros = [e.t for e in p.events if e.kind == "slope_zero" and e.t > 0.0]
    if len(zeros) < 2:
        return {"periodic": False, "period": None}
    period = 2.0 * (zeros[1] - zeros[0])
    if period > p.t_end:
        return {"periodic": False, "period": None}
    u_p, up_p = p(period)
    if abs(float(u_p) - p.u0) <= max(tol, 1e-7) and abs(float(up_p)) <= max(tol, 1e-7):
        return {"periodic": True, "period": float(period)}
    return {"periodic": False, "period": None}
