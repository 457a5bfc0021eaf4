"""Antiderivatives, the nu root, pair types and coercivity labels.

The pair (f, mu) is classified by where the anchored antiderivative
h(s) = int_mu^s f returns to zero on the side the profile moves toward:

  * no return inside the window and no turning of the ODE within budget
    -> noncompact type I (the divergence of the time integral is only
    confirmed on the window; the caveat is recorded in the evidence),
  * return at nu with f(nu) ~ 0 -> noncompact type II (the profile limps
    toward nu forever),
  * return at nu with f(nu) != 0 -> compact type; the radius T is computed
    both from the time-of-flight quadrature and from the ODE event and the
    two must agree.

Coercivity of f alone is decided by scanning constant offsets c of the
antiderivative and examining the maximal negative intervals of h - c.
"""

from __future__ import annotations

import bisect
import json
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import expr as ex
from . import profile as prof_mod

TOL_F = 1e-8
TOL_H = 1e-10
T_CROSS_SOFT = 1e-6
T_CROSS_HARD = 1e-4


class UndeterminedError(ValueError):
    """The windowed data cannot support a classification."""


class DegeneratePairError(ValueError):
    """f(mu) = 0: the profile is constant and no model manifold arises."""


class HFunc:
    """Anchored antiderivative h(s) = int_mu^s f with h(mu) = 0.

    Values are produced by adaptive quadrature from the nearest previously
    computed anchor, so repeated nearby queries are cheap.  The anchor cache
    is guarded by a lock; instances may be queried concurrently.
    """

    def __init__(self, f: ex.Expr, mu: float, tol: float = 1e-12):
        self.f = f
        self.mu = mu
        self.tol = tol
        self._fc = ex.as_callable(f)
        self._s = [mu]
        self._h = [0.0]
        self._lock = threading.Lock()

    def __call__(self, s: float) -> float:
        s = float(s)
        with self._lock:
            i = bisect.bisect_left(self._s, s)
            if i < len(self._s) and self._s[i] == s:
                return self._h[i]
            cand = [j for j in (i - 1, i) if 0 <= j < len(self._s)]
            j = min(cand, key=lambda k: abs(self._s[k] - s))
            s0, h0 = self._s[j], self._h[j]
        val, _ = quad(self._fc, s0, s, epsabs=self.tol, epsrel=self.tol, limit=200)
        h = h0 + val
        with self._lock:
            i = bisect.bisect_left(self._s, s)
            if not (i < len(self._s) and self._s[i] == s):
                self._s.insert(i, s)
                self._h.insert(i, h)
        return h

    def affine(self, anchor: float, alpha: float):
        """Evaluator h_a(s) = alpha^2 - 2 int_anchor^s f (the gradient-norm law)."""
        h_anchor = self(anchor)
        return lambda s: alpha * alpha - 2.0 * (self(s) - h_anchor)


def antiderivative(f: ex.Expr, mu: float, tol: float = 1e-12) -> HFunc:
    return HFunc(f, mu, tol)


def _bisect_root(g, lo: float, hi: float, xtol: float = 1e-12) -> float:
    glo = g(lo)
    for _ in range(200):
        if hi - lo <= xtol:
            break
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if glo * gm <= 0.0:
            hi = mid
        else:
            lo, glo = mid, gm
    return 0.5 * (lo + hi)


def find_nu(h: HFunc, direction: float, window: float, n_scan: int = 4096,
            tol_h: float = TOL_H) -> dict:
    """Nearest zero of h strictly on the given side of mu, or None.

    Both transversal crossings of h and osculating touches (interior local
    maxima of h reaching 0, the noncompact-II signature) are detected; the
    osculation point is pinned down as the enclosed zero of f = h'.
    """
    if direction == 0:
        raise ValueError("direction must be nonzero")
    d = 1.0 if direction > 0 else -1.0
    mu = h.mu
    step = window / n_scan
    fc = ex.as_callable(h.f)
    s_prev = mu
    h_prev = 0.0
    h_pprev = None
    s_pprev = None
    max_abs = 0.0
    for k in range(1, n_scan + 1):
        s_k = mu + d * k * step
        h_k = h(s_k)
        max_abs = max(max_abs, abs(h_k))
        if k == 1 and h_k >= 0.0:
            # root inside the first scan cell (h dips negative right at mu)
            s_eps = mu + d * step * 1e-6
            if h(s_eps) < 0.0:
                a, b = sorted((s_eps, s_k))
                nu = _bisect_root(h, a, b)
                return {"nu": nu, "f_at_nu": fc(nu), "h_residual": abs(h(nu))}
            raise UndeterminedError("h is not negative on the motion side of mu")
        if h_prev < 0.0 and h_k >= 0.0:
            a, b = (s_prev, s_k) if d > 0 else (s_k, s_prev)
            nu = _bisect_root(h, a, b)
            return {"nu": nu, "f_at_nu": fc(nu), "h_residual": abs(h(nu))}
        if h_pprev is not None and h_prev < 0.0 and h_prev >= h_pprev and h_prev >= h_k:
            # interior local max of h below zero: refine via the zero of f
            a, b = sorted((s_pprev, s_k))
            if fc(a) * fc(b) < 0.0:
                z = _bisect_root(fc, a, b)
                if abs(h(z)) <= max(tol_h, 10.0 * h.tol):
                    return {"nu": z, "f_at_nu": fc(z), "h_residual": abs(h(z))}
        s_pprev, h_pprev = s_prev, h_prev
        s_prev, h_prev = s_k, h_k
    if max_abs <= tol_h:
        raise UndeterminedError("h is numerically zero over the search window")
    return {"nu": None, "f_at_nu": None, "h_residual": None}


def time_of_flight(h: HFunc, mu: float, nu: float) -> float:
    """T = |int_mu^nu (-2h)^(-1/2) ds| with sqrt substitutions at both ends.

    Near a simple zero of h the substitution s = end +/- sigma^2 removes the
    inverse-square-root singularity, so plain adaptive quadrature converges.
    """
    mid = 0.5 * (mu + nu)
    total = 0.0
    for end in (mu, nu):
        sgn = 1.0 if mid >= end else -1.0
        length = abs(mid - end)

        def integrand(sigma, end=end, sgn=sgn):
            val = -2.0 * h(end + sgn * sigma * sigma)
            if val <= 0.0:
                return 0.0
            return 2.0 * sigma / math.sqrt(val)

        # tolerance stays above the noise floor of the chained quadrature
        # that produces h values, else quad reports spurious roundoff
        part, _ = quad(integrand, 0.0, math.sqrt(length),
                       epsabs=5e-11, epsrel=1e-11, limit=200)
        total += part
    return total


@dataclass
class PairClass:
    kind: str  # NoncompactI | NoncompactII | Compact | Undetermined
    nu: float | None = None
    T: float | None = None
    coincidence_residual: float | None = None
    evidence: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "nu": self.nu,
            "T": self.T,
            "coincidence_residual": self.coincidence_residual,
            "evidence": self.evidence,
        }


def classify_pair(
    f: ex.Expr,
    mu: float,
    window: float = 10.0,
    t_max: float = prof_mod.DEFAULT_T_MAX,
    u_escape: float = prof_mod.DEFAULT_U_ESCAPE,
    tol_f: float = TOL_F,
    tol_h: float = TOL_H,
    profile_result: prof_mod.Profile | None = None,
) -> PairClass:
    """Place (f, mu) in the noncompact-I / noncompact-II / compact trichotomy."""
    f_mu = ex.evaluate(f, mu)
    if abs(f_mu) <= tol_f:
        raise DegeneratePairError(f"f(mu) = {f_mu}: degenerate pair")
    direction = -math.copysign(1.0, f_mu)
    h = antiderivative(f, mu)
    try:
        root = find_nu(h, direction, window, tol_h=tol_h)
    except UndeterminedError as exc:
        return PairClass("Undetermined", evidence={"reason": str(exc)})

    p = profile_result
    if p is None:
        p = prof_mod.solve_profile(f, mu, 0.0, t_max=t_max, u_escape=u_escape)
    t_event = prof_mod.detect_T(p)
    evidence = {
        "ode_event": t_event.kind,
        "ode_event_t": t_event.t,
        "nu_root_residual": root["h_residual"],
        "f_nu_magnitude": None if root["f_at_nu"] is None else abs(root["f_at_nu"]),
    }

    if root["nu"] is None:
        if t_event.kind == "slope_zero":
            evidence["reason"] = (
                "profile turned but h has no root in the window; enlarge the window"
            )
            return PairClass("Undetermined", evidence=evidence)
        evidence["divergence_note"] = (
            "divergence of the time integral confirmed only on the search window"
        )
        return PairClass("NoncompactI", evidence=evidence)

    nu = root["nu"]
    f_nu = root["f_at_nu"]
    if abs(f_nu) <= tol_f:
        # zero of h of order >= 2: the time integral diverges analytically,
        # whatever the finite-precision trajectory does past the separatrix
        if t_event.kind == "slope_zero":
            evidence["ode_note"] = (
                "ODE events past the separatrix crawl are finite-precision artifacts"
            )
        return PairClass("NoncompactII", nu=nu, evidence=evidence)

    # compact candidate: two independent T computations must agree
    T_quad = time_of_flight(h, mu, nu)
    evidence["T_quadrature"] = T_quad
    if t_event.kind != "slope_zero":
        evidence["reason"] = "finite T predicted by quadrature but no ODE turning in budget"
        return PairClass("Undetermined", nu=nu, T=T_quad, evidence=evidence)
    T_ode = t_event.t
    evidence["T_ode"] = T_ode
    evidence["T_cross_residual"] = abs(T_ode - T_quad)
    if abs(T_ode - T_quad) > T_CROSS_HARD:
        evidence["reason"] = "quadrature and ODE radius disagree"
        return PairClass("Undetermined", nu=nu, evidence=evidence)
    if abs(T_ode - T_quad) > T_CROSS_SOFT:
        evidence["cross_check_note"] = "T residual above the soft 1e-6 target"
    return PairClass(
        "Compact",
        nu=nu,
        T=T_ode,
        coincidence_residual=abs(ex.evaluate(f, mu) + f_nu),
        evidence=evidence,
    )


# ---------------------------------------------------------------------------
# Coercivity
# ---------------------------------------------------------------------------

@dataclass
class CoercivityClass:
    label: str
    witnesses: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {"label": self.label, "witnesses": self.witnesses, "notes": self.notes}


def _f_zeros(fc, grid: np.ndarray, fvals: np.ndarray):
    """Zeros of f on the window located by sign-scan plus bisection."""
    zeros = []
    for a, b, va, vb in zip(grid[:-1], grid[1:], fvals[:-1], fvals[1:]):
        if va == 0.0:
            zeros.append(float(a))
        elif va * vb < 0.0:
            zeros.append(_bisect_root(fc, float(a), float(b)))
    if fvals[-1] == 0.0:
        zeros.append(float(grid[-1]))
    return zeros


def classify_coercivity(
    f: ex.Expr,
    window: float = 10.0,
    offsets: int = 64,
    n_grid: int = 2048,
    tol_f: float = TOL_F,
    tol_h: float = TOL_H,
) -> CoercivityClass:
    """Coercivity label of f from a finite scan of antiderivative offsets.

    Antiderivatives differ by constants, so a grid of offsets c over the
    range of h on the window stands in for "all antiderivatives", augmented
    with the critical offsets c = h(z) at zeros z of f where h has a strict
    local maximum (these carry the degenerate structure; a generic grid
    misses them).  For each offset the maximal negative intervals of h - c
    are classified by their endpoints:

      * both endpoints transversal zeros with f != 0      -> clean
      * exactly one endpoint with f ~ 0                   -> degenerate
      * escape to the window edge with a solid endpoint   -> degenerate
      * escape to the edge from an f ~ 0 endpoint, both
        endpoints degenerate, or no zero of h - c at all  -> not coercive

    When the range of h is attained strictly inside the window the edge
    cuts are artifacts of the finite window (bounded oscillatory h) and are
    censored instead of treated as escapes.
    """
    lo, hi = -abs(window), abs(window)
    fc = ex.as_callable(f)
    df = ex.differentiate(f)
    dfc = ex.as_callable(df)
    h = antiderivative(f, 0.0 if lo < 0.0 < hi else 0.5 * (lo + hi))

    grid = np.linspace(lo, hi, n_grid + 1)
    hvals = np.array([h(s) for s in grid])
    fvals = np.array([fc(s) for s in grid])
    h_min, h_max = float(hvals.min()), float(hvals.max())
    h_range = h_max - h_min
    if h_range <= tol_h:
        return CoercivityClass("Undetermined", notes=["h is numerically constant"])

    i_min, i_max = int(hvals.argmin()), int(hvals.argmax())
    censor_edges = 0 < i_min < n_grid and 0 < i_max < n_grid

    # offsets: interior uniform grid plus critical values h(z) at strict
    # local maxima of h (f(z) = 0, f'(z) < 0)
    crit_info: dict[float, list[float]] = {}
    for z in _f_zeros(fc, grid, fvals):
        if dfc(z) < -tol_f:
            c = h(z)
            if c <= h_min + tol_h * max(1.0, abs(h_min)):
                continue
            if censor_edges and c >= h_max - 1e-6 * h_range:
                continue  # osculation at the global max of a range-bounded h
            key = min(crit_info, key=lambda k: abs(k - c), default=None)
            if key is not None and abs(key - c) <= 1e-9 * max(1.0, h_range):
                crit_info[key].append(z)
            else:
                crit_info[c] = [z]

    offs = []
    crit_values = sorted(crit_info)
    for j in range(1, offsets + 1):
        c = h_min + j * h_range / (offsets + 1)
        # nudge uniform offsets off critical values to keep endpoint
        # f-evaluations away from accidental degeneracies
        for cv in crit_values:
            if abs(c - cv) <= 1e-7 * h_range:
                c = cv + 1e-6 * h_range
        offs.append((c, []))
    offs.extend((c, zs) for c, zs in crit_info.items())

    witnesses_nc: list = []
    witnesses_deg: list = []
    notes: list = []
    undetermined: list = []
    n_used = 0

    for c, osc_points in offs:
        neg = hvals - c < 0.0
        if not neg.any():
            continue
        n_used += 1
        runs = []
        k = 0
        while k <= n_grid:
            if neg[k]:
                start = k
                while k + 1 <= n_grid and neg[k + 1]:
                    k += 1
                runs.append((start, k))
            k += 1
        for start, end in runs:
            # refine endpoints; split at osculation points inside the run
            pieces = [[None, None]]
            bounds = []
            if start == 0:
                left = ("edge", lo, fc(lo))
            else:
                a = _bisect_root(lambda s: h(s) - c, float(grid[start - 1]), float(grid[start]))
                left = ("zero", a, fc(a))
            if end == n_grid:
                right = ("edge", hi, fc(hi))
            else:
                b = _bisect_root(lambda s: -(h(s) - c), float(grid[end]), float(grid[end + 1]))
                right = ("zero", b, fc(b))
            cuts = sorted(z for z in osc_points if left[1] < z < right[1])
            ends = [left] + [("zero", z, fc(z)) for z in cuts] + [right]
            for (lk, la, lf), (rk, ra, rf) in zip(ends[:-1], ends[1:]):
                witness = {
                    "offset": float(c),
                    "interval": [float(la), float(ra)],
                    "f_left": float(lf),
                    "f_right": float(rf),
                }
                l_deg = lk == "zero" and abs(lf) <= tol_f
                r_deg = rk == "zero" and abs(rf) <= tol_f
                l_edge = lk == "edge"
                r_edge = rk == "edge"
                if l_edge and r_edge:
                    if censor_edges:
                        notes.append(f"offset {c}: window-filling negative set censored")
                    else:
                        witness["why"] = "h - c has no zero in the window"
                        witnesses_nc.append(witness)
                elif l_edge or r_edge:
                    inner_deg = r_deg if l_edge else l_deg
                    if censor_edges:
                        if inner_deg:
                            undetermined.append(witness)
                        else:
                            notes.append(f"offset {c}: edge-cut interval censored")
                    elif inner_deg:
                        witness["why"] = "escape bounded by a zero of f"
                        witnesses_nc.append(witness)
                    else:
                        witness["why"] = "escape interval (no second turning value)"
                        witnesses_deg.append(witness)
                else:
                    if l_deg and r_deg:
                        witness["why"] = "both endpoints are zeros of f"
                        witnesses_nc.append(witness)
                    elif l_deg or r_deg:
                        witness["why"] = "one endpoint is a zero of f"
                        witnesses_deg.append(witness)

    if n_used == 0:
        return CoercivityClass("Undetermined", notes=["no somewhere-negative offsets in range"])
    if witnesses_nc:
        return CoercivityClass("NotCoercive", witnesses=witnesses_nc[:8], notes=notes[:8])
    if undetermined:
        return CoercivityClass("Undetermined", witnesses=undetermined[:8], notes=notes[:8])
    if witnesses_deg:
        return CoercivityClass("DegeneratelyCoercive", witnesses=witnesses_deg[:8], notes=notes[:8])
    return CoercivityClass("NondegeneratelyCoercive", notes=notes[:8])


def classification_report(pair: PairClass | None, coer: CoercivityClass,
                          window: float, tolerances: dict) -> str:
    doc = {
        "pair": None if pair is None else pair.to_json_dict(),
        "coercivity": coer.to_json_dict(),
        "window": window,
        "tolerances": tolerances,
    }
    return json.dumps(doc, sort_keys=True)
