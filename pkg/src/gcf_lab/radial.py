"""Radial translator profiles f_M and the barriers U = f_M(l) h(theta).

f_M solves f'' + (1 + M f'^2)^kappa f'^{1/alpha} f^{n-1} = 0 with f(0) = 0.
Near the tip f' is infinite, so the solve starts from the graph u = f^{-1},
which satisfies u'' (u'/r)^{n-1} = (M + u'^2)^kappa with u(0) = u'(0) = 0,
and hands over to the support-function ODE in l once u' exceeds a threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares

from .circlefield import CircleField, r_operator
from .constants import DerivedConstants, FlowParams, derive_constants
from .exceptions import ConvexityLost, SolverFailure, ValidationError
from .shrinker import ShrinkerProfile

__all__ = [
    "RadialProfile",
    "AsymptoticFit",
    "BarrierReport",
    "tip_coefficients",
    "solve_radial",
    "fit_asymptotics",
    "barrier_check",
    "barrier_residual",
]

R_START = 1e-6
HANDOVER_SLOPE = 1e-3  # switch once f_l < 1/HANDOVER_SLOPE = 1e3
RTOL = 1e-12
MIN_FIT_LMAX = 1e4
ATOL = 1e-12


def tip_coefficients(M, alpha, n):
    """(a, b) with u'(r) = a r + b r^3 + O(r^5) at the tip."""
    kappa = (n + 2) / 2.0 - 1.0 / (2.0 * alpha)
    a = M ** (kappa / n)
    b = kappa * M ** (kappa - 1.0) * a ** (3 - n) / (n + 2)
    return a, b


@dataclass
class RadialProfile:
    """f_M sampled on a geometric l-grid, with a dense interpolant for any l in range."""

    M: float
    alpha: float
    n: int
    l: np.ndarray
    f: np.ndarray
    f_l: np.ndarray
    tip_coefficient: float
    handover_l: float
    handover_slope: float = HANDOVER_SLOPE
    _sol: object = field(default=None, repr=False)

    @property
    def l_min(self):
        return float(self.l[0])

    @property
    def l_max(self):
        return float(self.l[-1])

    def __call__(self, l):
        """(f, f_l) at arbitrary l in [l_min, l_max]."""
        l = np.asarray(l, dtype=float)
        if np.any(l < self.l_min * (1 - 1e-12)) or np.any(l > self.l_max * (1 + 1e-12)):
            raise ValidationError("l outside the solved range")
        y = self._sol(l)
        return y[0], y[1]

    def f_ll(self, l=None):
        if l is None:
            f, fl = self.f, self.f_l
        else:
            f, fl = self(l)
        kappa = (self.n + 2) / 2.0 - 1.0 / (2.0 * self.alpha)
        return -((1.0 + self.M * fl * fl) ** kappa) * fl ** (1.0 / self.alpha) * f ** (self.n - 1)

    def to_rows(self):
        return np.column_stack([self.l, self.f, self.f_l])


def _graph_rhs(M, kappa, n):
    def rhs(r, y):
        up = y[1]
        return [up, (M + up * up) ** kappa * (r / up) ** (n - 1)]

    return rhs


def _support_rhs(M, kappa, alpha, n):
    def rhs(l, y):
        f, fl = y
        if fl <= 0 or f <= 0:
            return [fl, 0.0]
        return [fl, -((1.0 + M * fl * fl) ** kappa) * fl ** (1.0 / alpha) * f ** (n - 1)]

    return rhs


def solve_radial(
    M: float,
    alpha: float,
    n: int = 2,
    l_max: float = 1e6,
    points_per_decade: int = 40,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> RadialProfile:
    """Radial solution of the M-weighted translator equation up to l_max."""
    if not (M > 0 and math.isfinite(M)):
        raise ValidationError("M must be positive")
    params = FlowParams(n, alpha)
    kappa = (n + 2) / 2.0 - 1.0 / (2.0 * alpha)
    a, b = tip_coefficients(M, params.alpha, n)
    r0 = R_START
    y0 = [a * r0**2 / 2 + b * r0**4 / 4, a * r0 + b * r0**3]

    def reach(r, y):
        return y[1] - HANDOVER_SLOPE

    reach.terminal = True
    reach.direction = 1
    graph = solve_ivp(
        _graph_rhs(M, kappa, n), (r0, 1e6), y0, method="DOP853", rtol=rtol, atol=atol * 1e-6, events=reach
    )
    if graph.status != 1:
        raise SolverFailure("graph phase never reached the handover slope")
    r1, (u1, up1) = graph.t_events[0][0], graph.y_events[0][0]
    l1 = float(u1)
    if not l1 < l_max:
        raise ValidationError("l_max lies below the handover height")

    def lost(l, y):
        return y[1]

    lost.terminal = True
    lost.direction = -1
    scale = np.array([max(1.0, r1), 1.0])
    sol = solve_ivp(
        _support_rhs(M, kappa, params.alpha, n),
        (l1, l_max),
        [r1, 1.0 / up1],
        method="DOP853",
        rtol=rtol,
        atol=atol * scale,
        dense_output=True,
        events=lost,
    )
    if sol.status != 0:
        raise ConvexityLost(f"radial solve stopped at l = {sol.t[-1]:.6g}: {sol.message}")
    decades = math.log10(l_max / l1)
    grid = np.geomspace(l1, l_max, max(2, int(math.ceil(decades * points_per_decade)) + 1))
    y = sol.sol(grid)
    y[:, 0] = [r1, 1.0 / up1]
    y[:, -1] = sol.y[:, -1]
    return RadialProfile(float(M), params.alpha, n, grid, y[0], y[1], a, l1, HANDOVER_SLOPE, sol.sol)


@dataclass
class AsymptoticFit:
    A_fit: float
    correction_exponent: float
    c: float
    c_sign: int
    next_exponent: float
    next_coeff: float
    relative_residual: float
    window: tuple

    def to_json(self):
        return {
            "A_fit": self.A_fit,
            "corr_exp": self.correction_exponent,
            "c": self.c,
            "c_sign": self.c_sign,
            "next_exponent": self.next_exponent,
            "relative_residual": self.relative_residual,
            "window": list(self.window),
        }


def fit_asymptotics(p: RadialProfile, consts: DerivedConstants, decades: float = 2.0, samples: int = 200) -> AsymptoticFit:
    """Fit f = A_fit l^sigma + c l^q + d l^{5 sigma - 4} on the top ``decades``.

    q is free (its theoretical value is sigma + 2(sigma - 1)); the third term is
    the next order of the expansion and keeps it from biasing q. The fit is
    rejected when the residual exceeds 10% of the correction term.
    """
    if p.l_max < MIN_FIT_LMAX * (1 - 1e-12):
        raise ValidationError(f"asymptotic fit needs l_max >= {MIN_FIT_LMAX:g}")
    sig = consts.sigma
    lo = p.l_max / 10**decades
    l = np.geomspace(lo, p.l_max, samples)
    f, _ = p(l)
    x = np.log(l / p.l_max)
    q_next = 5.0 * sig - 4.0
    L = p.l_max

    def model(theta):
        A, c, q, d = theta
        return A * np.exp(sig * x) * L**sig + c * L**q * np.exp(q * x) + d * L**q_next * np.exp(q_next * x)

    def resid(theta):
        return (model(theta) - f) / f

    q0 = 3.0 * sig - 2.0
    theta0 = np.array([consts.bigA, 0.0, q0, 0.0])
    # linear solve at the nominal exponent gives a good start for the free one
    basis = np.column_stack([l**sig, l**q0, l**q_next]) / f[:, None]
    coef, *_ = np.linalg.lstsq(basis, np.ones_like(f), rcond=None)
    theta0[[0, 1, 3]] = coef
    res = least_squares(resid, theta0, x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    A, c, q, d = res.x
    corr = np.abs(c * l**q)
    resid_abs = np.abs(model(res.x) - f)
    rel = float(np.max(resid_abs) / np.max(corr)) if np.max(corr) > 0 else float("inf")
    if rel > 0.1:
        raise SolverFailure(f"asymptotic fit rejected: residual {rel:.3g} of the correction term")
    return AsymptoticFit(float(A), float(q), float(c), int(np.sign(c)), q_next, float(d), rel, (float(lo), p.l_max))


@dataclass
class BarrierReport:
    which: str
    M: float
    sup_h2: float
    inf_h2: float
    min_residual: float
    max_residual: float
    holds: bool
    sufficient: bool
    n_points: int

    def to_json(self):
        return dict(self.__dict__)


def barrier_residual(p: RadialProfile, h: ShrinkerProfile, l) -> np.ndarray:
    """U_ll + (1 + U_l^2)^kappa U_l^{1/alpha} det r[U] for U = f_M(l) h(theta), n = 2.

    Rows follow ``l``; the result is divided by the size of U_ll so it can be
    compared across heights.
    """
    if p.n != 2:
        raise ValidationError("barrier residual on S^1 needs n = 2")
    kappa = 2.0 - 1.0 / (2.0 * p.alpha)
    f, fl = p(l)
    fll = p.f_ll(l)
    hv = h.h.samples
    rh = r_operator(h.h).samples
    Ul = np.outer(fl, hv)
    Ull = np.outer(fll, hv)
    det = np.outer(f, rh)
    Q = Ull + (1.0 + Ul * Ul) ** kappa * Ul ** (1.0 / p.alpha) * det
    return Q / np.abs(Ull).max(axis=1, keepdims=True)


def barrier_check(
    M: float,
    h: ShrinkerProfile,
    consts: DerivedConstants,
    which: str = "sub",
    l_max: float = 1e6,
    n_l: int = 200,
    profile: RadialProfile | None = None,
    tol: float = 1e-12,
) -> BarrierReport:
    """Sign of the translator residual of U = f_M h on an (l, theta) grid.

    Subsolution means residual >= 0, supersolution residual <= 0 (up to
    ``tol`` relative). ``sufficient`` records whether M meets the sufficient
    condition: M >= sup h^2 for a subsolution, M <= inf h^2 for a
    supersolution (when kappa < 0; the inequalities swap when kappa > 0).
    """
    if which not in ("sub", "super"):
        raise ValidationError("which must be 'sub' or 'super'")
    if profile is None:
        profile = solve_radial(M, h.alpha, 2, l_max)
    elif abs(profile.M - M) > 1e-14 * M:
        raise ValidationError("radial profile was solved for a different M")
    l = np.geomspace(max(profile.l_min, 1e-6), profile.l_max, n_l)
    Q = barrier_residual(profile, h, l)
    hv = h.h.samples
    sup2, inf2 = float(np.max(hv * hv)), float(np.min(hv * hv))
    qmin, qmax = float(Q.min()), float(Q.max())
    holds = qmin >= -tol if which == "sub" else qmax <= tol
    neg = consts.kappa < 0
    if which == "sub":
        sufficient = M >= sup2 if neg else M <= inf2
    else:
        sufficient = M <= inf2 if neg else M >= sup2
    return BarrierReport(which, float(M), sup2, inf2, qmin, qmax, bool(holds), bool(sufficient), int(Q.size))
