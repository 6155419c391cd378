"""Exterior problem for w(s, theta), where S = A l^sigma h + w and s = ln l.

Fields live on a uniform s-grid [R, S_max] times the N collocation angles.
The linear operator is calL w = w_ss + c1 w_s + c2 L w; the translator
equation becomes calL w + E1(w) + E2(w) + E3(w) = 0, where E3 collects the
superlinear part of (h + w_s/(sigma A e^{sigma s}))^{1/alpha} that the
two-term E1 leaves out (see :func:`E3`).

Everything below is for n = 2.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .circlefield import CircleField, _deriv1_samples, _deriv2_samples, resample
from .constants import DerivedConstants
from .exceptions import (
    ConvexityLost,
    GammaOnResonance,
    GraphicalityLost,
    NoContraction,
    TailDivergence,
    ValidationError,
)
from .shrinker import ShrinkerProfile
from .spectrum import SpectralData, apply_L

log = logging.getLogger(__name__)

__all__ = [
    "ExteriorField",
    "JacobiField",
    "PicardResult",
    "s_derivative",
    "apply_calL",
    "E1",
    "E2",
    "E3",
    "nonlinear_error",
    "translator_residual_s",
    "admissible_window",
    "default_gamma",
    "linear_solve_H",
    "picard_zero_seed",
    "picard_iterate",
    "jacobi_perturb",
    "jacobi_gamma",
    "boundary_match",
    "BoundaryMatch",
    "fit_decay_rate",
]

MAX_DS = 0.05
MIN_SPAN = 10.0
RESONANCE_TOL = 1e-8


def _fd_weights(offsets, order):
    """Finite-difference weights on integer ``offsets`` for the given derivative order."""
    offsets = np.asarray(offsets, dtype=float)
    k = offsets.size
    V = np.vander(offsets, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


_CENTRAL = (-2, -1, 0, 1, 2)
# sixth-order one-sided rows keep the ends from dominating the error
_EDGE1 = {0: tuple(range(0, 7)), 1: tuple(range(-1, 6))}
_EDGE2 = {0: tuple(range(0, 8)), 1: tuple(range(-1, 7))}


def s_derivative(values, ds, order=1):
    """Fourth-order central differences along axis 0, one-sided at the ends."""
    f = np.asarray(values, dtype=float)
    n = f.shape[0]
    if n < 10:
        raise ValidationError("need at least 10 slices for s-derivatives")
    out = np.empty_like(f)
    c = _fd_weights(_CENTRAL, order)
    out[2:-2] = sum(ck * f[2 + o : n - 2 + o] for ck, o in zip(c, _CENTRAL))
    edge = _EDGE1 if order == 1 else _EDGE2
    for i, offs in edge.items():
        wts = _fd_weights(offs, order)
        out[i] = sum(wk * f[i + o] for wk, o in zip(wts, offs))
        # mirrored stencil at the far end
        mirror = tuple(-o for o in offs)
        wts_m = _fd_weights(mirror, order)
        j = n - 1 - i
        out[j] = sum(wk * f[j + o] for wk, o in zip(wts_m, mirror))
    return out / ds**order


@dataclass(frozen=True)
class ExteriorField:
    """w(s_j, theta_k) on s_j = R + j ds, j = 0..Ns-1.

    ``gamma`` tags the decay class; :meth:`norm` is the discrete surrogate of
    the weighted C^{k,gamma} norm.
    """

    values: np.ndarray
    R: float
    ds: float
    gamma: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValidationError("ExteriorField values must be (slices, angles)")
        if not np.all(np.isfinite(v)):
            raise ValidationError("ExteriorField values must be finite")
        if not (0 < self.ds <= MAX_DS + 1e-15):
            raise ValidationError(f"grid spacing must lie in (0, {MAX_DS}]")
        if (v.shape[0] - 1) * self.ds < MIN_SPAN - 1e-9:
            raise ValidationError(f"S_max - R must be at least {MIN_SPAN}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, R, N, gamma, span=16.0, ds=0.02):
        ns = int(round(span / ds)) + 1
        return cls(np.zeros((ns, N)), float(R), float(ds), float(gamma))

    @classmethod
    def from_function(cls, func, R, N, gamma, span=16.0, ds=0.02):
        """Build from ``func(s[:, None], theta[None, :])``."""
        ns = int(round(span / ds)) + 1
        s = R + ds * np.arange(ns)
        t = 2.0 * np.pi * np.arange(N) / N
        return cls(np.broadcast_to(func(s[:, None], t[None, :]), (ns, N)), float(R), float(ds), float(gamma))

    def like(self, values, gamma=None) -> "ExteriorField":
        return ExteriorField(values, self.R, self.ds, self.gamma if gamma is None else gamma)

    @property
    def s(self) -> np.ndarray:
        return self.R + self.ds * np.arange(self.values.shape[0])

    @property
    def S_max(self) -> float:
        return float(self.s[-1])

    @property
    def N(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def slice(self, i) -> CircleField:
        return CircleField(self.values[i])

    def ds_derivative(self, order=1) -> np.ndarray:
        return s_derivative(self.values, self.ds, order)

    def at_s(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        """(w, w_s) at an arbitrary s by cubic Hermite interpolation between slices."""
        x = (s - self.R) / self.ds
        n = self.values.shape[0]
        if not (-1e-9 <= x <= n - 1 + 1e-9):
            raise ValidationError(f"s = {s} lies outside [{self.R}, {self.S_max}]")
        i = int(min(max(math.floor(x), 0), n - 2))
        t = x - i
        ws = self.ds_derivative(1)
        y0, y1 = self.values[i], self.values[i + 1]
        d0, d1 = ws[i] * self.ds, ws[i + 1] * self.ds
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        val = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
        dh00 = 6 * t**2 - 6 * t
        dh10 = 3 * t**2 - 4 * t + 1
        dh01 = -6 * t**2 + 6 * t
        dh11 = 3 * t**2 - 2 * t
        der = (dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1) / self.ds
        return val, der

    def norm(self, order=2, gamma=None) -> float:
        """max_j e^{-gamma s_j} (sup|w| + sup|w_s| + ... ) up to second derivatives."""
        g = self.gamma if gamma is None else gamma
        v = self.values
        per = np.max(np.abs(v), axis=1)
        if order >= 1:
            per = per + np.max(np.abs(self.ds_derivative(1)), axis=1)
            per = per + np.max(np.abs(_deriv1_samples(v)), axis=1)
        if order >= 2:
            per = per + np.max(np.abs(self.ds_derivative(2)), axis=1)
            per = per + np.max(np.abs(_deriv2_samples(v)), axis=1)
        return float(np.max(np.exp(-g * self.s) * per))

    def slice_sup(self) -> np.ndarray:
        return np.max(np.abs(self.values), axis=1)

    def __add__(self, other):
        return self.like(self.values + _vals(other))

    def __sub__(self, other):
        return self.like(self.values - _vals(other))

    def __neg__(self):
        return self.like(-self.values)

    def __mul__(self, c):
        return self.like(self.values * float(c))

    __rmul__ = __mul__

    def to_json(self, stride=1) -> dict:
        idx = np.arange(0, self.values.shape[0], stride)
        return {
            "R": self.R,
            "S_max": self.S_max,
            "ds": self.ds,
            "gamma": self.gamma,
            "N": self.N,
            "s": self.s[idx].tolist(),
            "slices": self.values[idx].tolist(),
        }

    @classmethod
    def from_json(cls, obj) -> "ExteriorField":
        f = cls(np.array(obj["slices"], dtype=float), float(obj["R"]), float(obj["ds"]), float(obj["gamma"]))
        if abs(f.S_max - float(obj["S_max"])) > 1e-9:
            raise ValidationError("exterior JSON was subsampled; it cannot be reloaded as a field")
        return f


def _vals(other):
    if isinstance(other, ExteriorField):
        return other.values
    return np.asarray(other, dtype=float)


@dataclass(frozen=True)
class JacobiField:
    """b e^{beta s} phi_j(theta), with beta one of the two exponents of mode j."""

    j: int
    b: float
    beta: float
    phi: CircleField

    @classmethod
    def from_spectrum(cls, spec: SpectralData, j: int, b: float, branch: str = "plus") -> "JacobiField":
        if branch not in ("plus", "minus"):
            raise ValidationError("branch must be 'plus' or 'minus'")
        beta = spec.beta_plus()[j] if branch == "plus" else spec.beta_minus()[j]
        return cls(int(j), float(b), float(beta), spec.phi(j))

    def on(self, like: ExteriorField, gamma=None) -> ExteriorField:
        vals = self.b * np.exp(self.beta * like.s)[:, None] * self.phi.samples[None, :]
        return like.like(vals, gamma)


def _check_grid(w: ExteriorField, spec: SpectralData):
    if w.N != spec.N:
        raise ValidationError(f"field has {w.N} angles, spectral data {spec.N}")


def apply_calL(w: ExteriorField, spec: SpectralData, consts: DerivedConstants) -> ExteriorField:
    """w_ss + c1 w_s + c2 L w."""
    _check_grid(w, spec)
    v = w.values
    out = w.ds_derivative(2) + consts.c1 * w.ds_derivative(1) + consts.c2 * apply_L(v, spec.weight.samples)
    return w.like(out)


class _Pieces:
    """Quantities shared by the error terms, evaluated on the 2N grid."""

    def __init__(self, w: ExteriorField, h: ShrinkerProfile, consts: DerivedConstants):
        if consts.n != 2:
            raise ValidationError("exterior errors are implemented for n = 2")
        if h.N != w.N:
            h = h.at(w.N)
        N2 = 2 * w.N
        A, sig = consts.bigA, consts.sigma
        s = w.s[:, None]
        self.scale = A * np.exp(sig * s)
        self.D = A * sig * (1.0 - sig) * np.exp(sig * s)
        ws = w.ds_derivative(1)
        rw = _deriv2_samples(w.values) + w.values
        hv = h.h.samples
        rh = _deriv2_samples(hv) + hv
        self.N = w.N
        self.fine = lambda x: resample(np.broadcast_to(x, w.shape), N2)
        self.h = resample(hv, N2)[None, :]
        self.rh = resample(rh, N2)[None, :]
        self.ws = self.fine(ws)
        self.ru = self.fine(rw) / self.scale
        self.v = self.ws / (sig * self.scale)
        self.det = self.rh + self.ru
        self.alpha = consts.alpha
        self.kappa = consts.kappa
        self.sigma = sig
        self.A = A
        self.s = s
        self.w = w

    def coarse(self, x) -> ExteriorField:
        return self.w.like(resample(x, self.N))

    def check_det(self):
        if np.min(self.det) <= 0:
            raise ConvexityLost("det r[h + w/(A e^{sigma s})] <= 0 on the grid")

    def check_speed(self):
        if np.min(self.h + self.v) <= 0:
            raise GraphicalityLost("h + w_s/(sigma A e^{sigma s}) <= 0 on the grid")


def E1(w: ExteriorField, h: ShrinkerProfile, consts: DerivedConstants, return_second=False):
    """Quadratic error of the blow-down equation (two-term form).

    The second term vanishes identically for n = 2 because det r is linear on
    S^1; it is still evaluated and its size can be returned for inspection.
    """
    P = _Pieces(w, h, consts)
    P.check_det()
    a = P.alpha
    first = (1.0 - P.sigma) / a * P.ws * P.h ** (1.0 / a - 1.0) * (P.det - P.rh)
    lin = P.rh * (P.ru / P.rh)
    second = P.D * P.h ** (1.0 / a) * ((P.det - P.rh) - lin)
    out = P.coarse(first + second)
    if return_second:
        return out, float(np.max(np.abs(second)))
    return out


def E3(w: ExteriorField, h: ShrinkerProfile, consts: DerivedConstants) -> ExteriorField:
    """Superlinear part of the speed factor.

    A sigma (1-sigma) e^{sigma s} [(h+v)^{1/alpha} - h^{1/alpha}
    - (1/alpha) h^{1/alpha-1} v] det r[h+u], with v = w_s/(sigma A e^{sigma s})
    and u = w/(A e^{sigma s}). Expanding the blow-down equation around
    A l^sigma h produces this term in addition to E1; without it the fixed point
    of the Picard loop is not a translator.
    """
    P = _Pieces(w, h, consts)
    P.check_det()
    P.check_speed()
    p = 1.0 / P.alpha
    x = P.v / P.h
    # (1+x)^p - 1 - p x without cancellation in the leading part
    bracket = P.h**p * (np.expm1(p * np.log1p(x)) - p * x)
    return P.coarse(P.D * bracket * P.det)


def E2(w: ExteriorField, h: ShrinkerProfile, consts: DerivedConstants) -> ExteriorField:
    """Gradient-correction error of the translator equation."""
    P = _Pieces(w, h, consts)
    P.check_det()
    P.check_speed()
    q = P.sigma * P.A * np.exp((P.sigma - 1.0) * P.s) * P.h + P.ws * np.exp(-P.s)
    bracket = np.expm1(P.kappa * np.log1p(q * q))
    return P.coarse(P.D * bracket * (P.h + P.v) ** (1.0 / P.alpha) * P.det)


def nonlinear_error(w, h, consts, terms=("E1", "E2", "E3")) -> ExteriorField:
    """E(w) = -(sum of the requested error terms)."""
    table = {"E1": E1, "E2": E2, "E3": E3}
    out = w.like(np.zeros(w.shape))
    for t in terms:
        out = out - table[t](w, h, consts)
    return out


def translator_residual_s(w, h, spec, consts, terms=("E1", "E2", "E3")) -> ExteriorField:
    """calL w + E1 + E2 + E3: zero exactly when A l^sigma h + w is a translator."""
    return apply_calL(w, spec, consts) - nonlinear_error(w, h, consts, terms)


# ---------------------------------------------------------------- linear inverse

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
_STENCILS = {"first": (0, 1, 2, 3), "mid": (-1, 0, 1, 2), "last": (-2, -1, 0, 1)}


def _lagrange(offsets, x):
    """Lagrange basis values at points x (relative to node 0, unit spacing)."""
    out = []
    for k, ok in enumerate(offsets):
        v = np.ones_like(x)
        for m, om in enumerate(offsets):
            if m != k:
                v = v * (x - om) / (ok - om)
        out.append(v)
    return np.array(out)


def _interval_weights(beta, ds, kernel):
    """Weights W[stencil][mode, k] for int over one interval of kernel(beta, t) g(t).

    kernel 'fwd': e^{beta (s_{i+1} - t)};  'bwd': e^{beta (s_i - t)}.
    """
    x = _GL_X
    if kernel == "fwd":
        ker = np.exp(np.multiply.outer(beta, (1.0 - x) * ds))
    else:
        ker = np.exp(np.multiply.outer(beta, -x * ds))
    out = {}
    for name, offs in _STENCILS.items():
        L = _lagrange(offs, x)  # (4, q)
        out[name] = ds * (ker * _GL_W[None, :]) @ L.T  # (modes, 4)
    return out


def _stencil_at(i, ns):
    if i == 0:
        return "first", np.array(_STENCILS["first"]) + i
    if i >= ns - 2:
        return "last", np.array(_STENCILS["last"]) + i
    return "mid", np.array(_STENCILS["mid"]) + i


def _forward(G, beta, ds):
    """F(s_i) = int_{s_0}^{s_i} e^{beta (s_i - t)} g(t) dt, columns = modes."""
    ns = G.shape[0]
    W = _interval_weights(beta, ds, "fwd")
    step = np.exp(beta * ds)
    F = np.zeros_like(G)
    for i in range(ns - 1):
        name, idx = _stencil_at(i, ns)
        F[i + 1] = step * F[i] + np.einsum("mk,km->m", W[name], G[idx])
    return F


def _backward(G, beta, ds, tail):
    """B(s_i) = int_{s_i}^inf e^{beta (s_i - t)} g(t) dt, with B(s_last) = tail."""
    ns = G.shape[0]
    W = _interval_weights(beta, ds, "bwd")
    step = np.exp(-beta * ds)
    B = np.zeros_like(G)
    B[-1] = tail
    for i in range(ns - 2, -1, -1):
        name, idx = _stencil_at(i, ns)
        B[i] = step * B[i + 1] + np.einsum("mk,km->m", W[name], G[idx])
    return B


def _tail_rates(G, ds, gamma, window=10):
    """Measured exponential rate of each mode over the last points, or gamma."""
    ns = G.shape[0]
    rates = np.full(G.shape[1], gamma)
    if ns < 2 * window + 1:
        return rates
    a = G[-window - 1 :]
    b = G[-2 * window - 1 : -window]
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = np.all(a * a[-1] > 0, axis=0) & np.all(b * a[-1] > 0, axis=0)
        ra = np.log(np.abs(a[-1] / a[0])) / (window * ds)
        rb = np.log(np.abs(b[-1] / b[0])) / (window * ds)
    consistent = ok & np.isfinite(ra) & np.isfinite(rb) & (np.abs(ra - rb) <= 1e-2 * np.abs(ra) + 1e-3)
    rates[consistent] = ra[consistent]
    return rates


def admissible_window(gamma: float, spec: SpectralData) -> int:
    """The index m with beta+_{m-1} < gamma < beta+_m (beta+_{-1} := beta-_0)."""
    bp = spec.beta_plus()
    bm0 = spec.beta_minus()[0]
    near = np.abs(bp - gamma) < RESONANCE_TOL
    if near.any():
        raise GammaOnResonance(f"gamma = {gamma} within {RESONANCE_TOL} of beta+_{int(np.argmax(near))}")
    if gamma <= bm0:
        raise ValidationError(f"gamma = {gamma} must exceed beta-_0 = {bm0}")
    m = int(np.sum(bp < gamma))
    if m > spec.K - 1:
        raise TailDivergence(f"gamma = {gamma} exceeds beta+_(K-1); no admissible window")
    return m


def linear_solve_H(g: ExteriorField, R: float, gamma: float, spec: SpectralData) -> ExteriorField:
    """Explicit mode-wise inverse of calL with w = 0 at s = R.

    Modes j >= m use the decaying representation, modes j < m the one
    integrated from R; the integrals run by exact exponential recursions
    over cubic interpolants of the projected data.
    """
    _check_grid(g, spec)
    if not spec.complete:
        raise ValidationError("linear_solve_H needs the complete discrete eigenbasis")
    if abs(g.R - R) > 1e-12:
        raise ValidationError(f"field starts at {g.R}, solve requested at R = {R}")
    m = admissible_window(gamma, spec)
    bp = spec.beta_plus()
    bm = spec.beta_minus()
    d = bp - bm
    if np.any(d <= 1e-12):
        raise ValidationError("coincident characteristic exponents")
    G = spec.project(g.values)
    ds = g.ds
    Fm = _forward(G, bm, ds)
    out = np.empty_like(G)
    if m > 0:
        Fp = _forward(G[:, :m], bp[:m], ds)
        out[:, :m] = (Fp - Fm[:, :m]) / d[:m]
    if m < G.shape[1]:
        hi = slice(m, None)
        rho = _tail_rates(G[:, hi], ds, gamma)
        bad = rho >= bp[hi] - RESONANCE_TOL
        if np.any(bad):
            rho = np.where(bad, gamma, rho)
            if np.any(gamma >= bp[hi]):
                raise TailDivergence("tail ansatz diverges: gamma >= beta+_j for a decaying mode")
        tail = G[-1, hi] / (bp[hi] - rho)
        Bp = _backward(G[:, hi], bp[hi], ds, tail)
        decay = np.exp(np.multiply.outer(g.s - R, bm[hi]))
        out[:, hi] = -(Fm[:, hi] + Bp - decay * Bp[0]) / d[hi]
    return g.like(spec.reconstruct(out), gamma)


# ---------------------------------------------------------------- Picard loops

@dataclass
class PicardResult:
    field: ExteriorField
    ratios: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    residual: float = float("nan")
    gamma: float = float("nan")

    @property
    def iterations(self):
        return len(self.norms)

    def to_json(self, stride=1) -> dict:
        return {
            "R": self.field.R,
            "S_max": self.field.S_max,
            "gamma": self.gamma,
            "contraction_ratios": list(self.ratios),
            "correction_norms": list(self.norms),
            "residual": self.residual,
            "field": self.field.to_json(stride),
        }


def _default_error(h, consts, terms):
    return lambda W: nonlinear_error(W, h, consts, terms)


def picard_iterate(base, u0, error, R, gamma, spec, tol=1e-10, max_iter=200):
    """Fixed point base + u0 + sum u_k with u_{k+1} = H(E(W_k) - E(W_{k-1})).

    Iteration stops once ||u_k||_gamma < tol * max(1, ||W_k||_gamma).
    Returns the total field (as a new ExteriorField tagged with ``gamma``),
    the correction norms ||u_k||_gamma and the successive ratios. Raises
    NoContraction after three consecutive ratios above 0.9.
    """
    W_prev = base
    E_prev = error(base)
    W = base + u0
    norms, ratios = [], []
    high = 0
    for _ in range(max_iter):
        E_cur = error(W)
        u = linear_solve_H(E_cur - E_prev, R, gamma, spec)
        nu = u.norm(2, gamma)
        if norms:
            r = nu / norms[-1] if norms[-1] > 0 else 0.0
            ratios.append(r)
            high = high + 1 if r > 0.9 else 0
            if high >= 3:
                raise NoContraction(f"contraction ratios {ratios[-3:]} above 0.9; increase R")
        norms.append(nu)
        W_prev, E_prev = W, E_cur
        W = W + u
        # relative to the field size: e^{sigma s} amplifies round-off in E at large s
        if nu < tol * max(1.0, W.norm(2, gamma)):
            break
    else:
        raise NoContraction(f"no convergence in {max_iter} Picard steps (last norm {norms[-1]:.3e})")
    del W_prev
    return W.like(W.values, gamma), norms, ratios


def _residual_norm(W, h, spec, consts, gamma, terms):
    res = translator_residual_s(W, h, spec, consts, terms)
    return res.norm(0, gamma)


def default_gamma(spec: SpectralData, consts: DerivedConstants) -> float:
    """Midpoint of the first admissible window above the E2 decay floor.

    The lower end is max(3 sigma - 2, beta-_0); the upper end is the next
    effective rate beta+_m (m <= K - 1).
    """
    lo = max(3.0 * consts.sigma - 2.0, float(spec.beta_minus()[0]))
    bp = spec.beta_plus()[: spec.K]
    above = bp[bp > lo + RESONANCE_TOL]
    if not above.size:
        raise TailDivergence(f"no effective rate above the decay floor {lo}")
    return 0.5 * (lo + float(above[0]))


def picard_zero_seed(
    h: ShrinkerProfile,
    consts: DerivedConstants,
    spec: SpectralData,
    R: float,
    gamma: float,
    span: float = 16.0,
    ds: float = 0.02,
    terms=("E1", "E2", "E3"),
    error=None,
    tol=1e-10,
) -> PicardResult:
    """Exterior translator close to the blow-down profile, built from w = 0.

    u_0 = H(E(0)), u_{k+1} = H(E(sum_0^k u_i) - E(sum_0^{k-1} u_i)).
    """
    if not (3.0 * consts.sigma - 2.0 < gamma < consts.sigma):
        raise ValidationError(f"gamma must lie in (3 sigma - 2, sigma) = ({3 * consts.sigma - 2}, {consts.sigma})")
    h = h.at(spec.N)
    err = error if error is not None else _default_error(h, consts, terms)
    zero = ExteriorField.zeros(R, spec.N, gamma, span, ds)
    u0 = linear_solve_H(err(zero), R, gamma, spec)
    # the first difference E(u0) - E(0) pairs with base = 0
    W, norms, ratios = picard_iterate(zero, u0, err, R, gamma, spec, tol)
    norms = [u0.norm(2, gamma)] + norms
    if norms[0] > 0:
        ratios = [norms[1] / norms[0]] + ratios
    res = _residual_norm(W, h, spec, consts, gamma, terms) if error is None else float("nan")
    return PicardResult(W, ratios, norms, res, gamma)


def jacobi_gamma(beta_j, gamma1, spec: SpectralData, consts: DerivedConstants):
    """(gamma, m) for a Jacobi perturbation at rate beta_j on a base of class gamma1.

    gamma = beta_j - eps with eps = min(sigma - gamma1, 2(1 - sigma),
    beta_j - beta+_{m-1}) / 2, gamma1 replaced by max(gamma1, beta_j) and m the
    first index of the cluster containing beta_j.
    """
    bp = spec.beta_plus()
    m = int(np.sum(bp < beta_j - 1e-9))
    prev = spec.beta_minus()[0] if m == 0 else bp[m - 1]
    g1 = max(gamma1, beta_j)
    eps = 0.5 * min(consts.sigma - g1, 2.0 * (1.0 - consts.sigma), beta_j - prev)
    if eps <= 0:
        raise ValidationError("Jacobi perturbation needs a positive margin below sigma")
    return beta_j - eps, m


def jacobi_perturb(
    w_base: ExteriorField,
    j: int,
    b: float,
    spec: SpectralData,
    consts: DerivedConstants,
    R: float,
    h: ShrinkerProfile,
    terms=("E1", "E2", "E3"),
    error=None,
    gamma=None,
    tol=1e-10,
) -> PicardResult:
    """Translator w_base + b e^{beta+_j s} phi_j + u with u of faster decay."""
    bp = spec.beta_plus()
    if not (0 <= j < bp.size):
        raise ValidationError(f"mode index {j} out of range")
    if j >= spec.K:
        raise ValidationError(f"beta+_{j} = {bp[j]} >= sigma: not an effective Jacobi mode")
    if abs(w_base.R - R) > 1e-12:
        raise ValidationError("base field must start at R")
    g, _ = jacobi_gamma(bp[j], w_base.gamma, spec, consts) if gamma is None else (gamma, None)
    if b == 0.0:
        return PicardResult(w_base.like(w_base.values, g), [], [], float("nan"), g)
    h = h.at(spec.N)
    err = error if error is not None else _default_error(h, consts, terms)
    u0 = JacobiField.from_spectrum(spec, j, b).on(w_base, g)
    W, norms, ratios = picard_iterate(w_base, u0, err, R, g, spec, tol)
    res = _residual_norm(W, h, spec, consts, w_base.gamma, terms) if error is None else float("nan")
    return PicardResult(W, ratios, norms, res, g)


@dataclass
class BoundaryMatch:
    result: PicardResult
    boundary_error: float
    slope_error: float
    slope_relative: float


def boundary_match(
    w: ExteriorField,
    R: float,
    gamma2: float,
    spec: SpectralData,
    consts: DerivedConstants,
    sign: int,
    h: ShrinkerProfile,
    terms=("E1", "E2", "E3"),
    error=None,
    tol=1e-10,
) -> BoundaryMatch:
    """Perturb w so that (w+u)/h = -sign e^{gamma2 R} on s = R.

    The reported ``slope_relative`` is
    sup|d/ds((w+u)/h) + sign beta-_0 e^{gamma2 R}| / e^{gamma2 R} at s = R.
    """
    if sign not in (1, -1):
        raise ValidationError("sign must be +1 or -1")
    if not (w.gamma < gamma2 < consts.sigma):
        raise ValidationError("need gamma1 < gamma2 < sigma")
    if abs(w.R - R) > 1e-12:
        raise ValidationError("field must start at R")
    h = h.at(spec.N)
    gamma0 = -0.5 * consts.c1
    bm = spec.beta_minus()
    c = spec.project(w.values[0])
    decay = np.exp(np.multiply.outer(w.s - R, bm))
    g_hat = -spec.reconstruct(decay * c[None, :])
    big = math.exp(gamma2 * R)
    u0 = w.like(g_hat - sign * big * np.exp(bm[0] * (w.s - R))[:, None] * h.h.samples[None, :], gamma0)
    err = error if error is not None else _default_error(h, consts, terms)
    W, norms, ratios = picard_iterate(w, u0, err, R, gamma0, spec, tol)
    res = _residual_norm(W, h, spec, consts, w.gamma, terms) if error is None else float("nan")
    hs = h.h.samples
    bnd = float(np.max(np.abs(W.values[0] / hs + sign * big)))
    slope = W.ds_derivative(1)[0] / hs
    serr = float(np.max(np.abs(slope + sign * bm[0] * big)))
    return BoundaryMatch(PicardResult(W, ratios, norms, res, gamma0), bnd, serr, serr / big)


def fit_decay_rate(s, values, start=None, stop=None) -> float:
    """Slope of log(values) against s by least squares over [start, stop]."""
    s = np.asarray(s, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = np.ones(s.size, dtype=bool)
    if start is not None:
        mask &= s >= start
    if stop is not None:
        mask &= s <= stop
    mask &= v > 0
    if mask.sum() < 2:
        raise ValidationError("not enough positive samples for a rate fit")
    return float(np.polyfit(s[mask], np.log(v[mask]), 1)[0])
