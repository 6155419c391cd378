"""Integration of the translator support equation in the height l.

S_ll = -(1 + S_l^2)^kappa S_l^{1/alpha} det r[S], collocated in theta and
advanced in l by an adaptive Runge-Kutta method. As an initial value problem
in l the equation is elliptic, so high angular modes of the deviation from the
blow-down profile A l^sigma h grow without bound in either direction; the
deviation is kept in a Fourier-Galerkin space of modes <= ``max_mode``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .circlefield import CircleField, _deriv2_samples
from .constants import DerivedConstants
from .exceptions import ConvexityLost, GraphicalityLost, StepUnderflow, ValidationError
from .linearized import ExteriorField, fit_decay_rate
from .shrinker import ShrinkerProfile

__all__ = [
    "MarchState",
    "march",
    "seed_from_exterior",
    "seed_blowdown",
    "seed_from_radial",
    "convergence_diagnostics",
    "translator_residual",
    "Diagnostics",
]

DEFAULT_MAX_MODE = 8
STEP_FRACTION = 200


@dataclass
class MarchState:
    """Support function S(l, .) and S_l(l, .) at height l, plus checkpoint history."""

    l: float
    S: CircleField
    S_l: CircleField
    n: int = 2
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.S.N != self.S_l.N:
            raise ValidationError("S and S_l must share the angular grid")
        if not self.l > 0:
            raise ValidationError("l must be positive")

    def check(self):
        if self.S_l.min() <= 0:
            raise GraphicalityLost(f"S_l <= 0 at l = {self.l}")
        if _det(self.S.samples, self.n).min() <= 0:
            raise ConvexityLost(f"det r[S] <= 0 at l = {self.l}")

    def record(self):
        self.history.append((float(self.l), self.S.samples.copy(), self.S_l.samples.copy()))

    def slices_rows(self):
        """Rows (l, S(theta_0), ..., S(theta_{N-1})) for every checkpoint."""
        return np.array([np.concatenate([[l], S]) for l, S, _ in self.history])


def _det(S, n):
    if n == 2:
        return _deriv2_samples(S) + S
    if np.ptp(S) > 1e-12 * np.max(np.abs(S)):
        raise ValidationError("marching for n > 2 is limited to radial data")
    return np.full_like(S, S[0] ** (n - 1))


def _lowpass(x, filt):
    """Keep Fourier modes <= filt (int), or apply a projector matrix."""
    if filt is None:
        return x
    if isinstance(filt, np.ndarray):
        return x @ filt.T
    c = np.fft.rfft(x, axis=-1)
    c[..., filt + 1 :] = 0.0
    return np.fft.irfft(c, n=x.shape[-1], axis=-1)


def _rhs_factory(consts: DerivedConstants, href, filt, n):
    kappa = consts.kappa
    p = 1.0 / consts.alpha
    A, sig = consts.bigA, consts.sigma
    N = href.size

    def rhs(l, y):
        S = y[:N]
        Sl = y[N:]
        pos = np.where(Sl > 0, Sl, 0.0)
        acc = -((1.0 + Sl * Sl) ** kappa) * pos**p * _det(S, n)
        if filt is not None:
            ref = sig * (sig - 1.0) * A * l ** (sig - 2.0) * href
            acc = ref + _lowpass(acc - ref, filt)
        return np.concatenate([Sl, acc])

    return rhs


def _filtered(S, Sl, l, consts, href, filt):
    if filt is None:
        return S, Sl
    A, sig = consts.bigA, consts.sigma
    base = A * l**sig * href
    dbase = sig * A * l ** (sig - 1.0) * href
    return base + _lowpass(S - base, filt), dbase + _lowpass(Sl - dbase, filt)


def march(
    init: MarchState,
    l_target: float,
    direction: str,
    consts: DerivedConstants,
    h: ShrinkerProfile | None = None,
    max_mode: int | None = DEFAULT_MAX_MODE,
    checkpoints_per_decade: int = 10,
    rtol: float = 1e-12,
    step_fraction: int = STEP_FRACTION,
    spec=None,
    max_beta: float | None = None,
) -> MarchState:
    """Advance ``init`` to ``l_target`` and return the final state.

    ``h`` is the shrinker whose blow-down profile anchors the mode filter
    (round when omitted); ``max_mode=None`` disables filtering. With ``spec``
    (eigendata of L for ``h``) and ``max_beta`` the deviation is instead kept
    in the span of the eigenfunctions with beta+_j <= max_beta, which is the
    natural truncation when the weight of L_h is far from constant. Breakdown of
    graphicality or convexity raises with the breakdown height in ``.l`` and
    the last good state in ``.state``.
    """
    if direction not in ("up", "down"):
        raise ValidationError("direction must be 'up' or 'down'")
    l0 = float(init.l)
    if direction == "up" and not l_target > l0 or direction == "down" and not 0 < l_target < l0:
        raise ValidationError(f"l_target = {l_target} inconsistent with direction {direction} from l = {l0}")
    init.check()
    N = init.S.N
    n = init.n
    if h is None:
        href = np.ones(N)
    else:
        href = (h.at(N) if h.N != N else h).h.samples
    filt = max_mode
    if spec is not None and max_beta is not None:
        if spec.N != N:
            raise ValidationError("spectral data and state use different grids")
        keep = spec.beta_plus() <= max_beta
        Phi = spec.phis_all[:, keep]
        filt = Phi @ (Phi.T * spec.weight.samples[None, :] * (2.0 * np.pi / N))
    if n != 2 and filt is not None and np.ptp(href) > 0:
        raise ValidationError("n > 2 marching supports only the round reference")
    S, Sl = _filtered(init.S.samples, init.S_l.samples, l0, consts, href, filt)
    state = MarchState(l0, CircleField(S), CircleField(Sl), n, list(init.history))
    if not state.history or state.history[-1][0] != l0:
        state.record()
    rhs = _rhs_factory(consts, href, filt, n)

    def graph_event(l, y):
        return float(np.min(y[N:]))

    def convex_event(l, y):
        return float(np.min(_det(y[:N], n)))

    for ev in (graph_event, convex_event):
        ev.terminal = True
        ev.direction = -1

    decades = abs(math.log10(l_target / l0))
    nseg = max(1, int(math.ceil(decades * checkpoints_per_decade - 1e-9)))
    marks = np.geomspace(l0, l_target, nseg + 1)
    marks[-1] = l_target
    y = np.concatenate([S, Sl])
    for a, b in zip(marks[:-1], marks[1:]):
        scale = np.concatenate([np.full(N, np.max(np.abs(y[:N]))), np.full(N, np.max(np.abs(y[N:])))])
        sol = solve_ivp(
            rhs,
            (a, b),
            y,
            method="DOP853",
            rtol=rtol,
            atol=rtol * 0.1 * scale,
            max_step=min(a, b) / step_fraction,
            events=(graph_event, convex_event),
        )
        if sol.status == -1:
            exc = StepUnderflow(f"integrator failed near l = {sol.t[-1]:.6g}: {sol.message}")
            exc.l, exc.state = float(sol.t[-1]), state
            raise exc
        if sol.status == 1:
            which = GraphicalityLost if sol.t_events[0].size else ConvexityLost
            lb = float((sol.t_events[0] if sol.t_events[0].size else sol.t_events[1])[0])
            exc = which(f"{which.__name__} at l = {lb:.6g}")
            exc.l, exc.state = lb, state
            raise exc
        y = sol.y[:, -1]
        state = MarchState(float(b), CircleField(y[:N]), CircleField(y[N:]), n, state.history)
        state.record()
    return state


def seed_blowdown(h: ShrinkerProfile, consts: DerivedConstants, l: float) -> MarchState:
    """S = A l^sigma h exactly."""
    A, sig = consts.bigA, consts.sigma
    return MarchState(float(l), h.h * (A * l**sig), h.h * (sig * A * l ** (sig - 1.0)), consts.n)


def seed_from_radial(p, l: float, N: int = 128) -> MarchState:
    f, fl = p(l)
    return MarchState(float(l), CircleField.constant(float(f), N), CircleField.constant(float(fl), N), p.n)


def seed_from_exterior(w: ExteriorField, h: ShrinkerProfile, consts: DerivedConstants, l_start: float) -> MarchState:
    """S = A l^sigma h + w(ln l), S_l = sigma A l^{sigma-1} h + w_s(ln l) / l."""
    if h.N != w.N:
        h = h.at(w.N)
    s = math.log(l_start)
    val, der = w.at_s(s)
    A, sig = consts.bigA, consts.sigma
    hv = h.h.samples
    S = A * l_start**sig * hv + val
    Sl = sig * A * l_start ** (sig - 1.0) * hv + der / l_start
    return MarchState(float(l_start), CircleField(S), CircleField(Sl), consts.n)


def translator_residual(w: ExteriorField, h: ShrinkerProfile, consts: DerivedConstants) -> ExteriorField:
    """l^2 (S_ll + (1 + S_l^2)^kappa S_l^{1/alpha} det r[S]) for S = A l^sigma h + w.

    Evaluated pointwise on the exterior grid, with s-derivatives of w by the
    same finite differences as the linear operator.
    """
    if h.N != w.N:
        h = h.at(w.N)
    A, sig = consts.bigA, consts.sigma
    s = w.s[:, None]
    hv = h.h.samples[None, :]
    ws = w.ds_derivative(1)
    wss = w.ds_derivative(2)
    Sval = A * np.exp(sig * s) * hv + w.values
    Sl = sig * A * np.exp((sig - 1.0) * s) * hv + ws * np.exp(-s)
    Sll = sig * (sig - 1.0) * A * np.exp((sig - 2.0) * s) * hv + (wss - ws) * np.exp(-2.0 * s)
    det = np.array([_det(row, consts.n) for row in Sval])
    res = Sll + (1.0 + Sl * Sl) ** consts.kappa * Sl ** (1.0 / consts.alpha) * det
    return w.like(res * np.exp(2.0 * s))


@dataclass
class Diagnostics:
    l: np.ndarray
    d: np.ndarray
    d_rate: float
    decreasing: bool
    diff: np.ndarray | None = None
    diff_rate: float | None = None
    beta: float | None = None

    def decade_values(self):
        """d at the checkpoints closest to each power of ten in range."""
        out = []
        for k in range(int(math.ceil(math.log10(self.l[0]) - 1e-9)), int(math.floor(math.log10(self.l[-1]) + 1e-9)) + 1):
            i = int(np.argmin(np.abs(np.log10(self.l) - k)))
            out.append((float(self.l[i]), float(self.d[i])))
        return out

    def to_json(self):
        out = {
            "l": self.l.tolist(),
            "d": self.d.tolist(),
            "d_rate": self.d_rate,
            "decreasing": self.decreasing,
        }
        if self.diff is not None:
            out.update({"diff": self.diff.tolist(), "diff_rate": self.diff_rate, "beta": self.beta})
        return out


def convergence_diagnostics(
    state: MarchState,
    h: ShrinkerProfile,
    consts: DerivedConstants,
    paired: MarchState | None = None,
    beta: float | None = None,
) -> Diagnostics:
    """d(l) = sup|S/(A l^sigma) - h| per checkpoint and its log-log slope.

    With ``paired`` (a run over the same checkpoints) the sup-norm of the
    difference is fitted against l as well.
    """
    if not state.history:
        raise ValidationError("state has no checkpoints")
    A, sig = consts.bigA, consts.sigma
    ls = np.array([c[0] for c in state.history])
    order = np.argsort(ls)
    ls = ls[order]
    Ss = np.array([state.history[i][1] for i in order])
    hv = (h.at(Ss.shape[1]) if h.N != Ss.shape[1] else h).h.samples
    d = np.max(np.abs(Ss / (A * ls[:, None] ** sig) - hv[None, :]), axis=1)
    rate = fit_decay_rate(np.log(ls), d)
    diag = Diagnostics(ls, d, rate, bool(np.all(np.diff(d) < 0)))
    if paired is not None:
        lp = np.array([c[0] for c in paired.history])
        op = np.argsort(lp)
        if lp.size != ls.size or np.max(np.abs(lp[op] / ls - 1)) > 1e-12:
            raise ValidationError("paired runs must share checkpoints")
        Sp = np.array([paired.history[i][1] for i in op])
        diff = np.max(np.abs(Sp - Ss), axis=1)
        diag.diff = diff
        diag.diff_rate = fit_decay_rate(np.log(ls), diff)
        diag.beta = beta
    return diag
