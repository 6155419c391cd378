"""Support functions of shrinking solitons.

The round solution h = 1 exists for every n. For n = 2 the k-fold symmetric
shrinking curves solve h'' + h = h^{1 - 1/alpha}; they are found by shooting
from the minimum h(0) = p with h'(0) = 0 and bisecting on h'(pi/k) = 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct

from .circlefield import DEFAULT_SAMPLES, CircleField, angles, r_operator
from .exceptions import NoNontrivialSolution, NonConvex, ValidationError

log = logging.getLogger(__name__)

__all__ = [
    "ShrinkerProfile",
    "round_profile",
    "shrinker_residual",
    "solve_shrinker_curve",
    "shooting_candidates",
    "gauss_curvature",
]

RK_STEPS = 2048
BISECT_TOL = 1e-13
ROUND_EXCLUSION = 1e-6
ACCEPT_RESIDUAL = 1e-8


@dataclass(frozen=True)
class ShrinkerProfile:
    """A shrinker support function ``h`` on S^1 (constant for the round case).

    ``cos_coeffs`` holds a_m with h = sum_m a_m cos(m k theta); it lets the
    profile be resampled at any N without interpolation error.
    """

    h: CircleField
    alpha: float
    symmetry_k: int = 0
    residual: float = 0.0
    n: int = 2
    p0: float = 1.0
    cos_coeffs: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def N(self):
        return self.h.N

    @property
    def is_round(self):
        return self.symmetry_k == 0

    def at(self, N: int) -> "ShrinkerProfile":
        """The same profile sampled at N points."""
        if N == self.N:
            return self
        if self.is_round:
            return round_profile(self.alpha, N=N, n=self.n)
        a = self.cos_coeffs
        a = a[np.arange(a.size) * self.symmetry_k < N // 2]
        h = CircleField(_evaluate_cosine_series(a, self.symmetry_k, angles(N)))
        res = shrinker_residual(h, self.alpha).sup()
        return ShrinkerProfile(h, self.alpha, self.symmetry_k, res, self.n, self.p0, self.cos_coeffs)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "alpha": self.alpha,
            "k": self.symmetry_k,
            "N": self.N,
            "samples": self.h.samples.tolist(),
            "residual": self.residual,
        }

    @classmethod
    def from_json(cls, obj) -> "ShrinkerProfile":
        h = CircleField.from_json(obj)
        alpha = float(obj["alpha"])
        k = int(obj.get("k", 0))
        n = int(obj.get("n", 2))
        coeffs = None
        if k >= 3:
            # recover the cosine series from the samples; exact for resolved profiles
            modes = h.modes
            coeffs = 2.0 * modes[::k].real
            coeffs[0] = modes[0].real
        res = shrinker_residual(h, alpha).sup() if n == 2 else 0.0
        return cls(h, alpha, k, res, n, float(h.min()), coeffs)


def round_profile(alpha: float, N: int = DEFAULT_SAMPLES, n: int = 2) -> ShrinkerProfile:
    _check_alpha(alpha)
    return ShrinkerProfile(CircleField.constant(1.0, N), float(alpha), 0, 0.0, n, 1.0, np.array([1.0]))


def _check_alpha(alpha):
    if not (0.0 < alpha < 0.5):
        raise ValidationError(f"alpha must lie in (0, 1/2), got {alpha}")


def shrinker_residual(h: CircleField, alpha: float) -> CircleField:
    """det r[h] - h^{(alpha-1)/alpha}; identically zero exactly for shrinkers."""
    if h.min() <= 0:
        raise ValidationError("shrinker residual needs h > 0")
    return r_operator(h) - h.power((alpha - 1.0) / alpha)


def _rk4_shoot(p, alpha, k, steps=RK_STEPS, keep=False):
    """Integrate h'' = h^{1-1/alpha} - h on [0, pi/k] from (p, 0); vectorized in p."""
    h = np.array(p, dtype=float, copy=True)
    v = np.zeros_like(h)
    dt = np.pi / (k * steps)
    e = 1.0 - 1.0 / alpha

    def acc(x):
        return x**e - x

    path = [h.copy()] if keep else None
    with np.errstate(all="ignore"):
        for _ in range(steps):
            a1 = acc(h)
            h2 = h + 0.5 * dt * v
            v2 = v + 0.5 * dt * a1
            a2 = acc(h2)
            h3 = h + 0.5 * dt * v2
            v3 = v + 0.5 * dt * a2
            a3 = acc(h3)
            h4 = h + dt * v3
            v4 = v + dt * a3
            a4 = acc(h4)
            h = h + dt / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
            v = v + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
            if keep:
                path.append(h.copy())
    if keep:
        return h, v, np.array(path)
    return h, v


def _p_min(alpha, k, steps=RK_STEPS):
    # keep dt * sqrt(|h''/h|) at the minimum below 0.1 so RK4 resolves the bounce
    dt = np.pi / (k * steps)
    return max((10.0 * dt) ** (2.0 * alpha), 1e-3)


def shooting_candidates(alpha: float, k: int, n_scan: int = 240) -> list[float]:
    """All bisected roots p of the shooting map h'(pi/k; p) with |p - 1| > 1e-6."""
    p_lo = _p_min(alpha, k)
    dev = np.geomspace(ROUND_EXCLUSION * 1.5, 1.0 - p_lo, n_scan)
    ps = 1.0 - dev
    _, F = _rk4_shoot(ps, alpha, k)
    ok = np.isfinite(F)
    roots = []
    for i in range(n_scan - 1):
        if not (ok[i] and ok[i + 1]):
            continue
        if F[i] == 0.0:
            roots.append(float(ps[i]))
        elif F[i] * F[i + 1] < 0:
            roots.append(_bisect(alpha, k, ps[i + 1], ps[i], F[i + 1]))
    return roots


def _bisect(alpha, k, lo, hi, f_lo, width=16):
    """Bracket refinement; each pass shoots ``width - 1`` interior points at once."""
    for _ in range(200):
        if hi - lo <= BISECT_TOL:
            break
        mids = np.linspace(lo, hi, width + 1)[1:-1]
        _, fm = _rk4_shoot(mids, alpha, k)
        same = (fm < 0) == (f_lo < 0)
        if np.any(fm == 0.0):
            return float(mids[np.argmax(fm == 0.0)])
        # the bracket [lo, hi] has one sign change; keep the sub-interval holding it
        i = int(np.argmin(same)) if not same.all() else width - 1
        if i > 0:
            lo, f_lo = mids[i - 1], fm[i - 1]
        if i < width - 1:
            hi = mids[i]
    return float(0.5 * (lo + hi))


def _cosine_coefficients(path):
    """a_m of the even 2pi-periodic function sampled at x_j = j pi / M, j = 0..M."""
    M = path.size - 1
    y = dct(path, type=1)
    a = y / M
    a[0] *= 0.5
    a[-1] *= 0.5
    return a


def _evaluate_cosine_series(a, k, theta):
    m = np.arange(a.size)
    return np.cos(np.multiply.outer(theta, m * k)) @ a


def _lift(a, k, alpha, N=DEFAULT_SAMPLES, max_N=4096):
    """Sample the cosine series on the circle.

    Coefficients below the round-off floor are dropped; N is doubled until the
    discarded high modes (those at or above the Nyquist index) are negligible
    in h'' and the top quarter of the spectrum is below 1e-10 relative energy.
    """
    floor = 1e-15 * abs(a[0])
    small = np.abs(a) < floor
    # first index after which every coefficient is noise
    last = a.size - 1
    while last > 0 and small[last]:
        last -= 1
    a = a[: last + 1]
    while True:
        m = np.arange(a.size)
        inside = m * k < N // 2
        dropped = float(np.sum(np.abs(a[~inside]) * (1.0 + (m[~inside] * k) ** 2)))
        h = CircleField(_evaluate_cosine_series(a[inside], k, angles(N)))
        if (h.tail_energy() <= 1e-10 and dropped < 1e-11) or N >= max_N:
            return h, a
        N *= 2


def solve_shrinker_curve(alpha: float, k: int, N: int = DEFAULT_SAMPLES, root: int = 0) -> ShrinkerProfile:
    """k-fold symmetric shrinking curve for the alpha/(1-alpha) flow.

    ``k = 0`` returns the round profile. For k >= 3 a nontrivial solution exists
    only when alpha < 1/k^2; otherwise :class:`NoNontrivialSolution` is raised.
    If several roots turn up, all are logged and ``root`` selects one.
    """
    _check_alpha(alpha)
    if k == 0:
        return round_profile(alpha, N)
    if k < 3:
        raise ValidationError("symmetry order must be 0 (round) or >= 3")
    roots = shooting_candidates(alpha, k)
    if not roots:
        raise NoNontrivialSolution(f"no sign change of the shooting map for alpha={alpha}, k={k}")
    if len(roots) > 1:
        log.warning("shooting found %d candidate minima %s for alpha=%g, k=%d", len(roots), roots, alpha, k)
    p = roots[root]
    _, _, path = _rk4_shoot(np.array([p]), alpha, k, keep=True)
    path = path[:, 0]
    if np.min(path) <= 0 or not np.all(np.isfinite(path)):
        raise NonConvex("shooting trajectory left h > 0")
    a = _cosine_coefficients(path)
    h, a = _lift(a, k, alpha, N)
    if r_operator(h).min() <= 0:
        raise NonConvex("lifted profile has det r[h] <= 0")
    res = shrinker_residual(h, alpha).sup()
    if res >= ACCEPT_RESIDUAL:
        raise NoNontrivialSolution(f"profile residual {res:.3e} above acceptance {ACCEPT_RESIDUAL}")
    return ShrinkerProfile(h, float(alpha), int(k), res, 2, float(p), a)


def gauss_curvature(profile) -> CircleField:
    """K = 1 / det r[h] pointwise."""
    h = profile.h if isinstance(profile, ShrinkerProfile) else profile
    d = r_operator(h)
    if d.min() <= 0:
        raise NonConvex("degenerate r[h]: curvature undefined")
    return CircleField(1.0 / d.samples)
