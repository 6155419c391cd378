"""Spectrum of the linearized curvature operator L in the weighted space L^2_h.

For n = 2 the eigenproblem is the Sturm-Liouville problem
f'' + f = lambda * w * f with w = (h'' + h)^{1/(1-alpha)}. Substituting
g = w^{1/2} f gives a dense symmetric matrix, which is diagonalized by the
in-repo Jacobi solver after rotating into the real Fourier basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circlefield import CircleField, angles, second_derivative_matrix, weight_of
from .constants import DerivedConstants, ExponentPair, FlowParams, beta_exponents, derive_constants
from .eigen import jacobi_eigh
from .exceptions import ValidationError
from .shrinker import ShrinkerProfile

# relative tolerance for beta+ = sigma ties in the eigen route (the rotation
# mode of a non-round shrinker sits exactly at sigma)
BETA_TIE_TOL = 1e-9

__all__ = [
    "GeneralizedProblem",
    "SpectralData",
    "assemble_L",
    "eig_L",
    "apply_L",
    "translation_norms",
    "fourier_basis",
    "profile_weight",
]


def fourier_basis(N: int) -> np.ndarray:
    """Orthonormal real Fourier basis, columns ordered 1, cos t, sin t, cos 2t, ..."""
    t = angles(N)
    cols = [np.full(N, 1.0 / math.sqrt(N))]
    for k in range(1, N // 2):
        cols.append(math.sqrt(2.0 / N) * np.cos(k * t))
        cols.append(math.sqrt(2.0 / N) * np.sin(k * t))
    cols.append(np.cos(N // 2 * t) / math.sqrt(N))
    return np.column_stack(cols)


@dataclass
class GeneralizedProblem:
    """Stiffness ``A`` = D^2 + I, diagonal weight ``w`` and the symmetrized matrix."""

    A: np.ndarray
    weight: CircleField
    symmetric: np.ndarray

    def asymmetry(self) -> float:
        S = self.symmetric
        return float(np.max(np.abs(S - S.T)) / max(1.0, np.max(np.abs(S))))


def profile_weight(profile: ShrinkerProfile) -> CircleField:
    """L^2_h weight of a profile, made exactly even when h is even to round-off.

    The spectral h'' leaves an odd part of order 1e-12 in the weight; left in,
    it couples cos and sin modes at the 1e-8 level through the large
    high-mode entries of L.
    """
    w = weight_of(profile.h, profile.alpha)
    h = profile.h.samples
    refl = (-np.arange(h.size)) % h.size
    if np.max(np.abs(h - h[refl])) <= 1e-13 * np.max(np.abs(h)):
        v = w.samples
        w = CircleField(0.5 * (v + v[refl]))
    return w


def assemble_L(profile: ShrinkerProfile) -> GeneralizedProblem:
    h = profile.h
    w = profile_weight(profile)
    A = second_derivative_matrix(h.N) + np.eye(h.N)
    s = 1.0 / np.sqrt(w.samples)
    return GeneralizedProblem(A, w, s[:, None] * A * s[None, :])


def apply_L(f, profile_or_weight, alpha=None):
    """L f = (f'' + f) / w on samples (last axis), with w the L^2_h weight."""
    if isinstance(profile_or_weight, ShrinkerProfile):
        w = profile_weight(profile_or_weight).samples
    else:
        w = np.asarray(profile_or_weight.samples if isinstance(profile_or_weight, CircleField) else profile_or_weight)
    vals = f.samples if isinstance(f, CircleField) else np.asarray(f, dtype=float)
    N = vals.shape[-1]
    k = np.arange(N // 2 + 1, dtype=float)
    rf = np.fft.irfft((1.0 - k**2) * np.fft.rfft(vals, axis=-1), n=N, axis=-1)
    out = rf / w
    return CircleField(out) if isinstance(f, CircleField) else out


@dataclass
class SpectralData:
    """Eigenpairs of L ordered non-increasingly, orthonormal in <.,.>_h.

    ``phis`` has one column per eigenfunction (samples at the N angles).
    ``lambdas_all``/``phis_all`` keep the complete discrete basis, which the
    exterior solvers need for exact projections.
    """

    lambdas: np.ndarray
    phis: np.ndarray
    betas: list
    K: int
    norms: np.ndarray
    weight: CircleField
    consts: DerivedConstants
    lambdas_all: np.ndarray = field(repr=False)
    phis_all: np.ndarray = field(repr=False)
    betas_all: np.ndarray = field(repr=False)

    @property
    def N(self):
        return self.weight.N

    @property
    def num(self):
        return self.lambdas.size

    @property
    def complete(self):
        return self.lambdas_all.size == self.N

    def phi(self, i) -> CircleField:
        return CircleField(self.phis_all[:, i])

    def beta_plus(self):
        return self.betas_all[:, 1]

    def beta_minus(self):
        return self.betas_all[:, 0]

    def project(self, samples) -> np.ndarray:
        """Coefficients <f, phi_j>_h for every basis function (last axis)."""
        vals = np.asarray(samples, dtype=float)
        wv = vals * self.weight.samples * (2.0 * np.pi / self.N)
        return wv @ self.phis_all

    def reconstruct(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs) @ self.phis_all.T

    def inner(self, f, g) -> float:
        fv = f.samples if isinstance(f, CircleField) else np.asarray(f)
        gv = g.samples if isinstance(g, CircleField) else np.asarray(g)
        return float(2.0 * np.pi * np.mean(fv * gv * self.weight.samples))

    def to_json(self) -> dict:
        return {
            "lambdas": self.lambdas.tolist(),
            "betas": [[b.beta_minus, b.beta_plus] for b in self.betas],
            "K": self.K,
            "c_norms": self.norms.tolist(),
        }


def translation_norms(profile: ShrinkerProfile, consts: DerivedConstants) -> np.ndarray:
    """(c_0, c_1, c_2): c_0 = -|h|_h / (A sigma), c_i = |x_i|_h."""
    w = profile_weight(profile).samples
    t = profile.h.theta

    def norm(v):
        return math.sqrt(2.0 * np.pi * np.mean(v * v * w))

    c0 = -norm(profile.h.samples) / (consts.bigA * consts.sigma)
    return np.array([c0, norm(np.cos(t)), norm(np.sin(t))])


def _clusters(lam, rtol=1e-9):
    groups = []
    start = 0
    for i in range(1, lam.size + 1):
        if i == lam.size or abs(lam[i] - lam[i - 1]) > rtol * max(1.0, abs(lam[i - 1])):
            groups.append((start, i))
            start = i
    return groups


def _symmetry_labels(N, k):
    """Block label of each Fourier basis column for an even, k-fold symmetric weight.

    Reflection separates cosines from sines exactly on the grid. Rotation by
    2 pi / k couples mode m only to modes congruent to +-m mod k, but aliasing
    keeps that exact only when k divides N. ``k = 0`` (round) decouples every mode.
    """
    m = np.concatenate([[0], np.repeat(np.arange(1, N // 2), 2), [N // 2]])
    parity = np.zeros(N, dtype=int)
    parity[2:-1:2] = 1
    if k == 0:
        cls = m
    elif N % k == 0:
        cls = np.minimum(m % k, (-m) % k)
    else:
        cls = np.zeros(N, dtype=int)
    return parity * (N + 1) + cls


def _blockwise_eigh(B, labels):
    """Jacobi on each symmetry block of B, merged into ascending order."""
    n = B.shape[0]
    lam = np.empty(n)
    Y = np.zeros((n, n))
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        lc, yc = jacobi_eigh(B[np.ix_(idx, idx)])
        lam[idx] = lc
        Y[np.ix_(idx, idx)] = yc
    order = np.argsort(lam, kind="stable")
    return lam[order], Y[:, order]


def eig_L(profile: ShrinkerProfile, num: int | None = None, params: FlowParams | None = None) -> SpectralData:
    """Eigenpairs of L for a shrinker profile (n = 2).

    Eigenvalues come out non-increasing. phi_0 is signed to correlate positively
    with h; the zero eigenspace is rotated so that phi_1 ~ cos(theta) and
    phi_2 ~ sin(theta). Every other degenerate cluster is rotated onto the
    round-sphere harmonics of the same position, then signed positively.
    """
    N = profile.N
    if num is not None and not (1 <= num <= N // 2):
        raise ValidationError(f"num must lie in [1, N/2] = [1, {N // 2}]")
    if params is None:
        params = FlowParams(profile.n, profile.alpha)
    consts = derive_constants(params)
    prob = assemble_L(profile)
    Q = fourier_basis(N)
    Bq = Q.T @ prob.symmetric @ Q
    Bq = 0.5 * (Bq + Bq.T)
    lam, Y = _blockwise_eigh(Bq, _symmetry_labels(N, profile.symmetry_k))
    lam = lam[::-1]
    G = Q @ Y[:, ::-1]
    w = prob.weight.samples
    phis = G / np.sqrt(w)[:, None] * math.sqrt(N / (2.0 * np.pi))
    wq = w * (2.0 * np.pi / N)

    # reference basis, normalized in <.,.>_h
    ref = Q.copy()
    ref[:, 0] = profile.h.samples
    ref = ref / np.sqrt(np.sum(ref * ref * wq[:, None], axis=0))[None, :]
    for a, b in _clusters(lam):
        block = phis[:, a:b]
        R = ref[:, a:b]
        M = block.T @ (wq[:, None] * R)
        if b - a > 1:
            U, _, Vt = np.linalg.svd(M)
            block = block @ (U @ Vt)
            M = block.T @ (wq[:, None] * R)
        for j in range(b - a):
            proj = M[j, j]
            if abs(proj) > 1e-12:
                sgn = math.copysign(1.0, proj)
            else:
                sgn = math.copysign(1.0, block[int(np.argmax(np.abs(block[:, j]))), j])
            block[:, j] *= sgn
        phis[:, a:b] = block

    betas_all = np.array(
        [[e.beta_minus, e.beta_plus] for e in (beta_exponents(float(x), params, consts) for x in lam)]
    )
    K = int(np.sum(betas_all[:, 1] < consts.sigma * (1.0 - BETA_TIE_TOL)))
    m = N // 2 if num is None else num
    betas = [ExponentPair(float(bm), float(bp), float(x)) for (bm, bp), x in zip(betas_all[:m], lam[:m])]
    return SpectralData(
        lambdas=lam[:m].copy(),
        phis=phis[:, :m].copy(),
        betas=betas,
        K=K,
        norms=translation_norms(profile, consts),
        weight=prob.weight,
        consts=consts,
        lambdas_all=lam,
        phis_all=phis,
        betas_all=betas_all,
    )
