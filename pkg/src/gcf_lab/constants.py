"""Closed-form constants, characteristic exponents and Jacobi-field counts.

Everything here is a pure function of the ambient dimension ``n`` (the
hypersurface lives in R^{n+1}, its level sets in R^n) and the flow exponent
``alpha``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath

from .exceptions import ComplexExponents, JacobiCountMismatch, ValidationError

__all__ = [
    "FlowParams",
    "DerivedConstants",
    "ExponentPair",
    "derive_constants",
    "beta_exponents",
    "sphere_eigenvalue",
    "alpha_threshold",
    "jacobi_count_round",
    "jacobi_count_table",
    "jacobi_count_enumerated",
]


TIE_TOL = 1e-12


@dataclass(frozen=True)
class FlowParams:
    """Ambient dimension ``n`` >= 2 and flow exponent 0 < ``alpha`` < 1/2."""

    n: int
    alpha: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"n must be an integer >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        a = float(self.alpha)
        if not (0.0 < a < 0.5) or not math.isfinite(a):
            raise ValidationError(f"alpha must lie in (0, 1/2), got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def sub_affine_critical(self) -> bool:
        return Fraction(self.alpha) < Fraction(1, self.n + 2)


@dataclass(frozen=True)
class DerivedConstants:
    params: FlowParams
    sigma: float
    bigA: float
    kappa: float
    c1: float
    c2: float

    @property
    def n(self):
        return self.params.n

    @property
    def alpha(self):
        return self.params.alpha

    def as_dict(self):
        return {
            "n": self.n,
            "alpha": self.alpha,
            "sigma": self.sigma,
            "A": self.bigA,
            "kappa": self.kappa,
            "c1": self.c1,
            "c2": self.c2,
            "sub_affine_critical": self.params.sub_affine_critical,
        }


@dataclass(frozen=True)
class ExponentPair:
    beta_minus: float
    beta_plus: float
    lam: float


def _closed_forms(n, alpha):
    denom = 1.0 + alpha * (n - 2)
    sigma = (1.0 - 2.0 * alpha) / denom
    # 1 - sigma written without subtraction
    one_minus_sigma = n * alpha / denom
    bigA = sigma ** ((alpha - 1.0) / denom) * one_minus_sigma ** (alpha / denom)
    kappa = (n + 2) / 2.0 - 1.0 / (2.0 * alpha)
    c1 = ((n - 1) - alpha * (n - 2)) / denom
    c2 = n * alpha * (1.0 - 2.0 * alpha) / denom**2
    return sigma, one_minus_sigma, bigA, kappa, c1, c2


def _amplitude_extended(n, alpha):
    with mpmath.workdps(40):
        a = mpmath.mpf(alpha)
        denom = 1 + a * (n - 2)
        sigma = (1 - 2 * a) / denom
        return sigma ** ((a - 1) / denom) * (1 - sigma) ** (a / denom)


def derive_constants(params: FlowParams, check: bool = True) -> DerivedConstants:
    """sigma, A, kappa and the drift/zeroth-order coefficients of the linearization.

    With ``check`` the amplitude A is recomputed at 40 digits and must agree
    with the double-precision value to 1e-12 relative.
    """
    if not isinstance(params, FlowParams):
        raise ValidationError("derive_constants expects a FlowParams")
    n, alpha = params.n, params.alpha
    sigma, _, bigA, kappa, c1, c2 = _closed_forms(n, alpha)
    if check:
        ref = _amplitude_extended(n, alpha)
        if abs(bigA - float(ref)) > 1e-12 * abs(float(ref)):
            raise ArithmeticError(f"amplitude self-check failed: {bigA} vs {ref}")
    return DerivedConstants(params, sigma, bigA, kappa, c1, c2)


def beta_exponents(lam: float, params: FlowParams, consts: DerivedConstants | None = None) -> ExponentPair:
    """Both roots of x^2 + c1 x + c2 lam = 0 (Jacobi-field growth rates)."""
    c = consts if consts is not None else derive_constants(params, check=False)
    n, alpha = params.n, params.alpha
    p = (n - 1) - alpha * (n - 2)
    q = 1.0 + alpha * (n - 2)
    disc = p * p - 4.0 * n * alpha * (1.0 - 2.0 * alpha) * lam
    # a double root (disc = 0) can come out slightly negative from round-off in lam
    if -TIE_TOL * p * p <= disc < 0:
        disc = 0.0
    if disc < 0:
        raise ComplexExponents(f"discriminant {disc} < 0 for eigenvalue {lam}")
    root = math.sqrt(disc)
    # avoid cancellation in the smaller-magnitude root
    if lam == 0:
        bp, bm = 0.0, -c.c1
    else:
        bm = -(p + root) / (2.0 * q)
        bp = c.c2 * lam / bm
    return ExponentPair(beta_minus=bm, beta_plus=bp, lam=lam)


def sphere_eigenvalue(n: int, ell: int) -> tuple[int, int]:
    """Eigenvalue and multiplicity of Delta + (n-1) on S^{n-1} at degree ``ell``."""
    if ell < 0:
        raise ValidationError("ell must be >= 0")
    lam = -ell * (ell + n - 2) + (n - 1)

    def binom(a, b):
        return math.comb(a, b) if a >= b >= 0 else 0

    mult = binom(n + ell - 1, n - 1) - binom(n + ell - 3, n - 1)
    return lam, mult


def alpha_threshold(n: int, ell: int) -> Fraction:
    """Exact rational threshold alpha_ell below which degree ``ell`` becomes effective."""
    if ell < 1:
        raise ValidationError("alpha_threshold needs ell >= 1")
    if ell == 1:
        return Fraction(1, 2)
    return Fraction(1, ell * ell + (n - 2) * ell - (n - 2))


def jacobi_count_table(params: FlowParams) -> int:
    """K from the threshold table: alpha in [alpha_{l+1}, alpha_l) gives the sum
    of multiplicities up to degree l."""
    n = params.n
    a = Fraction(params.alpha)
    ell = 1
    while True:
        lo = alpha_threshold(n, ell + 1)
        # a float within TIE_TOL of a threshold is read as the threshold itself
        if abs(a - lo) <= TIE_TOL * lo:
            a = lo
        if lo <= a < alpha_threshold(n, ell):
            break
        ell += 1
    k = Fraction(n + 2 * ell - 1, n + ell - 1) * math.comb(n + ell - 1, n - 1)
    assert k.denominator == 1
    return int(k)


def jacobi_count_enumerated(params: FlowParams, consts: DerivedConstants | None = None) -> int:
    """K by walking sphere eigenvalues until beta^+ reaches sigma.

    Exact ties beta^+ = sigma go to the smaller count, matching the half-open
    threshold intervals.
    """
    c = consts if consts is not None else derive_constants(params, check=False)
    tol = TIE_TOL * max(1.0, abs(c.sigma))
    count = 0
    ell = 0
    while True:
        lam, mult = sphere_eigenvalue(params.n, ell)
        bp = beta_exponents(lam, params, c).beta_plus
        if bp < c.sigma - tol:
            count += mult
        elif ell >= 2:
            # beta^+ grows with ell, so nothing further counts
            return count
        ell += 1


def jacobi_count_round(params: FlowParams) -> int:
    """Jacobi count for the round shrinker, cross-checked between both routes."""
    a = jacobi_count_table(params)
    b = jacobi_count_enumerated(params)
    if a != b:
        raise JacobiCountMismatch(f"table K={a} but enumeration K={b} at {params}")
    return a
