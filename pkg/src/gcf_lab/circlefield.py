"""Real functions on the unit circle, stored as samples at uniform angles.

Differentiation is spectral (exact for the trigonometric interpolant).
Pointwise products go through a 2N grid and are truncated back, which removes
aliasing of the quadratic part.
"""
from __future__ import annotations

import math

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "CircleField",
    "WeightedInner",
    "angles",
    "second_derivative_matrix",
    "second_derivative",
    "r_operator",
    "det_r",
    "inner_h",
    "weight_of",
]

MIN_SAMPLES = 32
DEFAULT_SAMPLES = 128


def _check_size(N):
    if N < MIN_SAMPLES or N & (N - 1):
        raise ValidationError(f"sample count must be a power of two >= {MIN_SAMPLES}, got {N}")


def angles(N: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(N) / N


def _wavenumbers(N):
    return np.arange(N // 2 + 1, dtype=float)


def _deriv2_samples(samples):
    """d^2/dtheta^2 along the last axis."""
    N = samples.shape[-1]
    k = _wavenumbers(N)
    return np.fft.irfft(-(k**2) * np.fft.rfft(samples, axis=-1), n=N, axis=-1)


def _deriv1_samples(samples):
    N = samples.shape[-1]
    k = _wavenumbers(N)
    mult = 1j * k
    # Nyquist coefficient of an odd derivative is dropped (its sine is zero on the grid)
    mult[-1] = 0.0
    return np.fft.irfft(mult * np.fft.rfft(samples, axis=-1), n=N, axis=-1)


def resample(samples, M):
    """Trigonometric interpolation of samples (last axis) onto M points."""
    N = samples.shape[-1]
    if M == N:
        return np.array(samples, dtype=float, copy=True)
    c = np.fft.rfft(samples, axis=-1)
    out = np.zeros(samples.shape[:-1] + (M // 2 + 1,), dtype=complex)
    if M > N:
        out[..., : N // 2 + 1] = c
        # split the old Nyquist mode symmetrically
        out[..., N // 2] *= 0.5
    else:
        out[..., : M // 2 + 1] = c[..., : M // 2 + 1]
        out[..., M // 2] = out[..., M // 2].real
    return np.fft.irfft(out, n=M, axis=-1) * (M / N)


def dealiased_product(a, b):
    """Product of two sample arrays formed on 2N points, truncated to N modes."""
    N = a.shape[-1]
    fine = resample(a, 2 * N) * resample(b, 2 * N)
    return resample(fine, N)


def second_derivative_matrix(N: int) -> np.ndarray:
    """Dense matrix of the spectral second derivative (symmetric circulant)."""
    return _deriv2_samples(np.eye(N))


class CircleField:
    """Samples of a real function at angles 2*pi*k/N, k = 0..N-1."""

    __slots__ = ("_samples", "_modes")

    def __init__(self, samples):
        s = np.array(samples, dtype=float)
        if s.ndim != 1:
            raise ValidationError("CircleField samples must be one-dimensional")
        _check_size(s.size)
        if not np.all(np.isfinite(s)):
            raise ValidationError("CircleField samples must be finite")
        s.setflags(write=False)
        self._samples = s
        self._modes = None

    @classmethod
    def from_function(cls, func, N=DEFAULT_SAMPLES):
        return cls(func(angles(N)))

    @classmethod
    def constant(cls, value, N=DEFAULT_SAMPLES):
        return cls(np.full(N, float(value)))

    @classmethod
    def from_modes(cls, modes, N=None):
        """Inverse of :attr:`modes`; ``modes`` are rfft coefficients normalized by N."""
        modes = np.asarray(modes, dtype=complex)
        if N is None:
            N = 2 * (modes.size - 1)
        return cls(np.fft.irfft(modes * N, n=N))

    @property
    def samples(self) -> np.ndarray:
        return self._samples

    @property
    def N(self) -> int:
        return self._samples.size

    @property
    def theta(self) -> np.ndarray:
        return angles(self.N)

    @property
    def modes(self) -> np.ndarray:
        """Complex Fourier coefficients c_k, k = 0..N/2, with f = sum c_k e^{ik theta} + c.c."""
        if self._modes is None:
            m = np.fft.rfft(self._samples) / self.N
            m.setflags(write=False)
            self._modes = m
        return self._modes

    def tail_energy(self) -> float:
        """Relative spectral energy carried by the top quarter of the modes."""
        e = np.abs(self.modes) ** 2
        total = e.sum()
        if total == 0.0:
            return 0.0
        return float(e[self.N // 4 + 1 :].sum() / total)

    def resample(self, M: int) -> "CircleField":
        _check_size(M)
        return CircleField(resample(self._samples, M))

    def refined(self, threshold=1e-10, max_N=4096) -> "CircleField":
        """Double N until the top-quarter spectral energy drops below ``threshold``."""
        f = self
        while f.tail_energy() > threshold and f.N < max_N:
            f = f.resample(2 * f.N)
        return f

    def derivative(self) -> "CircleField":
        return CircleField(_deriv1_samples(self._samples))

    def second_derivative(self) -> "CircleField":
        return CircleField(_deriv2_samples(self._samples))

    def __add__(self, other):
        return CircleField(self._samples + _values(other, self.N))

    __radd__ = __add__

    def __sub__(self, other):
        return CircleField(self._samples - _values(other, self.N))

    def __rsub__(self, other):
        return CircleField(_values(other, self.N) - self._samples)

    def __neg__(self):
        return CircleField(-self._samples)

    def __mul__(self, other):
        if isinstance(other, CircleField):
            return CircleField(dealiased_product(self._samples, other.samples))
        return CircleField(self._samples * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, CircleField):
            if np.any(other.samples == 0):
                raise ZeroDivisionError("division by a field with zero samples")
            return CircleField(self._samples / other.samples)
        return CircleField(self._samples / float(other))

    def power(self, p: float) -> "CircleField":
        """Pointwise real power; requires strictly positive samples."""
        if np.min(self._samples) <= 0:
            raise ValidationError("non-integer power of a field with nonpositive samples")
        return CircleField(self._samples**p)

    def sup(self) -> float:
        return float(np.max(np.abs(self._samples)))

    def min(self) -> float:
        return float(np.min(self._samples))

    def max(self) -> float:
        return float(np.max(self._samples))

    def integral(self) -> float:
        return float(2.0 * np.pi * np.mean(self._samples))

    def __call__(self, theta):
        """Evaluate the trigonometric interpolant at arbitrary angles."""
        theta = np.asarray(theta, dtype=float)
        c = self.modes
        k = _wavenumbers(self.N)
        w = np.full(k.size, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        ph = np.exp(1j * np.multiply.outer(theta, k))
        return np.real(ph @ (w * c))

    def to_json(self) -> dict:
        return {"N": self.N, "samples": self._samples.tolist()}

    @classmethod
    def from_json(cls, obj) -> "CircleField":
        f = cls(obj["samples"])
        if "N" in obj and int(obj["N"]) != f.N:
            raise ValidationError("CircleField JSON has inconsistent N")
        return f

    def __repr__(self):
        return f"CircleField(N={self.N}, min={self.min():.6g}, max={self.max():.6g})"


def _values(other, N):
    if isinstance(other, CircleField):
        if other.N != N:
            raise ValidationError(f"sample counts differ: {N} vs {other.N}")
        return other.samples
    if isinstance(other, np.ndarray) and other.ndim == 1:
        if other.size != N:
            raise ValidationError(f"sample counts differ: {N} vs {other.size}")
        return other
    return float(other)


def second_derivative(f: CircleField) -> CircleField:
    return f.second_derivative()


def r_operator(f: CircleField) -> CircleField:
    """f'' + f, the 1x1 curvature-radius tensor of a support function on S^1."""
    return CircleField(_deriv2_samples(f.samples) + f.samples)


def det_r(f, n: int = 2):
    """Determinant of r[f] with respect to the round metric.

    For n = 2 this is r[f] itself. A scalar ``f`` is read as a constant
    (radial) support function on S^{n-1}, where r[c] = c * g and the
    determinant is c**(n-1).
    """
    if isinstance(f, CircleField):
        if n != 2:
            vals = f.samples
            if np.ptp(vals) > 1e-14 * max(1.0, np.max(np.abs(vals))):
                raise ValidationError("non-radial support functions are only supported for n = 2")
            return CircleField(vals ** (n - 1))
        return r_operator(f)
    return float(f) ** (n - 1)


def weight_of(h: CircleField, alpha: float) -> CircleField:
    """The weight (det r[h])^{1/(1-alpha)} of the space L^2_h (n = 2)."""
    d = r_operator(h)
    if d.min() <= 0:
        raise ValidationError("weight requires det r[h] > 0")
    return d.power(1.0 / (1.0 - alpha))


class WeightedInner:
    """Inner product int f g weight dtheta, by the trapezoid rule."""

    def __init__(self, weight: CircleField):
        if weight.min() <= 0:
            raise ValidationError("weight must be strictly positive")
        self.weight = weight

    def __call__(self, f, g) -> float:
        fv, gv = _as_samples(f), _as_samples(g)
        return float(2.0 * np.pi * np.mean(fv * gv * self.weight.samples))

    def norm(self, f) -> float:
        return math.sqrt(self(f, f))


def _as_samples(f):
    return f.samples if isinstance(f, CircleField) else np.asarray(f, dtype=float)


def inner_h(f: CircleField, g: CircleField, h, alpha: float | None = None) -> float:
    """<f, g>_h for a shrinker profile (or raw support function plus alpha)."""
    if alpha is None:
        alpha = h.alpha
        h = h.h
    return WeightedInner(weight_of(h, alpha))(f, g)
