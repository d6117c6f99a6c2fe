"""Entire functions that the growth and dynamics layers evaluate.

Every family exposes ``value``, ``derivative``, ``log_value`` (a complex
logarithm of f), ``log_abs``, ``log_derivative`` (f'/f) and
``log_derivative_prime``.  ``value`` returns OVERFLOW instead of inf.
``value_array`` is a vectorised value used by pixel scans, where overflow
shows up as inf/nan and is treated as escape by the caller.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import product
from .errors import OVERFLOW, DomainError, ParameterError
from .product import ZeroSequence
from .schroeder import Linearizer

_LOG_MAX = 709.0


def _from_log(lv: complex):
    if lv.real > _LOG_MAX:
        return OVERFLOW
    return cmath.exp(lv)


class EntireFunction:
    validity_radius = math.inf
    n_tracts = 1

    def check(self, z):
        if abs(z) > self.validity_radius:
            raise DomainError(f"|z| = {abs(z):.6g} beyond validity radius {self.validity_radius:.6g}")

    def value(self, z):
        return _from_log(self.log_value(z))

    def log_abs(self, z):
        return self.log_value(z).real

    def log_abs_array(self, z):
        return np.array([self.log_abs(complex(w)) for w in np.ravel(z)]).reshape(np.shape(z))

    def derivative(self, z):
        lv = self.log_value(z)
        return _from_log(lv + cmath.log(self.log_derivative(z))) if self.log_derivative(z) != 0 else 0j

    def value_array(self, z):
        out = np.empty(np.shape(z), dtype=complex)
        flat = out.reshape(-1)
        for i, w in enumerate(np.ravel(z)):
            v = self.value(complex(w))
            flat[i] = complex(np.inf, 0.0) if v is OVERFLOW else v
        return out


@dataclass(frozen=True)
class ExpFamily(EntireFunction):
    scale: complex = 1.0

    def __post_init__(self):
        if self.scale == 0:
            raise ParameterError("scale must be non-zero", flag="--scale")

    def log_value(self, z):
        return complex(z) + cmath.log(self.scale)

    def log_derivative(self, z):
        return 1.0 + 0j

    def log_derivative_prime(self, z):
        return 0j

    def derivative(self, z):
        return self.value(z)

    def value_array(self, z):
        with np.errstate(over="ignore", invalid="ignore"):
            return self.scale * np.exp(z)

    def log_abs_array(self, z):
        return np.real(z) + math.log(abs(self.scale))


@dataclass(frozen=True)
class SinFamily(EntireFunction):
    alpha: complex = 1.0
    beta_s: complex = 0.0

    def __post_init__(self):
        if self.alpha == 0:
            raise ParameterError("alpha must be non-zero", flag="--alpha")

    n_tracts = 2

    def _w(self, z):
        return self.alpha * complex(z) + self.beta_s

    def log_value(self, z):
        w = self._w(z)
        if abs(w.imag) < 20:
            s = cmath.sin(w)
            if s == 0:
                return complex(-math.inf, 0.0)
            return cmath.log(s)
        if w.imag > 0:
            # sin w = e^{-iw} (1 - e^{2iw}) / (-2i)
            return -1j * w + cmath.log(1 - cmath.exp(2j * w)) - cmath.log(-2j)
        return 1j * w + cmath.log(1 - cmath.exp(-2j * w)) - cmath.log(2j)

    def value(self, z):
        w = self._w(z)
        if abs(w.imag) > _LOG_MAX:
            return OVERFLOW
        return cmath.sin(w)

    def derivative(self, z):
        w = self._w(z)
        if abs(w.imag) > _LOG_MAX:
            return OVERFLOW
        return self.alpha * cmath.cos(w)

    def log_derivative(self, z):
        w = self._w(z)
        return self.alpha * cmath.cos(w) / cmath.sin(w) if abs(w.imag) < 20 else self.alpha * (-1j if w.imag > 0 else 1j) * (
            (1 + cmath.exp(2j * w * (1 if w.imag > 0 else -1))) / (1 - cmath.exp(2j * w * (1 if w.imag > 0 else -1))))

    def log_derivative_prime(self, z):
        w = self._w(z)
        if abs(w.imag) > 300:
            return 0j
        return -(self.alpha**2) / cmath.sin(w) ** 2

    def value_array(self, z):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.sin(self.alpha * z + self.beta_s)

    def log_abs_array(self, z):
        w = self.alpha * np.asarray(z) + self.beta_s
        y = np.abs(w.imag)
        # |sin w|^2 = sin^2 x + sinh^2 y
        with np.errstate(divide="ignore", over="ignore"):
            small = 0.5 * np.log(np.sin(w.real) ** 2 + np.sinh(np.minimum(y, 300.0)) ** 2)
        q = np.exp(-2 * np.minimum(y, 1e3))
        with np.errstate(divide="ignore"):
            big = y - math.log(2.0) + 0.5 * np.log1p(-2 * np.cos(2 * w.real) * q + q * q)
        return np.where(y < 300.0, small, big)


@dataclass(frozen=True)
class MittagLeffler(EntireFunction):
    """E_alpha(z) = sum z^n / Gamma(alpha n + 1), by series for |z| <= 50."""

    alpha: float = 1.0
    validity_radius = 50.0

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise ParameterError("Mittag-Leffler alpha must lie in (0, 2)", flag="--alpha")

    def _series(self, z, order):
        """sum of n^(order) z^(n-order) / Gamma(alpha n + 1) (order 0, 1 or 2)."""
        self.check(z)
        a = self.alpha
        if z == 0:
            return complex([1.0, 1.0 / math.gamma(a + 1.0), 2.0 / math.gamma(2 * a + 1.0)][order])
        lz = cmath.log(z)
        rz = abs(z)
        # the sum may be as small as exp(-peak), so stop well below that
        n_max = 8
        peak = -math.inf
        while True:
            lt = n_max * math.log(rz) - math.lgamma(a * n_max + 1.0)
            peak = max(peak, lt)
            if lt < -max(peak, 0.0) - 45.0 and n_max > 10:
                break
            n_max += 8
        n = np.arange(order, n_max)
        coef = np.ones(len(n))
        if order >= 1:
            coef = coef * n
        if order == 2:
            coef = coef * (n - 1)
        logmag = np.log(np.maximum(coef, 1e-300)) + (n - order) * math.log(rz) - np.array([math.lgamma(a * k + 1.0) for k in n])
        big = logmag.max()
        total_abs_log = big + math.log(np.exp(logmag - big).sum())
        if big < 700.0:
            terms = coef * np.exp((n - order) * lz - np.array([math.lgamma(a * k + 1.0) for k in n]))
            s = complex(math.fsum(terms.real), math.fsum(terms.imag))
            if s != 0 and total_abs_log - math.log(abs(s)) < math.log(1e5):
                return s
        # cancellation or overflow: redo in extended precision
        dps = 30 + int(2.0 * max(total_abs_log, 0.0) / math.log(10.0))
        with mpmath.workdps(dps):
            zz = mpmath.mpc(z)
            acc = mpmath.mpf(0)
            for k in range(order, n_max):
                c = 1 if order == 0 else (k if order == 1 else k * (k - 1))
                acc += c * zz ** (k - order) / mpmath.gamma(a * k + 1)
            return acc

    def _as_complex(self, v):
        if isinstance(v, complex):
            return v
        if abs(v) > mpmath.mpf(10) ** 307:
            return OVERFLOW
        return complex(v)

    def value(self, z):
        return self._as_complex(self._series(complex(z), 0))

    def derivative(self, z):
        return self._as_complex(self._series(complex(z), 1))

    def log_value(self, z):
        v = self._series(complex(z), 0)
        if isinstance(v, complex):
            return cmath.log(v)
        return complex(mpmath.log(v))

    def log_derivative(self, z):
        v, d = self._series(complex(z), 0), self._series(complex(z), 1)
        return complex(mpmath.mpc(d) / mpmath.mpc(v))

    def log_derivative_prime(self, z):
        v, d, d2 = (mpmath.mpc(self._series(complex(z), k)) for k in range(3))
        return complex(d2 / v - (d / v) ** 2)


@dataclass(frozen=True)
class CuiProduct(EntireFunction):
    zeros: ZeroSequence = field(repr=False)

    @property
    def lin(self) -> Linearizer:
        return self.zeros.lin

    @property
    def validity_radius(self):
        return self.zeros.r_max_valid

    def log_value(self, z):
        return product.log_product(self.zeros, complex(z))

    def log_abs(self, z):
        return product.log_abs_product(self.zeros, complex(z)).value

    def log_derivative(self, z):
        return product.log_derivative(self.zeros, complex(z))

    def log_derivative_prime(self, z):
        return product.log_derivative_prime(self.zeros, complex(z))

    def derivative(self, z):
        lv = self.log_value(z)
        ld = self.log_derivative(z)
        if ld == 0:
            return 0j
        return _from_log(lv + cmath.log(ld))


@dataclass(frozen=True)
class Scaled(EntireFunction):
    """z -> scale * inner(z)."""

    scale: complex
    inner: EntireFunction

    def __post_init__(self):
        if self.scale == 0:
            raise ParameterError("scale must be non-zero", flag="--postscale")

    @property
    def validity_radius(self):
        return self.inner.validity_radius

    @property
    def n_tracts(self):
        return self.inner.n_tracts

    def log_value(self, z):
        return self.inner.log_value(z) + cmath.log(self.scale)

    def log_abs(self, z):
        return self.inner.log_abs(z) + math.log(abs(self.scale))

    def log_abs_array(self, z):
        return self.inner.log_abs_array(z) + math.log(abs(self.scale))

    def log_derivative(self, z):
        return self.inner.log_derivative(z)

    def log_derivative_prime(self, z):
        return self.inner.log_derivative_prime(z)

    def derivative(self, z):
        d = self.inner.derivative(z)
        return OVERFLOW if d is OVERFLOW else self.scale * d

    def value_array(self, z):
        with np.errstate(over="ignore", invalid="ignore"):
            return self.scale * self.inner.value_array(z)


@dataclass(frozen=True)
class Prescaled(EntireFunction):
    """z -> inner(scale * z)."""

    scale: complex
    inner: EntireFunction

    def __post_init__(self):
        if self.scale == 0:
            raise ParameterError("scale must be non-zero", flag="--prescale")

    @property
    def validity_radius(self):
        return self.inner.validity_radius / abs(self.scale)

    @property
    def n_tracts(self):
        return self.inner.n_tracts

    def log_value(self, z):
        return self.inner.log_value(self.scale * z)

    def log_abs(self, z):
        return self.inner.log_abs(self.scale * z)

    def log_abs_array(self, z):
        return self.inner.log_abs_array(self.scale * np.asarray(z))

    def log_derivative(self, z):
        return self.scale * self.inner.log_derivative(self.scale * z)

    def log_derivative_prime(self, z):
        return self.scale**2 * self.inner.log_derivative_prime(self.scale * z)

    def value(self, z):
        return self.inner.value(self.scale * z)

    def derivative(self, z):
        d = self.inner.derivative(self.scale * z)
        return OVERFLOW if d is OVERFLOW else self.scale * d

    def value_array(self, z):
        return self.inner.value_array(self.scale * np.asarray(z))


@dataclass(frozen=True)
class PowerPrecompose(EntireFunction):
    """h(z) = inner(z**N)."""

    N: int
    inner: EntireFunction

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError("N must be a positive integer", flag="--power")

    @property
    def validity_radius(self):
        return self.inner.validity_radius ** (1.0 / self.N)

    @property
    def n_tracts(self):
        return self.N * self.inner.n_tracts

    def log_value(self, z):
        return self.inner.log_value(complex(z) ** self.N)

    def log_abs(self, z):
        return self.inner.log_abs(complex(z) ** self.N)

    def log_abs_array(self, z):
        return self.inner.log_abs_array(np.asarray(z) ** self.N)

    def value(self, z):
        return self.inner.value(complex(z) ** self.N)

    def derivative(self, z):
        z = complex(z)
        d = self.inner.derivative(z**self.N)
        if d is OVERFLOW:
            return OVERFLOW
        return self.N * z ** (self.N - 1) * d

    def log_derivative(self, z):
        z = complex(z)
        return self.N * z ** (self.N - 1) * self.inner.log_derivative(z**self.N)

    def log_derivative_prime(self, z):
        z = complex(z)
        N = self.N
        w = z**N
        first = N * (N - 1) * z ** (N - 2) * self.inner.log_derivative(w) if N > 1 else 0j
        return first + N * N * z ** (2 * N - 2) * self.inner.log_derivative_prime(w)

    def value_array(self, z):
        return self.inner.value_array(np.asarray(z) ** self.N)


def evaluate(spec: EntireFunction, z):
    spec.check(complex(z))
    return spec.value(complex(z))


def evaluate_derivative(spec: EntireFunction, z):
    spec.check(complex(z))
    return spec.derivative(complex(z))
