"""Iterated-exponential magnitudes and the E^k-indexed series.

A :class:`TowerNumber` ``(m, y)`` stands for E^m(y) with E = exp and the
mantissa y kept in [1, e).  exp and log are exact level shifts, so numbers
like E^40(1) can be compared and fed to monotone functions without ever
being materialised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering
from typing import Callable, Sequence

import numpy as np

from .errors import OVERFLOW, DomainError, ParameterError
from .schroeder import Linearizer

_LOG_MAX = math.log(np.finfo(float).max)


@total_ordering
@dataclass(frozen=True)
class TowerNumber:
    level: int
    mantissa: float

    def __post_init__(self):
        if self.level < 0 or not (1.0 <= self.mantissa < math.e):
            raise ParameterError(f"not in normal form: ({self.level}, {self.mantissa!r})")

    def __lt__(self, other):
        if not isinstance(other, TowerNumber):
            return NotImplemented
        return (self.level, self.mantissa) < (other.level, other.mantissa)

    def log_value(self):
        """log of the represented value, or OVERFLOW if that is itself too big."""
        if self.level == 0:
            return math.log(self.mantissa)
        return tower_to_real(TowerNumber(self.level - 1, self.mantissa))


def tower_from_real(x: float) -> TowerNumber:
    x = float(x)
    if not x >= 1.0:
        raise DomainError(f"tower numbers represent values >= 1, got {x!r}")
    if math.isinf(x):
        raise DomainError("cannot build a tower number from infinity")
    level = 0
    while x >= math.e:
        x = math.log(x)
        level += 1
    return TowerNumber(level, x)


def tower_to_real(t: TowerNumber):
    """Value of t as a float, or OVERFLOW (never inf)."""
    v = t.mantissa
    for _ in range(t.level):
        if v > _LOG_MAX:
            return OVERFLOW
        v = math.exp(v)
    return v


def tower_exp(t: TowerNumber) -> TowerNumber:
    return TowerNumber(t.level + 1, t.mantissa)


def tower_log(t: TowerNumber) -> TowerNumber:
    if t.level < 1:
        raise DomainError("tower_log needs a value >= e")
    return TowerNumber(t.level - 1, t.mantissa)


def tower_affine(t: TowerNumber, scale: float, shift: float = 0.0) -> TowerNumber:
    """scale*value + shift; only defined for values that fit a double."""
    v = tower_to_real(t)
    if v is OVERFLOW:
        raise DomainError("affine maps are only supported below double overflow")
    return tower_from_real(scale * v + shift)


def e_iterate(k: int, x: float = 0.0):
    """E^k(x) as a TowerNumber (x >= 0)."""
    if x < 0:
        raise DomainError("e_iterate expects x >= 0")
    if x >= 1.0:
        t = tower_from_real(x)
        return TowerNumber(t.level + k, t.mantissa)
    # climb by real exponentials until the value reaches [1, e)
    v = x
    while v < 1.0 and k > 0:
        v = math.exp(v)
        k -= 1
    if v < 1.0:
        raise DomainError("E^k(x) is below 1 and has no tower representation")
    t = tower_from_real(v)
    return TowerNumber(t.level + k, t.mantissa)


# -- epsilon along E-iterates ---------------------------------------------


def sandwich_shift(beta: float) -> float:
    """The constant c = log(2/beta) + 1 of the E / E_beta comparison."""
    return math.log(2.0 / beta) + 1.0


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty bracket [{self.lo}, {self.hi}]")

    def __contains__(self, v):
        return self.lo <= v <= self.hi


def _bracket_constants(lin: Linearizer, x: float):
    if not x > lin.xi:
        raise DomainError(f"epsilon_bracket needs x > xi = {lin.xi}")
    x2 = (x + sandwich_shift(lin.beta)) / lin.beta
    return math.log(lin.lam), math.log(lin.phi(x)), math.log(lin.phi(x2))


def epsilon_bracket(lin: Linearizer, k: int, x: float) -> Bracket:
    """Rigorous enclosure of eps(E^k(x)).

    hi comes from E^k(x) >= E_beta^k(x); lo from E_beta^k(x2) >= E^k(x)
    with x2 = (x + c)/beta.  Both reduce to the closed form
    1/(k log lambda + log Phi(.)) through the Schroeder equation.
    """
    if k < 1:
        raise ParameterError("k must be a positive integer")
    loglam, lp_x, lp_x2 = _bracket_constants(lin, x)
    return Bracket(1.0 / (k * loglam + lp_x2), 1.0 / (k * loglam + lp_x))


def epsilon_bracket_array(lin: Linearizer, ks, x: float):
    ks = np.asarray(ks, dtype=float)
    loglam, lp_x, lp_x2 = _bracket_constants(lin, x)
    return 1.0 / (ks * loglam + lp_x2), 1.0 / (ks * loglam + lp_x)


def epsilon_direct(lin: Linearizer, k: int, x: float):
    """eps(E^k(x)) by direct evaluation when log E^k(x) fits a double, else None."""
    t = e_iterate(k, x)
    s = t.log_value()
    if s is OVERFLOW:
        return None
    return float(lin.epsilon_log(s))


# -- series ----------------------------------------------------------------

KINDS = ("geometric_phi", "log_power", "epsilon_E_iterates", "theta0_E_iterates", "inverse_A_E_iterates")


@dataclass(frozen=True)
class SeriesSpec:
    """Which positive series to sum.

    ``theta0`` maps an eps-value to theta_0 (must be increasing in eps, so
    theta_0 decreases in r); default 2*eps.  ``A`` maps a TowerNumber to
    A(E^k(x0)) for the inverse_A kind and must be increasing.
    """

    kind: str
    x0: float = 20.0
    delta: float = 0.0
    theta0: Callable[[float], float] | None = None
    A: Callable[[TowerNumber], float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown series kind {self.kind!r}; expected one of {KINDS}", flag="--kind")
        if self.delta < 0:
            raise ParameterError("delta must be >= 0", flag="--delta")
        if self.kind == "inverse_A_E_iterates" and self.A is None:
            raise ParameterError("inverse_A_E_iterates needs an A function")


@dataclass
class PartialSums:
    terms_lo: np.ndarray
    terms_hi: np.ndarray
    sums_lo: np.ndarray
    sums_hi: np.ndarray
    closed_form: float | None = None

    @property
    def exact(self):
        return np.array_equal(self.terms_lo, self.terms_hi)

    def to_csv(self, fmt=repr):
        lines = ["k,term_lo,term_hi,partial_lo,partial_hi"]
        for k in range(len(self.terms_lo)):
            vals = (self.terms_lo[k], self.terms_hi[k], self.sums_lo[k], self.sums_hi[k])
            lines.append(f"{k + 1}," + ",".join(fmt(float(v)) for v in vals))
        return "\n".join(lines) + "\n"


def _cumsum(terms):
    # sequential float accumulation; fixed order, monotone for positive terms
    return np.cumsum(terms)


def partial_sums(spec: SeriesSpec, lin: Linearizer, K: int) -> PartialSums:
    if K < 1:
        raise ParameterError("K must be >= 1", flag="--k")
    k = np.arange(1, K + 1, dtype=float)
    closed = None
    if spec.kind == "geometric_phi":
        p0 = lin.phi(spec.x0)
        terms = 1.0 / (lin.lam**k * p0)
        lo = hi = terms
        closed = 1.0 / ((lin.lam - 1.0) * p0)
    elif spec.kind == "log_power":
        c = math.log(lin.phi(spec.x0))
        lo = hi = 1.0 / (k * math.log(lin.lam) + c) ** (1.0 + spec.delta)
    elif spec.kind in ("epsilon_E_iterates", "theta0_E_iterates"):
        lo, hi = epsilon_bracket_array(lin, k, spec.x0)
        if spec.kind == "theta0_E_iterates":
            g = spec.theta0 or (lambda e: 2.0 * e)
            _check_increasing(g, lo[-1], hi[0])
            lo, hi = np.vectorize(g)(lo), np.vectorize(g)(hi)
    else:
        vals = np.array([spec.A(e_iterate(int(j), spec.x0)) for j in k])
        if np.any(vals <= 0):
            raise ParameterError("A must be positive along the E-iterates")
        lo = hi = 1.0 / vals
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return PartialSums(lo, hi, _cumsum(lo), _cumsum(hi), closed)


def _check_increasing(g, a, b, probes=9):
    xs = np.linspace(a, b, probes) if b > a else np.array([a])
    ys = [g(float(x)) for x in xs]
    if any(y <= 0 for y in ys) or any(y2 < y1 for y1, y2 in zip(ys, ys[1:])):
        raise ParameterError("theta_0 must be positive and decreasing in r (increasing in eps)", flag="--theta0")


# -- verdict -----------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    kind: str  # "converged", "diverging" or "inconclusive"
    limit_estimate: float | None = None
    rate_estimate: float | None = None
    tail_exponent: float | None = None

    def line(self):
        if self.kind == "diverging":
            return f"verdict=diverging rate={self.rate_estimate!r}"
        if self.kind == "converged":
            return f"verdict=converged limit={self.limit_estimate!r}"
        return "verdict=inconclusive"


def divergence_verdict(sums: Sequence[float], window: int) -> Verdict:
    """Classify a sequence of partial sums S_1..S_n of a positive series.

    The last 2*window increments d_k are inspected (k spans a factor of at
    least 3 since n >= 3*window):

    * converged if the last window of increments adds less than 1e-9*S, or
      the increments decay geometrically, or like k**-p with p >= 1.25 (the
      limit is then extrapolated with the power-law tail);
    * diverging if p is within 0.15 of 1 and S_k fits a + c*log k with
      residual below 10% of the block's growth; c is the rate per e-fold;
    * inconclusive otherwise.  This is evidence, not proof.
    """
    s = np.asarray(sums, dtype=float)
    n = len(s)
    if window < 2 or n < 3 * window:
        raise ParameterError(f"need at least 3*window = {3 * window} partial sums, got {n}", flag="--window")
    d = np.diff(s, prepend=0.0)
    total = s[-1]
    if s[-1] - s[-1 - window] < 1e-9 * abs(total):
        return Verdict("converged", limit_estimate=float(total))
    idx = np.arange(n - 2 * window, n)
    k = idx + 1.0
    dd = d[idx]
    if np.any(dd <= 0):
        return Verdict("inconclusive")
    logd = np.log(dd)
    # geometric decay: log d linear in k
    A = np.vstack([np.ones_like(k), k]).T
    coef, res, *_ = np.linalg.lstsq(A, logd, rcond=None)
    fit = A @ coef
    if coef[1] < 0 and np.max(np.abs(fit - logd)) < 0.05 * abs(coef[1]) * (k[-1] - k[0]):
        q = math.exp(coef[1])
        if q < 0.999:
            return Verdict("converged", limit_estimate=float(total + dd[-1] * q / (1 - q)))
    # power-law decay: log d linear in log k
    B = np.vstack([np.ones_like(k), np.log(k)]).T
    coef, *_ = np.linalg.lstsq(B, logd, rcond=None)
    p = -coef[1]
    if p >= 1.25:
        limit = total + dd[-1] * k[-1] / (p - 1.0)
        return Verdict("converged", limit_estimate=float(limit), tail_exponent=float(p))
    if abs(p - 1.0) < 0.15:
        C = np.vstack([np.ones_like(k), np.log(k)]).T
        c2, *_ = np.linalg.lstsq(C, s[idx], rcond=None)
        resid = np.sqrt(np.mean((C @ c2 - s[idx]) ** 2))
        growth = s[idx][-1] - s[idx][0]
        if c2[1] > 0 and growth > 0 and resid < 0.1 * growth:
            return Verdict("diverging", rate_estimate=float(c2[1]), tail_exponent=float(p))
    return Verdict("inconclusive", tail_exponent=float(p))
