"""Growth quantities of entire functions: M(r), theta(r), T(r) and the
integral conditions built from them.

All integrals over the radius use nodes uniform in log t, since every
integrand carries the weight dt/t.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import OVERFLOW, ContourError, DomainError, NumericError, ParameterError
from .functions import EntireFunction, ExpFamily, evaluate, evaluate_derivative  # noqa: F401
from .product import Circle, count_zeros_argument_principle
from .schroeder import Linearizer

TWO_PI = 2.0 * math.pi
THETA_ANGLE_TOL = TWO_PI / 1e6
C_EXP_MIN = 63.0 / 65.0


def circle_log_abs(spec: EntireFunction, r: float, t, workers: int = 1):
    """log|f(r e^{it})| at the angles ``t`` (fixed output order for any worker count)."""
    t = np.asarray(t, dtype=float)
    spec.check(complex(r))
    z = r * np.exp(1j * t)
    if workers <= 1 or z.size < 2 * workers:
        return np.asarray(spec.log_abs_array(z), dtype=float)
    chunks = np.array_split(z, workers)
    with ThreadPoolExecutor(workers) as ex:
        parts = list(ex.map(spec.log_abs_array, chunks))
    return np.concatenate(parts).astype(float)


# -- maximum modulus -----------------------------------------------------------


@dataclass(frozen=True)
class MaxModulus:
    log_value: float
    angle: float
    closed_form_log: float | None = None

    @property
    def value(self):
        return OVERFLOW if self.log_value > 709.0 else math.exp(self.log_value)


def _golden_max(fn, a, b, tol=1e-12):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fn(d)
    return (c, fc) if fc > fd else (d, fd)


def max_modulus(spec: EntireFunction, r: float, n_samples: int = 256, workers: int = 1) -> MaxModulus:
    """Circle scan, then golden-section refinement around the three best angles."""
    if n_samples < 64:
        raise ParameterError("n_samples must be at least 64", flag="--samples")
    if r <= 0:
        raise ParameterError("r must be positive", flag="--r")
    t = TWO_PI * np.arange(n_samples) / n_samples
    u = circle_log_abs(spec, r, t, workers)
    if not np.any(np.isfinite(u)):
        raise NumericError("log|f| is not finite anywhere on the circle", {"r": r})
    h = TWO_PI / n_samples
    best = (-math.inf, 0.0)
    for i in np.argsort(np.where(np.isfinite(u), u, -np.inf))[::-1][:3]:
        ang, val = _golden_max(lambda s: float(circle_log_abs(spec, r, [s])[0]), t[i] - h, t[i] + h)
        val = max(val, u[i]) if math.isfinite(val) else u[i]
        if val > best[0]:
            best = (val, ang if val != u[i] else t[i])
    closed = None
    if isinstance(spec, ExpFamily):
        closed = r + math.log(abs(spec.scale))
    return MaxModulus(float(best[0]), float(best[1] % TWO_PI), closed)


# -- theta(r) ------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaResult:
    theta: float
    complement: float
    crossings: tuple
    tangential: tuple = ()


def _crossings(fn, t, u, tol):
    """Refine every sign change of u between consecutive samples (cyclically)."""
    n = len(t)
    out = []
    for i in range(n):
        j = (i + 1) % n
        if (u[i] < 0) != (u[j] < 0):
            a, b = t[i], t[i] + TWO_PI / n
            neg_a = u[i] < 0
            while b - a > tol:
                m = 0.5 * (a + b)
                if (fn(m) < 0) == neg_a:
                    a = m
                else:
                    b = m
            out.append((0.5 * (a + b), not (u[j] < 0)))  # (angle, positive after)
    return out


def _arc_split(crossings, u0_negative):
    """Lengths of the negative and non-negative parts of the circle."""
    if not crossings:
        return (TWO_PI, 0.0) if u0_negative else (0.0, TWO_PI)
    neg, pos = [], []
    k = len(crossings)
    for idx, (ang, positive_after) in enumerate(crossings):
        nxt = crossings[(idx + 1) % k][0] + (TWO_PI if idx == k - 1 else 0.0)
        (pos if positive_after else neg).append(nxt - ang)
    return math.fsum(neg), math.fsum(pos)


def theta_measure(spec: EntireFunction, r: float, r0: float, n_samples: int = 256,
                  workers: int = 1, tangential_tol: float = 1e-2) -> ThetaResult:
    """Measure of {t : |f(r e^{it})| < r0}."""
    if r0 <= 0:
        raise ParameterError("r0 must be positive", flag="--r0")
    if n_samples < 256:
        raise ParameterError("n_samples must be at least 256", flag="--samples")
    log_r0 = math.log(r0)
    t = TWO_PI * np.arange(n_samples) / n_samples
    u = circle_log_abs(spec, r, t, workers) - log_r0
    u = np.where(np.isnan(u), np.inf, u)
    cr = _crossings(lambda s: float(circle_log_abs(spec, r, [s])[0]) - log_r0, t, u, THETA_ANGLE_TOL)
    neg, pos = _arc_split(cr, u[0] < 0)
    au = np.abs(u)
    tang = tuple(float(t[i]) for i in range(n_samples)
                 if au[i] < tangential_tol and au[i] <= au[i - 1] and au[i] <= au[(i + 1) % n_samples]
                 and (u[i - 1] < 0) == (u[i] < 0) == (u[(i + 1) % n_samples] < 0))
    return ThetaResult(neg, pos, tuple(a for a, _ in cr), tang)


# -- Nevanlinna characteristic ---------------------------------------------------


def _log_abs_shift(spec: EntireFunction, z: complex, a: complex) -> float:
    """log|f(z) - a|."""
    if a == 0:
        return spec.log_abs(z)
    v = spec.value(z)
    if v is OVERFLOW:
        return spec.log_abs(z)
    d = abs(v - a)
    return math.log(d) if d > 0 else -math.inf


def _circle_mean_positive(fn, n_samples=512):
    """(1/2pi) * integral of max(0, fn(t)) over [0, 2pi), split at the sign changes."""
    t = TWO_PI * np.arange(n_samples) / n_samples
    u = np.array([fn(s) for s in t])
    u = np.where(np.isnan(u), -np.inf, u)
    cr = []
    for i in range(n_samples):
        a, b = t[i], t[i] + TWO_PI / n_samples
        ua, ub = u[i], u[(i + 1) % n_samples]
        if (ua > 0) != (ub > 0):
            g = lambda s: fn(s) if math.isfinite(fn(s)) else -1e300
            cr.append(optimize.brentq(g, a, b, xtol=1e-15, rtol=1e-15) if math.isfinite(ua) and math.isfinite(ub)
                      else 0.5 * (a + b))
    if not cr:
        if u[0] <= 0:
            return 0.0
        pieces = [(0.0, TWO_PI)]
    else:
        pieces = []
        k = len(cr)
        for idx in range(k):
            lo, hi = cr[idx], cr[(idx + 1) % k] + (TWO_PI if idx == k - 1 else 0.0)
            if fn(0.5 * (lo + hi)) > 0:
                pieces.append((lo, hi))
    total = []
    for lo, hi in pieces:
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, _ = integrate.quad(lambda s: max(0.0, fn(s)), lo, hi, epsabs=1e-11, epsrel=1e-12, limit=400)
            except integrate.IntegrationWarning as exc:
                raise NumericError(f"circle quadrature did not converge: {exc}", {"arc": (lo, hi)}) from exc
        total.append(val)
    return math.fsum(total) / TWO_PI


def nevanlinna_T(spec: EntireFunction, r: float) -> float:
    """T(r, f) = mean of log+|f| over the circle of radius r."""
    spec.check(complex(r))
    return _circle_mean_positive(lambda s: spec.log_abs(r * complex(math.cos(s), math.sin(s))))


def proximity(spec: EntireFunction, r: float, a: complex) -> float:
    """m(r, 1/(f - a)) = mean of log+ 1/|f - a| over the circle."""
    spec.check(complex(r))
    return _circle_mean_positive(lambda s: -_log_abs_shift(spec, r * complex(math.cos(s), math.sin(s)), complex(a)))


def _count(spec, t, a):
    for k in range(8):
        try:
            return count_zeros_argument_principle(spec, Circle(0j, t * (1.0 + 1e-9 * k)), a=a)
        except ContourError:
            continue
    raise ContourError(f"could not place a contour near radius {t}")


def a_point_radii(spec: EntireFunction, r: float, a: complex = 0.0, t_min: float | None = None,
                  grid: int = 32, rel_tol: float = 1e-8):
    """Jump radii of n(t, a) on (t_min, r], located by bisection on the counts."""
    t_min = 1e-6 * r if t_min is None else t_min
    ts = np.geomspace(t_min, r, grid)
    ns = [_count(spec, t, a) for t in ts]
    jumps = []

    def split(t0, n0, t1, n1):
        if n1 == n0:
            return
        if n1 < n0:
            raise NumericError("argument-principle counts are not monotone in the radius", {"t": (t0, t1)})
        if t1 - t0 <= rel_tol * t1:
            jumps.append((math.sqrt(t0 * t1), n1 - n0))
            return
        m = math.sqrt(t0 * t1)
        try:
            nm = _count(spec, m, a)
        except NumericError:
            # contour too close to an a-point for the quadrature: this is the jump
            jumps.append((m, n1 - n0))
            return
        split(t0, n0, m, nm)
        split(m, nm, t1, n1)

    for i in range(len(ts) - 1):
        split(ts[i], ns[i], ts[i + 1], ns[i + 1])
    return ns[0], jumps


def nevanlinna_N(spec: EntireFunction, r: float, a: complex = 0.0, t_min: float | None = None) -> float:
    """N(r, a) = int_0^r (n(t,a) - n(0,a)) dt/t + n(0,a) log r."""
    n0, jumps = a_point_radii(spec, r, a, t_min)
    return math.fsum([m * math.log(r / t) for t, m in jumps] + [n0 * math.log(r)])


# -- integral conditions ---------------------------------------------------------


@dataclass(frozen=True)
class ELResult:
    r: np.ndarray
    values: np.ndarray
    liminf: np.ndarray


def _theta_on_log_nodes(spec, u_nodes, r0, n_samples, workers):
    return np.array([theta_measure(spec, math.exp(u), r0, n_samples, workers).theta for u in u_nodes])


def _log_nodes(u0, targets, per_unit, grading=24):
    """Nodes uniform in u = log t from u0 through every target, each target hit exactly.

    The first cell is graded geometrically towards u0: at t = 1 the level
    curve can be tangent to the circle and theta then has a square-root
    corner there.
    """
    nodes = [u0]
    for u1 in targets:
        m = max(1, int(math.ceil((u1 - nodes[-1]) * per_unit)))
        nodes.extend(np.linspace(nodes[-1], u1, m + 1)[1:])
    h = nodes[1] - u0
    graded = u0 + h * 0.5 ** np.arange(grading, 0, -1)
    return np.concatenate([[u0], graded, nodes[1:]])


def el_condition(spec: EntireFunction, r_grid, r0: float, nodes_per_unit: int = 32,
                 n_samples: int = 256, workers: int = 1) -> ELResult:
    """(1/log r) * int_1^r theta(t) dt/t at each grid radius, with the running liminf proxy."""
    r = np.asarray(r_grid, dtype=float)
    if r.size < 2 or np.any(np.diff(r) <= 0):
        raise ParameterError("r grid must be strictly increasing with at least 2 points", flag="--r-min/--r-max")
    if r[0] <= 1.0:
        raise ParameterError("r grid must lie above 1", flag="--r-min")
    targets = np.log(r)
    u = _log_nodes(0.0, targets, nodes_per_unit)
    th = _theta_on_log_nodes(spec, u, r0, n_samples, workers)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (th[1:] + th[:-1]) * np.diff(u))])
    idx = np.searchsorted(u, targets)
    vals = cum[idx] / targets
    liminf = np.minimum.accumulate(vals[::-1])[::-1]
    return ELResult(r, vals, liminf)


@dataclass(frozen=True)
class CuiCondition:
    lhs: float
    rhs: float
    lower: float
    note: str = ""

    @property
    def holds(self):
        return self.lhs >= self.rhs


def cui_condition(spec: EntireFunction, r: float, c_exp: float, A: Callable[[float], float],
                  r0: float, nodes_per_unit: int = 32, n_samples: int = 256, workers: int = 1) -> CuiCondition:
    """(1/log r) * int_{r^c}^r theta dt/t against 1/A(r)."""
    if not (C_EXP_MIN <= c_exp < 1.0):
        raise ParameterError(f"c must satisfy 63/65 <= c < 1, got {c_exp}",
                             flag="--c")
    if r <= 1.0:
        raise ParameterError("r must exceed 1", flag="--r")
    lower = r**c_exp
    note = ""
    if lower < 1.0:
        lower, note = 1.0, "lower limit r^c < 1 clamped to 1"
    u = _log_nodes(math.log(lower), [math.log(r)], nodes_per_unit)
    th = _theta_on_log_nodes(spec, u, r0, n_samples, workers)
    lhs = float(integrate.trapezoid(th, u)) / math.log(r)
    return CuiCondition(lhs, 1.0 / A(r), lower, note)


def tsuji_integral(beta_samples: Sequence[tuple], r: float, alpha: float, r1: float | None = None) -> float:
    """pi * int dt/(t beta(t)) by the trapezoid rule in log t."""
    if not (0.0 < alpha < 1.0):
        raise ParameterError("alpha must lie in (0, 1)", flag="--alpha")
    arr = np.asarray(beta_samples, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise ParameterError("need at least two (t, beta) samples")
    t, b = arr[:, 0], arr[:, 1]
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ParameterError("sample radii must be positive and increasing")
    if r1 is not None and abs(t[0] - r1) > 1e-12 * r1:
        raise ParameterError("first sample must sit at r1", flag="--r1")
    if t[-1] > alpha * r * (1 + 1e-12):
        raise ParameterError("samples must stop at alpha * r", flag="--alpha")
    if np.any(b <= 0):
        raise DomainError("beta(t) must be positive at every sample")
    return math.pi * float(integrate.trapezoid(1.0 / b, np.log(t)))


@dataclass(frozen=True)
class TsujiCheck:
    loglog_MG: float
    integral: float

    @property
    def gap(self):
        return self.loglog_MG - self.integral


def tsuji_check(spec: EntireFunction, r: float, r0: float, alpha: float, r1: float,
                nodes_per_unit: int = 32, n_samples: int = 256) -> TsujiCheck:
    """Compare log log M_G(r) with pi * int_{r1}^{alpha r} dt/(t beta(t)) for a one-tract function.

    beta(t) is the angular measure of {|f| > r0} on the circle of radius t.
    """
    if spec.n_tracts != 1:
        raise ParameterError("tract-restricted check needs a function with a single tract", flag="--family")
    u = _log_nodes(math.log(r1), [math.log(alpha * r)], nodes_per_unit)
    beta = np.array([theta_measure(spec, math.exp(x), r0, n_samples).complement for x in u])
    integral = tsuji_integral(list(zip(np.exp(u), beta)), r, alpha, r1)
    lm = max_modulus(spec, r).log_value
    if lm <= 0:
        raise DomainError("log M(r) must be positive for log log M")
    return TsujiCheck(math.log(lm), integral)


# -- growth report ---------------------------------------------------------------


@dataclass(frozen=True)
class GrowthReport:
    rows: list
    n_tracts: int
    dca_constant: float
    cui_constant: float
    ab_constant: float
    flags: tuple = field(default=())

    header = ("r", "loglogM", "ab_bound", "cui_bound", "dca_floor")

    def to_csv(self, fmt=repr):
        lines = [",".join(self.header)]
        lines += [",".join(fmt(float(v)) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def growth_report(spec: EntireFunction, lin: Linearizer, r_grid, n_tracts: int | None = None,
                  n_samples: int = 256, workers: int = 1) -> GrowthReport:
    r = np.asarray(r_grid, dtype=float)
    if r.size < 2 or np.any(np.diff(r) <= 0):
        raise ParameterError("r grid must be strictly increasing", flag="--r-min/--r-max")
    N = spec.n_tracts if n_tracts is None else n_tracts
    llm = []
    for x in r:
        lm = max_modulus(spec, float(x), n_samples, workers).log_value
        if lm <= 0:
            raise DomainError(f"log M({x:g}) = {lm:g} is not positive", flag="--r-min")
        llm.append(math.log(lm))
    llm = np.array(llm)
    lr = np.log(r)
    phi = lin.phi(r)
    ab = (N / 2.0 + 1.0 / phi) * lr
    cui = N * (0.5 + 1.0 / np.log(phi)) * lr
    half = max(1, r.size // 2)
    C = float(np.mean(N / 2.0 * lr[:half] - llm[:half]))
    floor = N / 2.0 * lr - C
    flags = tuple(float(x) for x, v in zip(r, floor - llm) if v > abs(C))
    rows = [tuple(row) for row in np.column_stack([r, llm, ab, cui, floor])]
    return GrowthReport(rows, N, C, float(np.max(llm - cui)), float(np.max(llm - ab)), flags)
