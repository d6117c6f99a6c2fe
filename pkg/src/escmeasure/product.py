"""The canonical product with zeros on the positive axis counted by r**rho(r).

Zeros solve g(a_n) = log n with g(r) = rho(r) log r.  g decreases just
above r_eps_min and increases beyond its minimiser r_star; the first few
zeros (log n < g(r_star)) are placed at n**(1/rho(r_star)), which keeps the
sequence increasing, starts it at a_1 = 1 and leaves n(r) = floor(r**rho(r))
for every r >= r_star.

The zeros beyond a_N are not dropped: since the sequence is the inverse of
the smooth count m(t) = exp(g(t)), the tail sum over n > N is a midpoint
rule for the integral of log(1 - z/t) dm(t) over t >= a(N + 1/2), and that
integral is expanded in the moments mu_k of dm(t)/t**k.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContourError, DomainError, NumericError, ParameterError
from .schroeder import Linearizer

N_MOMENTS = 64
_GL16 = np.polynomial.legendre.leggauss(16)
_GL24 = np.polynomial.legendre.leggauss(24)


# -- g(s) = rho(e^s) * s and its s-derivative --------------------------------


def _g_pair(lin: Linearizer, s):
    eps, deps = lin.eps_log_pair(s)
    rho = 0.5 + eps
    return rho * s, rho + deps * s


def monotonicity_threshold(lin: Linearizer) -> float:
    """r_star: where d/dr [rho(r) log r] changes sign from - to +."""
    s_lo = math.log(lin.r_eps_min) + 1e-9
    grid = s_lo + np.expm1(np.linspace(0.0, math.log(40.0), 400))
    _, dg = _g_pair(lin, grid)
    pos = np.flatnonzero(dg > 0)
    if len(pos) == 0:
        raise NumericError("rho(r) log r is not increasing anywhere on the scan")
    i = pos[0]
    if i == 0:
        return float(math.exp(grid[0]))
    lo, hi = grid[i - 1], grid[i]
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if float(_g_pair(lin, mid)[1][0]) > 0:
            hi = mid
        else:
            lo = mid
    return float(math.exp(hi))


def _invert_g(lin: Linearizer, targets, s_star):
    """Solve g(s) = target for s >= s_star, vectorised (interpolation + Newton)."""
    targets = np.asarray(targets, dtype=float)
    tmax = float(targets.max())
    s_hi = s_star + 1.0
    while float(_g_pair(lin, s_hi)[0][0]) < tmax:
        s_hi = s_star + 2.0 * (s_hi - s_star)
    grid = np.linspace(s_star, s_hi, 4000)
    gv, _ = _g_pair(lin, grid)
    gv = np.maximum.accumulate(gv)
    s = np.interp(targets, gv, grid)
    for _ in range(6):
        gs, dgs = _g_pair(lin, s)
        step = (gs - targets) / dgs
        s = np.maximum(s - step, s_star)
        if np.all(np.abs(step) <= 4e-16 * np.abs(s)):
            break
    return s


# -- tail moments ---------------------------------------------------------------


def _panels(s0, length=400.0):
    edges = [s0]
    w = 0.02
    while edges[-1] < s0 + length:
        edges.append(edges[-1] + w)
        w = min(w * 1.3, 8.0)
    return np.array(edges)


def _moments(lin: Linearizer, s0: float, kmax: int):
    """mu_k = int_{t0}^inf t**-k dm(t), k = 1..kmax, with an error estimate."""
    edges = _panels(s0)
    out = []
    for x, w in (_GL16, _GL24):
        a, b = edges[:-1, None], edges[1:, None]
        nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
        weights = (0.5 * (b - a) * w).ravel()
        g, dg = _g_pair(lin, nodes)
        ks = np.arange(1, kmax + 1)[:, None]
        # scale by exp(-k s0) to keep everything representable
        integrand = np.exp(g[None, :] - ks * (nodes[None, :] - s0)) * dg[None, :]
        out.append((integrand * weights[None, :]).sum(axis=1))
    send = edges[-1]
    rho_end = float(_g_pair(lin, send)[0][0]) / send
    ks = np.arange(1, kmax + 1)
    beyond = rho_end * np.exp(rho_end * send - ks * (send - s0)) / (ks - rho_end)
    # returned values are mu_k * t0**k
    return out[1], np.abs(out[1] - out[0]) + beyond


@dataclass(frozen=True)
class ZeroSequence:
    zeros: np.ndarray
    lin: Linearizer = field(repr=False)
    r_star: float
    n_pinned: int
    tail_tol: float
    t0: float
    g_slope_t0: float
    moments_scaled: np.ndarray = field(repr=False)
    moments_err: np.ndarray = field(repr=False)
    r_max_valid: float = 0.0

    @property
    def N(self):
        return len(self.zeros)

    def counting(self, r):
        return np.searchsorted(self.zeros, np.asarray(r, dtype=float), side="right")

    def smooth_count(self, r):
        """r**rho(r)."""
        r = np.asarray(r, dtype=float)
        return np.exp(self.lin.rho(r) * np.log(r))

    # -- tail ---------------------------------------------------------------

    def tail_log(self, z: complex, with_bound=False):
        """Moment series for the part of log f(z) coming from zeros beyond a_N."""
        q = z / self.t0
        k = np.arange(1, N_MOMENTS + 1)
        terms = -(q**k) * self.moments_scaled / k
        val = complex(math.fsum(terms.real), math.fsum(terms.imag))
        if not with_bound:
            return val
        return val, self.tail_bound(abs(z))

    def tail_log_derivative(self, z: complex):
        q = z / self.t0
        k = np.arange(1, N_MOMENTS + 1)
        terms = -(q ** (k - 1)) * self.moments_scaled / self.t0
        return complex(terms.sum())

    def tail_log_derivative2(self, z: complex):
        q = z / self.t0
        k = np.arange(2, N_MOMENTS + 1)
        terms = -(k - 1) * q ** (k - 2) * self.moments_scaled[1:] / self.t0**2
        return complex(terms.sum())

    def tail_bound(self, rz: float) -> float:
        """Certified-in-spirit bound on |true tail - tail_log| at |z| = rz."""
        t0 = self.t0
        if rz >= t0:
            return math.inf
        q = rz / t0
        em = (rz / 6.0) / ((t0 - rz) * (self.N + 0.5) * self.g_slope_t0)
        k = np.arange(1, N_MOMENTS + 1)
        quad = float(np.sum(q**k * self.moments_err / k))
        kk = N_MOMENTS + 1
        trunc = float(self.moments_scaled[0]) * q**kk / (kk * (1.0 - q))
        return em + quad + trunc


def generate_zeros(lin: Linearizer, count: int | None = None, r_max: float | None = None,
                   tail_tol: float = 1e-6) -> ZeroSequence:
    if (count is None) == (r_max is None):
        raise ParameterError("give exactly one of count or r_max", flag="--count")
    r_star = monotonicity_threshold(lin)
    s_star = math.log(r_star)
    g_star = float(_g_pair(lin, s_star)[0][0])
    rho_star = g_star / s_star
    if r_max is not None:
        if not r_max > r_star:
            raise DomainError(f"r_max must exceed r_star = {r_star:.6g}", flag="--r-max")
        count = int(math.floor(math.exp(float(_g_pair(lin, math.log(r_max))[0][0]))))
    if count < 1:
        raise ParameterError("count must be >= 1", flag="--count")
    n = np.arange(1, count + 1, dtype=float)
    logn = np.log(n)
    pinned = logn < g_star
    s = np.empty_like(n)
    s[pinned] = logn[pinned] / rho_star
    if (~pinned).any():
        s[~pinned] = _invert_g(lin, logn[~pinned], s_star)
    zeros = np.maximum(np.exp(s), 1.0)
    zeros = np.maximum.accumulate(zeros)

    s0 = float(_invert_g(lin, [math.log(count + 0.5)], s_star)[0]) if count + 0.5 > math.exp(g_star) else s_star
    t0 = math.exp(s0)
    slope = float(_g_pair(lin, s0)[1][0])
    mom, err = _moments(lin, s0, N_MOMENTS)
    zs = ZeroSequence(zeros, lin, r_star, int(pinned.sum()), tail_tol, t0, slope, mom, err)
    # largest radius where the tail bound stays below tail_tol
    lo, hi = 0.0, 0.5 * t0
    if zs.tail_bound(hi) <= tail_tol:
        rmax = hi
    else:
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if zs.tail_bound(mid) <= tail_tol:
                lo = mid
            else:
                hi = mid
        rmax = lo
    object.__setattr__(zs, "r_max_valid", rmax)
    return zs


# -- evaluation -------------------------------------------------------------------


@dataclass(frozen=True)
class LogAbs:
    value: float
    partial: float
    tail: float
    tail_bound: float


def _check_point(zs: ZeroSequence, z: complex):
    if abs(z) > zs.r_max_valid:
        raise DomainError(
            f"|z| = {abs(z):.6g} exceeds r_max_valid = {zs.r_max_valid:.6g}; regenerate with more zeros",
            flag="--count",
        )


def _factor_logs(zs: ZeroSequence, z: complex):
    w = z / zs.zeros
    one_minus = 1.0 - w
    if np.min(np.abs(one_minus)) <= 1e-14:
        i = int(np.argmin(np.abs(one_minus)))
        raise DomainError(f"z = {z} coincides with zero a_{i + 1} = {zs.zeros[i]!r}")
    small = np.abs(w) < 0.5
    re = np.empty(len(w))
    re[small] = 0.5 * np.log1p((np.abs(w[small]) ** 2) - 2.0 * w[small].real)
    re[~small] = np.log(np.abs(one_minus[~small]))
    im = np.arctan2(-w.imag, one_minus.real)
    return re, im


def log_abs_product(zs: ZeroSequence, z: complex) -> LogAbs:
    """log|f(z)|: compensated sum over a_1..a_N plus the smooth-tail correction."""
    z = complex(z)
    if z == 0:
        return LogAbs(0.0, 0.0, 0.0, 0.0)
    _check_point(zs, z)
    re, _ = _factor_logs(zs, z)
    partial = math.fsum(re)
    tail, bound = zs.tail_log(z, with_bound=True)
    return LogAbs(partial + tail.real, partial, tail.real, bound)


def log_product(zs: ZeroSequence, z: complex) -> complex:
    """A logarithm of f(z) (imaginary part is a sum of principal factor arguments)."""
    z = complex(z)
    if z == 0:
        return 0j
    _check_point(zs, z)
    re, im = _factor_logs(zs, z)
    return complex(math.fsum(re), math.fsum(im)) + zs.tail_log(z)


def log_derivative(zs: ZeroSequence, z: complex) -> complex:
    """f'(z)/f(z)."""
    z = complex(z)
    _check_point(zs, z)
    d = 1.0 / (z - zs.zeros)
    return complex(math.fsum(d.real), math.fsum(d.imag)) + zs.tail_log_derivative(z)


def log_derivative_prime(zs: ZeroSequence, z: complex) -> complex:
    """(f'/f)'(z)."""
    z = complex(z)
    _check_point(zs, z)
    d = -1.0 / (z - zs.zeros) ** 2
    return complex(math.fsum(d.real), math.fsum(d.imag)) + zs.tail_log_derivative2(z)


# -- asymptotics -----------------------------------------------------------------


def _admissible(lin: Linearizer, r: float, theta: float):
    eps = float(lin.epsilon(r))
    if not (eps <= theta <= 2.0 * math.pi - eps):
        raise DomainError(f"theta = {theta!r} outside [eps(r), 2pi - eps(r)] with eps(r) = {eps!r}", flag="--theta")
    return eps


def asymptotic_prediction(lin: Linearizer, r: float, theta: float) -> float:
    """pi cos((theta - pi) rho(r)) / sin(pi rho(r)) * r**rho(r)."""
    if not r > lin.r_eps_min:
        raise DomainError(f"r must exceed r_eps_min = {lin.r_eps_min}", flag="--r")
    eps = _admissible(lin, r, theta)
    rho = 0.5 + eps
    return math.pi * math.cos((theta - math.pi) * rho) / math.sin(math.pi * rho) * r**rho


@dataclass
class DeviationTable:
    rows: list  # (r, theta, log_abs, prediction, deviation_normalized)
    max_abs: dict  # r -> max |D|

    @property
    def trend(self):
        rs = sorted(self.max_abs)
        return [self.max_abs[r] for r in rs]

    def to_csv(self, fmt=repr):
        lines = ["r,theta,log_abs,prediction,deviation_normalized"]
        lines += [",".join(fmt(float(v)) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def verify_asymptotics(zs: ZeroSequence, lin: Linearizer, r_grid, theta_grid) -> DeviationTable:
    rows, max_abs = [], {}
    for r in r_grid:
        r = float(r)
        eps = float(lin.epsilon(r))
        scale = eps * eps * r ** (0.5 + eps)
        m = 0.0
        for th in theta_grid:
            th = float(th)
            pred = asymptotic_prediction(lin, r, th)
            la = log_abs_product(zs, r * cmath.exp(1j * th)).value
            dev = (la - pred) / scale
            rows.append((r, th, la, pred, dev))
            m = max(m, abs(dev))
        max_abs[r] = m
    return DeviationTable(rows, max_abs)


@dataclass
class BoundaryReport:
    r_star: float
    gamma_plus: list  # (r, log|f(r e^{i eps})|)
    gamma_minus: list
    sector_max: dict  # r -> max log|f| over the fan inside G(gamma)
    negative_beyond: bool

    @property
    def sector_bound(self):
        return max(self.sector_max.values())


def boundary_curve_check(zs: ZeroSequence, lin: Linearizer, r_grid, sector_samples: int = 9) -> BoundaryReport:
    """Sample log|f| on the bent rays r e^{+-i eps(r)} and on a fan inside G(gamma).

    r_star is the smallest grid radius from which log|f| < 0 holds on both
    rays for every larger grid radius (inf if the last one fails).
    """
    plus, minus, sector = [], [], {}
    for r in r_grid:
        r = float(r)
        eps = float(lin.epsilon(r))
        zp = r * cmath.exp(1j * eps)
        plus.append((r, log_abs_product(zs, zp).value))
        minus.append((r, log_abs_product(zs, zp.conjugate()).value))
        angles = np.linspace(-eps, eps, sector_samples)
        # the fan crosses the positive axis between zeros; nudge off exact zeros
        vals = []
        for a in angles:
            z = r * cmath.exp(1j * a)
            try:
                vals.append(log_abs_product(zs, z).value)
            except DomainError:
                vals.append(log_abs_product(zs, z * (1 + 1e-9)).value)
        sector[r] = max(vals)
    neg = [max(p[1], m[1]) < 0 for p, m in zip(plus, minus)]
    r_star = math.inf
    for i in range(len(neg) - 1, -1, -1):
        if not neg[i]:
            break
        r_star = plus[i][0]
    return BoundaryReport(r_star, plus, minus, sector, all(neg))


# -- argument principle -----------------------------------------------------------


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float


@dataclass(frozen=True)
class Rectangle:
    x0: float
    x1: float
    y0: float
    y1: float


def _circle_nodes(c: Circle, n):
    t = 2.0 * np.pi * np.arange(n) / n
    z = c.center + c.radius * np.exp(1j * t)
    dz = 1j * c.radius * np.exp(1j * t) * (2.0 * np.pi / n)
    return z, dz


def _rect_nodes(rc: Rectangle, n):
    corners = [complex(rc.x0, rc.y0), complex(rc.x1, rc.y0), complex(rc.x1, rc.y1), complex(rc.x0, rc.y1)]
    x, w = np.polynomial.legendre.leggauss(8)
    zs, dzs = [], []
    panels = max(1, n // 32)
    for a, b in zip(corners, corners[1:] + corners[:1]):
        edges = np.linspace(0.0, 1.0, panels + 1)
        for u0, u1 in zip(edges[:-1], edges[1:]):
            u = 0.5 * (u1 - u0) * x + 0.5 * (u0 + u1)
            zs.append(a + (b - a) * u)
            dzs.append((b - a) * 0.5 * (u1 - u0) * w)
    return np.concatenate(zs), np.concatenate(dzs)


def count_zeros_argument_principle(fspec, contour, a: complex = 0.0, derivative: bool = False,
                                   n_start: int = 256, n_max: int = 1 << 18) -> int:
    """Number of a-points of f (or zeros of f' when ``derivative``) inside ``contour``.

    ``fspec`` must provide ``log_derivative``, ``value`` and, for the
    derivative case, ``log_derivative_prime``.  Trapezoid (circle) or
    composite Gauss (rectangle) nodes are doubled until two successive
    estimates agree.
    """
    a = complex(a)
    if derivative and a != 0:
        raise ParameterError("a-points of f' are not supported; use a = 0")
    nodes = _circle_nodes if isinstance(contour, Circle) else _rect_nodes
    if not isinstance(contour, (Circle, Rectangle)):
        raise ParameterError("contour must be a Circle or a Rectangle")

    def integrand(z):
        if derivative:
            s1 = fspec.log_derivative(z)
            s1p = fspec.log_derivative_prime(z)
            if abs(s1) < 1e-300:
                raise ContourError(f"f' vanishes near the contour at {z}; perturb the contour")
            return s1 + s1p / s1
        if a == 0:
            ld = fspec.log_derivative(z)
            if abs(ld) * max(1.0, abs(z)) > 1e12:
                raise ContourError(f"a zero lies on the contour near {z}; perturb the radius")
            return ld
        fz = fspec.value(z)
        gap = abs(fz - a)
        if gap < 1e-10 * max(1.0, abs(a)):
            raise ContourError(f"an a-point lies on the contour near {z}; perturb the radius")
        return fspec.derivative(z) / (fz - a)

    prev = None
    n = n_start
    cache = {}
    while n <= n_max:
        z, dz = nodes(contour, n)
        vals = np.empty(len(z), dtype=complex)
        for i, zz in enumerate(z):
            key = complex(zz)
            if key not in cache:
                cache[key] = integrand(key)
            vals[i] = cache[key]
        if not np.all(np.isfinite(vals)):
            raise ContourError("log-derivative is singular on the contour; perturb it")
        est = complex(np.sum(vals * dz)) / (2j * math.pi)
        if prev is not None:
            err = abs(est - prev)
            k = round(est.real)
            if err < 1e-6 and abs(est - k) + err < 0.4:
                return int(k)
        prev = est
        n *= 2
    raise NumericError("argument-principle quadrature did not converge", {"last_estimate": prev, "nodes": n // 2})
