"""Linearization of E_beta(x) = exp(beta*x) at its repelling real fixed point.

With xi the repelling fixed point and lambda = beta*xi the multiplier, the
conjugated inverse branch

    L(x) = log(x + xi)/beta - xi = log1p(x/xi)/beta

has an attracting fixed point at 0 with L'(0) = 1/lambda.  The Koenigs
limit Psi(x) = lim lambda**n L^n(x) solves Psi(L(x)) = Psi(x)/lambda, and
Phi(r) = Psi(r - xi) solves Phi(E_beta(r)) = lambda*Phi(r).

Every quantity that depends on r is also available from s = log r (the
``*_log`` methods), so radii far beyond double range can be handled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, NumericError, ParameterError

INV_E = 1.0 / math.e


@dataclass(frozen=True)
class BetaParams:
    beta: float
    xi: float
    lam: float


def repelling_fixed_point(beta: float) -> BetaParams:
    """Return the larger real solution of exp(beta*x) = x."""
    beta = float(beta)
    if not (0.0 < beta < INV_E):
        raise ParameterError(f"beta must lie strictly inside (0, 1/e), got {beta!r}", flag="--beta")

    def g(x):
        return math.exp(beta * x) - x

    lo, hi = math.e, 100.0
    while g(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise NumericError("could not bracket the repelling fixed point", {"beta": beta})
    if g(lo) >= 0.0:
        # only possible when beta is within rounding of 1/e
        raise NumericError("bracket [e, X] has no sign change", {"beta": beta, "g(e)": g(lo)})
    while hi - lo > 1e-13 * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    # pick whichever endpoint has the smaller residual
    xi = lo if abs(g(lo)) <= abs(g(hi)) else hi
    lam = beta * xi
    if lam <= 1.0:
        raise NumericError("multiplier is not repelling", {"beta": beta, "lambda": lam})
    return BetaParams(beta=beta, xi=xi, lam=lam)


def iterated_logs(s, depth):
    """Iterated logarithms log^1 r .. log^depth r given s = log r.

    A factor that would fall below 1 (or be undefined) is pinned to 1, so
    every returned factor is >= 1.
    """
    out = []
    cur = float(s)
    for j in range(1, depth + 1):
        if j > 1:
            cur = math.log(cur) if cur > math.e else 1.0
        out.append(max(cur, 1.0))
    return out


@dataclass(frozen=True)
class Linearizer:
    """Solved Schroeder data for E_beta.  Immutable; safe to share."""

    params: BetaParams
    tol: float = 1e-12
    max_iter: int = 200
    x_floor: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_beta(cls, beta: float, tol: float = 1e-12, max_iter: int = 200) -> "Linearizer":
        if not tol > 0:
            raise ParameterError("tol must be positive", flag="--tol")
        if max_iter < 1:
            raise ParameterError("max_iter must be positive", flag="--max-iter")
        return cls(repelling_fixed_point(beta), tol=tol, max_iter=max_iter)

    @property
    def beta(self):
        return self.params.beta

    @property
    def xi(self):
        return self.params.xi

    @property
    def lam(self):
        return self.params.lam

    # -- core iteration -------------------------------------------------

    def L(self, x):
        return np.log1p(np.asarray(x, dtype=float) / self.xi) / self.beta

    def _iterate(self, y0, scale_power=0):
        """Koenigs iteration on an array of starting points y0 >= 0.

        Returns (psi, psi_prime, n) where psi = lambda**(n+scale_power) L^n(y0)
        at the first n meeting the stopping rule, and psi_prime is the
        matching truncated product.  Each element stops independently.
        """
        y = np.array(y0, dtype=float, ndmin=1)
        if np.any(~(y >= self.x_floor)):
            bad = y[~(y >= self.x_floor)][0]
            raise DomainError(f"psi argument {bad!r} below x_floor={self.x_floor}")
        lam, xi, beta = self.lam, self.xi, self.beta
        prev = y * lam**scale_power
        deriv = np.ones_like(y)
        out_val = np.empty_like(y)
        out_der = np.empty_like(y)
        out_n = np.zeros(y.shape, dtype=int)
        active = np.ones(y.shape, dtype=bool)
        for n in range(1, self.max_iter + 1):
            yy = y[active]
            d_new = deriv[active] / (1.0 + yy / xi)
            y_new = np.log1p(yy / xi) / beta
            cur = lam ** (n + scale_power) * y_new
            p = prev[active]
            done = np.abs(cur - p) <= self.tol * np.maximum(1.0, np.abs(p))
            idx = np.flatnonzero(active)
            fin = idx[done]
            out_val[fin] = cur[done]
            out_der[fin] = d_new[done]
            out_n[fin] = n
            y[active] = y_new
            deriv[active] = d_new
            prev[active] = cur
            active[fin] = False
            if not active.any():
                return out_val, out_der, out_n
        i = int(np.flatnonzero(active)[0])
        raise NumericError(
            "Koenigs iteration did not converge",
            {"x": float(np.array(y0, ndmin=1)[i]), "last": float(prev[i]), "max_iter": self.max_iter},
        )

    # -- Psi ------------------------------------------------------------

    def psi(self, x):
        v, _, _ = self._iterate(x)
        return _unwrap(v, x)

    def psi_prime(self, x):
        _, d, _ = self._iterate(x)
        return _unwrap(d, x)

    def psi_pair(self, x):
        v, d, _ = self._iterate(x)
        return _unwrap(v, x), _unwrap(d, x)

    # -- Phi from log-radius ---------------------------------------------

    def _phi_log_pair(self, s):
        """(Phi(e^s), dPhi(e^s)/ds) for an array of log-radii.

        The first L-step is taken in closed form: L(e^s - xi) = s/beta - xi.
        Points with e^s close to xi are evaluated directly to avoid
        cancellation in s/beta - xi.
        """
        s = np.array(s, dtype=float, ndmin=1)
        if np.any(~(s >= math.log(self.xi))):
            raise DomainError(f"Phi needs r >= xi = {self.xi}")
        val = np.empty_like(s)
        der = np.empty_like(s)
        near = s < math.log(self.xi) + 1.0
        if near.any():
            r = np.exp(s[near])
            v, d, _ = self._iterate(np.maximum(r - self.xi, 0.0))
            val[near], der[near] = v, d * r
        far = ~near
        if far.any():
            y1 = s[far] / self.beta - self.xi
            v, d, _ = self._iterate(y1, scale_power=1)
            val[far], der[far] = v, self.xi * d
        return val, der

    def phi_log(self, s):
        v, _ = self._phi_log_pair(s)
        return _unwrap(v, s)

    def phi(self, r):
        return self.phi_log(_safe_log(r, self.xi))

    def phi_prime(self, r):
        r = np.asarray(r, dtype=float)
        _, d = self._phi_log_pair(_safe_log(r, self.xi))
        return _unwrap(d / np.array(r, ndmin=1), r)

    # -- epsilon and rho ----------------------------------------------

    @cached_property
    def r_eps_min(self) -> float:
        """Smallest admissible radius: Phi(r_eps_min) = 1 + 1e-6."""
        target = 1.0 + 1e-6
        lo, hi = self.xi, self.xi + 1.0
        while self.phi(hi) <= target:
            lo, hi = hi, 2.0 * hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.phi(mid) > target:
                hi = mid
            else:
                lo = mid
        return hi

    def _check_log(self, s):
        s = np.array(s, dtype=float, ndmin=1)
        smin = math.log(self.r_eps_min)
        if np.any(~(s > smin)):
            raise DomainError(
                f"radius must exceed r_eps_min = {self.r_eps_min:.15g} (where Phi(r) = 1 + 1e-6)",
                flag="--r",
            )
        return s

    def eps_log_pair(self, s):
        """(eps(e^s), d eps/ds) where d eps/ds = r * eps'(r)."""
        s = self._check_log(s)
        v, d = self._phi_log_pair(s)
        lp = np.log(v)
        return 1.0 / lp, -d / (v * lp * lp)

    def epsilon_log(self, s):
        e, _ = self.eps_log_pair(s)
        return _unwrap(e, s)

    def epsilon(self, r):
        return self.epsilon_log(_safe_log(r, self.xi))

    def epsilon_prime(self, r):
        r = np.asarray(r, dtype=float)
        _, d = self.eps_log_pair(_safe_log(r, self.xi))
        return _unwrap(d / np.array(r, ndmin=1), r)

    def rho_log(self, s):
        return 0.5 + np.asarray(self.epsilon_log(s))

    def rho(self, r):
        return 0.5 + np.asarray(self.epsilon(r))

    def rho_prime(self, r):
        return self.epsilon_prime(r)


def _safe_log(r, floor):
    r = np.asarray(r, dtype=float)
    if np.any(~(r >= floor)):
        raise DomainError(f"radius below xi = {floor}")
    return np.log(r)


def _unwrap(arr, like):
    if np.ndim(like) == 0:
        return float(np.asarray(arr).reshape(-1)[0])
    return np.asarray(arr).reshape(np.shape(like))


# -- module-level operations ---------------------------------------------


def psi(lin: Linearizer, x):
    return lin.psi(x)


def psi_prime(lin: Linearizer, x):
    return lin.psi_prime(x)


def phi(lin: Linearizer, r):
    return lin.phi(r)


def epsilon(lin: Linearizer, r):
    return lin.epsilon(r)


def rho(lin: Linearizer, r):
    return lin.rho(r)


def epsilon_prime(lin: Linearizer, r):
    return lin.epsilon_prime(r)


def e_beta_log(lin: Linearizer, r: float) -> float:
    """log E_beta(r) = beta*r; lets Phi(E_beta(r)) be evaluated without overflow."""
    return lin.beta * r


@dataclass
class ProximateOrderReport:
    rows: list
    m_max: int
    N: int
    trend_violation: float | None

    def header(self):
        cols = ["r", "rho", "eps", "r_rhoprime_logr", "eps_decay_lhs", "eps_cubed"]
        cols += [f"phi_over_log{m}" for m in range(1, self.m_max + 1)]
        return cols

    def to_csv(self, fmt=repr):
        lines = [",".join(self.header())]
        for row in self.rows:
            lines.append(",".join(fmt(row[c]) for c in self.header()))
        return "\n".join(lines) + "\n"


def proximate_order_report(lin: Linearizer, r_grid, m_max: int = 3, N: int = 5) -> ProximateOrderReport:
    """Tabulate the proximate-order diagnostics on an increasing grid.

    ``eps_decay_lhs`` is eps'(r) * prod_{j=0..N} log^j r with the sign of
    eps' kept (eps is decreasing, so this is negative); iterated logs that
    would drop below 1 are pinned to 1.
    """
    r_grid = [float(r) for r in r_grid]
    if any(b <= a for a, b in zip(r_grid, r_grid[1:])):
        raise ParameterError("r grid must be strictly increasing", flag="--r-grid")
    if m_max < 0 or N < 0:
        raise ParameterError("m_max and N must be non-negative")
    rows = []
    for r in r_grid:
        s = math.log(r)
        eps, deps_ds = (float(v[0]) for v in lin.eps_log_pair(s))
        phi_r = float(lin.phi_log(s))
        logs = iterated_logs(s, max(N, m_max, 1))
        prod = 1.0
        for ell in logs[:N]:
            prod *= ell
        row = {
            "r": r,
            "rho": 0.5 + eps,
            "eps": eps,
            "r_rhoprime_logr": deps_ds * s,
            "eps_decay_lhs": deps_ds * prod,
            "eps_cubed": eps**3,
        }
        for m in range(1, m_max + 1):
            row[f"phi_over_log{m}"] = phi_r / logs[m - 1]
        rows.append(row)
    base = abs(rows[0]["r_rhoprime_logr"])
    worse = [row["r"] for row in rows[1:] if abs(row["r_rhoprime_logr"]) > base]
    return ProximateOrderReport(rows, m_max, N, max(worse) if worse else None)
