"""Dynamics: tracts, the logarithmic lift F with exp(F(w)) = f(exp(w)),
escape classification, pixel density scans, Koebe factors and the density
bound assembled along E-iterates.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .errors import OVERFLOW, BranchError, DomainError, NumericError, ParameterError
from .functions import EntireFunction
from .schroeder import Linearizer
from .tower import Verdict, divergence_verdict, epsilon_bracket_array

MAX_SUBDIVISIONS = 1 << 20
MAX_RESOLUTION = 1 << 14
SIGMA = 1.0 / 256.0
TAU = 1.0 / 16.0
_ARG_BINS = 720


# -- tracts --------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ParameterError(f"degenerate region {self}", flag="--region")
        if not all(math.isfinite(v) for v in (self.x0, self.x1, self.y0, self.y1)):
            raise ParameterError("region must be bounded", flag="--region")

    @classmethod
    def parse(cls, text: str) -> "Box":
        try:
            vals = [float(v) for v in text.split(":")]
        except ValueError as exc:
            raise ParameterError(f"cannot parse region {text!r}", flag="--region") from exc
        if len(vals) != 4:
            raise ParameterError("region must be x0:x1:y0:y1", flag="--region")
        return cls(*vals)

    def centers(self, nx: int, ny: int):
        x = self.x0 + (np.arange(nx) + 0.5) * (self.x1 - self.x0) / nx
        y = self.y0 + (np.arange(ny) + 0.5) * (self.y1 - self.y0) / ny
        return x, y


@dataclass(frozen=True)
class Tract:
    base: complex
    anchor: complex  # log f(base) on the stored branch
    pixels: int
    min_abs_z: float  # smallest |z| over the tract's boundary pixels
    arg_bins: frozenset = field(repr=False)


@dataclass(frozen=True)
class TractMap:
    spec: EntireFunction
    r0: float
    box: Box
    grid_res: int
    tracts: tuple
    merged: int = 0
    mask: np.ndarray | None = field(default=None, repr=False, compare=False)
    labels: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def N(self):
        return len(self.tracts)

    @property
    def R(self):
        return math.log(self.r0)

    @property
    def R1(self):
        """Surrogate for inf Re w over the lifted tracts: log of the least |z| on a tract boundary."""
        if not self.tracts:
            return math.nan
        return math.log(min(t.min_abs_z for t in self.tracts))

    def tract_of(self, z: complex):
        """Index of the detected tract whose pixel contains z, or None."""
        b = self.box
        nx = ny = self.grid_res
        i = int((z.imag - b.y0) / (b.y1 - b.y0) * ny)
        j = int((z.real - b.x0) / (b.x1 - b.x0) * nx)
        if not (0 <= i < ny and 0 <= j < nx) or self.labels is None:
            return None
        lab = self.labels[i, j]
        return None if lab == 0 else int(lab) - 1


def _touches_boundary(comp):
    return comp[0, :].any() or comp[-1, :].any() or comp[:, 0].any() or comp[:, -1].any()


def find_tracts(spec: EntireFunction, r0: float, box: Box, grid_res: int = 128) -> TractMap:
    """Components of {|f| > r0} in the box that reach its boundary.

    Components whose boundary pixels cover overlapping ranges of arg z are
    merged (they are taken to be one tract cut by the box).
    """
    if grid_res < 64:
        raise ParameterError("grid_res must be at least 64", flag="--grid")
    if r0 <= 0:
        raise ParameterError("r0 must be positive", flag="--r0")
    x, y = box.centers(grid_res, grid_res)
    Z = x[None, :] + 1j * y[:, None]
    la = np.asarray(spec.log_abs_array(Z), dtype=float)
    la = np.where(np.isnan(la), np.inf, la)
    mask = la > math.log(r0)
    lab, n = ndimage.label(mask)
    comps = []
    for c in range(1, n + 1):
        comp = lab == c
        if not _touches_boundary(comp):
            continue
        edge = comp & ~ndimage.binary_erosion(comp, border_value=1)
        ang = np.angle(Z[edge])
        bins = frozenset(((ang + math.pi) / (2 * math.pi) * _ARG_BINS).astype(int) % _ARG_BINS)
        comps.append([{c}, bins])
    merged = 0
    changed = True
    while changed:
        changed = False
        for i in range(len(comps)):
            for j in range(i + 1, len(comps)):
                if comps[i][1] & comps[j][1]:
                    comps[i][0] |= comps[j][0]
                    comps[i][1] |= comps[j][1]
                    del comps[j]
                    merged += 1
                    changed = True
                    break
            if changed:
                break
    tracts = []
    labels = np.zeros_like(lab)
    for idx, (members, bins) in enumerate(comps):
        comp = np.isin(lab, list(members))
        labels[comp] = idx + 1
        k = np.argmax(np.where(comp, la, -np.inf))
        base = complex(Z.flat[k])
        # tract boundary proper: tract pixels next to a non-tract pixel (box edges excluded)
        inner = comp & ~ndimage.binary_erosion(comp, border_value=1)
        min_abs = float(np.min(np.abs(Z[inner]))) if inner.any() else float(np.min(np.abs(Z[comp])))
        tracts.append(Tract(base, complex(spec.log_value(base)), int(comp.sum()), min_abs, bins))
    tracts.sort(key=lambda t: (cmath.phase(t.base), abs(t.base)))
    # relabel to match the sorted order
    order = {}
    for new, t in enumerate(tracts):
        i = int((t.base.imag - box.y0) / (box.y1 - box.y0) * grid_res)
        j = int((t.base.real - box.x0) / (box.x1 - box.x0) * grid_res)
        order[int(labels[min(i, grid_res - 1), min(j, grid_res - 1)])] = new + 1
    relabeled = np.zeros_like(labels)
    for old, new in order.items():
        relabeled[labels == old] = new
    return TractMap(spec, float(r0), box, grid_res, tuple(tracts), merged, mask, relabeled)


# -- the logarithmic lift ----------------------------------------------------------


def _nearest_branch(value: complex, ref: complex) -> complex:
    k = round((ref.imag - value.imag) / (2 * math.pi))
    return value + 2j * math.pi * k


def lift_F(tm: TractMap, w: complex, path: Sequence[complex] | None = None, tract: int | None = None):
    """(F(w), F'(w)) with exp(F(w)) = f(exp(w)), continued from the tract's base.

    ``path`` is a polyline in the w-plane from the lifted base to w; the
    default is the straight segment from the lift of the base point whose
    imaginary part is nearest to Im w.
    """
    spec = tm.spec
    w = complex(w)
    z = cmath.exp(w)
    log_r0 = math.log(tm.r0)
    if tract is None:
        tract = tm.tract_of(z)
        if tract is None:
            if spec.log_abs(z) <= log_r0:
                raise DomainError(f"sample w = {w} is outside every tract (|f(e^w)| <= r0)")
            tract = min(range(tm.N), key=lambda i: abs(tm.tracts[i].base - z)) if tm.N else None
            if tract is None:
                raise DomainError("no tract detected")
    t = tm.tracts[tract]
    wb = cmath.log(t.base)
    wb += 2j * math.pi * round((w.imag - wb.imag) / (2 * math.pi))
    pts = [wb] + list(path or []) + [w]
    if path:
        if abs(pts[1] - wb) > 1e-12 * max(1.0, abs(wb)):
            raise ParameterError("path must start at a lift of the tract base point")
        pts = pts[1:]
    value = t.anchor
    for a, b in zip(pts, pts[1:]):
        value = _continue_segment(spec, a, b, value, log_r0)
    zz = cmath.exp(w)
    return value, zz * spec.log_derivative(zz)


def _continue_segment(spec, a, b, start_value, log_r0):
    n = 16
    while True:
        s = np.linspace(0.0, 1.0, n + 1)
        pts = a + (b - a) * s
        vals = []
        ok = True
        prev = start_value
        for k, p in enumerate(pts[1:], 1):
            zp = cmath.exp(p)
            lv = spec.log_value(zp)
            if lv.real <= log_r0:
                raise BranchError(f"path leaves the tract at step {k}/{n}, w = {p}",
                                  {"step": k, "w": complex(p), "log_abs": lv.real})
            lv = _nearest_branch(lv, prev)
            if abs(lv.imag - prev.imag) >= math.pi / 2:
                ok = False
                break
            vals.append(lv)
            prev = lv
        if ok:
            return vals[-1] if vals else start_value
        n *= 2
        if n > MAX_SUBDIVISIONS:
            raise BranchError("branch continuation needs more than 2^20 subdivisions",
                              {"segment": (complex(a), complex(b))})


@dataclass(frozen=True)
class ExpansionMargin:
    minimum: float
    margins: np.ndarray
    failures: tuple  # (w, margin) pairs with margin < 1


def expansion_margin(tm: TractMap, samples: Sequence[complex]) -> ExpansionMargin:
    """min over samples of 4 pi |F'(w)| / (Re F(w) - log r0)."""
    vals, fails = [], []
    log_r0 = math.log(tm.r0)
    for w in samples:
        w = complex(w)
        if tm.spec.log_abs(cmath.exp(w)) <= log_r0:
            raise DomainError(f"sample w = {w} lies outside the lifted tract")
        F, dF = lift_F(tm, w)
        m = 4 * math.pi * abs(dF) / (F.real - log_r0)
        vals.append(m)
        if m < 1:
            fails.append((w, m))
    arr = np.array(vals)
    return ExpansionMargin(float(arr.min()), arr, tuple(fails))


def sample_tract_points(tm: TractMap, n: int, seed: int = 0, min_margin: float = 0.0):
    """n lifted points w = log z at random tract pixels (|f| > r0 * e^min_margin)."""
    rng = np.random.default_rng(seed)
    x, y = tm.box.centers(tm.grid_res, tm.grid_res)
    ii, jj = np.nonzero(tm.labels > 0)
    if len(ii) == 0:
        raise DomainError("no tract pixels to sample")
    out = []
    for k in rng.permutation(len(ii)):
        z = complex(x[jj[k]], y[ii[k]])
        if z != 0 and tm.spec.log_abs(z) > math.log(tm.r0) + min_margin:
            out.append(cmath.log(z))
        if len(out) == n:
            break
    return out


# -- escape ---------------------------------------------------------------------


@dataclass(frozen=True)
class EscapeResult:
    escaped: bool
    step: int | None


def escape_classify(spec: EntireFunction, z: complex, R_esc: float, n_max: int) -> EscapeResult:
    if n_max < 1:
        raise ParameterError("n_max must be >= 1", flag="--nmax")
    w = complex(z)
    for k in range(1, n_max + 1):
        w = spec.value(w)
        if w is OVERFLOW or not cmath.isfinite(w) or abs(w) > R_esc:
            return EscapeResult(True, k)
    return EscapeResult(False, None)


MODES = ("escape_set", "retained_T_set")
_CHUNK_ROWS = 8


@dataclass
class DensityReport:
    region: Box
    resolution: tuple
    R_esc: float
    threshold: float | None
    n_list: tuple
    mode: str
    density_retained: np.ndarray
    density_escaped: np.ndarray
    escape_step: np.ndarray = field(repr=False)  # first k with |f^k| > R_esc, 0 if never
    drop_step: np.ndarray | None = field(default=None, repr=False)  # first k with |f^k| <= threshold, -1 if never

    def to_csv(self, fmt=repr):
        lines = ["n,density_retained,density_escaped"]
        for n, a, b in zip(self.n_list, self.density_retained, self.density_escaped):
            lines.append(f"{n},{fmt(float(a))},{fmt(float(b))}")
        return "\n".join(lines) + "\n"

    def retained_mask(self, n: int):
        if self.drop_step is None:
            return ~((self.escape_step > 0) & (self.escape_step <= n))
        return (self.drop_step < 0) | (self.drop_step > n)

    def escaped_mask(self, n: int):
        return (self.escape_step > 0) & (self.escape_step <= n)

    def pgm(self) -> bytes:
        """P5 map: 0 = event by the first checkpoint, 255 = none by the last."""
        event = self.escape_step if self.mode == "escape_set" else np.where(self.drop_step < 0, 0, self.drop_step)
        has = event > 0
        m = len(self.n_list)
        idx = np.full(event.shape, m)
        for j in reversed(range(m)):
            idx = np.where(has & (event <= self.n_list[j]), j, idx)
        img = np.round(255.0 * idx / m).astype(np.uint8)
        ny, nx = img.shape
        return f"P5\n{nx} {ny}\n255\n".encode() + img[::-1].tobytes()


def _scan_rows(spec, Z, R_esc, threshold, n_final):
    """Per-pixel iteration; every operation is elementwise so results do not depend on chunking."""
    esc = np.zeros(Z.shape, dtype=np.int32)
    drop = np.full(Z.shape, -1, dtype=np.int32)
    w = Z.copy()
    if threshold is not None:
        drop[np.abs(w) <= threshold] = 0
    alive = np.ones(Z.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n_final + 1):
            if not alive.any():
                break
            idx = np.nonzero(alive)
            v = np.asarray(spec.value_array(w[idx]), dtype=complex)
            w[idx] = v
            a = np.abs(v)
            out = ~np.isfinite(a) | (a > R_esc)
            sel = tuple(i[out] for i in idx)
            esc[sel] = k
            alive[sel] = False
            if threshold is not None:
                low = np.isfinite(a) & (a <= threshold)
                first = low & (drop[idx] < 0)
                drop[tuple(i[first] for i in idx)] = k
    return esc, drop


def density_scan(spec: EntireFunction, region: Box, resolution, R_esc: float, n_list: Sequence[int],
                 mode: str = "escape_set", threshold: float | None = None, workers: int = 1) -> DensityReport:
    """Escape or retained fractions of pixel centres at each checkpoint.

    In retained_T_set mode a pixel stays retained while every iterate so far
    (including the start) has modulus above ``threshold``; escaped pixels
    keep their last modulus and so stay retained.
    """
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}", flag="--mode")
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    nx, ny = int(nx), int(ny)
    if not (1 <= nx <= MAX_RESOLUTION and 1 <= ny <= MAX_RESOLUTION):
        raise ParameterError(f"resolution must lie in [1, {MAX_RESOLUTION}] per side", flag="--res")
    n_list = tuple(int(n) for n in n_list)
    if not n_list or any(n < 1 for n in n_list) or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ParameterError("checkpoints must be positive and increasing", flag="--nlist")
    if mode == "retained_T_set" and (threshold is None or threshold <= 0):
        raise ParameterError("retained_T_set mode needs a positive threshold", flag="--threshold")
    if R_esc <= 0:
        raise ParameterError("R_esc must be positive", flag="--resc")
    thr = threshold if mode == "retained_T_set" else None
    x, y = region.centers(nx, ny)
    Z = x[None, :] + 1j * y[:, None]
    chunks = [Z[i:i + _CHUNK_ROWS] for i in range(0, ny, _CHUNK_ROWS)]
    job = lambda c: _scan_rows(spec, c, R_esc, thr, n_list[-1])
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    esc = np.concatenate([p[0] for p in parts])
    drop = np.concatenate([p[1] for p in parts]) if thr is not None else None
    total = nx * ny
    d_esc = np.array([np.count_nonzero((esc > 0) & (esc <= n)) / total for n in n_list])
    rep = DensityReport(region, (nx, ny), R_esc, thr, n_list, mode, np.zeros(len(n_list)), d_esc, esc, drop)
    rep.density_retained = np.array([np.count_nonzero(rep.retained_mask(n)) / total for n in n_list])
    return rep


# -- Koebe distortion and the density bound -------------------------------------------


@dataclass(frozen=True)
class KoebeFactors:
    value_lower: float
    value_upper: float
    derivative_lower: float
    derivative_upper: float
    quarter: float

    def astuple(self):
        return (self.value_lower, self.value_upper, self.derivative_lower, self.derivative_upper, self.quarter)


def koebe_factors(lam: float) -> KoebeFactors:
    """Growth and distortion factors for univalent maps of the unit disk at |z| = lam."""
    if not (0.0 < lam < 1.0):
        raise ParameterError("lam must lie in (0, 1)", flag="--lam")
    p, m = 1.0 + lam, 1.0 - lam
    return KoebeFactors(lam / p**2, lam / m**2, m / p**3, p / m**3, 0.25)


@dataclass
class BoundResult:
    k: np.ndarray
    terms_lo: np.ndarray
    terms_hi: np.ndarray
    neglog_lo: np.ndarray  # partial sums of log(1 + t/16) using the smaller terms
    neglog_hi: np.ndarray
    verdict: Verdict
    x_start: float
    r1_surrogate: float

    @property
    def product_upper(self):
        return np.exp(-self.neglog_lo)

    @property
    def product_lower(self):
        return np.exp(-self.neglog_hi)


def _check_theta0(theta0):
    eps = np.geomspace(1e-9, 0.5, 33)
    vals = np.array([theta0(float(e)) for e in eps])
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0) or np.any(np.diff(vals) <= 0):
        raise ParameterError("theta_0 must be positive and strictly decreasing in r (increasing in eps)",
                             flag="--theta0")


def theoretical_bound(lin: Linearizer, theta0: Callable[[float], float] | None = None, re_w: float = 300.0,
                      K1: float = 1.0, k_max: int = 100000, R: float = 0.0, window: int | None = None) -> BoundResult:
    """Bracketed partial products of prod_k 1/(1 + phi_2(x_k)/16).

    ``theta0`` maps eps(r) to theta_0(r) (default 2*eps).  The k-th term is
    evaluated at x_k = E^{2k}(65/64 re_w), where theta_0(e^{2 x_k}) needs
    eps at exp(2 x_k), which lies between E^{2k+1} and E^{2k+2} of the start.
    """
    if not (0.0 < K1 <= 1.0):
        raise ParameterError("K1 must lie in (0, 1]", flag="--k1")
    need = max(2.0 * R, R + 64.0 * math.pi)
    if not re_w > need:
        raise ParameterError(f"re_w must exceed max(2R, R + 64 pi) = {need:.6g}", flag="--re-w")
    if k_max < 1:
        raise ParameterError("k_max must be >= 1", flag="--kmax")
    theta0 = theta0 or (lambda e: 2.0 * e)
    _check_theta0(theta0)
    x0 = 65.0 / 64.0 * re_w
    k = np.arange(1, k_max + 1, dtype=float)
    # eps(E^{2k+1}(x0)) bounds eps(e^{2 x_k}) from above, eps(E^{2k+2}(x0)) from below
    lo_a, hi_a = epsilon_bracket_array(lin, 2 * k + 1, x0)
    lo_b, _ = epsilon_bracket_array(lin, 2 * k + 2, x0)
    eps_hi, eps_lo = hi_a, lo_b
    scale = K1 * (SIGMA / TAU) ** 2 / (4.0 * math.pi)
    g = np.vectorize(theta0, otypes=[float])
    t_hi = scale * g(eps_hi)
    t_lo = scale * g(eps_lo)
    s_lo = np.cumsum(np.log1p(t_lo / 16.0))
    s_hi = np.cumsum(np.log1p(t_hi / 16.0))
    win = window or max(2, k_max // 10)
    verdict = divergence_verdict(s_hi, win) if k_max >= 3 * win else Verdict("inconclusive")
    return BoundResult(k.astype(int), t_lo, t_hi, s_lo, s_hi, verdict, x0, need)
