"""Acceptance criteria, one test each.

Every test appends a single PASS/FAIL line to RESULTS; the lines are printed
as they happen (visible with -s) and again in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from escmeasure import growth, logdyn, product, schroeder
from escmeasure.calibration import C_DEV, SIN_ESCAPE_FLOOR
from escmeasure.functions import CuiProduct, ExpFamily, SinFamily
from escmeasure.logdyn import Box
from escmeasure.schroeder import Linearizer, repelling_fixed_point
from escmeasure.tower import SeriesSpec, divergence_verdict, partial_sums

RESULTS = []


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def report(n, ok, runtime, limit, detail):
    ok_all = bool(ok) and runtime < limit
    line = f"criterion {n:>2}: {'PASS' if ok_all else 'FAIL'}  {detail}  runtime={runtime:.2f}s (limit {limit:g}s)"
    RESULTS.append(line)
    print(line)
    assert ok, detail
    assert runtime < limit, f"runtime {runtime:.2f}s exceeds {limit}s"


def test_criterion_01_schroeder_residual():
    with Clock() as c:
        lin = Linearizer.from_beta(0.2)
        worst = 0.0
        for r in (20.0, 1e2, 1e3, 1e6):
            lhs = float(lin.phi_log(schroeder.e_beta_log(lin, r)))
            rhs = lin.lam * float(lin.phi(r))
            worst = max(worst, abs(lhs - rhs) / rhs)
    report(1, worst <= 1e-8, c.elapsed, 1.0, f"max relative residual {worst:.2e} <= 1e-8")


def test_criterion_02_fixed_point():
    with Clock() as c:
        betas = np.linspace(0.01, 0.35, 22)[1:-1]
        worst, lam_ok = 0.0, True
        for b in betas:
            bp = repelling_fixed_point(float(b))
            worst = max(worst, abs(math.exp(b * bp.xi) - bp.xi) / bp.xi)
            lam_ok &= bp.lam > 1
    report(2, worst <= 1e-12 and lam_ok and len(betas) == 20, c.elapsed, 1.0,
           f"20 betas, max |e^(beta xi) - xi|/xi = {worst:.1e}, all lambda > 1: {lam_ok}")


def test_criterion_03_proximate_order():
    with Clock() as c:
        lin = Linearizer.from_beta(0.2)
        rep = schroeder.proximate_order_report(lin, [1e3, 1e4, 1e6, 1e8], m_max=3, N=5)
        trend = [abs(row["r_rhoprime_logr"]) for row in rep.rows]
        decay = all(row["eps_decay_lhs"] <= row["eps_cubed"] for row in rep.rows)
    ok = trend[-1] < trend[0] and decay
    report(3, ok, c.elapsed, 5.0,
           f"|r rho' log r| {trend[0]:.3f} at 1e3 -> {trend[-1]:.3f} at 1e8; signed eps'*prod <= eps^3: {decay}")


def test_criterion_04_counting_function(lin):
    with Clock() as c:
        zs = product.generate_zeros(lin, count=100000)
        a = zs.zeros
        mids = 0.5 * (a[:-1] + a[1:])
        mids = mids[mids >= zs.r_star]
        dev = np.abs(zs.counting(mids) - zs.smooth_count(mids))
    report(4, dev.max() <= 1.0, c.elapsed, 30.0,
           f"max |n(r) - r^rho(r)| = {dev.max():.4f} over {len(mids)} midpoints above r* = {zs.r_star:.2f}")


def test_criterion_05_asymptotic_representation(lin, zs_big):
    with Clock() as c:
        th = np.linspace(math.pi / 2, 3 * math.pi / 2, 17)
        tab = product.verify_asymptotics(zs_big, lin, [1e2, 1e3, 1e4], th)
        m = tab.trend
    bounded = max(m) <= C_DEV
    no_growth = all(b <= 1.1 * a for a, b in zip(m, m[1:]))
    report(5, bounded and no_growth, c.elapsed, 60.0,
           f"max |D| = {', '.join(f'{v:.2f}' for v in m)} at r = 1e2, 1e3, 1e4; C_dev = {C_DEV:g}; "
           f"no growth: {no_growth}")


def test_criterion_06_bent_rays(lin, zs_big):
    with Clock() as c:
        grid = np.geomspace(30.0, 1e5, 20)
        rep = product.boundary_curve_check(zs_big, lin, grid)
        worst = max(max(v for _, v in rep.gamma_plus), max(v for _, v in rep.gamma_minus))
    report(6, rep.negative_beyond, c.elapsed, 30.0,
           f"reported r* = {rep.r_star:g}; max log|f(r e^(+-i eps))| on 20 radii in [30, 1e5] = {worst:.3g} < 0")


def test_criterion_07_series_suite(lin):
    with Clock() as c:
        geo = partial_sums(SeriesSpec("geometric_phi", x0=20.0), lin, 60)
        closed = 1.0 / ((lin.lam - 1.0) * float(lin.phi(20.0)))
        geo_ok = abs(geo.sums_hi[-1] - closed) <= 1e-10 * closed
        d0 = partial_sums(SeriesSpec("log_power", x0=20.0, delta=0.0), lin, 10000)
        inc = d0.sums_hi[9999] - d0.sums_hi[999]
        target = math.log(10) / math.log(lin.lam)
        d0_ok = abs(inc / target - 1) < 0.05
        d5 = partial_sums(SeriesSpec("log_power", x0=20.0, delta=0.5), lin, 10000)
        d5_v = divergence_verdict(d5.sums_hi, 1000).kind
        th = partial_sums(SeriesSpec("theta0_E_iterates", x0=20.0), lin, 10000)
        th_v = (divergence_verdict(th.sums_lo, 1000).kind, divergence_verdict(th.sums_hi, 1000).kind)
    ok = geo_ok and d0_ok and d5_v == "converged" and th_v == ("diverging", "diverging")
    report(7, ok, c.elapsed, 5.0,
           f"geometric err {abs(geo.sums_hi[-1] - closed) / closed:.1e}; delta=0 decade increment "
           f"{inc:.4f} vs {target:.4f}; delta=0.5 {d5_v}; theta0=2eps brackets {th_v[0]}/{th_v[1]}")


def test_criterion_08_theoretical_bound(lin):
    with Clock() as c:
        b = logdyn.theoretical_bound(lin, lambda e: 2.0 * e, re_w=300.0, K1=1.0, k_max=100000)
        upper = b.product_upper
        decreasing = bool(np.all(np.diff(upper) < 0))
        S = b.neglog_lo  # -log of the upper bracket
        k = b.k.astype(float)
        A = np.vstack([np.ones_like(k), np.log(k)]).T
        c_fit = float(np.linalg.lstsq(A, S, rcond=None)[0][1])
        grows = bool(np.all(S >= 0.5 * c_fit * np.log(k)))
        d = logdyn.theoretical_bound(lin, lambda e: e**1.5, re_w=300.0, K1=1.0, k_max=100000)
        tail = float(d.neglog_hi[-1] - d.neglog_hi[9999])
    ok = decreasing and grows and c_fit > 0 and tail < 1e-6
    report(8, ok, c.elapsed, 10.0,
           f"upper product strictly decreasing: {decreasing}; c_fit = {c_fit:.3e}, -log >= 0.5 c_fit log k: {grows}; "
           f"eps^1.5 tail increment over last decade = {tail:.2e}")


def test_criterion_09_growth_chain():
    with Clock() as c:
        f = ExpFamily()
        rows = []
        for r in (2.0, 5.0, 10.0):
            T = growth.nevanlinna_T(f, r)
            logM = growth.max_modulus(f, r).log_value
            T2 = growth.nevanlinna_T(f, 2 * r)
            rows.append((abs(T - r / math.pi), T <= logM <= 3 * T2 + 1e-6))
    ok = all(e <= 1e-6 and chain for e, chain in rows)
    report(9, ok, c.elapsed, 5.0, f"max |T - r/pi| = {max(e for e, _ in rows):.1e}; chain holds: {all(ch for _, ch in rows)}")


def test_criterion_10_el_condition():
    with Clock() as c:
        res = growth.el_condition(ExpFamily(), [10.0, 100.0, 1e3, 1e4], math.e)
        v = float(res.values[-1])
    # closed-form value of the same integral: pi + (pi log 2 - 2 int_0^{1/r} arcsin(x)/x dx) / log r
    x = 1e-4
    oracle = math.pi + (math.pi * math.log(2) - 2 * (x + x**3 / 18)) / math.log(1e4)
    rel = abs(v / math.pi - 1)
    report(10, rel <= 0.05, c.elapsed, 10.0,
           f"value at r = 1e4 is {v:.5f}, {100 * rel:.2f}% from pi (needs <= 5%); "
           f"closed-form oracle {oracle:.5f} (agreement {abs(v / oracle - 1):.1e})")


def test_criterion_11_expansion(zs_small):
    with Clock() as c:
        tm_e = logdyn.find_tracts(ExpFamily(0.1), 1.0, Box(-10, 10, -10, 10), 128)
        m_e = logdyn.expansion_margin(tm_e, logdyn.sample_tract_points(tm_e, 100, seed=0))
        tm_c = logdyn.find_tracts(CuiProduct(zs_small), 10.0, Box(-300, 300, -300, 300), 64)
        m_c = logdyn.expansion_margin(tm_c, logdyn.sample_tract_points(tm_c, 100, seed=0))
    ok = m_e.minimum >= 1 and m_c.minimum >= 1 and len(m_e.margins) == len(m_c.margins) == 100
    report(11, ok, c.elapsed, 30.0,
           f"min margin exp(0.1) = {m_e.minimum:.3f}, canonical product = {m_c.minimum:.3f} over 100 points each")


def test_criterion_12_escape_densities():
    with Clock() as c:
        box = Box(-3, 3, -3, 3)
        n_list = (1, 5, 10, 25)
        spec = ExpFamily(0.1)
        tm = logdyn.find_tracts(spec, 1.0, Box(-10, 10, -10, 10), 128)
        thr = math.exp(tm.R1)
        ret = logdyn.density_scan(spec, box, 512, 1e3, n_list, "retained_T_set", thr)
        d5, d25 = ret.density_retained[1], ret.density_retained[3]
        exp_ok = d25 < 0.5 * d5
        s1 = logdyn.density_scan(SinFamily(), box, 512, 1e3, n_list, workers=1)
        s8 = logdyn.density_scan(SinFamily(), box, 512, 1e3, n_list, workers=8)
        sin_ok = s1.density_escaped[-1] > SIN_ESCAPE_FLOOR
        same = np.array_equal(s1.escape_step, s8.escape_step) and np.array_equal(
            ret.drop_step, logdyn.density_scan(spec, box, 512, 1e3, n_list, "retained_T_set", thr, workers=8).drop_step)
    report(12, exp_ok and sin_ok and same, c.elapsed, 120.0,
           f"exp(0.1) retained density n=5: {d5:.4f}, n=25: {d25:.4f} (threshold e^R1 = {thr:.3f}; "
           f"needs n=25 < half of n=5); sin escape density n=25: {s1.density_escaped[-1]:.4f} > floor "
           f"{SIN_ESCAPE_FLOOR:g}; 1 vs 8 workers identical: {same}")


def test_criterion_13_koebe():
    with Clock() as c:
        k = logdyn.koebe_factors(0.5).astuple()
    want = (2 / 9, 2.0, 4 / 27, 12.0, 0.25)
    err = max(abs(a - b) for a, b in zip(k, want))
    report(13, err <= 1e-15, c.elapsed, 1.0, f"factors {tuple(round(v, 6) for v in k)}, max error {err:.1e}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
