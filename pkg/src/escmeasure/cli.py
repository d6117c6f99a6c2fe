"""Command-line entry point: ``escmeasure <subcommand> [flags]``.

Exit codes: 0 success, 2 parameter or domain error (the message names the
flag), 3 numeric failure (diagnostic payload printed).  Every run writes
``manifest.txt`` into ``--out``; feeding it back with ``--config`` repeats
the run.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys

import numpy as np

from . import growth, logdyn, product, schroeder, tower
from .errors import NumericError, ParameterError
from .functions import CuiProduct, ExpFamily, MittagLeffler, PowerPrecompose, Prescaled, Scaled, SinFamily

GLOBAL_KEYS = ("out", "workers", "hexfloat", "config", "subcommand")


# -- helpers ---------------------------------------------------------------------


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _fmt(args):
    return float.hex if args.hexfloat else repr


def _cfmt(args, z):
    f = _fmt(args)
    return f"{f(z.real)},{f(z.imag)}"


def _write(args, name, text, binary=False):
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, name)
    with open(path, "wb" if binary else "w") as fh:
        fh.write(text)
    return path


def _grid(args):
    if args.points < 2:
        raise ParameterError("need at least 2 points", flag="--points")
    if not (0 < args.r_min < args.r_max):
        raise ParameterError("need 0 < r-min < r-max", flag="--r-min")
    return np.geomspace(args.r_min, args.r_max, args.points)


def _lin(args):
    if not (0.0 < args.beta < 1.0 / math.e):
        raise ParameterError("beta must lie strictly inside (0, 1/e)", flag="--beta")
    return schroeder.Linearizer.from_beta(args.beta)


def _zeros(args, lin=None):
    lin = lin or _lin(args)
    return product.generate_zeros(lin, count=args.count, tail_tol=args.tail_tol)


def _family(args):
    fam = args.family
    if fam == "exp":
        f = ExpFamily(args.scale)
    elif fam == "sin":
        f = SinFamily(args.alpha, args.beta_s)
    elif fam == "ml":
        f = MittagLeffler(float(args.alpha.real))
    elif fam == "cui":
        f = CuiProduct(_zeros(args))
    else:
        raise ParameterError(f"unknown family {fam!r}", flag="--family")
    if args.power != 1:
        f = PowerPrecompose(args.power, f)
    if args.prescale != 1:
        f = Prescaled(args.prescale, f)
    if args.postscale != 1:
        f = Scaled(args.postscale, f)
    return f


def _add_beta(p):
    p.add_argument("--beta", type=float, default=0.2)


def _add_zero_flags(p):
    p.add_argument("--count", type=int, default=100000)
    p.add_argument("--tail-tol", type=float, default=1e-6)


def _add_family(p):
    p.add_argument("--family", choices=("exp", "sin", "ml", "cui"), default="exp")
    p.add_argument("--scale", type=complex, default=1.0)
    p.add_argument("--alpha", type=complex, default=1.0)
    p.add_argument("--beta-s", type=complex, default=0.0)
    p.add_argument("--power", type=int, default=1)
    p.add_argument("--prescale", type=complex, default=1.0)
    p.add_argument("--postscale", type=complex, default=1.0)
    _add_beta(p)
    _add_zero_flags(p)


def _add_grid(p, r_min=10.0, r_max=1e4, points=10):
    p.add_argument("--r-min", type=float, default=r_min)
    p.add_argument("--r-max", type=float, default=r_max)
    p.add_argument("--points", type=int, default=points)


# -- subcommands -------------------------------------------------------------------


def cmd_fixed_point(args):
    bp = schroeder.repelling_fixed_point(args.beta)
    print(f"xi={bp.xi!r} lambda={bp.lam!r}")


def cmd_schroeder(args):
    lin = _lin(args)
    f = _fmt(args)
    lines = ["r,phi,eps,rho,residual"]
    for r in args.r:
        s_next = schroeder.e_beta_log(lin, r)
        lhs = float(lin.phi_log(s_next))
        rhs = lin.lam * float(lin.phi(r))
        res = abs(lhs - rhs) / rhs
        lines.append(",".join(f(float(v)) for v in (r, lin.phi(r), lin.epsilon(r), lin.rho(r), res)))
    text = "\n".join(lines) + "\n"
    _write(args, "schroeder.csv", text)
    sys.stdout.write(text)


def cmd_prox_report(args):
    lin = _lin(args)
    rep = schroeder.proximate_order_report(lin, _grid(args), args.m_max, args.n)
    text = rep.to_csv(_fmt(args))
    _write(args, "prox_report.csv", text)
    sys.stdout.write(text)
    print(f"trend_violation={rep.trend_violation!r}")


def cmd_zeros(args):
    zs = _zeros(args)
    text = "\n".join(float(a).hex() for a in zs.zeros) + "\n"
    _write(args, "zeros.txt", text)
    print(f"count={zs.N} r_star={zs.r_star!r} pinned={zs.n_pinned} r_max_valid={zs.r_max_valid!r}")


def cmd_product_verify(args):
    lin = _lin(args)
    zs = _zeros(args, lin)
    thetas = np.linspace(math.pi / 2, 3 * math.pi / 2, args.angles)
    tab = product.verify_asymptotics(zs, lin, args.r, thetas)
    text = tab.to_csv(_fmt(args))
    _write(args, "product_verify.csv", text)
    sys.stdout.write(text)
    print(f"max_abs_deviation={tab.max_abs!r}")
    if args.boundary:
        grid = np.geomspace(max(zs.r_star, args.boundary_r_min), min(zs.r_max_valid, args.boundary_r_max), 20)
        b = product.boundary_curve_check(zs, lin, grid)
        neg = all(v < 0 for _, v in list(b.gamma_plus) + list(b.gamma_minus))
        print(f"bent_rays_negative={neg} sector_bound={b.sector_bound!r}")


def cmd_theta(args):
    spec = _family(args)
    f = _fmt(args)
    lines = ["r,theta"]
    flagged = 0
    for r in _grid(args):
        th = growth.theta_measure(spec, float(r), args.r0, args.samples, args.workers)
        flagged += len(th.tangential)
        lines.append(f"{f(float(r))},{f(th.theta)}")
    text = "\n".join(lines) + "\n"
    _write(args, "theta.csv", text)
    sys.stdout.write(text)
    print(f"tangential_flags={flagged}")


def cmd_growth_report(args):
    spec = _family(args)
    rep = growth.growth_report(spec, _lin(args), _grid(args), args.tracts, workers=args.workers)
    text = rep.to_csv(_fmt(args))
    _write(args, "growth_report.csv", text)
    sys.stdout.write(text)
    print(f"dca_constant={rep.dca_constant!r} cui_constant={rep.cui_constant!r} flags={list(rep.flags)}")


def cmd_nevanlinna(args):
    spec = _family(args)
    T = growth.nevanlinna_T(spec, args.r)
    logM = growth.max_modulus(spec, args.r).log_value
    out = f"T={T!r} logM={logM!r}"
    if args.a is not None:
        m = growth.proximity(spec, args.r, args.a)
        N = growth.nevanlinna_N(spec, args.r, args.a)
        out += f" m={m!r} N={N!r} T_minus_m_minus_N={T - m - N!r}"
    print(out)


def cmd_el(args):
    spec = _family(args)
    res = growth.el_condition(spec, _grid(args), args.r0, workers=args.workers)
    f = _fmt(args)
    lines = ["r,el,liminf"] + [f"{f(float(a))},{f(float(b))},{f(float(c))}"
                               for a, b, c in zip(res.r, res.values, res.liminf)]
    text = "\n".join(lines) + "\n"
    _write(args, "el.csv", text)
    sys.stdout.write(text)


def cmd_cui_cond(args):
    spec = _family(args)
    res = growth.cui_condition(spec, args.r, args.c, lambda r: args.a_const, args.r0, workers=args.workers)
    print(f"lhs={res.lhs!r} rhs={res.rhs!r} holds={res.holds} lower={res.lower!r}" + (f" note={res.note!r}" if res.note else ""))


def cmd_tsuji(args):
    spec = _family(args)
    res = growth.tsuji_check(spec, args.r, args.r0, args.alpha_r, args.r1)
    print(f"loglogMG={res.loglog_MG!r} integral={res.integral!r} gap={res.gap!r}")


def _tract_map(args):
    if args.region is None:
        raise ParameterError("a search region is required", flag="--region")
    return logdyn.find_tracts(_family(args), args.r0, logdyn.Box.parse(args.region), args.grid)


def cmd_tracts(args):
    tm = _tract_map(args)
    print(f"N={tm.N} R={tm.R!r} R1={tm.R1!r} merged={tm.merged}")
    for i, t in enumerate(tm.tracts):
        print(f"tract={i} base={t.base!r} anchor={t.anchor!r} pixels={t.pixels}")


def cmd_lift(args):
    tm = _tract_map(args)
    F, dF = logdyn.lift_F(tm, args.w)
    margin = 4 * math.pi * abs(dF) / (F.real - tm.R)
    print(f"F={F!r} dF={dF!r} margin={margin!r}")


def cmd_escape(args):
    spec = _family(args)
    if args.action == "classify":
        r = logdyn.escape_classify(spec, args.z, args.resc, args.nmax)
        print(f"escaped={r.escaped} step={r.step}")
        return
    if args.region is None:
        raise ParameterError("escape scan needs a region x0:x1:y0:y1", flag="--region")
    box = logdyn.Box.parse(args.region)
    threshold = args.threshold
    if args.mode == "retained_T_set" and threshold is None:
        tm = logdyn.find_tracts(spec, args.r0, logdyn.Box.parse(args.tract_box), 128)
        threshold = math.exp(tm.R1)
        print(f"threshold_surrogate={threshold!r}")
    rep = logdyn.density_scan(spec, box, args.res, args.resc, _ints(args.nlist), args.mode, threshold, args.workers)
    text = rep.to_csv(_fmt(args))
    _write(args, "density.csv", text)
    _write(args, "density.pgm", rep.pgm(), binary=True)
    sys.stdout.write(text)


def _theta0(args):
    if args.theta0 == "2eps":
        return lambda e: 2.0 * e
    if args.theta0 == "eps-power":
        p = args.theta0_power
        return lambda e: e**p
    raise ParameterError(f"unknown theta0 {args.theta0!r}", flag="--theta0")


def cmd_density_bound(args):
    lin = _lin(args)
    res = logdyn.theoretical_bound(lin, _theta0(args), args.re_w, args.k1, args.kmax, args.R)
    f = _fmt(args)
    lines = ["k,term_lo,term_hi,product_lo,product_hi"]
    pu, pl = res.product_upper, res.product_lower
    for i in range(len(res.k)):
        lines.append(f"{res.k[i]},{f(float(res.terms_lo[i]))},{f(float(res.terms_hi[i]))},"
                     f"{f(float(pl[i]))},{f(float(pu[i]))}")
    _write(args, "density_bound.csv", "\n".join(lines) + "\n")
    print(f"r1_surrogate={res.r1_surrogate!r} product_lo={float(pl[-1])!r} product_hi={float(pu[-1])!r}")
    print(res.verdict.line())


def cmd_series(args):
    lin = _lin(args)
    kind = args.kind.replace("-", "_")
    theta0 = _theta0(args) if kind == "theta0_E_iterates" else None
    spec = tower.SeriesSpec(kind, x0=args.x0, delta=args.delta, theta0=theta0,
                            A=(lambda t: args.a_const) if kind == "inverse_A_E_iterates" else None)
    ps = tower.partial_sums(spec, lin, args.k)
    text = ps.to_csv(_fmt(args))
    _write(args, "series.csv", text)
    sys.stdout.write(text)
    window = args.window or max(2, args.k // 10)
    if ps.closed_form is not None:
        print(f"closed_form={ps.closed_form!r}")
    print(tower.divergence_verdict(ps.sums_hi, window).line())


# -- parser --------------------------------------------------------------------------


def build_parser():
    def globals_parser(suppress):
        g = argparse.ArgumentParser(add_help=False)
        # inside a subcommand the flags must not overwrite values given before it
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--out", default=d("."))
        g.add_argument("--workers", type=int, default=d(1))
        g.add_argument("--hexfloat", action="store_true", default=d(False))
        g.add_argument("--config", default=d(None))
        return g

    common = globals_parser(True)
    ap = argparse.ArgumentParser(prog="escmeasure", parents=[globals_parser(False)])
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def add(name, fn):
        p = sub.add_parser(name, parents=[common])
        p.set_defaults(func=fn)
        return p

    p = add("fixed-point", cmd_fixed_point)
    _add_beta(p)

    p = add("schroeder", cmd_schroeder)
    _add_beta(p)
    p.add_argument("--r", type=_floats, default=[20.0, 100.0, 1e3, 1e6])

    p = add("prox-report", cmd_prox_report)
    _add_beta(p)
    _add_grid(p, 1e3, 1e8, 6)
    p.add_argument("--m-max", type=int, default=3)
    p.add_argument("--n", type=int, default=5)

    p = add("zeros", cmd_zeros)
    _add_beta(p)
    _add_zero_flags(p)

    p = add("product-verify", cmd_product_verify)
    _add_beta(p)
    _add_zero_flags(p)
    p.add_argument("--r", type=_floats, default=[1e2, 1e3, 1e4])
    p.add_argument("--angles", type=int, default=17)
    p.add_argument("--boundary", action="store_true")
    p.add_argument("--boundary-r-min", type=float, default=0.0)
    p.add_argument("--boundary-r-max", type=float, default=1e5)

    p = add("theta", cmd_theta)
    _add_family(p)
    _add_grid(p)
    p.add_argument("--r0", type=float, default=math.e)
    p.add_argument("--samples", type=int, default=256)

    p = add("growth-report", cmd_growth_report)
    _add_family(p)
    _add_grid(p, 100.0, 1e4, 9)
    p.add_argument("--tracts", type=int, default=None)

    p = add("nevanlinna", cmd_nevanlinna)
    _add_family(p)
    p.add_argument("--r", type=float, default=5.0)
    p.add_argument("--a", type=complex, default=None)

    p = add("el", cmd_el)
    _add_family(p)
    _add_grid(p, 10.0, 1e4, 4)
    p.add_argument("--r0", type=float, default=math.e)

    p = add("cui-cond", cmd_cui_cond)
    _add_family(p)
    p.add_argument("--r", type=float, default=1e4)
    p.add_argument("--c", type=float, default=63.0 / 65.0)
    p.add_argument("--a-const", type=float, default=1.0)
    p.add_argument("--r0", type=float, default=math.e)

    p = add("tsuji", cmd_tsuji)
    _add_family(p)
    p.add_argument("--r", type=float, default=1e3)
    p.add_argument("--r0", type=float, default=math.e)
    p.add_argument("--alpha-r", type=float, default=0.5)
    p.add_argument("--r1", type=float, default=2.0)

    for name, fn in (("tracts", cmd_tracts), ("lift", cmd_lift)):
        p = add(name, fn)
        _add_family(p)
        p.add_argument("--r0", type=float, default=math.e**2)
        p.add_argument("--region", default=None)
        p.add_argument("--grid", type=int, default=128)
        if name == "lift":
            p.add_argument("--w", type=complex, required=True)

    p = add("escape", cmd_escape)
    p.add_argument("action", choices=("scan", "classify"), nargs="?", default="scan")
    _add_family(p)
    p.add_argument("--region", default=None)
    p.add_argument("--res", type=int, default=512)
    p.add_argument("--nlist", default="1,5,10,25")
    p.add_argument("--resc", type=float, default=1e3)
    p.add_argument("--mode", choices=logdyn.MODES, default="escape_set")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--r0", type=float, default=1.0)
    p.add_argument("--tract-box", default="-10:10:-10:10")
    p.add_argument("--z", type=complex, default=0j)
    p.add_argument("--nmax", type=int, default=50)

    p = add("density-bound", cmd_density_bound)
    _add_beta(p)
    p.add_argument("--theta0", choices=("2eps", "eps-power"), default="2eps")
    p.add_argument("--theta0-power", type=float, default=1.5)
    p.add_argument("--re-w", type=float, default=300.0)
    p.add_argument("--k1", type=float, default=1.0)
    p.add_argument("--kmax", type=int, default=100000)
    p.add_argument("--R", type=float, default=0.0)

    p = add("series", cmd_series)
    _add_beta(p)
    p.add_argument("--kind", choices=[k.replace("_", "-") for k in tower.KINDS] + list(tower.KINDS),
                   default="geometric-phi")
    p.add_argument("--x0", type=float, default=20.0)
    p.add_argument("--k", type=int, default=60)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--theta0", choices=("2eps", "eps-power"), default="2eps")
    p.add_argument("--theta0-power", type=float, default=1.5)
    p.add_argument("--a-const", type=float, default=1.0)
    return ap, sub


def _read_config(path):
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{n}: expected key=value", flag="--config")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _join_negative_values(argv):
    """Attach values such as -3:3:-3:3 or -1+2j to the preceding flag."""
    out = []
    for tok in argv:
        if out and re.match(r"^-[\d.]", tok) and out[-1].startswith("--") and "=" not in out[-1] \
                and out[-1] not in ("--hexfloat", "--boundary"):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def _apply_config(ap, sub, argv):
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    args = ap.parse_args(argv)
    if not args.config:
        return args
    cfg = _read_config(args.config)
    sp = sub.choices[args.subcommand]
    actions = {a.dest: a for a in sp._actions if a.dest != "help"}
    actions.update({a.dest: a for a in ap._actions if a.dest in GLOBAL_KEYS})
    defaults = {}
    for k, v in cfg.items():
        if k in ("subcommand", "config", "func"):
            continue
        if k not in actions:
            raise ParameterError(f"unknown config key {k!r}", flag="--config")
        a = actions[k]
        if isinstance(a, argparse._StoreTrueAction):
            defaults[k] = v.lower() in ("1", "true", "yes")
        elif v == "None":
            defaults[k] = None
        elif a.type is not None:
            defaults[k] = a.type(v)
        else:
            defaults[k] = v
    top = {k: v for k, v in defaults.items() if k in GLOBAL_KEYS}
    ap.set_defaults(**top)
    sp.set_defaults(**{k: v for k, v in defaults.items() if k not in GLOBAL_KEYS})
    return ap.parse_args(argv)


def _manifest(args):
    lines = [f"subcommand={args.subcommand}"]
    for k, v in sorted(vars(args).items()):
        if k in ("func", "subcommand", "config"):
            continue
        if isinstance(v, list):
            v = ",".join(repr(x) for x in v)
        lines.append(f"{k}={v}")
    _write(args, "manifest.txt", "\n".join(lines) + "\n")


def main(argv=None) -> int:
    ap, sub = build_parser()
    try:
        args = _apply_config(ap, sub, argv)
        if args.workers < 1:
            raise ParameterError("workers must be >= 1", flag="--workers")
        _manifest(args)
        args.func(args)
    except ParameterError as exc:
        flag = f" [{exc.flag}]" if exc.flag else ""
        print(f"error{flag}: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        for k, v in exc.payload.items():
            print(f"  {k}={v!r}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error [--out]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
