"""Command line front end: ``fracbound <command> ...``.

Exit status is 0 on success or a PASS verdict, 2 on a FAIL verdict and 1
on any error.
"""
from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import capacity, constants, fatness, gagliardo, io, pipeline, spectral
from .geometry import inradius, topology_order

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _number(text: str) -> float:
    """Accept ``0.25`` as well as ``1/4``."""
    return float(Fraction(text)) if "/" in text else float(text)


def _numbers(text: str) -> list[float]:
    return [_number(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _point(text: str) -> tuple[float, float]:
    v = _numbers(text)
    if len(v) != 2:
        raise argparse.ArgumentTypeError("expected x,y")
    return v[0], v[1]


def _param(text: str) -> tuple[str, float]:
    k, sep, v = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected key=value")
    x = _number(v)
    # integral values stay integers so that orders and seeds index correctly
    return k.strip(), int(x) if float(x).is_integer() else x


class Output:
    """Writes results to stdout, and to ``--out`` when given."""

    def __init__(self, args):
        self.fmt = args.format
        self.dir = Path(args.out) if args.out else None
        self.plot = args.plot
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, rows, obj=None):
        rows = io.records(rows)
        text = io.to_json(obj if obj is not None else rows) if self.fmt == "json" else io.to_csv(rows)
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        if self.dir:
            (self.dir / f"{name}.{self.fmt}").write_text(text)

    def file(self, name: str, text: str):
        if self.dir is None:
            raise ValueError("--plot needs --out DIR")
        (self.dir / name).write_text(text)


def _table(args, estimate: bool = True) -> constants.ConstantsTable:
    return constants.load_table(args.config, estimate=estimate)


def _warn_heuristic(heuristic: bool):
    if heuristic:
        print("WARNING: heuristic certificate, some constants are corpus estimates", file=sys.stderr)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_domain(args, out: Output) -> int:
    if args.action == "build":
        spec = pipeline.FamilySpec(args.family, args.h, dict(args.param or []))
        dom = pipeline.build_family(spec)
        if args.file:
            io.write_raster(dom, args.file)
        else:
            sys.stdout.write(io.dumps_raster(dom))
        return EXIT_OK
    dom = io.read_raster(args.file)
    topo = topology_order(dom)
    x0, y0, x1, y1 = dom.bbox()
    info = {"label": dom.label, "nx": dom.nx, "ny": dom.ny, "h": dom.h, "inside_nodes": dom.n_inside,
            "punctures": len(dom.punctures), "k": topo.k, "holes": len(topo.bounded_components),
            "inradius": inradius(dom), "x0": x0, "y0": y0, "x1": x1, "y1": y1}
    out.emit("domain", [info], info)
    return EXIT_OK


def cmd_eig(args, out: Output) -> int:
    dom = io.read_raster(args.domain)
    res = spectral.eigenvalue(dom, args.s, args.tol, remove_punctures=args.remove_punctures)
    row = {"s": args.s, "lambda": res.lam, "iterations": res.iterations, "residual": res.residual,
           "method": res.method, "nodes": dom.n_inside}
    out.emit("eig", [row], row)
    return EXIT_OK


def cmd_cap(args, out: Output) -> int:
    dom = io.read_raster(args.domain)
    if args.disk:
        cx, cy, r = args.disk
        sigma = capacity.disk_nodes(dom, (cx, cy), r)
    else:
        cx, cy, r = args.square
        sigma = capacity.square_nodes(dom, (cx, cy), r)
    sigma &= dom.mask
    res = capacity.capacity(sigma, dom.mask, gagliardo.assemble_2d(dom, args.s), args.tol, args.method)
    row = {"s": args.s, "value": res.value, "kkt_residual": res.kkt_residual,
           "active_set": int(np.count_nonzero(res.active_set)), "sigma_nodes": int(sigma.sum()),
           "iterations": res.iterations, "method": res.method}
    out.emit("cap", [row], row)
    return EXIT_OK


def cmd_fatness(args, out: Output) -> int:
    dom = io.read_raster(args.domain)
    cert = fatness.fatness_certificate(dom, args.center)
    row = {"k": cert.k, "r": cert.r, "delta": cert.delta, "reliable": len(cert.reliable),
           "proj_e1": cert.proj_e1.length, "proj_e2": cert.proj_e2.length, "bound": cert.bound,
           "holds": cert.holds(), "trivial": cert.trivial}
    if out.fmt == "json":
        sys.stdout.write(cert.to_json() + "\n")
        if out.dir:
            (out.dir / "fatness.json").write_text(cert.to_json())
    else:
        out.emit("fatness", [row])
    if out.plot:
        out.file("fatness.svg", cert.to_svg())
    return EXIT_OK if cert.holds() else EXIT_FAIL


def cmd_bound(args, out: Output) -> int:
    dom = io.read_raster(args.domain)
    table = _table(args)
    cert = pipeline.lower_bound_certificate(dom, args.s, table, args.path, args.r_ratio)
    _warn_heuristic(cert.heuristic)
    if out.fmt == "json":
        out.emit("bound", [], cert)
    else:
        out.emit("bound", [{"tile": f"{t.index[0]},{t.index[1]}", **{k: v for k, v in io.records([t])[0].items()
                                                                      if k != "index"}} for t in cert.tiles])
        print(f"# lower={cert.lower:.10g} pipeline={cert.bound_pipeline:.10g} "
              f"closed_form={cert.bound_closed_form:.10g} heuristic={cert.heuristic}")
    return EXIT_OK


def cmd_verify(args, out: Output) -> int:
    dom = io.read_raster(args.domain)
    table = _table(args)
    if args.inflate != 1.0:
        table = pipeline.inflated(table, args.inflate)
    rep = pipeline.verify_main_theorem(dom, args.s, table, args.tol, args.path)
    _warn_heuristic(rep.heuristic)
    row = {**io.records([rep])[0], "verdict": rep.verdict}
    out.emit("verify", [row], row)
    return EXIT_OK if rep.verdict == "PASS" else EXIT_FAIL


def cmd_sweep(args, out: Output) -> int:
    if args.kind == "k":
        h = args.h
        rows, spread = spectral.k_sweep(lambda k: (pipeline.omega_k(k, h), pipeline.shell_of(k, h)),
                                        args.k, args.s[0])
        x, ys = "k", ["scaled", "lam", "lam_shell"]
    elif args.kind == "s":
        rows, spread = pipeline.s_half_sweep(args.k[0], args.s, h=args.h, eig=args.eig)
        x, ys = "s", ["ratio", "upper"]
    else:
        build = lambda h: pipeline.build_family(pipeline.FamilySpec("square", h))
        rows = spectral.bbm_sweep(build, args.h, args.s, 2.0 * math.pi**2, extrapolate=not args.no_richardson)
        spread = math.nan
        x, ys = "s", ["scaled", "target_half", "target_gradient"]
    recs = io.records(rows)
    out.emit(f"sweep_{args.kind}", recs, {"rows": recs, "spread": spread})
    if math.isfinite(spread):
        print(f"# max/min spread {spread:.6g}", file=sys.stderr)
    if out.plot:
        out.file(f"sweep_{args.kind}.svg", io.svg_plot(recs, x, ys, f"sweep {args.kind}", log_y=args.kind == "k"))
    return EXIT_OK


def cmd_constants(args, out: Output) -> int:
    table = _table(args, estimate=not args.no_estimate)
    if out.fmt == "json":
        obj = {f"{s:g}": table.snapshot(s) for s in args.s}
        if table.phi22 and table.A_dir:
            for s in args.s:
                if s > 0.5:
                    obj[f"{s:g}"]["theta"] = table.theta(s)
        out.emit("constants", [], obj)
    else:
        text = table.to_csv(args.s)
        sys.stdout.write(text)
        if out.dir:
            (out.dir / "constants.csv").write_text(text)
    _warn_heuristic(table.heuristic)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    def global_flags(q, default):
        # subcommands repeat the flags without defaults so they never clobber the top-level values
        dflt = (lambda v: v) if default else (lambda v: argparse.SUPPRESS)
        q.add_argument("--config", default=dflt(None), help="key=value file with A_dir, M_pw, phi22")
        q.add_argument("--out", default=dflt(None), help="directory for result files")
        q.add_argument("--format", choices=("csv", "json"), default=dflt("csv"))
        q.add_argument("--plot", action="store_true", default=dflt(False), help="write SVG figures into --out")

    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, default=False)
    p = argparse.ArgumentParser(prog="fracbound",
                                description="Fractional Dirichlet eigenvalues and inradius lower bounds on rasters.")
    global_flags(p, default=True)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("domain", parents=[common], help="build or describe raster domains")
    dsub = d.add_subparsers(dest="action", required=True)
    b = dsub.add_parser("build", parents=[common])
    b.add_argument("--family", required=True,
                   choices=("shell_slug", "comb_window", "disk", "square", "annulus", "random_perforated"))
    b.add_argument("--h", type=_number, required=True)
    b.add_argument("--param", type=_param, action="append", metavar="KEY=VALUE")
    b.add_argument("file", nargs="?")
    i = dsub.add_parser("info", parents=[common])
    i.add_argument("file")

    def order(q, default="0.75", many=False):
        q.add_argument("--s", type=_numbers if many else _number, default=_numbers(default) if many else _number(default))

    e = sub.add_parser("eig", parents=[common], help="smallest discrete eigenvalue")
    e.add_argument("--domain", required=True)
    order(e)
    e.add_argument("--tol", type=float, default=1e-8)
    e.add_argument("--remove-punctures", action="store_true")

    c = sub.add_parser("cap", parents=[common], help="relative capacity of a disk or square inside the domain")
    c.add_argument("--domain", required=True)
    order(c)
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--disk", type=_numbers, metavar="CX,CY,R")
    g.add_argument("--square", type=_numbers, metavar="CX,CY,HALF")
    c.add_argument("--tol", type=float, default=1e-10)
    c.add_argument("--method", choices=("active-set", "projected-gradient"), default="active-set")

    f = sub.add_parser("fatness", parents=[common], help="fatness certificate of one tile")
    f.add_argument("--domain", required=True)
    f.add_argument("--center", type=_point, default=(0.0, 0.0))

    for name, hlp in (("bound", "lower-bound certificate"), ("verify", "lower <= eig <= upper check")):
        q = sub.add_parser(name, parents=[common], help=hlp)
        q.add_argument("--domain", required=True)
        order(q)
        q.add_argument("--path", choices=("analytic", "qp"), default="analytic")
        if name == "bound":
            q.add_argument("--r-ratio", type=float, default=2.0, help="R/r of the capacity disk (qp path)")
        else:
            q.add_argument("--tol", type=float, default=1e-6)
            q.add_argument("--inflate", type=float, default=1.0, help="multiply phi22 by this factor")

    sw = sub.add_parser("sweep", parents=[common], help="parameter sweeps")
    sw.add_argument("kind", choices=("k", "s", "bbm"))
    sw.add_argument("--k", type=_ints, default=[2, 5, 10])
    sw.add_argument("--s", type=_numbers, default=None)
    sw.add_argument("--h", type=_number, default=None)
    sw.add_argument("--eig", action="store_true", help="add comb-window eigenvalues (sweep s)")
    sw.add_argument("--no-richardson", action="store_true")

    k = sub.add_parser("constants", parents=[common], help="table of constants with provenance")
    k.add_argument("--s", type=_numbers, default=[0.6, 0.75, 0.9])
    k.add_argument("--no-estimate", action="store_true", help="leave unconfigured constants empty")
    return p


SWEEP_DEFAULTS = {"k": ([0.75], 0.25), "s": ([0.55, 0.6, 0.65], 0.25), "bbm": ([0.6, 0.8, 0.95], 1 / 16)}

COMMANDS = {"domain": cmd_domain, "eig": cmd_eig, "cap": cmd_cap, "fatness": cmd_fatness, "bound": cmd_bound,
            "verify": cmd_verify, "sweep": cmd_sweep, "constants": cmd_constants}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if args.command == "sweep":
        s_def, h_def = SWEEP_DEFAULTS[args.kind]
        args.s = args.s or s_def
        args.h = args.h or h_def
    if args.command == "cap" and len(args.disk or args.square) != 3:
        print("error: region needs three numbers", file=sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](args, Output(args))
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
