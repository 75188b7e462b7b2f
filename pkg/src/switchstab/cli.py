"""Command-line front end: ``switchstab {check,sweep,simulate,verify,lemmas}``."""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import lemmas, region, sim, stability
from .model import FIXTURES, ModelError, fixture_path, load_system

EXIT_OK, EXIT_ERROR, EXIT_UNSTABLE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _resolve_model(name):
    path = Path(name)
    if path.exists():
        return path
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    if stem in FIXTURES:
        return fixture_path(stem)
    raise FileNotFoundError(f"model file {name!r} not found (bundled fixtures: {', '.join(FIXTURES)})")


def _load(args):
    sysm = load_system(_resolve_model(args.model))
    if getattr(args, "d", None) is not None:
        if len(args.d) != sysm.m:
            raise ValueError(f"--d needs {sysm.m} values, got {len(args.d)}")
        sysm = sysm.with_dwell(args.d)
    return sysm


def _threads(args):
    return args.threads if args.threads is not None else sim.default_workers()


def _fmt(v):
    return f"{v:.17g}"


def cmd_check(args, out):
    sysm = _load(args)
    v = stability.check_stochastic_stability(sysm)
    if v.stable:
        print(f"Stable margin={_fmt(v.margin)} relative_margin={_fmt(v.relative_margin)}"
              f"{' marginal' if v.marginal else ''}", file=out)
        if args.cert:
            stability.save_certificate(v.certificate, args.cert)
    else:
        where = f" mode={v.mode}" if v.mode is not None else ""
        eigs = ",".join(_fmt(e) for e in v.min_eigs)
        print(f"Unstable reason={v.reason}{where} min_eigs=[{eigs}]"
              f"{' marginal' if v.marginal else ''}", file=out)
        if args.cert:
            print("no certificate written: system is not certified stable", file=sys.stderr)
    if args.fail_on_unstable and not v.stable:
        return EXIT_UNSTABLE
    return EXIT_OK


def cmd_verify(args, out):
    sysm = _load(args)
    cert = stability.load_certificate(args.cert)
    margin = stability.verify_certificate(sysm, cert)
    min_eigs = [stability.min_eig_sym(p) for p in cert.P]
    valid = margin < 0 and all(e > stability.pd_tolerance(p) for e, p in zip(min_eigs, cert.P))
    print(f"{'valid' if valid else 'invalid'} margin={_fmt(margin)} "
          f"min_eigs=[{','.join(_fmt(e) for e in min_eigs)}]", file=out)
    if args.fail_on_unstable and not valid:
        return EXIT_UNSTABLE
    return EXIT_OK


def cmd_sweep(args, out):
    sysm = _load(args)
    specs = args.grid.split(",")
    if len(specs) != 2:
        raise ValueError("--grid needs two axes: lo:hi:step,lo:hi:step")
    modes = args.axes if args.axes is not None else [0, 1]
    axes = tuple(region.parse_axis(s, int(mo)) for s, mo in zip(specs, modes))
    cfg = region.SweepConfig(sysm, axes, workers=_threads(args), marginal_band=args.marginal_band)
    grid = region.sweep(cfg)
    csv_path, svg_path = region.render_region(grid, args.out, title=Path(args.model).stem)
    print(f"{grid.stable.sum()} of {grid.stable.size} cells stable, {grid.marginal.sum()} marginal", file=out)
    print(f"wrote {csv_path} {svg_path}", file=out)
    return EXIT_OK


def cmd_simulate(args, out):
    sysm = _load(args)
    x0 = np.array(args.x0 if args.x0 is not None else [1.0] + [0.0] * (sysm.n - 1))
    est = sim.estimate_cost(sysm, x0, args.r0, args.runs, args.horizon, args.seed, workers=_threads(args))
    text = est.to_json()
    print(text, file=out)
    if args.out:
        prefix = Path(args.out)
        prefix.with_name(prefix.name + ".json").write_text(text + "\n")
        path = sim.replica_path(sysm, args.r0, args.horizon, args.seed, 0)
        dt = args.dt if args.dt is not None else args.horizon / 1000.0
        traj = sim.propagate(sysm, path, x0, dt)
        sim.write_trajectory_csv(traj, prefix.with_name(prefix.name + "_trajectory.csv"))
    return EXIT_OK


def cmd_lemmas(args, out):
    if args.rate is not None:
        grid = [(args.rate, args.a, args.b)]
    else:
        grid = [(lam, a, b) for lam in (0.5, 1.0, 2.0) for a in (-1.0, 0.0, 0.4 * lam) for b in (0.0, 1.0, 2.0)]
    print("rate a b closed_form mc_mean mc_std_error z", file=out)
    for lam, a, b in grid:
        exact = lemmas.exp_integral_expectation(lam, a, b)
        mean, se = lemmas.exp_integral_monte_carlo(lam, a, b, args.samples, args.seed)
        z = (mean - exact) / se if se > 0 else 0.0
        print(f"{lam:g} {a:g} {b:g} {exact:.10g} {mean:.10g} {se:.3g} {z:+.2f}", file=out)
    if args.matrix:
        A = np.array(json.loads(args.matrix), dtype=float)
        print(f"growth_constant {_fmt(lemmas.growth_constant(A))}", file=out)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="switchstab", description="Stochastic stability of dwell-time switched linear systems.")
    subs = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, dwell=True):
        sp.add_argument("--model", required=True, help="model JSON file or bundled fixture name")
        if dwell:
            sp.add_argument("--d", type=_floats, help="fixed dwell times, comma separated")
        sp.add_argument("--threads", type=int, help="worker count (default $SWITCHSTAB_THREADS or 1)")

    sp = subs.add_parser("check", help="decide stochastic stability")
    common(sp)
    sp.add_argument("--cert", help="write the certificate JSON here when stable")
    sp.add_argument("--fail-on-unstable", action="store_true")
    sp.set_defaults(func=cmd_check)

    sp = subs.add_parser("verify", help="re-check a certificate file")
    common(sp)
    sp.add_argument("--cert", required=True)
    sp.add_argument("--fail-on-unstable", action="store_true")
    sp.set_defaults(func=cmd_verify)

    sp = subs.add_parser("sweep", help="stability region over two dwell times")
    common(sp)
    sp.add_argument("--grid", default="0:5:0.1,0:5:0.1", help="lo:hi:step,lo:hi:step")
    sp.add_argument("--axes", type=lambda s: [int(v) for v in s.split(",")], help="modes swept (default 0,1)")
    sp.add_argument("--out", required=True, help="output prefix for .csv and .svg")
    sp.add_argument("--marginal-band", type=float, default=region.DEFAULT_MARGINAL_BAND)
    sp.set_defaults(func=cmd_sweep)

    sp = subs.add_parser("simulate", help="Monte Carlo estimate of the quadratic cost")
    common(sp)
    sp.add_argument("--x0", type=_floats)
    sp.add_argument("--r0", type=int, default=0, help="initial mode (0-based)")
    sp.add_argument("--runs", type=int, default=10000)
    sp.add_argument("--horizon", type=float, default=100.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="prefix for estimate JSON and replica-0 trajectory CSV")
    sp.add_argument("--dt", type=float, help="trajectory sample spacing (default horizon/1000)")
    sp.set_defaults(func=cmd_simulate)

    sp = subs.add_parser("lemmas", help="closed forms vs Monte Carlo spot checks")
    sp.add_argument("--rate", type=float)
    sp.add_argument("--a", type=float, default=0.0)
    sp.add_argument("--b", type=float, default=0.0)
    sp.add_argument("--samples", type=int, default=100000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--matrix", help="JSON matrix for the growth constant, e.g. '[[0,1],[-1,0]]'")
    sp.set_defaults(func=cmd_lemmas)
    return p


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    try:
        return args.func(args, out)
    except (ModelError, OSError, ValueError, KeyError) as exc:
        print(f"switchstab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
