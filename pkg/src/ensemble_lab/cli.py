"""Command-line entry point ``ensemble-lab``.

Exit codes: 0 success, 1 a scientific check failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, EnsembleLabError
from .io import RunManifest, atomic_write_json, atomic_write_text, render_svg

__all__ = ["main", "build_parser", "parse_grid"]


def parse_grid(text, name="grid"):
    """``"min:max:steps"`` to a uniform grid."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError("expected min:max:steps", name)
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"cannot parse {text!r}: {exc}", name) from exc
    if n < 2 or not hi > lo:
        raise ConfigError("need steps >= 2 and max > min", name)
    return np.linspace(lo, hi, n)


def _load(args, manifest, need_seed=False):
    from .model import load_model

    model = load_model(args.model)
    manifest.model_hash = model.model_hash()
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = model.seed
    if need_seed:
        if seed is None:
            raise ConfigError("a seed is required (model 'seed' field or --seed)", "seed")
        manifest.seeds["seed"] = int(seed)
    return model, seed


def _emit(manifest, path, text):
    manifest.add_output(atomic_write_text(path, text))


def cmd_validate(args, manifest):
    from .checks import validate_model

    model, _ = _load(args, manifest)
    checks = args.checks.split(",") if args.checks else None
    report = validate_model(model, checks, seed=args.check_seed)
    for e in report.entries:
        print(f"{'PASS' if e.passed else 'FAIL'}  {e.name}  margin={e.margin:.3g}")
    for k, v in model.assumptions.items():
        # recorded by the model author, never checked
        print(f"NOTE  assumption {k} = {v}")
        manifest.warnings.append(f"assumption {k} = {v} is declared, not verified")
    if args.out:
        manifest.add_output(atomic_write_json(args.out, report.to_dict()))
    return 0 if report.passed else 1


def cmd_micro(args, manifest):
    from .curves import concavity_check, curve_to_csv
    from .microcanonical import tail_curve, tail_logprob_direct
    from .wanglandau import WLParams

    model, seed = _load(args, manifest, need_seed=True)
    N = args.N if args.N is not None else model.N
    if N is None:
        raise ConfigError("particle count missing (model 'N' or --N)", "N")
    grid = parse_grid(args.e_grid, "--e-grid")
    manifest.budgets.update({"N": N, "samples": args.samples, "estimator": args.estimator})
    if args.estimator == "dos":
        curve = tail_curve(model, grid, args.samples, seed, args.direction, N, WLParams(), workers=args.workers)
        manifest.budgets["wang_landau"] = WLParams().to_dict()
    else:
        curve = tail_logprob_direct(model, grid, args.samples, seed, args.direction, N, workers=args.workers)
    _emit(manifest, args.out, curve_to_csv(curve, "e"))
    flagged = [f"e={e:.6g}: {f}" for e, f in zip(curve.x, curve.flags) if f]
    manifest.warnings.extend(flagged)
    if args.check_concavity:
        rep = concavity_check(curve)
        print(f"{'PASS' if rep.passed else 'FAIL'}  concavity_weak  margin={rep.entries[0].margin:.3g}")
        return 0 if rep.passed else 1
    return 0


def _measures_csv(dm, results):
    lines = ["beta,node,position,prior_weight,weight"]
    pos = dm.nodes if dm.nodes.ndim == 1 else np.linalg.norm(dm.nodes, axis=1)
    for res in results:
        if res is None:
            continue
        for k, (r, p, w) in enumerate(zip(pos, dm.prior_weights, res.measure.weights)):
            lines.append(f"{res.beta!r},{k},{float(r)!r},{float(p)!r},{float(w)!r}")
    return "\n".join(lines) + "\n"


def cmd_macro(args, manifest):
    from . import macroscopic as mc
    from .curves import curve_to_csv

    model, _ = _load(args, manifest)
    if not args.beta_grid and not args.e_grid:
        raise ConfigError("give --beta-grid and/or --e-grid", "--beta-grid")
    dm = mc.discretize(model, args.resolution, args.mode, R_trunc=args.truncation)
    manifest.budgets.update({"mode": args.mode, "resolution": args.resolution, "truncation": args.truncation,
                             "damping": args.damping, "tol": args.tol})
    manifest.warnings.extend(dm.warnings)
    solver = {"damping": args.damping, "tol": args.tol}
    prefix = args.out_prefix
    failed = False
    if args.beta_grid:
        F, results = mc.free_energy_curve(dm, parse_grid(args.beta_grid, "--beta-grid"), **solver)
        _emit(manifest, f"{prefix}_F.csv", curve_to_csv(F, "beta"))
        _emit(manifest, f"{prefix}_S_sweep.csv", curve_to_csv(mc.entropy_curve_from_sweep(F), "e"))
        _emit(manifest, f"{prefix}_measures.csv", _measures_csv(dm, results))
        manifest.budgets["residuals"] = F.meta["residuals"]
        manifest.warnings.extend(f"beta={b:.6g}: {f}" for b, f in zip(F.x, F.flags) if f)
        failed |= any(F.flags)
    if args.e_grid:
        S, _ = mc.entropy_curve_direct(dm, parse_grid(args.e_grid, "--e-grid"), on_error="flag", **solver)
        _emit(manifest, f"{prefix}_S.csv", curve_to_csv(S, "e"))
        manifest.warnings.extend(f"e={e:.6g}: {f}" for e, f in zip(S.x, S.flags) if f)
    return 1 if failed else 0


def cmd_duality(args, manifest):
    from . import duality as du
    from .curves import curve_from_csv, curve_to_csv

    def read(path):
        try:
            return curve_from_csv(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}", "csv") from exc

    if not args.s_curve and not args.f_curve:
        raise ConfigError("give --s-curve and/or --f-curve", "--s-curve")
    report, code = {}, 0
    prefix = args.out_prefix
    S = read(args.s_curve) if args.s_curve else None
    F = read(args.f_curve) if args.f_curve else None
    if F is not None:
        _emit(manifest, f"{prefix}_F_star.csv", curve_to_csv(du.legendre_concave(F), "e"))
    if S is not None:
        _emit(manifest, f"{prefix}_S_envelope.csv", curve_to_csv(du.concave_envelope(S), "e"))
        report["asymptotic_slope"] = du.asymptotic_slope(S, args.window).to_dict()
    if S is not None and F is not None:
        gap = du.equivalence_gap(S, F, args.tol_equiv)
        report["equivalence"] = gap.to_dict()
        print(f"{'PASS' if gap.verdict else 'FAIL'}  equivalence_gap={gap.gap:.3g}  at e={gap.argmax_e:.6g}")
        code = 0 if gap.verdict else 1
    manifest.add_output(atomic_write_json(f"{prefix}_report.json", report))
    return code


def cmd_critical(args, manifest):
    from . import duality as du

    model, seed = _load(args, manifest, need_seed=True)
    cfg = du.CrossCheckConfig(seed=int(seed), resolution=args.resolution, micro_N=args.micro_N,
                              micro_M=args.samples, window=args.window, dos=not args.no_dos)
    manifest.budgets.update(du.dataclasses.asdict(cfg))
    rep = du.critical_beta_crosscheck(model, cfg, workers=args.workers)
    manifest.add_output(atomic_write_json(args.out, rep.to_dict()))
    manifest.warnings.extend(f"{k}: {v}" for k, v in rep.errors.items())
    print(f"beta_analytic={rep.beta_analytic:g} macro={rep.beta_macro.get('value', float('nan')):.4g} "
          f"micro={rep.beta_micro.get('value', float('nan')):.4g} agreement={rep.agreement}")
    ok = bool(rep.agreement) and all(rep.agreement.values()) and not rep.errors
    return 0 if ok else 1


def cmd_demo(args, manifest):
    from .demo import run_demo

    summary = run_demo(args.name, args.out_dir, args.seed, manifest)
    manifest.seeds["seed"] = summary["seed"]
    for k, v in summary["checks"].items():
        print(f"{'PASS' if v else 'FAIL'}  {k}")
    return 0 if summary["passed"] else 1


def cmd_plot(args, manifest):
    from .curves import curve_from_csv

    series = []
    for p in args.csv:
        try:
            text = Path(p).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {p}: {exc}", "csv") from exc
        series.append((Path(p).stem, curve_from_csv(text)))
    x_name = series[0][1].meta.get("x_name", "x")
    _emit(manifest, args.out, render_svg(series, args.title or "", x_name, "value"))
    return 0


def _manifest_path(args):
    cmd = args.cmd
    if cmd == "validate":
        return f"{args.out}.manifest.json" if args.out else None
    if cmd in ("micro", "critical", "plot"):
        return f"{args.out}.manifest.json"
    if cmd in ("macro", "duality"):
        return f"{args.out_prefix}_manifest.json"
    if cmd == "demo":
        return str(Path(args.out_dir) / "manifest.json")
    return None


def build_parser():
    p = argparse.ArgumentParser(prog="ensemble-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("validate", help="run structural checks on a model")
    s.add_argument("--model", required=True, help="model JSON file")
    s.add_argument("--checks", help="comma-separated subset of checks")
    s.add_argument("--check-seed", type=int, default=0, help="seed for random test points")
    s.add_argument("--out", help="write the report as JSON here")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("micro", help="finite-N microcanonical tail curve")
    s.add_argument("--model", required=True)
    s.add_argument("--N", type=int)
    s.add_argument("--e-grid", required=True, help="min:max:steps")
    s.add_argument("--samples", type=int, default=200_000)
    s.add_argument("--seed", type=int)
    s.add_argument("--direction", choices=["upper", "lower"], default="upper")
    s.add_argument("--estimator", choices=["direct", "dos"], default="direct")
    s.add_argument("--workers", type=int)
    s.add_argument("--check-concavity", action="store_true", help="exit 1 if the weak concavity test fails")
    s.add_argument("--out", required=True, help="CSV output (e,value,stderr,flag)")
    s.set_defaults(func=cmd_micro)

    s = sub.add_parser("macro", help="free energy F(beta) and entropy S(e) on a grid")
    s.add_argument("--model", required=True)
    s.add_argument("--mode", choices=["radial", "planar"], default="radial")
    s.add_argument("--resolution", type=int, default=512)
    s.add_argument("--truncation", type=float, help="truncation radius for full-space models")
    s.add_argument("--beta-grid", help="min:max:steps")
    s.add_argument("--e-grid", help="min:max:steps")
    s.add_argument("--damping", type=float, default=1.0)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_macro)

    s = sub.add_parser("duality", help="Legendre transforms, envelope and equivalence gap of CSV curves")
    s.add_argument("--s-curve")
    s.add_argument("--f-curve")
    s.add_argument("--window", type=int, default=5)
    s.add_argument("--tol-equiv", type=float, default=1e-3)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_duality)

    s = sub.add_parser("critical", help="analytic, macroscopic and finite-N critical beta")
    s.add_argument("--model", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--window", type=int, default=5)
    s.add_argument("--resolution", type=int, default=512)
    s.add_argument("--micro-N", type=int, default=8)
    s.add_argument("--samples", type=int, default=200_000)
    s.add_argument("--no-dos", action="store_true")
    s.add_argument("--workers", type=int)
    s.add_argument("--out", required=True, help="JSON report")
    s.set_defaults(func=cmd_critical)

    s = sub.add_parser("demo", help="run a built-in preset end to end")
    s.add_argument("name", choices=["vortex", "catastrophe", "born-mayer"])
    s.add_argument("--seed", type=int)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_demo)

    s = sub.add_parser("plot", help="SVG line plot of CSV curves")
    s.add_argument("csv", nargs="+")
    s.add_argument("--title")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    manifest = RunManifest(command=" ".join(["ensemble-lab"] + list(sys.argv[1:] if argv is None else argv)),
                           version=__version__)
    start = time.perf_counter()
    try:
        code = args.func(args, manifest)
        manifest.status = "ok" if code == 0 else "check_failed"
    except EnsembleLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = exc.exit_code
        manifest.status = "error"
        manifest.error = str(exc)
    finally:
        manifest.wall_time = round(time.perf_counter() - start, 3)
        path = _manifest_path(args)
        if path:
            manifest.exit_code = locals().get("code")
            try:
                manifest.write(path)
            except OSError as exc:
                print(f"warning: manifest not written: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
