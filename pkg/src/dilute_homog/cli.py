"""Batch command-line front end.

Subcommands: sample, solve, sweep, plot. Exit codes: 0 success,
1 configuration error, 2 I/O error, 3 numerical non-convergence.
All randomness flows from explicit --seed flags / config fields.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .errors import ConfigError, DomainError, NonConvergenceError
from .microstructure import GridField, InclusionSet, geometry_report, rasterize
from .phases import PhaseModel
from .point_process import (PointSample, TorusSpec, sample_jittered_lattice,
                            sample_matern2, sample_poisson)
from .corrector_fft import SolverConfig, effective_tensor
from .dilute_experiment import (DiluteSweepReport, SweepConfig, cm_gap_table,
                                run_sweep)
from .plotting import svg_plot


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser():
    p = _Parser(prog="dilute-homog",
                description="effective conductivity of dilute sphere composites")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("sample", help="draw point samples and geometry reports")
    ps.add_argument("--process", required=True,
                    choices=["poisson", "matern2", "jittered_lattice"])
    ps.add_argument("--lambda", dest="lam", type=float, default=None,
                    help="intensity (poisson) or parent intensity (matern2)")
    ps.add_argument("--r-hard", type=float, default=None)
    ps.add_argument("--spacing", type=float, default=None)
    ps.add_argument("--jitter", type=float, default=0.0)
    ps.add_argument("--L", type=float, required=True)
    ps.add_argument("--d", type=int, default=2)
    ps.add_argument("--seed", type=int, required=True)
    ps.add_argument("--count", type=int, default=1)
    ps.add_argument("--out", default="sample")

    pv = sub.add_parser("solve", help="solve the corrector and print Abar")
    pv.add_argument("--sample", default=None, help="point-sample text file")
    pv.add_argument("--process", default=None,
                    choices=["poisson", "matern2", "jittered_lattice"])
    pv.add_argument("--lambda", dest="lam", type=float, default=None)
    pv.add_argument("--r-hard", type=float, default=None)
    pv.add_argument("--spacing", type=float, default=None)
    pv.add_argument("--jitter", type=float, default=0.0)
    pv.add_argument("--L", type=float, default=None)
    pv.add_argument("--d", type=int, default=2)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--field", default=None, help="grid-field binary dump")
    pv.add_argument("--alpha", type=float, default=None)
    pv.add_argument("--beta", type=float, default=None)
    pv.add_argument("--A1", default=None, help="row-major JSON matrix")
    pv.add_argument("--A2", default=None, help="row-major JSON matrix")
    pv.add_argument("--N", type=int, default=None)
    pv.add_argument("--scheme", default="conjugate_gradient",
                    choices=["conjugate_gradient", "fixed_point"])
    pv.add_argument("--tol", type=float, default=1e-8)
    pv.add_argument("--alpha0", type=float, default=None)
    pv.add_argument("--max-iter", type=int, default=10_000)
    pv.add_argument("--record", default="solve_record.json")

    pw = sub.add_parser("sweep", help="run a dilute sweep from a JSON config")
    pw.add_argument("--config", required=True)
    pw.add_argument("--out", default="sweep_out")
    pw.add_argument("--seed", type=int, default=None, help="override seed_base")
    pw.add_argument("--ensemble-size", type=int, default=None)
    pw.add_argument("--threads", type=int, default=None)
    pw.add_argument("--plot", action="store_true")
    pw.add_argument("--resume", action="store_true",
                    help="reuse completed checkpoint blocks")

    pp = sub.add_parser("plot", help="re-plot from an existing report CSV")
    pp.add_argument("--report", required=True)
    pp.add_argument("--out", default="sweep_plot")
    return p


def _num_threads(flag):
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("DILUTE_HOMOG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"DILUTE_HOMOG_THREADS is not an integer: {env!r}")
    return os.cpu_count() or 1


def _draw(args):
    torus = TorusSpec(args.d, args.L)
    if args.process == "poisson":
        if args.lam is None or args.lam <= 0:
            raise ConfigError("--lambda must be > 0 for a poisson process")
        return lambda seed: sample_poisson(args.lam, torus, seed)
    if args.process == "matern2":
        if args.lam is None or args.lam <= 0:
            raise ConfigError("--lambda must be > 0 for matern2")
        if args.r_hard is None or args.r_hard <= 0:
            raise ConfigError("--r-hard must be > 0 for matern2")
        return lambda seed: sample_matern2(args.lam, args.r_hard, torus, seed)
    if args.spacing is None or args.spacing <= 0:
        raise ConfigError("--spacing must be > 0 for jittered_lattice")
    return lambda seed: sample_jittered_lattice(args.spacing, args.jitter,
                                                torus, seed)


def cmd_sample(args):
    draw = _draw(args)
    for i in range(args.count):
        sample = draw(args.seed + i)
        base = f"{args.out}_{i:03d}" if args.count > 1 else args.out
        with open(base + ".pts", "w") as f:
            f.write(sample.to_text())
        rep = geometry_report(sample)
        with open(base + ".geom", "w") as f:
            f.write(rep.to_text())
        print(f"{base}.pts: {len(sample)} points, "
              f"{len(rep.clusters)} clusters, phi={rep.phi_hat:.4g}")
    return 0


def _phases_from_args(args, d):
    if args.A1 is not None or args.A2 is not None:
        if args.A1 is None or args.A2 is None:
            raise ConfigError("give both --A1 and --A2")
        return PhaseModel(np.array(json.loads(args.A1), dtype=float),
                          np.array(json.loads(args.A2), dtype=float))
    if args.alpha is None or args.beta is None:
        raise ConfigError("phases missing: give --alpha/--beta or --A1/--A2")
    return PhaseModel.isotropic(args.alpha, args.beta, d)


def cmd_solve(args):
    if args.field is not None:
        fld = GridField.load(args.field)
    else:
        if args.sample is not None:
            with open(args.sample) as f:
                sample = PointSample.from_text(f.read())
        else:
            if args.process is None or args.L is None:
                raise ConfigError("give --sample, --field, or --process with --L")
            sample = _draw(args)(args.seed)
        if args.N is None:
            raise ConfigError("--N is required when rasterizing a sample")
        phases = _phases_from_args(args, sample.torus.d)
        fld = rasterize(InclusionSet(sample), phases, args.N)
    cfg = SolverConfig(scheme=args.scheme, alpha0=args.alpha0, tol=args.tol,
                       max_iter=args.max_iter)
    try:
        sol = effective_tensor(fld, cfg)
    except NonConvergenceError as exc:
        rec = {"converged": False, "scheme": cfg.scheme, "tol": cfg.tol,
               "residual_history": exc.residual_history}
        with open(args.record, "w") as f:
            f.write(json.dumps(rec, sort_keys=True))
        raise
    with open(args.record, "w") as f:
        f.write(sol.to_json_record())
    d = fld.torus.d
    print("Abar =")
    for i in range(d):
        print("  " + " ".join(f"{sol.Abar[i, j]:.12g}" for j in range(d)))
    return 0


def _sweep_plots(report, outdir):
    xs, ys = [], []
    for x in report.extrapolated:
        if x.lambda2 and x.lambda2 > 0 and x.eps > 0:
            xs.append(x.lambda2 * abs(math.log(x.lambda2)))
            ys.append(x.eps)
    series = [{"x": xs, "y": ys, "label": "measured"}]
    fit = report.fit or {}
    if fit.get("status") == "ok" and xs:
        c, s = fit["constant"], fit["slope"]
        xf = [min(xs), max(xs)]
        series.append({"x": xf, "y": [c * v ** s for v in xf],
                       "label": f"fit slope {s:.2f}", "markers": False})
    svg_plot(series, os.path.join(outdir, "eps_scaling.svg"),
             title="dilute expansion error vs pair-intensity scale",
             xlabel="lambda2 |log lambda2|", ylabel="eps",
             logx=True, logy=True)

    finest = {}
    for r in report.rows:
        k = r.lam
        if k not in finest or (r.L, r.N) > (finest[k].L, finest[k].N):
            finest[k] = r
    rows = [finest[k] for k in sorted(finest)]
    phis = [r.phi_mean for r in rows]
    series = [
        {"x": phis, "y": [np.asarray(r.Abar_mean)[0, 0] for r in rows],
         "label": "Abar_11"},
        {"x": phis, "y": [np.asarray(r.cm_pred)[0, 0] for r in rows],
         "label": "dilute prediction", "markers": False},
    ]
    svg_plot(series, os.path.join(outdir, "cm_line.svg"),
             title="effective conductivity vs volume fraction",
             xlabel="phi", ylabel="Abar_11")


def cmd_sweep(args):
    with open(args.config) as f:
        raw = json.load(f)
    if args.seed is not None:
        raw["seed_base"] = args.seed
    if args.ensemble_size is not None:
        raw["ensemble_size"] = args.ensemble_size
    cfg = SweepConfig.from_dict(raw)
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "checkpoints")
    if not args.resume and os.path.isdir(ckpt):
        for name in os.listdir(ckpt):
            if name.startswith("block_") and name.endswith(".json"):
                os.remove(os.path.join(ckpt, name))
    report = run_sweep(cfg, workers=_num_threads(args.threads),
                       checkpoint_dir=ckpt,
                       progress=lambda msg: print(msg, file=sys.stderr))
    with open(os.path.join(args.out, "report.csv"), "w") as f:
        f.write(report.to_csv())
    with open(os.path.join(args.out, "report.json"), "w") as f:
        f.write(report.to_json())
    text, csv_text = cm_gap_table(report)
    with open(os.path.join(args.out, "cm_table.txt"), "w") as f:
        f.write(text)
    with open(os.path.join(args.out, "cm_table.csv"), "w") as f:
        f.write(csv_text)
    if args.plot:
        _sweep_plots(report, args.out)
    print(text, end="")
    fit = report.fit or {}
    if fit.get("status") == "ok":
        print(f"error-scaling fit: slope={fit['slope']:.3f} "
              f"constant={fit['constant']:.4g} R2={fit['r_squared']:.4f}")
    else:
        print(f"error-scaling fit: {fit.get('status', 'missing')}")
    return 0


def cmd_plot(args):
    with open(args.report) as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ConfigError(f"{args.report}: empty report CSV")
    finest = {}
    for r in rows:
        key = float(r["lam"])
        cur = (float(r["L"]), int(r["N"]))
        if key not in finest or cur > (float(finest[key]["L"]),
                                       int(finest[key]["N"])):
            finest[key] = r
    lams = sorted(finest)
    xs, ys = [], []
    for lam in lams:
        r = finest[lam]
        lam2 = r["lambda2_analytic"] or r["lambda2_hat"]
        eps = float(r["eps"])
        if lam2 and float(lam2) > 0 and eps > 0:
            l2 = float(lam2)
            xs.append(l2 * abs(math.log(l2)))
            ys.append(eps)
    svg_plot([{"x": xs, "y": ys, "label": "measured"}],
             args.out + "_eps_scaling.svg",
             title="dilute expansion error vs pair-intensity scale",
             xlabel="lambda2 |log lambda2|", ylabel="eps",
             logx=True, logy=True)
    series = [
        {"x": [float(finest[k]["phi_mean"]) for k in lams],
         "y": [float(finest[k]["Abar_00"]) for k in lams], "label": "Abar_11"},
        {"x": [float(finest[k]["phi_mean"]) for k in lams],
         "y": [float(finest[k]["cm_00"]) for k in lams],
         "label": "dilute prediction", "markers": False},
    ]
    svg_plot(series, args.out + "_cm_line.svg",
             title="effective conductivity vs volume fraction",
             xlabel="phi", ylabel="Abar_11")
    return 0


_COMMANDS = {"sample": cmd_sample, "solve": cmd_solve, "sweep": cmd_sweep,
             "plot": cmd_plot}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (ConfigError, DomainError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
