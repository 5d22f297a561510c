"""Command-line entry point.

Exit codes: 0 success, 1 invalid input (including unknown flags), 2 runtime
failure.  Randomized subcommands default to ``--seed 0``.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import experiments as ex
from . import theory
from .clustering import EmptyClusterError, RunConfig, wcss
from .metrics import nmi
from .model import DatasetParseError, GmmSpec, ValidationError, load_dataset_csv, sample_gmm, save_dataset_csv

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text):
    return [v.strip().replace("-", "_") for v in text.split(",") if v.strip()]


def _add_common(p, threads=True):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master seed (default 0)")
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    if threads:
        p.add_argument("--threads", type=int, default=1, help="worker threads (no effect on output)")


BOUND_FLAGS = {
    "alpha-current": ("tau_sq", "sigma_sq", "c", "r"),
    "alpha-other": ("tau_sq", "sigma_sq", "c_bar", "r"),
    "chi-tail": ("b1", "b2", "m", "d"),
    "lloyd-rho": ("tau_sq", "sigma_sq", "c", "c_bar"),
    "rho-q": ("beta", "n", "q"),
    "sigma-balanced": ("beta", "n", "q"),
    "hartigan-rho": ("tau_sq", "sigma_sq", "size_j", "size_jbar", "r_j", "r_jbar"),
    "rho-h": ("tau_sq", "sigma_sq", "n", "r_star"),
    "union-lloyd": ("n", "d", "rho"),
    "union-hartigan": ("n", "d", "rho"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kmeanslab", description="Lloyd vs. Hartigan k-means experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", help="draw a dataset from the Gaussian mixture")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--tau-sq", type=float, default=1.0)
    p.add_argument("--sigma-sq", type=float, required=True)
    p.add_argument("--class-sizes", type=_ints, help="comma-separated sizes (default: --per-class for every class)")
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--label-mode", choices=("contiguous", "iid"), default="contiguous")
    p.add_argument("--no-labels", action="store_true", help="omit the label column")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default="-")

    p = sub.add_parser("cluster", help="cluster a dataset CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--labels", action="store_true", help="last CSV column holds ground-truth labels")
    p.add_argument("--algo", choices=("lloyd", "hartigan", "pca-lloyd", "pca-split"), default="lloyd")
    p.add_argument("--init", choices=("random-partition", "random-centers", "kmeanspp"), default="random-partition")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--max-iters", type=int, default=300)
    p.add_argument("--tie-epsilon", type=float, default=0.0)
    p.add_argument("--sweep-order", choices=("fixed", "shuffle"), default="fixed")
    p.add_argument("--empty-policy", choices=("retain-centroid", "abort"), default="retain-centroid")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default="-", help="assignment CSV")
    p.add_argument("--report", help="RunReport JSON path")

    p = sub.add_parser("bounds", help="evaluate a closed-form scale or bound")
    p.add_argument("--formula", choices=sorted(BOUND_FLAGS), required=True)
    for name in sorted({f for fs in BOUND_FLAGS.values() for f in fs}):
        p.add_argument("--" + name.replace("_", "-"), type=float, dest=name)

    p = sub.add_parser("grid", help="synthetic grid of algorithm comparisons")
    p.add_argument("--dims", type=_ints, required=True)
    p.add_argument("--noise-vars", type=_floats, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--samples-per-class", type=int, default=20)
    p.add_argument("--tau-sq", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--algorithms", type=_names, default=["lloyd", "hartigan"])
    p.add_argument("--inits", type=_names, default=["random_partition"])
    p.add_argument("--max-iters", type=int, default=300)
    _add_common(p)

    p = sub.add_parser("divergent", help="single-sample stay ratios under a mixed partition")
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--tau-sq", type=float, default=1.0)
    p.add_argument("--betas", type=_floats, default=[1.25, 2.0, 4.0])
    p.add_argument("--dims", type=_ints, default=[50, 500, 3000])
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--z", type=float, default=1.96)
    _add_common(p)

    p = sub.add_parser("census", help="exhaustive bipartition fixed-point census")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--d", type=int, default=4096)
    p.add_argument("--tau-sq", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.5)
    p.add_argument("--q", type=float, default=3.0)
    p.add_argument("--datasets", type=int, default=20)
    p.add_argument("--sigma-sq", type=float, help="override the balanced noise level")
    _add_common(p)

    p = sub.add_parser("scale-check", help="Monte Carlo check of the distance scales")
    p.add_argument("--c", type=int, required=True)
    p.add_argument("--c-bar", type=int, required=True)
    p.add_argument("--r-current", type=float, required=True)
    p.add_argument("--r-other", type=float, required=True)
    p.add_argument("--tau-sq", type=float, default=1.0)
    p.add_argument("--sigma-sq", type=float, required=True)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--replicates", type=int, default=2000)
    _add_common(p)
    return parser


def _bounds(args) -> dict:
    need = BOUND_FLAGS[args.formula]
    missing = [n for n in need if getattr(args, n) is None]
    if missing:
        raise ValidationError("--formula %s needs %s" % (args.formula, ", ".join("--" + m.replace("_", "-") for m in missing)))
    v = {n: getattr(args, n) for n in need}
    f = args.formula
    if f == "alpha-current":
        return {"alpha_current": theory.alpha_current(v["tau_sq"], v["sigma_sq"], v["c"], v["r"])}
    if f == "alpha-other":
        return {"alpha_other": theory.alpha_other(v["tau_sq"], v["sigma_sq"], v["c_bar"], v["r"])}
    if f == "chi-tail":
        bound, rho = theory.chi_diff_tail_bound(theory.ScalePair(v["b1"], v["b2"]), v["m"], v["d"], return_rho=True)
        return {"bound": bound, "rho": rho}
    if f == "lloyd-rho":
        return {
            "rho": theory.lloyd_rho(v["tau_sq"], v["sigma_sq"], v["c"], v["c_bar"]),
            "sigma_threshold": theory.lloyd_noise_threshold(v["tau_sq"] ** 0.5, v["c"], v["c_bar"]),
        }
    if f == "rho-q":
        return {"rho_q": theory.rho_q(v["beta"], v["n"], v["q"])}
    if f == "sigma-balanced":
        s = theory.sigma_balanced(v["beta"], v["n"], v["q"])
        return {"sigma": s, "sigma_sq": s * s}
    if f == "hartigan-rho":
        return {"rho": theory.hartigan_rho(v["tau_sq"], v["sigma_sq"], v["size_j"], v["size_jbar"], v["r_j"], v["r_jbar"])}
    if f == "rho-h":
        return {"rho_h": theory.hartigan_rho_uniform(v["tau_sq"], v["sigma_sq"], v["n"], v["r_star"])}
    fn = theory.lloyd_union_bound if f == "union-lloyd" else theory.hartigan_union_bound
    ub = fn(int(v["n"]), v["d"], v["rho"])
    return {"log_value": ub.log_value, "probability": ub.probability}


def _write_text(path, text):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _sample(args):
    sizes = args.class_sizes or [args.per_class] * args.k
    spec = GmmSpec(args.k, args.d, args.tau_sq, args.sigma_sq, tuple(sizes), args.seed)
    ds = sample_gmm(spec, label_mode=args.label_mode)
    save_dataset_csv(ds, sys.stdout if args.out == "-" else args.out, with_labels=not args.no_labels)


def _cluster(args):
    ds = load_dataset_csv(args.input, has_labels=args.labels)
    cfg = RunConfig(args.max_iters, args.tie_epsilon, args.sweep_order, args.empty_policy, args.seed)
    algo, init = args.algo.replace("-", "_"), args.init.replace("-", "_")
    if algo == "pca_split" and args.k != 2:
        raise ValidationError("pca-split produces exactly two clusters")
    p, report = ex.run_algorithm(ds, algo, init, args.k, args.seed, cfg)
    _write_text(args.out, "".join(f"{a}\n" for a in p.assign))
    if args.report:
        _write_text(args.report, json.dumps(report.to_dict(), indent=1) + "\n")
    summary = {"loss": wcss(ds.data, p.assign, p.K), "sizes": [int(s) for s in p.sizes]}
    if ds.labels is not None:
        summary["nmi"] = nmi(p.assign, ds.labels)
    print(json.dumps(summary), file=sys.stderr if args.out == "-" else sys.stdout)


def _check_threads(args):
    if args.threads < 1:
        raise ValidationError("--threads must be >= 1")


def run(args) -> None:
    cmd = args.command
    if cmd == "sample":
        _sample(args)
    elif cmd == "cluster":
        _cluster(args)
    elif cmd == "bounds":
        print(json.dumps(_bounds(args)))
    elif cmd == "grid":
        _check_threads(args)
        gs = ex.GridSpec(tuple(args.dims), tuple(args.noise_vars), args.k, args.samples_per_class, args.tau_sq,
                         args.trials, tuple(args.algorithms), tuple(args.inits), args.seed, args.max_iters)
        ex.write_report(ex.run_grid(gs, args.threads), args.out, args.format, "grid")
    elif cmd == "divergent":
        _check_threads(args)
        res = ex.run_divergent(args.n, args.tau_sq, args.betas, args.dims, args.trials, args.seed, args.threads, args.z)
        ex.write_report(res, args.out, args.format, "divergent")
    elif cmd == "census":
        _check_threads(args)
        res = ex.run_fixed_point_census(args.n, args.d, args.tau_sq, args.beta, args.q, args.datasets, args.seed,
                                        args.threads, args.sigma_sq)
        ex.write_report(res, args.out, args.format, "census")
    elif cmd == "scale-check":
        _check_threads(args)
        res = ex.run_scale_check(args.c, args.c_bar, args.r_current, args.r_other, args.tau_sq, args.sigma_sq,
                                 args.d, args.replicates, args.seed, args.threads)
        ex.write_report(res, args.out, args.format, "scale")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if not exc.code else 1
    try:
        run(args)
    except (ValidationError, DatasetParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EmptyClusterError, OSError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
