"""Command-line front end: ``spca-reduce <command> ...``.

Commands: generate, reduce, detect, verify, sweep. Exit status is 0 on
success, 1 for usage errors, 2 for invalid parameters or unreadable input,
3 when a verification check fails and 4 when a budget is exceeded.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import detectors, verify
from .core.matio import read_matrix, write_matrix
from .core.rng import RngStream
from .errors import BudgetExceeded, HypothesisWarning, InvalidParameter
from .instances import (
    H0,
    H1,
    VARIANTS,
    PdsParams,
    SpcaParams,
    gen_er_graph,
    gen_goe,
    gen_pds,
    gen_spca,
    gen_wishart,
    read_graph,
    uniform_spike_vector,
    write_graph,
)
from .core.sampling import uniform_subset
from .pipelines import (
    CtwConfig,
    SrrConfig,
    clique_to_wishart,
    read_config,
    parse_config,
    sparsity_cloning,
    subsampling_random_rotations,
)

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_CHECK, EXIT_BUDGET = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_text(path, text: str) -> None:
    Path(path).write_text(text if text.endswith("\n") else text + "\n")


def _read_support(path):
    """Support file: JSON list of 1-indexed vertices, or an object with a "support" key."""
    obj = json.loads(Path(path).read_text())
    if isinstance(obj, dict):
        obj = obj["support"]
    return np.asarray(obj, dtype=np.int64) - 1


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    rng = RngStream(args.seed)
    kind = args.kind
    if kind in ("spca", "wishart") and args.d is None:
        raise InvalidParameter(f"generate {kind} needs --d")
    if kind == "er":
        write_graph(args.out, gen_er_graph(args.n, args.q, rng))
    elif kind == "pds":
        g, support = gen_pds(PdsParams(args.n, args.k, args.p, args.q), rng)
        write_graph(args.out, g)
        target = args.instrument or f"{args.out}.support.json"
        _write_text(target, json.dumps({"support": [int(i) + 1 for i in support]}))
    elif kind == "spca":
        params = SpcaParams(args.n, args.k, args.d, args.theta, args.variant, args.gamma)
        x, spike = gen_spca(params, H0 if args.null else H1, rng)
        write_matrix(args.out, x)
        if args.instrument and spike is not None:
            _write_text(args.instrument, spike.to_json())
    elif kind == "goe":
        write_matrix(args.out, gen_goe(args.d if args.d is not None else args.n, rng))
    elif kind == "wishart":
        sigma = np.eye(args.d)
        support = None
        if args.theta:
            support = uniform_subset(args.d, args.k, rng.split(1))
            v = uniform_spike_vector(args.d, support)
            sigma = sigma + args.theta * np.outer(v, v)
        write_matrix(args.out, gen_wishart(sigma, args.n, rng.split(0)))
        if args.instrument and support is not None:
            _write_text(args.instrument, json.dumps({"support": [int(i) + 1 for i in support]}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# reduce


def _config_with_overrides(args) -> dict:
    cfg = read_config(args.config) if args.config else {}
    for item in args.set or []:
        cfg.update(parse_config(item))
    if args.strict:
        cfg["strict"] = True
    return cfg


def cmd_reduce(args) -> int:
    cfg = _config_with_overrides(args)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    rng = RngStream(seed)
    support = _read_support(args.support) if args.support else None
    if args.pipeline == "sparsify":
        x = read_matrix(args.input)
        ell = int(cfg.get("ell", 1))
        budget = int(cfg.get("budget", 10 ** 8))
        out, instr = sparsity_cloning(x, ell, rng, support=support, budget=budget)
    else:
        g = read_graph(args.input)
        if args.pipeline == "ctw":
            out, instr = clique_to_wishart(g, CtwConfig.from_mapping(cfg), rng, support=support)
        else:
            out, instr = subsampling_random_rotations(g, SrrConfig.from_mapping(cfg), rng,
                                                      support=support)
    write_matrix(args.out, out)
    if args.instrument:
        _write_text(args.instrument, instr.to_json())
    if instr.sigma_not_psd:
        print("warning: Sigma_e was not PSD; output is the zero matrix", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# detect

_SPCA_TESTS = ("spectral", "sum", "ksparse")


def _spca_statistic(test: str, k, budget):
    if test == "spectral":
        return detectors.spectral_statistic
    if test == "sum":
        return detectors.sum_statistic
    if k is None:
        raise InvalidParameter("ksparse needs --k")
    return lambda x: detectors.spca_k_sparse_eigenvalue(x, k, budget)


def cmd_detect(args) -> int:
    if args.test in _SPCA_TESTS:
        x = read_matrix(args.input)
        stat = _spca_statistic(args.test, args.k, args.budget)
        if args.threshold is not None:
            threshold = args.threshold
        else:
            d, n = x.shape
            threshold = detectors.calibrate_threshold(
                stat, lambda s: s.normal((d, n)), args.calibrate_trials,
                RngStream(args.seed), args.level)
        result = detectors.DetectionResult(stat(x), threshold)
    else:
        g = read_graph(args.input)
        if args.test == "edge":
            result = detectors.clique_edge_test(g, q=args.q, level=args.level,
                                                two_sided=args.two_sided)
        else:
            result = detectors.clique_max_degree_test(g, q=args.q, level=args.level)
        if args.threshold is not None:
            result = detectors.DetectionResult(result.statistic, args.threshold)
    print(result)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    names = verify.SUITES if args.suite == "all" else (args.suite,)
    reports = verify.run_suites(names, args.seed, args.workers)
    table = verify.reports_to_csv(reports)
    if args.out:
        _write_text(args.out, table)
    else:
        sys.stdout.write(table)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


# ---------------------------------------------------------------------------
# sweep

_SWEEP_DEFAULTS = dict(pipeline="none", detector="spectral", trials=50, level=0.05,
                       calibrate_trials=100, budget=10 ** 5, variant="ubspca", gamma=1.0,
                       p=1.0, q=0.5, seed=0)


def parse_sweep_spec(text: str):
    """Split a sweep spec into fixed settings and axes.

    Axes are lines ``axis.<name>=v1,v2,...``; everything else is a fixed
    setting. Returns ``(settings, [(name, values), ...])``.
    """
    settings = dict(_SWEEP_DEFAULTS)
    axes = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameter(f"sweep line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("axis."):
            values = [parse_config(f"x={v}")["x"] for v in value.split(",") if v.strip()]
            if not values:
                raise InvalidParameter(f"axis {key[5:]} has an empty grid")
            axes.append((key[5:], values))
        else:
            settings.update(parse_config(line))
    if not axes:
        raise InvalidParameter("sweep spec defines no axis.<name>= lines")
    return settings, axes


def _sweep_instance(cell: dict, hypothesis: str, rng: RngStream):
    pipeline = cell["pipeline"]
    if pipeline == "none":
        if cell["detector"] in ("edge", "degree"):
            if hypothesis == H0:
                return gen_er_graph(int(cell["n"]), cell["q"], rng)
            return gen_pds(PdsParams(int(cell["n"]), int(cell["k"]), cell["p"], cell["q"]), rng)[0]
        params = SpcaParams(int(cell["n"]), int(cell["k"]), int(cell["d"]), cell["theta"],
                            cell["variant"], cell["gamma"])
        return gen_spca(params, hypothesis, rng)[0]
    size_key = "K" if pipeline == "srr" else "k"
    if hypothesis == H0:
        g = gen_er_graph(int(cell["N"]), cell["q"], rng.split(0))
    else:
        g = gen_pds(PdsParams(int(cell["N"]), int(cell[size_key]), cell["p"], cell["q"]),
                    rng.split(0))[0]
    if pipeline == "ctw":
        return clique_to_wishart(g, CtwConfig.from_mapping(cell), rng.split(1))[0]
    if pipeline == "srr":
        return subsampling_random_rotations(g, SrrConfig.from_mapping(cell), rng.split(1))[0]
    raise InvalidParameter(f"unknown pipeline {pipeline!r}")


def _sweep_cell(cell: dict, rng: RngStream):
    trials = int(cell["trials"])
    det = cell["detector"]
    if det in ("edge", "degree"):
        if cell["pipeline"] != "none":
            raise InvalidParameter("graph detectors only apply with pipeline=none")
        test = detectors.clique_edge_test if det == "edge" else detectors.clique_max_degree_test

        def decide(inst):
            return test(inst, q=cell["q"], level=cell["level"]).decision
    else:
        stat = _spca_statistic(det, int(cell["k"]) if "k" in cell else None, 10 ** 6)
        threshold = detectors.calibrate_threshold(
            stat, lambda s: _sweep_instance(cell, H0, s), int(cell["calibrate_trials"]),
            rng.split(2), cell["level"])

        def decide(inst):
            return detectors.DetectionResult(stat(inst), threshold).decision
    null = [decide(_sweep_instance(cell, H0, rng.split(0).split(i))) for i in range(trials)]
    alt = [decide(_sweep_instance(cell, H1, rng.split(1).split(i))) for i in range(trials)]
    type_i = sum(d == H1 for d in null) / trials
    type_ii = sum(d == H0 for d in alt) / trials
    return type_i, type_ii


def cmd_sweep(args) -> int:
    settings, axes = parse_sweep_spec(Path(args.spec).read_text())
    names = [a for a, _ in axes]
    grid = list(itertools.product(*(v for _, v in axes)))
    per_cell = int(settings["trials"]) * 2
    if settings["detector"] not in ("edge", "degree"):
        per_cell += int(settings["calibrate_trials"])
    total = len(grid) * per_cell
    if total > int(settings["budget"]):
        raise BudgetExceeded(f"sweep needs {total} instances, budget is {settings['budget']}")
    rng = RngStream(int(settings["seed"]))
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        for idx, values in enumerate(grid):
            cell = dict(settings)
            cell.update(zip(names, values))
            type_i, type_ii = _sweep_cell(cell, rng.split(idx))
            rows.append([idx, *values, type_i, type_ii, type_i + type_ii])
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["cell", *names, "type_i", "type_ii", "error"])
        w.writerows(rows)
    finally:
        if args.out:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spca-reduce", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="draw a random instance")
    gen.add_argument("kind", choices=("er", "pds", "spca", "goe", "wishart"))
    gen.add_argument("--n", type=int, required=True,
                     help="vertices (er, pds) or samples (spca, wishart); dimension for goe unless --d")
    gen.add_argument("--k", type=int, default=1)
    gen.add_argument("--p", type=float, default=1.0)
    gen.add_argument("--q", type=float, default=0.5)
    gen.add_argument("--d", type=int)
    gen.add_argument("--theta", type=float, default=0.0)
    gen.add_argument("--variant", choices=VARIANTS, default="ubspca")
    gen.add_argument("--gamma", type=float, default=1.0)
    gen.add_argument("--null", action="store_true", help="spca: draw under H0")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--instrument", help="where to write the planted support / spike JSON")
    gen.set_defaults(func=cmd_generate)

    red = sub.add_parser("reduce", help="run a reduction pipeline")
    red.add_argument("pipeline", choices=("ctw", "srr", "sparsify"))
    red.add_argument("--config")
    red.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a config entry (repeatable)")
    red.add_argument("--in", dest="input", required=True)
    red.add_argument("--out", required=True)
    red.add_argument("--support", help="planted support JSON to track through the stages")
    red.add_argument("--instrument")
    red.add_argument("--strict", action="store_true")
    red.add_argument("--seed", type=int)
    red.set_defaults(func=cmd_reduce)

    det = sub.add_parser("detect", help="run a detector on an instance")
    det.add_argument("test", choices=("spectral", "sum", "ksparse", "edge", "degree"))
    det.add_argument("--in", dest="input", required=True)
    det.add_argument("--level", type=float, default=0.05)
    det.add_argument("--calibrate-trials", type=int, default=200)
    det.add_argument("--threshold", type=float)
    det.add_argument("--k", type=int)
    det.add_argument("--q", type=float, default=0.5)
    det.add_argument("--two-sided", action="store_true")
    det.add_argument("--budget", type=int, default=10 ** 6)
    det.add_argument("--seed", type=int, default=0)
    det.set_defaults(func=cmd_detect)

    ver = sub.add_parser("verify", help="run verification suites")
    ver.add_argument("--suite", choices=("all",) + verify.SUITES, default="all")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--workers", type=int, default=1)
    ver.add_argument("--out")
    ver.set_defaults(func=cmd_verify)

    sw = sub.add_parser("sweep", help="empirical Type I+II error over a parameter grid")
    sw.add_argument("--spec", required=True)
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", HypothesisWarning)
            return args.func(args)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InvalidParameter, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
