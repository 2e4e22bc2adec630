"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Every subcommand is
deterministic for a fixed flag set; figures are SVG without timestamps.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import plotting
from .elastic_net import ElasticParams, anneal_solve
from .instance_io import (InstanceFormatError, Instance, generate_instance, read_instance,
                          serialize_instance, tour_to_json)
from .lattice_field import (SingularLaplacianError, log_partition_exact, log_partition_mc,
                            parse_graph)
from .mdl import MdlConfig, ensemble_from_runs
from .oracle import canonical_order, solve_enumeration, solve_held_karp
from .som import train_som

MAX_SNAPSHOTS = 200


class RunFailure(Exception):
    """A runtime failure reported with exit code 1."""


def fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a number > 0, got {text}")
    return v


def int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("list must not be empty")
    return vals


def seed_list(text):
    """``0,1,5`` or a range ``0-19``."""
    if "-" in text.strip("-") and "," not in text:
        lo, hi = text.split("-", 1)
        vals = list(range(int(lo), int(hi) + 1))
        if not vals:
            raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
        return vals
    return int_list(text)


def _add_elastic_flags(p):
    g = p.add_argument_group("elastic net")
    g.add_argument("--m-nodes", type=positive_int)
    g.add_argument("--k-tension", type=positive_float, default=1.0)
    g.add_argument("--lambda0", type=positive_float)
    g.add_argument("--lambda-decay", type=float, default=0.99)
    g.add_argument("--steps-per-stage", type=positive_int, default=5)
    g.add_argument("--step-size", type=positive_float, default=0.02)
    g.add_argument("--lambda-min", type=positive_float)
    g.add_argument("--max-stages", type=positive_int, default=10_000)
    g.add_argument("--capture-tol", type=positive_float)


def _elastic_params(args) -> ElasticParams:
    return ElasticParams(m_nodes=args.m_nodes, k_tension=args.k_tension, lambda0=args.lambda0,
                         lambda_decay=args.lambda_decay, steps_per_stage=args.steps_per_stage,
                         step_size=args.step_size, lambda_min=args.lambda_min,
                         max_stages=args.max_stages, capture_tol=args.capture_tol)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elastic-fusion",
                                     description="Elastic-net TSP, SOM and MDL toolkit.")
    parser.add_argument("--out-dir", default=".", help="directory for all output files")
    parser.add_argument("--threads", type=positive_int, default=1,
                        help="worker processes for multi-seed runs")
    parser.add_argument("--quiet", action="store_true")
    parser.add_argument("--config", help="key=value file; command-line flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a random instance")
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--box", type=positive_float, default=1.0)
    p.add_argument("--out", help="file name (default <out-dir>/<name>.tsp)")

    p = sub.add_parser("solve", help="anneal the elastic ring over several seeds")
    p.add_argument("instance")
    p.add_argument("--seeds", type=seed_list, default=[0])
    p.add_argument("--snapshots", action="store_true", help="write per-stage ring SVGs")
    p.add_argument("--a0", type=positive_float, default=1.0)
    p.add_argument("--cost-mode", choices=("swept_area", "tour_length"), default="swept_area")
    _add_elastic_flags(p)

    p = sub.add_parser("oracle", help="exact optimum of a small instance")
    p.add_argument("instance")
    p.add_argument("--method", choices=("held_karp", "enumeration"), default="held_karp")

    p = sub.add_parser("bench", help="compare elastic tours with the exact optimum")
    p.add_argument("--sizes", type=int_list)
    p.add_argument("--instance", action="append", default=[],
                   help="instance file (repeatable); used instead of --sizes")
    p.add_argument("--seeds", type=seed_list, default=list(range(20)))
    p.add_argument("--instance-seed", type=int, default=0)
    p.add_argument("--timing", action="store_true",
                   help="fill wall_ms (makes the CSV run-dependent)")
    _add_elastic_flags(p)

    p = sub.add_parser("som-demo", help="train a ring map on uniform angles")
    p.add_argument("--nodes", type=positive_int, default=16)
    p.add_argument("--steps", type=positive_int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma-start", type=positive_float, default=4.0)
    p.add_argument("--sigma-end", type=positive_float, default=0.5)
    p.add_argument("--amp-start", type=positive_float, default=0.5)
    p.add_argument("--amp-end", type=positive_float, default=0.01)
    p.add_argument("--shape", choices=("gaussian", "box"), default="gaussian")
    p.add_argument("--record-every", type=positive_int, default=100)

    p = sub.add_parser("lattice-check", help="exact vs Monte Carlo log partition function")
    p.add_argument("graph")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _read_config(path) -> dict:
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _apply_config(parser, argv, cfg):
    """Install config values as subcommand defaults, then parse again."""
    args = parser.parse_args(argv)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub = subparsers.choices[args.command]
    actions = {a.dest: a for a in sub._actions + parser._actions}
    defaults = {}
    for key, value in cfg.items():
        action = actions.get(key)
        if action is None:
            parser.error(f"unknown config key {key!r} for {args.command}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            try:
                defaults[key] = action.type(value) if action.type else value
            except (ValueError, argparse.ArgumentTypeError) as exc:
                parser.error(f"config {key}: {exc}")
    sub.set_defaults(**{k: v for k, v in defaults.items() if k in {a.dest for a in sub._actions}})
    parser.set_defaults(**{k: v for k, v in defaults.items()
                           if k not in {a.dest for a in sub._actions}})
    return parser.parse_args(argv)


def _load_instance(path) -> Instance:
    try:
        return read_instance(path)
    except FileNotFoundError:
        raise RunFailure(f"instance file not found: {path}") from None
    except InstanceFormatError as exc:
        raise RunFailure(f"{path}: {exc}") from None


def _solve_one(job):
    instance, params, seed, record = job
    return anneal_solve(instance, params, seed, record_rings=record)


def _run_seeds(instance, params, seeds, threads, record=False):
    jobs = [(instance, params, s, record) for s in sorted(seeds)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_solve_one, jobs))
    return [_solve_one(j) for j in jobs]


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def cmd_gen(args, out: Path, say):
    inst = generate_instance(args.n, args.seed, args.box)
    path = Path(args.out) if args.out else out / f"{inst.name}.tsp"
    path.write_text(serialize_instance(inst), encoding="utf-8")
    print(path)
    return 0


def write_trace_csv(path, trace):
    _write_csv(path, ["stage", "lambda", "energy", "swept_area", "max_capture_dist"],
               [(r.stage, r.lam, r.energy, r.swept_area, r.max_capture_dist)
                for r in trace.records])


def cmd_solve(args, out: Path, say):
    inst = _load_instance(args.instance)
    params = _elastic_params(args)
    try:
        traces = _run_seeds(inst, params, args.seeds, args.threads, record=args.snapshots)
    except ValueError as exc:
        raise RunFailure(str(exc)) from None
    for tr in traces:
        write_trace_csv(out / f"trace_seed{tr.seed}.csv", tr)
        if tr.non_convergence:
            say(f"seed {tr.seed}: NonConvergence (max_stages reached with uncaptured cities)")
        if args.snapshots:
            snap_dir = out / "snapshots" / f"seed{tr.seed}"
            snap_dir.mkdir(parents=True, exist_ok=True)
            stride = max(1, math.ceil(len(tr.snapshots) / MAX_SNAPSHOTS))
            for k in range(0, len(tr.snapshots), stride):
                plotting.plot_ring(inst, tr.snapshots[k], snap_dir / f"stage_{k:04d}.svg")
    cfg = MdlConfig(a0=args.a0, cost_mode=args.cost_mode)
    ens = ensemble_from_runs(traces, cfg)
    _write_json(out / "ensemble.json", ens.to_json())
    best = min(traces, key=lambda t: (t.tour.length, t.seed))
    _write_json(out / "best_tour.json", {**tour_to_json(inst, best.tour), "seed": best.seed,
                                         "canonical_order": list(canonical_order(best.tour.order))})
    plotting.plot_ring(inst, best.final.w, out / "best_tour.svg", best.tour,
                       title=f"length {best.tour.length:.6g}")
    plotting.plot_trace(best.records, out / "trace.svg")
    plotting.plot_posterior(ens, out / "posterior.svg")
    say(f"best tour (seed {best.seed}): {' '.join(map(str, best.tour.order))}")
    say(f"length: {fmt(best.tour.length)}")
    say(f"free energy ({cfg.cost_mode}): {fmt(ens.free_energy)}")
    if not any(tr.converged for tr in traces):
        raise RunFailure("no seed converged")
    return 0


def cmd_oracle(args, out: Path, say):
    inst = _load_instance(args.instance)
    solver = solve_held_karp if args.method == "held_karp" else solve_enumeration
    try:
        res = solver(inst)
    except ValueError as exc:
        raise RunFailure(str(exc)) from None
    _write_json(out / "oracle.json", res.to_json(inst))
    say(f"optimal length: {fmt(res.optimal_length)}")
    say(f"order: {' '.join(map(str, res.optimal_tour.order))}")
    return 0


def cmd_bench(args, out: Path, say, parser):
    if args.instance:
        instances = [_load_instance(p) for p in args.instance]
    elif args.sizes:
        instances = [generate_instance(n, args.instance_seed, 1.0) for n in args.sizes]
    else:
        parser.error("bench needs --sizes or --instance")
    params = _elastic_params(args)
    rows = []
    best_ratios = []
    for inst in instances:
        try:
            opt = solve_held_karp(inst).optimal_length
        except ValueError as exc:
            parser.error(str(exc))
        per_seed = []
        for seed in sorted(args.seeds):
            t0 = time.perf_counter()
            tr = anneal_solve(inst, params, seed)
            wall = (time.perf_counter() - t0) * 1e3
            ratio = tr.tour.length / opt if opt > 0 else 1.0
            per_seed.append(ratio)
            rows.append({"N": inst.n, "seed": seed, "elastic_length": tr.tour.length,
                         "optimal_length": opt, "ratio": ratio, "swept_area": tr.swept_area,
                         "wall_ms": wall if args.timing else ""})
        best_ratios.append(min(per_seed))
        say(f"N={inst.n}: best-of-seeds ratio {fmt(min(per_seed))}")
    cols = ["N", "seed", "elastic_length", "optimal_length", "ratio", "swept_area", "wall_ms"]
    table = [[r[c] for c in cols] for r in rows]
    mean_best = sum(best_ratios) / len(best_ratios)
    table.append(["mean", "best_of_seeds", "", "", mean_best, "", ""])
    table.append(["max", "best_of_seeds", "", "", max(best_ratios), "", ""])
    _write_csv(out / "bench.csv", cols, table)
    plotting.plot_bench(rows, out / "bench.svg")
    say(f"mean best-of-seeds ratio: {fmt(mean_best)}; max: {fmt(max(best_ratios))}")
    return 0


def cmd_som_demo(args, out: Path, say, parser):
    if args.sigma_end > args.sigma_start or args.amp_end > args.amp_start:
        parser.error("schedules must not increase")
    if args.amp_start > 1:
        parser.error("--amp-start must be <= 1")
    state, rows = train_som(args.nodes, args.steps, args.seed,
                            sigma=(args.sigma_start, args.sigma_end),
                            amplitude=(args.amp_start, args.amp_end), shape=args.shape,
                            record_every=args.record_every)
    _write_csv(out / "som_trace.csv", ["step", "energy", "sigma"], rows)
    _write_json(out / "som_map.json", state.to_json())
    plotting.plot_som(state, out / "som_map.svg")
    say(f"trained {state.n} nodes for {state.t} steps; final energy {fmt(rows[-1][1])}")
    return 0


def cmd_lattice_check(args, out: Path, say, parser):
    if args.samples < 1000:
        parser.error("--samples must be >= 1000")
    try:
        graph = parse_graph(Path(args.graph).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise RunFailure(f"graph file not found: {args.graph}") from None
    except ValueError as exc:
        raise RunFailure(f"{args.graph}: {exc}") from None
    try:
        exact = log_partition_exact(graph) if graph.domain == "real" else None
        est, se = log_partition_mc(graph, args.samples, args.seed)
    except SingularLaplacianError as exc:
        raise RunFailure(f"singular Laplacian: {exc}") from None
    payload = {"logZ_exact": exact, "logZ_mc": est, "stderr": se}
    _write_json(out / "lattice.json", payload)
    print(json.dumps({k: (float(fmt(v)) if v is not None else None) for k, v in payload.items()}))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = _read_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        args = _apply_config(parser, argv, cfg)
    def say(msg):
        if not args.quiet:
            print(msg)

    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise RunFailure(f"output directory not writable: {out}")
        if args.command == "gen":
            return cmd_gen(args, out, say)
        if args.command == "solve":
            return cmd_solve(args, out, say)
        if args.command == "oracle":
            return cmd_oracle(args, out, say)
        if args.command == "bench":
            return cmd_bench(args, out, say, parser)
        if args.command == "som-demo":
            return cmd_som_demo(args, out, say, parser)
        return cmd_lattice_check(args, out, say, parser)
    except RunFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
