"""Command-line driver: ``agrape synthesize | evaluate | landscape | sweep``."""
from __future__ import annotations

import argparse
import logging
import sys

from pydantic import ValidationError

from .experiment import ExperimentConfig, evaluate, load_config_file, run_landscape, sweep, synthesize

log = logging.getLogger("agrape")

# flag -> ExperimentConfig field
CONFIG_FLAGS = {
    "problem": dict(help="preset name (two_qubit_cnot, three_qubit_toffoli)"),
    "algorithm": dict(help="best_response | better_response | relaxed_best | relaxed_better | bgrape | nominal_grape"),
    "seed": dict(type=int, help="master seed (required for synthesize)"),
    "out": dict(dest="output", help="output directory"),
    "s": dict(type=int, help="memory size"),
    "M": dict(type=int, help="batch size for better-response"),
    "r": dict(type=float, help="retained ratio"),
    "n": dict(type=int, help="fixed-step iterations per round (relaxed)"),
    "m": dict(type=int, help="samples per round (relaxed)"),
    "alpha": dict(type=float, help="learning rate (relaxed, bgrape)"),
    "lambda": dict(dest="momentum", type=float, help="momentum weight (bgrape)"),
    "n-mb": dict(dest="n_mb", type=int, help="mini-batch size (bgrape)"),
    "rounds": dict(type=int, help="number of game rounds"),
    "iterations": dict(type=int, help="b-GRAPE iterations (defaults to --rounds)"),
    "target": dict(type=float, help="stop once the worst-case estimate is <= target"),
    "init-scale": dict(dest="init_scale", type=float, help="initial pulse amplitude range (rad/us)"),
    "adversary": dict(help="genetic | gradient"),
    "grape-max-iterations": dict(dest="grape_max_iterations", type=int),
    "ga-population": dict(dest="ga_population", type=int),
    "ga-generations": dict(dest="ga_generations", type=int),
    "worst-case-samples": dict(dest="worst_case_samples", type=int),
    "trace-every": dict(dest="trace_every", type=int),
}


def _add_config_flags(p):
    p.add_argument("--config", help="JSON or YAML file with any ExperimentConfig fields")
    for flag, kw in CONFIG_FLAGS.items():
        p.add_argument(f"--{flag}", default=None, **kw)
    p.add_argument("--record-timing", dest="record_timing", action="store_true", default=None,
                   help="fill trace.csv's elapsed_s column (makes traces differ between runs)")


def _experiment_config(args, require_seed=True):
    data = load_config_file(args.config) if args.config else {}
    for kw_flag, kw in CONFIG_FLAGS.items():
        field = kw.get("dest", kw_flag.replace("-", "_"))
        value = getattr(args, field)
        if value is not None:
            data[field] = value
    if args.record_timing:
        data["record_timing"] = True
    if require_seed and "seed" not in data:
        raise ValueError("seed: --seed is required (runs are never seeded from the clock)")
    return ExperimentConfig(**data)


def _format_validation(err):
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "config"
        lines.append(f"  {loc}: {e['msg']}")
    return "invalid configuration:\n" + "\n".join(lines)


def cmd_synthesize(args):
    cfg = _experiment_config(args)
    manifest = synthesize(cfg)
    print(f"{manifest['status']}: {manifest.get('rounds_completed', 0)} rounds, "
          f"final l_max_estimate={manifest.get('final_l_max_estimate')}, "
          f"worst_case_estimate={manifest.get('worst_case_estimate')}")
    print(f"artifacts in {cfg.output}")
    return 0 if manifest["status"] == "completed" else 130


def _problem_arg(args):
    if args.config:
        return load_config_file(args.config).get("problem")
    return args.problem


def cmd_evaluate(args):
    entry = evaluate(args.pulse, _problem_arg(args), n=args.n, seed=args.seed, out_dir=args.out)
    print(f"samples: {entry['samples']}  worst case: {entry['worst_case_estimate']:.6g}  "
          f"mean: {entry['mean_infidelity']:.6g}")
    for level, conf in entry["confidence"].items():
        print(f"F({level}) = {conf:.4f}")
    print(f"wrote {entry['cdf']}")
    return 0


def cmd_landscape(args):
    entry = run_landscape(args.pulse, _problem_arg(args), args.resolution, tuple(args.components), args.out)
    print(f"grid max: {entry['grid_max']:.6g}; wrote {entry['landscape']}")
    return 0


def cmd_sweep(args):
    cfg = _experiment_config(args)
    param = args.param or (cfg.sweep.param if cfg.sweep else None)
    if param is None:
        raise ValueError("sweep.param: give --param or a 'sweep' section in the config")
    values = args.values if args.values is not None else (cfg.sweep.values if cfg.sweep else [])
    results = sweep(cfg, param, values, jobs=args.jobs)
    failed = sum(1 for _, err in results if err)
    print(f"{len(results)} runs, {failed} failed; summary in {cfg.output}/summary.csv")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="agrape", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="run one optimization")
    _add_config_flags(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("evaluate", help="empirical CDF and worst case of a saved pulse")
    p.add_argument("--pulse", required=True)
    p.add_argument("--problem")
    p.add_argument("--config")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("landscape", help="infidelity grid over two uncertainty components")
    p.add_argument("--pulse", required=True)
    p.add_argument("--problem")
    p.add_argument("--config")
    p.add_argument("--resolution", type=int, default=41)
    p.add_argument("--components", type=int, nargs=2, default=[0, 1])
    p.add_argument("--seed", type=int, default=0, help="accepted for symmetry; the grid is deterministic")
    p.add_argument("--out")
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("sweep", help="one synthesis run per parameter value")
    _add_config_flags(p)
    p.add_argument("--param")
    p.add_argument("--values", nargs="*")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as err:
        print(_format_validation(err), file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
