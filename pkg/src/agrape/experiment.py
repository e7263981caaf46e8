"""Experiment configuration and the drivers behind the CLI subcommands."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator

from . import __version__
from .artifacts import (
    CDF_FIELDS,
    LANDSCAPE_FIELDS,
    SUMMARY_FIELDS,
    TraceWriter,
    read_json,
    read_pulse,
    write_csv,
    write_json,
    write_pulse,
)
from .evaluation import REPORT_THRESHOLDS, confidence_at, estimate_worst_case, landscape, sample_cdf
from .model import PRESETS, problem_from_dict
from .optimizers import (
    AgrapeConfig,
    BgrapeConfig,
    GaConfig,
    GrapeConfig,
    run_best_response,
    run_better_response,
    run_bgrape,
    run_nominal,
    run_relaxed,
)
from .rng import derive_seed, stream

log = logging.getLogger(__name__)

ALGORITHMS = ("best_response", "better_response", "relaxed_best", "relaxed_better", "bgrape", "nominal_grape")


class SweepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    param: str
    values: list[Any] = Field(default_factory=list)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    problem: Union[str, dict] = "two_qubit_cnot"
    algorithm: Literal[ALGORITHMS] = "best_response"
    seed: int
    output: str = "run"

    s: int = Field(10, ge=1)
    M: int = Field(100, ge=1)
    r: float = Field(0.1, gt=0, le=1)
    n: int = Field(20, ge=0)
    m: int = Field(20, ge=1)
    alpha: float = Field(0.002, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    n_mb: int = Field(1, ge=1)
    rounds: int = Field(100, ge=0)
    iterations: Optional[int] = Field(None, ge=0)  # b-GRAPE; falls back to rounds
    target: Optional[float] = Field(None, ge=0)

    init_scale: float = Field(5.0, gt=0)
    adversary: Literal["genetic", "gradient"] = "genetic"
    grape_max_iterations: int = Field(500, ge=0)
    ga_population: int = Field(50, ge=2)
    ga_generations: int = Field(30, ge=0)
    worst_case_samples: int = Field(2000, ge=1)
    trace_every: int = Field(100, ge=1)
    record_timing: bool = False

    sweep: Optional[SweepSpec] = None

    @field_validator("problem")
    @classmethod
    def _known_problem(cls, value):
        if isinstance(value, str):
            if value not in PRESETS:
                raise ValueError(f"unknown preset {value!r}; choose from {sorted(PRESETS)}")
        else:
            problem_from_dict(value)
        return value

    def build_problem(self):
        return build_problem(self.problem)

    def agrape_config(self):
        return AgrapeConfig(mode=self.algorithm, rounds=self.rounds, s=self.s, M=self.M, r=self.r, n=self.n,
                            m=self.m, learning_rate=self.alpha, target=self.target, seed=self.seed,
                            init_scale=self.init_scale, adversary=self.adversary)

    def bgrape_config(self):
        iterations = self.iterations if self.iterations is not None else self.rounds
        return BgrapeConfig(iterations=iterations, n_mb=self.n_mb, learning_rate=self.alpha,
                            momentum=self.momentum, trace_every=self.trace_every, init_scale=self.init_scale)


def build_problem(spec):
    if isinstance(spec, str):
        return PRESETS[spec]()
    return problem_from_dict(spec)


def load_config_file(path):
    """Parse a JSON or YAML config file into a plain dict."""
    text = Path(path).read_text()
    data = yaml.safe_load(text)  # YAML is a superset of JSON
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping at the top level")
    return data


def run_algorithm(cfg, problem, callback=None):
    grape = GrapeConfig(max_iterations=cfg.grape_max_iterations)
    if cfg.algorithm == "nominal_grape":
        return run_nominal(problem, grape, seed=cfg.seed, init_scale=cfg.init_scale, callback=callback)
    if cfg.algorithm == "bgrape":
        return run_bgrape(problem, cfg.bgrape_config(), seed=cfg.seed, callback=callback)
    acfg = cfg.agrape_config()
    if cfg.algorithm == "best_response":
        ga = GaConfig(population=cfg.ga_population, generations=cfg.ga_generations) \
            if cfg.adversary == "genetic" else None
        return run_best_response(problem, acfg, grape, ga, callback=callback)
    if cfg.algorithm == "better_response":
        return run_better_response(problem, acfg, grape, callback=callback)
    return run_relaxed(problem, acfg, callback=callback)


def problem_label(spec):
    return spec if isinstance(spec, str) else spec.get("name", "custom")


def synthesize(cfg, out_dir=None, observer=None):
    """Run one optimization and write ``trace.csv``, ``pulse.json`` and ``manifest.json``.

    ``observer``, if given, also receives every ``RoundRecord`` (the CSV only
    carries the stable trace columns). Returns the manifest. A manifest is written on every exit path; its
    ``status`` is ``completed``, ``interrupted`` or ``failed``.
    """
    out = Path(out_dir if out_dir is not None else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"trace": out / "trace.csv", "pulse": out / "pulse.json", "manifest": out / "manifest.json"}
    manifest = {
        "tool": "agrape",
        "tool_version": __version__,
        "config": cfg.model_dump(mode="json"),
        "status": "failed",
        "termination_reason": None,
        "artifacts": {},
    }
    t0 = time.perf_counter()
    writer = None
    try:
        problem = cfg.build_problem()
        writer = TraceWriter(paths["trace"], record_timing=cfg.record_timing)
        manifest["artifacts"]["trace"] = str(paths["trace"])
        callback = writer
        if observer is not None:
            def callback(rec):
                writer(rec)
                observer(rec)
        result = run_algorithm(cfg, problem, callback=callback)
        writer.close()

        write_pulse(paths["pulse"], result.pulse, problem_label(cfg.problem))
        manifest["artifacts"]["pulse"] = str(paths["pulse"])
        last = result.trace[-1] if result.trace else None
        manifest.update(
            status="interrupted" if result.reason == "interrupted" else "completed",
            termination_reason=result.reason,
            rounds_completed=len(result.trace),
            final_j_min=last.j_min if last else None,
            final_l_max_estimate=last.l_max_estimate if last else None,
            l_max_estimate_kind=result.estimate_kind,
        )
        if result.reason != "interrupted":
            manifest["worst_case_samples"] = cfg.worst_case_samples
            manifest["worst_case_estimate"] = estimate_worst_case(
                problem, result.pulse, cfg.worst_case_samples, stream(cfg.seed, "worst_case"))
    except KeyboardInterrupt:
        manifest.update(status="interrupted", termination_reason="interrupted")
    except Exception as exc:  # recorded in the manifest, then re-raised for the exit status
        manifest.update(status="failed", termination_reason=f"{type(exc).__name__}: {exc}")
        raise
    finally:
        if writer is not None and not writer._fh.closed:
            writer.close()
        manifest["wall_time_s"] = time.perf_counter() - t0
        manifest["artifacts"]["manifest"] = str(paths["manifest"])
        write_json(paths["manifest"], manifest)
    return manifest


def resolve_problem(problem_spec, pulse_problem):
    spec = problem_spec if problem_spec is not None else pulse_problem
    if spec is None:
        raise ValueError("no problem given and the pulse file does not name one")
    if isinstance(spec, str) and spec not in PRESETS:
        raise ValueError(f"unknown preset {spec!r}; choose from {sorted(PRESETS)}")
    return build_problem(spec)


def evaluate(pulse_path, problem_spec=None, n=10000, seed=0, out_dir=None, thresholds=REPORT_THRESHOLDS):
    """Write ``cdf.csv`` for a saved pulse and record the evaluation in ``manifest.json``."""
    pulse, named = read_pulse(pulse_path)
    problem = resolve_problem(problem_spec, named)
    problem.check_pulse(pulse)
    out = Path(out_dir) if out_dir is not None else Path(pulse_path).parent
    out.mkdir(parents=True, exist_ok=True)

    cdf = sample_cdf(problem, pulse, n, stream(seed, "evaluate"))
    cdf_path = out / "cdf.csv"
    write_csv(cdf_path, CDF_FIELDS, cdf.rows())
    entry = {
        "pulse": str(pulse_path),
        "samples": n,
        "seed": seed,
        "worst_case_estimate": float(cdf.samples[-1]),
        "mean_infidelity": float(cdf.samples.mean()),
        "confidence": {f"{t:g}": confidence_at(cdf, t) for t in thresholds},
        "cdf": str(cdf_path),
    }
    _merge_manifest(out / "manifest.json", "evaluation", entry)
    return entry


def run_landscape(pulse_path, problem_spec=None, resolution=41, components=(0, 1), out_dir=None):
    pulse, named = read_pulse(pulse_path)
    problem = resolve_problem(problem_spec, named)
    problem.check_pulse(pulse)
    if problem.n_uncertain < 2:
        raise ValueError(f"landscape needs at least two uncertainty components, problem has {problem.n_uncertain}")
    grid = landscape(problem, pulse, components, resolution)
    out = Path(out_dir) if out_dir is not None else Path(pulse_path).parent
    out.mkdir(parents=True, exist_ok=True)
    path = out / "landscape.csv"
    write_csv(path, LANDSCAPE_FIELDS, grid.rows())
    entry = {"pulse": str(pulse_path), "components": list(grid.components), "resolution": resolution,
             "grid_max": grid.max, "landscape": str(path)}
    _merge_manifest(out / "manifest.json", "landscape", entry)
    return entry


def _merge_manifest(path, key, entry):
    manifest = read_json(path) if path.exists() else {"tool": "agrape", "tool_version": __version__}
    manifest[key] = entry
    write_json(path, manifest)


SWEEPABLE = set(ExperimentConfig.model_fields) - {"seed", "output", "sweep", "problem"}


def _sweep_child(base, param, value, out_root):
    label = f"{param}={value}"
    data = base.model_dump()
    data.update({param: value, "seed": derive_seed(base.seed, label), "sweep": None,
                 "output": str(Path(out_root) / label)})
    try:
        cfg = ExperimentConfig(**data)
        manifest = synthesize(cfg)
        return (value, manifest.get("final_l_max_estimate"), manifest.get("worst_case_estimate"),
                manifest.get("rounds_completed", 0)), None
    except Exception as exc:
        log.error("sweep run %s failed: %s", label, exc)
        return (value, None, None, 0), f"{type(exc).__name__}: {exc}"


def sweep(base, param, values, out_dir=None, jobs=1):
    """One synthesis run per parameter value; writes ``summary.csv`` in parameter order.

    Each run's seed is derived from the master seed and ``param=value``, so
    adding values never changes existing runs. Failed runs keep their row
    (with empty results) and are listed in ``sweep.json``.
    """
    if param not in SWEEPABLE:
        raise ValueError(f"cannot sweep {param!r}; choose from {sorted(SWEEPABLE)}")
    out = Path(out_dir if out_dir is not None else base.output)
    out.mkdir(parents=True, exist_ok=True)
    values = list(values)
    if jobs > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_child, [base] * len(values), [param] * len(values), values,
                                    [out] * len(values)))
    else:
        results = [_sweep_child(base, param, v, out) for v in values]
    write_csv(out / "summary.csv", SUMMARY_FIELDS, [row for row, _ in results])
    failures = {f"{param}={row[0]}": err for row, err in results if err}
    write_json(out / "sweep.json", {"param": param, "values": values, "failures": failures,
                                    "summary": str(out / "summary.csv"), "tool_version": __version__})
    return results
