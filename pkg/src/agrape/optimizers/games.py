"""Outer loops of the control-vs-uncertainty game.

Each runner alternates a control update with an uncertainty update and
records one :class:`RoundRecord` per round. Randomness comes only from
streams derived from ``(seed, purpose, round)``, so a run is reproducible
bit for bit from its configuration.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..model import sample_uniform
from ..rng import stream
from .adversary import ADVERSARIES, GaConfig, GradientAscentConfig, retained_count, worst_of_batch
from .grape import GrapeConfig, grape_minimize
from .objective import AdversarialSampleSet, batch_objective, batch_objective_and_gradient, update_memory

log = logging.getLogger(__name__)

MODES = ("best_response", "better_response", "relaxed_best", "relaxed_better")


@dataclass
class AgrapeConfig:
    mode: str = "best_response"
    rounds: int = 100
    s: int = 10  # memory size (best-response modes)
    M: int = 100  # batch size (better-response)
    r: float = 0.1  # retained fraction (better-response modes)
    n: int = 20  # fixed-step iterations per round (relaxed modes)
    m: int = 20  # samples drawn per round (relaxed modes)
    learning_rate: float = 0.002  # relaxed modes
    target: float | None = None  # stop once the round's worst-case estimate is <= target
    seed: int = 0
    init_scale: float = 5.0  # initial pulse ~ U[-init_scale, init_scale] rad/us
    adversary: str = "genetic"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.mode in ("best_response", "relaxed_best") and self.s < 1:
            raise ValueError("memory size s must be >= 1")
        if self.mode in ("better_response", "relaxed_better"):
            # r = 1 (keep the whole batch) is allowed as a boundary case
            if not 0 < self.r <= 1:
                raise ValueError("ratio r must lie in (0, 1]")
            if self.M < 1:
                raise ValueError("batch size M must be >= 1")
        if self.mode.startswith("relaxed"):
            if self.n < 0 or self.m < 1:
                raise ValueError("relaxed modes need n >= 0 and m >= 1")
            if not self.learning_rate > 0:
                raise ValueError("learning_rate must be positive")
        if self.adversary not in ADVERSARIES:
            raise ValueError(f"adversary must be one of {sorted(ADVERSARIES)}")


@dataclass
class BgrapeConfig:
    iterations: int = 1000
    n_mb: int = 1
    learning_rate: float = 0.002
    momentum: float = 0.9
    trace_every: int = 100
    init_scale: float = 5.0

    def __post_init__(self):
        if self.n_mb < 1:
            raise ValueError("mini-batch size n_mb must be >= 1")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.iterations < 0 or self.trace_every < 1:
            raise ValueError("iterations must be >= 0 and trace_every >= 1")


@dataclass
class RoundRecord:
    round: int
    j_min: float
    l_max_estimate: float
    gap: float
    inner_iters: int
    elapsed_s: float
    batch_size: int = 0
    # True when the worst-case estimate was taken over a candidate pool that
    # contains every sample of B, so that j_min <= l_max_estimate must hold
    covers_batch: bool = False

    def row(self):
        return {
            "round": self.round,
            "j_min": self.j_min,
            "l_max_estimate": self.l_max_estimate,
            "gap": self.gap,
            "inner_iters": self.inner_iters,
            "elapsed_s": self.elapsed_s,
        }


@dataclass
class OptimizationResult:
    pulse: object
    trace: list = field(default_factory=list)
    samples: AdversarialSampleSet = field(default_factory=AdversarialSampleSet)
    reason: str = ""
    initial_pulse: object = None
    estimate_kind: str = ""


class _Recorder:
    def __init__(self, callback):
        self.trace = []
        self.callback = callback
        self.t0 = time.perf_counter()

    def add(self, rnd, j_min, l_max, inner, batch_size, covers):
        rec = RoundRecord(rnd, float(j_min), float(l_max), float(l_max - j_min), int(inner),
                          time.perf_counter() - self.t0, batch_size, covers)
        self.trace.append(rec)
        if self.callback is not None:
            self.callback(rec)
        return rec


def initial_pulse(problem, seed, scale=5.0):
    return problem.random_pulse(stream(seed, "init"), scale)


def _reached(target, value):
    return target is not None and value <= target


def run_best_response(problem, cfg, grape=None, ga=None, callback=None, u0=None):
    """Best-response game with a sliding memory of the latest ``s`` adversarial samples.

    Round k: GRAPE on ``J[., B_{k-1}]`` warm-started from the previous
    control, then the adversary maximizes ``L[u_k, .]`` and its sample
    enters the memory. ``B_0 = {0}``. The adversary's candidate pool also
    contains the current memory, so its estimate never falls below the
    worst sample already held.
    """
    if cfg.mode != "best_response":
        raise ValueError(f"run_best_response needs mode 'best_response', got {cfg.mode!r}")
    grape = grape or GrapeConfig()
    adversary = ADVERSARIES[cfg.adversary]
    adv_cfg = ga if ga is not None else (GaConfig() if cfg.adversary == "genetic" else GradientAscentConfig())
    u = u0 if u0 is not None else initial_pulse(problem, cfg.seed, cfg.init_scale)
    start = u
    B = AdversarialSampleSet((problem.zero_eps(),), cfg.s)
    rec = _Recorder(callback)
    reason = "max_rounds"
    try:
        for k in range(1, cfg.rounds + 1):
            inner = grape_minimize(problem, B, u, grape)
            u = inner.pulse
            adv = adversary(problem, u, adv_cfg, stream(cfg.seed, "adversary", k), seeds=B.as_array())
            rec.add(k, inner.objective, adv.infidelity, inner.iterations, len(B), True)
            B = update_memory(B, adv.eps, cfg.s)
            if _reached(cfg.target, adv.infidelity):
                reason = "target"
                break
    except KeyboardInterrupt:
        reason = "interrupted"
    return OptimizationResult(u, rec.trace, B, reason, start, f"{cfg.adversary}_adversary")


def run_better_response(problem, cfg, grape=None, callback=None, u0=None):
    """Better-response game: each round keeps the worst ``ceil(r M)`` of ``M`` fresh random samples.

    The worst-case estimate of a round is the largest infidelity among its
    ``M`` draws, evaluated at the control the batch was drawn against.
    """
    if cfg.mode != "better_response":
        raise ValueError(f"run_better_response needs mode 'better_response', got {cfg.mode!r}")
    grape = grape or GrapeConfig()
    u = u0 if u0 is not None else initial_pulse(problem, cfg.seed, cfg.init_scale)
    start = u
    B = AdversarialSampleSet()
    rec = _Recorder(callback)
    reason = "max_rounds"
    try:
        for k in range(1, cfg.rounds + 1):
            B, L, _ = worst_of_batch(problem, u, cfg.M, cfg.r, stream(cfg.seed, "batch", k), return_scores=True)
            inner = grape_minimize(problem, B, u, grape)
            u = inner.pulse
            l_max = float(np.max(L))
            rec.add(k, inner.objective, l_max, inner.iterations, len(B), True)
            if _reached(cfg.target, l_max):
                reason = "target"
                break
    except KeyboardInterrupt:
        reason = "interrupted"
    return OptimizationResult(u, rec.trace, B, reason, start, "batch_max")


def functional_gradient(problem, grad):
    """Per-slice gradient divided by the slice width: the discretized ``dJ/du(t)``."""
    return grad / problem.dt


def run_relaxed(problem, cfg, ga=None, callback=None, u0=None):
    """Relaxed game: ``n`` fixed-step gradient iterations per round instead of a full minimization.

    Each round draws ``m`` uniform samples at the current control; the worst
    one enters a memory of size ``s`` (``relaxed_best``) or the worst
    ``ceil(r m)`` replace the set (``relaxed_better``). Then
    ``u <- u - alpha * dJ/du(t)`` is applied ``n`` times. ``ga`` is accepted
    for interface symmetry; the sampled maximization needs no GA settings.
    """
    if cfg.mode not in ("relaxed_best", "relaxed_better"):
        raise ValueError(f"run_relaxed needs a relaxed mode, got {cfg.mode!r}")
    u = u0 if u0 is not None else initial_pulse(problem, cfg.seed, cfg.init_scale)
    start = u
    best = cfg.mode == "relaxed_best"
    B = AdversarialSampleSet((problem.zero_eps(),), cfg.s if best else None)
    rec = _Recorder(callback)
    reason = "max_rounds"
    try:
        for k in range(1, cfg.rounds + 1):
            if best:
                picked, L, _ = worst_of_batch(problem, u, cfg.m, 1.0, stream(cfg.seed, "batch", k),
                                              return_scores=True)
                B = update_memory(B, picked.samples[0], cfg.s)
            else:
                B, L, _ = worst_of_batch(problem, u, cfg.m, cfg.r, stream(cfg.seed, "batch", k), return_scores=True)
            values = np.array(u.values)
            for _ in range(cfg.n):
                _, g = batch_objective_and_gradient(problem, values, B)
                values = problem.project(values - cfg.learning_rate * functional_gradient(problem, g))
            if cfg.n:
                u = u.with_values(values)
            l_max = float(np.max(L))
            rec.add(k, batch_objective(problem, u, B), l_max, cfg.n, len(B), False)
            if _reached(cfg.target, l_max):
                reason = "target"
                break
    except KeyboardInterrupt:
        reason = "interrupted"
    return OptimizationResult(u, rec.trace, B, reason, start, "sample_max")


def run_bgrape(problem, cfg=None, seed=0, callback=None, u0=None):
    """Momentum stochastic gradient descent on the average infidelity.

    ``v <- lambda v - (alpha / n_mb) sum_S dL/du(t)``, ``u <- u + v`` with
    ``S`` a fresh uniform mini-batch each iteration. One trace row is kept
    every ``trace_every`` iterations (and for the last one), holding the
    mini-batch mean and max infidelity at the pre-update control.
    """
    cfg = cfg or BgrapeConfig()
    u = u0 if u0 is not None else initial_pulse(problem, seed, cfg.init_scale)
    start = u
    rng = stream(seed, "bgrape")
    values = np.array(u.values)
    velocity = np.zeros_like(values)
    rec = _Recorder(callback)
    reason = "max_iterations"
    try:
        for k in range(1, cfg.iterations + 1):
            batch = sample_uniform(problem.domain, rng, cfg.n_mb)
            L, G = problem.infidelities_and_gradients(values, batch)
            velocity = cfg.momentum * velocity - cfg.learning_rate / cfg.n_mb * functional_gradient(
                problem, G.sum(axis=0))
            values = problem.project(values + velocity)
            if k % cfg.trace_every == 0 or k == cfg.iterations:
                rec.add(k, np.mean(L), np.max(L), 1, cfg.n_mb, False)
    except KeyboardInterrupt:
        reason = "interrupted"
    pulse = u.with_values(values) if cfg.iterations else u
    return OptimizationResult(pulse, rec.trace, AdversarialSampleSet(), reason, start, "minibatch_max")


def run_nominal(problem, grape=None, seed=0, init_scale=5.0, callback=None, u0=None):
    """Plain GRAPE at ``eps = 0``: the unhardened baseline."""
    u = u0 if u0 is not None else initial_pulse(problem, seed, init_scale)
    B = AdversarialSampleSet((problem.zero_eps(),))
    rec = _Recorder(callback)
    inner = grape_minimize(problem, B, u, grape or GrapeConfig())
    rec.add(1, inner.objective, inner.objective, inner.iterations, 1, True)
    return OptimizationResult(inner.pulse, rec.trace, B, inner.reason, u, "nominal")


def batch_size_for(cfg):
    """Expected |B| per round once the memory has filled."""
    if cfg.mode in ("best_response", "relaxed_best"):
        return cfg.s
    return retained_count(cfg.M if cfg.mode == "better_response" else cfg.m, cfg.r)
