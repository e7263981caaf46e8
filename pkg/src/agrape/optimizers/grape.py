"""Inner GRAPE minimization: projected gradient descent with Armijo backtracking."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .objective import batch_objective, batch_objective_and_gradient


@dataclass
class GrapeConfig:
    max_iterations: int = 500
    gradient_tol: float = 1e-8  # max-norm of the gradient
    objective_tol: float = 1e-10
    initial_step: float = 0.1
    backtrack: float = 0.5
    armijo: float = 1e-4
    # trial step of the next iteration = last accepted step * step_growth
    step_growth: float = 2.0
    min_step: float = 1e-12

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        for name in ("gradient_tol", "objective_tol", "initial_step", "armijo", "min_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.step_growth < 1:
            raise ValueError("step_growth must be >= 1")


@dataclass
class GrapeResult:
    pulse: object
    objective: float
    objective_trace: list = field(default_factory=list)  # J before the first and after each accepted step
    iterations: int = 0
    evaluations: int = 0
    reason: str = ""


def grape_minimize(problem, B, u0, cfg=None):
    """Minimize the batch infidelity ``J[u, B]`` starting from ``u0``.

    Stops on the objective threshold, the gradient tolerance, the iteration
    cap, or when backtracking cannot find a decrease above ``min_step``
    (reason ``"stalled"``). Accepted steps never increase ``J``.
    """
    cfg = cfg or GrapeConfig()
    problem.check_pulse(u0)
    u = np.array(u0.values)
    J, g = batch_objective_and_gradient(problem, u, B)
    trace = [J]
    evaluations = 1
    step = cfg.initial_step
    reason = "max_iterations"
    it = 0
    while True:
        if J <= cfg.objective_tol:
            reason = "objective_tol"
            break
        if np.max(np.abs(g)) < cfg.gradient_tol:
            reason = "gradient_tol"
            break
        if it >= cfg.max_iterations:
            break

        t = step
        while True:
            trial = problem.project(u - t * g)
            J_trial = batch_objective(problem, trial, B)
            evaluations += 1
            # Armijo condition for the projected step
            if J_trial <= J - cfg.armijo * np.sum(g * (u - trial)):
                break
            t *= cfg.backtrack
            if t < cfg.min_step:
                reason = "stalled"
                break
        if reason == "stalled":
            break

        u = trial
        # keep the line-search value so the recorded sequence is exactly monotone
        J = J_trial
        _, g = batch_objective_and_gradient(problem, u, B)
        evaluations += 1
        trace.append(J)
        step = t * cfg.step_growth
        it += 1

    pulse = u0 if it == 0 else u0.with_values(u)
    return GrapeResult(pulse, J, trace, it, evaluations, reason)
