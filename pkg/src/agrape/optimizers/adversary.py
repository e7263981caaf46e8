"""Adversaries: searches for uncertainty vectors that maximize the infidelity of a fixed pulse."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..model import sample_uniform
from .objective import AdversarialSampleSet


@dataclass
class GaConfig:
    population: int = 50
    generations: int = 30
    elite_fraction: float = 0.1
    mutation_scale: float = 0.05  # Gaussian sigma as a fraction of the box width
    tournament_size: int = 2

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("GA population must be >= 2")
        if not 0 < self.elite_fraction < 1:
            raise ValueError("elite_fraction must lie in (0, 1)")
        if self.generations < 0 or self.mutation_scale < 0 or self.tournament_size < 1:
            raise ValueError("generations, mutation_scale must be >= 0 and tournament_size >= 1")

    @property
    def n_elite(self):
        return max(1, int(round(self.elite_fraction * self.population)))


@dataclass
class GradientAscentConfig:
    starts: int = 8
    iterations: int = 40
    initial_step: float = 0.05


@dataclass
class AdversaryResult:
    eps: np.ndarray
    infidelity: float
    history: list = field(default_factory=list)  # best infidelity after each generation / iteration
    evaluations: int = 0


def genetic_maximize(problem, u, cfg=None, rng=None, seeds=None):
    """Real-coded GA over the uncertainty box.

    Elitist generational scheme: tournament selection, blend crossover with a
    uniform weight, Gaussian mutation and clipping to the box. ``seeds`` are
    extra candidates (e.g. the current adversarial memory) added to the random
    initial population.
    """
    cfg = cfg or GaConfig()
    rng = rng if rng is not None else np.random.default_rng()
    domain = problem.domain
    pop = sample_uniform(domain, rng, cfg.population)
    if seeds is not None and len(seeds):
        pop = np.concatenate([np.atleast_2d(np.asarray(seeds, dtype=float)), pop])
    fit = problem.infidelities(u, pop)
    evaluations = len(pop)
    sigma = cfg.mutation_scale * domain.width
    n_elite = cfg.n_elite
    n_child = cfg.population - n_elite

    def best_index(values):
        # first maximal entry, so ties resolve to the earliest candidate
        return int(np.argmax(values))

    history = [float(fit[best_index(fit)])]
    for _ in range(cfg.generations):
        order = np.argsort(-fit, kind="stable")
        elites = pop[order[:n_elite]]
        elite_fit = fit[order[:n_elite]]

        contenders = rng.integers(0, len(pop), size=(2, n_child, cfg.tournament_size))
        parents = np.take_along_axis(contenders, np.argmax(fit[contenders], axis=-1)[..., None], axis=-1)[..., 0]
        beta = rng.uniform(0.0, 1.0, size=(n_child, 1))
        children = beta * pop[parents[0]] + (1.0 - beta) * pop[parents[1]]
        children = domain.clip(children + rng.normal(size=children.shape) * sigma)

        child_fit = problem.infidelities(u, children)
        evaluations += n_child
        pop = np.concatenate([elites, children])
        fit = np.concatenate([elite_fit, child_fit])
        history.append(float(fit[best_index(fit)]))

    i = best_index(fit)
    return AdversaryResult(pop[i].copy(), float(fit[i]), history, evaluations)


def gradient_maximize(problem, u, cfg=None, rng=None, seeds=None):
    """Multi-start projected gradient ascent on the uncertainty vector.

    All starts advance together; each keeps its own step size, doubled after
    an accepted step and halved on a rejected one.
    """
    cfg = cfg or GradientAscentConfig()
    rng = rng if rng is not None else np.random.default_rng()
    domain = problem.domain
    x = sample_uniform(domain, rng, cfg.starts)
    if seeds is not None and len(seeds):
        x = np.concatenate([np.atleast_2d(np.asarray(seeds, dtype=float)), x])
    L, g = problem.infidelities_and_eps_gradients(u, x)
    evaluations = len(x)
    step = np.full(len(x), cfg.initial_step)
    history = [float(L.max())]
    for _ in range(cfg.iterations):
        norm = np.linalg.norm(g, axis=1, keepdims=True)
        direction = np.divide(g, norm, out=np.zeros_like(g), where=norm > 0)
        trial = domain.clip(x + step[:, None] * domain.width * direction)
        Lt, gt = problem.infidelities_and_eps_gradients(u, trial)
        evaluations += len(x)
        better = Lt > L
        x = np.where(better[:, None], trial, x)
        g = np.where(better[:, None], gt, g)
        L = np.where(better, Lt, L)
        step = np.where(better, step * 2.0, step * 0.5)
        history.append(float(L.max()))
    i = int(np.argmax(L))
    return AdversaryResult(x[i].copy(), float(L[i]), history, evaluations)


ADVERSARIES = {"genetic": genetic_maximize, "gradient": gradient_maximize}


def retained_count(M, r):
    """``ceil(r M)``, robust to representation error in ``r`` (0.07 * 100 -> 7, not 8)."""
    return math.ceil(round(r * M, 9))


def worst_of_batch(problem, u, M, r, rng, return_scores=False):
    """Draw ``M`` uniform samples and keep the ``ceil(r M)`` with the largest infidelity.

    The retained samples are ordered worst first; ties go to the earlier draw.
    With ``return_scores`` the infidelities of all ``M`` draws are returned too.
    """
    n_keep = retained_count(M, r)
    if not 1 <= n_keep <= M:
        raise ValueError(f"need 1 <= ceil(r*M) <= M, got r={r}, M={M}")
    eps = sample_uniform(problem.domain, rng, M)
    L = problem.infidelities(u, eps)
    keep = np.argsort(-L, kind="stable")[:n_keep]
    B = AdversarialSampleSet.from_array(eps[keep])
    if return_scores:
        return B, L, eps
    return B
