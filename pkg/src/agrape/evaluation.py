"""Robustness of a fixed control: empirical CDF, worst-case estimate, 2-D landscapes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import sample_uniform

REPORT_THRESHOLDS = (1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous empirical CDF ``F(l) = #{L_i <= l} / n`` of sampled infidelities."""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.sort(np.asarray(self.samples, dtype=float))
        if samples.size == 0:
            raise ValueError("empirical CDF needs at least one sample")
        object.__setattr__(self, "samples", samples)

    @property
    def n(self):
        return self.samples.size

    def __call__(self, level):
        return np.searchsorted(self.samples, level, side="right") / self.n

    def rows(self):
        """``(infidelity, F(infidelity))`` for every sample, ascending."""
        return list(zip(self.samples.tolist(), self(self.samples).tolist()))


@dataclass(frozen=True)
class LandscapeGrid:
    components: tuple
    axis_a: np.ndarray
    axis_b: np.ndarray
    values: np.ndarray  # values[i, j] = L at (axis_a[i], axis_b[j])
    fixed: np.ndarray  # the full eps vector used for the other components

    def rows(self):
        A, B = np.meshgrid(self.axis_a, self.axis_b, indexing="ij")
        return list(zip(A.ravel().tolist(), B.ravel().tolist(), self.values.ravel().tolist()))

    @property
    def max(self):
        return float(self.values.max())


def sample_cdf(problem, u, n, rng):
    if n < 1:
        raise ValueError("sample count must be >= 1")
    eps = sample_uniform(problem.domain, rng, n)
    return EmpiricalCdf(problem.infidelities(u, eps))


def confidence_at(cdf, level):
    """Fraction of sampled infidelities ``<= level``."""
    return float(cdf(level))


def estimate_worst_case(problem, u, n, rng):
    """Largest infidelity over ``n`` uniform samples; a lower bound on the true supremum."""
    if n < 1:
        raise ValueError("sample count must be >= 1")
    return float(np.max(problem.infidelities(u, sample_uniform(problem.domain, rng, n))))


def landscape(problem, u, components=(0, 1), resolution=41, fixed=None):
    """Infidelity on a ``resolution x resolution`` grid over two uncertainty components.

    Both axes span ``[lower, upper]`` including the endpoints; the remaining
    components are held at ``fixed`` (zero by default).
    """
    a, b = (int(c) for c in components)
    d = problem.n_uncertain
    if not (0 <= a < d and 0 <= b < d):
        raise ValueError(f"component indices {components} out of range for d = {d}")
    if a == b:
        raise ValueError("landscape needs two distinct components")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    base = np.zeros(d) if fixed is None else np.asarray(fixed, dtype=float).copy()
    lo, hi = problem.domain.lower, problem.domain.upper
    axis_a = np.linspace(lo[a], hi[a], resolution)
    axis_b = np.linspace(lo[b], hi[b], resolution)
    A, B = np.meshgrid(axis_a, axis_b, indexing="ij")
    eps = np.tile(base, (A.size, 1))
    eps[:, a] = A.ravel()
    eps[:, b] = B.ravel()
    values = problem.infidelities(u, eps).reshape(A.shape)
    return LandscapeGrid((a, b), axis_a, axis_b, values, base)


def dominates(cdf_a, cdf_b, level):
    """True when control A is at least as likely as B to stay below ``level``."""
    return confidence_at(cdf_a, level) >= confidence_at(cdf_b, level)
