"""Adversarial sample memory and the batch-averaged objective."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdversarialSampleSet:
    """Ordered (oldest first) bounded memory of uncertainty vectors."""

    samples: tuple = ()
    capacity: int | None = None

    def __post_init__(self):
        samples = tuple(np.array(s, dtype=float) for s in self.samples)
        if self.capacity is not None:
            if self.capacity < 1:
                raise ValueError(f"capacity must be >= 1, got {self.capacity}")
            if len(samples) > self.capacity:
                raise ValueError(f"{len(samples)} samples exceed capacity {self.capacity}")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_array(cls, eps, capacity=None):
        return cls(tuple(np.atleast_2d(eps)), capacity)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def as_array(self):
        if not self.samples:
            return np.empty((0, 0))
        return np.stack(self.samples)


def update_memory(B, eps_new, s=None):
    """Append ``eps_new``; once ``s`` samples are held the oldest is dropped."""
    s = s if s is not None else B.capacity
    if s is None or s < 1:
        raise ValueError("memory size s must be a positive integer")
    samples = B.samples + (np.array(eps_new, dtype=float),)
    return AdversarialSampleSet(samples[-s:], s)


def _as_batch(B):
    eps = B.as_array() if isinstance(B, AdversarialSampleSet) else np.atleast_2d(np.asarray(B, dtype=float))
    if eps.shape[0] == 0:
        raise ValueError("adversarial sample set is empty")
    return eps


def batch_objective(problem, u, B):
    """Mean infidelity of ``u`` over the samples in ``B``."""
    return float(np.mean(problem.infidelities(u, _as_batch(B))))


def batch_objective_and_gradient(problem, u, B):
    """Mean infidelity over ``B`` and its gradient with respect to the pulse values.

    Per-sample terms are reduced in insertion order, so the result does not
    depend on how the batch was evaluated.
    """
    L, g = problem.infidelities_and_gradients(u, _as_batch(B))
    return float(np.mean(L)), np.mean(g, axis=0)
