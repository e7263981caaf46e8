"""Adversarial GRAPE: robust quantum gate synthesis as a control-vs-uncertainty game."""

__version__ = "0.1.0"

from .evaluation import (  # noqa: E402
    EmpiricalCdf,
    LandscapeGrid,
    confidence_at,
    dominates,
    estimate_worst_case,
    landscape,
    sample_cdf,
)
from .model import (  # noqa: E402
    ControlPulse,
    GateSynthesisProblem,
    HamiltonianModel,
    UncertaintyDomain,
    hamiltonian_slice,
    infidelity_and_gradient,
    problem_from_dict,
    propagate,
    sample_uniform,
    three_qubit_problem,
    two_qubit_problem,
)
from .quantum import expm_hermitian, infidelity, tensor_operator  # noqa: E402
