from .adversary import (
    AdversaryResult,
    GaConfig,
    GradientAscentConfig,
    genetic_maximize,
    gradient_maximize,
    retained_count,
    worst_of_batch,
)
from .games import (
    AgrapeConfig,
    BgrapeConfig,
    OptimizationResult,
    RoundRecord,
    batch_size_for,
    functional_gradient,
    initial_pulse,
    run_best_response,
    run_better_response,
    run_bgrape,
    run_nominal,
    run_relaxed,
)
from .grape import GrapeConfig, GrapeResult, grape_minimize
from .objective import AdversarialSampleSet, batch_objective, batch_objective_and_gradient, update_memory
