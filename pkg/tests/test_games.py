import numpy as np
import pytest

from agrape.optimizers import (
    AgrapeConfig,
    BgrapeConfig,
    GaConfig,
    GrapeConfig,
    batch_size_for,
    functional_gradient,
    initial_pulse,
    run_best_response,
    run_better_response,
    run_bgrape,
    run_relaxed,
)
from agrape.model import sample_uniform
from agrape.rng import stream

SMALL_GA = GaConfig(population=12, generations=5)
SHORT_GRAPE = GrapeConfig(max_iterations=40)


@pytest.fixture(scope="module")
def short_best(two_qubit):
    cfg = AgrapeConfig(mode="best_response", rounds=6, s=3, seed=11)
    return run_best_response(two_qubit, cfg, SHORT_GRAPE, SMALL_GA)


def test_zero_rounds_returns_initial_pulse(two_qubit):
    for cfg in (AgrapeConfig(mode="best_response", rounds=0, seed=1),
                AgrapeConfig(mode="better_response", rounds=0, seed=1)):
        run = run_best_response if cfg.mode == "best_response" else run_better_response
        res = run(two_qubit, cfg)
        assert res.trace == []
        np.testing.assert_array_equal(res.pulse.values, initial_pulse(two_qubit, 1).values)


def test_initial_pulse_range(two_qubit):
    u = initial_pulse(two_qubit, 0)
    assert u.values.shape == (100, 4)
    assert np.all(np.abs(u.values) <= 5.0)


def test_best_response_trace_and_memory(short_best):
    assert [r.round for r in short_best.trace] == list(range(1, 7))
    assert len(short_best.samples) <= 3
    for r in short_best.trace:
        assert r.batch_size <= 3 and r.covers_batch
        assert r.j_min <= r.l_max_estimate + 1e-12
        assert r.gap == pytest.approx(r.l_max_estimate - r.j_min)


def test_best_response_first_round_is_nominal(short_best):
    # B_0 = {0}, so round 1 optimizes the nominal infidelity only
    assert short_best.trace[0].batch_size == 1


def test_best_response_is_deterministic(two_qubit, short_best):
    again = run_best_response(two_qubit, AgrapeConfig(mode="best_response", rounds=6, s=3, seed=11),
                              SHORT_GRAPE, SMALL_GA)
    np.testing.assert_array_equal(again.pulse.values, short_best.pulse.values)
    assert [r.l_max_estimate for r in again.trace] == [r.l_max_estimate for r in short_best.trace]


def test_best_response_stops_at_target(two_qubit):
    cfg = AgrapeConfig(mode="best_response", rounds=10, s=3, seed=11, target=1.0)
    res = run_best_response(two_qubit, cfg, SHORT_GRAPE, SMALL_GA)
    assert len(res.trace) == 1 and res.reason == "target"


def test_best_response_with_gradient_adversary(two_qubit):
    cfg = AgrapeConfig(mode="best_response", rounds=2, s=3, seed=2, adversary="gradient")
    res = run_best_response(two_qubit, cfg, SHORT_GRAPE)
    assert res.estimate_kind == "gradient_adversary"
    assert all(r.j_min <= r.l_max_estimate + 1e-12 for r in res.trace)


def test_better_response_keeps_fraction(two_qubit):
    cfg = AgrapeConfig(mode="better_response", rounds=4, M=40, r=0.1, seed=5)
    res = run_better_response(two_qubit, cfg, SHORT_GRAPE)
    assert all(r.batch_size == 4 for r in res.trace)
    assert len(res.samples) == 4 == batch_size_for(cfg)
    assert all(r.j_min <= r.l_max_estimate + 1e-12 for r in res.trace)
    assert res.trace[-1].l_max_estimate < res.trace[0].l_max_estimate


def test_better_response_whole_batch_boundary(two_qubit):
    cfg = AgrapeConfig(mode="better_response", rounds=1, M=1, r=1.0, seed=5)
    res = run_better_response(two_qubit, cfg, SHORT_GRAPE)
    assert len(res.samples) == 1


def test_relaxed_with_no_steps_keeps_pulse(two_qubit):
    cfg = AgrapeConfig(mode="relaxed_best", rounds=3, s=2, n=0, m=5, seed=4)
    res = run_relaxed(two_qubit, cfg)
    assert res.pulse is res.initial_pulse
    assert len(res.trace) == 3 and len(res.samples) == 2


def test_relaxed_best_three_qubit_smoke(three_qubit):
    cfg = AgrapeConfig(mode="relaxed_best", rounds=4, s=5, n=20, m=20, seed=3)
    res = run_relaxed(three_qubit, cfg)
    assert len(res.trace) == 4
    assert all(np.isfinite(r.j_min) and r.inner_iters == 20 and not r.covers_batch for r in res.trace)
    assert len(res.samples) == 5


def test_relaxed_better_replaces_set(two_qubit):
    cfg = AgrapeConfig(mode="relaxed_better", rounds=3, r=0.25, n=30, m=20, seed=6)
    res = run_relaxed(two_qubit, cfg)
    assert all(r.batch_size == 5 for r in res.trace)
    assert len(res.samples) == 5 == batch_size_for(cfg)


def test_relaxed_step_is_functional_gradient(two_qubit):
    cfg = AgrapeConfig(mode="relaxed_best", rounds=1, s=2, n=1, m=4, seed=8, learning_rate=0.002)
    res = run_relaxed(two_qubit, cfg)
    _, g = two_qubit.infidelities_and_gradients(res.initial_pulse, res.samples.as_array())
    expected = res.initial_pulse.values - 0.002 * functional_gradient(two_qubit, g.mean(axis=0))
    np.testing.assert_allclose(res.pulse.values, expected, atol=1e-13)


@pytest.mark.parametrize("kwargs", [dict(mode="nope"), dict(mode="better_response", r=0.0),
                                    dict(mode="better_response", r=1.5), dict(rounds=-1),
                                    dict(mode="relaxed_best", m=0), dict(adversary="oracle")])
def test_agrape_config_validation(kwargs):
    with pytest.raises(ValueError):
        AgrapeConfig(**kwargs)


def test_mode_mismatch_rejected(two_qubit):
    with pytest.raises(ValueError):
        run_best_response(two_qubit, AgrapeConfig(mode="better_response", rounds=1))
    with pytest.raises(ValueError):
        run_relaxed(two_qubit, AgrapeConfig(mode="best_response", rounds=1))


# -- b-GRAPE ----------------------------------------------------------------


def test_bgrape_defaults():
    cfg = BgrapeConfig()
    assert (cfg.n_mb, cfg.learning_rate, cfg.momentum) == (1, 0.002, 0.9)


def test_bgrape_first_step(two_qubit):
    cfg = BgrapeConfig(iterations=1, n_mb=3, trace_every=1)
    res = run_bgrape(two_qubit, cfg, seed=9)
    batch = sample_uniform(two_qubit.domain, stream(9, "bgrape"), 3)
    _, G = two_qubit.infidelities_and_gradients(res.initial_pulse, batch)
    # velocity starts at zero, so the first update is a plain scaled gradient step
    expected = res.initial_pulse.values - 0.002 / 3 * functional_gradient(two_qubit, G.sum(axis=0))
    np.testing.assert_allclose(res.pulse.values, expected, atol=1e-13)


def test_bgrape_without_momentum_is_sgd(two_qubit):
    cfg = BgrapeConfig(iterations=3, momentum=0.0, trace_every=1)
    res = run_bgrape(two_qubit, cfg, seed=2)
    rng = stream(2, "bgrape")
    values = np.array(res.initial_pulse.values)
    for _ in range(3):
        _, G = two_qubit.infidelities_and_gradients(values, sample_uniform(two_qubit.domain, rng, 1))
        values = values - 0.002 * functional_gradient(two_qubit, G.sum(axis=0))
    np.testing.assert_allclose(res.pulse.values, values, atol=1e-12)
    assert [r.round for r in res.trace] == [1, 2, 3]


def test_bgrape_trace_thinning(two_qubit):
    res = run_bgrape(two_qubit, BgrapeConfig(iterations=25, trace_every=10), seed=1)
    assert [r.round for r in res.trace] == [10, 20, 25]


def test_bgrape_zero_iterations(two_qubit):
    res = run_bgrape(two_qubit, BgrapeConfig(iterations=0), seed=1)
    assert res.pulse is res.initial_pulse and res.trace == []


def test_bgrape_config_validation():
    with pytest.raises(ValueError):
        BgrapeConfig(n_mb=0)
    with pytest.raises(ValueError):
        BgrapeConfig(momentum=1.0)
