import math

import numpy as np
import pytest

from core.correlators import quantum_correlation_set
from core.exceptions import InsufficientTrials, InvalidParameter
from core.inequality import check_inequality
from core.lhv_model import StrategyMixture
from core.montecarlo import (
    EstimatedCorrelations, ExperimentConfig, TrialRecord, estimate_correlations, estimate_from_records,
    exact_reference, iter_trials, run_lhv_experiment, run_trial,
)
from core.optimizer import DirectionTriple, sqrt2_instance
from core.qubit import X_AXIS, Z_AXIS, QubitState, SpinRotation, make_direction


def test_sqrt2_configuration_is_estimated_within_tolerance():
    config = ExperimentConfig(trials=1_000_000, seed=42)
    estimates = estimate_correlations(config)
    a, b, c = sqrt2_instance()
    exact = quantum_correlation_set(a, b, c)
    for p, q, se in zip(estimates.correlations.values(), exact.values(), estimates.correlations.errors()):
        assert abs(p - q) <= 0.01
        assert abs(p - q) <= 4 * se
    report = check_inequality(estimates.correlations)
    assert report.violated
    assert report.margin > 0.4 - 0.02


def test_results_do_not_depend_on_shards():
    single = estimate_correlations(ExperimentConfig(trials=300_000, seed=7, shards=1))
    sharded = estimate_correlations(ExperimentConfig(trials=300_000, seed=7, shards=8))
    assert single.counts == sharded.counts
    assert single.correlations == sharded.correlations


def test_same_seed_same_results():
    first = estimate_correlations(ExperimentConfig(trials=10_000, seed=5))
    second = estimate_correlations(ExperimentConfig(trials=10_000, seed=5))
    assert first == second


def test_cyclic_selection_splits_trials_evenly():
    estimates = estimate_correlations(ExperimentConfig(trials=30_000, seed=1, selection='cyclic'))
    assert estimates.counts == (10_000, 10_000, 10_000)


def test_single_trial_leaves_pairs_without_data():
    with pytest.raises(InsufficientTrials, match='InsufficientTrials'):
        estimate_correlations(ExperimentConfig(trials=1, seed=0))


def test_records_match_aggregate_estimates():
    config = ExperimentConfig(trials=5_000, seed=11)
    records = list(iter_trials(config))
    assert len(records) == 5_000
    assert estimate_from_records(records) == estimate_correlations(config)


def test_standard_error_formula():
    estimates = EstimatedCorrelations.from_totals((100, 400, 2500), (50, 0, -2500))
    assert estimates.correlations.values() == (0.5, 0.0, -1.0)
    assert estimates.correlations.se_ab == pytest.approx(math.sqrt(0.75 / 100))
    assert estimates.correlations.se_ac == pytest.approx(math.sqrt(1.0 / 400))
    assert estimates.correlations.se_bc == 0.0


def test_deterministic_models_never_violate_in_simulation(rng):
    for _ in range(3):
        estimates = run_lhv_experiment(StrategyMixture.random(rng), 1_000_000, seed=9)
        assert not check_inequality(estimates.correlations).violated


def test_point_mass_simulation_is_exact():
    mixture = StrategyMixture.from_dict({'strategies': {'+-+': 1.0}})
    estimates = run_lhv_experiment(mixture, 3_000, seed=0, selection='cyclic')
    assert estimates.correlations.values() == (-1.0, 1.0, -1.0)


def test_precession_and_pure_initial_state():
    rotation = SpinRotation(axis=make_direction(0, 1, 0), angular_rate=0.3)
    config = ExperimentConfig(
        initial_state=QubitState.from_bloch([0.0, 0.0, 1.0]),
        rotation=rotation,
        times=(0.0, 0.5, 2.0),
        trials=600_000,
        seed=3,
    )
    estimates = estimate_correlations(config)
    exact = exact_reference(config)
    for p, q, se in zip(estimates.correlations.values(), exact.values(), estimates.correlations.errors()):
        assert abs(p - q) <= 5 * se + 1e-12


def test_run_trial_step_by_step():
    config = ExperimentConfig(trials=10, seed=0)
    record = run_trial(config, np.random.default_rng(0), pair='BC')
    assert record.pair == 'BC'
    assert record.product in (1, -1)


@pytest.mark.parametrize('kwargs', [
    {'trials': 0},
    {'times': (0.0, 2.0, 1.0)},
    {'selection': 'shuffled'},
    {'shards': 0},
])
def test_invalid_experiment_config(kwargs):
    with pytest.raises(InvalidParameter):
        ExperimentConfig(**kwargs)


def test_trial_record_validation():
    with pytest.raises(InvalidParameter):
        TrialRecord(pair='CA', first_outcome=1, second_outcome=1)
    with pytest.raises(ValueError):
        TrialRecord(pair='AB', first_outcome=0, second_outcome=1)


def test_estimates_do_not_depend_on_initial_state():
    mixed = estimate_correlations(ExperimentConfig(trials=300_000, seed=8)).correlations
    polarized = estimate_correlations(
        ExperimentConfig(trials=300_000, seed=8, initial_state=QubitState.from_bloch([0.0, 0.0, 1.0]))
    ).correlations
    for p, q, se_p, se_q in zip(mixed.values(), polarized.values(), mixed.errors(), polarized.errors()):
        assert abs(p - q) <= 4 * math.hypot(se_p, se_q)


def test_random_selection_is_uniform_over_pairs():
    trials = 1_000_000
    estimates = estimate_correlations(ExperimentConfig(trials=trials, seed=42))
    spread = 4 * math.sqrt(trials * 2 / 9)
    for n in estimates.counts:
        assert abs(n - trials / 3) <= spread


def test_polarized_spin_measured_twice_along_its_axis():
    config = ExperimentConfig(
        directions=DirectionTriple(a=Z_AXIS, b=Z_AXIS, c=X_AXIS),
        initial_state=QubitState.pure(Z_AXIS),
        trials=10,
        seed=0,
    )
    rng = np.random.default_rng(6)
    for _ in range(200):
        record = run_trial(config, rng, pair='AB')
        assert record.product == 1


def test_standard_error_shrinks_as_inverse_square_root():
    small = EstimatedCorrelations.from_totals((1000, 1000, 1000), (300, -200, 0))
    large = EstimatedCorrelations.from_totals((4000, 4000, 4000), (1200, -800, 0))
    assert small.correlations.values() == large.correlations.values()
    for se_small, se_large in zip(small.correlations.errors(), large.correlations.errors()):
        assert se_small / se_large == pytest.approx(2.0, rel=1e-12)
