import math

import pytest
from scipy.spatial.transform import Rotation

from core.correlators import (
    CorrelationSet, branch_table, correlator_between, evolved_correlation_set,
    quantum_correlation_set, sequential_correlator,
)
from core.exceptions import InvalidParameter
from core.qubit import (
    QubitState, SpinRotation, X_AXIS, Z_AXIS, direction_from_array, make_direction,
    random_direction, random_state,
)


def test_orthogonal_directions_are_uncorrelated():
    p = sequential_correlator(QubitState.maximally_mixed(), Z_AXIS, X_AXIS)
    assert p == pytest.approx(0.0, abs=1e-12)


def test_sequential_correlator_equals_dot_product(rng):
    # 无进动时与初态无关
    for _ in range(50):
        state = random_state(rng)
        first, second = random_direction(rng), random_direction(rng)
        assert sequential_correlator(state, first, second) == pytest.approx(first.dot(second), abs=1e-12)


def test_correlator_of_direction_with_itself_and_its_opposite(rng):
    n = random_direction(rng)
    state = QubitState.maximally_mixed()
    assert sequential_correlator(state, n, n) == pytest.approx(1.0, abs=1e-12)
    assert sequential_correlator(state, n, -n) == pytest.approx(-1.0, abs=1e-12)


def test_pure_initial_state_with_zero_probability_branch():
    # 第一次测量的 -1 分支概率为零，不会对它坍缩
    state = QubitState.pure(Z_AXIS)
    table = branch_table(state, Z_AXIS, X_AXIS, SpinRotation.identity(), 0.0)
    assert table.p_first_up == pytest.approx(1.0)
    assert table.correlator() == pytest.approx(0.0, abs=1e-12)


def test_correlators_are_rotation_invariant(rng):
    a, b, c = (random_direction(rng) for _ in range(3))
    reference = quantum_correlation_set(a, b, c).values()
    for rotation in Rotation.random(10, random_state=7):
        ra, rb, rc = (direction_from_array(rotation.apply(v.as_array())) for v in (a, b, c))
        rotated = CorrelationSet(
            p_ab=sequential_correlator(QubitState.maximally_mixed(), ra, rb),
            p_ac=sequential_correlator(QubitState.maximally_mixed(), ra, rc),
            p_bc=sequential_correlator(QubitState.maximally_mixed(), rb, rc),
        )
        assert rotated.values() == pytest.approx(reference, abs=1e-12)


def test_precession_between_measurements():
    # 绕 y 轴转 π/2: z 的本征态演化到 x，P(z, x) 变为 1
    rotation = SpinRotation(axis=make_direction(0, 1, 0), angular_rate=math.pi / 2)
    p = sequential_correlator(QubitState.maximally_mixed(), Z_AXIS, X_AXIS, rotation, 1.0)
    assert p == pytest.approx(1.0, abs=1e-12)


def test_correlator_between_uses_time_difference():
    rotation = SpinRotation(axis=make_direction(0, 1, 0), angular_rate=math.pi / 2)
    state = QubitState.maximally_mixed()
    assert correlator_between(state, Z_AXIS, X_AXIS, rotation, 3.0, 4.0) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(InvalidParameter):
        correlator_between(state, Z_AXIS, X_AXIS, rotation, 2.0, 1.0)


def test_evolved_set_reduces_to_dot_products_without_precession(rng):
    a, b, c = (random_direction(rng) for _ in range(3))
    evolved = evolved_correlation_set(a, b, c, (0.0, 1.0, 2.0))
    assert evolved.values() == pytest.approx(quantum_correlation_set(a, b, c).values(), abs=1e-12)


def test_correlation_set_bounds():
    with pytest.raises(InvalidParameter):
        CorrelationSet(p_ab=1.5, p_ac=0.0, p_bc=0.0)
    with pytest.raises(InvalidParameter):
        CorrelationSet(p_ab=0.0, p_ac=0.0, p_bc=0.0, se_ab=-0.1, estimated=True)
    assert 'se_ab' not in CorrelationSet(0.1, 0.2, 0.3).to_dict()


def test_precession_correlators_depend_only_on_time_differences(rng):
    for _ in range(100):
        state = random_state(rng)
        first, second = random_direction(rng), random_direction(rng)
        rotation = SpinRotation(axis=random_direction(rng), angular_rate=rng.uniform(0.1, 3.0))
        dt = rng.uniform(0.0, 2.0)
        shift = rng.uniform(0.0, 10.0)
        p = correlator_between(state, first, second, rotation, 0.0, dt)
        shifted = correlator_between(state, first, second, rotation, shift, shift + dt)
        assert shifted == pytest.approx(p, abs=1e-12)
