from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ABSORB0, CYCLE2, LEAKY, TWO_STATE, K, random_stochastic
from ergokit.errors import (
    DimensionMismatch,
    InputError,
    InvalidMeasure,
    InvalidState,
    NegativeEntry,
    OutOfRange,
    RowSumViolation,
)
from ergokit.kernel import (
    ProbMeasure,
    ResolventParams,
    StateFunction,
    StateSet,
    StochasticKernel,
    apply_left,
    apply_right,
    cesaro_average,
    kernel_from_json,
    kernel_to_json,
    power,
    resolvent,
    resolvent_series,
    validate_kernel,
)
from ergokit.invariant import ergodic_measures
from ergokit.structure import reachability


def test_validate_accepts_trivial_kernels():
    assert validate_kernel([[1]]).n == 1
    assert validate_kernel([[0.5, 0.5], [0.5, 0.5]]).n == 2


def test_validate_reports_row_sum_without_renormalizing():
    with pytest.raises(RowSumViolation) as info:
        validate_kernel([[0.5, 0.4], [0.5, 0.5]])
    assert info.value.i == 0
    assert info.value.total == pytest.approx(0.9)


def test_validate_rejects_negative_and_nonsquare():
    with pytest.raises(NegativeEntry) as info:
        validate_kernel([[1.1, -0.1], [0, 1]])
    assert (info.value.i, info.value.j) == (0, 1)
    with pytest.raises(DimensionMismatch):
        validate_kernel([[0.5, 0.5]])
    with pytest.raises(DimensionMismatch):
        validate_kernel(np.zeros((0, 0)))


def test_row_tolerance_is_tight_for_input():
    validate_kernel([[0.5, 0.5 + 5e-13], [0, 1]])
    with pytest.raises(RowSumViolation):
        validate_kernel([[0.5, 0.5 + 5e-12], [0, 1]])


def test_kernel_matrix_is_read_only():
    P = K(TWO_STATE)
    with pytest.raises(ValueError):
        P.matrix[0, 0] = 1.0


def test_apply_left_examples():
    assert apply_left(ProbMeasure([1, 0]), K(np.eye(2))).weights.tolist() == [1, 0]
    assert apply_left(ProbMeasure([1, 0]), K(CYCLE2)).weights.tolist() == [0, 1]
    # 0.5*0.9 + 0.5*0.2 = 0.55
    np.testing.assert_allclose(apply_left(ProbMeasure([0.5, 0.5]), K(TWO_STATE)).weights, [0.55, 0.45], atol=1e-15)
    with pytest.raises(DimensionMismatch):
        apply_left(ProbMeasure([1.0]), K(TWO_STATE))


def test_apply_right_examples():
    np.testing.assert_allclose(apply_right(K(TWO_STATE), StateFunction([3.0, 3.0])).values, [3.0, 3.0], atol=1e-15)
    np.testing.assert_array_equal(apply_right(K(CYCLE2), StateFunction([1.0, 0.0])).values, [0.0, 1.0])
    np.testing.assert_allclose(apply_right(K(TWO_STATE), StateFunction([1.0, 0.0])).values, [0.9, 0.2], atol=1e-15)


def test_power_examples():
    np.testing.assert_array_equal(power(K(TWO_STATE), 0).matrix, np.eye(2))
    np.testing.assert_array_equal(power(K(CYCLE2), 2).matrix, np.eye(2))
    # exact: (1/2)^3 stays, the rest leaks to the absorbing state
    expected = [[float(Fraction(1, 8)), float(Fraction(7, 8))], [0.0, 1.0]]
    np.testing.assert_allclose(power(K(LEAKY), 3).matrix, expected, atol=1e-15)
    with pytest.raises(OutOfRange):
        power(K(LEAKY), -1)


def test_cesaro_examples():
    P = K(CYCLE2)
    assert cesaro_average(P, 1, 1).weights.tolist() == [0, 1]
    np.testing.assert_allclose(cesaro_average(P, 0, 4).weights, [0.5, 0.5])
    np.testing.assert_allclose(cesaro_average(P, 0, 3).weights, [2 / 3, 1 / 3], atol=1e-15)
    with pytest.raises(InvalidState):
        cesaro_average(P, 2, 3)


def test_resolvent_examples():
    np.testing.assert_allclose(resolvent(K(np.eye(3)), 0.3).matrix, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(resolvent(K(CYCLE2), 0.5).matrix, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-12)
    R = resolvent(K(ABSORB0), 0.5).matrix
    assert R[1, 0] > 0 and R[0, 1] == 0


def test_resolvent_params_validate():
    for a in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(OutOfRange):
            ResolventParams(a)
    with pytest.raises(OutOfRange):
        ResolventParams(0.5, terms=0)


def test_resolvent_matches_dense_inverse(rng):
    for _ in range(50):
        P = random_stochastic(rng, int(rng.integers(1, 15)), 0.3)
        for a in (0.1, 0.5, 0.9):
            ref = (1 - a) * np.linalg.inv(np.eye(P.n) - a * P.matrix)
            np.testing.assert_allclose(resolvent(P, a).matrix, ref, atol=1e-12)


def test_resolvent_series_converges_to_closed_form(rng):
    P = random_stochastic(rng, 8, 0.4)
    closed = resolvent(P, 0.5).matrix
    approx, tail = resolvent_series(P, 0.5, 40)
    assert tail == 0.5**40
    assert np.abs(approx.matrix - closed).sum(axis=1).max() <= 2 * tail + 1e-12
    assert np.allclose(resolvent(P, ResolventParams(0.5, terms=40)).matrix, approx.matrix)


def test_measure_clamping_policy():
    mu = ProbMeasure.from_computed([0.5 + 1e-12, 0.5, -1e-13])
    assert mu.weights[2] == 0.0 and abs(mu.weights.sum() - 1) < 1e-15
    with pytest.raises(InvalidMeasure):
        ProbMeasure.from_computed([0.6, 0.5])
    with pytest.raises(InvalidMeasure):
        ProbMeasure([1.5, -0.5])


def test_state_function_bound():
    StateFunction([1.0, -2.0], bound=2.0)
    with pytest.raises(InputError):
        StateFunction([1.0, -2.5], bound=2.0)


def test_state_set_algebra():
    A = StateSet.of(4, [0, 2])
    assert A.complement() == StateSet.of(4, [1, 3])
    assert A.bits == 0b101
    assert StateSet.from_bits(4, 0b101) == A
    assert (A | StateSet.of(4, [1])).indices == [0, 1, 2]
    with pytest.raises(InvalidState):
        StateSet.of(2, [2])


def test_json_round_trip_dense_and_triplets():
    P = K(TWO_STATE)
    assert np.array_equal(kernel_from_json(kernel_to_json(P)).matrix, P.matrix)
    T = kernel_from_json({"n": 3, "format": "triplets", "entries": [[0, 1, 1.0], [1, 1, 1.0], [2, 0, 0.5], [2, 2, 0.5]]})
    assert T.matrix[0].tolist() == [0, 1, 0]
    with pytest.raises(InputError):
        kernel_from_json({"n": 2, "format": "triplets", "entries": [[0, 0, 1.0], [0, 0, 1.0], [1, 1, 1]]})
    with pytest.raises(RowSumViolation):
        kernel_from_json({"n": 2, "format": "triplets", "entries": [[0, 0, 1.0]]})
    with pytest.raises(InputError):
        kernel_from_json({"n": 2, "format": "sparse"})


kernels = st.builds(
    lambda seed, n, d: random_stochastic(np.random.default_rng(seed), n, d),
    st.integers(0, 2**32 - 1),
    st.integers(1, 20),
    st.floats(0.1, 1.0),
)


@settings(max_examples=60, deadline=None)
@given(kernels, st.integers(0, 2**32 - 1))
def test_apply_left_stays_a_measure(P, seed):
    w = np.random.default_rng(seed).random(P.n)
    mu = apply_left(ProbMeasure(w / w.sum()), P)
    assert abs(mu.weights.sum() - 1) <= 1e-12 and mu.weights.min() >= 0


@settings(max_examples=60, deadline=None)
@given(kernels, st.integers(0, 64), st.integers(0, 64))
def test_power_semigroup(P, m, k):
    lhs = power(P, m + k).matrix
    rhs = power(P, m).matrix @ power(P, k).matrix
    assert np.abs(lhs - rhs).max() <= 1e-9


@settings(max_examples=60, deadline=None)
@given(kernels, st.integers(0, 2**32 - 1))
def test_apply_right_is_a_contraction(P, seed):
    f = StateFunction(np.random.default_rng(seed).normal(size=P.n))
    assert apply_right(P, f).sup_norm() <= f.sup_norm() * (1 + 1e-15)


@settings(max_examples=40, deadline=None)
@given(kernels, st.integers(1, 200), st.integers(0, 2**32 - 1))
def test_cesaro_telescoping_bound(P, n, seed):
    f = np.random.default_rng(seed).uniform(-1, 1, P.n)
    nu = cesaro_average(P, 0, n).weights
    assert abs(nu @ (P.matrix @ f) - nu @ f) <= 2 * np.abs(f).max() / n + 1e-12


@settings(max_examples=40, deadline=None)
@given(kernels, st.sampled_from([0.1, 0.5, 0.9]))
def test_resolvent_positivity_is_reachability(P, a):
    R = resolvent(P, a).matrix
    assert np.array_equal(R > 0, reachability(P))
    assert np.abs(R.sum(axis=1) - 1).max() <= 1e-10


@settings(max_examples=40, deadline=None)
@given(kernels, st.sampled_from([0.1, 0.5, 0.9]))
def test_resolvent_shares_fixed_points(P, a):
    R = resolvent(P, a)
    for pi in ergodic_measures(P):
        assert np.abs(pi.weights @ R.matrix - pi.weights).sum() <= 1e-9
    for pi in ergodic_measures(R):
        assert np.abs(pi.weights @ P.matrix - pi.weights).sum() <= 1e-9
