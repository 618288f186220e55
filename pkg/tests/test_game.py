import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rmg.game import (GameValidationError, RobustMarkovGame, brute_force_robust_expectation,
                      decode_joint, draw_sample, effective_horizon, encode_joint, game_from_json,
                      game_to_json, robust_expectation, sample_next_state, validate,
                      worst_case_kernel_row)
from rmg.rng import RandomStream

from .conftest import make_random_game


def one_cell_game(**overrides):
    fields = dict(num_agents=1, num_states=1, action_counts=(1,), horizon=1,
                  kernel=[[[[1.0]]]], rewards=[[[[0.5]]]], uncertainty_level=0.0)
    fields.update(overrides)
    return RobustMarkovGame(**fields)


# -- validate ---------------------------------------------------------------

def test_single_cell_game_is_valid():
    validate(one_cell_game())


def test_row_sum_error_names_cell():
    kernel = np.zeros((2, 2, 1, 2))
    kernel[..., 0] = 1.0
    kernel[1, 0, 0] = [0.5, 0.499]
    game = RobustMarkovGame(1, 2, (1,), 2, kernel, np.zeros((1, 2, 2, 1)), 0.0)
    with pytest.raises(GameValidationError, match=r"h=1, s=0, j=0.*0\.999"):
        validate(game)


def test_uncertainty_level_one_rejected():
    with pytest.raises(GameValidationError, match=r"uncertainty level must be in \[0,1\)"):
        validate(one_cell_game(uncertainty_level=1.0))


@pytest.mark.parametrize("overrides, pattern", [
    (dict(rewards=[[[[1.5]]]]), "outside"),
    (dict(rewards=[[[[-0.1]]]]), "outside"),
    (dict(kernel=[[[[1.0]]], [[[1.0]]]]), "kernel shape"),
    (dict(action_counts=(2,)), "kernel shape"),
    (dict(kernel=[[[[-1.0]]]]), "negative"),
    (dict(uncertainty_level=-0.1), "uncertainty level"),
])
def test_validate_errors(overrides, pattern):
    with pytest.raises(GameValidationError, match=pattern):
        validate(one_cell_game(**overrides))


def test_dense_cap():
    game = RobustMarkovGame(2, 1, (1001, 1000), 1, np.zeros((1, 1, 1, 1)),
                            np.zeros((2, 1, 1, 1)), 0.0)
    with pytest.raises(GameValidationError, match="dense-storage cap"):
        validate(game)


def test_game_arrays_are_read_only():
    game = one_cell_game()
    with pytest.raises(ValueError):
        game.kernel[0, 0, 0, 0] = 0.3


# -- effective horizon ------------------------------------------------------

@pytest.mark.parametrize("H, R, expected", [(10, 0.0, 10), (10, 0.5, 2), (3, 0.1, 3)])
def test_effective_horizon(H, R, expected):
    assert effective_horizon(H, R) == expected


# -- joint action encoding --------------------------------------------------

def test_agent_zero_is_most_significant():
    assert encode_joint((1, 0), (2, 3)) == 3
    assert encode_joint((0, 2), (2, 3)) == 2


@given(st.lists(st.integers(1, 4), min_size=1, max_size=4), st.data())
def test_encode_decode_roundtrip(counts, data):
    j = data.draw(st.integers(0, math.prod(counts) - 1))
    assert encode_joint(decode_joint(j, counts), counts) == j


# -- robust expectation -----------------------------------------------------

def test_robust_expectation_examples():
    assert robust_expectation([0.5, 0.5], [0.0, 2.0], 0.0) == 1.0
    # vertices (0.75, 0.25) and (0.25, 0.75) give 0.5 and 1.5
    assert robust_expectation([0.5, 0.5], [0.0, 2.0], 0.5) == pytest.approx(0.5, abs=1e-15)
    assert robust_expectation([0.5, 0.5], [0.0, 2.0], 1 - 1e-12) == pytest.approx(0.0, abs=1e-11)
    for R in (0.0, 0.3, 0.99):
        assert robust_expectation([1.0, 0.0], [2.5, 2.5], R) == pytest.approx(2.5, abs=1e-15)


def test_brute_force_examples():
    assert brute_force_robust_expectation([0.3, 0.7], [1.0, 5.0], 0.2) == pytest.approx(3.24, abs=1e-12)
    assert robust_expectation([0.3, 0.7], [1.0, 5.0], 0.2) == pytest.approx(3.24, abs=1e-12)
    assert brute_force_robust_expectation([0.3, 0.7], [1.0, 5.0], 0.0) == pytest.approx(3.8, abs=1e-12)
    assert brute_force_robust_expectation([1.0], [4.0], 0.7) == pytest.approx(4.0, abs=1e-12)


def test_worst_case_row_examples():
    row = worst_case_kernel_row([0.2, 0.3, 0.5], [3.0, 2.0, 1.0], 0.4)
    np.testing.assert_allclose(row, [0.12, 0.18, 0.7], atol=1e-15)
    row = worst_case_kernel_row([0.2, 0.3, 0.5], [1.0, 1.0, 1.0], 0.4)
    np.testing.assert_allclose(row, [0.52, 0.18, 0.3], atol=1e-15)
    np.testing.assert_array_equal(worst_case_kernel_row([0.2, 0.8], [5.0, 1.0], 0.0), [0.2, 0.8])


@st.composite
def triples(draw, max_states=6):
    S = draw(st.integers(1, max_states))
    raw = draw(arrays(np.float64, S, elements=st.floats(1e-3, 1.0)))
    v = draw(arrays(np.float64, S, elements=st.floats(-10.0, 10.0)))
    R = draw(st.floats(0.0, 0.999))
    return raw / raw.sum(), v, R


@settings(max_examples=300)
@given(triples())
def test_robust_matches_vertex_enumeration(triple):
    p, v, R = triple
    assert abs(robust_expectation(p, v, R) - brute_force_robust_expectation(p, v, R)) <= 1e-12


@settings(max_examples=200)
@given(triples())
def test_worst_row_attains_robust_value(triple):
    p, v, R = triple
    row = worst_case_kernel_row(p, v, R)
    assert abs(row.sum() - 1.0) <= 1e-12
    assert abs(float(row @ v) - robust_expectation(p, v, R)) <= 1e-12


@settings(max_examples=200)
@given(triples(), st.floats(0.0, 5.0), st.data())
def test_monotone_and_lipschitz(triple, bump, data):
    p, v, R = triple
    w = v + data.draw(arrays(np.float64, len(v), elements=st.floats(0.0, 1.0))) * bump
    assert robust_expectation(p, v, R) <= robust_expectation(p, w, R) + 1e-12
    assert abs(robust_expectation(p, w, R) - robust_expectation(p, v, R)) <= np.max(np.abs(w - v)) + 1e-12


@given(st.integers(1, 6), st.floats(-5, 5), st.floats(0.0, 0.999))
def test_constant_vector_is_invariant(S, c, R):
    p = np.full(S, 1.0 / S)
    assert robust_expectation(p, np.full(S, c), R) == pytest.approx(c, abs=1e-12)


@settings(max_examples=200)
@given(triples(), st.data())
def test_backup_operator_monotone(triple, data):
    p, v, R = triple
    w = v + data.draw(arrays(np.float64, len(v), elements=st.floats(0.0, 3.0)))
    low = worst_case_kernel_row(p, v, R) @ v
    high = worst_case_kernel_row(p, w, R) @ w
    assert low <= high + 1e-12


# -- generative model -------------------------------------------------------

def test_deterministic_row_always_hits_target():
    kernel = np.zeros((1, 3, 1, 3))
    kernel[..., 2] = 1.0
    game = RobustMarkovGame(1, 3, (1,), 1, kernel, np.zeros((1, 1, 3, 1)), 0.0)
    validate(game)
    stream = RandomStream(5)
    assert {sample_next_state(game, stream.child(n), 0, 0, 0) for n in range(200)} == {2}


def test_empirical_frequency():
    kernel = np.array([[[[0.25, 0.75]], [[1.0, 0.0]]]])
    game = RobustMarkovGame(1, 2, (1,), 1, kernel, np.zeros((1, 1, 2, 1)), 0.0)
    validate(game)
    stream = RandomStream(11)
    draws = [sample_next_state(game, stream.child(n), 0, 0, 0) for n in range(100_000)]
    freq = np.bincount(draws, minlength=2) / len(draws)
    np.testing.assert_allclose(freq, [0.25, 0.75], atol=0.01)


def _draw_in_child(args):
    seed, key = args
    kernel = np.full((1, 4, 1, 4), 0.25)
    game = RobustMarkovGame(1, 4, (1,), 1, kernel, np.zeros((1, 1, 4, 1)), 0.0)
    return sample_next_state(game, RandomStream(seed, key), 0, 0, 0)


def test_draws_are_layout_independent():
    jobs = [(3, (h, k, 0)) for h in range(3) for k in range(5)]
    serial = [_draw_in_child(j) for j in jobs]
    with ProcessPoolExecutor(2) as pool:
        parallel = list(pool.map(_draw_in_child, reversed(jobs)))
    assert serial == parallel[::-1]


def test_draw_sample_reward_is_lookup(rng):
    game = make_random_game(rng)
    draw = draw_sample(game, RandomStream(1), 1, 2, 0, (1, 0))
    assert draw.joint_action == 2
    assert draw.reward == game.rewards[1, 2, 0, 2]
    assert 0 <= draw.next_state < game.num_states


def test_json_roundtrip(rng):
    game = make_random_game(rng, R=0.3)
    back = game_from_json(game_to_json(game))
    np.testing.assert_array_equal(back.kernel, game.kernel)
    np.testing.assert_array_equal(back.rewards, game.rewards)
    assert back.uncertainty_level == 0.3 and back.action_counts == (2, 2)
