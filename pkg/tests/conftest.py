import numpy as np
import pytest

from rmg.game import RobustMarkovGame, validate


def make_random_game(rng, m=2, S=3, A=(2, 2), H=3, R=0.0, zero_sum=False):
    J = int(np.prod(A))
    kernel = rng.random((H, S, J, S)) + 1e-3
    kernel /= kernel.sum(axis=-1, keepdims=True)
    rewards = rng.random((m, H, S, J))
    if zero_sum:
        rewards[1] = 1.0 - rewards[0]
    game = RobustMarkovGame(m, S, tuple(A), H, kernel, rewards, R)
    validate(game)
    return game


def random_stochastic(rng, shape):
    x = rng.random(shape) + 1e-3
    return x / x.sum(axis=-1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
