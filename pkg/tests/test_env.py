import math

import numpy as np
import pytest

from bicx.bandit_env import Environment, pull, spawn
from bicx.errors import PreconditionError
from bicx.priors import Empirical, Gaussian


def test_noiseless_rewards():
    env = Environment([0.6, 0.8], noise_sd=0.0, seed=0)
    assert pull(env, [1.0, 0.0]) == 0.6
    assert env.pull([0.6, 0.8]) == pytest.approx(1.0, abs=1e-15)


def test_reward_mean_within_three_sigma():
    env = Environment([0.3, -0.2], noise_sd=1.0, seed=1)
    a = np.array([1.0, 1.0]) / math.sqrt(2)
    r = env.pull_many(a, 100_000)
    assert abs(r.mean() - a @ env.hidden_theta) <= 3 / math.sqrt(100_000)


def test_rejects_non_unit_action():
    env = Environment([0.0, 1.0], seed=0)
    with pytest.raises(PreconditionError):
        env.pull([1.0, 1.0])


def test_spawn_examples():
    assert np.array_equal(spawn(Empirical([[0.2, 0.4]], [1.0]), 0).hidden_theta, [0.2, 0.4])
    p = Gaussian([0, 0], np.eye(2))
    np.testing.assert_array_equal(spawn(p, 5).hidden_theta, spawn(p, 5).hidden_theta)
    thetas = np.array([spawn(p, s).hidden_theta for s in range(10_000)])
    assert np.all(np.abs(thetas.mean(axis=0)) <= 0.05)


def test_noise_streams_shared_across_noise_levels():
    a = Environment([1.0, 0.0], noise_sd=1.0, seed=3).pull_many([1.0, 0.0], 5)
    b = Environment([1.0, 0.0], noise_sd=2.0, seed=3).pull_many([1.0, 0.0], 5)
    np.testing.assert_allclose(b - 1.0, 2 * (a - 1.0))
