import math

import numpy as np
import pytest

from bicx import posterior as post
from bicx.bandit_env import Environment, spawn
from bicx.bic_explore import (
    ExplorationLedger,
    ExploreConfig,
    TranscriptReport,
    _Run,
    check_spectral,
    compute_lambda,
    estimate_projection,
    exponential_growth,
    initial_exploration,
    run_bic_exploration,
    scaled_registry,
    theoretical_registry,
)
from bicx.errors import ConfigError, PreconditionError
from bicx.priors import AssumptionConstants, Gaussian, UniformBall, estimate_constants

AC = AssumptionConstants(c_d=0.5, eps_d=0.25, sigma_var=0.5, k_subg=1.5)


def test_compute_lambda_formula_value():
    ac = AssumptionConstants(c_d=1.0, eps_d=1.0, sigma_var=1.0, k_subg=1.0)
    lam = compute_lambda(ac, 1, 1.0, 1.0, 1.0)
    assert lam == pytest.approx(1 / (32 * math.pi * (math.sqrt(math.pi) + 1) ** 2), rel=1e-12)
    assert lam == pytest.approx(0.0012942, abs=1e-7)


def test_compute_lambda_needs_existence_constants():
    with pytest.raises(ConfigError):
        compute_lambda(AC, 2, None, 10.0)
    with pytest.raises(ConfigError):
        theoretical_registry(AC, 2)
    reg = theoretical_registry(AC, 2, use_documented_defaults=True)
    assert reg.n_yhat() <= reg.kappa
    assert reg.p_select <= reg.tilt_lower_bound
    L = reg.growth_length(2, 0.5, 1 / reg.lam)
    assert L <= reg.kappa


def test_scaled_registry_overrides():
    assert scaled_registry(AC, 2, overrides={"lam": 0.05}).lam == 0.05
    reg = scaled_registry(AC, 2, overrides={"kappa": 100})
    assert reg.n_yhat() == 100
    reg = scaled_registry(AC, 2, overrides={"tilt_lower_bound": 1e-3})
    assert reg.p_select == 1e-3
    with pytest.raises(ConfigError):
        scaled_registry(AC, 2, overrides={"p_select": 0.5})
    with pytest.raises(ConfigError):
        scaled_registry(AC, 2, overrides={"banana": 1})


def test_check_spectral_examples():
    assert check_spectral(np.eye(2), 1.0).holds
    c = check_spectral([[1.0, 0.0]], 1e-6)
    assert not c.holds and c.min_eig == 0
    s = 1 / math.sqrt(2)
    acts = np.array([[s, s]] * 3 + [[1.0, 0.0]])
    c = check_spectral(acts, 0.3)
    assert c.min_eig == pytest.approx(np.linalg.eigvalsh(acts.T @ acts)[0], abs=1e-12)
    assert c.holds == (c.min_eig >= 0.3)


def test_estimate_projection_is_exact_without_noise():
    theta = np.array([0.3, -0.7, 0.2])
    env = Environment(theta, noise_sd=0.0, seed=0)
    led = ExplorationLedger(3)
    dirs = np.array([[1, 0, 0], [0.6, 0.8, 0], [0, 0.6, 0.8]])
    for v in dirs:
        led.add(v, env.pull_many(v, 10))
    vals, vecs = np.linalg.eigh(led.gram.m)
    np.testing.assert_allclose(estimate_projection(led, vecs, vals, 10), vecs.T @ theta, atol=1e-12)


def _zero_noise_run(points, theta, kappa=50, tilt_samples=500):
    d = len(theta)
    reg = scaled_registry(AC, d, kappa=kappa)
    env = Environment(theta, noise_sd=0.0, seed=0)
    cfg = ExploreConfig(tilt_samples=tilt_samples)
    cloud = post.ParticleCloud.uniform(points)
    seeds = np.random.SeedSequence(0).spawn(3)
    run = _Run(cloud, env, reg, cfg, float(cloud.weights @ cloud.points[:, 0]), seeds, TranscriptReport(d=d))
    led = ExplorationLedger(d)
    e1 = np.eye(d)[0]
    led.add(e1, run.play(e1, kappa, "explore_e1", 0, 0, 1.0))
    return run, led


def test_initial_exploration_point_mass_off_axis():
    run, led = _zero_noise_run(np.array([[0.0, 1.0]]), [0.0, 1.0])
    with pytest.warns(RuntimeWarning, match="spot-check"):
        a, _ = initial_exploration(run, led, 1)
    assert a[1] > 0


def test_growth_doubles_in_zero_noise():
    for theta in ([0.0, 1.0], [0.0, -1.0]):
        run, led = _zero_noise_run(np.array([[0.0, 1.0], [0.0, -1.0]]), theta)
        a = np.array([math.sqrt(1 - 0.01), 0.1])
        b, _ = exponential_growth(run, led, a, [], 1)
        np.testing.assert_allclose(b, theta, atol=1e-12)
        assert run.report.growth_ratios[-1] == pytest.approx(10.0)


def test_growth_rejects_action_inside_subspace():
    run, led = _zero_noise_run(np.array([[0.0, 1.0], [0.0, -1.0]]), [0.0, 1.0])
    with pytest.raises(PreconditionError):
        exponential_growth(run, led, np.array([1.0, 0.0]), [], 1)


def test_one_dimensional_run_stops_after_first_block():
    p = Gaussian([0.5], [[1.0]])
    ac = estimate_constants(p, n_samples=20_000)
    reg = scaled_registry(ac, 1, kappa=200)
    rep = run_bic_exploration(p, spawn(p, 0), 5.0, reg, ExploreConfig(n_particles=500), seed=0)
    assert rep.certified and rep.total_pulls == 200
    assert rep.achieved_lambda == pytest.approx(200.0)
    assert {b.phase for b in rep.blocks} == {"explore_e1"}


def test_two_dimensional_ball_certifies():
    p = UniformBall(1.0, [0.0, 0.0])
    ac = estimate_constants(p, n_samples=20_000)
    reg = scaled_registry(ac, 2, kappa=200)
    rep = run_bic_exploration(p, spawn(p, 1), 2.0, reg, ExploreConfig(n_particles=2000, tilt_samples=2000), seed=1)
    assert rep.certified, rep.failure
    assert check_spectral(rep, 2.0).holds
    assert rep.achieved_lambda == pytest.approx(np.linalg.eigvalsh(rep.gram())[0], abs=1e-12)


def test_budget_guard():
    p = UniformBall(1.0, [0.0, 0.0])
    reg = scaled_registry(AC, 2, kappa=200)
    rep = run_bic_exploration(p, spawn(p, 0), 1.0, reg, ExploreConfig(n_particles=500, max_steps=10), seed=0)
    assert rep.failure == "budget" and not rep.certified
    assert rep.total_pulls == 10


def test_rejects_non_canonical_prior():
    p = Gaussian([0.0, 1.0], np.eye(2))
    with pytest.raises(PreconditionError):
        run_bic_exploration(p, spawn(p, 0), 1.0, scaled_registry(AC, 2))


def test_explore_config_validation():
    with pytest.raises(ConfigError):
        ExploreConfig(signal_scope="everything")
    with pytest.raises(ConfigError):
        ExploreConfig(tilt_method="exact")


def test_run_is_deterministic():
    p = UniformBall(1.0, [0.0, 0.0])
    reg = scaled_registry(AC, 2, kappa=200)
    cfg = ExploreConfig(n_particles=800, tilt_samples=1000)
    a = run_bic_exploration(p, spawn(p, 2), 1.0, reg, cfg, seed=2)
    b = run_bic_exploration(p, spawn(p, 2), 1.0, reg, cfg, seed=2)
    assert a.events == b.events
