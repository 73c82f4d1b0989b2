"""Replicated experiments behind the statistical acceptance checks."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .. import posterior as post
from ..bandit_env import Environment, spawn
from ..bic_explore import (
    ExplorationLedger,
    ExploreConfig,
    _build_cloud,
    _Run,
    estimate_projection,
    initial_exploration,
    run_bic_exploration,
    scaled_registry,
    TranscriptReport,
)
from ..geometry import eigendecompose, ell_index, project_complement
from ..priors import AssumptionConstants, Empirical, UniformBall, estimate_constants
from ..tilt import eval_tilt
from .runner import max_workers


def _map(fn, items):
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


# ------------------------------------------------------------ growth ratios

@dataclass(frozen=True)
class GrowthJob:
    prior: object
    constants: AssumptionConstants
    noise_sd: float
    seed: int
    n_particles: int
    tilt_samples: int


def _growth_one(job: GrowthJob) -> list:
    reg = scaled_registry(job.constants, job.prior.d)
    env = spawn(job.prior, [job.seed, 0], noise_sd=job.noise_sd)
    cfg = ExploreConfig(n_particles=job.n_particles, tilt_samples=job.tilt_samples, max_outer=1)
    rep = run_bic_exploration(job.prior, env, 1.0, reg, cfg, seed=[job.seed, 1])
    return list(rep.growth_ratios)


def growth_ratios(prior, replicates: int, noise_sd: float = 1.0, seed: int = 0,
                  n_particles: int = 3000, tilt_samples: int = 2000, constants=None) -> np.ndarray:
    """Per-call growth ratios ``|P_perp b| / |P_perp a|`` from the first outer
    iteration of independent runs."""
    ac = constants or estimate_constants(prior, n_samples=50_000, seed=seed)
    jobs = [GrowthJob(prior, ac, noise_sd, seed * 100_003 + i, n_particles, tilt_samples) for i in range(replicates)]
    out = []
    for r in _map(_growth_one, jobs):
        out.extend(r)
    return np.array(out)


# ----------------------------------------------------- initial exploration

def two_direction_prior(n_points: int = 2000, seed: int = 0) -> Empirical:
    """``l2 = +-1`` with equal probability, independent of ``l1 ~ N(0.3, 0.5^2)``."""
    rng = np.random.default_rng(seed)
    l1 = 0.3 + 0.5 * rng.standard_normal(n_points)
    l1 += 0.3 - l1.mean()
    l2 = np.repeat([1.0, -1.0], n_points // 2)
    return Empirical(np.column_stack([l1, l2]))


@dataclass(frozen=True)
class InitialJob:
    prior: object
    constants: AssumptionConstants
    seed: int
    n_check: int
    tilt_samples: int


def _initial_one(job: InitialJob) -> dict:
    """One initial-exploration step after the ``e1`` block.

    Also estimates the S-projection of ``E[l | psi = 1]`` with fresh draws of
    ``l`` from the principal's cloud, the realised noise and the realised tilt.
    """
    prior, d = job.prior, job.prior.d
    reg = scaled_registry(job.constants, d)
    env = spawn(prior, [job.seed, 0])
    cfg = ExploreConfig(n_particles=len(prior.points), tilt_samples=job.tilt_samples)
    ss = np.random.SeedSequence([job.seed, 1])
    cloud_seed, *streams = ss.spawn(4)
    cloud = _build_cloud(prior, cfg.n_particles, cloud_seed)
    rep = TranscriptReport(d=d)
    run = _Run(cloud, env, reg, cfg, float(prior.weights @ prior.points[:, 0]), streams, rep)
    ledger = ExplorationLedger(d)
    e1 = np.eye(d)[0]
    ledger.add(e1, run.play(e1, reg.kappa, "explore_e1", 0, 0, 1.0))
    a, _ = initial_exploration(run, ledger, 1)
    g = eigendecompose(ledger.gram)
    basis = g.eigvecs[:, : ell_index(g.eigvals, reg.lam)]
    tilt_ev = next(s for s in rep.signals if isinstance(s, post.TiltEvent))
    tilt = tilt_ev.tilt
    # nested Monte Carlo: l from the cloud, y = B^T l + noise, psi ~ f(z(y))
    rng = np.random.default_rng([job.seed, 2])
    idx = rng.choice(len(cloud), size=job.n_check, p=cloud.weights)
    x = cloud.points[idx] @ basis
    y = x + rng.standard_normal(x.shape) * np.sqrt(tilt.noise_vars)
    f = eval_tilt(tilt, post.z_map(y, cloud, basis, tilt.noise_vars))
    psi = rng.random(job.n_check) < f
    xs = x[psi]
    return {
        "perp_norm": float(np.linalg.norm(project_complement(a, basis))),
        "s_mean": xs.mean(axis=0).tolist(),
        "s_se": (xs.std(axis=0, ddof=1) / np.sqrt(len(xs))).tolist(),
        "s_mean_model": (post.posterior_mean(cloud, [post.TiltEvent(tilt, 1)]).mean @ basis).tolist(),
    }


def initial_exploration_trials(replicates: int, seed: int = 0, n_check: int = 4000, tilt_samples: int = 2000):
    prior = two_direction_prior(seed=seed)
    ac = estimate_constants(prior, n_samples=50_000, seed=seed)
    jobs = [InitialJob(prior, ac, seed * 100_003 + i, n_check, tilt_samples) for i in range(replicates)]
    return _map(_initial_one, jobs)


# ------------------------------------------------------ projection estimate

def projection_errors(replicates: int, theta, directions, n_rounds: int, noise_sd: float = 1.0, seed: int = 0):
    """Errors ``yhat - B^T theta`` of the projection estimate for fixed block
    directions, together with the predicted variances ``noise^2 / (n lambda)``."""
    theta = np.asarray(theta, dtype=float)
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    d = theta.size
    errs = []
    for i in range(replicates):
        env = Environment(theta, noise_sd=noise_sd, seed=[seed, i])
        ledger = ExplorationLedger(d)
        for v in directions:
            ledger.add(v, env.pull_many(v, n_rounds))
        g = eigendecompose(ledger.gram)
        ell = ell_index(g.eigvals, 1e-9)
        basis, eigs = g.eigvecs[:, :ell], g.eigvals[:ell]
        errs.append(estimate_projection(ledger, basis, eigs, n_rounds) - basis.T @ theta)
    return np.array(errs), noise_sd**2 / (n_rounds * eigs)


def ks_projection(errs, variances):
    return [stats.kstest(errs[:, k], "norm", args=(0.0, np.sqrt(v))).pvalue for k, v in enumerate(variances)]


# ------------------------------------------------------------- scaling runs

@dataclass(frozen=True)
class ScalingJob:
    d: int
    seed: int
    max_steps: int


def _scaling_one(job: ScalingJob) -> dict:
    prior = UniformBall(1.0, np.zeros(job.d))
    ac = estimate_constants(prior, n_samples=50_000, seed=job.seed)
    reg = scaled_registry(ac, job.d)
    env = spawn(prior, [job.seed, 0])
    cfg = ExploreConfig(n_particles=4000, tilt_samples=3000, max_steps=job.max_steps)
    rep = run_bic_exploration(prior, env, 1.0, reg, cfg, seed=[job.seed, 1])
    return {"d": job.d, "certified": rep.certified, "pulls": rep.total_pulls, "failure": rep.failure}


def scaling_pulls(dims, seeds, max_steps: int = 200_000) -> list[dict]:
    jobs = [ScalingJob(d, s, max_steps) for d in dims for s in seeds]
    return _map(_scaling_one, jobs)
