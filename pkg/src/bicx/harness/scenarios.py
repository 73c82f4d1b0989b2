"""Priors on which incentive-compatible exploration provably stalls."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from ..bandit_env import spawn
from ..bic_explore import ExploreConfig, run_bic_exploration, scaled_registry
from ..errors import TiltInfeasible
from ..posterior import ParticleCloud, sample_z_law
from ..priors import Empirical, UniformBox, estimate_constants, sample
from ..tilt import build_tilt

SCENARIOS = ("half_space", "degenerate_variance")


def half_space_prior() -> UniformBox:
    """First coordinate uniform on [0.5, 2], second uniform on [-1, 1]."""
    return UniformBox([0.5, -1.0], [2.0, 1.0])


def degenerate_variance_prior(atom_weight: float) -> Empirical:
    """Product prior with rare atoms.

    ``l1 = -1`` with probability ``q`` and ``1`` otherwise; ``l2`` is ``-2`` or
    ``2`` with probability ``q`` each and ``0`` otherwise. ``q = 0.5`` is the
    benign symmetric case.
    """
    q = float(atom_weight)
    if not 0 < q <= 0.5:
        raise ValueError("atom weight must lie in (0, 0.5]")
    pts, w = [], []
    for a, pa in ((-1.0, q), (1.0, 1 - q)):
        for b, pb in ((-2.0, q), (0.0, 1 - 2 * q), (2.0, q)):
            if pa * pb > 0:
                pts.append((a, b))
                w.append(pa * pb)
    return Empirical(np.array(pts), np.array(w))


def run_half_space(steps: int = 10_000, seed: int = 0, n_particles: int = 4000) -> dict:
    """The only action worth taking under this prior is ``e1``.

    Any mean-cancelling tilt is infeasible because the first coordinate is
    always positive, so the principal keeps recommending ``e1``.
    """
    prior = half_space_prior()
    rng = np.random.default_rng(seed)
    cloud = ParticleCloud.uniform(sample(prior, n_particles, rng))
    basis = np.array([[1.0], [0.0]])
    _, z, _ = sample_z_law(cloud, basis, np.array([1e-3]), 2000, rng)
    tilt_error = None
    try:
        build_tilt(z, None, 0.5, 1.0, lower_bound=1e-6, spot_check=False)
    except TiltInfeasible as exc:
        tilt_error = {"message": str(exc), "direction": exc.direction.tolist()}

    ac = estimate_constants(prior, n_samples=50_000, seed=seed)
    reg = scaled_registry(ac, 2, overrides={"tilt_lower_bound": 1e-6})
    env = spawn(prior, [seed, 0])
    cfg = ExploreConfig(n_particles=n_particles, max_steps=steps, on_tilt_infeasible="exploit")
    rep = run_bic_exploration(prior, env, 1.0, reg, cfg, seed=[seed, 1])
    actions = np.array([b.action for b in rep.blocks])
    e1 = np.array([1.0, 0.0])
    return {
        "scenario": "half_space",
        "tilt_error": tilt_error,
        "failure": rep.failure,
        "certified": rep.certified,
        "total_pulls": rep.total_pulls,
        "all_actions_e1": bool(np.allclose(actions, e1)),
        "achieved_lambda": rep.achieved_lambda,
    }


def run_degenerate_variance(atom_weight: float = 1e-4, steps: int = 20_000, seed: int = 0) -> dict:
    """Growth of the unexplored component collapses as the atoms become rare."""
    prior = degenerate_variance_prior(atom_weight)
    # constants from a large sample of the atoms (the atom table itself is tiny)
    ac = estimate_constants(Empirical(sample(prior, 200_000, np.random.default_rng(seed))), n_samples=200_000, seed=seed)
    reg = scaled_registry(ac, 2)
    env = spawn(prior, [seed, 0])
    cfg = ExploreConfig(max_steps=steps)
    rep = run_bic_exploration(prior, env, 1.0, reg, cfg, seed=[seed, 1])
    ratios = np.array(rep.growth_ratios)
    return {
        "scenario": "degenerate_variance",
        "atom_weight": atom_weight,
        "certified": rep.certified,
        "failure": rep.failure,
        "total_pulls": rep.total_pulls,
        "growth_calls": int(ratios.size),
        "median_growth_ratio": float(np.median(ratios)) if ratios.size else math.nan,
        "initial_perp_norms": rep.initial_perp_norms,
        "achieved_lambda": rep.achieved_lambda,
    }


def counterexample_scenarios(name: str, **kwargs) -> dict:
    if name == "half_space":
        return run_half_space(**kwargs)
    if name == "degenerate_variance":
        return run_degenerate_variance(**kwargs)
    raise ValueError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
