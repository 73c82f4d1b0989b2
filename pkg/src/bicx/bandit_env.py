"""Linear bandit with Gaussian reward noise and a hidden loss vector."""

from __future__ import annotations

import numpy as np

from .errors import PreconditionError
from .priors import PriorSpec, sample

UNIT_TOL = 1e-6


class Environment:
    """Rewards ``<a, theta> + noise_sd * N(0, 1)`` for unit actions ``a``.

    ``hidden_theta`` is meant for the harness only; the exploration code
    never reads it.
    """

    def __init__(self, hidden_theta, noise_sd: float = 1.0, seed=None):
        if noise_sd < 0:
            raise PreconditionError("noise_sd must be non-negative")
        self.hidden_theta = np.asarray(hidden_theta, dtype=float)
        self.noise_sd = float(noise_sd)
        self.t = 0
        self.rng = np.random.default_rng(seed)

    @property
    def d(self) -> int:
        return self.hidden_theta.size

    def _check(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float).ravel()
        if a.shape != (self.d,):
            raise PreconditionError(f"action has dimension {a.size}, expected {self.d}")
        if abs(np.linalg.norm(a) - 1.0) > UNIT_TOL:
            raise PreconditionError(f"action must be a unit vector (norm {np.linalg.norm(a):.6g})")
        return a

    def pull(self, a) -> float:
        return float(self.pull_many(a, 1)[0])

    def pull_many(self, a, n: int) -> np.ndarray:
        """Play the same action ``n`` times and return the rewards."""
        a = self._check(a)
        mean = float(a @ self.hidden_theta)
        # always draw so that noisy and noiseless runs share one stream
        noise = self.rng.standard_normal(n)
        self.t += n
        return mean + self.noise_sd * noise


def spawn(prior: PriorSpec, seed, noise_sd: float = 1.0) -> Environment:
    """Draw the hidden vector from ``prior`` and return a fresh environment."""
    ss = np.random.SeedSequence(seed)
    theta_seed, noise_seed = ss.spawn(2)
    theta = sample(prior, 1, np.random.default_rng(theta_seed))[0]
    return Environment(theta, noise_sd=noise_sd, seed=noise_seed)


def pull(env: Environment, a) -> float:
    return env.pull(a)
