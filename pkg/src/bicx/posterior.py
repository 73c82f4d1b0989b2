"""Weighted particle approximation of the prior and conditioning on signals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, logsumexp

from . import _kernels
from .errors import DegeneratePosterior, PreconditionError
from .geometry import normalize

NOISE_FLOOR = 1e-6


@dataclass(frozen=True)
class ParticleCloud:
    """Particles with normalised log-weights; ``seed_lineage`` records provenance."""

    points: np.ndarray
    log_weights: np.ndarray
    seed_lineage: tuple = ()

    @classmethod
    def uniform(cls, points, seed_lineage=()) -> "ParticleCloud":
        points = np.asarray(points, dtype=float)
        n = len(points)
        return cls(points, np.full(n, -math.log(n)), tuple(seed_lineage))

    @classmethod
    def weighted(cls, points, weights, seed_lineage=()) -> "ParticleCloud":
        w = np.asarray(weights, dtype=float)
        with np.errstate(divide="ignore"):
            lw = np.log(w / w.sum())
        return cls(np.asarray(points, dtype=float), lw, tuple(seed_lineage))

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)


# -------------------------------------------------------------------- signals

@dataclass(frozen=True)
class GaussianObs:
    """Observation ``value = <direction, l> + N(0, noise_var)``."""

    direction: np.ndarray
    noise_var: float
    value: float

    def log_likelihood(self, points):
        r = self.value - points @ np.asarray(self.direction, dtype=float)
        return -0.5 * r * r / self.noise_var

    def to_dict(self):
        return {"kind": "gaussian_obs", "direction": list(map(float, self.direction)),
                "noise_var": float(self.noise_var), "value": float(self.value)}


@dataclass(frozen=True)
class SignThreshold:
    """Sign of ``<coef, l> + N(0, noise_sd^2)``."""

    coef: np.ndarray
    noise_sd: float
    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise PreconditionError("sign must be +1 or -1")
        if not self.noise_sd > 0:
            raise PreconditionError("noise_sd must be positive")

    def log_likelihood(self, points):
        return log_ndtr(self.sign * (points @ np.asarray(self.coef, dtype=float)) / self.noise_sd)

    def to_dict(self):
        return {"kind": "sign_threshold", "coef": list(map(float, self.coef)),
                "noise_sd": float(self.noise_sd), "sign": int(self.sign)}


@dataclass(frozen=True)
class MixtureSign:
    """Sign of a variable that is ``<action, l> + noise`` with probability
    ``select_prob`` and an independent symmetric draw otherwise."""

    action: np.ndarray
    select_prob: float
    sign: int
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise PreconditionError("sign must be +1 or -1")
        if not 0.0 <= self.select_prob <= 1.0:
            raise PreconditionError("select_prob must lie in [0, 1]")

    def log_likelihood(self, points):
        sd = max(self.noise_sd, NOISE_FLOOR)
        lp = log_ndtr(self.sign * (points @ np.asarray(self.action, dtype=float)) / sd)
        p = self.select_prob
        if p == 0.0:
            return np.full(len(points), math.log(0.5))
        if p == 1.0:
            return lp
        return np.logaddexp(math.log(p) + lp, math.log((1 - p) / 2))

    def to_dict(self):
        return {"kind": "mixture_sign", "action": list(map(float, self.action)),
                "select_prob": float(self.select_prob), "sign": int(self.sign),
                "noise_sd": float(self.noise_sd)}


@dataclass(frozen=True)
class TiltEvent:
    """Outcome ``psi`` of a Bernoulli(f(z(y_hat))) coin.

    ``method='shared'`` evaluates P(psi = 1 | l) by importance sampling over
    the tilt's own noisy samples; ``method='mc'`` draws ``inner_n`` fresh
    noise vectors per particle and needs the tilt's z-map particles.
    """

    tilt: object
    psi: int
    method: str = "shared"
    inner_n: int = 16
    seed: int = 0

    def prob_one(self, points):
        # cached on the tilt so both outcomes and repeated conditioning share it
        cache = self.tilt.__dict__.setdefault("_prob_cache", [])
        key = ("shared",) if self.method == "shared" else (self.method, self.inner_n, self.seed)
        for ref, k, val in cache:
            if ref is points and k == key:
                return val
        if self.method == "shared":
            val = tilt_likelihood_shared(points, self.tilt)
        elif self.method == "mc":
            val = tilt_likelihood_points(points, self.tilt, self.inner_n, self.seed)
        else:
            raise PreconditionError(f"unknown tilt likelihood method {self.method!r}")
        cache.append((points, key, val))
        return val

    def log_likelihood(self, points):
        p1 = np.clip(self.prob_one(points), 0.0, 1.0)
        with np.errstate(divide="ignore"):
            return np.log(p1 if self.psi == 1 else 1.0 - p1)

    def to_dict(self):
        return {"kind": "tilt_event", "psi": int(self.psi), "method": self.method,
                "inner_n": int(self.inner_n), "seed": int(self.seed), "tilt": self.tilt.to_dict()}


SignalRecord = GaussianObs | SignThreshold | MixtureSign | TiltEvent


def signal_from_dict(obj: dict) -> SignalRecord:
    kind = obj["kind"]
    if kind == "gaussian_obs":
        return GaussianObs(np.array(obj["direction"]), obj["noise_var"], obj["value"])
    if kind == "sign_threshold":
        return SignThreshold(np.array(obj["coef"]), obj["noise_sd"], int(obj["sign"]))
    if kind == "mixture_sign":
        return MixtureSign(np.array(obj["action"]), obj["select_prob"], int(obj["sign"]), obj.get("noise_sd", 1.0))
    if kind == "tilt_event":
        from .tilt import TiltFunction

        return TiltEvent(TiltFunction.from_dict(obj["tilt"]), int(obj["psi"]), obj.get("method", "shared"),
                         int(obj.get("inner_n", 16)), int(obj.get("seed", 0)))
    raise PreconditionError(f"unknown signal kind {kind!r}")


# ------------------------------------------------------------------ conditioning

def reweight(cloud: ParticleCloud, signals) -> ParticleCloud:
    """Multiply the weights by each signal's likelihood and renormalise."""
    lw = cloud.log_weights.copy()
    for s in signals:
        lw = lw + s.log_likelihood(cloud.points)
    if not np.any(np.isfinite(lw)):
        raise DegeneratePosterior("all particle weights underflowed")
    lw = np.where(np.isnan(lw), -np.inf, lw)
    lw -= logsumexp(lw)
    return ParticleCloud(cloud.points, lw, cloud.seed_lineage)


@dataclass(frozen=True)
class PosteriorMean:
    mean: np.ndarray
    norm: float
    credible_radius: float  # one Monte Carlo standard error of the mean, in norm


def posterior_mean(cloud: ParticleCloud, signals=()) -> PosteriorMean:
    post = reweight(cloud, signals) if signals else cloud
    w = post.weights
    mean = w @ post.points
    dev = post.points - mean
    se = math.sqrt(float(np.sum(w * w * np.einsum("ij,ij->i", dev, dev))))
    return PosteriorMean(mean, float(np.linalg.norm(mean)), se)


def default_zero_tol(d: int) -> float:
    return 1e-8 * math.sqrt(d)


def exploit_with_mean(cloud, signals, fallback, zero_tol=None):
    """Like :func:`exploit` but also return the posterior mean and whether
    the fallback was used."""
    pm = posterior_mean(cloud, signals)
    tol = default_zero_tol(cloud.d) if zero_tol is None else zero_tol
    if pm.norm <= tol:
        return normalize(np.asarray(fallback, dtype=float)), pm, True
    return pm.mean / pm.norm, pm, False


def exploit(cloud: ParticleCloud, signals, fallback, zero_tol: float | None = None) -> np.ndarray:
    """Normalised posterior mean, or ``fallback`` when its norm is at most ``zero_tol``."""
    return exploit_with_mean(cloud, signals, fallback, zero_tol)[0]


def effective_sample_size(cloud_or_weights) -> float:
    """Kish effective sample size ``1 / sum w_i^2`` of normalised weights."""
    if isinstance(cloud_or_weights, ParticleCloud):
        w = cloud_or_weights.weights
    else:
        w = np.asarray(cloud_or_weights, dtype=float)
        w = w / w.sum()
    return float(1.0 / np.sum(w * w))


def systematic_resample(cloud: ParticleCloud, rng) -> ParticleCloud:
    """Systematic resampling to equal weights (not used by the main loop)."""
    n = len(cloud)
    u = (rng.random() + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(cloud.weights), u)
    idx = np.minimum(idx, n - 1)
    return ParticleCloud.uniform(cloud.points[idx], cloud.seed_lineage)


# --------------------------------------------------------------------- z map

def _inv_var(noise_vars):
    nv = np.maximum(np.atleast_1d(np.asarray(noise_vars, dtype=float)), NOISE_FLOOR**2)
    return 1.0 / nv


def z_map(y_hat, cloud: ParticleCloud, basis, noise_vars) -> np.ndarray:
    """Posterior mean of ``basis^T l`` given ``y = basis^T l + N(0, diag(noise_vars))``.

    ``y_hat`` may be a single vector or a batch (rows).
    """
    y = np.asarray(y_hat, dtype=float)
    single = y.ndim == 1
    x = cloud.points @ np.asarray(basis, dtype=float).reshape(cloud.d, -1)
    z, _ = _kernels.kernel_mean(np.atleast_2d(y), x, cloud.log_weights, _inv_var(noise_vars))
    return z[0] if single else z


def sample_z_law(cloud: ParticleCloud, basis, noise_vars, m: int, rng):
    """Draw ``m`` noisy projections ``y`` and their z-map images.

    Returns ``(y, z, lse)`` where ``lse`` is the log of the (unnormalised)
    sampling density of each ``y`` under the cloud mixture.
    """
    basis = np.asarray(basis, dtype=float).reshape(cloud.d, -1)
    x = cloud.points @ basis
    idx = rng.choice(len(cloud), size=m, p=cloud.weights)
    nv = np.maximum(np.asarray(noise_vars, dtype=float), NOISE_FLOOR**2)
    y = x[idx] + rng.standard_normal((m, x.shape[1])) * np.sqrt(nv)
    z, lse = _kernels.kernel_mean(y, x, cloud.log_weights, 1.0 / nv)
    return y, z, lse


def tilt_likelihood_shared(points, tilt) -> np.ndarray:
    """P(psi = 1 | l) estimated by importance sampling over the tilt samples.

    With ``y_j`` drawn from the cloud mixture ``p`` the estimate is
    ``sum_j w_j f_j N(y_j; B^T l, s) / p(y_j)``. For the cloud that produced the
    samples this makes ``E[z f]`` and the conditional mean of ``B^T l`` agree
    exactly.
    """
    if tilt.y_points is None:
        raise PreconditionError("tilt carries no noisy samples; use method='mc'")
    x = np.asarray(points, dtype=float) @ tilt.basis
    with np.errstate(divide="ignore"):
        log_coef = np.log(tilt.weights) + np.log(tilt.f_values) - tilt.log_py
    return np.exp(_kernels.log_kernel_sum(x, tilt.y_points, 1.0 / tilt.noise_vars, log_coef))


def tilt_likelihood_points(points, tilt, inner_n: int, seed) -> np.ndarray:
    """P(psi = 1 | l) by simulating ``inner_n`` noisy projections per point.

    Uses the z-map particles stored with the tilt.
    """
    if tilt.zmap_points is None:
        raise PreconditionError("tilt carries no z-map particles")
    from .tilt import eval_tilt

    rng = np.random.default_rng(seed)
    x = np.asarray(points, dtype=float) @ tilt.basis
    n, k = x.shape
    nv = np.maximum(tilt.noise_vars, NOISE_FLOOR**2)
    y = np.repeat(x, inner_n, axis=0) + rng.standard_normal((n * inner_n, k)) * np.sqrt(nv)
    z, _ = _kernels.kernel_mean(y, tilt.zmap_points, tilt.zmap_log_weights, 1.0 / nv)
    return eval_tilt(tilt, z).reshape(n, inner_n).mean(axis=1)


def tilt_likelihood(cloud: ParticleCloud, tilt, basis, noise_vars, inner_n: int, seed) -> np.ndarray:
    """Per-particle P(psi = 1 | l): average of ``f(z(B^T l + noise))`` over
    ``inner_n`` simulated noise draws, with the z-map computed on ``cloud``."""
    from .tilt import eval_tilt

    basis = np.asarray(basis, dtype=float).reshape(cloud.d, -1)
    rng = np.random.default_rng(seed)
    x = cloud.points @ basis
    n, k = x.shape
    nv = np.maximum(np.asarray(noise_vars, dtype=float), NOISE_FLOOR**2)
    y = np.repeat(x, inner_n, axis=0) + rng.standard_normal((n * inner_n, k)) * np.sqrt(nv)
    z, _ = _kernels.kernel_mean(y, x, cloud.log_weights, 1.0 / nv)
    return eval_tilt(tilt, z).reshape(n, inner_n).mean(axis=1)
