"""Prior distributions over the hidden loss vector and their constants."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import PreconditionError

MIN_EMPIRICAL_POINTS = 10


@dataclass(frozen=True)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise PreconditionError("covariance shape does not match the mean")
        if np.linalg.eigvalsh(0.5 * (cov + cov.T))[0] < -1e-12:
            raise PreconditionError("covariance is not positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def d(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class UniformBall:
    radius: float
    center: np.ndarray

    def __post_init__(self):
        if not self.radius > 0:
            raise PreconditionError("radius must be positive")
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))

    @property
    def d(self) -> int:
        return self.center.size


@dataclass(frozen=True)
class UniformBox:
    """Uniform on an axis-aligned box, optionally followed by an orthogonal map.

    A sample is ``rotation @ u`` with ``u`` uniform on ``[low, high]``.
    """

    low: np.ndarray
    high: np.ndarray
    rotation: np.ndarray | None = None

    def __post_init__(self):
        low = np.atleast_1d(np.asarray(self.low, dtype=float))
        high = np.atleast_1d(np.asarray(self.high, dtype=float))
        if low.shape != high.shape or np.any(high <= low):
            raise PreconditionError("box needs low < high coordinate-wise")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)
        if self.rotation is not None:
            object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))

    @property
    def d(self) -> int:
        return self.low.size


@dataclass(frozen=True)
class Empirical:
    points: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.full(len(pts), 1.0 / len(pts)) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (len(pts),) or np.any(w < 0) or not w.sum() > 0:
            raise PreconditionError("weights must be non-negative, one per point, and not all zero")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w / w.sum())

    @property
    def d(self) -> int:
        return self.points.shape[1]


PriorSpec = Gaussian | UniformBall | UniformBox | Empirical


def r_regular_body(kind: str, r: float, d: int, center=None) -> PriorSpec:
    """Uniform prior on a convex body containing a ball of radius ``r``.

    Only balls and axis-aligned cubes are supported: ``kind='ball'`` gives the
    ball of radius ``r`` and ``kind='box'`` the cube of half-width ``r``.
    """
    center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    if kind == "ball":
        return UniformBall(r, center)
    if kind == "box":
        return UniformBox(center - r, center + r)
    raise PreconditionError(f"unsupported body {kind!r}; use 'ball' or 'box'")


def truncated_gaussian(mean, cov, low, high, n: int, seed: int) -> Empirical:
    """Gaussian restricted to a box, represented by a rejection-sampled cloud."""
    g = Gaussian(mean, cov)
    low, high = np.asarray(low, dtype=float), np.asarray(high, dtype=float)
    rng = np.random.default_rng(seed)
    kept: list[np.ndarray] = []
    total = 0
    for _ in range(1000):
        x = rng.multivariate_normal(g.mean, g.cov, size=max(n, 1000))
        x = x[np.all((x >= low) & (x <= high), axis=1)]
        kept.append(x)
        total += len(x)
        if total >= n:
            return Empirical(np.concatenate(kept)[:n])
    raise PreconditionError("truncation region has negligible Gaussian mass")


def load_empirical(path, d: int | None = None) -> Empirical:
    """Read whitespace-separated points, one per line, ``#`` starts a comment.

    A trailing weight column is recognised when ``d`` is given and rows have
    ``d + 1`` columns, or when the first line is ``# weighted``.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    data = np.loadtxt(path, ndmin=2, comments="#")
    weighted = bool(lines) and lines[0].strip().lower() == "# weighted"
    if d is not None:
        if data.shape[1] not in (d, d + 1):
            raise PreconditionError(f"expected {d} or {d + 1} columns, got {data.shape[1]}")
        weighted = data.shape[1] == d + 1
    if weighted:
        return Empirical(data[:, :-1], data[:, -1])
    return Empirical(data)


def sample(prior: PriorSpec, n: int, seed) -> np.ndarray:
    """Draw ``n`` i.i.d. points; deterministic for a fixed seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if isinstance(prior, Gaussian):
        return rng.multivariate_normal(prior.mean, prior.cov, size=n, method="eigh")
    if isinstance(prior, UniformBall):
        d = prior.d
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = prior.radius * rng.random(n) ** (1.0 / d)
        return prior.center + g * rad[:, None]
    if isinstance(prior, UniformBox):
        u = prior.low + (prior.high - prior.low) * rng.random((n, prior.d))
        return u if prior.rotation is None else u @ prior.rotation.T
    if isinstance(prior, Empirical):
        idx = rng.choice(len(prior.points), size=n, p=prior.weights)
        return prior.points[idx].copy()
    raise TypeError(f"unknown prior {type(prior).__name__}")


def prior_mean(prior: PriorSpec, n_mc: int = 200_000, seed: int = 0) -> np.ndarray:
    if isinstance(prior, Gaussian):
        return prior.mean.copy()
    if isinstance(prior, UniformBall):
        return prior.center.copy()
    if isinstance(prior, UniformBox):
        mid = 0.5 * (prior.low + prior.high)
        return mid if prior.rotation is None else prior.rotation @ mid
    if isinstance(prior, Empirical):
        return prior.weights @ prior.points
    return sample(prior, n_mc, seed).mean(axis=0)


def _householder_to_e1(m: np.ndarray) -> np.ndarray:
    """Orthogonal ``Q`` with ``Q m = |m| e1``; the identity when already there."""
    d = m.size
    nrm = np.linalg.norm(m)
    target = np.zeros(d)
    target[0] = nrm
    u = m - target
    un = np.linalg.norm(u)
    if nrm == 0.0 or un <= 1e-15 * max(1.0, nrm):
        return np.eye(d)
    u /= un
    return np.eye(d) - 2.0 * np.outer(u, u)


def rotate(prior: PriorSpec, q: np.ndarray) -> PriorSpec:
    """Push the prior forward through ``x -> q x``."""
    if isinstance(prior, Gaussian):
        return Gaussian(q @ prior.mean, q @ prior.cov @ q.T)
    if isinstance(prior, UniformBall):
        return UniformBall(prior.radius, q @ prior.center)
    if isinstance(prior, UniformBox):
        base = np.eye(prior.d) if prior.rotation is None else prior.rotation
        return UniformBox(prior.low, prior.high, q @ base)
    if isinstance(prior, Empirical):
        return Empirical(prior.points @ q.T, prior.weights)
    raise TypeError(f"unknown prior {type(prior).__name__}")


def canonicalize(prior: PriorSpec) -> tuple[PriorSpec, np.ndarray]:
    """Rotate so the mean points along ``+e1`` with zero other coordinates.

    Returns the rotated prior and the orthogonal matrix applied. A prior whose
    mean already lies on the non-negative ``e1`` ray (including mean zero) is
    returned unchanged with the identity.
    """
    q = _householder_to_e1(prior_mean(prior))
    if np.array_equal(q, np.eye(prior.d)):
        return prior, q
    return rotate(prior, q), q


def prior_to_dict(prior: PriorSpec) -> dict:
    if isinstance(prior, Gaussian):
        return {"kind": "gaussian", "mean": prior.mean.tolist(), "cov": prior.cov.tolist()}
    if isinstance(prior, UniformBall):
        return {"kind": "uniform_ball", "radius": prior.radius, "center": prior.center.tolist()}
    if isinstance(prior, UniformBox):
        out = {"kind": "uniform_box", "low": prior.low.tolist(), "high": prior.high.tolist()}
        if prior.rotation is not None:
            out["rotation"] = prior.rotation.tolist()
        return out
    if isinstance(prior, Empirical):
        return {"kind": "empirical", "points": prior.points.tolist(), "weights": prior.weights.tolist()}
    raise TypeError(f"unknown prior {type(prior).__name__}")


_PRIOR_KEYS = {
    "gaussian": {"mean", "cov"},
    "uniform_ball": {"radius", "center", "d"},
    "uniform_box": {"low", "high", "rotation"},
    "r_regular_body": {"body", "r", "d", "center"},
    "empirical": {"points", "weights", "path", "d"},
}


def prior_from_dict(spec: dict, base_dir=None) -> PriorSpec:
    """Build a prior from its JSON form; unknown keys are rejected."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _PRIOR_KEYS:
        raise PreconditionError(f"unknown prior kind {kind!r}")
    extra = set(spec) - _PRIOR_KEYS[kind]
    if extra:
        raise PreconditionError(f"unknown keys for {kind} prior: {sorted(extra)}")
    if kind == "gaussian":
        return Gaussian(spec["mean"], spec["cov"])
    if kind == "uniform_ball":
        center = spec.get("center")
        if center is None:
            center = np.zeros(int(spec["d"]))
        return UniformBall(float(spec.get("radius", 1.0)), center)
    if kind == "uniform_box":
        return UniformBox(spec["low"], spec["high"], spec.get("rotation"))
    if kind == "r_regular_body":
        return r_regular_body(spec["body"], float(spec["r"]), int(spec["d"]), spec.get("center"))
    if "path" in spec:
        p = Path(spec["path"])
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        return load_empirical(p, spec.get("d"))
    return Empirical(spec["points"], spec.get("weights"))


def parse_prior(text: str) -> PriorSpec:
    """Parse a prior given inline as JSON or as a path to a JSON file."""
    p = Path(text)
    if p.exists():
        if p.suffix == ".json":
            return prior_from_dict(json.loads(p.read_text()), base_dir=p.parent)
        return load_empirical(p)
    return prior_from_dict(json.loads(text))


# ------------------------------------------------------------------ constants

@dataclass(frozen=True)
class AssumptionConstants:
    """Estimated distributional constants of a prior.

    ``c_d`` and ``eps_d``: every direction v has P(<v, x> >= c_d) >= eps_d.
    ``sigma_var``: smallest directional variance.
    ``k_subg``: sub-gaussian scale, P(|<v, x>| >= t) <= 2 exp(-t^2 / k^2).
    """

    c_d: float
    eps_d: float
    sigma_var: float
    k_subg: float

    def to_dict(self) -> dict:
        return {"c_d": self.c_d, "eps_d": self.eps_d, "sigma_var": self.sigma_var, "k_subg": self.k_subg}


def wilson_lower(k, n, z: float = 1.959963984540054):
    """Lower end of the Wilson score interval for a binomial proportion."""
    k = np.asarray(k, dtype=float)
    p = k / n
    denom = 1 + z * z / n
    centre = p + z * z / (2 * n)
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return np.maximum((centre - half) / denom, 0.0)


def _directions(x: np.ndarray, n_dirs: int, rng) -> np.ndarray:
    d = x.shape[1]
    g = rng.standard_normal((n_dirs, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    _, vecs = np.linalg.eigh(cov)
    return np.concatenate([g, vecs.T, -vecs.T])


def estimate_constants(prior: PriorSpec, n_dirs: int = 256, n_samples: int = 100_000, seed: int = 0) -> AssumptionConstants:
    """Monte Carlo estimates of the prior constants.

    Directions are random unit vectors plus both signs of the sample
    covariance eigenvectors. ``eps_d`` uses a 95% Wilson lower bound and the
    reported ``(c_d, eps_d)`` pair maximises ``c_d * eps_d`` over a grid of
    thresholds. Empirical priors need at least 10 points.
    """
    if isinstance(prior, Empirical) and np.count_nonzero(prior.weights) < MIN_EMPIRICAL_POINTS:
        raise PreconditionError(
            f"empirical prior has fewer than {MIN_EMPIRICAL_POINTS} points; constants are not meaningful"
        )
    rng = np.random.default_rng(seed)
    x = sample(prior, n_samples, rng)
    dirs = _directions(x, n_dirs, rng)
    proj = x @ dirs.T  # n x k
    n = x.shape[0]

    sorted_proj = np.sort(proj, axis=0)
    scale = float(np.abs(proj).max())
    grid = np.linspace(0.0, scale, 201)[1:]
    # count of samples with <v, x> >= c, per threshold and direction
    counts = n - np.stack([np.searchsorted(col, grid, side="left") for col in sorted_proj.T], axis=1)
    eps_c = wilson_lower(counts.min(axis=1), n)
    best = int(np.argmax(grid * eps_c))
    c_d, eps_d = float(grid[best]), float(eps_c[best])

    sigma_var = float(np.linalg.eigvalsh(np.atleast_2d(np.cov(x, rowvar=False)))[0])

    absp = np.sort(np.abs(proj), axis=0)
    tgrid = np.linspace(0.0, float(absp[-1].max()), 200)[1:]
    k_subg = 0.0
    for col in absp.T:
        tail = (n - np.searchsorted(col, tgrid, side="left")) / n
        ok = tail * n >= 10  # ignore thresholds with too few exceedances
        if np.any(ok):
            k_subg = max(k_subg, float(np.max(tgrid[ok] / np.sqrt(np.log(2.0 / tail[ok])))))
    return AssumptionConstants(c_d=c_d, eps_d=eps_d, sigma_var=sigma_var, k_subg=k_subg)


def gaussian_subgaussian_scale(cov) -> float:
    """Smallest k valid for every centred Gaussian direction: sqrt(2) * max sd."""
    return math.sqrt(2.0 * float(np.linalg.eigvalsh(np.atleast_2d(cov))[-1]))


def uniform_ball_tail(c: float, d: int) -> float:
    """P(<v, x> >= c) for x uniform on the unit ball in R^d."""
    if c >= 1:
        return 0.0
    if c <= -1:
        return 1.0
    # marginal density of one coordinate is proportional to (1 - t^2)^{(d-1)/2}
    a = (d + 1) / 2.0
    return float(0.5 * stats.beta.sf(c * c, 0.5, a) if c >= 0 else 1 - 0.5 * stats.beta.sf(c * c, 0.5, a))
