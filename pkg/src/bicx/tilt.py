"""Bounded reweighting functions that cancel a distribution's first moment.

Given samples ``z_j`` with weights ``w_j``, find ``f_j`` in ``[lb, 1]`` with
``sum_j w_j f_j z_j = 0``. Such an ``f`` exists with
``lb = eps / (4 max(|E z|, 1))`` whenever ``E[<v, z>_+] >= eps`` for every
unit ``v``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import _kernels
from .errors import PreconditionError, TiltInfeasible

FEAS_TOL = 1e-8
MOMENT_TOL = 1e-8
MAX_SAMPLES = 20_000


def _arr(x, ndim=None):
    if x is None:
        return None
    a = np.asarray(x, dtype=float)
    if ndim == 2 and a.ndim == 1:
        a = a[:, None]
    return a


@dataclass(frozen=True)
class TiltFunction:
    """A tilt tabulated on sample points and extended by nearest neighbour.

    The optional fields describe how the samples were generated: ``y_points``
    are the noisy projections, ``log_py`` their log sampling density (up to a
    shared constant), ``basis`` the projection used and ``noise_vars`` the
    per-coordinate noise. ``zmap_points``/``zmap_log_weights`` are the
    projected particles defining the z-map.
    """

    z_points: np.ndarray
    f_values: np.ndarray
    lower_bound: float
    weights: np.ndarray
    interpolation: str = "nearest_neighbor"
    y_points: np.ndarray | None = None
    log_py: np.ndarray | None = None
    basis: np.ndarray | None = None
    noise_vars: np.ndarray | None = None
    zmap_points: np.ndarray | None = None
    zmap_log_weights: np.ndarray | None = None

    def moment(self) -> np.ndarray:
        return (self.weights * self.f_values) @ self.z_points

    def to_dict(self, include_zmap: bool = False) -> dict:
        def lst(a):
            return None if a is None else np.asarray(a).tolist()

        out = {
            "z_points": lst(self.z_points),
            "f_values": lst(self.f_values),
            "lower_bound": float(self.lower_bound),
            "weights": lst(self.weights),
            "interpolation": self.interpolation,
            "y_points": lst(self.y_points),
            "log_py": lst(self.log_py),
            "basis": lst(self.basis),
            "noise_vars": lst(self.noise_vars),
        }
        if include_zmap:
            out["zmap_points"] = lst(self.zmap_points)
            out["zmap_log_weights"] = lst(self.zmap_log_weights)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "TiltFunction":
        return cls(
            z_points=_arr(obj["z_points"], 2),
            f_values=_arr(obj["f_values"]),
            lower_bound=float(obj["lower_bound"]),
            weights=_arr(obj["weights"]),
            interpolation=obj.get("interpolation", "nearest_neighbor"),
            y_points=_arr(obj.get("y_points"), 2),
            log_py=_arr(obj.get("log_py")),
            basis=_arr(obj.get("basis"), 2),
            noise_vars=_arr(obj.get("noise_vars")),
            zmap_points=_arr(obj.get("zmap_points"), 2),
            zmap_log_weights=_arr(obj.get("zmap_log_weights")),
        )


def default_sample_count(epsilon: float) -> int:
    """``max(2000, 200 / epsilon)``, capped to keep the LP tractable."""
    if epsilon <= 0:
        return MAX_SAMPLES
    return int(min(MAX_SAMPLES, max(2000, math.ceil(200.0 / epsilon))))


def tilt_lower_bound(epsilon: float, mean_norm_cap: float) -> float:
    return epsilon / (4.0 * max(mean_norm_cap, 1.0))


def _polish(a: np.ndarray, f: np.ndarray, lb: float, iters: int = 5) -> np.ndarray:
    """Shrink the residual ``a f`` with least-norm moves on interior coordinates."""
    f = f.copy()
    for _ in range(iters):
        r = a @ f
        if np.linalg.norm(r) <= 1e-14:
            break
        slack = np.minimum(f - lb, 1.0 - f)
        free = slack > 1e-12
        if not np.any(free):
            break
        af = a[:, free]
        step = -af.T @ np.linalg.lstsq(af @ af.T, r, rcond=None)[0]
        # shrink the move so nothing leaves the box
        lim = np.max(np.abs(step) / np.maximum(slack[free], 1e-300))
        if lim > 1.0:
            step /= lim
        f[free] += step
        np.clip(f, lb, 1.0, out=f)
    return f


def positivity_margin(z_samples, weights, n_dirs: int = 64, seed: int = 0) -> float:
    """Smallest ``E[<v, z>_+]`` over ``n_dirs`` random unit directions."""
    z = _arr(z_samples, 2)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    v = np.random.default_rng(seed).standard_normal((n_dirs, z.shape[1]))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return float((w @ np.maximum(z @ v.T, 0.0)).min())


def build_tilt(
    z_samples,
    weights,
    epsilon: float,
    mean_norm_cap: float,
    lower_bound: float | None = None,
    feas_tol: float = FEAS_TOL,
    spot_check: bool = True,
    seed: int = 0,
) -> TiltFunction:
    """Solve for a tilt on the given samples.

    Minimises ``|sum_j w_j f_j z_j|_1`` over ``lb <= f <= 1`` as a linear
    programme. ``lb`` defaults to ``epsilon / (4 max(mean_norm_cap, 1))``.
    Raises :class:`TiltInfeasible` when the optimum exceeds ``feas_tol``.
    """
    z = _arr(z_samples, 2)
    m, k = z.shape
    w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (m,) or np.any(w < 0):
        raise PreconditionError("one non-negative weight per sample is required")
    w = w / w.sum()
    if not 0 <= epsilon <= 0.5 or (epsilon == 0 and lower_bound is None):
        raise PreconditionError("epsilon must lie in (0, 1/2]")
    lb = tilt_lower_bound(epsilon, mean_norm_cap) if lower_bound is None else float(lower_bound)
    if not 0 < lb <= 1:
        raise PreconditionError("lower bound must lie in (0, 1]")

    if spot_check:
        margin = positivity_margin(z, w, seed=seed)
        if margin < epsilon:
            warnings.warn(
                f"positivity spot-check failed: min E[<v,z>_+] = {margin:.3g} < epsilon = {epsilon:.3g}",
                RuntimeWarning,
                stacklevel=2,
            )

    a = (w[:, None] * z).T  # k x m
    c = np.concatenate([np.zeros(m), np.ones(2 * k)])
    a_eq = np.hstack([a, -np.eye(k), np.eye(k)])
    bounds = [(lb, 1.0)] * m + [(0.0, None)] * (2 * k)
    res = linprog(
        c, A_eq=a_eq, b_eq=np.zeros(k), bounds=bounds, method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise TiltInfeasible(f"tilt LP failed: {res.message}")
    f = _polish(a, np.clip(res.x[:m], lb, 1.0), lb)
    resid = a @ f
    if np.abs(resid).sum() > feas_tol:
        direction = resid / np.linalg.norm(resid)
        raise TiltInfeasible(
            f"no tilt with lower bound {lb:.3g} cancels the mean (residual {np.linalg.norm(resid):.3g})",
            direction=direction,
            residual=float(np.linalg.norm(resid)),
        )
    return TiltFunction(z_points=z, f_values=f, lower_bound=lb, weights=w)


def eval_tilt(tilt: TiltFunction, z) -> np.ndarray | float:
    """Value at the nearest tabulated point, clamped to ``[lower_bound, 1]``."""
    q = np.asarray(z, dtype=float)
    k = tilt.z_points.shape[1]
    single = q.ndim == 1 and q.size == k
    q = q.reshape(-1, k)
    idx = _kernels.nearest_index(q, tilt.z_points)
    vals = np.clip(tilt.f_values[idx], tilt.lower_bound, 1.0)
    return float(vals[0]) if single else vals
