"""Incentive-compatible exploration of every direction of a linear bandit.

The principal only ever recommends ``Exploit(signal)``: the normalised
posterior mean given some signal derived from past rewards. Starting from
``e1`` it repeatedly (a) finds an action with a small component outside the
well-explored subspace, (b) grows that component geometrically, and (c) plays
the resulting action for a block of ``kappa`` steps, until the Gram matrix of
block directions has smallest eigenvalue at least ``lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import posterior as post
from .bandit_env import Environment
from .errors import (
    BicxError,
    BudgetExceeded,
    ConfigError,
    DegeneratePosterior,
    PreconditionError,
    TiltInfeasible,
)
from .geometry import (
    GramState,
    combo_coefficients,
    eigendecompose,
    ell_index,
    gram_update,
    min_eig,
    project_complement,
)
from .priors import AssumptionConstants, Empirical, PriorSpec, prior_mean, sample
from .tilt import build_tilt, default_sample_count, eval_tilt, tilt_lower_bound

SQRT_PI = math.sqrt(math.pi)
CANONICAL_TOL = 1e-6

# documented placeholders for constants that only have existence proofs
DEFAULT_DELTA_L5 = 0.1
DEFAULT_C_L6 = 10.0
DEFAULT_C_L4 = 0.01


# ------------------------------------------------------------------ constants

def compute_lambda(ac: AssumptionConstants, d: int, delta_L5, c_L6, delta_L6=None) -> float:
    """Exploration level ``lambda`` guaranteed by the analysis.

    ``min(1, min(delta_L5, delta_L6, 1/c_L6)^2 c_L5^2 / (4 d (K sqrt(pi) + 1)^2))``
    with ``c_L5 = sigma_var / sqrt(8 pi)``.
    """
    if delta_L5 is None or c_L6 is None:
        raise ConfigError("delta_L5 and c_L6 have no closed form; pass explicit values")
    if delta_L6 is None:
        delta_L6 = default_delta_L6(ac.k_subg)
    c_L5 = ac.sigma_var / math.sqrt(8 * math.pi)
    m = min(delta_L5, delta_L6, 1.0 / c_L6)
    return min(1.0, m * m * c_L5 * c_L5 / (4 * d * (ac.k_subg * SQRT_PI + 1) ** 2))


def default_delta_L6(k: float) -> float:
    return min(1.0, 1.0 / (2 * k * math.sqrt(math.log(2))))


def theoretical_c_L7(ac: AssumptionConstants) -> float:
    return (ac.c_d**2 / 32.0) / math.log(4.0 / ac.eps_d)


def theoretical_kappa(lam: float, c_L7: float, c_L5: float, ac: AssumptionConstants, d: int) -> int:
    return max(
        math.ceil(1.0 / (lam * c_L7)),
        math.ceil(4 * d * (ac.k_subg * SQRT_PI + 1) ** 2 * (1 + 1 / lam) / c_L5**2),
    )


@dataclass(frozen=True)
class ConstantsRegistry:
    """Every tunable constant of a run.

    ``mode='theoretical'`` derives everything from the prior constants;
    ``mode='scaled'`` sets ``lambda``, ``kappa`` and the selection probability
    directly so that runs fit on a desk. Both modes share one code path.
    """

    mode: str
    lam: float
    kappa: int
    p_select: float
    c_L5: float
    c_L7: float
    delta_L5: float | None
    c_L6: float | None
    delta_L6: float
    c_L4: float | None
    tilt_epsilon: float
    tilt_lower_bound: float
    mean_norm_cap: float
    l_max: int | None = None
    overrides: dict = field(default_factory=dict)

    def n_yhat(self) -> int:
        """Number of logged rounds averaged into the projection estimate."""
        return max(1, math.ceil(1.0 / (self.lam * self.c_L7) - 1e-9))

    def growth_length(self, d: int, mean1: float, sum_c2: float) -> int:
        L = math.ceil(4 * d * (mean1 + 1) ** 2 * (1 + sum_c2) / self.c_L5**2 - 1e-9)
        if self.l_max is not None:
            L = min(L, self.l_max)
        return max(1, L)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "overrides"}
        out["overrides"] = dict(self.overrides)
        return out


_REGISTRY_OVERRIDABLE = {
    "lam", "kappa", "p_select", "c_L5", "c_L7", "delta_L5", "c_L6", "delta_L6", "c_L4",
    "tilt_epsilon", "tilt_lower_bound", "mean_norm_cap", "l_max",
}


def _apply_overrides(reg: ConstantsRegistry, overrides: dict) -> ConstantsRegistry:
    bad = set(overrides) - _REGISTRY_OVERRIDABLE
    if bad:
        raise ConfigError(f"unknown constants: {sorted(bad)}")
    return replace(reg, **overrides, overrides={**reg.overrides, **overrides})


def theoretical_registry(
    ac: AssumptionConstants, d: int, overrides: dict | None = None, use_documented_defaults: bool = False
) -> ConstantsRegistry:
    """Registry with every constant taken from the analysis.

    ``delta_L5``, ``c_L6`` and ``c_L4`` only have existence proofs; supply them
    in ``overrides`` or opt into the documented placeholders.
    """
    overrides = dict(overrides or {})
    defaults = {"delta_L5": DEFAULT_DELTA_L5, "c_L6": DEFAULT_C_L6, "c_L4": DEFAULT_C_L4}
    for key, val in defaults.items():
        if key not in overrides:
            if not use_documented_defaults and key != "c_L4":
                raise ConfigError(f"theoretical mode needs an explicit value for {key}")
            overrides.setdefault(key, val)
    delta_L5, c_L6, c_L4 = overrides.pop("delta_L5"), overrides.pop("c_L6"), overrides.pop("c_L4")
    delta_L6 = overrides.pop("delta_L6", default_delta_L6(ac.k_subg))
    c_L5 = ac.sigma_var / math.sqrt(8 * math.pi)
    c_L7 = theoretical_c_L7(ac)
    lam = compute_lambda(ac, d, delta_L5, c_L6, delta_L6)
    cap = ac.k_subg * SQRT_PI + 1
    eps = ac.eps_d * ac.c_d / 4
    lb = tilt_lower_bound(eps, cap)
    reg = ConstantsRegistry(
        mode="theoretical",
        lam=lam,
        kappa=theoretical_kappa(lam, c_L7, c_L5, ac, d),
        p_select=ac.eps_d * ac.c_d / (16 * cap),
        c_L5=c_L5,
        c_L7=c_L7,
        delta_L5=delta_L5,
        c_L6=c_L6,
        delta_L6=delta_L6,
        c_L4=c_L4,
        tilt_epsilon=min(eps, 0.5),
        tilt_lower_bound=lb,
        mean_norm_cap=cap,
    )
    reg = replace(reg, overrides={"delta_L5": delta_L5, "c_L6": c_L6, "c_L4": c_L4})
    if overrides:
        reg = _apply_overrides(reg, overrides)
    return reg


def scaled_registry(
    ac: AssumptionConstants,
    d: int,
    lam: float = 0.05,
    kappa: int = 400,
    c_L5: float = 1.0,
    overrides: dict | None = None,
) -> ConstantsRegistry:
    """Registry for desk-scale runs.

    ``c_L7`` is set so the projection estimate averages all ``kappa`` logged
    rounds. The tilt bound and selection probability keep their analytic form
    in terms of the prior constants unless overridden.
    """
    cap = ac.k_subg * SQRT_PI + 1
    eps = min(ac.eps_d * ac.c_d / 4, 0.5)
    lb = tilt_lower_bound(eps, cap)
    reg = ConstantsRegistry(
        mode="scaled",
        lam=lam,
        kappa=int(kappa),
        p_select=lb,
        c_L5=c_L5,
        c_L7=1.0 / (lam * kappa),
        delta_L5=None,
        c_L6=None,
        delta_L6=default_delta_L6(ac.k_subg),
        c_L4=None,
        tilt_epsilon=eps,
        tilt_lower_bound=lb,
        mean_norm_cap=cap,
    )
    overrides = dict(overrides or {})
    if "tilt_lower_bound" in overrides and "p_select" not in overrides:
        overrides["p_select"] = overrides["tilt_lower_bound"]
    if ("lam" in overrides or "kappa" in overrides) and "c_L7" not in overrides:
        overrides["c_L7"] = 1.0 / (overrides.get("lam", lam) * overrides.get("kappa", kappa))
    if overrides:
        reg = _apply_overrides(reg, overrides)
    if reg.p_select > reg.tilt_lower_bound * (1 + 1e-12):
        raise ConfigError("p_select must not exceed the tilt lower bound")
    return reg


# -------------------------------------------------------------------- ledger

@dataclass
class ExplorationLedger:
    """Directions played as blocks, their reward logs, and their Gram matrix."""

    d: int
    directions: list = field(default_factory=list)
    logs: list = field(default_factory=list)
    gram: GramState | None = None

    def __post_init__(self):
        if self.gram is None:
            self.gram = GramState.zeros(self.d)

    def add(self, v, rewards) -> None:
        self.gram = gram_update(self.gram, v)
        self.directions.append(np.asarray(v, dtype=float))
        self.logs.append(np.asarray(rewards, dtype=float))

    @property
    def V(self) -> np.ndarray:
        return np.array(self.directions).reshape(-1, self.d)

    @property
    def Q(self) -> np.ndarray:
        return np.array(self.logs)


def estimate_projection(ledger: ExplorationLedger, basis, eigvals, n_rounds: int) -> np.ndarray:
    """Unbiased estimate of ``basis^T l`` from the first ``n_rounds`` logs.

    ``yhat_l = (1/n) sum_{t<n} sum_k <v_k, w_l> / lambda_l q_k[t]``, whose
    error is ``N(0, noise_sd^2 / (n lambda_l))`` independently per coordinate.
    """
    q = ledger.Q
    if q.shape[1] < n_rounds:
        raise PreconditionError(f"logs hold {q.shape[1]} rounds, need {n_rounds}")
    qbar = q[:, :n_rounds].mean(axis=1)
    coef = (ledger.V @ basis) / np.asarray(eigvals)
    return qbar @ coef


# --------------------------------------------------------------- transcript

@dataclass
class ActionBlock:
    t0: int
    action: np.ndarray
    phase: str
    rewards: np.ndarray
    j: int
    ell: int
    perp_norm: float
    repeat: int = 0


@dataclass
class Recommendation:
    t: int
    phase: str
    action: np.ndarray
    chain: list
    fallback: np.ndarray
    fell_back: bool
    posterior_norm: float
    credible_radius: float


@dataclass
class TranscriptReport:
    """Everything a run produced, in time order."""

    d: int
    blocks: list = field(default_factory=list)
    signals: list = field(default_factory=list)
    recommendations: list = field(default_factory=list)
    min_eig_trajectory: list = field(default_factory=list)
    growth_ratios: list = field(default_factory=list)
    initial_perp_norms: list = field(default_factory=list)
    outer: list = field(default_factory=list)
    events: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    total_pulls: int = 0
    achieved_lambda: float = 0.0
    certified: bool = False
    failure: str | None = None
    registry: ConstantsRegistry | None = None
    lambda_bar: float = 0.0

    @property
    def actions(self):
        """Per-step ``(t, action, phase, reward)`` tuples."""
        out = []
        for b in self.blocks:
            for i, r in enumerate(b.rewards):
                out.append((b.t0 + i, b.action, b.phase, float(r)))
        return out

    def gram(self) -> np.ndarray:
        g = np.zeros((self.d, self.d))
        for b in self.blocks:
            g += len(b.rewards) * np.outer(b.action, b.action)
        return g

    def event(self, t: int, kind: str, payload: dict) -> None:
        self.events.append({"t": int(t), "kind": kind, "payload": payload})


@dataclass(frozen=True)
class SpectralCertificate:
    holds: bool
    min_eig: float
    gram: np.ndarray


def check_spectral(transcript, lambda_bar: float, tol: float = 1e-9) -> SpectralCertificate:
    """Whether the played actions satisfy ``sum_t A_t A_t^T >= lambda_bar I``.

    ``transcript`` is a :class:`TranscriptReport` or an array of actions.
    """
    if isinstance(transcript, TranscriptReport):
        g = transcript.gram()
    else:
        a = np.atleast_2d(np.asarray(transcript, dtype=float))
        g = a.T @ a
    me = min_eig(g)
    return SpectralCertificate(me >= lambda_bar - tol, me, g)


# ---------------------------------------------------------------- run config

@dataclass(frozen=True)
class ExploreConfig:
    n_particles: int = 6000
    tilt_samples: int | None = None
    signal_scope: str = "chain"
    tilt_method: str = "shared"
    max_steps: int = 2_000_000
    max_growth_calls: int = 200
    max_outer: int | None = None
    zero_tol: float | None = None
    on_tilt_infeasible: str = "stop"

    def __post_init__(self):
        if self.signal_scope not in ("chain", "single"):
            raise ConfigError("signal_scope must be 'chain' or 'single'")
        if self.tilt_method not in ("shared", "mc"):
            raise ConfigError("tilt_method must be 'shared' or 'mc'")
        if self.on_tilt_infeasible not in ("stop", "exploit"):
            raise ConfigError("on_tilt_infeasible must be 'stop' or 'exploit'")


# ------------------------------------------------------------------- runner

class _Run:
    """Mutable state of one call to :func:`run_bic_exploration`."""

    def __init__(self, cloud, env, registry, config, mean1, seeds, report):
        self.cloud = cloud
        self.env = env
        self.reg = registry
        self.cfg = config
        self.mean1 = mean1
        self.d = env.d
        self.noise_sd = max(env.noise_sd, post.NOISE_FLOOR)
        self.report = report
        self.t = 0
        self.repeat = 0
        self.rng_tilt = np.random.default_rng(seeds[0])
        self.rng_psi = np.random.default_rng(seeds[1])
        self.rng_fresh = np.random.default_rng(seeds[2])
        self.zero_tol = config.zero_tol if config.zero_tol is not None else post.default_zero_tol(self.d)

    # -- bookkeeping

    def play(self, a, n, phase, j, ell, perp) -> np.ndarray:
        room = self.cfg.max_steps - self.t
        if room <= 0:
            raise BudgetExceeded(f"step budget {self.cfg.max_steps} exhausted")
        k = min(n, room)
        r = self.env.pull_many(a, k)
        self.report.blocks.append(ActionBlock(self.t, np.array(a), phase, r, j, ell, float(perp), self.repeat))
        self.t += k
        self.report.total_pulls = self.t
        if k < n:
            raise BudgetExceeded(f"step budget {self.cfg.max_steps} exhausted")
        return r

    def add_signal(self, s) -> int:
        self.report.signals.append(s)
        idx = len(self.report.signals) - 1
        self.report.event(self.t, "signal", {"id": idx, "repeat": self.repeat, **s.to_dict()})
        return idx

    def recommend(self, chain_ids, fallback, phase, fixed=None):
        sigs = [self.report.signals[i] for i in chain_ids]
        a, pm, fell = post.exploit_with_mean(self.cloud, sigs, fallback, self.zero_tol)
        if fixed is not None:
            a = np.asarray(fixed, dtype=float)
        self.report.recommendations.append(
            Recommendation(self.t, phase, a, list(chain_ids), np.asarray(fallback, dtype=float), fell, pm.norm, pm.credible_radius)
        )
        self.report.event(self.t, "recommend", {
            "phase": phase, "action": a.tolist(), "chain": list(chain_ids),
            "fallback": np.asarray(fallback).tolist(), "fell_back": fell, "repeat": self.repeat,
        })
        return a


def _build_cloud(prior: PriorSpec, n: int, seed) -> post.ParticleCloud:
    """Particle approximation of the prior.

    Small atomic priors are used as they are. Sampled clouds are shifted so
    their mean equals the known prior mean, which removes the leading Monte
    Carlo error from every posterior mean computed later.
    """
    if isinstance(prior, Empirical) and len(prior.points) <= n:
        return post.ParticleCloud.weighted(prior.points, prior.weights, seed_lineage=("atoms",))
    pts = sample(prior, n, np.random.default_rng(seed))
    pts += prior_mean(prior) - pts.mean(axis=0)
    lineage = (str(seed.entropy), tuple(seed.spawn_key)) if hasattr(seed, "entropy") else (seed,)
    return post.ParticleCloud.uniform(pts, seed_lineage=lineage)


def _subspace(ledger: ExplorationLedger, lam: float):
    g = eigendecompose(ledger.gram)
    ledger.gram = g
    ell = ell_index(g.eigvals, lam)
    return g, ell, g.eigvecs[:, :ell], g.eigvecs[:, min(ell, g.d - 1)]


def initial_exploration(run: _Run, ledger: ExplorationLedger, j: int):
    """One recommendation step that yields an action with some weight outside
    the explored subspace.

    Returns ``(a, chain_ids)`` where ``a = Exploit(sign(R))`` and ``R`` is the
    reward of the step with probability ``p_select`` and an independent
    standard normal otherwise.
    """
    reg = run.reg
    g, ell, basis, fallback = _subspace(ledger, reg.lam)
    n_rounds = reg.n_yhat()
    if n_rounds > reg.kappa:
        raise PreconditionError(f"projection estimate needs {n_rounds} rounds but kappa is {reg.kappa}")
    eigs = g.eigvals[:ell]
    noise_vars = run.noise_sd**2 / (n_rounds * eigs)
    y_hat = estimate_projection(ledger, basis, eigs, n_rounds)
    z_hat = post.z_map(y_hat, run.cloud, basis, noise_vars)

    m = run.cfg.tilt_samples or default_sample_count(reg.tilt_epsilon)
    y, z, lse = post.sample_z_law(run.cloud, basis, noise_vars, m, run.rng_tilt)
    tilt = build_tilt(z, None, reg.tilt_epsilon, reg.mean_norm_cap, lower_bound=reg.tilt_lower_bound,
                      seed=int(run.rng_tilt.integers(2**31)))
    tilt = replace(
        tilt, y_points=y, log_py=lse, basis=basis, noise_vars=np.asarray(noise_vars, dtype=float),
        zmap_points=run.cloud.points @ basis, zmap_log_weights=run.cloud.log_weights,
    )
    f_hat = float(eval_tilt(tilt, z_hat))
    ratio = reg.p_select / f_hat
    if ratio > 1 + 1e-12:
        raise PreconditionError(f"selection probability {reg.p_select:.3g} exceeds tilt value {f_hat:.3g}")

    psi = int(run.rng_psi.random() < f_hat)
    ev_seed = int(run.rng_tilt.integers(2**31))
    ev_ids = {v: post.TiltEvent(tilt, v, method=run.cfg.tilt_method, seed=ev_seed) for v in (1, 0)}
    psi_id = run.add_signal(ev_ids[psi])
    # the action recommended on psi = 1 enters the likelihood of sign(R) either way
    if psi == 1:
        a_one = run.recommend([psi_id], fallback, "psi_step")
        a_play = a_one
    else:
        a_play = run.recommend([psi_id], fallback, "psi_step")
        a_one = post.exploit(run.cloud, [ev_ids[1]], fallback, run.zero_tol)
    perp = float(np.linalg.norm(project_complement(a_play, basis)))
    r = run.play(a_play, 1, "psi_step", j, ell, perp)[0]

    use_reward = psi == 1 and run.rng_psi.random() < ratio
    R = r if use_reward else float(run.rng_fresh.standard_normal())
    sign = 1 if R > 0 else -1
    mix_id = run.add_signal(post.MixtureSign(a_one, reg.p_select, sign, run.noise_sd))
    run.report.event(run.t, "psi", {"j": j, "psi": psi, "f": f_hat, "used_reward": bool(use_reward),
                                    "R": float(R), "y_hat": y_hat.tolist(), "z_hat": np.atleast_1d(z_hat).tolist()})
    a = run.recommend([mix_id], fallback, "initial")
    return a, [mix_id]


def exponential_growth(run: _Run, ledger: ExplorationLedger, a, chain, j: int):
    """Play ``a`` for ``L`` steps and return a recommendation whose component
    outside the explored subspace is larger.

    ``R = sum_t (r_t - sum_k c_k q_k[t])`` removes the explored part of the
    reward, so ``R ~ N(L <P_perp a, l>, noise_sd^2 L (1 + sum c^2))`` when
    ``L <= kappa``; reused log entries inflate the variance accordingly.
    """
    reg = run.reg
    g, ell, basis, fallback = _subspace(ledger, reg.lam)
    a = np.asarray(a, dtype=float)
    perp = project_complement(a, basis)
    pn = float(np.linalg.norm(perp))
    if pn == 0.0 or pn > math.sqrt(reg.lam) + 1e-12:
        raise PreconditionError(f"|P_perp a| = {pn:.3g} is outside (0, sqrt(lambda)]")
    c = combo_coefficients(a - perp, ledger.V, g, ell, reg.lam - 1e-12)
    sum_c2 = float(c @ c)
    L = reg.growth_length(run.d, run.mean1, sum_c2)
    if L > reg.kappa:
        if reg.mode == "theoretical":
            raise PreconditionError(f"growth length {L} exceeds kappa {reg.kappa}")
        run.report.warnings.append(f"growth length {L} exceeds kappa {reg.kappa}; log entries reused")
        run.report.event(run.t, "warning", {"message": "log entries reused", "L": L, "kappa": reg.kappa})
    rewards = run.play(a, L, "growth", j, ell, pn)
    idx = np.arange(L) % reg.kappa
    known = c @ ledger.Q[:, idx]
    R = float(np.sum(rewards - known))
    mult = np.bincount(idx, minlength=reg.kappa)
    var = run.noise_sd**2 * (L + sum_c2 * float(mult @ mult))
    sd = math.sqrt(max(var, post.NOISE_FLOOR**2))
    sig = post.SignThreshold(L * perp, sd, 1 if R > 0 else -1)
    sid = run.add_signal(sig)
    new_chain = (list(chain) if run.cfg.signal_scope == "chain" else []) + [sid]
    b = run.recommend(new_chain, fallback, "growth")
    ratio = float(np.linalg.norm(project_complement(b, basis))) / pn
    run.report.growth_ratios.append(ratio)
    run.report.event(run.t, "growth", {"j": j, "L": L, "sum_c2": sum_c2, "R": R, "ratio": ratio})
    return b, new_chain


def _single_pass(run: _Run) -> None:
    reg, d, rep = run.reg, run.d, run.report
    ledger = ExplorationLedger(d)
    e1 = np.zeros(d)
    e1[0] = 1.0
    # the canonical prior makes e1 the exploit action; play it exactly
    a = run.recommend([], e1, "explore_e1", fixed=e1)
    rewards = run.play(a, reg.kappa, "explore_e1", 0, 0, 1.0)
    ledger.add(a, rewards)
    rep.min_eig_trajectory.append(min_eig(ledger.gram.m))
    j = 1
    while min_eig(ledger.gram.m) < reg.lam:
        if run.cfg.max_outer is not None and j > run.cfg.max_outer:
            return
        g, ell, basis, _ = _subspace(ledger, reg.lam)
        rep.event(run.t, "outer", {"j": j, "ell": ell, "eigvals": g.eigvals.tolist(), "repeat": run.repeat})
        rep.outer.append({"j": j, "ell": ell, "eigvals": g.eigvals.tolist()})
        a, chain = initial_exploration(run, ledger, j)
        rep.initial_perp_norms.append(float(np.linalg.norm(project_complement(a, basis))))
        calls = 0
        while np.linalg.norm(project_complement(a, basis)) <= math.sqrt(reg.lam):
            if calls >= run.cfg.max_growth_calls:
                raise _Stalled(f"no escape from the explored subspace after {calls} growth calls")
            a, chain = exponential_growth(run, ledger, a, chain, j)
            calls += 1
        pn = float(np.linalg.norm(project_complement(a, basis)))
        rewards = run.play(a, reg.kappa, "kappa_block", j, ell, pn)
        ledger.add(a, rewards)
        rep.min_eig_trajectory.append(min_eig(ledger.gram.m))
        j += 1


class _Stalled(BicxError):
    pass


def _check_canonical(prior: PriorSpec) -> float:
    mu = prior_mean(prior)
    scale = max(1.0, float(np.linalg.norm(mu)))
    if np.linalg.norm(mu[1:]) > CANONICAL_TOL * scale or mu[0] < -CANONICAL_TOL * scale:
        raise PreconditionError("prior is not canonical: rotate it so its mean lies on the +e1 axis")
    return max(float(mu[0]), 0.0)


def run_bic_exploration(
    prior: PriorSpec,
    env: Environment,
    lambda_bar: float,
    registry: ConstantsRegistry,
    config: ExploreConfig | None = None,
    seed: int = 0,
) -> TranscriptReport:
    """Run the exploration until the played actions certify ``lambda_bar``.

    The whole procedure is repeated at most ``ceil(lambda_bar / lambda)``
    times, stopping as soon as the certificate holds. Failures (budget,
    infeasible tilt, stalled growth, degenerate posterior) are reported in
    ``failure`` together with the partial transcript.
    """
    config = config or ExploreConfig()
    mean1 = _check_canonical(prior)
    if env.d != prior.d:
        raise PreconditionError("environment and prior dimensions differ")
    ss = np.random.SeedSequence(seed)
    cloud_seed, *stream_seeds = ss.spawn(4)
    cloud = _build_cloud(prior, config.n_particles, cloud_seed)
    report = TranscriptReport(d=env.d, registry=registry, lambda_bar=lambda_bar)
    report.event(0, "start", {"d": env.d, "mean1": mean1, "lambda_bar": lambda_bar, "seed": seed,
                              "n_particles": len(cloud), "registry": registry.to_dict()})
    run = _Run(cloud, env, registry, config, mean1, stream_seeds, report)
    repeats = max(1, math.ceil(lambda_bar / registry.lam - 1e-12))
    try:
        for rep in range(repeats):
            run.repeat = rep
            _single_pass(run)
            if check_spectral(report, lambda_bar).holds or config.max_outer is not None:
                break
    except BudgetExceeded:
        report.failure = "budget"
    except TiltInfeasible as exc:
        report.failure = "tilt_infeasible"
        report.event(run.t, "error", {"kind": "tilt_infeasible", "message": str(exc),
                                      "direction": None if exc.direction is None else exc.direction.tolist()})
        if config.on_tilt_infeasible == "exploit":
            _exploit_until_budget(run)
    except _Stalled as exc:
        report.failure = "stalled"
        report.event(run.t, "error", {"kind": "stalled", "message": str(exc)})
    except DegeneratePosterior as exc:
        report.failure = "degenerate_posterior"
        report.event(run.t, "error", {"kind": "degenerate_posterior", "message": str(exc)})
    except PreconditionError as exc:
        report.failure = "precondition"
        report.event(run.t, "error", {"kind": "precondition", "message": str(exc)})
    cert = check_spectral(report, lambda_bar)
    report.achieved_lambda = cert.min_eig
    report.certified = cert.holds and report.failure is None
    if not cert.holds and report.failure is None and config.max_outer is None:
        report.failure = "not_certified"
    report.event(run.t, "result", {"certified": report.certified, "min_eig": cert.min_eig,
                                   "total_pulls": report.total_pulls, "failure": report.failure})
    return report


def _exploit_until_budget(run: _Run) -> None:
    """Keep recommending the prior-optimal action; used to show that an
    incentive-compatible principal cannot move without a feasible tilt."""
    e1 = np.zeros(run.d)
    e1[0] = 1.0
    a = run.recommend([], e1, "exploit_only", fixed=e1)
    try:
        run.play(a, max(0, run.cfg.max_steps - run.t), "exploit_only", -1, 1, 0.0)
    except BudgetExceeded:
        pass
