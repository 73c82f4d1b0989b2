"""Run a configuration end to end and write its artifacts."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..bandit_env import spawn
from ..bic_explore import (
    ConstantsRegistry,
    TranscriptReport,
    run_bic_exploration,
    scaled_registry,
    theoretical_registry,
)
from ..priors import AssumptionConstants, PriorSpec, canonicalize, estimate_constants, prior_to_dict
from .config import RunConfig

METRICS_VERSION = "bicx-metrics v1"
TRACE_VERSION = 1
METRICS_COLUMNS = ["t", "phase", "j", "ell_lambda", "min_eig", "perp_norm", "reward"]

EXIT_OK = 0
EXIT_NOT_CERTIFIED = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3


@dataclass
class RunResult:
    config: RunConfig
    prior: PriorSpec
    rotation: np.ndarray
    constants: AssumptionConstants
    registry: ConstantsRegistry
    report: TranscriptReport
    hidden_theta: np.ndarray

    @property
    def exit_code(self) -> int:
        if self.report.certified:
            return EXIT_OK
        if self.report.failure == "budget":
            return EXIT_BUDGET
        return EXIT_NOT_CERTIFIED


def max_workers() -> int:
    """Worker cap from ``BICX_THREADS`` (default: all cores)."""
    val = os.environ.get("BICX_THREADS")
    if val:
        return max(1, int(val))
    return os.cpu_count() or 1


def resolve_constants(cfg: RunConfig, prior: PriorSpec) -> AssumptionConstants:
    c = cfg.constants
    if c.prior_constants is not None:
        return AssumptionConstants(**c.prior_constants)
    return estimate_constants(prior, n_dirs=c.estimate_dirs, n_samples=c.estimate_samples, seed=cfg.seed)


def build_registry(cfg: RunConfig, ac: AssumptionConstants, d: int) -> ConstantsRegistry:
    c = cfg.constants
    if c.mode == "theoretical":
        return theoretical_registry(ac, d, c.overrides, c.use_documented_defaults)
    return scaled_registry(ac, d, overrides=c.overrides)


def execute(cfg: RunConfig, seed: int | None = None) -> RunResult:
    seed = cfg.seed if seed is None else seed
    prior = cfg.prior_spec()
    if cfg.canonicalize:
        prior, rot = canonicalize(prior)
    else:
        rot = np.eye(prior.d)
    ac = resolve_constants(cfg, prior)
    reg = build_registry(cfg, ac, prior.d)
    env = spawn(prior, [seed, 0], noise_sd=cfg.noise_sd)
    theta = env.hidden_theta.copy()
    report = run_bic_exploration(prior, env, cfg.lambda_bar, reg, cfg.explore, seed=[seed, 1])
    return RunResult(cfg, prior, rot, ac, reg, report, theta)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def step_rows(report: TranscriptReport, chunk: int = 100_000):
    """Per-step metric rows; ``min_eig`` is that of the cumulative action Gram."""
    g = np.zeros((report.d, report.d))
    for b in report.blocks:
        aa = np.outer(b.action, b.action)
        n = len(b.rewards)
        for s in range(0, n, chunk):
            k = np.arange(s + 1, min(n, s + chunk) + 1)
            eig = np.linalg.eigvalsh(g[None] + k[:, None, None] * aa[None])[:, 0]
            for i, kk in enumerate(k):
                yield (b.t0 + kk - 1, b.phase, b.j, b.ell, eig[i], b.perp_norm, b.rewards[kk - 1])
        g = g + n * aa


def write_metrics(report: TranscriptReport, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {METRICS_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for t, phase, j, ell, me, pn, r in step_rows(report):
            w.writerow([t, phase, j, ell, _fmt(me), _fmt(pn), _fmt(r)])


def write_trace(result: RunResult, path) -> None:
    header = {
        "version": TRACE_VERSION,
        "config": result.config.to_dict(),
        "canonical_prior": prior_to_dict(result.prior),
        "rotation": result.rotation.tolist(),
        "constants": result.constants.to_dict(),
    }
    with open(path, "w") as fh:
        fh.write(json.dumps({"t": 0, "kind": "header", "payload": header}) + "\n")
        for ev in result.report.events:
            fh.write(json.dumps(ev) + "\n")


def summary(result: RunResult) -> dict:
    rep = result.report
    return {
        "certified": rep.certified,
        "failure": rep.failure,
        "lambda_bar": rep.lambda_bar,
        "achieved_lambda": rep.achieved_lambda,
        "total_pulls": rep.total_pulls,
        "outer_iterations": len(rep.outer),
        "min_eig_trajectory": rep.min_eig_trajectory,
        "growth_ratios": rep.growth_ratios,
        "initial_perp_norms": rep.initial_perp_norms,
        "warnings": rep.warnings,
        "constants": result.constants.to_dict(),
        "registry": result.registry.to_dict(),
        "hidden_theta": result.hidden_theta.tolist(),
        "exit_code": result.exit_code,
    }


def write_outputs(result: RunResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(result.report, out / "metrics.csv")
    write_trace(result, out / "trace.jsonl")
    (out / "report.json").write_text(json.dumps(summary(result), indent=2) + "\n")
    return out
