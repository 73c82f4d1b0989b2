"""Independent re-estimation of every recommendation's posterior mean."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import posterior as post
from ..priors import prior_from_dict, prior_mean, sample

COSINE_FLOOR = 0.95
ZERO_SE = 3.0  # a mean within this many standard errors of 0 counts as zero


@dataclass
class PhaseAudit:
    cosines: list = field(default_factory=list)
    excluded: int = 0

    @property
    def median(self) -> float:
        return float(np.median(self.cosines)) if self.cosines else float("nan")

    @property
    def flagged(self) -> bool:
        return bool(self.cosines) and self.median < COSINE_FLOOR


@dataclass
class AuditReport:
    phases: dict
    n_particles: int

    @property
    def passed(self) -> bool:
        return not any(p.flagged for p in self.phases.values())

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_particles": self.n_particles,
            "phases": {
                name: {"n": len(p.cosines), "excluded": p.excluded, "median_cosine": p.median,
                       "min_cosine": float(min(p.cosines)) if p.cosines else None, "flagged": p.flagged}
                for name, p in self.phases.items()
            },
        }


def read_trace(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def audit_events(events: list[dict], n_particles: int, seed: int = 12345) -> AuditReport:
    """Compare each recommended action with the posterior mean computed on a
    fresh, independent particle cloud.

    Recommendations that used the fallback, or whose independent mean is
    within three standard errors of zero (any action is then optimal), are
    excluded from the statistics.
    """
    header = events[0]["payload"]
    prior = prior_from_dict(header["canonical_prior"])
    pts = sample(prior, n_particles, np.random.default_rng(seed))
    pts += prior_mean(prior) - pts.mean(axis=0)
    cloud = post.ParticleCloud.uniform(pts)
    signals = {}
    phases: dict[str, PhaseAudit] = {}
    cache = {}
    for ev in events[1:]:
        if ev["kind"] == "signal":
            sig = post.signal_from_dict(ev["payload"])
            if isinstance(sig, post.TiltEvent) and sig.method != "shared":
                # traces do not carry the z-map particles
                sig = replace(sig, method="shared")
            signals[ev["payload"]["id"]] = sig
        elif ev["kind"] == "recommend":
            p = ev["payload"]
            ph = phases.setdefault(p["phase"], PhaseAudit())
            if p["fell_back"]:
                ph.excluded += 1
                continue
            key = tuple(p["chain"])
            if key not in cache:
                cache[key] = post.posterior_mean(cloud, [signals[i] for i in key])
            pm = cache[key]
            if pm.norm <= ZERO_SE * pm.credible_radius:
                ph.excluded += 1
                continue
            ph.cosines.append(float(np.dot(p["action"], pm.mean) / pm.norm))
    return AuditReport(phases, n_particles)


def audit_bic(trace_path, n_particles: int = 100_000, seed: int = 12345) -> AuditReport:
    return audit_events(read_trace(Path(trace_path)), n_particles, seed)


def replay_recommendations(report, cloud, zero_tol=None) -> bool:
    """Recompute every recommendation from its stored signal chain on the
    run's own cloud and check the actions agree bit for bit."""
    for rec in report.recommendations:
        if rec.phase in ("explore_e1", "exploit_only"):
            continue
        sigs = [report.signals[i] for i in rec.chain]
        a = post.exploit(cloud, sigs, rec.fallback, zero_tol)
        if not np.array_equal(a, rec.action):
            return False
    return True
