"""Incentive-compatible exploration of linear bandits with a known prior."""

from .bandit_env import Environment, spawn
from .bic_explore import (
    ConstantsRegistry,
    ExploreConfig,
    TranscriptReport,
    check_spectral,
    compute_lambda,
    run_bic_exploration,
    scaled_registry,
    theoretical_registry,
)
from .geometry import GramState, eigendecompose, gram_update, project_complement
from .posterior import ParticleCloud, exploit, posterior_mean, reweight
from .priors import (
    AssumptionConstants,
    Empirical,
    Gaussian,
    UniformBall,
    UniformBox,
    canonicalize,
    estimate_constants,
    sample,
)
from .tilt import TiltFunction, build_tilt, eval_tilt

__version__ = "0.1.0"
