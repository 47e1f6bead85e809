"""Design-based ATE inference under sequential adaptive Bernoulli designs.

The package simulates sequential experiments (Wei's adaptive coin, Efron's
biased coin, constant-probability Bernoulli), computes the IPW and AIPW
estimators with their conservative variance estimators, and runs Monte Carlo
coverage studies.  Hot loops live in a Cython extension with a pure-Python
fallback; ``seqate._kernels.BACKEND`` reports which one is active.
"""
from ._kernels import BACKEND
from .designs import BernoulliDesign, DesignState, EfronDesign, WeiDesign, make_design
from .estimators import aipw_estimate, ipw_estimate, running_means
from .experiment import AssignmentTrace, run_experiment
from .montecarlo import ScenarioConfig, coverage_curve, run_scenario, simulate
from .population import (
    PotentialOutcomes,
    make_additive_population,
    make_logadditive_population,
    make_nonadditive_population,
    population_moments,
    true_ate,
)
from .variance import StrongEstimated, StrongKnown, WeakEstimated, WeakKnown, infer

__version__ = "0.1.0"
