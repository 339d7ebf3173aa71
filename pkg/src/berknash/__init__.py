"""Equilibrium analysis for games played by possibly misspecified learners.

The package computes and verifies equilibria in which each player best
responds to a belief supported on the parameters of their subjective model
that minimize a play-weighted Kullback-Leibler divergence from the true
outcome distribution, simulates the underlying Bayesian learning dynamics,
and analyzes a two-price demand-learning example's mean dynamics in closed
form.  See README.md for a tour and FORMATS.md for artifact schemas.
"""

__version__ = "0.1.0"

from .domains import (
    BoxBlock,
    FiniteDomain,
    ProductDomain,
    SimplexBlock,
    box_domain,
    project_to_simplex,
    simplex_domain,
)
from .game import (
    ObjectiveGame,
    OutcomeDistribution,
    StrategyProfile,
    ValidationReport,
    objective_distribution,
    restrict_actions,
    true_expected_payoff,
    validate_game,
)
from .subjective import (
    CategoricalModel,
    DiscreteBelief,
    GaussianMeanModel,
    InfeasibleModelError,
    MinimizerConfig,
    MinimizerSet,
    SpecificationReport,
    diagnose,
    minimizer_set,
    predictive,
    predictive_distance,
    validate_model,
    wkld,
)
from .equilibrium import (
    AnalogyStructure,
    CrossCheckReport,
    EquilibriumCertificate,
    PerturbationStructure,
    SolveConfig,
    SolveResult,
    VerificationResult,
    VerifyConfig,
    abee_perceived_payoffs,
    belief_expected_payoff,
    cross_check,
    solve,
    verify_berk_nash,
)
from .learning import (
    ConjugateNormalBelief,
    GridBelief,
    ImpossibleObservationError,
    Policy,
    SimulationHistory,
    StabilityReport,
    bayes_update,
    conjugate_update,
    epsilon_schedule,
    payoff_bound,
    simulate,
    stability_report,
)
from .dynamics import (
    AppFConfig,
    LyapunovReport,
    OdeState,
    SweepRow,
    Trajectory,
    h1,
    integrate,
    lyapunov_scan,
    scale_sweep,
    steady_state,
)
from . import examples, serialize

__all__ = [
    "__version__",
    # domains
    "BoxBlock",
    "SimplexBlock",
    "ProductDomain",
    "FiniteDomain",
    "box_domain",
    "simplex_domain",
    "project_to_simplex",
    # game
    "ObjectiveGame",
    "StrategyProfile",
    "OutcomeDistribution",
    "ValidationReport",
    "objective_distribution",
    "true_expected_payoff",
    "validate_game",
    "restrict_actions",
    # subjective
    "CategoricalModel",
    "GaussianMeanModel",
    "DiscreteBelief",
    "MinimizerConfig",
    "MinimizerSet",
    "SpecificationReport",
    "InfeasibleModelError",
    "wkld",
    "minimizer_set",
    "predictive",
    "predictive_distance",
    "diagnose",
    "validate_model",
    # equilibrium
    "PerturbationStructure",
    "VerifyConfig",
    "SolveConfig",
    "SolveResult",
    "EquilibriumCertificate",
    "VerificationResult",
    "AnalogyStructure",
    "CrossCheckReport",
    "belief_expected_payoff",
    "verify_berk_nash",
    "solve",
    "cross_check",
    "abee_perceived_payoffs",
    # learning
    "ConjugateNormalBelief",
    "GridBelief",
    "ImpossibleObservationError",
    "Policy",
    "SimulationHistory",
    "StabilityReport",
    "bayes_update",
    "conjugate_update",
    "epsilon_schedule",
    "payoff_bound",
    "simulate",
    "stability_report",
    # dynamics
    "AppFConfig",
    "OdeState",
    "Trajectory",
    "LyapunovReport",
    "SweepRow",
    "h1",
    "steady_state",
    "integrate",
    "lyapunov_scan",
    "scale_sweep",
    # submodules
    "examples",
    "serialize",
]
