"""Feedback-driven posting model: simulation, regret, estimation, testing."""

from .eventlog import (
    EXTERNAL,
    OWN_POST,
    Event,
    EventLogError,
    FeedbackLog,
    from_trajectory,
    parse_event_log,
    write_event_log,
)
from .estimation import (
    EstimationConfig,
    EstimationResult,
    ReplaySnapshots,
    aggregate_rmse,
    fit_linear_loss,
    fit_mle,
    fit_mle_null,
    linear_loss,
    linear_loss_subgrad,
    log_likelihood,
    log_likelihood_grad,
    project_simplex,
    replay_estimates,
    rmse,
    sample_replay,
    softmax_prob,
)
from .hypotest import (
    CohortSummary,
    TestReport,
    UntestableLogError,
    chi2_survival,
    cohort_summary,
    llr_statistic,
)
from .inference import (
    BetaPosteriorTable,
    BetaPrior,
    DegeneratePriorError,
    empty_table,
    map_estimate,
    map_matrix,
    record_feedback,
    sample_estimate,
    sample_matrix,
)
from .lp import LPError, linear_loss_lp, solve_lp
from .model import (
    PreferenceScenario,
    UtilityWeights,
    expected_step_utility,
    optimal_cumulative_utility,
    optimal_topic,
    step_utilities,
)
from .policy import (
    EstimatorKind,
    PolicyConfig,
    Trajectory,
    choose_topic,
    run_episode,
)
from .simulate import (
    RegretTrace,
    ScenarioGenConfig,
    a1_scenario,
    a1_walk,
    compute_regret,
    monte_carlo_regret,
    poisson_draw,
    read_regret_csv,
    run_softmax_episode,
    sample_scenario,
    write_regret_csv,
)

__version__ = "0.1.0"
