"""Search planning with uncertain, partially observable environments."""

from .grid import (CellBelief, DomainError, EnvAlphabet, MotionModel, PathPlan, ScenarioGrid,
                   enumerate_feasible_paths, path_cost, uniform_counts)
from .sensors import (CharSensorModel, SearchSensorModel, char_likelihood, detection_pmf,
                      false_alarm_pmf, search_likelihood)
from .bayes import update_env, update_joint, update_objects
from .objective import (SearchPlanner, anticipated_eea, cell_value_table, eea_given_env,
                        order_by_preference, search_path_value)
from .planner import (FunctionObjective, SeparableObjective, branch_and_bound_optimal,
                      brute_force_optimal, mowing_the_lawn_path)
from .characterization import (CharacterizationContext, GainEstimate, LossParams,
                               approximate_char_gain, bayes_env_estimate, char_path_optimal,
                               entropy_change, entropy_path, exact_char_gain,
                               hoeffding_confidence, line_approx_char_gain, loss_v,
                               uncertainty_reduction)
from .combined import (bayes_env_estimate_w, combined_entropy_path, combined_path_optimal,
                       expected_combined_cell_value, loss_w)
from .harness import (CampaignResult, GroundTruth, Scenario, TrialRecord, actual_performance,
                      run_campaign, simulate_trial)
from .config import ScenarioConfig, load_scenario, parse_scenario

__version__ = "0.1.0"
