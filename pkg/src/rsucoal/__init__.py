"""Coalition formation among roadside units in a vehicular network."""
from .kernels import BACKEND
from .model import (
    CoalitionEvaluation,
    DuplicatePolicy,
    Scenario,
    ScenarioError,
    best_assignment,
    coalition_cost,
    coalition_revenue,
    evaluate_coalition,
    load_scenario,
    meeting_pairs,
    noncoop_utility,
    pairwise_distance,
)

__version__ = "0.1.0"
