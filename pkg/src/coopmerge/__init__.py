"""Cooperative freeway merging: C-IDM traffic model, cooperation-level particle
filter, POMCPOW merge planner and a benchmark harness."""

from .config import ScenarioConfig, build_config, load_config
from .drivers import (CidmParams, IdmParams, LeaderContext, cidm_accel, cidm_leader, idm_accel,
                      sidm_accel)
from .dynamics import (EgoState, MergeGeometry, VehicleState, ego_projection, propagate_ego,
                       propagate_ego_accel, propagate_main_lane, time_to_merge_ego,
                       time_to_merge_main)
from .errors import CollisionStateError, ConfigError, CoopMergeError, InvalidInputError
from .estimation import (BeliefSummary, FilterConfig, Particle, ParticleSet, filter_step,
                         init_filter, summarize)
from .harness import (BatchSummary, TrialRecord, generate_scenario, min_ttc, run_batch,
                      run_trial)
from .planner import (EgoCommand, PlannerConfig, Strategy, emergency_brake_override, plan,
                      plan_detailed, sidm_ego_step)
from .pomdp import (Action, MergePOMDP, Observation, RewardParams, SceneState, generative_step,
                    observation_likelihood, reward)

__version__ = "0.1.0"

__all__ = [
    "Action", "BatchSummary", "BeliefSummary", "CidmParams", "CollisionStateError", "ConfigError",
    "CoopMergeError", "EgoCommand", "EgoState", "FilterConfig", "IdmParams", "InvalidInputError",
    "LeaderContext", "MergeGeometry", "MergePOMDP", "Observation", "Particle", "ParticleSet",
    "PlannerConfig", "RewardParams", "ScenarioConfig", "SceneState", "Strategy", "TrialRecord",
    "VehicleState", "build_config", "cidm_accel", "cidm_leader", "ego_projection",
    "emergency_brake_override", "filter_step", "generate_scenario", "generative_step",
    "idm_accel", "init_filter", "load_config", "min_ttc", "observation_likelihood", "plan",
    "plan_detailed", "propagate_ego", "propagate_ego_accel", "propagate_main_lane", "reward",
    "run_batch", "run_trial", "sidm_accel", "sidm_ego_step", "summarize", "time_to_merge_ego",
    "time_to_merge_main",
]
