"""Scenario generation, closed-loop trials, metrics and batch benchmarking."""

from __future__ import annotations

import csv
import json
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import _kernels as K
from .config import OUT_DIR_ENV, ScenarioConfig
from .drivers import IdmParams
from .dynamics import EgoState, VehicleState
from .errors import ConfigError
from .estimation import (FilterConfig, ParticleSet, filter_step, init_filter, summarize,
                         write_trace_csv)
from .planner import (EgoCommand, PlannerConfig, Strategy, emergency_brake_override,
                      plan_detailed, sidm_ego_step, time_to_collision)
from .pomdp import Action, MergePOMDP, Observation, SceneState

TRUE_C_CELLS = (0.0, 1.0)
SUMMARY_COLUMNS = (
    "strategy", "true_c", "n_trials", "hard_brake_rate", "n_merged", "n_timeout",
    "min_ttc_mean", "min_ttc_median", "min_ttc_q05", "min_ttc_q95",
    "ttm_mean", "ttm_median", "ttm_q05", "ttm_q95",
)


# --- scenario -------------------------------------------------------------------

def generate_scenario(cfg: ScenarioConfig, rng: np.random.Generator,
                      max_tries: int = 1000) -> SceneState:
    """Sample an intercept: both vehicles reach the merge point within
    ``ttm_conflict_tol`` of each other and the ego projection starts ahead of
    the trailing car with a positive bumper gap."""
    geom = cfg.geometry
    L = geom.ramp_length
    vlen = cfg.model.vehicle_length
    tol = cfg.ttm_conflict_tol
    if cfg.ego_speed[1] <= cfg.model.eps_v or cfg.trailing_speed[1] <= cfg.model.eps_v:
        raise ConfigError("speed ranges must allow moving vehicles")
    for _ in range(max_tries):
        dist = rng.uniform(*cfg.trailing_distance)
        v_t = rng.uniform(*cfg.trailing_speed)
        v_e = rng.uniform(*cfg.ego_speed)
        offset = rng.uniform(-tol, tol)
        if v_t <= cfg.model.eps_v or v_e <= cfg.model.eps_v:
            continue
        remaining = v_e * (dist / v_t + offset)
        if not (0.0 < remaining <= L):
            continue
        if dist - remaining <= vlen:
            continue  # projection not clear ahead of the trailing car
        x_t = geom.merge_x - dist
        return SceneState(
            ego=EgoState(s=L - remaining, v=v_e),
            trailing=VehicleState(x=x_t, v=v_t, y=geom.main_lane_y),
            lead=VehicleState(x=x_t + cfg.lead_gap, v=v_t, y=geom.main_lane_y),
            c_T=cfg.true_c)
    raise ConfigError("scenario ranges admit no intercept trajectory")


# --- agents -----------------------------------------------------------------------

class Agent:
    """Decision maker. It is built from the model and controller settings only,
    so it has no path to the environment's cooperation level; everything it
    learns about the trailing driver comes through observations."""

    def __init__(self, strategy: Strategy, model: MergePOMDP, filter_cfg: FilterConfig,
                 planner_cfg: PlannerConfig, ego_idm: IdmParams, sidm_sigma_a: float,
                 rng: np.random.Generator):
        self.strategy = strategy
        self.model = model
        self.filter_cfg = filter_cfg
        self.planner_cfg = planner_cfg
        self.ego_idm = ego_idm
        self.sidm_sigma_a = sidm_sigma_a
        self.rng = rng
        self.belief: ParticleSet | None = None
        self.last_obs: Observation | None = None

    @classmethod
    def from_config(cls, strategy: Strategy, cfg: ScenarioConfig,
                    rng: np.random.Generator) -> Agent:
        return cls(strategy, cfg.model, cfg.filter, cfg.planner, cfg.ego_idm,
                   cfg.sidm_sigma_a, rng)

    def observable_scene(self, ego: EgoState, lead: VehicleState, obs: Observation) -> SceneState:
        y = self.model.geometry.main_lane_y
        trailing = VehicleState(x=obs.trailing_x, v=max(obs.trailing_v, 0.0), y=y)
        if not lead.x > trailing.x:
            lead = VehicleState(x=trailing.x + 1e-6, v=lead.v, vdot=lead.vdot, y=y)
        return SceneState(ego, trailing, lead, 0.0)

    def reset(self, scene: SceneState, obs: Observation) -> None:
        self.last_obs = obs
        if self.strategy.kind == "learned_c":
            seed = int(self.rng.integers(0, 2**63 - 1))
            self.belief = init_filter(self.filter_cfg.n_particles, seed, scene,
                                      self.model, self.filter_cfg)

    def act(self, scene: SceneState) -> tuple[EgoCommand, dict[str, Any]]:
        kind = self.strategy.kind
        if kind == "sidm":
            acc = sidm_ego_step(scene, self.ego_idm, self.sidm_sigma_a, self.rng, self.model)
            return EgoCommand(accel=acc), {}
        belief = self.belief if kind == "learned_c" else self.strategy.value
        res = plan_detailed(belief, scene, self.planner_cfg, self.model, self.rng)
        info = {"q": [float(v) for v in res.q], "n": [int(v) for v in res.n],
                "n_nodes": res.n_nodes, "pw_ratio": res.pw_ratio}
        return EgoCommand(jerk=res.action.jerk), info

    def update(self, command: EgoCommand, obs: Observation, scene: SceneState) -> None:
        if self.belief is not None:
            action = Action(command.jerk) if command.accel is None else None
            self.belief, _ = filter_step(self.belief, action, obs, ego_accel=command.accel,
                                         observed_scene=scene, last_observation=self.last_obs)
        self.last_obs = obs


# --- trial ------------------------------------------------------------------------

@dataclass
class TrialRecord:
    strategy: str
    true_c: float
    scenario_seed: list[int]
    run_seed: list[int]
    steps: list[dict[str, Any]] = field(default_factory=list)
    final_scene: list[float] = field(default_factory=list)
    outcome: str = "timeout"
    metrics: dict[str, Any] = field(default_factory=dict)
    trace: list[list[float]] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, allow_nan=False,
                          default=_json_default)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TrialRecord:
        return cls(**data)


def _json_default(obj: Any) -> Any:
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serialisable: {type(obj)}")


def min_ttc(record: TrialRecord, ttc_cap: float = 30.0) -> float:
    """Minimum per-step time-to-collision, capped at ``ttc_cap``."""
    values = [s["ttc"] for s in record.steps if s.get("ttc") is not None]
    if not values:
        raise ValueError("record has no steps")
    return float(min(min(values), ttc_cap))


def _seed_sequence(master: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master, spawn_key=tuple(key))


def _strategy_key(strategy: Strategy) -> int:
    return zlib.crc32(strategy.name.encode())


def run_trial(cfg: ScenarioConfig, strategy: Strategy, true_c: float | None = None,
              seed: int | None = None, *, trial_index: int = 0,
              verbose: bool = False) -> TrialRecord:
    """Closed-loop episode against an environment driven by the true c.

    The scenario depends on ``(seed, true_c cell, trial_index)`` only, so every
    strategy faces the same initial conditions; the run stream additionally
    depends on the strategy.
    """
    true_c = cfg.true_c if true_c is None else float(true_c)
    cfg = cfg.with_true_c(true_c)
    master = cfg.seed if seed is None else int(seed)
    cell = int(round(true_c * 1000))
    scen_ss = _seed_sequence(master, 0, cell, trial_index)
    run_ss = _seed_sequence(master, 1, _strategy_key(strategy), cell, trial_index)
    env_ss, agent_ss = run_ss.spawn(2)
    env_rng = np.random.default_rng(env_ss)
    agent = Agent.from_config(strategy, cfg, np.random.default_rng(agent_ss))

    model = cfg.model
    p = model.params
    L = cfg.geometry.ramp_length
    dt = model.dt
    n_steps = int(round(cfg.t_max / dt))
    d_safe = model.reward_params.d_safety

    state = model.to_vector(generate_scenario(cfg, np.random.default_rng(scen_ss)))
    record = TrialRecord(strategy.name, true_c, [master, 0, cell, trial_index],
                         [master, 1, _strategy_key(strategy), cell, trial_index])

    def observe(vec: np.ndarray) -> tuple[Observation, SceneState]:
        obs = model.sample_observation(vec, env_rng)
        truth = model.from_vector(vec)
        return obs, agent.observable_scene(truth.ego, truth.lead, obs)

    obs, seen = observe(state)
    agent.reset(seen, obs)
    if agent.belief is not None:
        b = summarize(agent.belief)
        record.trace.append([0.0, b.mean_c, b.q05, b.q95])

    hard_brake = False
    braking = False
    merged_at = None
    for k in range(n_steps):
        t = k * dt
        command, info = agent.act(seen)
        command = emergency_brake_override(model.from_vector(state), command, model,
                                           cfg.planner.b_emergency)
        hard_brake |= command.override
        if command.accel is None:
            if braking:
                # brake released: jerk control resumes from zero acceleration
                state = state.copy()
                state[K.EGO_A] = 0.0
            nxt = K.transition(state, command.jerk, p)
        else:
            nxt = K.transition_accel(state, command.accel, p)
        braking = command.override
        step = {
            "t": round(t, 10), "scene": state.tolist(),
            "obs": [obs.trailing_x, obs.trailing_v],
            "jerk": command.jerk, "accel": command.accel, "override": command.override,
            "reward": float(K.reward(nxt, p)),
            "ttc": time_to_collision(state, model, cfg.ttc_cap),
        }
        if verbose:
            step["plan"] = info
        state = nxt
        obs, seen = observe(state)
        agent.update(command, obs, seen)
        if agent.belief is not None:
            b = summarize(agent.belief)
            step["belief"] = [b.mean_c, b.q05, b.q95]
            record.trace.append([round(t + dt, 10), b.mean_c, b.q05, b.q95])
        record.steps.append(step)
        if merged_at is None and state[K.EGO_S] >= L:
            merged_at = round((k + 1) * dt, 10)
        if merged_at is not None and K.separation(state, p) > d_safe:
            break

    record.final_scene = state.tolist()
    record.steps.append({"t": round(len(record.steps) * dt, 10), "scene": state.tolist(),
                         "obs": [obs.trailing_x, obs.trailing_v],
                         "ttc": time_to_collision(state, model, cfg.ttc_cap), "final": True})
    record.outcome = "merged" if merged_at is not None else "timeout"
    record.metrics = {
        "hard_brake": bool(hard_brake),
        "min_ttc": min_ttc(record, cfg.ttc_cap),
        "time_to_merge": merged_at,
        "filter_degenerate_steps": 0 if agent.belief is None else agent.belief.degenerate_steps,
    }
    return record


# --- batch ------------------------------------------------------------------------

@dataclass(frozen=True)
class BatchSummary:
    strategy: str
    true_c: float
    n_trials: int
    hard_brake_rate: float
    n_merged: int
    n_timeout: int
    min_ttc_mean: float
    min_ttc_median: float
    min_ttc_q05: float
    min_ttc_q95: float
    ttm_mean: float
    ttm_median: float
    ttm_q05: float
    ttm_q95: float


def _stats(values: Sequence[float]) -> tuple[float, float, float, float]:
    if not values:
        return (math.nan,) * 4
    arr = np.asarray(values, dtype=float)
    return (float(arr.mean()), float(np.median(arr)),
            float(np.quantile(arr, 0.05)), float(np.quantile(arr, 0.95)))


def summarize_records(records: Iterable[TrialRecord]) -> list[BatchSummary]:
    """Aggregate per (strategy, true_c) cell, in first-seen order."""
    cells: dict[tuple[str, float], list[TrialRecord]] = {}
    for rec in records:
        cells.setdefault((rec.strategy, rec.true_c), []).append(rec)
    out = []
    for (name, c), recs in cells.items():
        n = len(recs)
        hb = sum(r.metrics["hard_brake"] for r in recs)
        ttc = _stats([r.metrics["min_ttc"] for r in recs])
        ttm = _stats([r.metrics["time_to_merge"] for r in recs
                      if r.metrics["time_to_merge"] is not None])
        merged = sum(r.outcome == "merged" for r in recs)
        out.append(BatchSummary(name, c, n, 100.0 * hb / n, merged, n - merged, *ttc, *ttm))
    return out


def _run_task(args: tuple[ScenarioConfig, Strategy, float, int, int]) -> TrialRecord:
    cfg, strategy, c, seed, idx = args
    return run_trial(cfg, strategy, c, seed, trial_index=idx)


def run_batch(cfg: ScenarioConfig, strategies: Sequence[Strategy], n_per_cell: int,
              seed: int | None = None, parallel: int = 1,
              true_cs: Sequence[float] = TRUE_C_CELLS) -> tuple[list[BatchSummary], list[TrialRecord]]:
    """Every strategy against every true c, ``n_per_cell`` seeded trials each."""
    if n_per_cell < 1:
        raise ConfigError("n_per_cell must be at least 1")
    master = cfg.seed if seed is None else int(seed)
    tasks = [(cfg, s, float(c), master, i) for s in strategies for c in true_cs
             for i in range(n_per_cell)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        records = [_run_task(t) for t in tasks]
    return summarize_records(records), records


# --- output -----------------------------------------------------------------------

def resolve_out_dir(cli_value: str | None, default: str = "results") -> Path:
    """``--out`` wins, then the environment variable, then ``default``."""
    return Path(cli_value or os.environ.get(OUT_DIR_ENV) or default)


def write_records(path: str | Path, records: Iterable[TrialRecord]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_records(path: str | Path) -> list[TrialRecord]:
    with open(path) as fh:
        return [TrialRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def _fmt(val: Any) -> str:
    if isinstance(val, float):
        return "nan" if math.isnan(val) else repr(val)
    return str(val)


def write_summary_csv(path: str | Path, summaries: Iterable[BatchSummary]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            writer.writerow([_fmt(getattr(s, col)) for col in SUMMARY_COLUMNS])


def write_trace(path: str | Path, record: TrialRecord) -> None:
    write_trace_csv(path, record.trace)


def replay_filter(cfg: ScenarioConfig, record: TrialRecord, seed: int = 0) -> list[list[float]]:
    """Run a fresh particle filter over the observations and ego commands of a
    recorded trial; returns ``(t, mean, q05, q95)`` rows."""
    model = cfg.model
    agent = Agent.from_config(Strategy("learned_c"), cfg, np.random.default_rng(seed))
    steps = record.steps
    if len(steps) < 2:
        raise ValueError("record too short to replay")

    def seen_at(step: dict[str, Any]) -> tuple[Observation, SceneState]:
        truth = model.from_vector(np.asarray(step["scene"]))
        obs = Observation(*step["obs"])
        return obs, agent.observable_scene(truth.ego, truth.lead, obs)

    obs, seen = seen_at(steps[0])
    agent.reset(seen, obs)
    b = summarize(agent.belief)
    rows = [[0.0, b.mean_c, b.q05, b.q95]]
    for cur, nxt in zip(steps[:-1], steps[1:]):
        command = EgoCommand(jerk=cur["jerk"], accel=cur["accel"])
        obs, seen = seen_at(nxt)
        agent.update(command, obs, seen)
        b = summarize(agent.belief)
        rows.append([nxt["t"], b.mean_c, b.q05, b.q95])
    return rows
