"""Particle filter over the trailing driver's cooperation level.

Each particle carries a hypothesis ``c`` plus its own copy of the scene. The
ego and lead are known to the planner and are overwritten with their observed
values after every step. What happens to the trailing vehicle depends on
``FilterConfig.resync``:

* ``"joint"`` (default): every particle keeps its own predicted trailing
  position and speed, perturbed by a little process noise. The likelihood then
  compares the accumulated effect of the hypothesised behaviour with the
  measurement.
* ``"full"``: the trailing state is reset to the latest measurement before each
  prediction. A single 0.1 s step moves the prediction by millimetres, far
  below a 0.5 m sensor noise, so this mode learns very slowly. It is kept for
  comparison.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from . import _kernels as K
from .errors import InvalidInputError
from .pomdp import Action, MergePOMDP, Observation, SceneState

TRACE_COLUMNS = ("time", "mu", "minimum", "maximum")


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int = 1000
    dither: tuple[float, ...] = (-0.05, 0.0, 0.05)
    ess_threshold: float | None = None  # None: resample every step
    resync: str = "joint"
    init_jitter_x: float = 0.5
    init_jitter_v: float = 0.5
    process_noise_x: float = 0.05
    process_noise_v: float = 0.05

    def __post_init__(self) -> None:
        if self.n_particles < 1:
            raise InvalidInputError("n_particles must be at least 1")
        if self.resync not in ("joint", "full"):
            raise InvalidInputError(f"unknown resync mode {self.resync!r}")
        if not self.dither:
            raise InvalidInputError("dither set must be non-empty")
        if self.ess_threshold is not None and not (0.0 < self.ess_threshold <= 1.0):
            raise InvalidInputError("ess_threshold must be in (0, 1]")


@dataclass(frozen=True)
class BeliefSummary:
    mean_c: float
    q05: float
    q95: float


@dataclass(frozen=True)
class Particle:
    c: float
    predicted_scene: SceneState
    weight: float


@dataclass
class ParticleSet:
    """Weighted particles. Row ``i`` of ``states`` is a full scene vector whose
    ``COOP`` column holds the hypothesis ``c_i``."""

    states: np.ndarray
    weights: np.ndarray
    rng: np.random.Generator
    model: MergePOMDP
    config: FilterConfig = field(default_factory=FilterConfig)
    degenerate_steps: int = 0
    last_degenerate: bool = False

    @property
    def size(self) -> int:
        return self.states.shape[0]

    @property
    def c(self) -> np.ndarray:
        return self.states[:, K.COOP]

    @property
    def particles(self) -> list[Particle]:
        return [Particle(float(row[K.COOP]), self.model.from_vector(row), float(w))
                for row, w in zip(self.states, self.weights)]

    def cumulative_weights(self) -> np.ndarray:
        cum = np.cumsum(self.weights)
        return cum / cum[-1]


def init_filter(K_particles: int, rng_seed: int, initial_scene: SceneState,
                model: MergePOMDP | None = None, config: FilterConfig | None = None) -> ParticleSet:
    """Uniform prior on c; every particle starts from the observed scene.

    In joint mode the trailing position and speed are jittered by the sensor
    noise so the particle cloud covers the measurement uncertainty.
    """
    if K_particles < 1:
        raise InvalidInputError("need at least one particle")
    model = model or MergePOMDP()
    base = config or FilterConfig()
    cfg = FilterConfig(**{**base.__dict__, "n_particles": K_particles})
    rng = np.random.default_rng(rng_seed)
    states = np.tile(model.to_vector(initial_scene), (K_particles, 1))
    states[:, K.COOP] = rng.uniform(0.0, 1.0, K_particles)
    if cfg.resync == "joint":
        states[:, K.TR_X] += cfg.init_jitter_x * rng.standard_normal(K_particles)
        states[:, K.TR_V] = np.maximum(
            states[:, K.TR_V] + cfg.init_jitter_v * rng.standard_normal(K_particles), 0.0)
    weights = np.full(K_particles, 1.0 / K_particles)
    return ParticleSet(states, weights, rng, model, cfg)


@njit(cache=True)
def _predict_weight(states, command, use_accel, noise, obs_x, obs_v, p):
    n = states.shape[0]
    out = np.empty_like(states)
    w = np.empty(n)
    for i in range(n):
        if use_accel:
            nxt = K.transition_accel(states[i], command, p)
        else:
            nxt = K.transition(states[i], command, p)
        nxt[K.TR_X] += noise[i, 0]
        nxt[K.TR_V] = max(nxt[K.TR_V] + noise[i, 1], 0.0)
        out[i] = nxt
        w[i] = math.exp(K.obs_loglik(obs_x, obs_v, nxt, p))
    return out, w


def systematic_resample(weights: np.ndarray, u: float) -> np.ndarray:
    """Indices drawn with one uniform offset ``u`` in [0, 1)."""
    n = weights.shape[0]
    cum = np.cumsum(weights)
    cum /= cum[-1]
    positions = (u + np.arange(n)) / n
    idx = np.searchsorted(cum, positions, side="right")
    return np.minimum(idx, n - 1)


def filter_step(ps: ParticleSet, ego_action: Action | None, observation: Observation,
                dt: float | None = None, *, ego_accel: float | None = None,
                observed_scene: SceneState | None = None,
                last_observation: Observation | None = None) -> tuple[ParticleSet, BeliefSummary]:
    """One predict / weight / dither / resample cycle.

    The ego moves under ``ego_action`` (jerk) unless ``ego_accel`` is given, in
    which case its acceleration was commanded directly. ``observed_scene``
    overwrites the ego and lead of every particle after the update.
    ``last_observation`` is the measurement the trailing state is reset to in
    ``"full"`` resync mode.
    """
    if (ego_action is None) == (ego_accel is None):
        raise InvalidInputError("give exactly one of ego_action and ego_accel")
    cfg = ps.config
    rng = ps.rng
    p = ps.model.params
    if dt is not None and dt != ps.model.dt:
        p = p.copy()
        p[K.P_DT] = dt
    n = ps.size
    states = ps.states
    if cfg.resync == "full":
        if last_observation is None:
            raise InvalidInputError("full resync needs the previous observation")
        states = states.copy()
        states[:, K.TR_X] = last_observation.trailing_x
        states[:, K.TR_V] = last_observation.trailing_v
        noise = np.zeros((n, 2))
    else:
        noise = rng.standard_normal((n, 2)) * np.array([cfg.process_noise_x, cfg.process_noise_v])

    command = float(ego_accel) if ego_accel is not None else float(ego_action.jerk)
    new_states, w = _predict_weight(states, command, ego_accel is not None, noise,
                                    observation.trailing_x, observation.trailing_v, p)
    w = w * ps.weights
    total = w.sum()
    degenerate = not (total > 0.0 and math.isfinite(total))
    if degenerate:
        w = np.full(n, 1.0 / n)
    else:
        w = w / total

    dither = np.asarray(cfg.dither)[rng.integers(0, len(cfg.dither), n)]
    new_states[:, K.COOP] = np.clip(new_states[:, K.COOP] + dither, 0.0, 1.0)

    u = rng.uniform()
    ess = 1.0 / np.sum(w * w)
    if cfg.ess_threshold is None or ess < cfg.ess_threshold * n:
        idx = systematic_resample(w, u)
        new_states = new_states[idx]
        w = np.full(n, 1.0 / n)

    if observed_scene is not None:
        vec = ps.model.to_vector(observed_scene)
        new_states[:, K.EGO_S:K.EGO_A + 1] = vec[K.EGO_S:K.EGO_A + 1]
        new_states[:, K.LD_X:K.LD_A + 1] = vec[K.LD_X:K.LD_A + 1]

    out = ParticleSet(new_states, w, rng, ps.model, cfg,
                      ps.degenerate_steps + int(degenerate), degenerate)
    if __debug__:
        check_invariants(out, n)
    return out, summarize(out)


def weighted_quantile(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    """Smallest value whose weighted CDF reaches ``q``."""
    order = np.argsort(values, kind="stable")
    cdf = np.cumsum(weights[order])
    cdf /= cdf[-1]
    k = int(np.searchsorted(cdf, q - 1e-12, side="left"))
    return float(values[order][min(k, len(values) - 1)])


def summarize(ps: ParticleSet) -> BeliefSummary:
    c = ps.c
    w = ps.weights / ps.weights.sum()
    return BeliefSummary(mean_c=float(np.dot(w, c)),
                         q05=weighted_quantile(c, w, 0.05),
                         q95=weighted_quantile(c, w, 0.95))


def check_invariants(ps: ParticleSet, expected_size: int) -> None:
    """Raise AssertionError if a filter invariant is broken."""
    assert ps.size == expected_size, "particle count changed"
    c = ps.c
    assert np.all((c >= 0.0) & (c <= 1.0)), "cooperation level left [0, 1]"
    assert np.all(ps.weights >= 0.0), "negative weight"
    assert abs(ps.weights.sum() - 1.0) < 1e-9, "weights not normalised"


def write_trace_csv(path: str | Path, rows: Iterable[Sequence[float]]) -> None:
    """Write ``(t, mean, q05, q95)`` rows under the columns ``time, mu, minimum, maximum``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for t, mu, lo, hi in rows:
            writer.writerow([f"{t:.3f}", repr(float(mu)), repr(float(lo)), repr(float(hi))])
