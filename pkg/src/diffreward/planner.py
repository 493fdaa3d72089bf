"""Cross-entropy-method planner over the known toy dynamics.

Candidates are action sequences sampled from a diagonal Gaussian, rolled out
with the true dynamics, scored by the discounted sum of per-step rewards, and
the sampling distribution is refit on the elite set with momentum. One
corruption draw (noise level + source noise) per horizon step is shared by
every candidate and every refit iteration within a single plan call, which
keeps candidate comparisons paired and makes the running best score monotone
per call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .envs import EnvSpec, render_positions, step_batch
from .mixture import GaussianMixturePrior
from .rewards import RewardWeights
from .schedule import NoiseLevelSampler, NoiseSchedule, symlog


@dataclass(frozen=True)
class PlannerConfig:
    """Sampling-based planner hyperparameters."""

    horizon: int = 5
    population: int = 64
    elite_count: int = 8
    iterations: int = 4
    momentum: float = 0.1
    discount: float = 0.99
    init_std: float = 1.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.elite_count < 1 or self.elite_count > self.population:
            raise ValueError("need 1 <= elite_count <= population")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must lie in (0, 1]")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.init_std <= 0.0:
            raise ValueError("init_std must be positive")


class AnalyticPlanReward:
    """Per-step reward evaluator backed by the mixture oracle kernels.

    draws_per_step > 1 averages several corruption draws per horizon step,
    trading compute for a smoother candidate-scoring surface.
    """

    def __init__(self, prior: GaussianMixturePrior, component: int,
                 sched: NoiseSchedule, sampler: NoiseLevelSampler,
                 weights: RewardWeights, draws_per_step: int = 1):
        if prior.means.ndim != 3:
            raise ValueError("planner reward needs a frame-shaped (K, H, W) prior")
        if draws_per_step < 1:
            raise ValueError("draws_per_step must be >= 1")
        sampler.validate(sched)
        self.prior = prior
        self.component = int(component)
        self.sched = sched
        self.sampler = sampler
        self.weights = weights
        self.draws_per_step = int(draws_per_step)
        self._flat_means = prior.means.reshape(prior.n_components, -1)
        self._sigmas2 = prior.sigmas**2
        self._logw = np.log(prior.weights)

    def draw(self, rng: np.random.Generator):
        return tuple((self.sampler.sample(rng),
                      rng.standard_normal(self._flat_means.shape[1]))
                     for _ in range(self.draws_per_step))

    def score(self, positions, velocities, actions, obs, draw):
        B = obs.shape[0]
        flat = obs.reshape(B, -1)
        total = np.zeros(B)
        for t, eps0 in draw:
            s, v = self.sched.signal_coeffs(t)
            align, rec = kernels.gm_reward_terms(
                flat, np.broadcast_to(eps0, flat.shape),
                np.full(B, s), np.full(B, v),
                self._flat_means, self._sigmas2, self._logw, self.component, 1)
            total += symlog(self.weights.w1 * align[:, 0]) \
                + symlog(self.weights.w2 * rec[:, 0])
        return total / len(draw)


@dataclass
class PlanInfo:
    """Diagnostics from one plan call."""

    iteration_best: np.ndarray   # running best candidate score after each iteration
    best_sequence: np.ndarray    # (H, 2) best-scoring action sequence seen
    final_mean: np.ndarray       # (H, 2) refit mean after the last iteration


def cem_plan_detailed(state_pos, state_vel, spec: EnvSpec, reward_eval,
                      config: PlannerConfig, rng: np.random.Generator,
                      warm_mean=None):
    """One planning call; returns (first action of the final mean, PlanInfo)."""
    H, pop = config.horizon, config.population
    mean = np.zeros((H, 2)) if warm_mean is None else np.array(warm_mean, dtype=np.float64)
    std = np.full((H, 2), config.init_std)
    draws = [reward_eval.draw(rng) for _ in range(H)]
    best_score = -np.inf
    best_seq = None
    iteration_best = np.empty(config.iterations)
    pos0 = np.asarray(state_pos, dtype=np.float64)
    vel0 = np.asarray(state_vel, dtype=np.float64)
    for it in range(config.iterations):
        acts = np.clip(mean[None] + std[None] * rng.standard_normal((pop, H, 2)), -1.0, 1.0)
        acts[0] = np.clip(mean, -1.0, 1.0)
        if best_seq is not None and pop > 1:
            acts[1] = best_seq
        pos = np.repeat(pos0[None], pop, axis=0)
        vel = np.repeat(vel0[None], pop, axis=0)
        scores = np.zeros(pop)
        for h in range(H):
            pos, vel = step_batch(pos, vel, acts[:, h], spec)
            obs = render_positions(pos, spec)
            scores += config.discount**h * reward_eval.score(pos, vel, acts[:, h], obs, draws[h])
        order = np.argsort(scores)[::-1]
        if scores[order[0]] > best_score:
            best_score = float(scores[order[0]])
            best_seq = acts[order[0]].copy()
        iteration_best[it] = best_score
        elite = acts[order[:config.elite_count]]
        mean = config.momentum * mean + (1.0 - config.momentum) * elite.mean(axis=0)
        std = config.momentum * std + (1.0 - config.momentum) * elite.std(axis=0)
    action = np.clip(mean[0], -1.0, 1.0)
    return action, PlanInfo(iteration_best, best_seq, mean)


def cem_plan(state_pos, state_vel, spec: EnvSpec, reward_eval,
             config: PlannerConfig, rng: np.random.Generator, warm_mean=None):
    """First action of the refit mean after the configured CEM iterations."""
    action, _ = cem_plan_detailed(state_pos, state_vel, spec, reward_eval,
                                  config, rng, warm_mean)
    return action


class PlannerActor:
    """Stateful wrapper: warm-starts each step from the previous plan's mean."""

    def __init__(self, spec: EnvSpec, reward_eval, config: PlannerConfig):
        self.spec = spec
        self.reward_eval = reward_eval
        self.config = config
        self._warm = None

    def reset(self):
        self._warm = None

    def act(self, state, step_index, rng):
        action, info = cem_plan_detailed(
            state.position, state.velocity, self.spec, self.reward_eval,
            self.config, rng, warm_mean=self._warm)
        self._warm = np.vstack([info.final_mean[1:], np.zeros((1, 2))])
        return action
