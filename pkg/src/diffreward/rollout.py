"""Episode rollouts, replay storage, and the train/evaluate loops.

Every stream of randomness is keyed off one integer seed: reward noise for
step t (image mode) or window start a (video mode) comes from
``window_rng(seed, index)``, actor noise from a disjoint key, and per-episode
seeds are derived with SeedSequence, so any episode is exactly reproducible
from (seed, config).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .envs import (EnvSpec, EnvState, GoalPrompt, MotionPrompt,
                   goal_success, render, reset, step)
from .mixture import Prompt
from .policy import LinearGaussianPolicy, PolicyActor, reinforce_update
from .rewards import (RewardWeights, VideoRewardConfig, compose_with_sparse,
                      frame_reward, video_rewards, window_rng)
from .schedule import NoiseLevelSampler


def derive_seed(*keys) -> int:
    """Deterministic well-mixed integer seed from integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


def _actor_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(t), 1])


@dataclass(frozen=True)
class RewardSetup:
    """How rewards are computed during rollouts."""

    mode: str                       # "image" | "video"
    weights: RewardWeights
    sampler: NoiseLevelSampler
    n: int = 1                      # context window size, video mode only
    sparse_scale: float = 0.0

    def __post_init__(self):
        if self.mode not in ("image", "video"):
            raise ValueError(f"unknown reward mode {self.mode!r}")
        if self.mode == "video" and self.n < 1:
            raise ValueError("video mode needs a context window size n >= 1")


@dataclass
class Episode:
    """One rollout: per-step records plus the terminal state."""

    positions: np.ndarray        # (L, 2) state before the action
    velocities: np.ndarray       # (L, 2)
    actions: np.ndarray          # (L, 2) as sampled (environment clips)
    next_positions: np.ndarray   # (L, 2)
    next_velocities: np.ndarray  # (L, 2)
    observations: np.ndarray     # (L, H, W) rendered after the step
    r_align: np.ndarray          # (L,)
    r_rec: np.ndarray            # (L,)
    r_total: np.ndarray          # (L,) symlog-composed dense reward
    sparse: np.ndarray           # (L,) bool per-step success flags
    reward_total: np.ndarray     # (L,) dense + scaled sparse, as seen by learners

    def __len__(self) -> int:
        return self.positions.shape[0]

    def save(self, path) -> None:
        np.savez_compressed(path, **{k: getattr(self, k) for k in self.__dataclass_fields__})

    @staticmethod
    def load(path) -> "Episode":
        with np.load(path) as data:
            return Episode(**{k: data[k] for k in Episode.__dataclass_fields__})


class ReplayBuffer:
    """Append-only episode store."""

    def __init__(self):
        self._episodes = []

    def add(self, episode: Episode) -> None:
        self._episodes.append(episode)

    def __len__(self) -> int:
        return len(self._episodes)

    def __getitem__(self, i) -> Episode:
        return self._episodes[i]

    def last(self, k: int):
        return self._episodes[-k:]


def _success_fn(prompt_def):
    if isinstance(prompt_def, GoalPrompt):
        return lambda state: goal_success(state, prompt_def.goal)
    return lambda state: False


def rollout_episode(spec: EnvSpec, actor, prompt: Prompt, backend,
                    setup: RewardSetup, seed: int, prompt_def=None,
                    init_state: EnvState | None = None,
                    episode_length: int | None = None) -> Episode:
    """Run the act/step/render/reward loop for one episode.

    In video mode all frames are collected first and rewards are assembled
    from the sliding-window evaluation, which realizes the (n-1)-step
    finalization delay: the record for step t is only complete once frame
    t+n-1 exists (the returned episode always carries finalized rewards).
    """
    L = episode_length if episode_length is not None else spec.episode_length
    state = init_state if init_state is not None else reset(spec)
    if hasattr(actor, "reset"):
        actor.reset()
    success = _success_fn(prompt_def)
    pos, vel, acts = [], [], []
    npos, nvel, frames, flags = [], [], [], []
    for t in range(L):
        action = np.asarray(actor.act(state, t, _actor_rng(seed, t)), dtype=np.float64)
        nxt = step(state, action, spec)
        obs = render(nxt, spec)
        pos.append(state.position)
        vel.append(state.velocity)
        acts.append(action)
        npos.append(nxt.position)
        nvel.append(nxt.velocity)
        frames.append(obs)
        flags.append(success(nxt))
        state = nxt
    frames = np.asarray(frames)
    if setup.mode == "image":
        terms = [frame_reward(frames[t], prompt, backend, backend.sched,
                              setup.sampler, setup.weights, window_rng(seed, t))
                 for t in range(L)]
    else:
        cfg = VideoRewardConfig(setup.n, setup.weights, setup.sampler)
        terms = video_rewards(frames, prompt, cfg, backend, seed)
    r_total = np.array([r.r_total for r in terms])
    sparse = np.array(flags, dtype=bool)
    reward_total = np.array([compose_with_sparse(r, s, setup.sparse_scale)
                             for r, s in zip(r_total, sparse)])
    return Episode(
        positions=np.asarray(pos), velocities=np.asarray(vel),
        actions=np.asarray(acts), next_positions=np.asarray(npos),
        next_velocities=np.asarray(nvel), observations=frames,
        r_align=np.array([r.r_align for r in terms]),
        r_rec=np.array([r.r_rec for r in terms]),
        r_total=r_total, sparse=sparse, reward_total=reward_total)


def episode_diagnostic(ep: Episode, prompt_def) -> float:
    """Ground-truth score used only for evaluation, never by the learner."""
    if isinstance(prompt_def, GoalPrompt):
        d = np.linalg.norm(ep.next_positions - np.asarray(prompt_def.goal), axis=1)
        return float(-d.sum())
    if isinstance(prompt_def, MotionPrompt):
        return float(prompt_def.direction * (ep.next_positions[-1, 0] - ep.positions[0, 0]))
    raise TypeError(f"unsupported prompt definition {type(prompt_def).__name__}")


def episode_success(ep: Episode, prompt_def) -> bool:
    if isinstance(prompt_def, GoalPrompt):
        final = EnvState.make(ep.next_positions[-1], ep.next_velocities[-1])
        return goal_success(final, prompt_def.goal)
    if isinstance(prompt_def, MotionPrompt):
        return episode_diagnostic(ep, prompt_def) >= 0.05
    raise TypeError(f"unsupported prompt definition {type(prompt_def).__name__}")


@dataclass
class LogRow:
    episode: int
    cumulative_r_total: float
    cumulative_r_align: float
    cumulative_r_rec: float
    diagnostic_return: float
    wall_seconds: float


LOG_HEADER = ("episode", "cumulative_r_total", "cumulative_r_align",
              "cumulative_r_rec", "diagnostic_return", "wall_seconds")


def _log_row(i: int, ep: Episode, prompt_def, wall: float) -> LogRow:
    return LogRow(i, float(ep.reward_total.sum()), float(ep.r_align.sum()),
                  float(ep.r_rec.sum()), episode_diagnostic(ep, prompt_def), wall)


@dataclass
class TrainResult:
    rows: list
    policy: LinearGaussianPolicy | None
    buffer: ReplayBuffer
    successes: list


def train(spec: EnvSpec, actor, prompt: Prompt, backend, setup: RewardSetup,
          prompt_def, episode_budget: int, seed: int, optimizer: str = "planner",
          lr: float = 0.01, gamma: float = 0.99,
          randomize_init: bool = False,
          episode_length: int | None = None,
          reinforce_batch: int = 8) -> TrainResult:
    """Alternate rollouts and (for the gradient learner) policy updates.

    With optimizer="planner" the actor plans zero-shot and no parameters are
    learned. With optimizer="reinforce" the actor must be a PolicyActor,
    updated after every episode on the most recent `reinforce_batch` stored
    episodes (a single episode gives a zero update: the per-timestep baseline
    cancels it). Evaluation elsewhere always uses the final artifact.
    """
    if optimizer not in ("planner", "reinforce"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    rows, successes = [], []
    buffer = ReplayBuffer()
    policy = actor.policy if isinstance(actor, PolicyActor) else None
    for i in range(episode_budget):
        ep_seed = derive_seed(seed, 1, i)
        init = reset(spec, seed=ep_seed, randomize=randomize_init)
        t0 = time.perf_counter()
        ep = rollout_episode(spec, actor, prompt, backend, setup, ep_seed,
                             prompt_def=prompt_def, init_state=init,
                             episode_length=episode_length)
        buffer.add(ep)
        if optimizer == "reinforce":
            batch = buffer.last(min(len(buffer), reinforce_batch))
            policy = reinforce_update(policy, batch, lr, gamma)
            actor.policy = policy
        rows.append(_log_row(i, ep, prompt_def, time.perf_counter() - t0))
        successes.append(episode_success(ep, prompt_def))
    return TrainResult(rows=rows, policy=policy, buffer=buffer, successes=successes)


@dataclass
class EvalResult:
    rows: list
    success_rate: float
    mean_diagnostic: float


def evaluate(spec: EnvSpec, actor, prompt: Prompt, backend, setup: RewardSetup,
             prompt_def, episodes: int, seed: int,
             randomize_init: bool = False,
             episode_length: int | None = None) -> EvalResult:
    """Run evaluation rollouts and report the success rate and diagnostics."""
    rows, flags = [], []
    for i in range(episodes):
        ep_seed = derive_seed(seed, 2, i)
        init = reset(spec, seed=ep_seed, randomize=randomize_init)
        t0 = time.perf_counter()
        ep = rollout_episode(spec, actor, prompt, backend, setup, ep_seed,
                             prompt_def=prompt_def, init_state=init,
                             episode_length=episode_length)
        rows.append(_log_row(i, ep, prompt_def, time.perf_counter() - t0))
        flags.append(episode_success(ep, prompt_def))
    return EvalResult(rows=rows,
                      success_rate=float(np.mean(flags)) if flags else 0.0,
                      mean_diagnostic=float(np.mean([r.diagnostic_return for r in rows]))
                      if rows else 0.0)
