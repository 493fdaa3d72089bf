"""Assemble runnable experiments from a RunConfig: envs, priors, backends,
actors, and the sweep procedures behind the CLI."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .envs import (EnvSpec, GoalPrompt, MotionPrompt, default_prompts,
                   make_prompt_prior, motion_template, prompt_frames)
from .mixture import AnalyticBackend, Prompt
from .planner import AnalyticPlanReward, PlannerConfig, PlannerActor
from .policy import LinearGaussianPolicy, PolicyActor
from .remote import BridgeBackend, BridgeClient
from .rewards import RewardWeights, window_terms
from .rollout import RewardSetup, TrainResult, derive_seed, evaluate, train
from .schedule import NoiseLevelSampler, default_schedule, symlog


def build_env(cfg: RunConfig) -> EnvSpec:
    return EnvSpec(name=cfg.env, episode_length=cfg.episode_length)


def resolve_prompt(cfg: RunConfig, spec: EnvSpec):
    """(prompt definitions, index of the conditioning prompt)."""
    prompts = default_prompts(spec)
    if not cfg.prompt:
        return prompts, 0
    names = [p.name for p in prompts]
    if cfg.prompt not in names:
        raise ValueError(f"unknown prompt {cfg.prompt!r}; choices: {names}")
    return prompts, names.index(cfg.prompt)


def build_weights(cfg: RunConfig) -> RewardWeights:
    return RewardWeights(cfg.w1, cfg.w2)


def build_sampler(cfg: RunConfig) -> NoiseLevelSampler:
    return NoiseLevelSampler(cfg.noise_lo, cfg.noise_hi)


def build_setup(cfg: RunConfig) -> RewardSetup:
    return RewardSetup(mode=cfg.reward_mode, weights=build_weights(cfg),
                       sampler=build_sampler(cfg),
                       n=cfg.window if cfg.reward_mode == "video" else 1,
                       sparse_scale=cfg.sparse_scale)


@dataclass
class Experiment:
    """Everything needed to roll out and log one configured run."""

    cfg: RunConfig
    spec: EnvSpec
    prompts: tuple
    prompt_index: int
    prompt: Prompt
    backend: object
    setup: RewardSetup
    actor: object
    policy: LinearGaussianPolicy | None


def _analytic_backend(cfg: RunConfig, spec: EnvSpec, prompts):
    sched = default_schedule()
    n = cfg.window if cfg.reward_mode == "video" else None
    prior = make_prompt_prior(spec, prompts, sigma=cfg.sigma, n=n)
    return AnalyticBackend(prior, sched)


def _frame_goal_prompts(cfg: RunConfig, prompts):
    """Frame-level grounding for the planner's per-step oracle: motion prompts
    become goals at their template's final position."""
    out = []
    for p in prompts:
        if isinstance(p, MotionPrompt):
            end = motion_template(p, max(cfg.window, 2))[-1]
            out.append(GoalPrompt(p.name, (float(end[0]), float(end[1]))))
        else:
            out.append(p)
    return tuple(out)


def build_experiment(cfg: RunConfig, policy: LinearGaussianPolicy | None = None,
                     client: BridgeClient | None = None) -> Experiment:
    spec = build_env(cfg)
    prompts, k = resolve_prompt(cfg, spec)
    setup = build_setup(cfg)
    if cfg.optimizer == "planner" and cfg.backend != "analytic":
        raise ValueError("the planner needs the analytic backend's reward oracle")
    if cfg.backend == "analytic":
        backend = _analytic_backend(cfg, spec, prompts)
        prompt = Prompt(component=k)
    else:
        if client is None:
            host, _, port = cfg.bridge_endpoint.rpartition(":")
            client = BridgeClient(host or "127.0.0.1", int(port))
            client.connect()
        backend = BridgeBackend(client)
        if setup.mode == "video" and setup.n > backend.max_window:
            raise ValueError(f"window {setup.n} exceeds bridge max_window {backend.max_window}")
        prompt = Prompt(caption=prompts[k].name)
    if cfg.optimizer == "planner":
        frame_prior = make_prompt_prior(spec, _frame_goal_prompts(cfg, prompts),
                                        sigma=cfg.sigma, n=None)
        reward_eval = AnalyticPlanReward(frame_prior, k, backend.sched,
                                         build_sampler(cfg), build_weights(cfg),
                                         draws_per_step=cfg.plan_draws)
        actor = PlannerActor(spec, reward_eval, planner_config(cfg))
        pol = None
    else:
        pol = policy if policy is not None else LinearGaussianPolicy.zeros(cfg.policy_std)
        actor = PolicyActor(pol)
    return Experiment(cfg=cfg, spec=spec, prompts=prompts, prompt_index=k,
                      prompt=prompt, backend=backend, setup=setup, actor=actor,
                      policy=pol)


def planner_config(cfg: RunConfig) -> PlannerConfig:
    return PlannerConfig(horizon=cfg.horizon, population=cfg.population,
                         elite_count=cfg.elite_count, iterations=cfg.iterations,
                         momentum=cfg.momentum, discount=cfg.discount,
                         init_std=cfg.init_std)


def run_train(cfg: RunConfig, client=None) -> tuple[Experiment, TrainResult]:
    exp = build_experiment(cfg, client=client)
    result = train(exp.spec, exp.actor, exp.prompt, exp.backend, exp.setup,
                   exp.prompts[exp.prompt_index], cfg.episodes, cfg.seed,
                   optimizer=cfg.optimizer, lr=cfg.lr, gamma=cfg.discount,
                   randomize_init=cfg.randomize_init,
                   reinforce_batch=cfg.reinforce_batch)
    return exp, result


def run_eval(cfg: RunConfig, policy: LinearGaussianPolicy | None = None,
             client=None):
    exp = build_experiment(cfg, policy=policy, client=client)
    return exp, evaluate(exp.spec, exp.actor, exp.prompt, exp.backend, exp.setup,
                         exp.prompts[exp.prompt_index], cfg.eval_episodes,
                         derive_seed(cfg.seed, 7), randomize_init=cfg.randomize_init)


def sweep_noise(cfg: RunConfig, backend=None):
    """Per-noise-level Monte-Carlo means of the composed reward for an aligned
    and a misaligned (observation, prompt) pair, with paired source noise.

    The fixed observation is the conditioning prompt's own rendering; the
    misaligned pairing scores the same observation under the next prompt.
    Returns rows (t_noise, mean_aligned, mean_misaligned, gap).
    """
    spec = build_env(cfg)
    prompts, k = resolve_prompt(cfg, spec)
    if len(prompts) < 2:
        raise ValueError("the noise sweep needs at least two prompts")
    other = (k + 1) % len(prompts)
    n = cfg.window if cfg.reward_mode == "video" else 1
    if backend is None:
        sched = default_schedule()
        prior = make_prompt_prior(spec, prompts, sigma=cfg.sigma, n=n)
        backend = AnalyticBackend(prior, sched)
    obs = prompt_frames(spec, prompts[k], n)
    grid = cfg.noise_grid()
    if not grid:
        raise ValueError("empty noise grid")
    w = build_weights(cfg)
    rows = []
    for t in grid:
        tot_a = np.empty(cfg.sweep_draws)
        tot_m = np.empty(cfg.sweep_draws)
        for d in range(cfg.sweep_draws):
            rng = np.random.default_rng([cfg.seed, int(t), d])
            eps0 = rng.standard_normal(obs.shape)
            for dest, comp in ((tot_a, k), (tot_m, other)):
                align, rec = window_terms(obs, Prompt(component=comp), int(t),
                                          eps0, backend)
                per_frame = symlog(w.w1 * align) + symlog(w.w2 * rec)
                dest[d] = float(np.mean(per_frame))
        rows.append((int(t), float(tot_a.mean()), float(tot_m.mean()),
                     float(tot_a.mean() - tot_m.mean())))
    return rows


def sweep_weights(cfg: RunConfig):
    """Short training run per (w1, w2) cell; rows (w1, w2, final_diagnostic, seed)."""
    from dataclasses import replace
    cells = cfg.weight_cells()
    if not cells:
        raise ValueError("empty weight grid")
    rows = []
    for w1, w2 in cells:
        cell_cfg = replace(cfg, w1=w1, w2=w2)
        _, result = run_train(cell_cfg)
        final = result.rows[-1].diagnostic_return if result.rows else 0.0
        rows.append((float(w1), float(w2), float(final), int(cfg.seed)))
    return rows
