import numpy as np
import pytest

from diffreward.config import RunConfig
from diffreward.harness import (build_experiment, resolve_prompt, run_eval,
                                run_train, sweep_noise, sweep_weights)
from diffreward.planner import PlannerActor
from diffreward.policy import PolicyActor


def _fast(**kw):
    base = dict(episodes=1, eval_episodes=1, episode_length=3, population=8,
                elite_count=2, iterations=1)
    base.update(kw)
    return RunConfig(**base)


def test_resolve_prompt_default_and_named():
    cfg = _fast()
    exp = build_experiment(cfg)
    assert exp.prompt_index == 0
    prompts, k = resolve_prompt(_fast(prompt="blob at bottom-left"), exp.spec)
    assert k == 1
    with pytest.raises(ValueError, match="unknown prompt"):
        resolve_prompt(_fast(prompt="blob on the moon"), exp.spec)


def test_planner_experiment_wiring():
    exp = build_experiment(_fast())
    assert isinstance(exp.actor, PlannerActor)
    assert exp.prompt.component == 0
    assert exp.backend.obs_shape == (16, 16)


def test_reinforce_experiment_wiring():
    exp = build_experiment(_fast(optimizer="reinforce"))
    assert isinstance(exp.actor, PolicyActor)
    assert exp.policy is not None


def test_video_experiment_builds_window_prior():
    exp = build_experiment(_fast(env="trajectory-world", reward_mode="video",
                                 window=4, noise_lo=500, noise_hi=600))
    assert exp.backend.obs_shape == (4, 16, 16)
    assert exp.setup.n == 4


def test_planner_requires_analytic_backend():
    with pytest.raises(ValueError, match="analytic"):
        build_experiment(_fast(backend="bridge", optimizer="planner"),
                         client=object())


def test_run_train_and_eval_round():
    cfg = _fast(episodes=2, eval_episodes=2)
    exp, result = run_train(cfg)
    assert len(result.rows) == 2
    exp2, ev = run_eval(cfg)
    assert len(ev.rows) == 2
    assert 0.0 <= ev.success_rate <= 1.0


def test_sweep_noise_ordering_and_determinism():
    cfg = _fast(sweep_points="50,450,950", sweep_draws=120, seed=3)
    rows = sweep_noise(cfg)
    assert [r[0] for r in rows] == [50, 450, 950]
    gaps = {t: g for t, _, _, g in rows}
    assert gaps[450] > gaps[50] and gaps[450] > gaps[950]
    assert sweep_noise(cfg) == rows


def test_sweep_noise_video_mode():
    cfg = _fast(env="trajectory-world", reward_mode="video", window=4,
                noise_lo=500, noise_hi=600, sweep_points="550", sweep_draws=30)
    rows = sweep_noise(cfg)
    assert len(rows) == 1
    assert rows[0][3] > 0.0   # matched template beats the mirrored prompt


def test_sweep_noise_with_echo_backend(echo_backend):
    cfg = _fast(sweep_points="450", sweep_draws=10)
    rows = sweep_noise(cfg, backend=echo_backend)
    t, aligned, misaligned, gap = rows[0]
    assert aligned == 0.0 and misaligned == 0.0 and gap == 0.0


def test_sweep_noise_rejects_empty_grid():
    with pytest.raises(ValueError, match="empty"):
        sweep_noise(_fast(sweep_points=""))


def test_sweep_weights_runs_each_cell():
    cfg = _fast(weight_grid="0:0,2000:200", seed=4)
    rows = sweep_weights(cfg)
    assert [(w1, w2) for w1, w2, _, _ in rows] == [(0.0, 0.0), (2000.0, 200.0)]
    assert all(s == 4 for _, _, _, s in rows)
    assert sweep_weights(cfg) == rows
