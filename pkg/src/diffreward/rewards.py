"""Reward engine: text-conditioned rewards from one-step denoising predictions.

Image mode scores a single rendered observation per environment step; video
mode scores sliding windows of consecutive frames jointly and averages each
timestep's contribution over every valid window containing it. Window
evaluations are cached so each distinct window is corrupted and denoised
exactly once (a naive re-evaluating reference is kept for cross-checking).

Both raw reward terms are per-frame sums of squared differences (squared l2
norms): `align` between the conditional and unconditional noise predictions,
`rec` the reconstruction advantage of the conditional prediction over the
unconditional one against the true source noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .mixture import AnalyticBackend, Prompt
from .schedule import NoiseLevelSampler, NoiseSchedule, q_sample, symlog


@dataclass(frozen=True)
class RewardWeights:
    """Scale factors for the alignment and reconstruction terms."""

    w1: float = 2000.0
    w2: float = 200.0

    def __post_init__(self):
        if not (np.isfinite(self.w1) and np.isfinite(self.w2)):
            raise ValueError("reward weights must be finite")
        if self.w1 < 0.0 or self.w2 < 0.0:
            raise ValueError("reward weights must be non-negative")


@dataclass(frozen=True)
class RewardTerms:
    """One reward evaluation: raw terms plus the symlog-composed total.

    For single-evaluation rewards (image mode, or a single window frame)
    r_total == symlog(w1*r_align) + symlog(w2*r_rec) exactly. Video-mode
    per-timestep records average the *composites* across windows and store
    window-averaged raw terms, so the identity holds there only for n=1.
    """

    r_align: float
    r_rec: float
    r_total: float


def compose_terms(r_align: float, r_rec: float, weights: RewardWeights) -> RewardTerms:
    total = symlog(weights.w1 * r_align) + symlog(weights.w2 * r_rec)
    return RewardTerms(float(r_align), float(r_rec), float(total))


def alignment_term(cond, uncond) -> float:
    """Squared l2 distance between conditional and unconditional predictions."""
    cond = np.asarray(cond, dtype=np.float64)
    uncond = np.asarray(uncond, dtype=np.float64)
    if cond.shape != uncond.shape:
        raise ValueError(f"shape mismatch: {cond.shape} vs {uncond.shape}")
    return float(np.sum((cond - uncond) ** 2))


def reconstruction_term(cond, uncond, eps0) -> float:
    """How much closer the conditional prediction is to the true source noise."""
    cond = np.asarray(cond, dtype=np.float64)
    uncond = np.asarray(uncond, dtype=np.float64)
    eps0 = np.asarray(eps0, dtype=np.float64)
    if not (cond.shape == uncond.shape == eps0.shape):
        raise ValueError("cond, uncond, eps0 shapes must match")
    return float(np.sum((uncond - eps0) ** 2) - np.sum((cond - eps0) ** 2))


def compose_with_sparse(r: float, success: bool, scale: float) -> float:
    """Add a scaled sparse success bonus to a dense reward."""
    if not (np.isfinite(r) and np.isfinite(scale)):
        raise ValueError("inputs must be finite")
    return float(r) + (float(scale) if success else 0.0)


@dataclass(frozen=True)
class VideoRewardConfig:
    """Context-window size, weights and noise-level range for video mode."""

    n: int
    weights: RewardWeights
    sampler: NoiseLevelSampler

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("context window size must be >= 1")


def _kernel_terms(flat_obs, flat_eps0, t, backend: AnalyticBackend, cond: int,
                  n_frames: int):
    """Fused-kernel path: per-frame (align, rec) sums, both (n_frames,)."""
    prior = backend.prior
    s, v = backend.sched.signal_coeffs(t)
    align, rec = kernels.gm_reward_terms(
        flat_obs[None, :], flat_eps0[None, :],
        np.array([s]), np.array([v]),
        prior.means.reshape(prior.n_components, -1),
        prior.sigmas**2, np.log(prior.weights), cond, n_frames)
    return align[0], rec[0]


def _require_component(prompt: Prompt) -> int:
    if prompt.is_null:
        raise ValueError("reward computation needs a non-null prompt")
    if prompt.component is None:
        raise ValueError("analytic backend takes component prompts")
    return prompt.component


def window_terms(frames, prompt: Prompt, t: int, eps0, backend):
    """Per-frame raw (align, rec) term arrays for one jointly corrupted window.

    frames, eps0: (n, *frame_shape). One conditional and one unconditional
    prediction are made on the same corrupted window; frame f of each returned
    array uses only frame f's elements.
    """
    frames = np.asarray(frames, dtype=np.float64)
    eps0 = np.asarray(eps0, dtype=np.float64)
    if frames.shape != eps0.shape:
        raise ValueError(f"frames {frames.shape} and eps0 {eps0.shape} must match")
    if prompt.is_null:
        raise ValueError("reward computation needs a non-null prompt")
    if isinstance(backend, AnalyticBackend):
        if frames.shape != backend.obs_shape:
            raise ValueError(
                f"backend expects windows of shape {backend.obs_shape}, got {frames.shape}")
        return _kernel_terms(frames.ravel(), eps0.ravel(), t, backend,
                             _require_component(prompt), frames.shape[0])
    xt = q_sample(frames, eps0, t, backend.sched)
    eps_c = np.asarray(backend.predict_noise(xt, t, prompt), dtype=np.float64)
    eps_u = np.asarray(backend.predict_noise(xt, t, Prompt.null()), dtype=np.float64)
    n = frames.shape[0]
    align = ((eps_c - eps_u) ** 2).reshape(n, -1).sum(axis=1)
    rec = (((eps_u - eps0) ** 2) - ((eps_c - eps0) ** 2)).reshape(n, -1).sum(axis=1)
    return align, rec


def frame_reward(obs_next, prompt: Prompt, backend, sched: NoiseSchedule,
                 sampler: NoiseLevelSampler, weights: RewardWeights,
                 rng: np.random.Generator) -> RewardTerms:
    """Image-mode reward for one rendered observation.

    Samples the corruption level and source noise from rng, corrupts the
    observation, and compares the conditional and unconditional one-step
    noise predictions on the same corrupted input.
    """
    obs = np.asarray(obs_next, dtype=np.float64)
    sampler.validate(sched)
    if prompt.is_null:
        raise ValueError("reward computation needs a non-null prompt")
    t = sampler.sample(rng)
    if hasattr(backend, "window_reward_terms"):
        req_seed = int(rng.integers(0, 2**31 - 1))
        align, rec = backend.window_reward_terms(obs[None], prompt, t, req_seed)
        return compose_terms(float(align[0]), float(rec[0]), weights)
    eps0 = rng.standard_normal(obs.shape)
    if isinstance(backend, AnalyticBackend):
        if obs.shape != backend.obs_shape:
            raise ValueError(
                f"backend expects observations of shape {backend.obs_shape}, got {obs.shape}")
        align, rec = _kernel_terms(obs.ravel(), eps0.ravel(), t, backend,
                                   _require_component(prompt), 1)
    else:
        xt = q_sample(obs, eps0, t, backend.sched)
        eps_c = backend.predict_noise(xt, t, prompt)
        eps_u = backend.predict_noise(xt, t, Prompt.null())
        align = np.array([alignment_term(eps_c, eps_u)])
        rec = np.array([reconstruction_term(eps_c, eps_u, eps0)])
    return compose_terms(float(align[0]), float(rec[0]), weights)


def window_rng(seed: int, start: int) -> np.random.Generator:
    """Deterministic per-window noise stream, identical for every evaluation order."""
    return np.random.default_rng([int(seed), int(start)])


def _valid_window_starts(t: int, n: int, length: int):
    return range(max(0, t - n + 1), min(t, length - n) + 1)


def _evaluate_window(frames, start, prompt, cfg: VideoRewardConfig, backend, seed):
    sub = frames[start:start + cfg.n]
    rng = window_rng(seed, start)
    t = cfg.sampler.sample(rng)
    if hasattr(backend, "window_reward_terms"):
        req_seed = int(rng.integers(0, 2**31 - 1))
        return backend.window_reward_terms(sub, prompt, t, req_seed)
    eps0 = rng.standard_normal(sub.shape)
    return window_terms(sub, prompt, t, eps0, backend)


def _assemble_timestep(t, pairs, cfg: VideoRewardConfig) -> RewardTerms:
    w = cfg.weights
    totals, aligns, recs = [], [], []
    for start, (align, rec) in pairs:
        i = t - start
        totals.append(symlog(w.w1 * align[i]) + symlog(w.w2 * rec[i]))
        aligns.append(align[i])
        recs.append(rec[i])
    return RewardTerms(float(np.mean(aligns)), float(np.mean(recs)),
                       float(np.mean(totals)))


def video_rewards(frames, prompt: Prompt, cfg: VideoRewardConfig, backend,
                  seed: int):
    """Per-timestep rewards over an episode of frames, each window scored once.

    frames: (L, *frame_shape). Timestep t averages the symlog-composed
    contribution of frame t across all fully-in-range windows containing it
    (between 1 and n windows near the episode boundaries). Each window draws
    its corruption level and source noise from a stream keyed by
    (seed, window start), so results do not depend on evaluation order.
    """
    frames = np.asarray(frames, dtype=np.float64)
    L = frames.shape[0]
    if cfg.n > L:
        raise ValueError(f"window size {cfg.n} exceeds episode length {L}")
    cache = {start: _evaluate_window(frames, start, prompt, cfg, backend, seed)
             for start in range(0, L - cfg.n + 1)}
    return [_assemble_timestep(t, [(a, cache[a]) for a in _valid_window_starts(t, cfg.n, L)], cfg)
            for t in range(L)]


def video_rewards_naive(frames, prompt: Prompt, cfg: VideoRewardConfig, backend,
                        seed: int):
    """Reference implementation re-evaluating every window for every timestep."""
    frames = np.asarray(frames, dtype=np.float64)
    L = frames.shape[0]
    if cfg.n > L:
        raise ValueError(f"window size {cfg.n} exceeds episode length {L}")
    out = []
    for t in range(L):
        pairs = [(start, _evaluate_window(frames, start, prompt, cfg, backend, seed))
                 for start in _valid_window_starts(t, cfg.n, L)]
        out.append(_assemble_timestep(t, pairs, cfg))
    return out
