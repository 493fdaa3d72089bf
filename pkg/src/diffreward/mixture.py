"""Exact Gaussian-mixture denoiser: the analytic backend.

With a mixture prior over clean observations, the Bayes-optimal denoiser has a
closed form. For one component N(mu, sigma^2 I) and corruption x_t =
sqrt(ab)*x + sqrt(1-ab)*eps0,

    E[x | x_t] = (sigma^2 * sqrt(ab) * x_t + (1-ab) * mu) / (ab*sigma^2 + 1-ab)

and the implied noise prediction is eps_hat = (x_t - sqrt(ab)*E[x|x_t]) /
sqrt(1-ab). For the mixture, the posterior mean is the responsibility-weighted
combination, with responsibilities proportional to
pi_k * N(x_t; sqrt(ab)*mu_k, (ab*sigma_k^2 + 1-ab) I), computed in log space.

A prompt selects one component (the "conditional" model); the null prompt uses
the full mixture (the "unconditional" model).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedule import MIN_NOISE_STD, NoiseSchedule


@dataclass(frozen=True)
class Prompt:
    """Conditioning token: null, a mixture-component index, or a text caption."""

    component: int | None = None
    caption: str | None = None

    def __post_init__(self):
        if self.component is not None and self.caption is not None:
            raise ValueError("prompt cannot be both a component and a caption")

    @property
    def is_null(self) -> bool:
        return self.component is None and self.caption is None

    @staticmethod
    def null() -> "Prompt":
        return Prompt()


@dataclass(frozen=True)
class GaussianMixturePrior:
    """Equal-shape Gaussian components (weights, means, per-component sigma)."""

    weights: np.ndarray      # (K,)
    means: np.ndarray        # (K, *obs_shape)
    sigmas: np.ndarray       # (K,)
    names: tuple = ()        # optional prompt-name per component

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        s = np.asarray(self.sigmas, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("mixture needs at least one component")
        if m.shape[0] != w.size or s.shape != w.shape:
            raise ValueError("weights, means, sigmas must agree on component count")
        if np.any(w <= 0.0):
            raise ValueError("all mixture weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {w.sum()}, expected 1 within 1e-9")
        if np.any(s < 0.0):
            raise ValueError("component sigmas must be >= 0")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "sigmas", s)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def obs_shape(self) -> tuple:
        return self.means.shape[1:]

    def component_index(self, name: str) -> int:
        return self.names.index(name)


def _component_range(prior: GaussianMixturePrior, prompt: Prompt):
    if prompt.is_null:
        return None
    if prompt.caption is not None:
        raise ValueError("analytic backend takes component prompts, not captions")
    k = prompt.component
    if not 0 <= k < prior.n_components:
        raise ValueError(f"component {k} outside mixture of size {prior.n_components}")
    return k


def gm_responsibilities(x_noisy, t, prior, sched):
    """Posterior component probabilities given a corrupted observation."""
    xt = np.asarray(x_noisy, dtype=np.float64).ravel()
    s, v = sched.signal_coeffs(t)
    ab = s * s
    mu = prior.means.reshape(prior.n_components, -1)
    wv = ab * prior.sigmas**2 + v
    d2 = ((xt[None, :] - s * mu) ** 2).sum(axis=1)
    log_r = np.log(prior.weights) - 0.5 * xt.size * np.log(wv) - d2 / (2.0 * wv)
    log_r -= log_r.max()
    r = np.exp(log_r)
    return r / r.sum()


def gm_posterior_mean(x_noisy, t, prior, prompt, sched):
    """E[x | x_noisy] under the selected component or the full mixture."""
    x_noisy = np.asarray(x_noisy, dtype=np.float64)
    if x_noisy.shape != prior.obs_shape:
        raise ValueError(f"observation shape {x_noisy.shape} != prior shape {prior.obs_shape}")
    s, v = sched.signal_coeffs(t)
    ab = s * s
    k = _component_range(prior, prompt)
    xt = x_noisy.ravel()
    mu = prior.means.reshape(prior.n_components, -1)
    wv = ab * prior.sigmas**2 + v
    post = (prior.sigmas[:, None] ** 2 * s * xt[None, :] + v * mu) / wv[:, None]
    if k is not None:
        return post[k].reshape(prior.obs_shape)
    resp = gm_responsibilities(x_noisy, t, prior, sched)
    return (resp[:, None] * post).sum(axis=0).reshape(prior.obs_shape)


def gm_predict_noise(x_noisy, t, prior, prompt, sched):
    """Noise prediction implied by the exact posterior mean."""
    s, v = sched.signal_coeffs(t)
    post = gm_posterior_mean(x_noisy, t, prior, prompt, sched)
    return (np.asarray(x_noisy, dtype=np.float64) - s * post) / np.sqrt(v)


class AnalyticBackend:
    """Denoiser backend bundling a mixture prior with a noise schedule."""

    def __init__(self, prior: GaussianMixturePrior, sched: NoiseSchedule):
        self.prior = prior
        self.sched = sched

    @property
    def obs_shape(self) -> tuple:
        return self.prior.obs_shape

    def predict_noise(self, x_noisy, t, prompt):
        return gm_predict_noise(x_noisy, t, self.prior, prompt, self.sched)

    def posterior_mean(self, x_noisy, t, prompt):
        return gm_posterior_mean(x_noisy, t, self.prior, prompt, self.sched)


def ddim_denoise_to_completion(x_noisy, t_start, prompt, backend,
                               sched: NoiseSchedule, steps: int):
    """Deterministic iterative denoising from t_start down to clean.

    Returns the sequence of clean-observation estimates (one per step); the
    final entry is the model's clean estimate. With steps=1 this is the
    single-shot estimate (x_t - sqrt(1-ab)*eps_hat) / sqrt(ab).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not 0 <= t_start < sched.T:
        raise ValueError(f"t_start {t_start} outside [0, {sched.T})")
    grid = np.unique(np.linspace(t_start, 0, steps + 1).round().astype(int))[::-1]
    levels = grid[:-1] if grid.size > 1 else grid
    x = np.asarray(x_noisy, dtype=np.float64)
    estimates = []
    for i, t in enumerate(levels):
        s, v = sched.signal_coeffs(int(t))
        eps = backend.predict_noise(x, int(t), prompt)
        x0_hat = (x - np.sqrt(v) * eps) / s
        estimates.append(x0_hat)
        if i + 1 >= grid.size:
            x = x0_hat
            continue
        ab_next = float(sched.alpha_bars[int(grid[i + 1])])
        if np.sqrt(1.0 - ab_next) < MIN_NOISE_STD:
            x = x0_hat
        else:
            x = np.sqrt(ab_next) * x0_hat + np.sqrt(1.0 - ab_next) * eps
    return estimates
