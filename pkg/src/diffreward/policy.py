"""Linear-Gaussian policy and its analytic score-function gradient update.

The policy maps state features (position, velocity, bias) to an action mean
through a single weight matrix; actions are sampled with a fixed exploration
std. The update is plain episodic gradient ascent on the discounted
returns-to-go with a per-timestep mean baseline across the episode batch, with
the likelihood gradient computed in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_FEATURES = 5  # px, py, vx, vy, bias


@dataclass(frozen=True)
class LinearGaussianPolicy:
    """Action mean = weights @ (px, py, vx, vy, 1); fixed exploration std."""

    weights: np.ndarray        # (2, N_FEATURES)
    std: float = 0.3

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (2, N_FEATURES):
            raise ValueError(f"weights must be (2, {N_FEATURES}), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("policy weights must be finite")
        if not (np.isfinite(self.std) and self.std > 0.0):
            raise ValueError("exploration std must be positive")
        object.__setattr__(self, "weights", w)

    @staticmethod
    def zeros(std: float = 0.3) -> "LinearGaussianPolicy":
        return LinearGaussianPolicy(np.zeros((2, N_FEATURES)), std)


def features(position, velocity) -> np.ndarray:
    return np.array([position[0], position[1], velocity[0], velocity[1], 1.0])


def action_mean(policy: LinearGaussianPolicy, position, velocity) -> np.ndarray:
    return policy.weights @ features(position, velocity)


def sample_action(policy: LinearGaussianPolicy, position, velocity,
                  rng: np.random.Generator) -> np.ndarray:
    """Unclipped Gaussian action sample (the environment clips on step)."""
    return action_mean(policy, position, velocity) + policy.std * rng.standard_normal(2)


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    """Returns-to-go G_t = sum_k gamma^k r_{t+k}."""
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(rewards.size - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def _advantages(episodes, gamma: float):
    lengths = {len(ep) for ep in episodes}
    if len(lengths) != 1:
        raise ValueError("episodes in one update batch must share a length")
    G = np.stack([discounted_returns(ep.reward_total, gamma) for ep in episodes])
    baseline = G.mean(axis=0)
    return G - baseline[None, :]


def reinforce_objective(policy: LinearGaussianPolicy, episodes, gamma: float) -> float:
    """Surrogate objective whose gradient is the update direction.

    J = mean over episodes of sum_t log pi(a_t | s_t) * (G_t - b_t), with the
    baseline b_t computed from rewards only (theta-independent), so central
    finite differences of J match the analytic gradient.
    """
    adv = _advantages(episodes, gamma)
    var = policy.std**2
    total = 0.0
    for e, ep in enumerate(episodes):
        phi = np.column_stack([ep.positions, ep.velocities, np.ones(len(ep))])
        mean = phi @ policy.weights.T
        diff = ep.actions - mean
        logp = -0.5 * np.sum(diff**2, axis=1) / var - np.log(2.0 * np.pi * var)
        total += float(np.sum(logp * adv[e]))
    return total / len(episodes)


def reinforce_gradient(policy: LinearGaussianPolicy, episodes, gamma: float) -> np.ndarray:
    """Closed-form gradient of `reinforce_objective` w.r.t. the weight matrix."""
    adv = _advantages(episodes, gamma)
    grad = np.zeros_like(policy.weights)
    var = policy.std**2
    for e, ep in enumerate(episodes):
        phi = np.column_stack([ep.positions, ep.velocities, np.ones(len(ep))])
        diff = ep.actions - phi @ policy.weights.T      # (L, 2)
        grad += (diff * adv[e][:, None]).T @ phi / var
    return grad / len(episodes)


def reinforce_update(policy: LinearGaussianPolicy, episodes, lr: float,
                     gamma: float) -> LinearGaussianPolicy:
    """One gradient-ascent step; rejects non-finite gradients."""
    if not episodes:
        raise ValueError("need at least one episode")
    grad = reinforce_gradient(policy, episodes, gamma)
    if not np.all(np.isfinite(grad)):
        raise RuntimeError(f"non-finite policy gradient: {grad}")
    return LinearGaussianPolicy(policy.weights + lr * grad, policy.std)


class PolicyActor:
    """Actor protocol adapter for rollouts."""

    def __init__(self, policy: LinearGaussianPolicy):
        self.policy = policy

    def reset(self):
        pass

    def act(self, state, step_index, rng):
        return sample_action(self.policy, state.position, state.velocity, rng)
