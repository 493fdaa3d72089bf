"""Text-conditioned denoising-diffusion rewards for zero-shot policy learning.

A frozen denoiser scores rendered observations against a conditioning prompt:
corrupt the observation with known source noise, take one conditional and one
unconditional noise prediction on the same corrupted input, and compose the
alignment gap between them with the conditional prediction's reconstruction
advantage through a symlog squashing. An exact Gaussian-mixture denoiser makes
the whole pipeline analytically checkable; a wire-protocol bridge swaps in an
external latent-diffusion model.
"""

from .envs import (EnvSpec, EnvState, GoalPrompt, MotionPrompt, default_prompts,
                   make_prompt_prior, render, reset, step)
from .mixture import (AnalyticBackend, GaussianMixturePrior, Prompt,
                      ddim_denoise_to_completion, gm_posterior_mean,
                      gm_predict_noise)
from .planner import AnalyticPlanReward, PlannerActor, PlannerConfig, cem_plan
from .policy import LinearGaussianPolicy, PolicyActor, reinforce_update
from .remote import BridgeBackend, BridgeClient, BridgeError, remote_reward_terms
from .rewards import (RewardTerms, RewardWeights, VideoRewardConfig,
                      alignment_term, compose_terms, compose_with_sparse,
                      frame_reward, reconstruction_term, video_rewards,
                      video_rewards_naive, window_terms)
from .rollout import (Episode, ReplayBuffer, RewardSetup, evaluate,
                      rollout_episode, train)
from .schedule import (NoiseLevelSampler, NoiseSchedule, build_linear_schedule,
                       default_schedule, q_sample, sample_noise_level, symlog)

__version__ = "0.1.0"
