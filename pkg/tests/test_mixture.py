import numpy as np
import pytest

from diffreward.mixture import (AnalyticBackend, GaussianMixturePrior, Prompt,
                                ddim_denoise_to_completion, gm_posterior_mean,
                                gm_predict_noise, gm_responsibilities)
from diffreward.schedule import NoiseSchedule, build_linear_schedule, q_sample

# Trapezoid quadrature of E[x | x_noisy] on 4M points for the 1-d instance
# below (weights .3/.7, means -0.8/1.1, sigmas .4/.25, alpha_bar=0.36,
# x_noisy=0.37), computed independently before the build.
QUADRATURE_POSTERIOR_MEAN = 0.7133461163116686


def two_level_schedule():
    # alpha_bars exactly [0.64, 0.36]
    return NoiseSchedule(betas=np.array([0.36, 0.4375]),
                         alpha_bars=np.array([0.64, 0.36]))


def delta_prior(mu):
    return GaussianMixturePrior(weights=np.array([1.0]), means=mu[None],
                                sigmas=np.array([0.0]))


def test_delta_prior_posterior_is_the_mean():
    rng = np.random.default_rng(0)
    mu = rng.uniform(0, 1, size=(4, 4))
    sched = build_linear_schedule(1000, 1e-4, 0.02)
    x_noisy = rng.standard_normal((4, 4))
    post = gm_posterior_mean(x_noisy, 450, delta_prior(mu), Prompt.null(), sched)
    np.testing.assert_allclose(post, mu, rtol=1e-15)


def test_scaled_mean_is_a_fixed_point():
    rng = np.random.default_rng(1)
    mu = rng.uniform(0, 1, size=(3, 3))
    prior = GaussianMixturePrior(weights=np.array([1.0]), means=mu[None],
                                 sigmas=np.array([0.3]))
    sched = build_linear_schedule(1000, 1e-4, 0.02)
    t = 321
    x_noisy = np.sqrt(sched.alpha_bars[t]) * mu
    post = gm_posterior_mean(x_noisy, t, prior, Prompt(component=0), sched)
    np.testing.assert_allclose(post, mu, rtol=1e-12)
    eps = gm_predict_noise(x_noisy, t, prior, Prompt(component=0), sched)
    np.testing.assert_allclose(eps, 0.0, atol=1e-12)


def test_equidistant_mixture_returns_midpoint():
    sched = two_level_schedule()
    mu_a = np.array([1.0, 0.0])
    mu_b = np.array([0.0, 1.0])
    prior = GaussianMixturePrior(weights=np.array([0.5, 0.5]),
                                 means=np.stack([mu_a, mu_b]),
                                 sigmas=np.array([0.2, 0.2]))
    x_noisy = np.array([0.5, 0.5])  # equidistant from both scaled means
    post = gm_posterior_mean(x_noisy, 1, prior, Prompt.null(), sched)
    pa = gm_posterior_mean(x_noisy, 1, prior, Prompt(component=0), sched)
    pb = gm_posterior_mean(x_noisy, 1, prior, Prompt(component=1), sched)
    np.testing.assert_allclose(post, 0.5 * (pa + pb), rtol=1e-12)


def test_delta_prior_recovers_source_noise():
    rng = np.random.default_rng(2)
    mu = rng.uniform(0, 1, size=(5, 5))
    sched = build_linear_schedule(1000, 1e-4, 0.02)
    t = 488
    eps0 = rng.standard_normal((5, 5))
    x_noisy = q_sample(mu, eps0, t, sched)
    eps_hat = gm_predict_noise(x_noisy, t, delta_prior(mu), Prompt.null(), sched)
    np.testing.assert_allclose(eps_hat, eps0, atol=1e-10)


def test_posterior_mean_matches_quadrature_oracle():
    sched = two_level_schedule()
    prior = GaussianMixturePrior(weights=np.array([0.3, 0.7]),
                                 means=np.array([[-0.8], [1.1]]),
                                 sigmas=np.array([0.4, 0.25]))
    post = gm_posterior_mean(np.array([0.37]), 1, prior, Prompt.null(), sched)
    np.testing.assert_allclose(post[0], QUADRATURE_POSTERIOR_MEAN, atol=1e-6)


def test_single_component_conditional_equals_unconditional():
    rng = np.random.default_rng(3)
    mu = rng.uniform(0, 1, size=(4, 4))
    prior = GaussianMixturePrior(weights=np.array([1.0]), means=mu[None],
                                 sigmas=np.array([0.1]))
    sched = build_linear_schedule(1000, 1e-4, 0.02)
    x_noisy = rng.standard_normal((4, 4))
    cond = gm_predict_noise(x_noisy, 450, prior, Prompt(component=0), sched)
    uncond = gm_predict_noise(x_noisy, 450, prior, Prompt.null(), sched)
    np.testing.assert_allclose(cond, uncond, atol=1e-12)


def test_prediction_is_permutation_equivariant():
    rng = np.random.default_rng(4)
    sched = build_linear_schedule(1000, 1e-4, 0.02)
    means = rng.uniform(0, 1, size=(2, 16))
    prior = GaussianMixturePrior(weights=np.array([0.5, 0.5]), means=means,
                                 sigmas=np.array([0.05, 0.05]))
    x_noisy = rng.standard_normal(16)
    perm = rng.permutation(16)
    prior_p = GaussianMixturePrior(weights=prior.weights, means=means[:, perm],
                                   sigmas=prior.sigmas)
    for prompt in (Prompt.null(), Prompt(component=1)):
        eps = gm_predict_noise(x_noisy, 430, prior, prompt, sched)
        eps_p = gm_predict_noise(x_noisy[perm], 430, prior_p, prompt, sched)
        np.testing.assert_allclose(eps_p, eps[perm], rtol=1e-12)


def test_responsibilities_finite_for_large_inputs():
    sched = build_linear_schedule(1000, 1e-4, 0.02)
    means = np.array([[0.0, 0.0], [1e6, -1e6]])
    prior = GaussianMixturePrior(weights=np.array([0.5, 0.5]), means=means,
                                 sigmas=np.array([0.05, 0.05]))
    for x in (np.array([1e6, 1e6]), np.array([-1e6, 1e6]), np.array([0.0, 0.0])):
        r = gm_responsibilities(x, 450, prior, sched)
        assert np.all(np.isfinite(r))
        np.testing.assert_allclose(r.sum(), 1.0, rtol=1e-12)


def test_prior_validation():
    with pytest.raises(ValueError):
        GaussianMixturePrior(weights=np.array([0.6, 0.3]),
                             means=np.zeros((2, 3)), sigmas=np.array([0.1, 0.1]))
    with pytest.raises(ValueError):
        GaussianMixturePrior(weights=np.array([]), means=np.zeros((0, 3)),
                             sigmas=np.array([]))
    with pytest.raises(ValueError):
        GaussianMixturePrior(weights=np.array([1.0]), means=np.zeros((1, 3)),
                             sigmas=np.array([-0.1]))


def test_invalid_component_rejected():
    sched = build_linear_schedule(1000, 1e-4, 0.02)
    prior = delta_prior(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        gm_posterior_mean(np.zeros((2, 2)), 450, prior, Prompt(component=3), sched)


def test_degenerate_noise_level_rejected():
    sched = NoiseSchedule(betas=np.array([1e-15]), alpha_bars=np.array([1.0 - 1e-15]))
    prior = delta_prior(np.zeros(3))
    with pytest.raises(ValueError):
        gm_predict_noise(np.zeros(3), 0, prior, Prompt.null(), sched)


def test_ddim_delta_prior_reaches_the_mean():
    rng = np.random.default_rng(5)
    mu = rng.uniform(0, 1, size=(4, 4))
    sched = build_linear_schedule(1000, 1e-4, 0.02)
    backend = AnalyticBackend(delta_prior(mu), sched)
    frames = ddim_denoise_to_completion(rng.standard_normal((4, 4)), 480,
                                        Prompt.null(), backend, sched, steps=6)
    assert len(frames) == 6
    np.testing.assert_allclose(frames[-1], mu, rtol=1e-10)


def test_ddim_single_step_is_one_shot_estimate():
    rng = np.random.default_rng(6)
    mu = rng.uniform(0, 1, size=(3, 3))
    prior = GaussianMixturePrior(weights=np.array([1.0]), means=mu[None],
                                 sigmas=np.array([0.2]))
    sched = build_linear_schedule(1000, 1e-4, 0.02)
    backend = AnalyticBackend(prior, sched)
    x_noisy = rng.standard_normal((3, 3))
    t = 473
    frames = ddim_denoise_to_completion(x_noisy, t, Prompt.null(), backend, sched, 1)
    s, v = sched.signal_coeffs(t)
    eps = gm_predict_noise(x_noisy, t, prior, Prompt.null(), sched)
    np.testing.assert_allclose(frames[0], (x_noisy - np.sqrt(v) * eps) / s, rtol=1e-12)


def test_ddim_prefers_the_matching_prompt(corner_backend, sched):
    # final reconstruction lands closer to the original under the aligned prompt
    rng = np.random.default_rng(7)
    mu = corner_backend.prior.means[0]
    wins = 0
    trials = 100
    for _ in range(trials):
        x_noisy = q_sample(mu, rng.standard_normal(mu.shape), 450, sched)
        aligned = ddim_denoise_to_completion(x_noisy, 450, Prompt(component=0),
                                             corner_backend, sched, 4)[-1]
        misaligned = ddim_denoise_to_completion(x_noisy, 450, Prompt(component=1),
                                                corner_backend, sched, 4)[-1]
        if np.mean((aligned - mu) ** 2) < np.mean((misaligned - mu) ** 2):
            wins += 1
    assert wins > 90


def test_ddim_validates_arguments(corner_backend, sched):
    with pytest.raises(ValueError):
        ddim_denoise_to_completion(np.zeros((16, 16)), 450, Prompt.null(),
                                   corner_backend, sched, steps=0)
    with pytest.raises(ValueError):
        ddim_denoise_to_completion(np.zeros((16, 16)), 1000, Prompt.null(),
                                   corner_backend, sched, steps=2)


def test_prompt_validation():
    with pytest.raises(ValueError):
        Prompt(component=1, caption="both")
    assert Prompt.null().is_null
    assert not Prompt(component=0).is_null
