"""Forward diffusion process: noise schedule, noise-level sampling, corruption.

The schedule follows the discrete DDPM convention: beta_t are per-step variance
increments and alpha_bar_t = prod_{s<=t} (1 - beta_s) is the cumulative signal
coefficient, so a clean observation x corrupts as

    x_t = sqrt(alpha_bar_t) * x + sqrt(1 - alpha_bar_t) * eps0,  eps0 ~ N(0, I).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Corruption levels with sqrt(1 - alpha_bar) below this are rejected rather
# than clamped; they sit far outside any usable sampling range.
MIN_NOISE_STD = 1e-6


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step variance increments and cumulative signal coefficients."""

    betas: np.ndarray
    alpha_bars: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        abars = np.asarray(self.alpha_bars, dtype=np.float64)
        if betas.ndim != 1 or betas.shape != abars.shape or betas.size < 1:
            raise ValueError("betas and alpha_bars must be equal-length 1-D arrays")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ValueError("betas must lie strictly inside (0, 1)")
        if np.any(np.diff(abars) >= 0.0):
            raise ValueError("alpha_bars must be strictly decreasing")
        expected = np.cumprod(1.0 - betas)
        if not np.allclose(abars, expected, rtol=1e-12, atol=0.0):
            raise ValueError("alpha_bars inconsistent with cumprod(1 - betas)")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_bars", abars)

    @property
    def T(self) -> int:
        return self.betas.shape[0]

    def signal_coeffs(self, t: int) -> tuple[float, float]:
        """(sqrt(alpha_bar_t), 1 - alpha_bar_t) with range and degeneracy checks."""
        if not 0 <= t < self.T:
            raise ValueError(f"noise level {t} outside [0, {self.T})")
        ab = float(self.alpha_bars[t])
        noise_var = 1.0 - ab
        if np.sqrt(noise_var) < MIN_NOISE_STD:
            raise ValueError(f"degenerate noise level t={t}: sqrt(1-alpha_bar) < {MIN_NOISE_STD}")
        return float(np.sqrt(ab)), noise_var


def build_linear_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linearly interpolated betas from beta_start to beta_end over T steps."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    betas = np.linspace(beta_start, beta_end, T)
    return NoiseSchedule(betas=betas, alpha_bars=np.cumprod(1.0 - betas))


def default_schedule() -> NoiseSchedule:
    """T=1000 linear schedule, beta in [1e-4, 0.02]."""
    return build_linear_schedule(1000, 1e-4, 0.02)


@dataclass(frozen=True)
class NoiseLevelSampler:
    """Uniform integer corruption levels on the inclusive range [lo, hi]."""

    lo: int
    hi: int

    def __post_init__(self):
        if not (0 <= self.lo <= self.hi):
            raise ValueError(f"invalid noise-level range [{self.lo}, {self.hi}]")

    def validate(self, sched: NoiseSchedule) -> None:
        if self.hi >= sched.T:
            raise ValueError(f"noise-level range [{self.lo}, {self.hi}] exceeds schedule T={sched.T}")

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.lo, self.hi + 1))


def sample_noise_level(sampler: NoiseLevelSampler, rng: np.random.Generator) -> int:
    return sampler.sample(rng)


def q_sample(x: np.ndarray, eps0: np.ndarray, t: int, sched: NoiseSchedule) -> np.ndarray:
    """Corrupt x with source noise eps0 at level t."""
    x = np.asarray(x, dtype=np.float64)
    eps0 = np.asarray(eps0, dtype=np.float64)
    if x.shape != eps0.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs eps0 {eps0.shape}")
    if not 0 <= t < sched.T:
        raise ValueError(f"noise level {t} outside [0, {sched.T})")
    ab = float(sched.alpha_bars[t])
    return np.sqrt(ab) * x + np.sqrt(1.0 - ab) * eps0


def symlog(v):
    """Sign-preserving logarithmic squashing: sign(v) * log(1 + |v|)."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("symlog requires finite input")
    out = np.sign(v) * np.log1p(np.abs(v))
    return float(out) if out.ndim == 0 else out
