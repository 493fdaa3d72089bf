"""Desk-scale renderable point-mass environments and prompt grounding.

A single controllable blob moves in the unit arena under damped
double-integrator dynamics and is rendered as a Gaussian intensity bump on a
small grayscale grid. Prompts name either goal states (blob-world) or motion
templates (trajectory-world); `make_prompt_prior` grounds them into mixture
components by rendering the goal (or the template's frame stack).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .mixture import GaussianMixturePrior

ARENA_CENTER = (0.5, 0.5)
SUCCESS_RADIUS = 0.15


@dataclass(frozen=True)
class EnvSpec:
    """Environment geometry, dynamics constants and episode length."""

    name: str = "blob-world"
    height: int = 16
    width: int = 16
    radius_px: float = 2.0
    damping: float = 0.9
    dt: float = 0.1
    v_max: float = 0.5
    episode_length: int = 300

    def __post_init__(self):
        if self.name not in ("blob-world", "trajectory-world"):
            raise ValueError(f"unknown environment {self.name!r}")
        if self.episode_length < 1:
            raise ValueError("episode_length must be >= 1")


@dataclass(frozen=True)
class EnvState:
    """Point-mass state: position in [0,1]^2, velocity in arena units/step."""

    position: tuple
    velocity: tuple

    @staticmethod
    def make(position, velocity) -> "EnvState":
        return EnvState(tuple(float(p) for p in position),
                        tuple(float(v) for v in velocity))


def reset(spec: EnvSpec, seed=None, randomize: bool = False) -> EnvState:
    """Fixed arena-center start; optional seeded uniform-random start position."""
    if randomize:
        rng = np.random.default_rng(seed)
        pos = rng.uniform(0.0, 1.0, size=2)
        return EnvState.make(pos, (0.0, 0.0))
    return EnvState.make(ARENA_CENTER, (0.0, 0.0))


def clip_action(action) -> np.ndarray:
    return np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)


def step(state: EnvState, action, spec: EnvSpec) -> EnvState:
    """Damped double-integrator step with velocity and arena clamping."""
    pos, vel = step_batch(np.asarray([state.position]), np.asarray([state.velocity]),
                          np.asarray([action], dtype=np.float64), spec)
    return EnvState.make(pos[0], vel[0])


def step_batch(positions, velocities, actions, spec: EnvSpec):
    """Vectorized dynamics used by the planner's candidate rollouts."""
    acc = np.clip(np.asarray(actions, dtype=np.float64), -1.0, 1.0)
    vel = spec.damping * np.asarray(velocities, dtype=np.float64) + spec.dt * acc
    speed = np.linalg.norm(vel, axis=-1, keepdims=True)
    vel = vel * np.minimum(1.0, spec.v_max / np.maximum(speed, 1e-12))
    pos = np.clip(np.asarray(positions, dtype=np.float64) + spec.dt * vel, 0.0, 1.0)
    return pos, vel


def _pixel_centers(positions, spec: EnvSpec):
    p = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    cx = p[:, 0] * spec.width - 0.5
    cy = (1.0 - p[:, 1]) * spec.height - 0.5   # row 0 is the top of the arena
    return cx, cy


def render_positions(positions, spec: EnvSpec) -> np.ndarray:
    """Batch render: (B, 2) arena positions -> (B, H, W) images in [0, 1]."""
    cx, cy = _pixel_centers(positions, spec)
    return kernels.blob_images(cx, cy, spec.height, spec.width, spec.radius_px)


def render(state: EnvState, spec: EnvSpec) -> np.ndarray:
    """Gaussian blob with peak intensity 1 centered at the state's position."""
    return render_positions(np.asarray([state.position]), spec)[0]


@dataclass(frozen=True)
class GoalPrompt:
    """Blob-world prompt: a named goal position."""

    name: str
    goal: tuple


@dataclass(frozen=True)
class MotionPrompt:
    """Trajectory-world prompt: horizontal motion at a fixed speed."""

    name: str
    direction: int           # +1 moving right, -1 moving left
    speed: float = 0.03      # arena units per frame


def default_prompts(spec: EnvSpec):
    if spec.name == "blob-world":
        return (GoalPrompt("blob at top-right", (1.0, 1.0)),
                GoalPrompt("blob at bottom-left", (0.0, 0.0)))
    return (MotionPrompt("blob moving right", +1),
            MotionPrompt("blob moving left", -1))


def motion_template(prompt: MotionPrompt, n: int) -> np.ndarray:
    """(n, 2) positions of a centered constant-speed horizontal pass.

    Centered templates make moving-left simultaneously the x-mirror and the
    time-reversal of moving-right.
    """
    offsets = (np.arange(n) - (n - 1) / 2.0) * prompt.speed * prompt.direction
    pos = np.column_stack([0.5 + offsets, np.full(n, 0.5)])
    if np.any(pos[:, 0] < 0.0) or np.any(pos[:, 0] > 1.0):
        raise ValueError("motion template leaves the arena; reduce speed or n")
    return pos


def prompt_frames(spec: EnvSpec, prompt_def, n: int | None = None) -> np.ndarray:
    """Rendering(s) a prompt grounds to: (H, W) for a goal prompt with n=None,
    otherwise an (n, H, W) stack (goals repeat their frame; motion templates
    translate)."""
    if isinstance(prompt_def, GoalPrompt):
        frame = render_positions(np.asarray([prompt_def.goal]), spec)[0]
        if n is None:
            return frame
        return np.repeat(frame[None], n, axis=0)
    if isinstance(prompt_def, MotionPrompt):
        if n is None or n < 1:
            raise ValueError("motion prompts need a context window size n")
        return render_positions(motion_template(prompt_def, n), spec)
    raise TypeError(f"unsupported prompt definition {type(prompt_def).__name__}")


def make_prompt_prior(spec: EnvSpec, prompts, sigma: float = 0.05,
                      n: int | None = None) -> GaussianMixturePrior:
    """Ground prompts into an equal-weight Gaussian mixture over renderings.

    With n=None components are single frames (K, H, W); with a window size n
    they are n-frame stacks (K, n, H, W).
    """
    prompts = tuple(prompts)
    if not prompts:
        raise ValueError("need at least one prompt")
    means = [prompt_frames(spec, p, n) for p in prompts]
    k = len(prompts)
    return GaussianMixturePrior(
        weights=np.full(k, 1.0 / k),
        means=np.stack(means),
        sigmas=np.full(k, float(sigma)),
        names=tuple(p.name for p in prompts))


def goal_distance(state: EnvState, goal) -> float:
    return float(np.linalg.norm(np.asarray(state.position) - np.asarray(goal)))


def goal_success(state: EnvState, goal, radius: float = SUCCESS_RADIUS) -> bool:
    return goal_distance(state, goal) <= radius


# --- frame export -----------------------------------------------------------

def to_u8(img) -> np.ndarray:
    return np.clip(np.asarray(img) * 255.0 + 0.5, 0, 255).astype(np.uint8)


def upscale_nearest(img, factor: int) -> np.ndarray:
    """Nearest-neighbor upscaling of an (H, W) or (H, W, C) image."""
    img = np.asarray(img)
    return np.repeat(np.repeat(img, factor, axis=0), factor, axis=1)


def write_pgm(path, img) -> None:
    """Binary PGM (P5) from an (H, W) image in [0, 1]."""
    u8 = to_u8(img)
    if u8.ndim != 2:
        raise ValueError("PGM export takes a single-channel image")
    with open(path, "wb") as f:
        f.write(f"P5\n{u8.shape[1]} {u8.shape[0]}\n255\n".encode("ascii"))
        f.write(u8.tobytes())


def write_ppm(path, img) -> None:
    """Binary PPM (P6) from an (H, W, 3) image in [0, 1]; grayscale is tiled."""
    u8 = to_u8(img)
    if u8.ndim == 2:
        u8 = np.repeat(u8[:, :, None], 3, axis=2)
    if u8.ndim != 3 or u8.shape[2] != 3:
        raise ValueError("PPM export takes an (H, W, 3) image")
    with open(path, "wb") as f:
        f.write(f"P6\n{u8.shape[1]} {u8.shape[0]}\n255\n".encode("ascii"))
        f.write(u8.tobytes())
