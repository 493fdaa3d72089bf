"""Flat key-value run configuration.

Grammar: one `key = value` per line; `#` starts a comment; blank lines are
ignored; keys are case-sensitive; later duplicates override earlier ones.
Unknown keys are rejected so experiment records stay diffable and complete.

Example:

    env = blob-world
    reward_mode = image
    prompt = blob at top-right
    w1 = 2000
    w2 = 200
    noise_lo = 400
    noise_hi = 500
    optimizer = planner
    episodes = 30
    seed = 0
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

_BOOL = {"true": True, "false": False, "1": True, "0": False,
         "yes": True, "no": False}


@dataclass(frozen=True)
class RunConfig:
    env: str = "blob-world"
    reward_mode: str = "image"          # image | video
    window: int = 4                     # video context size n
    w1: float = 2000.0
    w2: float = 200.0
    noise_lo: int = 400
    noise_hi: int = 500
    backend: str = "analytic"           # analytic | bridge
    bridge_endpoint: str = "127.0.0.1:7741"
    optimizer: str = "planner"          # planner | reinforce
    episodes: int = 30
    eval_episodes: int = 30
    episode_length: int = 300
    seed: int = 0
    out: str = "runs/out"
    prompt: str = ""                    # empty = first default prompt of the env
    sigma: float = 0.05
    randomize_init: bool = False
    save_episode: bool = True
    sparse_scale: float = 0.0
    horizon: int = 5
    population: int = 64
    elite_count: int = 8
    iterations: int = 4
    momentum: float = 0.1
    discount: float = 0.99
    init_std: float = 1.0
    plan_draws: int = 1
    lr: float = 0.01
    reinforce_batch: int = 8
    policy_std: float = 0.3
    sweep_points: str = "50,450,950"
    sweep_draws: int = 1000
    weight_grid: str = "200:2000,1000:2000,2000:200,2000:1000,2000:2000"

    def __post_init__(self):
        if self.reward_mode not in ("image", "video"):
            raise ValueError(f"reward_mode must be image or video, got {self.reward_mode!r}")
        if self.backend not in ("analytic", "bridge"):
            raise ValueError(f"backend must be analytic or bridge, got {self.backend!r}")
        if self.optimizer not in ("planner", "reinforce"):
            raise ValueError(f"optimizer must be planner or reinforce, got {self.optimizer!r}")
        if self.reward_mode == "video" and self.window < 1:
            raise ValueError("video mode requires window >= 1")
        if not (0 <= self.noise_lo <= self.noise_hi):
            raise ValueError(f"invalid noise range [{self.noise_lo}, {self.noise_hi}]")

    def noise_grid(self):
        return [int(x) for x in self.sweep_points.split(",") if x.strip()]

    def weight_cells(self):
        cells = []
        for cell in self.weight_grid.split(","):
            if not cell.strip():
                continue
            a, b = cell.split(":")
            cells.append((float(a), float(b)))
        return cells


def parse_config_text(text: str) -> dict:
    """Parse the flat key = value grammar into a raw string dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(name: str, value: str, target_type):
    if target_type is bool:
        try:
            return _BOOL[value.lower()]
        except KeyError:
            raise ValueError(f"key {name}: expected a boolean, got {value!r}") from None
    try:
        return target_type(value)
    except ValueError:
        raise ValueError(f"key {name}: expected {target_type.__name__}, got {value!r}") from None


def config_from_text(text: str, **overrides) -> RunConfig:
    raw = parse_config_text(text)
    types = {f.name: f.type for f in fields(RunConfig)}
    type_map = {"str": str, "int": int, "float": float, "bool": bool}
    kwargs = {}
    for key, value in raw.items():
        if key not in types:
            raise ValueError(f"unknown config key {key!r}")
        t = types[key]
        t = type_map[t] if isinstance(t, str) else t
        kwargs[key] = _coerce(key, value, t)
    cfg = RunConfig(**kwargs)
    return replace(cfg, **overrides) if overrides else cfg


def load_config(path, **overrides) -> RunConfig:
    with open(path, "r", encoding="utf-8") as f:
        return config_from_text(f.read(), **overrides)
