"""Command-line entry points.

Subcommands: train, eval, sweep-noise, sweep-weights, render, bridge-check.
Every command takes --config PATH (flat key = value file) plus optional
--seed / --out / --backend / --bridge-endpoint overrides, and writes CSV
artifacts (UTF-8, comma-separated, header row) plus a plain-text run manifest
under the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .envs import upscale_nearest, write_pgm, write_ppm
from .harness import run_eval, run_train, sweep_noise, sweep_weights
from .remote import BridgeClient, BridgeError
from .rollout import LOG_HEADER, Episode

SCHEMA_VERSION = "v1"

EVAL_HEADER = ("prompt", "episodes", "success_rate", "mean_diagnostic_return", "seed")
SWEEP_NOISE_HEADER = ("t_noise", "mean_r_total_aligned", "mean_r_total_misaligned", "gap")
SWEEP_WEIGHTS_HEADER = ("w1", "w2", "final_diagnostic_return", "seed")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _write_manifest(out: Path, cfg: RunConfig, files, command: str) -> None:
    lines = [f"command: {command}",
             f"schema: {SCHEMA_VERSION}",
             f"seed: {cfg.seed}",
             "outputs:"]
    lines += [f"  - {name}" for name in files]
    lines.append("config:")
    lines += [f"  {k} = {v}" for k, v in sorted(vars(cfg).items())]
    (out / "run_manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load(args) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if getattr(args, "backend", None):
        overrides["backend"] = args.backend
    if getattr(args, "bridge_endpoint", None):
        overrides["bridge_endpoint"] = args.bridge_endpoint
    cfg = load_config(args.config, **overrides)
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(x) -> str:
    if isinstance(x, float):
        return np.format_float_positional(x, precision=12, unique=True, trim="-")
    return str(x)


def cmd_train(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    exp, result = run_train(cfg)
    rows = [(r.episode, _fmt(r.cumulative_r_total), _fmt(r.cumulative_r_align),
             _fmt(r.cumulative_r_rec), _fmt(r.diagnostic_return),
             f"{r.wall_seconds:.3f}") for r in result.rows]
    files = ["log.csv"]
    _write_csv(out / "log.csv", LOG_HEADER, rows)
    if result.policy is not None:
        np.savez(out / "policy.npz", weights=result.policy.weights,
                 std=np.array(result.policy.std))
        files.append("policy.npz")
    else:
        (out / "planner.json").write_text(
            json.dumps({"optimizer": "planner",
                        "prompt": exp.prompts[exp.prompt_index].name,
                        "planner": {"horizon": cfg.horizon, "population": cfg.population,
                                    "elite_count": cfg.elite_count,
                                    "iterations": cfg.iterations,
                                    "momentum": cfg.momentum, "discount": cfg.discount,
                                    "init_std": cfg.init_std}},
                       indent=2) + "\n", encoding="utf-8")
        files.append("planner.json")
    if cfg.save_episode and len(result.buffer) > 0:
        result.buffer[-1].save(out / "episode.npz")
        files.append("episode.npz")
    _write_manifest(out, cfg, files, "train")
    print(f"train: {cfg.episodes} episodes -> {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    policy = None
    if args.artifact:
        path = Path(args.artifact)
        if not path.exists():
            print(f"error: artifact not found: {path}", file=sys.stderr)
            return 2
        if path.suffix == ".npz":
            from .policy import LinearGaussianPolicy
            with np.load(path) as data:
                policy = LinearGaussianPolicy(data["weights"], float(data["std"]))
            cfg = replace(cfg, optimizer="reinforce")
    exp, result = run_eval(cfg, policy=policy)
    name = exp.prompts[exp.prompt_index].name
    _write_csv(out / "eval.csv", EVAL_HEADER,
               [(name, cfg.eval_episodes, _fmt(result.success_rate),
                 _fmt(result.mean_diagnostic), cfg.seed)])
    _write_manifest(out, cfg, ["eval.csv"], "eval")
    print(f"eval: prompt={name!r} success_rate={result.success_rate:.2%} "
          f"mean_diagnostic={result.mean_diagnostic:.4f}")
    return 0


def cmd_sweep_noise(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    rows = sweep_noise(cfg)
    _write_csv(out / "sweep_noise.csv", SWEEP_NOISE_HEADER,
               [(t, _fmt(a), _fmt(m), _fmt(g)) for t, a, m, g in rows])
    _write_manifest(out, cfg, ["sweep_noise.csv"], "sweep-noise")
    print(f"sweep-noise: {len(rows)} grid points -> {out / 'sweep_noise.csv'}")
    return 0


def cmd_sweep_weights(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    rows = sweep_weights(cfg)
    _write_csv(out / "sweep_weights.csv", SWEEP_WEIGHTS_HEADER,
               [(_fmt(w1), _fmt(w2), _fmt(d), s) for w1, w2, d, s in rows])
    _write_manifest(out, cfg, ["sweep_weights.csv"], "sweep-weights")
    print(f"sweep-weights: {len(rows)} cells -> {out / 'sweep_weights.csv'}")
    return 0


def cmd_render(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    path = Path(args.episode)
    if not path.exists():
        print(f"error: episode artifact not found: {path}", file=sys.stderr)
        return 2
    ep = Episode.load(path)
    ext = "ppm" if args.ppm else "pgm"
    writer = write_ppm if args.ppm else write_pgm
    names = []
    for i, frame in enumerate(ep.observations):
        if args.scale > 1:
            frame = upscale_nearest(frame, args.scale)
        name = f"frame_{i:04d}.{ext}"
        writer(out / name, frame)
        names.append(name)
    (out / "frames_index.txt").write_text(
        "\n".join(names) + ("\n" if names else ""), encoding="utf-8")
    _write_manifest(out, cfg, names + ["frames_index.txt"], "render")
    print(f"render: {len(names)} frames -> {out}")
    return 0


def cmd_bridge_check(args) -> int:
    cfg = _load(args)
    host, _, port = cfg.bridge_endpoint.rpartition(":")
    try:
        with BridgeClient(host or "127.0.0.1", int(port)) as client:
            print(json.dumps(client.handshake, indent=2, sort_keys=True))
            frame = np.zeros((1, 8, 8, 3), dtype=np.uint8)
            align, rec = client.reward_terms(frame, "bridge check", 450, seed=cfg.seed)
            print(f"reward_terms ok: r_align={align.tolist()} r_rec={rec.tolist()}")
        return 0
    except BridgeError as e:
        print(f"bridge check failed: {e}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffreward",
        description="Text-conditioned diffusion rewards for toy policy learning")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--backend", choices=("analytic", "bridge"), default=None)
        p.add_argument("--bridge-endpoint", dest="bridge_endpoint", default=None,
                       metavar="HOST:PORT")

    p = sub.add_parser("train", help="run the training loop and write artifacts")
    common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a stored artifact or the planner")
    common(p)
    p.add_argument("--artifact", default=None, help="policy.npz from a train run")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep-noise", help="reward gap vs corruption level")
    common(p)
    p.set_defaults(fn=cmd_sweep_noise)

    p = sub.add_parser("sweep-weights", help="diagnostic return per (w1, w2) cell")
    common(p)
    p.set_defaults(fn=cmd_sweep_weights)

    p = sub.add_parser("render", help="export a stored episode as image frames")
    common(p)
    p.add_argument("--episode", required=True, help="episode.npz from a train run")
    p.add_argument("--ppm", action="store_true", help="write color PPM instead of PGM")
    p.add_argument("--scale", type=int, default=1, help="nearest-neighbor upscale factor")
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("bridge-check", help="handshake with a running bridge")
    common(p)
    p.set_defaults(fn=cmd_bridge_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, BridgeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
