"""End-to-end checks against the real bridge server (skipped if not built).

Build it first: cd bridge && npm run build. These tests spawn the node
process on an ephemeral port and drive it through the public client.
"""

import shutil
import socket
import subprocess
import time
from pathlib import Path

import numpy as np
import pytest

from diffreward.envs import EnvSpec, default_prompts, prompt_frames
from diffreward.mixture import Prompt
from diffreward.remote import BridgeBackend, BridgeClient, BridgeError
from diffreward.rewards import RewardWeights, VideoRewardConfig, frame_reward, video_rewards
from diffreward.rollout import window_rng
from diffreward.schedule import NoiseLevelSampler

BRIDGE_MAIN = Path(__file__).parent.parent / "bridge" / "dist" / "main.js"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not BRIDGE_MAIN.exists(),
    reason="bridge not built (cd bridge && npm run build)")


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def bridge_port():
    port = _free_port()
    proc = subprocess.Popen(["node", str(BRIDGE_MAIN), "--port", str(port)],
                            stdout=subprocess.PIPE, stderr=subprocess.STDOUT)
    try:
        deadline = time.time() + 10
        while time.time() < deadline:
            try:
                with socket.create_connection(("127.0.0.1", port), timeout=0.2):
                    break
            except OSError:
                time.sleep(0.05)
        else:
            raise RuntimeError("bridge did not come up")
        yield port
    finally:
        proc.terminate()
        proc.wait(timeout=5)


def test_handshake_and_capabilities(bridge_port):
    with BridgeClient("127.0.0.1", bridge_port, timeout=10) as client:
        assert client.handshake["protocol_version"] == 1
        assert client.max_window == 8
        assert client.handshake["schedule_T"] == 1000


def test_reward_terms_deterministic_over_the_wire(bridge_port):
    rng = np.random.default_rng(0)
    frames = rng.integers(0, 255, (2, 32, 32, 3)).astype(np.uint8)
    with BridgeClient("127.0.0.1", bridge_port, timeout=10) as client:
        a1, r1 = client.reward_terms(frames, "a blob moving right", 520, seed=5)
        a2, r2 = client.reward_terms(frames, "a blob moving right", 520, seed=5)
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(r1, r2)
        assert a1.shape == (2,)
        assert np.all(a1 >= 0.0)


def test_frame_reward_through_bridge_backend(bridge_port):
    spec = EnvSpec()
    with BridgeClient("127.0.0.1", bridge_port, timeout=10) as client:
        backend = BridgeBackend(client)
        obs = prompt_frames(spec, default_prompts(spec)[0], None)
        terms = frame_reward(obs, Prompt(caption="a blob at the top right"),
                             backend, backend.sched, NoiseLevelSampler(400, 500),
                             RewardWeights(), window_rng(3, 0))
        assert np.isfinite(terms.r_total)
        assert terms.r_align >= 0.0


def test_video_rewards_through_bridge_backend(bridge_port):
    spec = EnvSpec(name="trajectory-world")
    with BridgeClient("127.0.0.1", bridge_port, timeout=10) as client:
        backend = BridgeBackend(client)
        frames = prompt_frames(spec, default_prompts(spec)[0], 6)
        cfg = VideoRewardConfig(4, RewardWeights(), NoiseLevelSampler(500, 600))
        out = video_rewards(frames, Prompt(caption="a blob moving right"), cfg,
                            backend, seed=8)
        assert len(out) == 6
        again = video_rewards(frames, Prompt(caption="a blob moving right"), cfg,
                              backend, seed=8)
        assert out == again


def test_bridge_rejects_malformed_via_error_response(bridge_port):
    with BridgeClient("127.0.0.1", bridge_port, timeout=10) as client:
        sock = client._sock
        from diffreward.remote import encode_message, read_message
        sock.sendall(encode_message({"op": "reward_terms", "id": 0}))
        header, _ = read_message(sock)
        assert header["id"] == 0
        assert "error" in header


def test_cli_bridge_check_against_real_bridge(bridge_port, tmp_path, capsys):
    from diffreward.cli import main
    cfg = tmp_path / "bridge.cfg"
    cfg.write_text(f"bridge_endpoint = 127.0.0.1:{bridge_port}\n"
                   f"out = {tmp_path / 'out'}\n")
    assert main(["bridge-check", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "procedural-gm-v1" in out
    assert "reward_terms ok" in out
