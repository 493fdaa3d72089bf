"""Wire protocol codec and client for the external diffusion bridge.

Framing: every message is a 4-byte big-endian length N followed by N payload
bytes. The payload is a single-line UTF-8 JSON header, a terminating
newline, then raw frame bytes whose size the header declares (zero for
frame-less messages). The server sends a handshake message immediately on
connect: {"protocol_version", "max_window", "schedule_T", "model_id", ...}.

Reward requests carry 8-bit RGB frames (row-major); the bridge encodes them
into its latent space, corrupts at the requested level with source noise
seeded by the request, and returns per-frame raw alignment / reconstruction
term sums. The client never sees latent tensors.
"""

from __future__ import annotations

import json
import socket

import numpy as np

from .mixture import Prompt
from .schedule import build_linear_schedule

PROTOCOL_VERSION = 1
MAX_MESSAGE_BYTES = 1 << 28
DEFAULT_TIMEOUT = 120.0


class BridgeError(RuntimeError):
    """Transport failure, malformed peer message, or bridge error response."""


def encode_message(header: dict, payload: bytes = b"") -> bytes:
    head = json.dumps(header, separators=(",", ":"), sort_keys=True).encode("utf-8")
    if b"\n" in head:
        raise ValueError("header must not contain newlines")
    body = head + b"\n" + payload
    if len(body) > MAX_MESSAGE_BYTES:
        raise ValueError(f"message of {len(body)} bytes exceeds limit")
    return len(body).to_bytes(4, "big") + body


def split_message(body: bytes):
    """Split one framed payload into (header dict, raw bytes)."""
    nl = body.find(b"\n")
    if nl < 0:
        raise BridgeError("malformed message: missing header terminator")
    try:
        header = json.loads(body[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise BridgeError(f"malformed message header: {e}") from None
    if not isinstance(header, dict):
        raise BridgeError("malformed message: header is not an object")
    return header, body[nl + 1:]


def decode_message(buf: bytes):
    """Decode a complete framed message from a byte string."""
    if len(buf) < 4:
        raise BridgeError("truncated message: missing length prefix")
    n = int.from_bytes(buf[:4], "big")
    if len(buf) != 4 + n:
        raise BridgeError(f"length prefix {n} does not match body of {len(buf) - 4}")
    return split_message(buf[4:])


def read_message(sock):
    """Read one framed message from a socket-like object."""
    prefix = _read_exact(sock, 4)
    n = int.from_bytes(prefix, "big")
    if n > MAX_MESSAGE_BYTES:
        raise BridgeError(f"peer announced oversized message of {n} bytes")
    return split_message(_read_exact(sock, n))


def _read_exact(sock, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = sock.recv(remaining)
        if not chunk:
            raise BridgeError("connection closed mid-message")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def encode_reward_request(req_id: int, frames_u8: np.ndarray, caption: str,
                          t_noise: int, seed: int) -> bytes:
    frames_u8 = np.ascontiguousarray(frames_u8, dtype=np.uint8)
    if frames_u8.ndim != 4 or frames_u8.shape[3] != 3:
        raise ValueError(f"frames must be (n, h, w, 3) uint8, got {frames_u8.shape}")
    n, h, w, _ = frames_u8.shape
    header = {"id": int(req_id), "op": "reward_terms", "caption": str(caption),
              "t_noise": int(t_noise), "seed": int(seed),
              "frame_count": n, "height": h, "width": w, "channels": 3}
    return encode_message(header, frames_u8.tobytes())


class BridgeClient:
    """One TCP connection with one in-flight request at a time."""

    def __init__(self, host: str, port: int, timeout: float = DEFAULT_TIMEOUT):
        self.host = host
        self.port = port
        self.timeout = timeout
        self._sock = None
        self._next_id = 1
        self.handshake = None

    def connect(self) -> dict:
        try:
            self._sock = socket.create_connection((self.host, self.port),
                                                  timeout=self.timeout)
        except OSError as e:
            raise BridgeError(f"cannot connect to bridge at {self.host}:{self.port}: {e}") from None
        header, _ = read_message(self._sock)
        for key in ("protocol_version", "max_window", "schedule_T", "model_id"):
            if key not in header:
                raise BridgeError(f"handshake missing field {key!r}: {header}")
        if header["protocol_version"] != PROTOCOL_VERSION:
            raise BridgeError(f"unsupported protocol version {header['protocol_version']}")
        self.handshake = header
        return header

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self):
        self.connect()
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def max_window(self) -> int:
        self._require_connected()
        return int(self.handshake["max_window"])

    def _require_connected(self):
        if self._sock is None or self.handshake is None:
            raise BridgeError("client is not connected")

    def reward_terms(self, frames_u8, caption: str, t_noise: int, seed: int):
        """Per-frame raw (align, rec) term arrays computed bridge-side."""
        self._require_connected()
        frames_u8 = np.asarray(frames_u8, dtype=np.uint8)
        if not 1 <= frames_u8.shape[0] <= self.max_window:
            raise BridgeError(
                f"window of {frames_u8.shape[0]} frames outside 1..{self.max_window}")
        if not 0 <= t_noise < int(self.handshake["schedule_T"]):
            raise BridgeError(f"t_noise {t_noise} outside the bridge schedule")
        req_id = self._next_id
        self._next_id += 1
        try:
            self._sock.sendall(encode_reward_request(req_id, frames_u8, caption,
                                                     t_noise, seed))
            header, _ = read_message(self._sock)
        except socket.timeout:
            raise BridgeError(f"bridge timed out after {self.timeout}s") from None
        except OSError as e:
            raise BridgeError(f"transport failure: {e}") from None
        if "error" in header:
            raise BridgeError(f"bridge error: {header['error']}")
        if header.get("id") != req_id:
            raise BridgeError(f"response id {header.get('id')} != request id {req_id}")
        align = np.asarray(header.get("r_align", []), dtype=np.float64)
        rec = np.asarray(header.get("r_rec", []), dtype=np.float64)
        if align.shape != (frames_u8.shape[0],) or rec.shape != (frames_u8.shape[0],):
            raise BridgeError("response term arrays do not match the frame count")
        return align, rec


def remote_reward_terms(frames_u8, prompt: Prompt, t_noise: int,
                        client: BridgeClient, seed: int = 0):
    """Raw per-frame reward terms for a caption prompt via a connected bridge."""
    if prompt.caption is None:
        raise ValueError("bridge requests need a caption prompt")
    return client.reward_terms(frames_u8, prompt.caption, t_noise, seed)


class BridgeBackend:
    """Reward-engine adapter: grayscale unit frames in, raw term sums out.

    Frames are upscaled (nearest-neighbor) to the bridge's native resolution
    and tiled to RGB before shipping; the bridge samples its own latent-space
    source noise from the request seed.
    """

    def __init__(self, client: BridgeClient):
        client._require_connected()
        self.client = client
        self.sched = build_linear_schedule(int(client.handshake["schedule_T"]),
                                           1e-4, 0.02)
        res = client.handshake.get("native_resolution", [64, 64])
        self.native_hw = (int(res[0]), int(res[1]))

    @property
    def max_window(self) -> int:
        return self.client.max_window

    def _prepare(self, frames) -> np.ndarray:
        from .envs import to_u8, upscale_nearest
        frames = np.asarray(frames, dtype=np.float64)
        factor = max(1, self.native_hw[0] // frames.shape[1])
        out = []
        for fr in frames:
            u8 = to_u8(upscale_nearest(fr, factor))
            out.append(np.repeat(u8[:, :, None], 3, axis=2))
        return np.stack(out)

    def window_reward_terms(self, frames, prompt: Prompt, t: int, seed: int):
        if prompt.caption is None:
            raise ValueError("bridge backend needs caption prompts")
        return self.client.reward_terms(self._prepare(frames), prompt.caption,
                                        t, seed)
