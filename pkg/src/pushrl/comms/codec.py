"""Binary wire format.

Frame layout (integers big-endian)::

    length:u32 | kind:u8 | sender_id:u32 | version:u64 | payload[length]

Numeric vectors inside payloads are written as ``count:u32 (big-endian)``
followed by ``count`` little-endian float32 values.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass

import numpy as np

from pushrl.types import ParamSet, Trajectory

HEADER = struct.Struct(">IBIQ")
HEADER_SIZE = HEADER.size  # 17
MAX_PAYLOAD = 2 ** 32 - HEADER_SIZE
_U32 = struct.Struct(">I")
_F32LE = np.dtype("<f4")


class CodecError(ValueError):
    pass


class Kind(enum.IntEnum):
    TRAJECTORY = 1
    PARAMS = 2
    CONTROL = 3


@dataclass(frozen=True)
class Envelope:
    kind: Kind
    sender_id: int
    version: int
    payload: bytes = b""

    @property
    def length_prefix(self) -> int:
        return len(self.payload)


def encode(e: Envelope) -> bytes:
    n = len(e.payload)
    if n > MAX_PAYLOAD:
        raise CodecError(f"payload of {n} bytes exceeds the {MAX_PAYLOAD}-byte limit")
    if not 0 <= e.sender_id < 2 ** 32 or not 0 <= e.version < 2 ** 64:
        raise CodecError("sender_id or version out of range")
    return HEADER.pack(n, int(e.kind), e.sender_id, e.version) + bytes(e.payload)


def decode_header(header: bytes) -> tuple[int, Kind, int, int]:
    length, kind, sender, version = HEADER.unpack(header)
    try:
        kind = Kind(kind)
    except ValueError:
        raise CodecError(f"unknown kind tag {kind}") from None
    return length, kind, sender, version


def decode(frame: bytes) -> Envelope:
    if len(frame) < HEADER_SIZE:
        raise CodecError("truncated header")
    length, kind, sender, version = decode_header(frame[:HEADER_SIZE])
    if len(frame) != HEADER_SIZE + length:
        raise CodecError(f"frame length {len(frame)} disagrees with prefix {length}")
    return Envelope(kind, sender, version, bytes(frame[HEADER_SIZE:]))


# --- payload helpers -------------------------------------------------------

def pack_vector(v) -> bytes:
    a = np.ascontiguousarray(v, dtype=_F32LE).ravel()
    return _U32.pack(a.size) + a.tobytes()


def unpack_vector(buf: memoryview, off: int) -> tuple[np.ndarray, int]:
    """Read-only float32 view into ``buf`` (no copy) and the offset past it."""
    (n,) = _U32.unpack_from(buf, off)
    off += 4
    end = off + 4 * n
    if end > len(buf):
        raise CodecError("vector runs past end of payload")
    return np.frombuffer(buf[off:end], dtype=_F32LE), end


def encode_trajectory(traj: Trajectory) -> Envelope:
    """Trajectory payload: ``obs_dim:u32 | produced_at:u64`` then five vectors."""
    head = struct.pack(">IQ", traj.obs_dim, traj.produced_at)
    body = b"".join(pack_vector(v) for v in (
        traj.states, traj.actions, traj.rewards, traj.next_states, traj.dones))
    return Envelope(Kind.TRAJECTORY, traj.actor_id, traj.policy_version, head + body)


def decode_trajectory(e: Envelope) -> Trajectory:
    """Observation and reward columns are float32 views into the payload; whoever
    stores them (the replay buffer) converts while copying."""
    if e.kind is not Kind.TRAJECTORY:
        raise CodecError(f"expected trajectory envelope, got {e.kind.name}")
    buf = memoryview(e.payload)
    obs_dim, produced_at = struct.unpack_from(">IQ", buf, 0)
    off = 12
    cols = []
    for _ in range(5):
        v, off = unpack_vector(buf, off)
        cols.append(v)
    states, actions, rewards, next_states, dones = cols
    return Trajectory(states.reshape(-1, obs_dim), actions.astype(np.int64), rewards,
                      next_states.reshape(-1, obs_dim), dones.astype(bool),
                      policy_version=e.version, actor_id=e.sender_id, produced_at=produced_at)


def encode_params(p: ParamSet, sender_id: int = 0) -> Envelope:
    head = _U32.pack(len(p.layout)) + b"".join(_U32.pack(n) for n in p.layout)
    return Envelope(Kind.PARAMS, sender_id, p.version, head + pack_vector(p.theta))


def decode_params(e: Envelope) -> ParamSet:
    if e.kind is not Kind.PARAMS:
        raise CodecError(f"expected params envelope, got {e.kind.name}")
    buf = memoryview(e.payload)
    (n_layers,) = _U32.unpack_from(buf, 0)
    layout = tuple(_U32.unpack_from(buf, 4 + 4 * i)[0] for i in range(n_layers))
    theta, _ = unpack_vector(buf, 4 + 4 * n_layers)
    return ParamSet(theta.astype(np.float64), e.version, layout)


def encode_control(msg: dict, sender_id: int = 0, version: int = 0) -> Envelope:
    return Envelope(Kind.CONTROL, sender_id, version, json.dumps(msg).encode())


def decode_control(e: Envelope) -> dict:
    if e.kind is not Kind.CONTROL:
        raise CodecError(f"expected control envelope, got {e.kind.name}")
    return json.loads(e.payload.decode())
