"""Binary checkpoint format for networks.

Per network::

    magic   4s   b"CDNN"
    version u16
    kind    u8   0 = actor, 1 = critic
    layers  u16
    per layer: out u32, in u32, activation u8
    per layer: weights (out*in float32, row-major), biases (out float32)

All fields little-endian. A checkpoint file is the actor block followed by the
critic block.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ContractViolation
from .nets import ACTIVATIONS, MLP, Layer, NetKind

MAGIC = b"CDNN"
FORMAT_VERSION = 1
_HEAD = struct.Struct("<4sHBH")
_LAYER = struct.Struct("<IIB")
_KINDS = {NetKind.ACTOR: 0, NetKind.CRITIC: 1}
_F32 = np.dtype("<f4")


def encode_network(net: MLP) -> bytes:
    parts = [_HEAD.pack(MAGIC, FORMAT_VERSION, _KINDS[net.kind], len(net.layers))]
    for layer in net.layers:
        out, inp = layer.W.shape
        parts.append(_LAYER.pack(out, inp, ACTIVATIONS.index(layer.activation)))
    for layer in net.layers:
        parts.append(np.ascontiguousarray(layer.W, dtype=_F32).tobytes())
        parts.append(np.ascontiguousarray(layer.b, dtype=_F32).tobytes())
    return b"".join(parts)


def decode_network(buf: bytes, offset: int = 0) -> tuple[MLP, int]:
    """Parse one network block starting at ``offset``; returns (net, next offset)."""
    try:
        magic, version, kind, n_layers = _HEAD.unpack_from(buf, offset)
    except struct.error as exc:
        raise ContractViolation(f"truncated network header: {exc}") from None
    if magic != MAGIC:
        raise ContractViolation(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ContractViolation(f"unsupported checkpoint version {version}")
    if kind not in (0, 1):
        raise ContractViolation(f"bad network kind {kind}")
    offset += _HEAD.size
    specs = []
    for _ in range(n_layers):
        out, inp, act = _LAYER.unpack_from(buf, offset)
        if act >= len(ACTIVATIONS):
            raise ContractViolation(f"bad activation tag {act}")
        specs.append((out, inp, ACTIVATIONS[act]))
        offset += _LAYER.size
    for (_, inp, _), (out_prev, _, _) in zip(specs[1:], specs[:-1]):
        if inp != out_prev:
            raise ContractViolation("layer shapes do not chain")
    layers = []
    for out, inp, act in specs:
        n_w, n_b = out * inp, out
        need = offset + 4 * (n_w + n_b)
        if need > len(buf):
            raise ContractViolation("truncated network weights")
        W = np.frombuffer(buf, _F32, n_w, offset).reshape(out, inp).astype(np.float32)
        offset += 4 * n_w
        b = np.frombuffer(buf, _F32, n_b, offset).astype(np.float32)
        offset += 4 * n_b
        layers.append(Layer(W, b, act))
    net_kind = NetKind.ACTOR if kind == 0 else NetKind.CRITIC
    return MLP(layers, net_kind), offset


def encode_pair(actor: MLP, critic: MLP) -> bytes:
    return encode_network(actor) + encode_network(critic)


def decode_pair(buf: bytes, offset: int = 0) -> tuple[MLP, MLP, int]:
    actor, offset = decode_network(buf, offset)
    critic, offset = decode_network(buf, offset)
    if actor.kind is not NetKind.ACTOR or critic.kind is not NetKind.CRITIC:
        raise ContractViolation("checkpoint must hold an actor block then a critic block")
    return actor, critic, offset


def save_checkpoint(path, actor: MLP, critic: MLP) -> None:
    Path(path).write_bytes(encode_pair(actor, critic))


def load_checkpoint(path) -> tuple[MLP, MLP]:
    buf = Path(path).read_bytes()
    actor, critic, end = decode_pair(buf)
    if end != len(buf):
        raise ContractViolation(f"{len(buf) - end} trailing bytes in checkpoint")
    return actor, critic
