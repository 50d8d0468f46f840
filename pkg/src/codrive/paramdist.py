"""Leader/follower parameter distribution keyed on average reward.

Wire format of a packet (little-endian)::

    sender u32 | averageReward f64 | episode u32 | step u32 | actor block | critic block

where the blocks use the network checkpoint format.
"""

from __future__ import annotations

import logging
import math
import struct
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .coddpg.checkpoint import FORMAT_VERSION, decode_pair, encode_pair
from .coddpg.nets import MLP
from .errors import ConfigError, ContractViolation
from .vanet import Vanet

log = logging.getLogger(__name__)

_PREFIX = struct.Struct("<IdII")


class Role(str, Enum):
    LEADER = "LEADER"
    FOLLOWER = "FOLLOWER"


class Mode(str, Enum):
    LEARN = "LEARN"
    WAIT = "WAIT"


@dataclass(frozen=True)
class DistributionPolicy:
    trigger_step: int = 100
    repeat: bool = True  # False: only at t == trigger_step
    wait_threshold: float = 1.0
    forwarding: bool = True
    window: int = 100

    def validate(self) -> "DistributionPolicy":
        if self.trigger_step < 1:
            raise ConfigError("trigger_step must be >= 1")
        if self.window < 1:
            raise ConfigError("reward window must hold at least one step")
        return self

    def triggers(self, t: int) -> bool:
        if self.repeat:
            return t > 0 and t % self.trigger_step == 0
        return t == self.trigger_step


@dataclass(frozen=True)
class ParameterPacket:
    """Immutable snapshot; networks are stored serialized and decoded on access."""

    sender: int
    role: Role
    average_reward: float
    episode: int
    step: int
    payload: bytes
    version: int = FORMAT_VERSION

    @classmethod
    def build(cls, sender, role, average_reward, episode, step, actor: MLP, critic: MLP) -> "ParameterPacket":
        if not math.isfinite(average_reward):
            raise ValueError(f"average reward must be finite, got {average_reward}")
        return cls(sender, Role(role), float(average_reward), episode, step, encode_pair(actor, critic))

    def networks(self) -> tuple[MLP, MLP]:
        actor, critic, _ = decode_pair(self.payload)
        return actor, critic

    def to_bytes(self) -> bytes:
        return _PREFIX.pack(self.sender, self.average_reward, self.episode, self.step) + self.payload

    @classmethod
    def from_bytes(cls, buf: bytes, role: Role = Role.LEADER) -> "ParameterPacket":
        sender, avg, episode, step = _PREFIX.unpack_from(buf, 0)
        payload = bytes(buf[_PREFIX.size :])
        _, _, end = decode_pair(payload)
        if end != len(payload):
            raise ContractViolation("trailing bytes after packet payload")
        return cls(sender, Role(role), avg, episode, step, payload)


def average_reward(window: Sequence[float]) -> float:
    if len(window) == 0:
        raise ValueError("average reward undefined for an empty window")
    return math.fsum(window) / len(window)


def learn_or_wait(is_leader: bool, budget: float, policy: DistributionPolicy) -> Mode:
    if is_leader:
        return Mode.LEARN
    return Mode.LEARN if budget >= policy.wait_threshold else Mode.WAIT


@dataclass
class Decision:
    adopted: ParameterPacket | None
    forward: bool
    tag: float
    discarded: list = field(default_factory=list)


def validate_packet(packet: ParameterPacket, actor: MLP, critic: MLP) -> tuple[MLP, MLP]:
    """Decode and shape-check a packet against the receiver's own networks."""
    if packet.version != FORMAT_VERSION:
        raise ContractViolation(f"packet version {packet.version} != {FORMAT_VERSION}")
    p_actor, p_critic = packet.networks()
    if p_actor.shapes() != actor.shapes() or p_critic.shapes() != critic.shapes():
        raise ContractViolation(f"packet from {packet.sender} has mismatched layer shapes")
    return p_actor, p_critic


def receive_and_select(
    own_avg: float, packets: Iterable[ParameterPacket], mode: Mode, actor: MLP, critic: MLP
) -> tuple[Decision, tuple[MLP, MLP] | None]:
    """Pick the packet to adopt, if any.

    Returns the decision and the decoded networks to install (None when the
    agent keeps its own). Malformed packets are dropped before selection.
    """
    valid, discarded = [], []
    for p in packets:
        try:
            valid.append((p, validate_packet(p, actor, critic)))
        except ContractViolation as exc:
            log.warning("discarding packet from %s: %s", p.sender, exc)
            discarded.append(p)
    if not valid:
        return Decision(None, False, own_avg, discarded), None
    best, nets = max(valid, key=lambda pv: (pv[0].average_reward, -pv[0].sender))
    if mode is Mode.WAIT or best.average_reward > own_avg:
        return Decision(best, False, best.average_reward, discarded), nets
    return Decision(None, True, own_avg, discarded), None


# -- in-process exchange ---------------------------------------------------


@dataclass
class CoopNode:
    """One participant: its learner plus the reward window it advertises."""

    agent: object  # anything with .id, .actor, .critic, .snapshot(), .adopt()
    window: deque
    budget: float = math.inf
    adoptions: int = 0

    @property
    def id(self) -> int:
        return self.agent.id

    def average(self) -> float:
        return average_reward(self.window)

    def install(self, packet: ParameterPacket, nets: tuple[MLP, MLP]) -> None:
        self.agent.adopt(*nets)
        # the adopted parameters now carry the sender's score
        self.window.clear()
        self.window.append(packet.average_reward)
        self.adoptions += 1


def make_node(agent, policy: DistributionPolicy, budget: float = math.inf) -> CoopNode:
    return CoopNode(agent, deque(maxlen=policy.window), budget)


def distribute_parameters(node: CoopNode, followers: list[int], t: int, episode: int, policy: DistributionPolicy,
                          vanet_open: bool) -> list[tuple[int, ParameterPacket]]:
    """Packets a leader sends at step ``t``: one identical packet per follower."""
    if not policy.triggers(t) or not vanet_open or not followers or not node.window:
        return []
    actor, critic = node.agent.snapshot()
    packet = ParameterPacket.build(node.id, Role.LEADER, node.average(), episode, t, actor, critic)
    return [(f, packet) for f in followers]


def exchange_round(nodes: dict[int, CoopNode], vanet: Vanet, t: int, episode: int, policy: DistributionPolicy) -> dict:
    """Run one distribution round between training steps.

    Leaders broadcast from a snapshot taken at the start of the round; each
    follower adopts or answers with its own packet; leaders then consider the
    answers under the same strict rule. Packets only cross VANET edges.
    """
    inbox: dict[int, list[ParameterPacket]] = {vid: [] for vid in nodes}
    for vid, node in nodes.items():
        followers = [f for f in vanet.followers_of(vid) if f in nodes] if vid in vanet.members else []
        for dest, packet in distribute_parameters(node, followers, t, episode, policy, vanet.is_open(vid)):
            inbox[dest].append(packet)
    sent = sum(len(v) for v in inbox.values())
    answers: dict[int, list[ParameterPacket]] = {vid: [] for vid in nodes}
    adopted = []
    for vid in sorted(inbox):
        packets = inbox[vid]
        if not packets:
            continue
        node = nodes[vid]
        is_leader = bool(vanet.followers_of(vid))
        mode = learn_or_wait(is_leader, node.budget, policy)
        own = node.average() if node.window else -math.inf
        decision, nets = receive_and_select(own, packets, mode, node.agent.actor, node.agent.critic)
        if nets is not None:
            node.install(decision.adopted, nets)
            adopted.append((vid, decision.adopted.sender))
        elif decision.forward and policy.forwarding and node.window:
            actor, critic = node.agent.snapshot()
            reply = ParameterPacket.build(vid, Role.FOLLOWER, own, episode, t, actor, critic)
            for p in packets:
                answers[p.sender].append(reply)
    for vid in sorted(answers):
        packets = answers[vid]
        if not packets:
            continue
        node = nodes[vid]
        own = node.average() if node.window else -math.inf
        decision, nets = receive_and_select(own, packets, Mode.LEARN, node.agent.actor, node.agent.critic)
        if nets is not None:
            node.install(decision.adopted, nets)
            adopted.append((vid, decision.adopted.sender))
    return {"sent": sent, "answers": sum(len(v) for v in answers.values()), "adopted": adopted}
