"""Ad-hoc vehicle network: discovery from relative distances, lifecycle, roles.

Nothing here ever sees a coordinate. Discovery scans the opponent sensor
readings; pairwise distances come from a caller-supplied function that returns
sensor-derived relative distances.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable

import numpy as np

from .errors import ConfigError

log = logging.getLogger(__name__)

DistanceFn = Callable[[int, int], float]


class Relation(str, Enum):
    LEADER_OF = "LEADER_OF"
    FOLLOWER_OF = "FOLLOWER_OF"
    PEER = "PEER"

    def inverse(self) -> "Relation":
        if self is Relation.LEADER_OF:
            return Relation.FOLLOWER_OF
        if self is Relation.FOLLOWER_OF:
            return Relation.LEADER_OF
        return Relation.PEER


class Discovery(str, Enum):
    NONE = "none"
    OPENED = "opened"
    IDENTIFY = "identify"


@dataclass(frozen=True)
class VanetConfig:
    radius: float = 200.0

    def validate(self) -> "VanetConfig":
        if not 0.0 < self.radius <= 200.0:
            raise ConfigError(f"VANET radius {self.radius} must lie in (0, 200]")
        return self


@dataclass
class ResourceBudget:
    vehicle_id: int
    units: float

    def consume(self, n: float = 1.0) -> None:
        self.units = max(0.0, self.units - n)

    def replenish(self, n: float) -> None:
        self.units += n


@dataclass
class NeighborInfo:
    distance: float
    relation: Relation
    recorded_at: int


@dataclass
class Membership:
    vehicle_id: int
    opened: bool = False
    inside: bool = False
    neighbors: dict[int, NeighborInfo] = field(default_factory=dict)
    local_list: set[int] = field(default_factory=set)

    @property
    def in_vanet(self) -> bool:
        return self.opened or self.inside


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    distance: float
    relation: Relation  # from a's point of view


@dataclass(frozen=True)
class VanetSnapshot:
    t: int
    edges: tuple[Edge, ...]
    flags: tuple[tuple[int, bool, bool], ...]


class Vanet:
    def __init__(self, cfg: VanetConfig | None = None):
        self.cfg = (cfg or VanetConfig()).validate()
        self.members: dict[int, Membership] = {}
        self.t = 0

    # -- membership -----------------------------------------------------

    def register(self, vid: int) -> Membership:
        return self.members.setdefault(vid, Membership(vid))

    def initialize(self, ids: Iterable[int]) -> None:
        """Fresh network state for a new episode."""
        self.members = {}
        self.t = 0
        for vid in ids:
            self.register(vid)

    def member(self, vid: int) -> Membership:
        return self.members[vid]

    def neighbors(self, vid: int) -> set[int]:
        return set(self.members[vid].neighbors)

    def is_open(self, vid: int) -> bool:
        m = self.members.get(vid)
        return bool(m and m.in_vanet and m.neighbors)

    def followers_of(self, vid: int) -> list[int]:
        return sorted(n for n, info in self.members[vid].neighbors.items() if info.relation is Relation.LEADER_OF)

    def leaders_of(self, vid: int) -> list[int]:
        return sorted(n for n, info in self.members[vid].neighbors.items() if info.relation is Relation.FOLLOWER_OF)

    def open(self, vid: int) -> None:
        m = self.members[vid]
        if m.in_vanet:
            log.warning("vehicle %s already in a VANET; open ignored", vid)
            return
        m.opened = True

    def close(self, vid: int) -> None:
        m = self.members[vid]
        for nb in list(m.neighbors):
            self._unlink(vid, nb)
        m.opened = m.inside = False
        m.local_list.clear()

    def leave(self, vid: int) -> bool:
        """Disconnect ``vid``; neighbors left alone close their network."""
        m = self.members[vid]
        if not m.in_vanet:
            log.warning("vehicle %s is in no VANET; leave is a no-op", vid)
            return False
        former = list(m.neighbors)
        for nb in former:
            self._unlink(vid, nb)
        m.opened = m.inside = False
        m.local_list.clear()
        for nb in former:
            if not self.members[nb].neighbors:
                self.close(nb)
        return True

    def _link(self, a: int, b: int, distance: float) -> None:
        ma, mb = self.members[a], self.members[b]
        ma.neighbors[b] = NeighborInfo(distance, Relation.PEER, self.t)
        mb.neighbors[a] = NeighborInfo(distance, Relation.PEER, self.t)
        ma.local_list.add(b)
        mb.local_list.add(a)
        ma.inside = mb.inside = True

    def _unlink(self, a: int, b: int) -> None:
        self.members[a].neighbors.pop(b, None)
        self.members[b].neighbors.pop(a, None)
        self.members[a].local_list.discard(b)
        self.members[b].local_list.discard(a)

    # -- discovery ------------------------------------------------------

    def check_radius(self, vid: int, opponents: np.ndarray) -> Discovery:
        """Scan one vehicle's opponent readings; open or identify as appropriate."""
        if not np.any(np.asarray(opponents) < self.cfg.radius):
            return Discovery.NONE
        m = self.members[vid]
        if not m.opened and not m.inside:
            self.open(vid)
            return Discovery.OPENED
        return Discovery.IDENTIFY

    def identify_neighbors(self, candidates: Iterable[int], distance: DistanceFn) -> list[tuple[int, int]]:
        """Symmetrically link every unlinked in-range pair among ``candidates``.

        Returns the new edges (empty when nothing was identified).
        """
        ids = sorted(candidates)
        new = []
        for i, a in enumerate(ids):
            for b in ids[i + 1 :]:
                if b in self.members[a].neighbors:
                    continue
                d = float(distance(a, b))
                if d < self.cfg.radius:
                    self._link(a, b, d)
                    new.append((a, b))
        return new

    def maintain(self, distance: DistanceFn) -> list[tuple[int, int]]:
        """Refresh edge distances, drop out-of-range edges, close lone members."""
        dropped = []
        for a, m in self.members.items():
            for b in list(m.neighbors):
                if a > b:
                    continue
                d = float(distance(a, b))
                if d >= self.cfg.radius:
                    self._unlink(a, b)
                    dropped.append((a, b))
                else:
                    self.members[a].neighbors[b].distance = d
                    self.members[a].neighbors[b].recorded_at = self.t
                    self.members[b].neighbors[a].distance = d
                    self.members[b].neighbors[a].recorded_at = self.t
        for vid, m in self.members.items():
            if m.in_vanet and not m.neighbors:
                self.close(vid)
        return dropped

    def scan(self, frames: dict[int, np.ndarray], distance: DistanceFn, budgets: dict[int, float], t: int):
        """One step of network upkeep for the vehicles whose opponent readings are given."""
        self.t = t
        for vid, opponents in frames.items():
            self.register(vid)
            self.check_radius(vid, opponents)
        active = [vid for vid in frames if self.members[vid].in_vanet]
        new_edges = self.identify_neighbors(active, distance)
        newcomers: dict[int, list[int]] = {}
        for a, b in new_edges:
            newcomers.setdefault(a, []).append(b)
        for vid, nbs in sorted(newcomers.items()):
            self.assign_roles(vid, nbs, budgets)
        self.maintain(distance)
        return new_edges

    # -- roles ----------------------------------------------------------

    def assign_roles(self, newcomer: int, neighbors: Iterable[int], budgets: dict[int, float]) -> dict:
        """Per-pair leader/follower assignment by remaining resources.

        A neighbor that already follows someone replies with its leaders; the
        replies are returned (and recorded in the newcomer's local list).
        Ties go to the lower id; unknown budgets count as 0.
        """
        replies = {}
        mine = float(budgets.get(newcomer, 0.0))
        for nb in neighbors:
            if nb not in self.members[newcomer].neighbors:
                continue
            leaders = [x for x in self.leaders_of(nb) if x != newcomer]
            if leaders:
                replies[nb] = leaders
                self.members[newcomer].local_list.update(leaders)
            theirs = float(budgets.get(nb, 0.0))
            newcomer_leads = mine > theirs or (mine == theirs and newcomer < nb)
            rel = Relation.LEADER_OF if newcomer_leads else Relation.FOLLOWER_OF
            self.members[newcomer].neighbors[nb].relation = rel
            self.members[nb].neighbors[newcomer].relation = rel.inverse()
        return replies

    # -- views ----------------------------------------------------------

    def edges(self) -> list[Edge]:
        out = []
        for a in sorted(self.members):
            for b, info in sorted(self.members[a].neighbors.items()):
                if a < b:
                    out.append(Edge(a, b, info.distance, info.relation))
        return out

    def snapshot(self) -> VanetSnapshot:
        flags = tuple((vid, m.opened, m.inside) for vid, m in sorted(self.members.items()))
        return VanetSnapshot(self.t, tuple(self.edges()), flags)

    def components(self) -> list[set[int]]:
        seen, comps = set(), []
        for start in sorted(self.members):
            if start in seen or not self.members[start].in_vanet:
                continue
            comp, stack = set(), [start]
            while stack:
                v = stack.pop()
                if v in comp:
                    continue
                comp.add(v)
                stack.extend(self.members[v].neighbors)
            seen |= comp
            comps.append(comp)
        return comps

    def topology_lines(self) -> list[str]:
        """``t,idA,idB,distance,relation`` per edge, for the optional topology dump."""
        return [f"{self.t},{e.a},{e.b},{e.distance:.6f},{e.relation.value}" for e in self.edges()]
