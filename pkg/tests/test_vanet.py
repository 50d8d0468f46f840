import numpy as np
import pytest

from codrive.errors import ConfigError
from codrive.vanet import Discovery, Relation, Vanet, VanetConfig


def dist_fn(pos):
    def d(a, b):
        return float(np.linalg.norm(pos[a] - pos[b]))
    return d


def opponent_readings(pos, vid, cap=200.0):
    """Stand-in for the sector sensors: the nearest other vehicle in every sector."""
    others = [np.linalg.norm(pos[vid] - p) for j, p in pos.items() if j != vid]
    return np.full(36, min([cap, *others]))


def scan_all(net, pos, budgets, t):
    frames = {vid: opponent_readings(pos, vid) for vid in pos}
    return net.scan(frames, dist_fn(pos), budgets, t)


def check_invariants(net, pos, radius):
    d = dist_fn(pos)
    for a, m in net.members.items():
        for b, info in m.neighbors.items():
            other = net.members[b].neighbors
            assert a in other, "neighbor symmetry"
            assert info.distance < radius and info.recorded_at == net.t, "radius soundness"
            assert info.distance == pytest.approx(d(a, b), abs=1e-12)
            assert other[a].relation is info.relation.inverse(), "role antisymmetry"
        if m.in_vanet:
            assert m.neighbors, "lone member left open"
    for comp in net.components():
        assert len(comp) >= 2


def test_no_readings_in_range_does_nothing():
    net = Vanet(VanetConfig(200.0))
    net.initialize([0])
    assert net.check_radius(0, np.full(36, 200.0)) is Discovery.NONE
    assert not net.member(0).in_vanet


def test_first_contact_opens_then_identifies():
    net = Vanet()
    net.initialize([0])
    readings = np.full(36, 200.0)
    readings[4] = 150.0
    assert net.check_radius(0, readings) is Discovery.OPENED
    assert net.member(0).opened
    assert net.check_radius(0, readings) is Discovery.IDENTIFY


def test_identify_symmetric_and_radius_gated():
    net = Vanet()
    net.initialize([0, 1, 2])
    table = {(0, 1): 250.0, (0, 2): 100.0, (1, 2): 300.0}
    new = net.identify_neighbors([0, 1, 2], lambda a, b: table[(a, b)])
    assert new == [(0, 2)]
    assert net.neighbors(0) == {2} and net.neighbors(2) == {0}
    assert net.neighbors(1) == set()


def test_chain_example():
    net = Vanet()
    net.initialize("ABC")
    table = {("A", "B"): 100.0, ("B", "C"): 100.0, ("A", "C"): 250.0}
    net.identify_neighbors("ABC", lambda a, b: table[(a, b)])
    assert {(e.a, e.b) for e in net.edges()} == {("A", "B"), ("B", "C")}


def test_roles_by_budget_ties_to_lower_id():
    net = Vanet()
    net.initialize([0, 1, 2])
    net.identify_neighbors([0, 1, 2], lambda a, b: 50.0)
    net.assign_roles(0, [1, 2], {0: 5.0, 1: 9.0, 2: 5.0})
    assert net.member(0).neighbors[1].relation is Relation.FOLLOWER_OF
    assert net.member(1).neighbors[0].relation is Relation.LEADER_OF
    assert net.member(0).neighbors[2].relation is Relation.LEADER_OF
    assert net.followers_of(0) == [2] and net.leaders_of(0) == [1]


def test_existing_follower_replies_with_its_leaders():
    net = Vanet()
    net.initialize([0, 1, 2])
    net.identify_neighbors([0, 1], lambda a, b: 50.0)
    net.assign_roles(0, [1], {0: 9.0, 1: 1.0})
    net.identify_neighbors([0, 1, 2], lambda a, b: 50.0)
    replies = net.assign_roles(2, [1], {0: 9.0, 1: 1.0, 2: 0.5})
    assert replies == {1: [0]}
    assert 0 in net.member(2).local_list


def test_leave_closes_orphaned_neighbor():
    net = Vanet()
    net.initialize([0, 1])
    pos = {0: np.zeros(2), 1: np.array([50.0, 0.0])}
    scan_all(net, pos, {}, 1)
    assert net.is_open(0) and net.is_open(1)
    assert net.leave(0)
    assert not net.member(1).in_vanet and not net.member(0).in_vanet
    assert not net.leave(0)


def test_radius_must_not_exceed_sensing_range():
    with pytest.raises(ConfigError):
        VanetConfig(250.0).validate()
    with pytest.raises(ConfigError):
        VanetConfig(0.0).validate()


@pytest.mark.parametrize("radius", [200.0, 120.0])
def test_properties_under_random_mobility(radius):
    rng = np.random.default_rng(int(radius))
    n = 8
    pos = {i: rng.uniform(0, 600, 2) for i in range(n)}
    vel = {i: rng.normal(0, 8, 2) for i in range(n)}
    budgets = {i: float(rng.integers(0, 4)) for i in range(n)}
    net = Vanet(VanetConfig(radius))
    net.initialize(range(n))
    present = set(range(n))
    for t in range(1, 1001):
        for i in present:
            vel[i] = 0.9 * vel[i] + rng.normal(0, 3, 2)
            pos[i] = np.clip(pos[i] + vel[i], 0, 600)
        # occasional departures and re-entries
        if rng.random() < 0.02:
            vid = int(rng.choice(sorted(present)))
            if net.member(vid).in_vanet:
                net.leave(vid)
            present.discard(vid)
        elif rng.random() < 0.02 and len(present) < n:
            present.add(int(rng.choice(sorted(set(range(n)) - present))))
        live = {i: pos[i] for i in present}
        frames = {vid: opponent_readings(live, vid) for vid in live}
        net.scan(frames, dist_fn(live), budgets, t)
        check_invariants(net, live, radius)
        # every in-range pair of present vehicles is linked after upkeep
        d = dist_fn(live)
        for a in present:
            for b in present:
                if a < b and d(a, b) < radius:
                    assert b in net.neighbors(a)


def test_snapshot_and_topology_lines():
    net = Vanet()
    net.initialize([0, 1])
    pos = {0: np.zeros(2), 1: np.array([30.0, 40.0])}
    scan_all(net, pos, {0: 2.0, 1: 1.0}, 7)
    snap = net.snapshot()
    assert snap.t == 7 and len(snap.edges) == 1
    assert net.topology_lines() == ["7,0,1,50.000000,LEADER_OF"]
