"""Hungarian and min cost flow against brute-force oracles."""
import itertools

import numpy as np
import pytest

from scd.errors import Infeasible, NonFiniteCost
from scd.solvers import FlowNetwork, hungarian, solve_mcf


def brute_force_assignment(c):
    n, m = c.shape
    best = None
    for perm in itertools.permutations(range(m), n):
        total = sum(c[i, perm[i]] for i in range(n))
        if best is None or total < best:
            best = total
    return best


def enumerate_mcf(net):
    """Exhaustive integral-flow search; None when infeasible."""
    ranges = [range(a.lower, a.capacity + 1) for a in net.arcs]
    best = None
    for combo in itertools.product(*ranges):
        balance = list(net.supply)
        for f, a in zip(combo, net.arcs):
            balance[a.tail] -= f
            balance[a.head] += f
        if any(balance):
            continue
        cost = sum(f * a.cost for f, a in zip(combo, net.arcs))
        if best is None or cost < best:
            best = cost
    return best


def test_diagonal_identity():
    c = np.ones((3, 3))
    np.fill_diagonal(c, 0.0)
    assign, total = hungarian(c)
    assert assign.tolist() == [0, 1, 2]
    assert total == 0.0


def test_rectangular_cheap_cells():
    assign, total = hungarian(np.array([[9.0, 2, 9, 9], [1, 9, 9, 9]]))
    assert assign.tolist() == [1, 0]
    assert total == 3.0


def test_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(60):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(n, 7))
        c = rng.random((n, m))
        assign, total = hungarian(c)
        assert len(set(assign.tolist())) == n
        assert abs(total - brute_force_assignment(c)) < 1e-9


def test_row_constant_invariance():
    rng = np.random.default_rng(5)
    c = rng.random((5, 5))
    assign, total = hungarian(c)
    shifted = c.copy()
    shifted[2] += 7.5
    assign2, total2 = hungarian(shifted)
    assert assign2.tolist() == assign.tolist()
    assert abs(total2 - (total + 7.5)) < 1e-9


def test_rejects_non_finite():
    with pytest.raises(NonFiniteCost):
        hungarian(np.array([[0.0, np.inf]]))


def test_rejects_wide_rows():
    with pytest.raises(ValueError):
        hungarian(np.zeros((3, 2)))


def test_mcf_single_arc():
    net = FlowNetwork(n_nodes=2, arcs=[], supply=[1, -1])
    net.add_arc(0, 1, capacity=1, cost=2.5)
    r = solve_mcf(net)
    assert r.flows.tolist() == [1]
    assert r.total_cost == 2.5


def test_mcf_lower_bound_forces_expensive_arc():
    # 3 units must cross; the expensive arc's lower bound forces all of them
    # through it even though a cheaper parallel arc exists.
    net = FlowNetwork(n_nodes=2, arcs=[], supply=[3, -3])
    net.add_arc(0, 1, capacity=3, cost=1.0)
    net.add_arc(0, 1, capacity=3, lower=3, cost=10.0)
    r = solve_mcf(net)
    assert r.flows.tolist() == [0, 3]
    assert r.total_cost == 30.0
    assert enumerate_mcf(net) == 30.0


def test_mcf_infeasible_capacity():
    net = FlowNetwork(n_nodes=2, arcs=[], supply=[2, -2])
    net.add_arc(0, 1, capacity=1, cost=0.0)
    with pytest.raises(Infeasible) as err:
        solve_mcf(net)
    assert "cut" in str(err.value)


def _random_network(rng):
    n = int(rng.integers(2, 5))
    net = None
    while net is None:
        arcs = []
        for _ in range(int(rng.integers(1, 7))):
            a, b = rng.integers(0, n, size=2)
            if a == b:
                continue
            cap = int(rng.integers(0, 4))
            arcs.append((int(a), int(b), cap, int(rng.integers(0, cap + 1)),
                         float(np.round(rng.uniform(-2, 5), 3))))
        if not arcs:
            continue
        supply = rng.integers(-2, 3, size=n)
        supply[-1] -= supply.sum()
        net = FlowNetwork(n_nodes=n, arcs=[], supply=[int(s) for s in supply])
        for a, b, cap, low, cost in arcs:
            net.add_arc(a, b, capacity=cap, lower=low, cost=cost)
    return net


def test_mcf_matches_enumeration_on_random_networks():
    rng = np.random.default_rng(7)
    feasible = 0
    for _ in range(150):
        net = _random_network(rng)
        expected = enumerate_mcf(net)
        try:
            r = solve_mcf(net)
        except Infeasible:
            assert expected is None
            continue
        assert expected is not None
        assert abs(r.total_cost - expected) < 1e-9
        balance = list(net.supply)
        for f, a in zip(r.flows.tolist(), net.arcs):
            assert a.lower <= f <= a.capacity
            balance[a.tail] -= f
            balance[a.head] += f
        assert not any(balance)
        feasible += 1
    assert feasible >= 20


def test_mcf_equals_hungarian_on_assignment_networks():
    rng = np.random.default_rng(13)
    for _ in range(50):
        c = rng.random((5, 5))
        _, want = hungarian(c)
        net = FlowNetwork(n_nodes=10, arcs=[], supply=[1] * 5 + [-1] * 5)
        for i in range(5):
            for j in range(5):
                net.add_arc(i, 5 + j, capacity=1, cost=float(c[i, j]))
        r = solve_mcf(net)
        assert abs(r.total_cost - want) < 1e-9


def test_mcf_lower_bound_transform_agrees():
    # Solving directly must match a hand-transformed network without lower
    # bounds plus the forced base cost.
    rng = np.random.default_rng(3)
    for _ in range(30):
        net = _random_network(rng)
        base_cost = sum(a.lower * a.cost for a in net.arcs)
        supply = list(net.supply)
        for a in net.arcs:
            supply[a.tail] -= a.lower
            supply[a.head] += a.lower
        stripped = FlowNetwork(n_nodes=net.n_nodes, arcs=[], supply=supply)
        for a in net.arcs:
            stripped.add_arc(a.tail, a.head, capacity=a.capacity - a.lower, cost=a.cost)
        try:
            direct = solve_mcf(net)
        except Infeasible:
            with pytest.raises(Infeasible):
                solve_mcf(stripped)
            continue
        transformed = solve_mcf(stripped)
        assert abs(direct.total_cost - (transformed.total_cost + base_cost)) < 1e-9


def test_mcf_deterministic():
    rng = np.random.default_rng(23)
    net = _random_network(rng)
    try:
        first = solve_mcf(net)
        second = solve_mcf(net)
    except Infeasible:
        return
    assert first.flows.tolist() == second.flows.tolist()


def test_network_validation():
    with pytest.raises(ValueError):
        FlowNetwork(n_nodes=2, arcs=[], supply=[1, 0])
    net = FlowNetwork(n_nodes=2, arcs=[], supply=[0, 0])
    with pytest.raises(ValueError):
        net.add_arc(0, 1, capacity=1, lower=2)
    with pytest.raises(NonFiniteCost):
        net.add_arc(0, 1, capacity=1, cost=np.nan)
