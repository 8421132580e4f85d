"""Exact combinatorial solvers: rectangular assignment and min-cost flow.

Both solvers are deterministic given input ordering; ties between equal-cost
optima are broken by scan order, so callers may rely on the cost but not on
which optimum is returned.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, NonFiniteCost


def hungarian(costs) -> tuple[np.ndarray, float]:
    """Minimum-cost injective assignment of rows to columns, n_rows <= n_cols.

    Jonker-Volgenant style shortest augmenting rows with dual potentials;
    rectangular matrices are handled natively, no padding. Returns the
    per-row column indices and the total cost.
    """
    c = np.asarray(costs, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {c.shape}")
    n, m = c.shape
    if n == 0:
        return np.empty(0, dtype=np.int64), 0.0
    if n > m:
        raise ValueError(f"requires n_rows <= n_cols, got {n} x {m}; transpose first")
    if not np.isfinite(c).all():
        raise NonFiniteCost("cost matrix contains non-finite entries")

    # 1-based duals and matching, column 0 is a sentinel.
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    match = np.zeros(m + 1, dtype=np.int64)   # match[j] = row occupying column j
    way = np.zeros(m + 1, dtype=np.int64)

    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            free = ~used[1:]
            cur = c[i0 - 1, :] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            if better.any():
                minv1 = minv[1:]
                minv1[better] = cur[better]
                way1 = way[1:]
                way1[better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[match[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = int(way[j0])
            match[j0] = match[j1]
            j0 = j1

    assign = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if match[j] != 0:
            assign[match[j] - 1] = j - 1
    total = float(c[np.arange(n), assign].sum())
    return assign, total


# ------------------------------------------------------------ min cost flow

@dataclass(frozen=True)
class FlowArc:
    tail: int
    head: int
    capacity: int
    lower: int = 0
    cost: float = 0.0


@dataclass
class FlowNetwork:
    """Directed network with integral capacities/lower bounds and float costs."""

    n_nodes: int
    arcs: list[FlowArc] = field(default_factory=list)
    supply: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("network needs at least one node")
        if len(self.supply) != self.n_nodes:
            raise ValueError(f"supply has {len(self.supply)} entries for {self.n_nodes} nodes")
        for s in self.supply:
            if not isinstance(s, (int, np.integer)) or isinstance(s, bool):
                raise ValueError("supplies must be integers")
        if sum(self.supply) != 0:
            raise ValueError(f"supplies must sum to zero, got {sum(self.supply)}")
        for k, a in enumerate(self.arcs):
            if not (0 <= a.tail < self.n_nodes and 0 <= a.head < self.n_nodes):
                raise ValueError(f"arc {k} endpoints out of range")
            for val in (a.capacity, a.lower):
                if not isinstance(val, (int, np.integer)) or isinstance(val, bool) or val < 0:
                    raise ValueError(f"arc {k}: capacity and lower bound must be non-negative integers")
            if a.lower > a.capacity:
                raise ValueError(f"arc {k}: lower bound {a.lower} exceeds capacity {a.capacity}")
            if not np.isfinite(a.cost):
                raise NonFiniteCost(f"arc {k} has non-finite cost")

    def add_arc(self, tail: int, head: int, capacity: int, lower: int = 0, cost: float = 0.0) -> None:
        arc = FlowArc(tail, head, int(capacity), int(lower), float(cost))
        if not (0 <= tail < self.n_nodes and 0 <= head < self.n_nodes):
            raise ValueError("arc endpoints out of range")
        if lower > capacity or lower < 0:
            raise ValueError("need 0 <= lower <= capacity")
        if not np.isfinite(cost):
            raise NonFiniteCost("arc cost is non-finite")
        self.arcs.append(arc)


@dataclass
class FlowResult:
    flows: np.ndarray
    total_cost: float


def solve_mcf(net: FlowNetwork) -> FlowResult:
    """Integral minimum-cost flow by successive shortest paths with potentials.

    Lower bounds are removed by the usual supply transformation; potentials
    are initialized with Bellman-Ford so negative arc costs are allowed.
    Raises Infeasible (with a cut witness) when demands cannot be met.
    """
    n = net.n_nodes
    big = n + 2
    s, t = n, n + 1

    to: list[int] = []
    cap: list[int] = []
    cost: list[float] = []
    tail: list[int] = []
    adj: list[list[int]] = [[] for _ in range(big)]

    def add_edge(a: int, b: int, c: int, w: float) -> None:
        adj[a].append(len(to)); tail.append(a); to.append(b); cap.append(c); cost.append(w)
        adj[b].append(len(to)); tail.append(b); to.append(a); cap.append(0); cost.append(-w)

    excess = list(net.supply)
    fwd = []
    for arc in net.arcs:
        excess[arc.tail] -= arc.lower
        excess[arc.head] += arc.lower
        fwd.append(len(to))
        residual = arc.capacity - arc.lower
        add_edge(arc.tail, arc.head, residual, arc.cost)
        if arc.cost < 0.0 and residual > 0:
            # Saturate negative arcs up front so the residual graph has no
            # negative cycles; SSP may later cancel via the reverse arc.
            e = fwd[-1]
            cap[e] = 0
            cap[e ^ 1] = residual
            excess[arc.tail] -= residual
            excess[arc.head] += residual

    need = 0
    for node, e in enumerate(excess):
        if e > 0:
            add_edge(s, node, e, 0.0)
            need += e
        elif e < 0:
            add_edge(node, t, -e, 0.0)

    # Bellman-Ford from the super source over the initial residual graph.
    pot = [np.inf] * big
    pot[s] = 0.0
    for _ in range(big - 1):
        changed = False
        for e in range(0, len(to), 1):
            if cap[e] <= 0 or pot[tail[e]] == np.inf:
                continue
            nd = pot[tail[e]] + cost[e]
            if nd < pot[to[e]]:
                pot[to[e]] = nd
                changed = True
        if not changed:
            break

    shipped = 0
    while shipped < need:
        dist, parent = _dijkstra(big, s, adj, to, cap, cost, pot)
        if dist[t] == np.inf:
            break
        for v in range(big):
            if dist[v] < np.inf:
                pot[v] += dist[v]
        push = need - shipped
        v = t
        while v != s:
            e = parent[v]
            push = min(push, cap[e])
            v = to[e ^ 1]
        v = t
        while v != s:
            e = parent[v]
            cap[e] -= push
            cap[e ^ 1] += push
            v = to[e ^ 1]
        shipped += push

    if shipped < need:
        reachable = _residual_reachable(big, s, adj, to, cap)
        cut = sorted(x for x in reachable if x < n)
        raise Infeasible(
            f"{need - shipped} unit(s) of supply cannot reach demand; "
            f"saturated cut isolates nodes {cut}", cut_nodes=cut)

    flows = np.empty(len(net.arcs), dtype=np.int64)
    total = 0.0
    for k, arc in enumerate(net.arcs):
        f = arc.lower + (arc.capacity - arc.lower - cap[fwd[k]])
        flows[k] = f
        total += arc.cost * f
    return FlowResult(flows=flows, total_cost=float(total))


def _dijkstra(big, s, adj, to, cap, cost, pot):
    dist = [np.inf] * big
    parent = [-1] * big
    dist[s] = 0.0
    heap = [(0.0, s)]
    done = [False] * big
    while heap:
        d, a = heapq.heappop(heap)
        if done[a]:
            continue
        done[a] = True
        pa = pot[a]
        for e in adj[a]:
            if cap[e] <= 0:
                continue
            b = to[e]
            if done[b]:
                continue
            # Reduced cost; clamp float noise (tolerance 1e-9 by contract).
            rc = cost[e] + pa - pot[b]
            if rc < 0.0:
                rc = 0.0
            nd = d + rc
            if nd < dist[b]:
                dist[b] = nd
                parent[b] = e
                heapq.heappush(heap, (nd, b))
    return dist, parent


def _residual_reachable(big, s, adj, to, cap):
    seen = [False] * big
    seen[s] = True
    stack = [s]
    while stack:
        a = stack.pop()
        for e in adj[a]:
            if cap[e] > 0 and not seen[to[e]]:
                seen[to[e]] = True
                stack.append(to[e])
    return [v for v in range(big) if seen[v]]
