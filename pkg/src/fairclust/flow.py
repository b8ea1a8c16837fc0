"""Minimum-cost flow on node-balanced networks, and a max-flow feasibility
check for networks where only routability matters.

Successive shortest paths with node potentials: every augmentation follows a
shortest path in the residual network under reduced costs, so arc costs must
be nonnegative up front.  Balances and capacities are integers, which makes
every intermediate and final flow integral.  Ties in the path search resolve
to the lowest node id, so runs are deterministic.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import FlowError, FlowInfeasibleError

INF = float("inf")


class FlowNetwork:
    """Directed network with integer node balances (positive = supply) and
    integer arc capacities; parallel arcs are allowed."""

    def __init__(self):
        self.balance = []
        self.labels = []
        self.arcs = []  # (u, v, cap, cost)

    def add_node(self, balance: int = 0, label=None) -> int:
        if balance != int(balance):
            raise FlowError(f"balance must be integral, got {balance}")
        self.balance.append(int(balance))
        self.labels.append(label)
        return len(self.balance) - 1

    def add_arc(self, u: int, v: int, cap: int, cost: float = 0.0) -> int:
        if not (0 <= u < len(self.balance) and 0 <= v < len(self.balance)):
            raise FlowError(f"arc ({u},{v}) references unknown node")
        if cap != int(cap) or cap < 0:
            raise FlowError(f"capacity must be a nonnegative integer, got {cap}")
        if cost < 0:
            raise FlowError(f"negative arc cost {cost} not supported")
        self.arcs.append((u, v, int(cap), float(cost)))
        return len(self.arcs) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.balance)

    def total_supply(self) -> int:
        return sum(b for b in self.balance if b > 0)

    def validate(self) -> None:
        if sum(self.balance) != 0:
            raise FlowError(f"balances sum to {sum(self.balance)}, not 0")


@dataclass
class Flow:
    """Arc flows (aligned with FlowNetwork.arcs), routed value, and cost."""

    arc_flow: np.ndarray
    value: int
    cost: float
    feasible: bool


def _solve(net: FlowNetwork, use_costs: bool) -> Flow:
    net.validate()
    N = net.n_nodes
    S, T = N, N + 1

    # residual arc arrays; arc 2e is forward, 2e ^ 1 its reverse
    to, cap, cost, adj = [], [], [], [[] for _ in range(N + 2)]

    def push_arc(u, v, c, w):
        adj[u].append(len(to))
        to.append(v)
        cap.append(c)
        cost.append(w)
        adj[v].append(len(to))
        to.append(u)
        cap.append(0)
        cost.append(-w)

    for (u, v, c, w) in net.arcs:
        push_arc(u, v, c, w if use_costs else 0.0)
    supply = 0
    for v, b in enumerate(net.balance):
        if b > 0:
            push_arc(S, v, b, 0.0)
            supply += b
        elif b < 0:
            push_arc(v, T, -b, 0.0)

    pot = [0.0] * (N + 2)
    routed = 0
    while routed < supply:
        dist = [INF] * (N + 2)
        prev_arc = [-1] * (N + 2)
        dist[S] = 0.0
        heap = [(0.0, S)]
        seen = [False] * (N + 2)
        while heap:
            d, u = heapq.heappop(heap)
            if seen[u]:
                continue
            seen[u] = True
            for a in adj[u]:
                if cap[a] <= 0:
                    continue
                v = to[a]
                nd = d + cost[a] + pot[u] - pot[v]
                if nd < dist[v] - 1e-15:
                    dist[v] = nd
                    prev_arc[v] = a
                    heapq.heappush(heap, (nd, v))
        if not seen[T]:
            break
        for v in range(N + 2):
            if seen[v]:
                pot[v] += dist[v]
        # bottleneck along the path, then augment
        push = None
        v = T
        while v != S:
            a = prev_arc[v]
            push = cap[a] if push is None else min(push, cap[a])
            v = to[a ^ 1]
        v = T
        while v != S:
            a = prev_arc[v]
            cap[a] -= push
            cap[a ^ 1] += push
            v = to[a ^ 1]
        routed += push

    flows = np.array([cap[2 * e + 1] for e in range(len(net.arcs))], dtype=int)
    total = math.fsum(float(f) * w for f, (_, _, _, w) in zip(flows, net.arcs))
    return Flow(arc_flow=flows, value=routed, cost=total,
                feasible=routed == supply)


def min_cost_flow(net: FlowNetwork) -> Flow:
    """Cheapest feasible flow meeting all balances.

    Raises FlowInfeasibleError when the balances cannot be routed; the
    exception message carries the amount that was routable.
    """
    flow = _solve(net, use_costs=True)
    if not flow.feasible:
        raise FlowInfeasibleError(
            f"only {flow.value} of {net.total_supply()} units routable"
        )
    return flow


def max_flow_feasibility(net: FlowNetwork) -> Flow:
    """Transshipment feasibility via a super-source / super-sink max flow;
    costs are ignored.  Returns the flow with `feasible` and the routed
    `value` filled in (no exception on shortfall)."""
    flow = _solve(net, use_costs=False)
    flow.cost = math.fsum(
        float(f) * w for f, (_, _, _, w) in zip(flow.arc_flow, net.arcs)
    )
    return flow


def residual_has_negative_cycle(net: FlowNetwork, flow: Flow,
                                tol: float = 1e-9) -> bool:
    """Bellman-Ford negative-cycle test on the residual network of `flow`.

    A min-cost flow is optimal iff this returns False; used as a
    post-hoc certificate in tests.
    """
    N = net.n_nodes
    edges = []
    for e, (u, v, c, w) in enumerate(net.arcs):
        f = int(flow.arc_flow[e])
        if f < c:
            edges.append((u, v, w))
        if f > 0:
            edges.append((v, u, -w))
    dist = [0.0] * N  # all-zero start finds a negative cycle anywhere
    for it in range(N):
        changed = False
        for (u, v, w) in edges:
            if dist[u] + w < dist[v] - tol:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            return False
    return True


def dump_dimacs(net: FlowNetwork) -> str:
    """Network in DIMACS min-cost-flow text format (1-based node ids)."""
    lines = [f"p min {net.n_nodes} {len(net.arcs)}"]
    for v, b in enumerate(net.balance):
        if b != 0:
            lines.append(f"n {v + 1} {b}")
    for (u, v, c, w) in net.arcs:
        lines.append(f"a {u + 1} {v + 1} 0 {c} {w:.9g}")
    return "\n".join(lines) + "\n"
