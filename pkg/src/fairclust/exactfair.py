"""Monarch-based clustering with exactly preserved color ratios.

Centers are a maximal independent set in the square of the threshold
graph (the "monarchs"), linked into a forest whose tree edges span a
fixed hop count.  A fixed-center LP certifies that fractional assignment
can reach every monarch in exact global color proportion; integer counts
are then recovered bottom-up along the forest and realized by
unit-capacity flows.  The radius stays within five threshold lengths of
the guess when centers may sit on any point, and within seven when they
must sit on a separate location set (one extra hop for the wider support
plus one for moving each monarch onto a location).

The driver scans candidate thresholds in ascending order and returns the
first guess that survives every stage, so the returned guess never
exceeds the optimal exactly fair radius and the output is a true
constant-factor approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InternalError, NoFairSolutionError, ParseError
from .flow import FlowNetwork, max_flow_feasibility
from .instance import (
    FairnessSpec,
    Instance,
    IntegralClustering,
    Objective,
    cost,
    fairlet_base,
    is_exactly_fair,
)
from .lp import EDGE_TOL, ThresholdGraph, build_exact_ratio_lp, solve_lp

DELTA_SNAP = 1e-6  # float noise bound on the remainder recursion
DIST_SLACK = 1e-6  # additive slack on radius certificate asserts


@dataclass(eq=False)
class MonarchForest:
    """Maximal independent set in the threshold graph's square, one tree
    per point-bearing component, parents a fixed hop count away."""

    monarchs: tuple  # ascending point ids
    parent: dict  # monarch -> parent monarch; roots map to None
    children: dict  # monarch -> ascending tuple of child monarchs
    roots: tuple  # lowest-id monarch per point-bearing component
    component: np.ndarray  # (n,) component label per point
    graph: ThresholdGraph

    def component_points(self) -> dict:
        """component label -> ascending point ids."""
        out: dict = {}
        for j, c in enumerate(self.component):
            out.setdefault(int(c), []).append(j)
        return out


@dataclass(eq=False)
class GammaDelta:
    """Per-monarch integral anchor-color quota (a multiple of q1) and the
    fractional remainder handed up the tree."""

    gamma: dict  # monarch -> int, multiple of q1
    delta: dict  # monarch -> float in [0, q1)
    q1: int
    base: int


def assign_monarchs(instance: Instance, tau: float, supplier: bool = False,
                    graph: ThresholdGraph | None = None,
                    cap: int | None = None) -> MonarchForest | None:
    """Greedy monarch selection at threshold tau.

    Per component: the lowest-id point roots the tree and marks its
    two-hop neighborhood; then the lowest-id unmarked point one step
    (points mode) or two steps (bipartite mode) from a marked one joins,
    parented to the lowest-id monarch at hop exactly 3 (points) or 4
    (bipartite), and marks its own two-hop neighborhood.  With `cap`,
    returns None as soon as more than `cap` monarchs exist.
    """
    g = graph if graph is not None else ThresholdGraph(
        instance, tau, "bipartite" if supplier else "points")
    n = instance.n
    p_hops = g.hops()[:n, :n]
    adj_hop = 2 if supplier else 1
    parent_hop = 4 if supplier else 3
    comp = g.components()[:n]
    monarchs: list = []
    roots: list = []
    parent: dict = {}
    marked = np.zeros(n, dtype=bool)
    near = p_hops <= adj_hop  # step adjacency between points
    for label in sorted({int(c) for c in comp}):
        members = comp == label
        root = int(np.flatnonzero(members)[0])
        roots.append(root)
        monarchs.append(root)
        parent[root] = None
        marked |= p_hops[root] <= 2
        while True:
            cand = members & ~marked & (near[:, marked].any(axis=1)
                                        if marked.any() else False)
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                break
            j = int(idx[0])
            opts = [i for i in monarchs if p_hops[j, i] == parent_hop]
            if not opts:
                raise InternalError(
                    f"monarch {j} has no parent at hop {parent_hop}")
            parent[j] = min(opts)
            monarchs.append(j)
            marked |= p_hops[j] <= 2
            if cap is not None and len(monarchs) > cap:
                return None
        if not marked[members].all():
            raise InternalError("marking left part of a component uncovered")
    for a in monarchs:  # independence in the squared graph
        for b in monarchs:
            if a < b and p_hops[a, b] <= 2:
                raise InternalError(f"monarchs {a},{b} within two hops")
    children: dict = {i: [] for i in monarchs}
    for c, p in parent.items():
        if p is not None:
            children[p].append(c)
    return MonarchForest(
        monarchs=tuple(sorted(monarchs)),
        parent=parent,
        children={i: tuple(sorted(cs)) for i, cs in children.items()},
        roots=tuple(sorted(roots)),
        component=comp,
        graph=g,
    )


def components_divisible(forest: MonarchForest, instance: Instance,
                         base: int, per_color) -> bool:
    """Every point-bearing component must hold color counts t*(q_1..q_g)
    for one integer t, or no exactly fair clustering respects it."""
    colors = instance.colors
    for members in forest.component_points().values():
        size = len(members)
        if size % base != 0:
            return False
        t = size // base
        counts = np.bincount(colors[members], minlength=instance.n_colors)
        for h, q_h in enumerate(per_color):
            if counts[h] != t * q_h:
                return False
    return True


def gamma_delta(forest: MonarchForest, lp_sol, instance: Instance,
                base: int, per_color) -> GammaDelta:
    """Bottom-up integral quota recursion over the forest.

    Each monarch's anchor-color LP mass plus the remainders of its
    children rounds down to a multiple of q1 (the quota) with the
    remainder handed to its parent; roots must come out remainder-free
    and per-component quotas must sum to the anchor-color count.
    """
    q1 = int(per_color[0])
    anchor = instance.colors == 0
    mass = {i: 0.0 for i in forest.monarchs}
    vals = lp_sol.values
    for (i, j), v in lp_sol.lp.x_index.items():
        if anchor[j]:
            mass[i] += float(vals[v])

    depth = {}
    for i in forest.monarchs:
        d, j = 0, i
        while forest.parent[j] is not None:
            j = forest.parent[j]
            d += 1
        depth[i] = d
    gamma: dict = {}
    delta: dict = {}
    for i in sorted(forest.monarchs, key=lambda v: (-depth[v], v)):
        s = mass[i] + math.fsum(delta[c] for c in forest.children[i])
        s = max(0.0, s)
        units = int(s // q1)
        r = s - units * q1
        if q1 - r < DELTA_SNAP:
            units += 1
            r = 0.0
        elif r < DELTA_SNAP:
            r = 0.0
        gamma[i] = units * q1
        delta[i] = r
    for root in forest.roots:
        if delta[root] != 0.0:
            raise InternalError(
                f"root {root} remainder {delta[root]} not zero")
    comp_pts = forest.component_points()
    for label, members in comp_pts.items():
        want = int(np.count_nonzero(anchor[members]))
        got = sum(gamma[i] for i in forest.monarchs
                  if forest.component[i] == label)
        if got != want:
            raise InternalError(
                f"component {label} quotas {got} != anchor count {want}")
    return GammaDelta(gamma=gamma, delta=delta, q1=q1, base=base)


def _flow_assign(points, caps: dict, graph: ThresholdGraph,
                 reach_hop: int) -> dict | None:
    """Route one unit per point to a monarch within reach_hop, filling
    each monarch's capacity exactly; None when the reach cannot."""
    hops = graph.hops()
    net = FlowNetwork()
    pt_node = {int(j): net.add_node(1, ("point", int(j))) for j in points}
    mon_node = {i: net.add_node(-int(caps[i]), ("center", i))
                for i in sorted(caps)}
    arcs = []
    for j in points:
        for i in sorted(caps):
            if hops[j, i] <= reach_hop:
                arcs.append((net.add_arc(pt_node[int(j)], mon_node[i], 1),
                             int(j), i))
    fl = max_flow_feasibility(net)
    if not fl.feasible:
        return None
    out: dict = {}
    for e, j, i in arcs:
        if fl.arc_flow[e] >= 1:
            out[j] = i
    return out


def reroute_color1(forest: MonarchForest, gd: GammaDelta,
                   instance: Instance,
                   graph: ThresholdGraph | None = None) -> dict | None:
    """Integral assignment of every anchor-color point to a monarch within
    five hops (points mode) or six (bipartite), meeting the quotas."""
    g = graph if graph is not None else forest.graph
    reach = 5 if g.kind == "points" else 6
    return _flow_assign(np.flatnonzero(instance.colors == 0),
                        {i: gd.gamma[i] for i in forest.monarchs}, g, reach)


def integral_assignment_all_colors(
        forest: MonarchForest, gd: GammaDelta, color1_assign: dict,
        instance: Instance, objective: Objective | None = None,
        per_color=None, tau: float | None = None,
        center_of: dict | None = None,
        graph: ThresholdGraph | None = None) -> IntegralClustering | None:
    """Companion flows for the remaining colors at quota-scaled capacities,
    merged with the anchor assignment into an exactly fair clustering.

    Color h's capacity at each monarch is gamma * q_h / q_1, an integer by
    the divisibility of the quotas, so every successful decode reproduces
    the global ratios exactly at every monarch.  Asserts the per-point
    radius certificate before returning.
    """
    g = graph if graph is not None else forest.graph
    if objective is None:
        objective = Objective("kcenter" if g.kind == "points" else "ksupplier")
    if per_color is None:
        per_color = fairlet_base(instance)[1]
    if tau is None:
        tau = g.tau
    reach = 5 if g.kind == "points" else 6
    assign_map = dict(color1_assign)
    for h in range(1, instance.n_colors):
        pts = np.flatnonzero(instance.colors == h)
        if pts.size == 0:
            continue
        caps = {i: gd.gamma[i] * int(per_color[h]) // gd.q1
                for i in forest.monarchs}
        got = _flow_assign(pts, caps, g, reach)
        if got is None:
            return None
        assign_map.update(got)
    if len(assign_map) != instance.n:
        raise InternalError("flow decode left points unassigned")
    if center_of is None:
        center_of = {i: i for i in forest.monarchs}
    centers = tuple(sorted(center_of[i] for i in forest.monarchs))
    if len(set(centers)) != len(centers):
        raise InternalError("monarch centers collide")
    assignment = np.empty(instance.n, dtype=int)
    for j, i in assign_map.items():
        assignment[j] = center_of[i]
    limit = 5.0 if g.kind == "points" else 7.0
    worst = limit * (tau + EDGE_TOL) + DIST_SLACK
    d = instance.d_lp
    for j in range(instance.n):
        if d[assignment[j], j] > worst:
            raise InternalError(
                f"point {j} served at {d[assignment[j], j]:.6g} beyond "
                f"{limit:g} * {tau:.6g}")
    value = cost(instance, objective, centers, assignment)
    return IntegralClustering(centers=centers, assignment=assignment,
                              value=value)


def _relocate_to_locations(forest: MonarchForest, instance: Instance,
                           tau: float) -> dict | None:
    """Lowest-id location within tau of each monarch; the squared-graph
    independence keeps the picks distinct."""
    within = instance.d_lp <= tau + EDGE_TOL
    center_of = {}
    for i in forest.monarchs:
        locs = np.flatnonzero(within[:, i])
        if locs.size == 0:
            return None
        center_of[i] = int(locs[0])
    if len(set(center_of.values())) != len(center_of):
        raise InternalError("monarch relocations collide")
    return center_of


def _attempt(instance: Instance, tau: float, objective: Objective,
             base: int, per_color, supplier: bool):
    g = ThresholdGraph(instance, tau,
                       "bipartite" if supplier else "points")
    forest = assign_monarchs(instance, tau, supplier=supplier, graph=g,
                             cap=instance.k)
    if forest is None:
        return None
    if not components_divisible(forest, instance, base, per_color):
        return None
    lp = build_exact_ratio_lp(instance, forest.monarchs, g, base, per_color)
    sol = solve_lp(lp, feasibility_only=True)
    if sol.status != "optimal":
        return None
    gd = gamma_delta(forest, sol, instance, base, per_color)
    c1 = reroute_color1(forest, gd, instance, g)
    if c1 is None:
        return None
    if supplier:
        center_of = _relocate_to_locations(forest, instance, tau)
        if center_of is None:
            return None
    else:
        center_of = None
    return integral_assignment_all_colors(
        forest, gd, c1, instance, objective=objective, per_color=per_color,
        tau=tau, center_of=center_of, graph=g)


def _scan(instance: Instance, objective: Objective, cands,
          supplier: bool):
    base, per_color = fairlet_base(instance)
    fairness = FairnessSpec.exact(instance)
    for tau in cands:
        clus = _attempt(instance, float(tau), objective, base, per_color,
                        supplier)
        if clus is not None:
            if not is_exactly_fair(instance, fairness, clus):
                raise InternalError("decoded clustering is not exactly fair")
            return clus, float(tau)
    raise NoFairSolutionError(
        "no exactly fair clustering at any candidate radius")


def five_approx_kcenter(instance: Instance):
    """Exactly fair k-center within factor five of the optimum.

    Returns (clustering, tau) where tau never exceeds the optimal exactly
    fair radius and every service distance is at most 5 * tau.
    """
    if not instance.locations_are_points():
        raise ParseError(
            "point-centered mode requires the location set to be the points")
    return _scan(instance, Objective("kcenter"),
                 np.unique(instance.d_pp), supplier=False)


def seven_approx_ksupplier(instance: Instance):
    """Exactly fair k-supplier within factor seven of the optimum.

    Monarchs are selected over the bipartite point-location graph, flows
    run one hop wider than in the point-centered mode, and each monarch
    finally moves to its nearest location, adding at most one threshold
    length.  Returns (clustering, tau) with every service distance at
    most 7 * tau.
    """
    return _scan(instance, Objective("ksupplier"),
                 np.unique(instance.d_lp), supplier=True)
