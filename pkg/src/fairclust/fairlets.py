"""Two-color fairlet decompositions and the decomposition-to-clustering
composition step.

A fairlet is a smallest point group whose color counts realize the global
color ratio exactly; a union of disjoint fairlets is exactly fair, so any
clustering that keeps fairlets intact is exactly fair as well.  This module
computes decompositions for the two tractable two-color shapes:

  * equal counts (1:1): one minority and one majority point per fairlet,
    found by a red-blue matching over per-pair service costs;
  * integer ratio (1:t): one minority point anchoring t majority points,
    found by a threshold flow.

and then clusters whole fairlets with any colorblind baseline.  Mixed
ratios s:t with s, t > 1 and more than two colors need a capacitated
clustering subroutine and are not supported here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baselines import baseline_for, resolve_baseline
from .errors import InfeasibleFairnessError, InternalError, ParseError
from .flow import FlowNetwork, max_flow_feasibility, min_cost_flow
from .instance import (
    Instance,
    IntegralClustering,
    Objective,
    build_instance,
    cost,
    fairlet_base,
)

EDGE_TOL = 1e-12  # slack when comparing distances against a threshold


@dataclass(frozen=True)
class FairletDecomposition:
    """Partition of the point set into minimal exactly fair groups.

    `fairlets` holds ascending point-index tuples ordered by first member;
    `centers` holds one universe index per fairlet, the location its
    members are charged to when the decomposition is costed; `cost` is the
    largest charged distance for radius objectives and the charged sum
    otherwise, as named by `kind`.  `tau` records the threshold reached by
    the search when one ran.
    """

    fairlets: tuple
    centers: tuple
    cost: float
    kind: str
    tau: float | None = None

    def validate(self, instance: Instance) -> None:
        """Partition and minimality audit; raises InternalError on failure."""
        seen = np.zeros(instance.n, dtype=bool)
        base, per_color = fairlet_base(instance)
        for group in self.fairlets:
            if list(group) != sorted(group):
                raise InternalError("fairlet members not ascending")
            if seen[list(group)].any():
                raise InternalError("fairlets overlap")
            seen[list(group)] = True
            counts = np.bincount(
                instance.colors[list(group)], minlength=instance.n_colors
            )
            if tuple(counts) != tuple(per_color):
                raise InternalError(
                    f"fairlet counts {tuple(counts)} differ from the "
                    f"minimal pattern {tuple(per_color)}"
                )
        if not seen.all():
            raise InternalError("fairlets do not cover every point")
        if len(self.centers) != len(self.fairlets):
            raise InternalError("one center per fairlet required")


def _two_color_sides(instance: Instance) -> tuple:
    """Minority-first point index arrays for a two-color instance."""
    if instance.n_colors != 2:
        raise ParseError(
            f"fairlet decompositions support exactly two colors, "
            f"got {instance.n_colors}"
        )
    counts = instance.color_counts
    minority = 0 if counts[0] <= counts[1] else 1
    return (
        np.flatnonzero(instance.colors == minority),
        np.flatnonzero(instance.colors == 1 - minority),
    )


def _pair_service(instance: Instance, kind: str) -> tuple:
    """Best single-center service cost for every minority-majority pair.

    Returns (cost, center) arrays of shape (R, B); `center` holds universe
    indices of the first candidate attaining the minimum.  Candidates are
    the points themselves except for the location-based objectives, which
    range over the candidate locations.
    """
    reds, blues = _two_color_sides(instance)
    if kind in ("ksupplier", "facility"):
        dc = instance.d_lp
        cand_univ = np.asarray(instance.loc_universe)
    else:
        dc = instance.d_pp
        cand_univ = np.arange(instance.n)
    a = dc[:, reds][:, :, None]  # (cand, R, 1)
    b = dc[:, blues][:, None, :]  # (cand, 1, B)
    per_cand = np.maximum(a, b) if kind in ("kcenter", "ksupplier") else a + b
    arg = per_cand.argmin(axis=0)  # first minimum = lowest candidate
    pair = np.take_along_axis(per_cand, arg[None], axis=0)[0]
    return pair, cand_univ[arg]


def _matching_network(pair: np.ndarray, mask: np.ndarray, costs=None):
    """Unit bipartite network whose feasible flows are perfect matchings."""
    r, b = pair.shape
    net = FlowNetwork()
    red_nodes = [net.add_node(balance=1, label=f"r{i}") for i in range(r)]
    blue_nodes = [net.add_node(balance=-1, label=f"b{j}") for j in range(b)]
    arcs = {}
    for i in range(r):
        for j in range(b):
            if mask[i, j]:
                c = float(costs[i, j]) if costs is not None else 0.0
                arcs[net.add_arc(red_nodes[i], blue_nodes[j], 1, c)] = (i, j)
    return net, arcs


def _decode_matching(flow, arcs, r: int) -> list:
    """Matched blue column per red row from a unit matching flow."""
    mate = [-1] * r
    for arc_id, (i, j) in arcs.items():
        if flow.arc_flow[arc_id] >= 1:
            if mate[i] != -1:
                raise InternalError("matching flow uses a red point twice")
            mate[i] = j
    if any(m < 0 for m in mate):
        raise InternalError("matching flow left a red point unmatched")
    return mate


def fairlet_matching_balance1(instance: Instance,
                              objective_kind: str) -> FairletDecomposition:
    """Decompose an equal-count two-color point set into red-blue pairs.

    Every pair is charged to the candidate center serving it best.  Radius
    objectives take the smallest threshold whose pair graph (pairs with
    service cost within the threshold) has a perfect matching; sum
    objectives take a minimum-cost perfect matching instead.  The charged
    cost of the returned decomposition never exceeds the cost of an
    optimal fair clustering, whose clusters themselves split into pairs.
    """
    Objective(objective_kind)  # validates the kind
    reds, blues = _two_color_sides(instance)
    if len(reds) != len(blues):
        raise InfeasibleFairnessError(
            f"1:1 fairlets need equal color counts, "
            f"got {len(reds)}:{len(blues)}"
        )
    pair, pair_center = _pair_service(instance, objective_kind)
    threshold_mode = Objective(objective_kind).threshold_mode
    tau = None
    if threshold_mode:
        cands = np.unique(pair)
        lo, hi = 0, len(cands) - 1
        best_flow = None
        while lo <= hi:  # perfect matchability is monotone in the threshold
            mid = (lo + hi) // 2
            net, arcs = _matching_network(pair, pair <= cands[mid] + EDGE_TOL)
            flow = max_flow_feasibility(net)
            if flow.feasible:
                best_flow, best_arcs, tau = flow, arcs, float(cands[mid])
                hi = mid - 1
            else:
                lo = mid + 1
        if best_flow is None:
            raise InternalError("complete pair graph has no perfect matching")
        mate = _decode_matching(best_flow, best_arcs, len(reds))
    else:
        net, arcs = _matching_network(
            pair, np.ones_like(pair, dtype=bool), costs=pair
        )
        mate = _decode_matching(min_cost_flow(net), arcs, len(reds))
    fairlets, centers, charged = [], [], []
    for i, j in enumerate(mate):
        members = tuple(sorted((int(reds[i]), int(blues[j]))))
        fairlets.append(members)
        centers.append(int(pair_center[i, j]))
        charged.append(float(pair[i, j]))
    order = sorted(range(len(fairlets)), key=lambda t: fairlets[t][0])
    total = max(charged) if threshold_mode else math.fsum(sorted(charged))
    return FairletDecomposition(
        fairlets=tuple(fairlets[t] for t in order),
        centers=tuple(centers[t] for t in order),
        cost=total,
        kind=objective_kind,
        tau=tau,
    )


def fairlet_flow_one_over_t(instance: Instance, t: int) -> FairletDecomposition:
    """Decompose a two-color point set with a t:1 count ratio into fairlets
    of one minority anchor plus t majority points.

    A unit flow from a source through the anchors (capacity t each) to the
    majority points carries one unit per majority point exactly when every
    majority point can reach an anchor within twice the threshold; the
    smallest such threshold is found by bisection over the half pairwise
    distances.  Fairlet radii, measured from the anchors, stay within
    twice the threshold, which itself is within the optimal fair radius.
    """
    if not isinstance(t, (int, np.integer)) or t < 1:
        raise ParseError(f"majority share t must be a positive integer: {t!r}")
    reds, blues = _two_color_sides(instance)
    if len(blues) != t * len(reds):
        raise InfeasibleFairnessError(
            f"1:{t} fairlets need a {t}:1 count split, "
            f"got {len(blues)}:{len(reds)}"
        )
    pair = instance.d_pp[np.ix_(reds, blues)]

    def probe(tau: float):
        net = FlowNetwork()
        src = net.add_node(balance=len(blues), label="s")
        sink = net.add_node(balance=-len(blues), label="t")
        red_nodes = [net.add_node(label=f"r{i}") for i in range(len(reds))]
        blue_nodes = [net.add_node(label=f"b{j}") for j in range(len(blues))]
        for bn in blue_nodes:
            net.add_arc(bn, sink, 1)
        arcs = {}
        for i, rn in enumerate(red_nodes):
            net.add_arc(src, rn, int(t))
            for j in np.flatnonzero(pair[i] <= 2.0 * tau + EDGE_TOL):
                arcs[net.add_arc(rn, blue_nodes[j], 1)] = (i, int(j))
        flow = max_flow_feasibility(net)
        return (flow, arcs) if flow.feasible else None

    cands = np.unique(pair) / 2.0
    lo, hi = 0, len(cands) - 1
    best = None
    tau = None
    while lo <= hi:  # coverage is monotone in the threshold
        mid = (lo + hi) // 2
        hit = probe(float(cands[mid]))
        if hit is not None:
            best, tau = hit, float(cands[mid])
            hi = mid - 1
        else:
            lo = mid + 1
    if best is None:
        raise InfeasibleFairnessError(
            "no threshold routes every majority point to an anchor"
        )
    flow, arcs = best
    members = {i: [int(reds[i])] for i in range(len(reds))}
    cols = {i: [] for i in range(len(reds))}
    for arc_id, (i, j) in arcs.items():
        if flow.arc_flow[arc_id] >= 1:
            members[i].append(int(blues[j]))
            cols[i].append(j)
    fairlets, centers, radius = [], [], 0.0
    for i in range(len(reds)):
        if len(members[i]) != 1 + t:
            raise InternalError("anchor did not receive exactly t points")
        fairlets.append(tuple(sorted(members[i])))
        centers.append(int(reds[i]))
        radius = max([radius] + [float(pair[i, j]) for j in cols[i]])
    if radius > 2.0 * tau + EDGE_TOL:
        raise InternalError("fairlet exceeds twice the threshold radius")
    order = sorted(range(len(fairlets)), key=lambda q: fairlets[q][0])
    return FairletDecomposition(
        fairlets=tuple(fairlets[q] for q in order),
        centers=tuple(centers[q] for q in order),
        cost=radius,
        kind="kcenter",
        tau=tau,
    )


def _baseline_runner(objective_kind: str, baseline):
    """Callable running the chosen (or default) colorblind baseline."""
    if baseline is None:
        obj = Objective(objective_kind)
        return lambda inst: baseline_for(inst, obj)
    return resolve_baseline(baseline)


def compose_with_colorblind(decomp: FairletDecomposition, instance: Instance,
                            objective_kind: str,
                            baseline: str | None = None) -> IntegralClustering:
    """Colorblind-cluster whole fairlets into an exactly fair solution.

    Radius objectives cluster one representative per fairlet (the charged
    center when centers are points, the lowest member otherwise) and merge
    each fairlet into its representative's cluster.  Summed-distance
    objectives cluster the full point set, then route each fairlet through
    the member with the cheapest detour from the fairlet's charged center
    to a cluster center.  Squared-distance objectives cluster a multiset
    holding one copy of each fairlet's centroid per member, then re-center
    every merged group on its best candidate location.  Each output
    cluster is a union of fairlets, hence exactly fair.
    """
    obj = Objective(objective_kind)
    run = _baseline_runner(objective_kind, baseline)
    assignment = np.full(instance.n, -1, dtype=int)
    if objective_kind == "kcenter":
        if not instance.locations_are_points():
            raise ParseError("kcenter composition needs centers at the points")
        reps = [int(c) for c in decomp.centers]
        if any(c >= instance.n for c in reps):
            raise ParseError(
                "kcenter composition needs point-valued fairlet centers"
            )
        sub = build_instance(
            colors=np.zeros(len(reps), dtype=int), k=instance.k,
            D=instance.d_pp[np.ix_(reps, reps)], validate=False,
        )
        picked = run(sub).clustering.assignment
        for fi, group in enumerate(decomp.fairlets):
            assignment[list(group)] = reps[int(picked[fi])]
    elif objective_kind == "ksupplier":
        reps = [int(group[0]) for group in decomp.fairlets]
        univ = np.concatenate(
            [np.asarray(reps, dtype=int), np.asarray(instance.loc_universe)]
        )
        sub = Instance(
            point_ids=tuple(f"p{i}" for i in range(len(reps))),
            colors=np.zeros(len(reps), dtype=int),
            color_names=("all",),
            location_ids=instance.location_ids,
            loc_universe=np.arange(len(reps), len(reps) + instance.m),
            open_costs=np.zeros(instance.m),
            D=instance.D[np.ix_(univ, univ)],
            k=instance.k,
            beta=instance.beta,
        )
        picked = run(sub).clustering.assignment  # original location indices
        for fi, group in enumerate(decomp.fairlets):
            assignment[list(group)] = int(picked[fi])
    elif objective_kind in ("kmedian", "facility"):
        served = run(instance).clustering.assignment
        d_lp = instance.d_lp
        for group, c_univ in zip(decomp.fairlets, decomp.centers):
            best_p, best_v = group[0], math.inf
            for p in group:  # ascending, strict < keeps the lowest member
                v = float(instance.D[int(c_univ), p])
                v += float(d_lp[int(served[p]), p])
                if v < best_v:
                    best_p, best_v = p, v
            assignment[list(group)] = int(served[best_p])
    elif objective_kind == "kmeans":
        if instance.coords is None:
            raise ParseError("kmeans composition needs point coordinates")
        pts = instance.coords[: instance.n]
        sizes = [len(group) for group in decomp.fairlets]
        centroids = np.array(
            [pts[list(group)].mean(axis=0) for group in decomp.fairlets]
        )
        sub = build_instance(
            coords=np.repeat(centroids, sizes, axis=0),
            colors=np.zeros(int(sum(sizes)), dtype=int),
            k=instance.k, squared=True, validate=False,
        )
        picked = run(sub).clustering.assignment
        first_copy = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        groups: dict = {}
        for fi in range(len(decomp.fairlets)):
            groups.setdefault(int(picked[first_copy[fi]]), []).append(fi)
        d_lp = instance.d_lp
        for sc in sorted(groups):
            members = [p for fi in groups[sc] for p in decomp.fairlets[fi]]
            # cheapest single location for the merged group, lowest id first
            loc = int(np.argmin(d_lp[:, members].sum(axis=1)))
            assignment[members] = loc
    else:
        raise ParseError(f"no composition for objective {objective_kind!r}")
    if (assignment < 0).any():
        raise InternalError("composition left points unassigned")
    centers = tuple(sorted(set(int(c) for c in assignment)))
    value = cost(instance, obj, centers, assignment)
    return IntegralClustering(centers, np.asarray(assignment), value)


def fairlet_pipeline(instance: Instance, objective: Objective,
                     baseline: str | None = None) -> tuple:
    """Decompose into fairlets, then compose with a colorblind baseline.

    Returns (clustering, decomposition).  Equal color counts go through
    the matching decomposition, integer-ratio counts through the anchor
    flow; other splits are rejected since they need a capacitated
    clustering subroutine.
    """
    counts = instance.color_counts
    if instance.n_colors != 2:
        raise ParseError(
            f"the fairlet path supports exactly two colors, "
            f"got {instance.n_colors}"
        )
    lo, hi = int(counts.min()), int(counts.max())
    if lo == hi:
        decomp = fairlet_matching_balance1(instance, objective.kind)
    elif lo >= 1 and hi % lo == 0:
        decomp = fairlet_flow_one_over_t(instance, hi // lo)
    else:
        raise ParseError(
            f"count split {hi}:{lo} is outside the supported 1:1 and 1:t "
            "fairlet shapes"
        )
    clustering = compose_with_colorblind(
        decomp, instance, objective.kind, baseline
    )
    return clustering, decomp
