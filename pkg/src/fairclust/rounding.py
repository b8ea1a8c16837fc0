"""Rounding fair fractional assignments to essentially fair integral ones.

The pipeline: run a colorblind baseline for the objective, solve the fair
assignment LP over all candidate locations, consolidate the fractional
solution onto the baseline centers, and round the consolidated solution
with one unit-capacity flow per color class.  Consolidation loses at most
an additive baseline radius per service distance (one extra hop through
the relaxed triangle inequality), and the flow rounding preserves per
center-and-color masses up to floor/ceiling, which is exactly the fairness
guarantee the integral output carries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baselines import baseline_for, nearest_assignment
from .errors import FlowInfeasibleError, InternalError
from .flow import FlowNetwork, max_flow_feasibility, min_cost_flow
from .instance import (
    FairnessSpec,
    FractionalSolution,
    Instance,
    IntegralClustering,
    Objective,
    check_essential_fairness,
    cost,
    snap_tolerance,
)
from .lp import min_feasible_threshold, solve_fair_lp

BOUND_SLACK = 1e-6


def consolidation_bound(objective: Objective, c_lp: float, c_bar: float) -> float:
    """Guaranteed ceiling on the consolidated fractional cost."""
    if objective.kind == "kcenter":
        return c_lp + c_bar
    if objective.kind == "kmeans":
        # one consolidation hop under the squared-distance relaxed triangle
        # inequality, doubled again for restricting centers to the points
        return 12.0 * c_lp + 8.0 * c_bar
    return 2.0 * c_lp + c_bar


def extend_phi_bar(instance: Instance, centers) -> np.ndarray:
    """Map every candidate location to one of the open centers.

    Locations that are points take their nearest open center; other
    locations inherit the image of their nearest point.  Ties pick the
    lowest index, so the map is deterministic.
    """
    centers = sorted(centers)
    d = instance.d_lp
    n = instance.n
    # nearest open center per point; d rows indexed by location
    to_center = np.asarray(centers)[np.argmin(d[centers], axis=0)]
    phi_bar = np.empty(instance.m, dtype=np.int64)
    for i in range(instance.m):
        u = instance.loc_universe[i]
        if u < n:
            phi_bar[i] = to_center[u]
        else:
            q = int(np.argmin(d[i]))
            phi_bar[i] = to_center[q]
    return phi_bar


def consolidate(instance: Instance, objective: Objective, centers,
                x: np.ndarray, c_lp: float, c_bar: float):
    """Collapse the LP assignment onto the open centers along phi-bar and
    price the result; raises InternalError if the guaranteed consolidation
    bound does not hold."""
    centers = sorted(int(c) for c in centers)
    phi_bar = extend_phi_bar(instance, centers)
    n = instance.n
    snap = snap_tolerance()
    xhat = np.zeros((len(centers), n))
    pos = {c: r for r, c in enumerate(centers)}
    for i in range(instance.m):
        xhat[pos[phi_bar[i]]] += x[i]
    xhat[xhat <= snap] = 0.0
    d = instance.d_lp[centers]
    support = xhat > 0.0
    if objective.threshold_mode:
        c_hat = float(d[support].max()) if support.any() else 0.0
    else:
        c_hat = math.fsum((xhat * d)[support])
        if objective.uses_open_costs:
            c_hat += math.fsum(float(instance.open_costs[c]) for c in centers)
    bound = consolidation_bound(objective, c_lp, c_bar)
    if c_hat > bound + BOUND_SLACK * max(1.0, bound):
        raise InternalError(
            f"consolidated cost {c_hat} exceeds guaranteed bound {bound}"
        )
    return xhat, c_hat


def _snapped_floor(value: float, snap: float):
    """(floor, fractional?) of a mass, treating near-integers as integral."""
    r = round(value)
    if abs(value - r) <= snap:
        return int(r), False
    return int(math.floor(value)), True


@dataclass
class RoundingNetwork:
    net: FlowNetwork
    point_arcs: list  # (arc index, point, center row)


def build_rounding_network(instance: Instance, objective: Objective,
                           centers, xhat: np.ndarray) -> RoundingNetwork:
    """Unit-capacity transportation network whose integral flows are exactly
    the assignments matching every per-center color mass up to floor/ceil.

    Points supply one unit into their color's node at each supporting
    center; the color node retains its floored mass and may pass at most
    one overflow unit to the center node, which retains the gap between
    the floored center mass and its floored color masses and may pass at
    most one unit to the sink.
    """
    centers = sorted(int(c) for c in centers)
    snap = snap_tolerance()
    n = instance.n
    g = instance.n_colors
    d = instance.d_lp[centers]
    use_costs = not objective.threshold_mode
    net = FlowNetwork()
    point_node = [net.add_node(1, f"p{j}") for j in range(n)]
    mass = xhat.sum(axis=1)
    color_mass = np.zeros((len(centers), g))
    for h in range(g):
        color_mass[:, h] = xhat[:, instance.colors == h].sum(axis=1)
    sink_demand = 0
    color_node = {}
    center_node = {}
    overflow = []  # deferred arcs so node creation stays grouped
    for r, c in enumerate(centers):
        m_r, frac_r = _snapped_floor(float(mass[r]), snap)
        if m_r == 0 and not frac_r:
            continue
        floors = 0
        for h in range(g):
            ch = float(color_mass[r, h])
            if ch <= snap:
                continue
            f_ch, frac_ch = _snapped_floor(ch, snap)
            floors += f_ch
            color_node[r, h] = net.add_node(-f_ch, f"c{c}_h{h}")
            if frac_ch:
                overflow.append((r, h))
        center_node[r] = net.add_node(-(m_r - floors), f"c{c}")
        if frac_r:
            overflow.append((r, None))
        sink_demand += m_r
    sink = net.add_node(-(n - sink_demand), "t")
    point_arcs = []
    for j in range(n):
        h = int(instance.colors[j])
        for r in np.flatnonzero(xhat[:, j] > 0.0):
            r = int(r)
            a = net.add_arc(point_node[j], color_node[r, h], 1,
                            float(d[r, j]) if use_costs else 0.0)
            point_arcs.append((a, j, r))
    for r, h in overflow:
        if h is None:
            net.add_arc(center_node[r], sink, 1, 0.0)
        else:
            net.add_arc(color_node[r, h], center_node[r], 1, 0.0)
    net.validate()
    return RoundingNetwork(net, point_arcs)


def round_assignment(instance: Instance, objective: Objective, centers,
                     xhat: np.ndarray, c_hat: float) -> IntegralClustering:
    """Extract an integral assignment from the consolidated solution via the
    rounding flow; the integral cost never exceeds the consolidated cost."""
    centers = tuple(sorted(int(c) for c in centers))
    rn = build_rounding_network(instance, objective, centers, xhat)
    try:
        if objective.threshold_mode:
            flow = max_flow_feasibility(rn.net)
            if not flow.feasible:
                raise InternalError("rounding flow must route every point")
        else:
            flow = min_cost_flow(rn.net)
    except FlowInfeasibleError as exc:
        raise InternalError(f"rounding flow infeasible: {exc}") from exc
    assignment = np.full(instance.n, -1, dtype=np.int64)
    for a, j, r in rn.point_arcs:
        if flow.arc_flow[a] == 1:
            if assignment[j] >= 0:
                raise InternalError(f"point {j} routed twice")
            assignment[j] = centers[r]
    if (assignment < 0).any():
        raise InternalError("rounding left points unassigned")
    val = cost(instance, objective, centers, assignment)
    if val > c_hat + BOUND_SLACK * max(1.0, abs(c_hat)):
        raise InternalError(
            f"integral cost {val} exceeds consolidated cost {c_hat}"
        )
    return IntegralClustering(centers, assignment, val)


@dataclass
class BlackboxResult:
    clustering: IntegralClustering
    witness: FractionalSolution
    audit: object
    report: dict


def blackbox_solve(instance: Instance, objective: Objective,
                   fairness: FairnessSpec, fixed_centers=None,
                   seed: int = 0) -> BlackboxResult:
    """Full reduction: colorblind baseline, fair LP, consolidation, flow
    rounding, essential-fairness audit.

    With `fixed_centers` the baseline step is skipped and the given centers
    anchor the consolidation; the additive guarantee then uses their
    nearest-assignment cost in place of the baseline cost.
    """
    if fixed_centers is not None:
        centers = tuple(sorted(int(c) for c in fixed_centers))
        assignment = nearest_assignment(instance, centers)
        c_bar = cost(instance, objective, centers, assignment)
        baseline_name = "fixed-centers"
    else:
        base = baseline_for(instance, objective, seed=seed)
        centers = base.clustering.centers
        c_bar = base.clustering.value
        baseline_name = base.name
    if objective.threshold_mode:
        tau, lp = min_feasible_threshold(instance, objective, fairness)
        c_lp = float(tau)
    else:
        lp = solve_fair_lp(instance, objective, fairness)
        if lp.status != "optimal":
            raise InternalError(f"fair LP unexpectedly {lp.status}")
        c_lp = float(lp.value)
    xhat, c_hat = consolidate(instance, objective, centers, lp.x, c_lp, c_bar)
    clustering = round_assignment(instance, objective, centers, xhat, c_hat)
    witness = FractionalSolution(
        centers=centers,
        x=_expand_rows(instance, centers, xhat),
        y=_open_indicator(instance, centers),
    )
    audit = check_essential_fairness(instance, fairness, clustering, witness)
    bound = consolidation_bound(objective, c_lp, c_bar)
    report = {
        "algorithm": "blackbox",
        "baseline": baseline_name,
        "cLP": c_lp,
        "cBar": c_bar,
        "cHat": c_hat,
        "finalCost": clustering.value,
        "bound": bound,
        "boundSlack": bound - clustering.value,
    }
    return BlackboxResult(clustering, witness, audit, report)


def _expand_rows(instance, centers, xhat):
    x = np.zeros((instance.m, instance.n))
    for r, c in enumerate(centers):
        x[c] = xhat[r]
    return x


def _open_indicator(instance, centers):
    y = np.zeros(instance.m)
    y[list(centers)] = 1.0
    return y
