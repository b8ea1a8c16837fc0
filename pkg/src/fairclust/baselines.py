"""Color-blind baseline clusterings that seed the black-box pipeline.

Every baseline assigns each point to its nearest open center (ties to the
lowest center index) and reports the resulting objective value.  Only the
farthest-point and threshold-scan baselines carry approximation factors;
the others are plain heuristics whose quality is whatever it turns out to
be on the run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError
from .instance import Instance, IntegralClustering, Objective, cost


@dataclass
class BaselineResult:
    clustering: IntegralClustering
    name: str
    guarantee: str | None = None  # e.g. "2*OPT"; None means observed-only


def nearest_assignment(instance: Instance, centers) -> np.ndarray:
    centers = sorted(centers)
    d = instance.d_lp[centers]  # (s, n)
    pick = np.argmin(d, axis=0)  # first minimum = lowest open center
    return np.asarray(centers, dtype=int)[pick]


def _finish(instance, objective, centers, name, guarantee=None):
    centers = tuple(sorted(set(int(c) for c in centers)))
    assign = nearest_assignment(instance, centers)
    value = cost(instance, objective, centers, assign)
    return BaselineResult(
        IntegralClustering(centers, assign, value), name, guarantee
    )


def gonzalez_kcenter(instance: Instance, k: int | None = None) -> BaselineResult:
    """Farthest-point traversal seeded at point 0; radius at most twice the
    colorblind optimum."""
    if not instance.locations_are_points():
        raise ParseError("farthest-point baseline needs centers at the points")
    k = instance.k if k is None else k
    if k < 1:
        raise ParseError("k must be >= 1")
    n = instance.n
    chosen = [0]
    dist = instance.d_pp[0].copy()
    while len(chosen) < min(k, n):
        nxt = int(np.argmax(dist))
        if dist[nxt] <= 0:
            break  # all points coincide with a chosen center
        chosen.append(nxt)
        dist = np.minimum(dist, instance.d_pp[nxt])
    return _finish(instance, Objective("kcenter"), chosen,
                   "farthest_point", "2*OPT")


def hs_ksupplier(instance: Instance, k: int | None = None) -> BaselineResult:
    """Ascending threshold scan: at each candidate radius, greedily pick a
    maximal set of points no two of which share a location within the
    radius; when the set fits the budget and every point has a location in
    range, serving each picked point from its nearest location covers
    everything within three times the radius."""
    k = instance.k if k is None else k
    if k < 1:
        raise ParseError("k must be >= 1")
    d = instance.d_lp
    for tau in np.unique(d):
        within = d <= tau + 1e-12  # (m, n)
        if not within.any(axis=0).all():
            continue
        share = (within.astype(np.uint8).T @ within.astype(np.uint8)) > 0
        picked = []
        dominated = np.zeros(instance.n, dtype=bool)
        for u in range(instance.n):
            if not dominated[u]:
                picked.append(u)
                dominated |= share[u]
        if len(picked) > k:
            continue
        centers = []
        for u in picked:
            cands = np.flatnonzero(within[:, u])
            centers.append(int(cands[np.argmin(d[cands, u])]))
        return _finish(instance, Objective("ksupplier"), centers,
                       "threshold_scan", "3*OPT")
    raise ParseError("no radius serves every point")  # unreachable


def _service_cost(d, centers):
    return d[sorted(centers)].min(axis=0)


def local_search_kmedian(instance: Instance, k: int | None = None,
                         max_iters: int = 200) -> BaselineResult:
    """Greedy seeding then single-swap descent over candidate centers."""
    k = instance.k if k is None else k
    d = instance.d_lp
    m = instance.m
    open_set: list = []
    for _ in range(min(k, m)):
        best, best_cost = None, None
        for i in range(m):
            if i in open_set:
                continue
            c = float(_service_cost(d, open_set + [i]).sum())
            if best is None or c < best_cost - 1e-12:
                best, best_cost = i, c
        open_set.append(best)
    current = float(_service_cost(d, open_set).sum())
    for _ in range(max_iters):
        best_swap, best_cost = None, current
        for o in sorted(open_set):
            rest = [i for i in open_set if i != o]
            for cnd in range(m):
                if cnd in open_set:
                    continue
                c = float(_service_cost(d, rest + [cnd]).sum())
                if c < best_cost - 1e-12:
                    best_swap, best_cost = (o, cnd), c
        if best_swap is None:
            break
        o, cnd = best_swap
        open_set = [i for i in open_set if i != o] + [cnd]
        current = best_cost
    return _finish(instance, Objective("kmedian"), open_set, "local_search")


def lloyd_kmeans(instance: Instance, k: int | None = None, seed: int = 0,
                 max_iters: int = 100) -> BaselineResult:
    """Seeded center refinement over the discrete candidate set; each round
    re-centers every cluster at the candidate minimizing its summed squared
    distance."""
    k = instance.k if k is None else k
    rng = np.random.default_rng(seed)
    d = instance.d_lp  # squared distances for k-means instances
    m, n = d.shape
    centers = sorted(int(i) for i in rng.choice(m, size=min(k, m),
                                                replace=False))
    for _ in range(max_iters):
        assign = nearest_assignment(instance, centers)
        new_centers = []
        for c in centers:
            members = np.flatnonzero(assign == c)
            if members.size == 0:
                new_centers.append(c)
                continue
            totals = d[:, members].sum(axis=1)
            new_centers.append(int(np.argmin(totals)))
        new_centers = sorted(set(new_centers))
        if new_centers == centers:
            break
        centers = new_centers
    return _finish(instance, Objective("kmeans"), centers, "seeded_refinement")


def greedy_facility(instance: Instance) -> BaselineResult:
    """Open the single best facility, then keep opening whichever facility
    cuts total cost the most, until none helps."""
    d = instance.d_lp
    f = instance.open_costs
    m = instance.m
    first = int(np.argmin(f + d.sum(axis=1)))
    open_set = [first]
    service = d[first].copy()
    while True:
        best, best_gain = None, 1e-12
        for i in range(m):
            if i in open_set:
                continue
            gain = float(np.maximum(service - d[i], 0.0).sum()) - float(f[i])
            if gain > best_gain:
                best, best_gain = i, gain
        if best is None:
            break
        open_set.append(best)
        service = np.minimum(service, d[best])
    return _finish(instance, Objective("facility"), open_set, "greedy_opening")


BASELINES = {
    "farthest_point": gonzalez_kcenter,
    "threshold_scan": hs_ksupplier,
    "local_search": local_search_kmedian,
    "seeded_refinement": lloyd_kmeans,
    "greedy_opening": greedy_facility,
}


def resolve_baseline(name: str):
    """Baseline algorithm registered under `name`."""
    try:
        return BASELINES[name]
    except KeyError:
        known = ", ".join(sorted(BASELINES))
        raise ParseError(f"unknown baseline {name!r}; known: {known}") from None


def baseline_for(instance: Instance, objective: Objective,
                 seed: int = 0) -> BaselineResult:
    """Default baseline per objective."""
    kind = objective.kind
    if kind == "kcenter":
        return gonzalez_kcenter(instance)
    if kind == "ksupplier":
        return hs_ksupplier(instance)
    if kind == "kmedian":
        return local_search_kmedian(instance)
    if kind == "kmeans":
        return lloyd_kmeans(instance, seed=seed)
    if kind == "facility":
        return greedy_facility(instance)
    raise ParseError(f"no baseline for objective {kind}")
