"""Adversarial fixture generators and exhaustive reference oracles.

The oracles enumerate assignments directly, in deterministic mixed-radix
order (point 0 is the most significant digit, candidate centers ascending),
with fairness checked in exact integer arithmetic on whole batches at a
time.  They share no code with the LP, flow, or rounding machinery, so they
can serve as an independent referee for it.  For the radius objectives the
enumeration is organized as an ascending scan over candidate radii: the
first radius admitting any fair assignment is the optimum, and a refutation
at a radius is an exhaustive scan of its (much smaller) assignment space.

`max_search` caps the number of assignment rows actually examined; the
nominal subset-times-assignments space is reported alongside for context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .errors import ParseError, SearchCapError
from .instance import (
    FairnessSpec,
    Instance,
    IntegralClustering,
    Objective,
    build_instance,
    cost,
)

CHUNK_ROWS = 200_000
DEFAULT_CAP = 100_000_000


@dataclass
class OracleResult:
    value: float | None
    clustering: IntegralClustering | None
    feasible: bool
    explored: int
    nominal_space: float


def nominal_search_space(m: int, n: int, k: int) -> float:
    total = 0
    for s in range(1, min(k, m) + 1):
        total += math.comb(m, s) * (s ** n)
    return float(total)


def _position_batches(sizes, chunk=CHUNK_ROWS):
    """Yield blocks of the mixed-radix product over digit ranges `sizes`
    (point 0 most significant); rows hold one digit per point."""
    npts = len(sizes)
    total = 1
    for s in sizes:
        total *= s
    start = 0
    while start < total:
        stop = min(total, start + chunk)
        idx = np.arange(start, stop, dtype=np.int64)
        P = np.empty((stop - start, npts), dtype=np.int64)
        rem = idx
        for j in range(npts - 1, -1, -1):
            P[:, j] = rem % sizes[j]
            rem = rem // sizes[j]
        yield P
        start = stop


def _fair_rows(P, colors, s, lower, upper):
    """Mask of assignment rows (cluster positions 0..s-1) whose induced
    clusters all meet the rational ratio bounds; exact integer arithmetic,
    empty clusters pass."""
    rows, n = P.shape
    g = len(lower)
    code = P * g + colors[None, :] + (np.arange(rows) * (s * g))[:, None]
    cnt = np.bincount(code.ravel(), minlength=rows * s * g)
    cnt = cnt.reshape(rows, s, g)
    size = cnt.sum(axis=2)
    ok = np.ones(rows, dtype=bool)
    for i in range(s):
        for h, (lo, hi) in enumerate(zip(lower, upper)):
            ok &= lo.numerator * size[:, i] <= lo.denominator * cnt[:, i, h]
            ok &= hi.denominator * cnt[:, i, h] <= hi.numerator * size[:, i]
    return ok


def _scan_subset(instance, fairness, S, allowed_pos, explored, max_search):
    """First fair assignment onto the open set S (positions restricted per
    point by allowed_pos); returns (row | None, explored)."""
    colors = instance.colors
    sizes = [len(a) for a in allowed_pos]
    pos_of = [np.asarray(a, dtype=np.int64) for a in allowed_pos]
    for Pd in _position_batches(sizes):
        explored += Pd.shape[0]
        if explored > max_search:
            raise SearchCapError(f"assignment scan exceeded cap {max_search}")
        P = np.empty_like(Pd)
        for j in range(instance.n):
            P[:, j] = pos_of[j][Pd[:, j]]
        ok = _fair_rows(P, colors, len(S), fairness.lower, fairness.upper)
        if ok.any():
            row = np.asarray(S, dtype=np.int64)[P[int(np.flatnonzero(ok)[0])]]
            return row, explored
    return None, explored


def _center_subsets(instance, centers):
    if centers is not None:
        return [tuple(sorted(centers))]
    return [
        S
        for s in range(1, min(instance.k, instance.m) + 1)
        for S in combinations(range(instance.m), s)
    ]


def radius_probe(instance: Instance, fairness: FairnessSpec, rho: float,
                 centers=None, max_search: int = DEFAULT_CAP,
                 _explored_so_far: int = 0):
    """Search for a fair assignment with every service distance <= rho.

    With `centers` given, all of them are open and assignments range over
    them; otherwise every center subset of size at most k is tried in
    ascending (size, lexicographic) order.  Returns an OracleResult whose
    `feasible` answers the probe, with value and clustering filled in from
    the first witness in enumeration order."""
    d = instance.d_lp
    nominal = nominal_search_space(
        instance.m if centers is None else len(centers),
        instance.n, instance.k)
    within = d <= rho + 1e-12  # (m, n)
    explored = _explored_so_far
    for S in _center_subsets(instance, centers):
        hit = within[list(S)]
        if not hit.any(axis=0).all():
            continue
        allowed_pos = [np.flatnonzero(hit[:, j]) for j in range(instance.n)]
        row, explored = _scan_subset(instance, fairness, S, allowed_pos,
                                     explored, max_search)
        if row is not None:
            open_set = tuple(sorted(set(int(i) for i in row))) \
                if centers is None else tuple(sorted(centers))
            val = cost(instance, Objective("kcenter"), open_set, row)
            return OracleResult(
                val, IntegralClustering(open_set, row, val),
                True, explored, nominal,
            )
    return OracleResult(None, None, False, explored, nominal)


def _radius_scan(instance, fairness, centers, max_search):
    d = instance.d_lp
    rows = d if centers is None else d[sorted(centers)]
    explored = 0
    for rho in np.unique(rows):
        res = radius_probe(instance, fairness, float(rho), centers=centers,
                           max_search=max_search, _explored_so_far=explored)
        explored = res.explored
        if res.feasible:
            return res
    return OracleResult(None, None, False, explored,
                        nominal_search_space(
                            instance.m if centers is None else len(centers),
                            instance.n, instance.k))


def _separable_scan(instance, objective, fairness, subsets, max_search):
    d = instance.d_lp
    f = instance.open_costs
    colors = instance.colors
    n = instance.n
    best_val, best_row, best_S = None, None, None
    explored = 0
    nominal = 0.0
    for S in subsets:
        S = tuple(S)
        s = len(S)
        nominal += float(s ** n)
        open_cost = math.fsum(float(f[i]) for i in S) \
            if objective.uses_open_costs else 0.0
        dS = d[list(S)]
        for P in _position_batches([s] * n):
            explored += P.shape[0]
            if explored > max_search:
                raise SearchCapError(
                    f"assignment scan exceeded cap {max_search}"
                )
            ok = _fair_rows(P, colors, s, fairness.lower, fairness.upper)
            if not ok.any():
                continue
            rows = np.flatnonzero(ok)
            service = dS[P[rows], np.arange(n)[None, :]].sum(axis=1)
            pos = int(np.argmin(service))
            val = float(service[pos]) + open_cost
            if best_val is None or val < best_val - 1e-15:
                best_val = val
                best_row = np.asarray(S, dtype=np.int64)[P[rows[pos]]]
                best_S = S
    if best_val is None:
        return OracleResult(None, None, False, explored, nominal)
    val = cost(instance, objective, best_S, best_row)
    return OracleResult(val, IntegralClustering(best_S, best_row, val),
                        True, explored, nominal)


def brute_force_fair_opt(instance: Instance, objective: Objective,
                         fairness: FairnessSpec,
                         max_search: int = DEFAULT_CAP) -> OracleResult:
    """Exhaustive fair optimum over center subsets of size at most k and all
    assignments onto them."""
    if objective.threshold_mode:
        return _radius_scan(instance, fairness, None, max_search)
    subsets = (
        S
        for s in range(1, min(instance.k, instance.m) + 1)
        for S in combinations(range(instance.m), s)
    )
    return _separable_scan(instance, objective, fairness, subsets, max_search)


def brute_force_fair_assignment(instance: Instance, centers,
                                objective: Objective, fairness: FairnessSpec,
                                max_search: int = DEFAULT_CAP) -> OracleResult:
    """Exhaustive fair optimum with the given centers all open."""
    centers = tuple(sorted(centers))
    if objective.threshold_mode:
        return _radius_scan(instance, fairness, centers, max_search)
    return _separable_scan(instance, objective, fairness, [centers], max_search)


# ---------------------------------------------------------------------------
# adversarial generators


def gen_gap_instance(r: int):
    """Collinear alternating instance separating the fair LP from fair
    integral solutions.

    2r-1 unit-spaced points, color red at even positions and blue at odd,
    k = r-1 centers, per-cluster red share capped at (r-1)/(2r-3) and blue
    unconstrained.  The fair LP is feasible at radius 1 while every fair
    integral clustering needs radius at least floor((r-1)/2).
    """
    if r < 3:
        raise ParseError("need r >= 3")
    n = 2 * r - 1
    coords = np.arange(n, dtype=float)
    colors = np.array([0 if j % 2 == 0 else 1 for j in range(n)])
    inst = build_instance(coords=coords, colors=colors, k=r - 1,
                          color_names=("red", "blue"))
    fairness = FairnessSpec(
        "ranges",
        (Fraction(0), Fraction(0)),
        (Fraction(r - 1, 2 * r - 3), Fraction(1)),
    )
    fairness.validate(inst)
    return inst, fairness


def gen_exact_cover_instance(n_elements: int, sets):
    """Hardness gadget tying fair assignment cost to exact cover by 3-sets.

    Red set-vertices double as the fixed centers; each carries 3 private
    blue satellites.  Blue element vertices attach to the sets containing
    them, and n_elements/3 red connector vertices attach to every
    set-vertex.  Distances are shortest-path hops.  A fair (1 red : 3 blue
    per cluster) assignment of cost 1 exists iff `sets` contains an exact
    cover of the elements.

    Returns (instance, fairness, fixed_centers).
    """
    sets = [tuple(sorted(A)) for A in sets]
    if n_elements % 3 != 0 or n_elements <= 0:
        raise ParseError("element count must be a positive multiple of 3")
    for A in sets:
        if len(A) != 3 or not all(0 <= e < n_elements for e in A):
            raise ParseError(f"not a 3-element subset of the universe: {A}")
    covered = set(e for A in sets for e in A)
    if covered != set(range(n_elements)):
        raise ParseError("every element must appear in some set")
    F = len(sets)
    n_hubs = n_elements // 3
    # vertex layout: sets | elements | satellites (3 per set) | connectors
    off_elem = F
    off_sat = off_elem + n_elements
    off_hub = off_sat + 3 * F
    V = off_hub + n_hubs
    adj = [[] for _ in range(V)]

    def link(u, v):
        adj[u].append(v)
        adj[v].append(u)

    for a, A in enumerate(sets):
        for e in A:
            link(a, off_elem + e)
        for t in range(3):
            link(a, off_sat + 3 * a + t)
        for t in range(n_hubs):
            link(a, off_hub + t)
    D = np.zeros((V, V))
    for src in range(V):
        dist = np.full(V, -1, dtype=int)
        dist[src] = 0
        frontier = [src]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        if np.any(dist < 0):
            raise ParseError("gadget graph is disconnected")
        D[src] = dist
    colors = np.array(
        [0] * F + [1] * n_elements + [1] * (3 * F) + [0] * n_hubs
    )
    ids = (
        [f"S{a}" for a in range(F)]
        + [f"e{e}" for e in range(n_elements)]
        + [f"s{a}_{t}" for a in range(F) for t in range(3)]
        + [f"t{t}" for t in range(n_hubs)]
    )
    inst = Instance(
        point_ids=tuple(ids), colors=colors, color_names=("red", "blue"),
        location_ids=tuple(ids[:F]), loc_universe=np.arange(F),
        open_costs=np.zeros(F), D=D, k=F,
    )
    fairness = FairnessSpec.exact(inst)
    assert fairness.lower[0] == Fraction(1, 4), "gadget must be 1 red : 3 blue"
    return inst, fairness, tuple(range(F))


EXACT_PATTERNS = {
    2: [(1, 1), (1, 2), (1, 3), (2, 3)],
    3: [(1, 1, 1), (1, 1, 2), (1, 2, 2)],
    4: [(1, 1, 1, 1), (1, 1, 1, 2)],
}


def random_instance(seed: int, kind: str = "kmedian", n: int | None = None,
                    n_colors: int | None = None, k: int | None = None,
                    mode: str = "ranges"):
    """Seeded random instance: uniform planar points, colors arranged so the
    requested fairness mode is satisfiable.  Returns (instance, fairness,
    objective)."""
    rng = np.random.default_rng(seed)
    objective = Objective(kind)
    if n is None:
        n = int(rng.integers(10, 61))
    if n_colors is None:
        n_colors = int(rng.integers(2, 5))
    if k is None:
        k = int(rng.integers(2, 7))
    if mode == "exact":
        pats = EXACT_PATTERNS[n_colors]
        pat = pats[int(rng.integers(0, len(pats)))]
        base = sum(pat)
        t = max(1, min(60 // base, int(round(n / base))))
        n = base * t
        colors = np.repeat(np.arange(n_colors), np.array(pat) * t)
    else:
        colors = np.concatenate([
            np.arange(n_colors),
            rng.integers(0, n_colors, size=n - n_colors),
        ])
    rng.shuffle(colors)
    coords = rng.uniform(0.0, 10.0, size=(n, 2))
    loc_kw = {}
    if kind in ("ksupplier", "facility"):
        m = int(rng.integers(4, 13))
        loc_kw["loc_coords"] = rng.uniform(0.0, 10.0, size=(m, 2))
        if kind == "facility":
            loc_kw["open_costs"] = rng.uniform(0.5, 3.0, size=m)
    inst = build_instance(coords=coords, colors=colors, k=k,
                          squared=(kind == "kmeans"), **loc_kw)
    if mode == "exact":
        fairness = FairnessSpec.exact(inst)
    else:
        slack = Fraction(int(rng.integers(1, 3)), int(rng.integers(5, 10)))
        lo = [max(Fraction(0), r - slack) for r in inst.ratios()]
        hi = [min(Fraction(1), r + slack) for r in inst.ratios()]
        fairness = FairnessSpec.ranges(lo, hi)
    fairness.validate(inst)
    return inst, fairness, objective
