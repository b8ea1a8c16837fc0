"""Core data model: colored point sets, candidate centers, metrics, fairness
specifications, clusterings, and fairness audits.

Indices and ids: points and locations are addressed by integer index
internally (input order); every tie-break in the package resolves to the
lowest index.  String ids are kept for file round-trips only.

The "universe" is the point list followed by any locations that are not
points; the distance matrix is defined over the universe.  When centers may
only be placed at points (the usual k-center / k-median setting) every
location aliases a point and the universe is just the point list.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .errors import (
    InfeasibleFairnessError,
    MetricError,
    ParseError,
    WitnessError,
)

SNAP_TOL = 1e-7  # default tolerance for snapping near-integer masses

OBJECTIVE_KINDS = ("kcenter", "ksupplier", "kmedian", "kmeans", "facility")


def snap_tolerance(default: float = SNAP_TOL) -> float:
    """Snap tolerance, overridable through the FAIRCLUST_TOL env variable."""
    raw = os.environ.get("FAIRCLUST_TOL")
    if raw is None:
        return default
    try:
        value = float(raw)
    except ValueError as exc:
        raise ParseError(f"FAIRCLUST_TOL is not a number: {raw!r}") from exc
    if not 0 < value < 1:
        raise ParseError(f"FAIRCLUST_TOL out of range (0, 1): {value}")
    return value


@dataclass(frozen=True)
class Objective:
    """Clustering objective; `kind` is one of kcenter, ksupplier, kmedian,
    kmeans, facility."""

    kind: str

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ParseError(f"unknown objective: {self.kind!r}")

    @property
    def beta(self) -> float:
        # squared Euclidean distances obey the triangle inequality up to
        # a factor of 2; true metrics have factor 1
        return 2.0 if self.kind == "kmeans" else 1.0

    @property
    def threshold_mode(self) -> bool:
        """Max-radius objectives are solved through threshold feasibility."""
        return self.kind in ("kcenter", "ksupplier")

    @property
    def separable(self) -> bool:
        """Sum objectives; their rounding step carries per-arc costs."""
        return not self.threshold_mode

    @property
    def uses_open_costs(self) -> bool:
        return self.kind == "facility"


@dataclass(frozen=True, eq=False)
class Instance:
    point_ids: tuple
    colors: np.ndarray  # (n,) color index per point
    color_names: tuple
    location_ids: tuple
    loc_universe: np.ndarray  # (m,) universe index of each location
    open_costs: np.ndarray  # (m,) opening cost per location
    D: np.ndarray  # (U, U) distances over the universe
    k: int
    beta: float = 1.0  # relaxed triangle factor the matrix was validated under
    coords: np.ndarray | None = None  # (U, dim) coordinates when known

    def __post_init__(self):
        n, m, U = len(self.point_ids), len(self.location_ids), self.D.shape[0]
        if self.D.shape != (U, U):
            raise ParseError("distance matrix must be square")
        if len(self.colors) != n:
            raise ParseError("one color per point required")
        if len(self.loc_universe) != m or len(self.open_costs) != m:
            raise ParseError("location arrays disagree on m")
        if m == 0:
            raise ParseError("at least one candidate center location required")
        if not 1 <= self.k:
            raise ParseError(f"k must be >= 1, got {self.k}")
        if len(set(self.point_ids)) != n:
            raise ParseError("duplicate point ids")
        if len(set(self.location_ids)) != m:
            raise ParseError("duplicate location ids")
        if self.loc_universe.max(initial=-1) >= U:
            raise ParseError("location universe index out of range")

    @property
    def n(self) -> int:
        return len(self.point_ids)

    @property
    def m(self) -> int:
        return len(self.location_ids)

    @property
    def n_colors(self) -> int:
        return len(self.color_names)

    @property
    def d_lp(self) -> np.ndarray:
        """(m, n) matrix of location-to-point distances."""
        return self.D[np.ix_(self.loc_universe, np.arange(self.n))]

    @property
    def d_pp(self) -> np.ndarray:
        """(n, n) matrix of point-to-point distances."""
        return self.D[: self.n, : self.n]

    @property
    def color_counts(self) -> np.ndarray:
        return np.bincount(self.colors, minlength=self.n_colors)

    def ratios(self) -> tuple:
        """Global color ratios of the point set, as exact fractions."""
        counts = self.color_counts
        return tuple(Fraction(int(c), self.n) for c in counts)

    def color_mask(self, h: int) -> np.ndarray:
        return self.colors == h

    def locations_are_points(self) -> bool:
        return self.m == self.n and bool(
            np.array_equal(self.loc_universe, np.arange(self.n))
        )

    def with_k(self, k: int) -> "Instance":
        return replace(self, k=k)


def validate_metric(D: np.ndarray, beta: float = 1.0, exhaustive_limit: int = 200,
                    tol: float = 1e-9, sample: int = 200_000) -> None:
    """Check symmetry, zero diagonal, nonnegativity, and the (relaxed)
    triangle inequality d(a,c) <= beta*(d(a,b)+d(b,c)).

    All triples are scanned up to `exhaustive_limit` universe elements;
    larger matrices get a seeded random sample of triples.
    """
    U = D.shape[0]
    scale = max(1.0, float(np.max(D))) if U else 1.0
    if np.any(D < -tol * scale):
        raise MetricError("negative distance")
    if np.max(np.abs(np.diag(D))) > tol * scale:
        raise MetricError("nonzero diagonal")
    if np.max(np.abs(D - D.T)) > tol * scale:
        raise MetricError("asymmetric distance matrix")
    slack = tol * scale
    if U <= exhaustive_limit:
        # d[a, c] <= beta * (d[a, b] + d[b, c]) for every b, vectorized per b
        for b in range(U):
            lhs = D
            rhs = beta * (D[:, b][:, None] + D[b, :][None, :])
            if np.any(lhs > rhs + slack):
                a, c = np.argwhere(lhs > rhs + slack)[0]
                raise MetricError(
                    f"triangle violation at ({a},{b},{c}): "
                    f"{D[a, c]:.6g} > {beta}*({D[a, b]:.6g}+{D[b, c]:.6g})"
                )
    else:
        rng = np.random.default_rng(0)
        idx = rng.integers(0, U, size=(sample, 3))
        a, b, c = idx[:, 0], idx[:, 1], idx[:, 2]
        bad = D[a, c] > beta * (D[a, b] + D[b, c]) + slack
        if np.any(bad):
            j = int(np.flatnonzero(bad)[0])
            raise MetricError(
                f"triangle violation at sampled triple "
                f"({a[j]},{b[j]},{c[j]})"
            )


def validate_for_objective(instance: Instance, objective: Objective) -> None:
    """Objective-specific structural requirements."""
    if objective.kind == "kcenter" and not instance.locations_are_points():
        raise ParseError("kcenter requires centers to range over the points")
    if objective.kind == "kmeans":
        if instance.coords is None:
            raise ParseError("kmeans requires point coordinates")
        if instance.beta < 2.0:
            raise ParseError("kmeans instance must carry squared distances")
    if not objective.uses_open_costs and np.any(instance.open_costs != 0):
        raise ParseError(
            f"opening costs must be zero for objective {objective.kind}"
        )


# ---------------------------------------------------------------------------
# fairness specifications


def parse_fraction(text) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad fraction: {text!r}") from exc


@dataclass(frozen=True)
class FairnessSpec:
    """Per-color ratio interval [lower_h, upper_h] each cluster must satisfy.

    Bounds are exact rationals; `exact` mode pins both bounds to the global
    color ratios so every cluster must reproduce them exactly.
    """

    mode: str  # "exact" | "ranges"
    lower: tuple
    upper: tuple

    @classmethod
    def exact(cls, instance: Instance) -> "FairnessSpec":
        r = instance.ratios()
        return cls("exact", r, r)

    @classmethod
    def ranges(cls, lower, upper) -> "FairnessSpec":
        lo = tuple(parse_fraction(v) for v in lower)
        hi = tuple(parse_fraction(v) for v in upper)
        return cls("ranges", lo, hi)

    def validate(self, instance: Instance) -> None:
        if len(self.lower) != instance.n_colors or len(self.upper) != instance.n_colors:
            raise InfeasibleFairnessError("one bound pair per color required")
        for h, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if not (0 <= lo <= hi <= 1):
                raise InfeasibleFairnessError(
                    f"color {instance.color_names[h]}: bounds [{lo}, {hi}] "
                    "not nested in [0, 1]"
                )
            r = instance.ratios()[h]
            if not (lo <= r <= hi):
                # the whole point set is the one clustering that always exists;
                # if even it violates the bounds, nothing can satisfy them
                raise InfeasibleFairnessError(
                    f"global ratio {r} of color {instance.color_names[h]} "
                    f"outside [{lo}, {hi}]"
                )

    def is_exact(self) -> bool:
        return all(lo == hi for lo, hi in zip(self.lower, self.upper))


def fairlet_base(instance: Instance) -> tuple:
    """Smallest cluster size pattern realizing the global ratios exactly.

    Returns (base, per_color) with per_color[h] / base equal to the global
    ratio of color h and gcd(per_color + [base]) == 1.
    """
    ratios = instance.ratios()
    base = 1
    for r in ratios:
        base = base * r.denominator // math.gcd(base, r.denominator)
    counts = tuple(int(r * base) for r in ratios)
    if math.gcd(base, *counts) != 1:
        raise MetricError("fairlet base not in lowest terms")  # unreachable
    return base, counts


# ---------------------------------------------------------------------------
# clusterings


@dataclass(frozen=True, eq=False)
class IntegralClustering:
    """Open centers (ascending location indices) plus a total assignment of
    points to open centers and the objective value."""

    centers: tuple
    assignment: np.ndarray  # (n,) location index per point
    value: float

    def clusters(self) -> dict:
        """center -> sorted point indices; open centers may be empty."""
        out = {c: [] for c in self.centers}
        for j, i in enumerate(self.assignment):
            out[int(i)].append(j)
        return out

    def validate(self, instance: Instance, objective: Objective,
                 rel_tol: float = 1e-9) -> None:
        if len(self.centers) > instance.k:
            raise InfeasibleFairnessError(
                f"{len(self.centers)} centers exceed k={instance.k}"
            )
        if sorted(set(self.centers)) != list(self.centers):
            raise ParseError("centers must be strictly ascending")
        open_set = set(self.centers)
        for j, i in enumerate(self.assignment):
            if int(i) not in open_set:
                raise ParseError(f"point {j} assigned to closed center {i}")
        recomputed = cost(instance, objective, self.centers, self.assignment)
        scale = max(1.0, abs(recomputed))
        if abs(recomputed - self.value) > rel_tol * scale:
            raise ParseError(
                f"stored value {self.value} disagrees with recomputed "
                f"{recomputed}"
            )


def cost(instance: Instance, objective: Objective, centers, assignment) -> float:
    """Objective value of an assignment: max service distance for the radius
    objectives, summed service distance otherwise, plus opening costs for
    facility location.  Sums use math.fsum so equal multisets of terms
    produce identical floats."""
    d = instance.d_lp
    service = [float(d[int(assignment[j]), j]) for j in range(instance.n)]
    if objective.threshold_mode:
        return max(service, default=0.0)
    total = math.fsum(service)
    if objective.uses_open_costs:
        total = math.fsum([total] + [float(instance.open_costs[c]) for c in centers])
    return total


def cluster_color_counts(instance: Instance, clustering: IntegralClustering) -> dict:
    """center -> (g,) integer color counts of its cluster."""
    g = instance.n_colors
    out = {c: np.zeros(g, dtype=int) for c in clustering.centers}
    for j, i in enumerate(clustering.assignment):
        out[int(i)][instance.colors[j]] += 1
    return out


def is_exactly_fair(instance: Instance, fairness: FairnessSpec,
                    clustering: IntegralClustering) -> bool:
    """Rational per-cluster ratio check; empty clusters pass vacuously."""
    counts = cluster_color_counts(instance, clustering)
    for c, vec in counts.items():
        size = int(vec.sum())
        if size == 0:
            continue
        for h in range(instance.n_colors):
            r = Fraction(int(vec[h]), size)
            if not (fairness.lower[h] <= r <= fairness.upper[h]):
                return False
    return True


# ---------------------------------------------------------------------------
# fractional solutions and fairness audits


@dataclass(eq=False)
class FractionalSolution:
    """LP-style fractional assignment: x[i, j] is the weight of point j on
    location i, y[i] the fractional opening of location i.  Serves as the
    witness in essential-fairness audits."""

    centers: tuple
    x: np.ndarray  # (m, n)
    y: np.ndarray  # (m,)

    def mass(self) -> np.ndarray:
        """(m,) total fractional mass per location."""
        return self.x.sum(axis=1)

    def color_mass(self, instance: Instance) -> np.ndarray:
        """(g, m) fractional mass per color per location."""
        g = instance.n_colors
        out = np.zeros((g, self.x.shape[0]))
        for h in range(g):
            out[h] = self.x[:, instance.color_mask(h)].sum(axis=1)
        return out

    def fairness_violations(self, instance: Instance, fairness: FairnessSpec,
                            tol: float = 1e-6) -> list:
        """Constraint violations of the fair assignment polytope, as strings."""
        bad = []
        n, m = instance.n, instance.m
        colsum = self.x.sum(axis=0)
        j = int(np.argmax(np.abs(colsum - 1.0)))
        if abs(colsum[j] - 1.0) > tol:
            bad.append(f"point {j} total assignment {colsum[j]:.8f} != 1")
        if np.any(self.x < -tol):
            i, j = np.argwhere(self.x < -tol)[0]
            bad.append(f"negative weight x[{i},{j}]")
        closed = np.setdiff1d(np.arange(m), np.asarray(self.centers, dtype=int))
        if closed.size and np.any(self.x[closed] > tol):
            i = int(closed[np.argmax(self.x[closed].sum(axis=1))])
            bad.append(f"mass on closed location {i}")
        mass = self.mass()
        cmass = self.color_mass(instance)
        for i in self.centers:
            if mass[i] <= tol:
                continue
            for h in range(instance.n_colors):
                lo = float(fairness.lower[h]) * mass[i]
                hi = float(fairness.upper[h]) * mass[i]
                if cmass[h, i] < lo - tol or cmass[h, i] > hi + tol:
                    bad.append(
                        f"location {i} color {instance.color_names[h]}: "
                        f"mass {cmass[h, i]:.8f} outside "
                        f"[{lo:.8f}, {hi:.8f}]"
                    )
        return bad


def snap_value(v: float, tol: float) -> float:
    """Round to the nearest integer when within tol of it."""
    r = round(v)
    return float(r) if abs(v - r) <= tol else float(v)


@dataclass
class ClusterAudit:
    center: int
    size: int
    color_counts: tuple
    ratio_ok: bool
    witness_mass: float | None = None
    witness_color_mass: tuple | None = None
    sandwich_ok: bool | None = None


@dataclass
class FairnessAudit:
    exact_fair: bool
    essentially_fair: bool | None
    max_additive_violation: float | None
    clusters: list
    violations: list

    def to_dict(self) -> dict:
        return {
            "exact_fair": self.exact_fair,
            "essentially_fair": self.essentially_fair,
            "max_additive_violation": self.max_additive_violation,
            "clusters": [
                {
                    "center": a.center,
                    "size": a.size,
                    "color_counts": list(a.color_counts),
                    "ratio_ok": a.ratio_ok,
                    "witness_mass": a.witness_mass,
                    "witness_color_mass": (
                        None if a.witness_color_mass is None
                        else list(a.witness_color_mass)
                    ),
                    "sandwich_ok": a.sandwich_ok,
                }
                for a in self.clusters
            ],
            "violations": list(self.violations),
        }


def check_essential_fairness(instance: Instance, fairness: FairnessSpec,
                             clustering: IntegralClustering,
                             witness: FractionalSolution | None,
                             snap: float | None = None) -> FairnessAudit:
    """Audit a clustering against a fractional witness.

    The clustering is essentially fair when, center by center and color by
    color, its integral masses lie between the floor and ceiling of the
    witness masses (totals included), the witness itself being a fair
    feasible fractional solution over the same open centers.  Witness masses
    within `snap` of an integer are snapped before flooring.
    """
    if snap is None:
        snap = snap_tolerance()
    counts = cluster_color_counts(instance, clustering)
    exact = is_exactly_fair(instance, fairness, clustering)
    audits = []
    if witness is None:
        for c in clustering.centers:
            vec = counts[c]
            audits.append(ClusterAudit(
                center=int(c), size=int(vec.sum()),
                color_counts=tuple(int(v) for v in vec),
                ratio_ok=_cluster_ratio_ok(vec, fairness),
            ))
        return FairnessAudit(exact, None, None, audits, [])

    if tuple(witness.centers) != tuple(clustering.centers):
        raise WitnessError(
            f"witness opens {witness.centers}, clustering opens "
            f"{clustering.centers}"
        )
    bad = witness.fairness_violations(instance, fairness)
    if bad:
        raise WitnessError("; ".join(bad))

    mass = witness.mass()
    cmass = witness.color_mass(instance)
    essentially = True
    worst = 0.0
    violations = []
    for c in clustering.centers:
        vec = counts[c]
        size = int(vec.sum())
        w_total = snap_value(float(mass[c]), snap)
        w_colors = tuple(snap_value(float(cmass[h, c]), snap)
                         for h in range(instance.n_colors))
        ok = math.floor(w_total) <= size <= math.ceil(w_total)
        worst = max(worst, abs(size - w_total))
        for h in range(instance.n_colors):
            ok = ok and math.floor(w_colors[h]) <= vec[h] <= math.ceil(w_colors[h])
            worst = max(worst, abs(int(vec[h]) - w_colors[h]))
        if not ok:
            essentially = False
            violations.append(
                f"center {c}: counts {tuple(int(v) for v in vec)} escape the "
                f"floor/ceiling envelope of witness masses {w_colors}"
            )
        audits.append(ClusterAudit(
            center=int(c), size=size,
            color_counts=tuple(int(v) for v in vec),
            ratio_ok=_cluster_ratio_ok(vec, fairness),
            witness_mass=w_total, witness_color_mass=w_colors,
            sandwich_ok=ok,
        ))
    return FairnessAudit(exact, essentially, worst, audits, violations)


def _cluster_ratio_ok(vec, fairness) -> bool:
    size = int(vec.sum())
    if size == 0:
        return True
    return all(
        fairness.lower[h] <= Fraction(int(vec[h]), size) <= fairness.upper[h]
        for h in range(len(vec))
    )


# ---------------------------------------------------------------------------
# construction helpers and file loading


def build_instance(coords=None, colors=None, k=1, color_names=None,
                   point_ids=None, loc_coords=None, loc_ids=None,
                   open_costs=None, D=None, squared=False,
                   validate: bool = True) -> Instance:
    """Assemble an Instance from coordinates and/or an explicit matrix.

    Locations default to the points themselves.  With `squared` the matrix
    holds squared Euclidean distances (the k-means semimetric, beta = 2).
    """
    if colors is None:
        raise ParseError("colors required")
    colors = np.asarray(colors, dtype=int)
    n = len(colors)
    if color_names is None:
        color_names = tuple(f"c{h}" for h in range(int(colors.max()) + 1 if n else 0))
    if point_ids is None:
        point_ids = tuple(str(j) for j in range(n))
    all_coords = None
    if coords is not None:
        coords = np.asarray(coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
    if loc_coords is not None:
        loc_coords = np.asarray(loc_coords, dtype=float)
        if loc_coords.ndim == 1:
            loc_coords = loc_coords[:, None]
        if coords is None:
            raise ParseError("point coordinates required with location coordinates")
        m_extra = len(loc_coords)
        loc_universe = np.arange(n, n + m_extra)
        all_coords = np.vstack([coords, loc_coords])
        if loc_ids is None:
            loc_ids = tuple(f"f{i}" for i in range(m_extra))
    else:
        loc_universe = np.arange(n)
        loc_ids = tuple(point_ids) if loc_ids is None else loc_ids
        all_coords = coords
    m = len(loc_universe)
    if open_costs is None:
        open_costs = np.zeros(m)
    open_costs = np.asarray(open_costs, dtype=float)
    if D is None:
        if all_coords is None:
            raise ParseError("either coordinates or a distance matrix required")
        diff = all_coords[:, None, :] - all_coords[None, :, :]
        sq = np.einsum("abk,abk->ab", diff, diff)
        D = sq if squared else np.sqrt(sq)
    else:
        D = np.asarray(D, dtype=float)
    beta = 2.0 if squared else 1.0
    inst = Instance(
        point_ids=tuple(point_ids), colors=colors,
        color_names=tuple(color_names), location_ids=tuple(loc_ids),
        loc_universe=loc_universe, open_costs=open_costs, D=D, k=k,
        beta=beta, coords=all_coords,
    )
    if validate:
        validate_metric(D, beta=beta)
    return inst


@dataclass
class LoadResult:
    instance: Instance
    fairness: FairnessSpec | None = None
    objective: Objective | None = None
    fixed_centers: tuple | None = None  # location indices


def _read_points_csv(path) -> tuple:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty points file")
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["id", "color"]:
        raise ParseError(f"{path}: header must start with id,color")
    dim = len(header) - 2
    ids, colors, coords = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields")
        ids.append(row[0].strip())
        colors.append(row[1].strip())
        try:
            coords.append([float(v) for v in row[2:]])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: bad coordinate") from exc
    return ids, colors, np.array(coords).reshape(len(ids), dim)


def _read_locations_csv(path) -> tuple:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty locations file")
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["id", "f"]:
        raise ParseError(f"{path}: header must start with id,f")
    ids, costs, coords = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        ids.append(row[0].strip())
        try:
            costs.append(float(row[1]))
            coords.append([float(v) for v in row[2:]])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: bad number") from exc
    return ids, np.array(costs), np.array(coords).reshape(len(ids), len(header) - 2)


def _color_table(raw_colors) -> tuple:
    names = tuple(sorted(set(raw_colors)))
    index = {c: h for h, c in enumerate(names)}
    return names, np.array([index[c] for c in raw_colors], dtype=int)


def load_instance(source, k: int | None = None,
                  objective: Objective | None = None,
                  locations_path=None, fairness_mode: str | None = None,
                  ranges=None, validate: bool = True) -> LoadResult:
    """Load an instance from a points CSV (plus optional locations CSV) or a
    JSON document (path or dict).

    JSON keys: points (id/color/x), optional locations (id/f/x), optional
    matrix over points-then-locations, k, optional objective, optional
    fairness, optional fixed_centers.  CSV input needs k (and the objective
    for k-means, whose matrix is built squared) from the caller.
    """
    if isinstance(source, dict):
        return _load_json_obj(source, k, objective, fairness_mode, ranges, validate)
    text = str(source)
    if text.endswith(".json"):
        with open(text) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{text}: {exc}") from exc
        return _load_json_obj(obj, k, objective, fairness_mode, ranges, validate)
    ids, raw_colors, coords = _read_points_csv(text)
    color_names, colors = _color_table(raw_colors)
    squared = objective is not None and objective.kind == "kmeans"
    loc_kw = {}
    if locations_path is not None:
        lids, lcosts, lcoords = _read_locations_csv(locations_path)
        loc_kw = dict(loc_coords=lcoords, loc_ids=tuple(lids), open_costs=lcosts)
    if k is None:
        raise ParseError("k required for CSV input")
    inst = build_instance(coords=coords, colors=colors, k=k,
                          color_names=color_names, point_ids=tuple(ids),
                          squared=squared, validate=validate, **loc_kw)
    fairness = _make_fairness(inst, fairness_mode, ranges)
    return LoadResult(inst, fairness, objective, None)


def _make_fairness(inst, fairness_mode, ranges) -> FairnessSpec | None:
    if fairness_mode is None:
        return None
    if fairness_mode == "exact":
        spec = FairnessSpec.exact(inst)
    elif fairness_mode == "ranges":
        if ranges is None:
            raise ParseError("ranges required for ranged fairness")
        lo, hi = [], []
        for name in inst.color_names:
            if name not in ranges:
                raise ParseError(f"no range for color {name}")
            pair = ranges[name]
            lo.append(parse_fraction(pair[0]))
            hi.append(parse_fraction(pair[1]))
        spec = FairnessSpec.ranges(lo, hi)
    else:
        raise ParseError(f"unknown fairness mode {fairness_mode!r}")
    spec.validate(inst)
    return spec


def _load_json_obj(obj, k, objective, fairness_mode, ranges, validate) -> LoadResult:
    if "points" not in obj:
        raise ParseError("JSON instance needs a points array")
    pts = obj["points"]
    ids = [str(p["id"]) for p in pts]
    color_names, colors = _color_table([str(p["color"]) for p in pts])
    coords = None
    if pts and "x" in pts[0]:
        coords = np.array([[float(v) for v in p["x"]] for p in pts])
    locs = obj.get("locations")
    loc_kw = {}
    if locs:
        loc_kw["loc_ids"] = tuple(str(q["id"]) for q in locs)
        loc_kw["open_costs"] = np.array([float(q.get("f", 0.0)) for q in locs])
        if "x" in locs[0]:
            loc_kw["loc_coords"] = np.array(
                [[float(v) for v in q["x"]] for q in locs]
            )
    kk = obj.get("k", k)
    if kk is None:
        raise ParseError("k missing")
    obj_kind = obj.get("objective")
    if objective is None and obj_kind is not None:
        objective = Objective(str(obj_kind))
    squared = objective is not None and objective.kind == "kmeans"

    if "matrix" in obj and obj["matrix"] is not None:
        D = np.array(obj["matrix"], dtype=float)
        n = len(ids)
        if locs:
            m_extra = len(locs)
            loc_universe = np.arange(n, n + m_extra)
        else:
            loc_universe = np.arange(n)
            loc_kw.setdefault("loc_ids", tuple(ids))
        if D.shape[0] != n + (len(locs) if locs else 0):
            raise ParseError("matrix size disagrees with points+locations")
        inst = Instance(
            point_ids=tuple(ids), colors=colors, color_names=color_names,
            location_ids=tuple(loc_kw.get("loc_ids", tuple(ids))),
            loc_universe=loc_universe,
            open_costs=np.asarray(
                loc_kw.get("open_costs", np.zeros(len(loc_universe)))
            ),
            D=D, k=int(kk), beta=2.0 if squared else 1.0, coords=coords,
        )
        if validate:
            validate_metric(D, beta=inst.beta)
    else:
        if coords is None:
            raise ParseError("JSON instance needs coordinates or a matrix")
        if locs and "loc_coords" not in loc_kw:
            raise ParseError("locations need coordinates when no matrix given")
        inst = build_instance(coords=coords, colors=colors, k=int(kk),
                              color_names=color_names, point_ids=tuple(ids),
                              squared=squared, validate=validate, **loc_kw)

    fobj = obj.get("fairness")
    if fairness_mode is None and fobj is not None:
        fairness_mode = fobj.get("mode")
        if fairness_mode == "ranges" and ranges is None:
            ranges = fobj.get("ranges")
    fairness = _make_fairness(inst, fairness_mode, ranges)

    fixed = None
    if obj.get("fixed_centers"):
        by_id = {lid: i for i, lid in enumerate(inst.location_ids)}
        try:
            fixed = tuple(sorted(by_id[str(c)] for c in obj["fixed_centers"]))
        except KeyError as exc:
            raise ParseError(f"fixed center id not a location: {exc}") from exc
    return LoadResult(inst, fairness, objective, fixed)


def instance_to_json_obj(instance: Instance, fairness: FairnessSpec | None = None,
                         objective: Objective | None = None,
                         fixed_centers=None, include_matrix: bool = True) -> dict:
    """Serializable dict in the JSON instance schema."""
    pts = []
    for j in range(instance.n):
        p = {"id": instance.point_ids[j],
             "color": instance.color_names[int(instance.colors[j])]}
        if instance.coords is not None:
            p["x"] = [float(v) for v in instance.coords[j]]
        pts.append(p)
    obj = {"k": instance.k, "points": pts}
    if not instance.locations_are_points():
        locs = []
        for i in range(instance.m):
            q = {"id": instance.location_ids[i],
                 "f": float(instance.open_costs[i])}
            if instance.coords is not None:
                q["x"] = [float(v) for v in instance.coords[instance.loc_universe[i]]]
            locs.append(q)
        obj["locations"] = locs
    if include_matrix:
        obj["matrix"] = [[float(v) for v in row] for row in instance.D]
    if objective is not None:
        obj["objective"] = objective.kind
    if fairness is not None:
        if fairness.mode == "exact":
            obj["fairness"] = {"mode": "exact"}
        else:
            obj["fairness"] = {"mode": "ranges", "ranges": {
                instance.color_names[h]: [str(fairness.lower[h]),
                                          str(fairness.upper[h])]
                for h in range(instance.n_colors)
            }}
    if fixed_centers:
        obj["fixed_centers"] = [instance.location_ids[i] for i in fixed_centers]
    return obj
