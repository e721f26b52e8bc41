"""User clustering into disjoint elliptic cells.

The driver alternates between a silhouette-guided guess for the number of
clusters and a grow/split loop, then re-clusters any groups whose fitted
ellipses capture each other's users until every ellipse is user-disjoint.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import cut_tree, linkage
from scipy.spatial.distance import pdist, squareform

from .geometry import Ellipse, FitConfig, mvee

__all__ = [
    "AlgorithmTrace",
    "Cluster",
    "ClusterSet",
    "ClusteringConfig",
    "IterationRecord",
    "NoConvergenceError",
    "ellipse_clustering",
    "find_intersections",
    "grow_to_k",
    "normalized_distance",
    "select_k",
    "silhouette_index",
    "split_cluster",
    "ward_linkage",
]

_UNSPLITTABLE = float("-inf")

# Pool appearances a user may accumulate before their pool is collapsed into a
# single ellipse instead of being re-split.
_MERGE_PATIENCE = 8


@dataclass
class ClusteringConfig:
    k_max: int = 8
    silhouette_buffer: int = 2
    max_outer_iterations: int = 50
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.silhouette_buffer < 0:
            raise ValueError("silhouette_buffer must be non-negative")
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be at least 1")


@dataclass
class Cluster:
    members: frozenset[int]
    ellipse: Ellipse


@dataclass
class ClusterSet:
    """A set of clusters over one shared user array, indexed into ``users``."""

    users: np.ndarray
    clusters: list[Cluster]

    def member_points(self, m: int) -> np.ndarray:
        idx = sorted(self.clusters[m].members)
        return self.users[idx]


@dataclass
class IterationRecord:
    u_cond_size: int
    k_origin: int
    phase: int
    intersecting: tuple[int, ...]


@dataclass
class AlgorithmTrace:
    iterations: list[IterationRecord] = field(default_factory=list)
    converged: bool = False

    def u_cond_sizes(self) -> list[int]:
        sizes = [rec.u_cond_size for rec in self.iterations]
        if self.converged:
            sizes.append(0)
        return sizes

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": [
                {
                    "u_cond_size": rec.u_cond_size,
                    "k_origin": rec.k_origin,
                    "phase": rec.phase,
                    "intersecting": list(rec.intersecting),
                }
                for rec in self.iterations
            ],
        }


class NoConvergenceError(RuntimeError):
    """Raised when intersections persist past the outer-iteration budget."""

    def __init__(self, message: str, trace: AlgorithmTrace):
        super().__init__(message)
        self.trace = trace


def ward_linkage(points, k: int) -> np.ndarray:
    """Agglomerative Ward labels for exactly ``k`` clusters, 0-based."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if k == n:
        return np.arange(n)
    if k == 1:
        return np.zeros(n, dtype=int)
    merges = linkage(pts, method="ward")
    return cut_tree(merges, n_clusters=k).ravel()


def silhouette_index(points, labels) -> float:
    """Mean silhouette over all points.

    Points in singleton clusters contribute 0, as do points whose intra and
    inter distances are both zero (co-located duplicates).
    """
    pts = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise ValueError("silhouette needs at least two clusters")
    dist = squareform(pdist(pts))
    sums = np.stack([dist[:, labels == c].sum(axis=1) for c in uniq], axis=1)
    counts = np.array([(labels == c).sum() for c in uniq])
    own = np.searchsorted(uniq, labels)

    n = len(pts)
    scores = np.zeros(n)
    for i in range(n):
        c = own[i]
        if counts[c] == 1:
            continue
        a = sums[i, c] / (counts[c] - 1)
        other = np.arange(len(uniq)) != c
        b = float(np.min(sums[i, other] / counts[other]))
        denom = max(a, b)
        if denom > 0.0:
            scores[i] = (b - a) / denom
    return float(scores.mean())


def select_k(points, k_limit: int) -> int:
    """Silhouette-optimal cluster count in {2, ..., min(k_limit, n)}.

    Ties break toward the smaller k; fewer than two points give 1.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 2:
        return 1
    merges = linkage(pts, method="ward")
    best_k, best_score = 2, -np.inf
    for k in range(2, min(k_limit, n) + 1):
        labels = cut_tree(merges, n_clusters=k).ravel()
        score = silhouette_index(pts, labels)
        if score > best_score:
            best_k, best_score = k, score
    return best_k


def split_cluster(points, max_iterations: int = 100):
    """2-means split of ``points``; returns (idx_a, idx_b) local index arrays.

    Centers start at the farthest pair of points (first such pair on ties) so
    repeated runs agree bit for bit.  Returns None when there is nothing to
    split.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 2:
        return None
    dist = squareform(pdist(pts))
    i, j = np.unravel_index(int(np.argmax(dist)), dist.shape)
    centers = np.stack([pts[i], pts[j]])
    assign = np.zeros(n, dtype=bool)  # False -> center 0
    for _ in range(max_iterations):
        d0 = np.linalg.norm(pts - centers[0], axis=1)
        d1 = np.linalg.norm(pts - centers[1], axis=1)
        new_assign = d1 < d0
        if new_assign.all() or not new_assign.any():
            break
        if (new_assign == assign).all():
            break
        assign = new_assign
        centers = np.stack([pts[~assign].mean(axis=0), pts[assign].mean(axis=0)])
    if assign.all() or not assign.any():
        # co-located points collapse onto one center; peel the pair point off
        assign = np.zeros(n, dtype=bool)
        assign[j] = True
    return np.flatnonzero(~assign), np.flatnonzero(assign)


def normalized_distance(points, ellipse: Ellipse) -> float:
    """Sub-centroid separation over the full major-axis length.

    The split priority of the grow loop; -inf flags an unsplittable cluster.
    """
    parts = split_cluster(points)
    if parts is None:
        return _UNSPLITTABLE
    pts = np.asarray(points, dtype=float)
    gap = float(np.linalg.norm(pts[parts[0]].mean(axis=0) - pts[parts[1]].mean(axis=0)))
    major, _ = ellipse.semi_axes
    return gap / (2.0 * major)


def grow_to_k(points, k_origin: int, fit_cfg: FitConfig | None = None) -> ClusterSet:
    """Split the worst cluster in two until ``k_origin`` clusters exist.

    Starts from a single all-points cluster.  Stops early if every remaining
    cluster is a singleton.  Cluster members are indices into ``points``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("no points")
    if k_origin < 1:
        raise ValueError("k_origin must be at least 1")
    fit_cfg = fit_cfg or FitConfig()

    groups: list[np.ndarray] = [np.arange(len(pts))]
    ellipses: list[Ellipse] = [mvee(pts, fit_cfg)]
    while len(groups) < k_origin:
        scores = [normalized_distance(pts[g], e) for g, e in zip(groups, ellipses)]
        t = int(np.argmax(scores))
        if scores[t] == _UNSPLITTABLE:
            break
        local_a, local_b = split_cluster(pts[groups[t]])
        part_a, part_b = groups[t][local_a], groups[t][local_b]
        groups[t] = part_a
        ellipses[t] = mvee(pts[part_a], fit_cfg)
        groups.append(part_b)
        ellipses.append(mvee(pts[part_b], fit_cfg))
    clusters = [Cluster(frozenset(g.tolist()), e) for g, e in zip(groups, ellipses)]
    return ClusterSet(users=pts, clusters=clusters)


def find_intersections(cs: ClusterSet) -> set[int]:
    """Indices of clusters that geometrically share at least one user.

    Cluster m intersects m' when some user of either lies inside both
    ellipses (boundary inclusive).
    """
    flagged: set[int] = set()
    m_count = len(cs.clusters)
    inside: list[dict[int, bool]] = [{} for _ in cs.clusters]
    for m in range(m_count):
        for mp in range(m + 1, m_count):
            joint = cs.clusters[m].members | cs.clusters[mp].members
            if _shares_user(cs, m, mp, joint, inside):
                flagged.add(m)
                flagged.add(mp)
    return flagged


def _shares_user(cs, m, mp, joint, inside) -> bool:
    for u in joint:
        if _inside(cs, m, u, inside) and _inside(cs, mp, u, inside):
            return True
    return False


def _inside(cs, m, u, inside) -> bool:
    cache = inside[m]
    hit = cache.get(u)
    if hit is None:
        e = cs.clusters[m].ellipse
        hit = float(np.linalg.norm(e.A @ cs.users[u] - e.b)) <= 1.0
        cache[u] = hit
    return hit


def ellipse_clustering(
    users,
    cfg: ClusteringConfig | None = None,
    fit_cfg: FitConfig | None = None,
) -> tuple[int, ClusterSet, AlgorithmTrace]:
    """Partition users into disjoint elliptic cells.

    Outer loop: pick a cluster count for the unresolved users (silhouette in
    phase 1, one more than the previous overlap count in phase 2), grow to it,
    then send every cluster that shares a user back into the pool.  Finalized
    clusters stay in the intersection test so late refits cannot silently
    overlap them.  Returns (cluster count, clusters, trace); raises
    NoConvergenceError if overlap persists past the iteration budget.
    """
    cfg = cfg or ClusteringConfig()
    fit_cfg = fit_cfg or FitConfig()
    pts = np.atleast_2d(np.asarray(users, dtype=float))
    if pts.size == 0:
        raise ValueError("no users")

    trace = AlgorithmTrace()
    final: list[Cluster] = []
    u_cond = np.arange(len(pts))
    k_max = cfg.k_max
    phase = 1
    # highest cluster count already tried per unresolved pool; revisiting a
    # pool resumes one past it, otherwise the deterministic loop can cycle
    attempts: dict[frozenset[int], int] = {}
    # A contiguous patch of users may admit no disjoint-ellipse split at any
    # cluster count, in which case the only resolution is one ellipse over the
    # whole patch.  Users seen in the pool more than _MERGE_PATIENCE times mark
    # such a patch; merged pools are remembered so that a later pool absorbing
    # one merges again (each re-merge strictly grows the pool, so this ends).
    pool_visits: Counter[int] = Counter()
    merged: list[frozenset[int]] = []
    for _ in range(cfg.max_outer_iterations):
        pool = frozenset(int(i) for i in u_cond)
        pool_visits.update(pool)
        if any(m <= pool for m in merged) or max(pool_visits[i] for i in pool) > _MERGE_PATIENCE:
            k_origin = 1
            merged.append(pool)
        else:
            if phase == 1:
                k_origin = select_k(pts[u_cond], k_max + cfg.silhouette_buffer)
            else:
                k_origin = k_max + 1
            prior = attempts.get(pool)
            if prior is not None and prior >= k_origin:
                k_origin = prior + 1
            k_origin = min(k_origin, len(u_cond))
            attempts[pool] = k_origin
        grown = grow_to_k(pts[u_cond], k_origin, fit_cfg)
        fresh = [
            Cluster(frozenset(int(u_cond[i]) for i in c.members), c.ellipse)
            for c in grown.clusters
        ]
        combined = ClusterSet(users=pts, clusters=final + fresh)
        flagged = find_intersections(combined)
        trace.iterations.append(
            IterationRecord(
                u_cond_size=len(u_cond),
                k_origin=k_origin,
                phase=phase,
                intersecting=tuple(sorted(flagged)),
            )
        )
        final = [c for i, c in enumerate(combined.clusters) if i not in flagged]
        if not flagged:
            trace.converged = True
            return len(final), ClusterSet(users=pts, clusters=final), trace
        next_pool: set[int] = set()
        for i in flagged:
            next_pool |= combined.clusters[i].members
        u_cond = np.array(sorted(next_pool), dtype=int)
        k_max = len(flagged)
        phase = 2 if len(flagged) == k_origin else 1
    raise NoConvergenceError(
        f"no convergence after {cfg.max_outer_iterations} iterations "
        f"({len(u_cond)} users unresolved)",
        trace,
    )
