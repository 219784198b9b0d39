"""Seeded k-means over window pixels, producing centroids with acceptance radii.

A training window is clustered with k-means++ initialization followed by
Lloyd refinement, both driven by one integer seed so that identical inputs
always reproduce identical results. Each centroid gets an acceptance radius
estimated from the spread of its own members; pixels beyond every radius
will later classify as unknown.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .colorlab import LabColor


@dataclass(frozen=True)
class ClusterConfig:
    """Tunables for window clustering and model maintenance."""

    k_max: int = 8
    suggested_k: tuple[int, int] = (2, 5)
    max_iter: int = 50
    tol: float = 0.05
    n_init: int = 10
    radius_quantile: float = 0.99
    radius_inflation: float = 1.25
    r_min: float = 2.0
    subsample_cap: int = 100_000
    merge_eps: float = 3.0


@dataclass(frozen=True)
class PointSet:
    """Lab points with optional positive integer multiplicities."""

    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (n, 3), got {pts.shape}")
        object.__setattr__(self, "points", pts)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.int64)
            if w.shape != (pts.shape[0],):
                raise ValueError("weights must match point count")
            if pts.shape[0] and w.min() < 1:
                raise ValueError("weights must be positive")
            object.__setattr__(self, "weights", w)

    @classmethod
    def from_lab(cls, colors: Iterable[LabColor]) -> "PointSet":
        return cls(np.array([tuple(c) for c in colors], dtype=np.float64).reshape(-1, 3))

    def __len__(self) -> int:
        return self.points.shape[0]

    def effective_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(len(self), dtype=np.float64)
        return self.weights.astype(np.float64)


@dataclass(frozen=True)
class ClusterResult:
    """Outcome of clustering one window.

    `radii` and `seed` are filled by cluster_window; plain lloyd leaves them
    unset. `counts` sums to the (weighted) size of the clustered sample and
    `inertia_trace` records the objective after every assignment sweep.
    """

    centroids: np.ndarray
    counts: np.ndarray
    radii: np.ndarray | None
    inertia: float
    iterations: int
    seed: int | None
    labels: np.ndarray | None = None
    inertia_trace: tuple[float, ...] = ()

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _sq_dist_to_point(points: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = points - c
    return (d * d).sum(axis=1)


def _assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels and squared distances; ties go to the lower index."""
    diff = points[:, None, :] - centroids[None, :, :]
    d2 = (diff * diff).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(points.shape[0]), labels]


def _restart_seed(seed: int, round_: int) -> int:
    """Derived seed for restart rounds; round 0 keeps the caller's seed."""
    return seed if round_ == 0 else (seed * 1_000_003 + round_) & 0x7FFFFFFF


def kmeans_pp_init(ps: PointSet, k: int, seed: int) -> np.ndarray:
    """Seeded k-means++ seeding: first pick uniform, then proportional to D^2.

    Weights act as multiplicities throughout. Raises when k exceeds the
    number of distinct points, since duplicated centroids would be
    unavoidable.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = len(ps)
    if n == 0:
        raise ValueError("cannot seed centroids from an empty point set")
    distinct = np.unique(ps.points, axis=0).shape[0]
    if k > distinct:
        raise ValueError(f"k={k} exceeds the {distinct} distinct points available")

    rng = np.random.default_rng(seed)
    w = ps.effective_weights()
    chosen = [int(rng.choice(n, p=w / w.sum()))]
    d2 = _sq_dist_to_point(ps.points, ps.points[chosen[0]])
    while len(chosen) < k:
        mass = w * d2
        total = mass.sum()
        # total > 0 is guaranteed: k <= distinct means some point differs
        # from every chosen centroid.
        pick = int(rng.choice(n, p=mass / total))
        chosen.append(pick)
        d2 = np.minimum(d2, _sq_dist_to_point(ps.points, ps.points[pick]))
    return ps.points[chosen].copy()


def lloyd(ps: PointSet, init: np.ndarray, max_iter: int = 50, tol: float = 0.05) -> ClusterResult:
    """Lloyd refinement from the given initial centroids.

    Alternates nearest-centroid assignment and weighted-mean updates until
    the largest centroid movement drops to `tol` (in delta-E) or `max_iter`
    sweeps have run. A cluster that loses all members is re-seeded at the
    point currently farthest from its assigned centroid. The final
    assignment is recomputed against the returned centroids, so counts are
    a fixed point of reassignment.
    """
    init = np.asarray(init, dtype=np.float64)
    if init.ndim != 2 or init.shape[0] < 1:
        raise ValueError("init must contain at least one centroid")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if len(ps) == 0:
        raise ValueError("cannot cluster an empty point set")

    points = ps.points
    w = ps.effective_weights()
    k = init.shape[0]
    centroids = init.copy()

    labels, dmin = _assign(points, centroids)
    trace = [float((w * dmin).sum())]
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        wsum = np.bincount(labels, weights=w, minlength=k)
        new_centroids = np.empty_like(centroids)
        for dim in range(3):
            s = np.bincount(labels, weights=w * points[:, dim], minlength=k)
            new_centroids[:, dim] = np.divide(s, wsum, out=centroids[:, dim].copy(),
                                              where=wsum > 0)
        empties = np.flatnonzero(wsum == 0)
        if empties.size:
            # Farthest points first; stable order keeps reseeding deterministic.
            order = np.argsort(-dmin, kind="stable")
            for slot, cluster in enumerate(empties):
                new_centroids[cluster] = points[order[slot]]

        movement = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        labels, dmin = _assign(points, centroids)
        trace.append(float((w * dmin).sum()))
        if movement <= tol:
            break

    counts = np.rint(np.bincount(labels, weights=w, minlength=k)).astype(np.int64)
    return ClusterResult(
        centroids=centroids,
        counts=counts,
        radii=None,
        inertia=trace[-1],
        iterations=iterations,
        seed=None,
        labels=labels,
        inertia_trace=tuple(trace),
    )


def estimate_radius(distances: Sequence[float] | np.ndarray, q: float,
                    inflation: float = 1.0, r_min: float = 0.0) -> float:
    """Acceptance radius: nearest-rank quantile of member distances, inflated.

    The rank is ceil(q * n) (1-based); a 1e-9 slack guards against float
    representation of q * n landing just above an integer (e.g. 0.9 * 10).
    """
    arr = np.asarray(distances, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("estimate_radius requires at least one distance")
    if not 0.0 < q <= 1.0:
        raise ValueError(f"quantile must lie in (0, 1], got {q}")
    if inflation < 1.0:
        raise ValueError(f"inflation must be >= 1, got {inflation}")
    if r_min < 0.0:
        raise ValueError(f"r_min must be >= 0, got {r_min}")
    if arr.min() < 0.0:
        raise ValueError("distances must be non-negative")
    rank = min(arr.size, max(1, math.ceil(q * arr.size - 1e-9)))
    value = float(np.sort(arr)[rank - 1])
    return max(r_min, inflation * value)


def cluster_window(pixels: PointSet, k: int, seed: int,
                   cfg: ClusterConfig = ClusterConfig()) -> ClusterResult:
    """Cluster one training window into k centroid candidates with radii.

    Windows above cfg.subsample_cap pixels are uniformly subsampled (with
    the same seed) before clustering; counts then refer to the sample.
    Runs cfg.n_init restarts with seeds derived from `seed` and keeps the
    lowest-inertia result, since a single Lloyd run can stall in a local
    minimum on weakly structured windows.
    """
    if not 1 <= k <= cfg.k_max:
        raise ValueError(f"k must lie in [1, {cfg.k_max}], got {k}")
    if cfg.n_init < 1:
        raise ValueError(f"n_init must be >= 1, got {cfg.n_init}")
    n = len(pixels)
    if n == 0:
        raise ValueError("window contains no pixels")

    ps = pixels
    if n > cfg.subsample_cap:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(n, size=cfg.subsample_cap, replace=False))
        w = None if pixels.weights is None else pixels.weights[idx]
        ps = PointSet(pixels.points[idx], w)

    distinct = np.unique(ps.points, axis=0).shape[0]
    if distinct < k:
        raise ValueError(
            f"window holds only {distinct} distinct colors for k={k}; "
            "select a larger window or reduce k")

    result: ClusterResult | None = None
    for round_ in range(cfg.n_init):
        init = kmeans_pp_init(ps, k, _restart_seed(seed, round_))
        candidate = lloyd(ps, init, max_iter=cfg.max_iter, tol=cfg.tol)
        if result is None or candidate.inertia < result.inertia:
            result = candidate

    assert result is not None and result.labels is not None
    radii = np.empty(result.k, dtype=np.float64)
    for j in range(result.k):
        member = result.labels == j
        if not member.any():
            radii[j] = cfg.r_min
            continue
        d = np.sqrt(_sq_dist_to_point(ps.points[member], result.centroids[j]))
        radii[j] = estimate_radius(d, cfg.radius_quantile, cfg.radius_inflation, cfg.r_min)

    return replace(result, radii=radii, seed=seed)
