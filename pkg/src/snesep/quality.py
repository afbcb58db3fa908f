"""Embedding quality as expected log ball occupancy.

For an ordered pair (x, y) inside one cluster, draw the closed ball around
the embedded x whose radius is the embedded distance to y, and count the
embedded points it contains.  The score

    Q = mean over clusters of mean over ordered pairs of ln(count)

uses the count that includes the center point itself, so the best possible
pair (y is the unique nearest neighbor of x) contributes ln 2.  Counts are
multiset counts: duplicate embedded coordinates all count, and radius
comparisons are exact floating-point <=.

The center-excluded variant quality_exact_excl_center drops the center from
every count.  It is the quantity the certified inequality chain controls
(see the certify module), the inclusive variant is the reported score.

Two analytic anchors per cluster size a:

    lemma_lower(a)   = ln a - 1                      floor for every embedding
    lemma_perfect(a) = (1/(a-1)) * sum_{i=1}^{a-1} ln(i+1)   best achievable

perfect_embedding builds a line embedding attaining lemma_perfect exactly:
within a cluster the point offsets form an integer Sidon set (all pairwise
sums distinct), which makes every distance from any fixed center unique, so
the i-th nearest clustermate sits in a ball of exactly i + 1 points.
Clusters are spread 10x further apart than any cluster is wide, so no ball
reaches a foreign cluster.  Integer coordinates keep every comparison exact
in floating point at any practical cluster size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from snesep.core import Dataset, Embedding, ValidationError, distance_matrix


def ball_count_incl_center(emb: Embedding, center_idx: int, radius: float) -> int:
    """Points within the closed ball, the center itself included."""
    return _ball_count(emb, center_idx, radius)


def ball_count_excl_center(emb: Embedding, center_idx: int, radius: float) -> int:
    """Points within the closed ball, minus the center point."""
    return _ball_count(emb, center_idx, radius) - 1


def _ball_count(emb: Embedding, center_idx: int, radius: float) -> int:
    if not 0 <= center_idx < emb.k:
        raise ValidationError(f"center index {center_idx} out of range")
    if not (math.isfinite(radius) and radius >= 0):
        raise ValidationError("radius must be finite and nonnegative")
    diff = emb.coords - emb.coords[center_idx]
    dists = np.sqrt(np.sum(diff * diff, axis=1))
    return int(np.count_nonzero(dists <= radius))


def _log_count_total(emb: Embedding, ds: Dataset, include_center: bool) -> float:
    if emb.k != ds.k:
        raise ValidationError("embedding and dataset disagree on point count")
    dists = distance_matrix(emb.coords)
    total = 0.0
    for c in range(ds.n_clusters):
        members = ds.cluster_indices(c)
        for x in members:
            row_sorted = np.sort(dists[x])
            radii = dists[x, members[members != x]]
            counts = np.searchsorted(row_sorted, radii, side="right")
            if not include_center:
                counts = counts - 1
            total += float(np.sum(np.log(counts)))
    return total


def quality_exact(emb: Embedding, ds: Dataset) -> float:
    """Exact Q over all ordered same-cluster pairs, center-inclusive counts."""
    a = ds.cluster_size
    return _log_count_total(emb, ds, True) / (ds.n_clusters * a * (a - 1))


def quality_exact_excl_center(emb: Embedding, ds: Dataset) -> float:
    """Exact Q with center-excluded counts, the certified-chain variant."""
    a = ds.cluster_size
    return _log_count_total(emb, ds, False) / (ds.n_clusters * a * (a - 1))


def quality_mc(emb: Embedding, ds: Dataset, samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of Q with its standard error.

    Each sample draws a cluster uniformly, then an ordered pair of distinct
    members uniformly, and records the log of the inclusive ball count.
    """
    if emb.k != ds.k:
        raise ValidationError("embedding and dataset disagree on point count")
    if samples < 1:
        raise ValidationError("need at least one sample")
    rng = np.random.default_rng(seed)
    n, a = ds.n_clusters, ds.cluster_size
    clusters = rng.integers(0, n, size=samples)
    xs = rng.integers(0, a, size=samples)
    ys = rng.integers(0, a - 1, size=samples)
    ys = np.where(ys >= xs, ys + 1, ys)
    idx = ds.cluster_index_matrix()
    gx = idx[clusters, xs]
    gy = idx[clusters, ys]

    dists = distance_matrix(emb.coords)
    draws = np.empty(samples)
    order = np.argsort(gx, kind="stable")
    start = 0
    while start < samples:
        center = gx[order[start]]
        stop = start
        while stop < samples and gx[order[stop]] == center:
            stop += 1
        block = order[start:stop]
        row_sorted = np.sort(dists[center])
        counts = np.searchsorted(row_sorted, dists[center, gy[block]], side="right")
        draws[block] = np.log(counts)
        start = stop
    mean = float(np.mean(draws))
    stderr = 0.0 if samples == 1 else float(np.std(draws, ddof=1) / math.sqrt(samples))
    return mean, stderr


def lemma_bounds(a: int) -> tuple[float, float]:
    """(floor for any embedding, best achievable value) for cluster size a."""
    if a < 2:
        raise ValidationError("cluster size must be at least 2")
    lower = math.log(a) - 1.0
    perfect = float(np.sum(np.log(np.arange(2.0, a + 1)))) / (a - 1)
    return lower, perfect


def theorem_upper(a: int) -> float:
    """Certified ceiling 200 ln(2a) for the optimized embedding's score."""
    if a < 2:
        raise ValidationError("cluster size must be at least 2")
    return 200.0 * math.log(2.0 * a)


def improved_upper(a: int) -> float:
    """Asymptotic ceiling 15 ln(2a), informational only."""
    if a < 2:
        raise ValidationError("cluster size must be at least 2")
    return 15.0 * math.log(2.0 * a)


def _next_prime(m: int) -> int:
    cand = max(m, 2)
    while True:
        if all(cand % d for d in range(2, int(math.isqrt(cand)) + 1)):
            return cand
        cand += 1


def _sidon_offsets(a: int) -> np.ndarray:
    # 2pj + (j^2 mod p) for prime p >= a is a classical Sidon construction;
    # strictly increasing because consecutive gaps are at least p + 1.
    p = _next_prime(a)
    j = np.arange(a, dtype=np.int64)
    return (2 * p * j + (j * j) % p).astype(float)


def perfect_embedding(ds: Dataset) -> Embedding:
    """Line embedding attaining the best achievable Q for this cluster count."""
    offsets = _sidon_offsets(ds.cluster_size)
    gap = 10.0 * (offsets[-1] + 1.0)
    coords = np.empty((ds.k, 1))
    for c in range(ds.n_clusters):
        coords[ds.cluster_indices(c), 0] = c * gap + offsets
    return Embedding(coords)


def contiguity_report(emb: Embedding, ds: Dataset) -> tuple[int, bool | None]:
    """(mismatches, contiguous) for an embedding of this dataset.

    mismatches counts points whose nearest embedded cluster centroid is not
    their own cluster's.  contiguous (line embeddings only, None otherwise)
    is whether the clusters occupy pairwise disjoint intervals.
    """
    if emb.k != ds.k:
        raise ValidationError("embedding and dataset disagree on point count")
    centroids = np.stack([emb.coords[ds.cluster_indices(c)].mean(axis=0)
                          for c in range(ds.n_clusters)])
    diff = emb.coords[:, None, :] - centroids[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    nearest = np.argmin(d2, axis=1)
    mismatches = int(np.count_nonzero(nearest != ds.labels))

    if emb.d != 1:
        return mismatches, None
    lows = np.array([emb.coords[ds.cluster_indices(c), 0].min() for c in range(ds.n_clusters)])
    highs = np.array([emb.coords[ds.cluster_indices(c), 0].max() for c in range(ds.n_clusters)])
    order = np.argsort(lows, kind="stable")
    contiguous = True
    for prev, nxt in zip(order[:-1], order[1:]):
        if highs[prev] >= lows[nxt]:
            contiguous = False
            break
    return mismatches, contiguous


@dataclass(frozen=True)
class QualityReport:
    q_exact: float
    q_mc: float
    q_mc_stderr: float
    mc_samples: int
    lemma_lower: float
    lemma_perfect: float
    theorem_upper: float
    mismatches: int
    contiguous: bool | None

    def __post_init__(self) -> None:
        if not self.lemma_lower <= self.lemma_perfect:
            raise ArithmeticError("lemma bounds out of order")
        if self.q_exact < self.lemma_lower - 1e-12:
            raise ArithmeticError(
                f"score {self.q_exact} beat the analytic floor {self.lemma_lower}, "
                "counting is broken")


def build_quality_report(emb: Embedding, ds: Dataset, mc_samples: int = 10_000,
                         mc_seed: int = 0) -> QualityReport:
    q = quality_exact(emb, ds)
    q_mc, stderr = quality_mc(emb, ds, mc_samples, mc_seed)
    lower, perfect = lemma_bounds(ds.cluster_size)
    mismatches, contiguous = contiguity_report(emb, ds)
    return QualityReport(q, q_mc, stderr, mc_samples, lower, perfect,
                         theorem_upper(ds.cluster_size), mismatches, contiguous)
