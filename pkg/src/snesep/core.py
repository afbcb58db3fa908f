"""Geometric primitives shared by every other module.

A Dataset is a flat array of points carrying cluster labels, with every
cluster the same size.  A SeparationCertificate records whether the data
meets the two geometric hypotheses the certificates rely on: cluster
diameters at most 1, and inter-cluster distance at least a threshold that
grows like sqrt(5 ln n).  An Embedding is just a finite coordinate array.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


class ValidationError(ValueError):
    """Input data violates a structural requirement."""


class PreconditionError(RuntimeError):
    """Operation invoked outside the hypotheses it certifies under."""


# Dimension cutoff below which pairwise distances are accumulated from exact
# per-axis differences instead of the dot-product expansion.
_SMALL_DIM_DIRECT = 4


def pairwise_sq_dists(points: np.ndarray) -> np.ndarray:
    """Dense matrix of squared Euclidean distances.

    Symmetric with an exact zero diagonal.  Negative rounding residue from
    the dot-product expansion is clamped to zero.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValidationError(f"points must be 2-d, got shape {pts.shape}")
    if pts.shape[0] < 1:
        raise ValidationError("need at least one point")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("points contain non-finite values")
    k, dim = pts.shape
    if dim <= _SMALL_DIM_DIRECT:
        sq = np.zeros((k, k))
        for axis in range(dim):
            diff = pts[:, axis, None] - pts[None, :, axis]
            sq += diff * diff
    else:
        norms = np.einsum("ij,ij->i", pts, pts)
        sq = norms[:, None] + norms[None, :] - 2.0 * (pts @ pts.T)
        np.maximum(sq, 0.0, out=sq)
        sq = 0.5 * (sq + sq.T)
    np.fill_diagonal(sq, 0.0)
    return sq


def distance_matrix(points: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix, sqrt of pairwise_sq_dists."""
    return np.sqrt(pairwise_sq_dists(points))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled point cloud with n_clusters clusters of exactly cluster_size points.

    points is (k, dim) with k = n_clusters * cluster_size, labels holds the
    cluster id of each row.  Duplicate points are rejected at construction,
    ties in the input would otherwise poison every downstream count.
    """

    points: np.ndarray
    labels: np.ndarray
    n_clusters: int
    cluster_size: int

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        labs = np.asarray(self.labels)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labs)
        if pts.ndim != 2:
            raise ValidationError("points must be a 2-d array")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points contain non-finite values")
        if labs.ndim != 1 or labs.shape[0] != pts.shape[0]:
            raise ValidationError("labels must be 1-d and aligned with points")
        if not np.issubdtype(labs.dtype, np.integer):
            raise ValidationError("labels must be integers")
        n, a = self.n_clusters, self.cluster_size
        if n < 1:
            raise ValidationError("need at least one cluster")
        if a < 2:
            raise ValidationError("clusters must hold at least two points each")
        if pts.shape[0] != n * a:
            raise ValidationError(
                f"point count {pts.shape[0]} != n_clusters*cluster_size = {n * a}")
        counts = np.bincount(labs, minlength=n) if labs.size else np.zeros(n, int)
        if labs.min(initial=0) < 0 or labs.max(initial=0) >= n or not np.all(counts == a):
            raise ValidationError(
                "every cluster id in [0, n_clusters) must appear exactly cluster_size times")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValidationError("duplicate points are not allowed")
        pts.setflags(write=False)
        labs.setflags(write=False)

    @classmethod
    def from_arrays(cls, points: np.ndarray, labels: np.ndarray) -> "Dataset":
        labs = np.asarray(labels)
        if labs.size == 0:
            raise ValidationError("empty dataset")
        if not np.issubdtype(labs.dtype, np.integer):
            raise ValidationError("labels must be integers")
        n = int(labs.max()) + 1
        if labs.size % max(n, 1) != 0:
            raise ValidationError("cluster sizes are unequal")
        return cls(np.asarray(points, dtype=float), labs, n, labs.size // n)

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def cluster_indices(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)

    def cluster_index_matrix(self) -> np.ndarray:
        """(n_clusters, cluster_size) array of row indices, one row per cluster."""
        return np.stack([self.cluster_indices(c) for c in range(self.n_clusters)])


@dataclass(frozen=True)
class SeparationCertificate:
    max_diameter: float
    min_separation: float
    threshold: float
    satisfied: bool


@dataclass(frozen=True, eq=False)
class Embedding:
    """Finite coordinates, one row per dataset point."""

    coords: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", arr)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"coords must be (k, d) with k,d >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("coords contain non-finite values")
        arr.setflags(write=False)

    @property
    def k(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]


def separation_threshold(n: int) -> float:
    """Blanket separation requirement sqrt(5 ln n); zero for a single cluster."""
    if n < 1:
        raise ValidationError("cluster count must be positive")
    if n == 1:
        return 0.0
    return math.sqrt(5.0 * math.log(n))


def validate_dataset(ds: Dataset, threshold: float) -> SeparationCertificate:
    """Measure cluster diameters and inter-cluster separation against a threshold.

    satisfied means every cluster has diameter <= 1 and no two points from
    different clusters are closer than the threshold.  A single cluster has
    infinite separation by convention.
    """
    if not math.isfinite(threshold) or threshold < 0:
        raise ValidationError("threshold must be finite and nonnegative")
    sq = pairwise_sq_dists(ds.points)
    same = ds.labels[:, None] == ds.labels[None, :]
    max_diam = math.sqrt(float(np.max(np.where(same, sq, 0.0))))
    if ds.n_clusters == 1:
        min_sep = math.inf
    else:
        min_sep = math.sqrt(float(np.min(np.where(same, np.inf, sq))))
    satisfied = (max_diam <= 1.0) and (min_sep >= threshold)
    return SeparationCertificate(max_diam, min_sep, threshold, satisfied)


# ---------------------------------------------------------------------------
# CSV formats.  Datasets: header "cluster,c0,..,c{D-1}".  Embeddings: header
# "cluster,e0,..,e{d-1}".  Values are written with full precision so that a
# round trip is bit exact.

def save_dataset(ds: Dataset, path: str) -> None:
    _write_labeled_csv(path, "c", ds.labels, ds.points)


def load_dataset(path: str) -> Dataset:
    labels, points = _read_labeled_csv(path, "c")
    return Dataset.from_arrays(points, labels)


def save_embedding(emb: Embedding, labels: np.ndarray, path: str) -> None:
    if emb.k != len(labels):
        raise ValidationError("embedding and labels disagree on point count")
    _write_labeled_csv(path, "e", np.asarray(labels), emb.coords)


def load_embedding(path: str) -> tuple[Embedding, np.ndarray]:
    labels, coords = _read_labeled_csv(path, "e")
    return Embedding(coords), labels


def _write_labeled_csv(path: str, prefix: str, labels: np.ndarray, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster"] + [f"{prefix}{i}" for i in range(values.shape[1])])
        for lab, row in zip(labels, values):
            writer.writerow([int(lab)] + [f"{v:.17g}" for v in row])


def _read_labeled_csv(path: str, prefix: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty file")
    header = rows[0]
    width = len(header) - 1
    if header[0] != "cluster" or width < 1 or header[1:] != [f"{prefix}{i}" for i in range(width)]:
        raise ValidationError(f"{path}: malformed header {header!r}")
    labels, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width + 1:
            raise ValidationError(f"{path}:{lineno}: expected {width + 1} fields, got {len(row)}")
        try:
            labels.append(int(row[0]))
            values.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    if not labels:
        raise ValidationError(f"{path}: no data rows")
    return np.asarray(labels, dtype=int), np.asarray(values, dtype=float)
