"""Row-normalized input affinities and their certified bounds.

Row i of the input affinity matrix is a softmax over squared distances,

    p[i][j] = exp(-|x_i - x_j|^2 / (2 sigma_i^2)) / sum_{l != i} exp(-|x_i - x_l|^2 / (2 sigma_i^2)),

with the diagonal excluded from the normalization.  Every row is computed in
shifted log space (subtract the row maximum before exponentiating) so that
widely separated data cannot overflow or lose the dominant terms.  There is
no symmetrization step and no perplexity calibration, scales are explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from snesep.core import Dataset, PreconditionError, SeparationCertificate, ValidationError, pairwise_sq_dists

ROW_SUM_TOL = 1e-12
BOUND_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Scales:
    """Per-point bandwidths sigma_i, all positive and finite."""

    sigma: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "sigma", arr)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("sigma must be a nonempty 1-d array")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValidationError("every sigma must be positive and finite")
        arr.setflags(write=False)


def uniform_scales(k: int, sigma: float) -> Scales:
    if k < 1:
        raise ValidationError("need at least one point")
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValidationError(f"sigma must be positive and finite, got {sigma}")
    return Scales(np.full(k, float(sigma)))


def theorem_scales(k: int) -> Scales:
    """The certified setting: every bandwidth equal to 2^(-1/2)."""
    return uniform_scales(k, 2.0 ** -0.5)


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    """Row-stochastic similarity matrix with a zero diagonal.

    kind is "input" for data-side affinities and "output" for embedding-side
    ones; the tag is informational and not enforced by consumers.
    """

    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", arr)
        if self.kind not in ("input", "output"):
            raise ValidationError(f"kind must be 'input' or 'output', got {self.kind!r}")
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError("affinity matrix must be square")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("affinities contain non-finite values")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValidationError("affinities must lie in [0, 1]")
        if np.any(np.diagonal(arr) != 0.0):
            raise ValidationError("affinity diagonal must be zero")
        if arr.shape[0] > 1:
            rowsums = arr.sum(axis=1)
            worst = float(np.max(np.abs(rowsums - 1.0)))
            if worst > ROW_SUM_TOL:
                raise ValidationError(f"rows must sum to 1 within {ROW_SUM_TOL}, worst error {worst:g}")
        arr.setflags(write=False)

    @property
    def k(self) -> int:
        return self.values.shape[0]


def row_softmax_excluding_diag(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shared stabilized normalizer.

    Given a (k, k) score matrix, returns (P, log_norm) where row i of P is
    softmax(scores[i]) over the off-diagonal entries and
    log q[i][j] = scores[i][j] - log_norm[i] exactly in real arithmetic.
    """
    k = scores.shape[0]
    if k < 2:
        raise ValidationError("need at least two points to normalize a row")
    shifted = scores.copy()
    np.fill_diagonal(shifted, -np.inf)
    row_max = shifted.max(axis=1)
    with np.errstate(invalid="ignore"):
        expd = np.exp(shifted - row_max[:, None])
    np.fill_diagonal(expd, 0.0)
    sums = expd.sum(axis=1)
    values = expd / sums[:, None]
    np.fill_diagonal(values, 0.0)
    log_norm = row_max + np.log(sums)
    return values, log_norm


def input_affinities(ds: Dataset, scales: Scales) -> AffinityMatrix:
    if scales.sigma.shape[0] != ds.k:
        raise ValidationError("scales length must match the dataset")
    if ds.k < 2:
        raise ValidationError("need at least two points")
    sq = pairwise_sq_dists(ds.points)
    scores = -sq / (2.0 * scales.sigma[:, None] ** 2)
    values, _ = row_softmax_excluding_diag(scores)
    return AffinityMatrix(values, "input")


@dataclass(frozen=True)
class BoundCheck:
    name: str
    observed: float | None
    bound: float
    slack: float
    passed: bool


@dataclass(frozen=True)
class BoundReport:
    checks: tuple[BoundCheck, ...]
    passed: bool


def affinity_bounds_check(p: AffinityMatrix, ds: Dataset,
                          cert: SeparationCertificate) -> BoundReport:
    """Worst-case affinity entries against their certified envelopes.

    Requires a satisfied separation certificate and affinities computed at
    the certified bandwidth 2^(-1/2).  Checks, with c the measured
    separation and a the cluster size:

        same-cluster p <= 2e / a
        same-cluster p >= 1 / (6a)
        cross-cluster p <= 2 e^(1 - c^2) / a
    """
    if not cert.satisfied:
        raise PreconditionError("affinity bounds are only certified for separated data")
    if p.k != ds.k:
        raise ValidationError("affinity matrix size must match the dataset")
    a = ds.cluster_size
    same = ds.labels[:, None] == ds.labels[None, :]
    off_diag = ~np.eye(ds.k, dtype=bool)
    same_vals = p.values[same & off_diag]
    upper = 2.0 * math.e / a
    lower = 1.0 / (6.0 * a)
    checks = []
    observed_hi = float(same_vals.max())
    checks.append(BoundCheck("same_cluster_upper", observed_hi, upper,
                             upper - observed_hi, observed_hi <= upper + BOUND_SLACK))
    observed_lo = float(same_vals.min())
    checks.append(BoundCheck("same_cluster_lower", observed_lo, lower,
                             observed_lo - lower, observed_lo >= lower - BOUND_SLACK))
    c = cert.min_separation
    cross_bound = 2.0 * math.exp(1.0 - c * c) / a if math.isfinite(c) else 0.0
    if ds.n_clusters > 1:
        observed_x = float(p.values[~same].max())
        checks.append(BoundCheck("cross_cluster_upper", observed_x, cross_bound,
                                 cross_bound - observed_x, observed_x <= cross_bound + BOUND_SLACK))
    else:
        checks.append(BoundCheck("cross_cluster_upper", None, cross_bound, math.inf, True))
    return BoundReport(tuple(checks), all(ch.passed for ch in checks))
