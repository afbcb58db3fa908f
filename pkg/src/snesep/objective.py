"""Embedding-side affinities, the matching loss, and its gradient.

The loss couples input affinities p to output affinities q through

    L = - sum_i sum_{j != i} p[i][j] * ln q[i][j],

where q is the row-normalized kernel profile of embedded distances.  All q
computations run through the same shifted log-space normalizer as the input
affinities.  loss() takes an explicit q matrix and refuses underflowed
entries; loss_at() evaluates the same quantity directly in log space and is
safe for arbitrarily spread embeddings.

The gradient with respect to row t is

    grad[t] = sum_{j != t} ((q - p)[t][j] + (q - p)[j][t]) * w(r_tj) * (psi_t - psi_j)

with w(r) = f'(r) / (r f(r)).  Pairs at exactly zero distance contribute
nothing; for the exponential profile (whose derivative does not vanish at 0)
that convention is a genuine choice and is flagged with a warning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from snesep.affinity import AffinityMatrix, row_softmax_excluding_diag
from snesep.core import Embedding, ValidationError, distance_matrix
from snesep.kernels import KernelSpec, grad_weight, log_evaluate

BALL_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class LossValue:
    total: float
    per_point: np.ndarray


def output_affinities(emb: Embedding, kern: KernelSpec) -> AffinityMatrix:
    if emb.k < 2:
        raise ValidationError("need at least two embedded points")
    scores = log_evaluate(kern, distance_matrix(emb.coords))
    values, _ = row_softmax_excluding_diag(scores)
    return AffinityMatrix(values, "output")


def loss(p: AffinityMatrix, q: AffinityMatrix) -> LossValue:
    """Strict loss from explicit affinity matrices.

    Any q entry that is exactly zero where p is positive signals underflow
    (the built-in kernels are strictly positive) and raises.
    """
    if p.values.shape != q.values.shape:
        raise ValidationError("p and q must have the same shape")
    mask = p.values > 0.0
    if np.any(q.values[mask] == 0.0):
        raise ValidationError(
            "q underflowed to zero where p > 0; evaluate via loss_at for spread embeddings")
    safe_q = np.where(mask, q.values, 1.0)
    per_point = -np.sum(np.where(mask, p.values * np.log(safe_q), 0.0), axis=1)
    return _finish_loss(per_point)


def loss_at(p: AffinityMatrix, emb: Embedding, kern: KernelSpec) -> LossValue:
    """Loss of an embedding, evaluated fully in log space."""
    _check_pair(p, emb)
    scores = log_evaluate(kern, distance_matrix(emb.coords))
    _, log_norm = row_softmax_excluding_diag(scores)
    log_q = scores - log_norm[:, None]
    per_point = -np.sum(np.where(p.values > 0.0, p.values * log_q, 0.0), axis=1)
    return _finish_loss(per_point)


def _finish_loss(per_point: np.ndarray) -> LossValue:
    total = float(np.sum(per_point))
    if not np.isfinite(total):
        raise ArithmeticError("loss is non-finite")
    if total < -1e-12:
        raise ArithmeticError(f"loss {total} fell below zero, normalization is broken")
    return LossValue(total, per_point)


def loss_gradient(p: AffinityMatrix, emb: Embedding, kern: KernelSpec) -> np.ndarray:
    """(k, d) gradient of loss_at with respect to the embedding coordinates."""
    _check_pair(p, emb)
    _, grad = loss_and_gradient(p.values, emb.coords, kern)
    return grad


def loss_and_gradient(p_values: np.ndarray, coords: np.ndarray,
                      kern: KernelSpec) -> tuple[float, np.ndarray]:
    """Fused loss and gradient sharing one distance matrix, the hot path."""
    dists = distance_matrix(coords)
    scores = log_evaluate(kern, dists)
    q, log_norm = row_softmax_excluding_diag(scores)
    log_q = scores - log_norm[:, None]
    per_point = -np.sum(np.where(p_values > 0.0, p_values * log_q, 0.0), axis=1)
    total = float(np.sum(per_point))

    coincident = (dists == 0.0)
    if kern.family == "exponential" and np.any(coincident[~np.eye(len(dists), dtype=bool)]):
        warnings.warn(
            "coincident embedded points under the exponential kernel, "
            "their gradient term is set to zero by convention", RuntimeWarning)
    delta = q - p_values
    weights = (delta + delta.T) * grad_weight(kern, dists)
    weights[coincident] = 0.0
    grad = weights.sum(axis=1)[:, None] * coords - weights @ coords
    return total, grad


def _check_pair(p: AffinityMatrix, emb: Embedding) -> None:
    if p.k != emb.k:
        raise ValidationError("affinity matrix and embedding disagree on point count")
    if emb.k < 2:
        raise ValidationError("need at least two embedded points")


@dataclass(frozen=True)
class CheckReport:
    worst_slack: float
    passed: bool
    pairs_checked: int
    worst_pair: tuple[int, int]


def inverse_q_ball_check(emb: Embedding, kern: KernelSpec) -> CheckReport:
    """Certify 1/q[i][j] >= #{l != i : |psi_i - psi_l| <= |psi_i - psi_j|}.

    The count excludes the center point itself but keeps everything else in
    the closed ball, duplicates included.  Monotone profiles make each
    in-ball term of the normalizer at least as large as the term at j, so
    the inequality is exact up to rounding; slack below -1e-9 fails.
    """
    if emb.k < 2:
        raise ValidationError("need at least two embedded points")
    dists = distance_matrix(emb.coords)
    q = output_affinities(emb, kern).values
    k = emb.k
    counts = np.empty((k, k), dtype=float)
    sorted_rows = np.sort(dists, axis=1)
    for i in range(k):
        counts[i] = np.searchsorted(sorted_rows[i], dists[i], side="right") - 1
    # subnormal q overflows 1/q to inf; that is the right conservative value
    with np.errstate(divide="ignore", over="ignore"):
        inv_q = np.where(q > 0.0, 1.0 / np.where(q > 0.0, q, 1.0), np.inf)
    slack = inv_q - counts
    off = ~np.eye(k, dtype=bool)
    flat = np.where(off, slack, np.inf)
    worst_idx = np.unravel_index(np.argmin(flat), flat.shape)
    worst = float(flat[worst_idx])
    return CheckReport(worst, worst >= -BALL_SLACK, k * (k - 1),
                       (int(worst_idx[0]), int(worst_idx[1])))
