"""Synthetic clustered data with controlled diameter and separation.

Clusters are balls of diameter at most 1.  Centers are placed so the
minimum distance between points of different clusters either clears the
separation requirement by a chosen margin (mode "satisfy") or lands on a
chosen value below it (mode "violate", used for degradation sweeps).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from snesep.affinity import input_affinities, theorem_scales
from snesep.core import Dataset, ValidationError, distance_matrix, separation_threshold
from snesep.kernels import KernelSpec, gaussian_kernel
from snesep.optimizer import OptimizerConfig, default_config, init_embedding, minimize
from snesep.quality import contiguity_report, quality_exact

_CLUSTER_SHAPES = ("gaussian_clipped", "uniform_ball")
_MODES = ("satisfy", "violate")
_PLACEMENT_TRIES = 1_000_000


@dataclass(frozen=True)
class GeneratorSpec:
    """Knobs for one synthetic dataset.

    margin multiplies the separation requirement in satisfy mode and must
    be at least 1 there.  target_c is the minimum cross-cluster point
    distance to hit in violate mode.
    """
    n_clusters: int
    cluster_size: int
    dim: int
    seed: int
    margin: float = 2.0
    mode: str = "satisfy"
    target_c: float | None = None
    cluster_shape: str = "gaussian_clipped"

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValidationError("need at least one cluster")
        if self.cluster_size < 2:
            raise ValidationError("need at least two points per cluster")
        if self.dim < 1:
            raise ValidationError("dim must be positive")
        if self.mode not in _MODES:
            raise ValidationError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.cluster_shape not in _CLUSTER_SHAPES:
            raise ValidationError(
                f"cluster_shape must be one of {_CLUSTER_SHAPES}, got {self.cluster_shape!r}")
        if not math.isfinite(self.margin) or self.margin <= 0:
            raise ValidationError("margin must be positive and finite")
        if self.mode == "satisfy":
            if self.margin < 1.0:
                raise ValidationError("satisfy mode needs margin >= 1")
            if self.target_c is not None:
                raise ValidationError("target_c only applies to violate mode")
        else:
            if self.n_clusters < 2:
                raise ValidationError("violate mode needs at least two clusters")
            if self.target_c is None or not math.isfinite(self.target_c) or self.target_c <= 0:
                raise ValidationError("violate mode needs a positive finite target_c")


def _cluster_offsets(rng: np.random.Generator, size: int, dim: int, shape: str) -> np.ndarray:
    """Points inside the ball of radius 1/2 around the origin."""
    if shape == "uniform_ball":
        direction = rng.standard_normal((size, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = 0.5 * rng.random(size) ** (1.0 / dim)
        return direction * radius[:, None]
    # gaussian_clipped: isotropic with sigma = 1/(6 sqrt(dim)) so the typical
    # norm stays near 1/6 in every dimension, resampling the rare point that
    # leaves the ball
    sigma = 1.0 / (6.0 * math.sqrt(dim))
    out = sigma * rng.standard_normal((size, dim))
    norms = np.linalg.norm(out, axis=1)
    while np.any(norms > 0.5):
        bad = norms > 0.5
        out[bad] = sigma * rng.standard_normal((int(bad.sum()), dim))
        norms[bad] = np.linalg.norm(out[bad], axis=1)
    return out


def _place_centers(rng: np.random.Generator, n: int, dim: int, spacing: float) -> np.ndarray:
    """Sequential placement, each new center at distance spacing from some
    existing one and at least spacing from all of them."""
    centers = np.zeros((n, dim))
    floor = spacing * (1.0 - 1e-12)
    for i in range(1, n):
        for _ in range(_PLACEMENT_TRIES):
            anchor = centers[rng.integers(0, i)]
            direction = rng.standard_normal(dim)
            direction /= np.linalg.norm(direction)
            candidate = anchor + spacing * direction
            if np.min(np.linalg.norm(centers[:i] - candidate, axis=1)) >= floor:
                centers[i] = candidate
                break
        else:
            raise ValidationError(
                f"could not place center {i} after {_PLACEMENT_TRIES} tries; "
                "raise dim or lower n_clusters")
    return centers


def _min_cross_distance(points: np.ndarray, labels: np.ndarray) -> float:
    dist = distance_matrix(points)
    cross = labels[:, None] != labels[None, :]
    if not np.any(cross):
        return math.inf
    return float(dist[cross].min())


def generate(spec: GeneratorSpec) -> Dataset:
    """Draw one dataset according to spec.  Deterministic in spec.seed."""
    rng = np.random.default_rng(spec.seed)
    n, a, dim = spec.n_clusters, spec.cluster_size, spec.dim
    labels = np.repeat(np.arange(n), a)
    offsets = np.concatenate(
        [_cluster_offsets(rng, a, dim, spec.cluster_shape) for _ in range(n)])

    if spec.mode == "satisfy":
        threshold = separation_threshold(max(n, 2))
        spacing = spec.margin * threshold * (1.0 + 1e-9) + 1.0
        centers = _place_centers(rng, n, dim, spacing)
        points = centers[labels] + offsets
        return Dataset.from_arrays(points, labels)

    # violate mode: lay centers out at roughly the right spacing, then scale
    # them about the origin until the closest cross-cluster point pair sits
    # on target_c.  The measured distance grows with the scale once the
    # centers dominate, so bisection pins it to float precision.
    target = float(spec.target_c)
    spacing = target + 1.0
    centers = _place_centers(rng, n, dim, spacing)

    def measured(lam: float) -> float:
        return _min_cross_distance(lam * centers[labels] + offsets, labels)

    lo, hi = 0.0, 1.25
    while measured(hi) < target:
        hi *= 2.0
        if hi > 1e6:
            raise ValidationError("violate-mode scaling failed to bracket target_c")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if measured(mid) < target:
            lo = mid
        else:
            hi = mid
    points = hi * centers[labels] + offsets
    return Dataset.from_arrays(points, labels)


@dataclass(frozen=True)
class SweepCell:
    target_c: float
    seed: int
    measured_c: float
    q_exact: float
    mismatches: int
    contiguous: bool | None


@dataclass(frozen=True)
class SweepReport:
    targets: tuple
    seeds: tuple
    cells: tuple = field(repr=False)

    def by_target(self, c: float) -> list:
        return [cell for cell in self.cells if cell.target_c == c]

    def summary(self) -> dict:
        out = {}
        for c in self.targets:
            group = self.by_target(c)
            out[f"{c:g}"] = {
                "mean_quality": float(np.mean([g.q_exact for g in group])),
                "mean_mismatches": float(np.mean([g.mismatches for g in group])),
                "contiguous_fraction": float(np.mean(
                    [1.0 if g.contiguous else 0.0 for g in group])),
            }
        return out


def separation_sweep(base: GeneratorSpec, targets, seeds,
                     cfg: OptimizerConfig | None = None,
                     kern: KernelSpec | None = None, d: int = 1) -> SweepReport:
    """Embed violate-mode datasets across separation targets and seeds.

    Each (target, seed) cell regenerates the data with a cell-specific
    generator seed (seed * 1000 + target index, so cells never share
    draws), optimizes an embedding at sigma = 2^(-1/2), and records the
    quality score plus nearest-center mismatch count.
    """
    targets = [float(c) for c in targets]
    seeds = [int(s) for s in seeds]
    if not targets or not seeds:
        raise ValidationError("sweep needs at least one target and one seed")
    if cfg is None:
        cfg = default_config()
    if kern is None:
        kern = gaussian_kernel()
    cells = []
    for ci, c in enumerate(targets):
        for seed in seeds:
            cell_seed = seed * 1000 + ci
            spec = replace(base, mode="violate", target_c=c, seed=cell_seed)
            ds = generate(spec)
            p = input_affinities(ds, theorem_scales(ds.k))
            start = init_embedding(ds.k, d, cfg.init_scale, cell_seed)
            emb, _ = minimize(p, start, kern, replace(cfg, seed=cell_seed))
            mismatches, contiguous = contiguity_report(emb, ds)
            cells.append(SweepCell(c, seed, _min_cross_distance(ds.points, ds.labels),
                                   quality_exact(emb, ds), mismatches, contiguous))
    return SweepReport(tuple(targets), tuple(seeds), tuple(cells))


def save_sweep(report: SweepReport, csv_path, json_path=None) -> None:
    """CSV of cells, plus an optional JSON per-target summary."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["c", "seed", "Q", "mismatches", "contiguous"])
        for cell in report.cells:
            writer.writerow([f"{cell.target_c:.17g}", cell.seed,
                             f"{cell.q_exact:.17g}", cell.mismatches,
                             "" if cell.contiguous is None else int(cell.contiguous)])
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(report.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
