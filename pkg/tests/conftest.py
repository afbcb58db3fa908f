"""Shared fixtures, brute-force oracles, and the acceptance line recorder.

The oracles here are deliberately slow pure-python reimplementations used
to cross-check the vectorized library code on small instances.
"""

import math

import numpy as np
import pytest

from snesep import Dataset, Embedding

_CRITERIA: list[str] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    line = f"{name}: {'pass' if passed else 'FAIL'} ({detail})"
    _CRITERIA.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


def brute_sq_dists(points: np.ndarray) -> np.ndarray:
    k = len(points)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            out[i, j] = float(np.sum((points[i] - points[j]) ** 2))
    return out


def brute_affinities(points: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    sq = brute_sq_dists(points)
    k = len(points)
    out = np.zeros((k, k))
    for i in range(k):
        weights = [math.exp(-sq[i, j] / (2.0 * sigmas[i] ** 2)) if j != i else 0.0
                   for j in range(k)]
        total = sum(weights)
        for j in range(k):
            out[i, j] = weights[j] / total
    return out


def brute_output_affinities(coords: np.ndarray, profile) -> np.ndarray:
    k = len(coords)
    out = np.zeros((k, k))
    for i in range(k):
        weights = [profile(float(np.linalg.norm(coords[i] - coords[j]))) if j != i else 0.0
                   for j in range(k)]
        total = sum(weights)
        for j in range(k):
            out[i, j] = weights[j] / total
    return out


def brute_loss(p: np.ndarray, q: np.ndarray) -> float:
    total = 0.0
    k = len(p)
    for i in range(k):
        for j in range(k):
            if i != j and p[i, j] > 0:
                total -= p[i, j] * math.log(q[i, j])
    return total


def brute_quality(emb: Embedding, ds: Dataset, include_center: bool) -> float:
    coords = emb.coords
    total = 0.0
    pairs = 0
    for c in range(ds.n_clusters):
        idx = ds.cluster_indices(c)
        for x in idx:
            for y in idx:
                if x == y:
                    continue
                r = float(np.linalg.norm(coords[x] - coords[y]))
                count = sum(1 for u in range(ds.k)
                            if float(np.linalg.norm(coords[x] - coords[u])) <= r)
                if not include_center:
                    count -= 1
                total += math.log(count)
                pairs += 1
    return total / pairs


def random_dataset(rng: np.random.Generator, n: int, a: int, dim: int,
                   spread: float = 20.0) -> Dataset:
    """Well-separated clusters without the generator, for oracle tests."""
    centers = spread * rng.standard_normal((n, dim))
    while n > 1:
        d = np.linalg.norm(centers[:, None] - centers[None, :], axis=2)
        np.fill_diagonal(d, np.inf)
        if d.min() > 8.0:
            break
        centers = spread * rng.standard_normal((n, dim))
    labels = np.repeat(np.arange(n), a)
    points = centers[labels] + 0.1 * rng.standard_normal((n * a, dim))
    return Dataset.from_arrays(points, labels)


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
