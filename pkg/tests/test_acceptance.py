"""Acceptance gate: criteria A1 through A9, one recorded line each.

A3 and A9 run the full ten-seed pipeline at n=10, a=100, D=100 and
dominate the runtime (roughly a minute per seed per kernel).  Everything
else is seconds.  Each test both asserts and prints its verdict through
record_criterion so the terminal summary shows one line per criterion.
"""

import math
import time
from dataclasses import dataclass

import numpy as np
import pytest

from snesep import (Dataset, Embedding, GeneratorSpec, OptimizerConfig,
                    affinity_bounds_check, cauchy_kernel, certify_chain,
                    certify_general_kernel, certify_lattice_loss,
                    contiguity_report, exponential_kernel, gaussian_kernel,
                    generate, init_embedding, input_affinities,
                    inverse_q_ball_check, lemma_bounds, loss_at,
                    loss_gradient, minimize, perfect_embedding, quality_exact,
                    quality_mc, separation_threshold, separation_sweep,
                    theorem_scales, theorem_upper, validate_dataset)

from conftest import random_dataset, record_criterion

SEEDS = tuple(range(10))
HARD_BOUND = theorem_upper(100)
MEDIAN_CAP = 3.0 * math.log(200.0)


@dataclass(frozen=True)
class PipelineRun:
    seed: int
    quality: float
    mismatches: int
    contiguous: bool
    seconds: float


def run_pipeline(kern):
    """Generate, embed with default Adam at d=1, and score, per seed."""
    runs = []
    first = None
    for s in SEEDS:
        t0 = time.perf_counter()
        ds = generate(GeneratorSpec(n_clusters=10, cluster_size=100,
                                    dim=100, seed=s))
        p = input_affinities(ds, theorem_scales(ds.k))
        cfg = OptimizerConfig(seed=s)
        init = init_embedding(ds.k, 1, cfg.init_scale, cfg.seed)
        emb, _ = minimize(p, init, kern, cfg)
        q = quality_exact(emb, ds)
        mismatches, contiguous = contiguity_report(emb, ds)
        runs.append(PipelineRun(s, q, mismatches, bool(contiguous),
                                time.perf_counter() - t0))
        if first is None:
            first = (ds, emb)
    return runs, first


@pytest.fixture(scope="module")
def gaussian_runs():
    return run_pipeline(gaussian_kernel())


@pytest.fixture(scope="module")
def cauchy_runs():
    return run_pipeline(cauchy_kernel())


def test_a1_quality_floor(rng):
    worst = math.inf
    for trial in range(100):
        n = int(rng.integers(1, 6))
        a = int(rng.integers(2, 7))
        d = int(rng.integers(1, 3))
        ds = random_dataset(rng, n, a, int(rng.integers(1, 4)))
        scale = (0.01, 1.0, 100.0)[trial % 3]
        coords = scale * rng.standard_normal((ds.k, d))
        if trial % 5 == 0:
            # quantized coordinates force heavy distance ties
            coords = np.round(coords / scale) * scale
        q = quality_exact(Embedding(coords), ds)
        worst = min(worst, q - (math.log(a) - 1.0))
    ok = worst >= -1e-12
    record_criterion("A1", ok,
                     f"100 random pairs, worst margin over ln(a)-1 = {worst:+.6f}")
    assert worst >= -1e-12


def test_a2_perfect_embedding_witness():
    labels = np.repeat(np.arange(10), 100)
    points = np.arange(1000, dtype=float)[:, None]
    ds = Dataset.from_arrays(points, labels)
    q = quality_exact(perfect_embedding(ds), ds)
    target = lemma_bounds(100)[1]
    gap = abs(q - target)
    ok = gap <= 1e-9 and q <= math.log(100.0)
    record_criterion("A2", ok,
                     f"|Q - {target:.6f}| = {gap:.2e}, Q <= ln(100)")
    assert gap <= 1e-9
    assert q <= math.log(100.0)


def test_a3_separated_pipeline(gaussian_runs):
    runs, _ = gaussian_runs
    hard = sum(r.quality <= HARD_BOUND + 1e-9 for r in runs)
    clean = sum(r.mismatches == 0 and r.contiguous for r in runs)
    median_q = float(np.median([r.quality for r in runs]))
    total = sum(r.seconds for r in runs)
    ok = hard == 10 and clean >= 8 and median_q <= MEDIAN_CAP and total <= 600.0
    record_criterion("A3", ok,
                     f"hard bound {hard}/10, clean {clean}/10, "
                     f"median Q {median_q:.4f} <= {MEDIAN_CAP:.4f}, {total:.0f}s")
    assert hard == 10
    assert clean >= 8
    assert median_q <= MEDIAN_CAP
    assert total <= 600.0


def test_a4_gradient_check(rng):
    h = 1e-4
    families = [("gaussian", (gaussian_kernel(),)),
                ("cauchy", (cauchy_kernel(),)),
                ("exponential", tuple(exponential_kernel(al)
                                      for al in (0.7, 1.0, 1.5, 2.3)))]
    results = []
    for label, kerns in families:
        worst = 0.0
        for trial in range(20):
            kern = kerns[trial % len(kerns)]
            k = int(rng.integers(4, 11))
            d = int(rng.integers(1, 4))
            points = 5.0 * rng.standard_normal((k, int(rng.integers(1, 5))))
            ds = Dataset.from_arrays(points, np.zeros(k, dtype=int))
            p = input_affinities(ds, theorem_scales(k))
            x = rng.standard_normal((k, d))
            grad = loss_gradient(p, Embedding(x), kern)
            fd = np.zeros_like(x)
            for i in range(k):
                for j in range(d):
                    hi = x.copy()
                    hi[i, j] += h
                    lo = x.copy()
                    lo[i, j] -= h
                    fd[i, j] = (loss_at(p, Embedding(hi), kern).total
                                - loss_at(p, Embedding(lo), kern).total) / (2 * h)
            err = np.max(np.abs(grad - fd)) / max(1e-6, np.max(np.abs(fd)))
            worst = max(worst, err)
        results.append((label, worst))
    ok = all(w <= 1e-5 for _, w in results)
    detail = ", ".join(f"{lab} {w:.2e}" for lab, w in results)
    record_criterion("A4", ok, f"max rel err vs central differences: {detail}")
    assert ok


def test_a5_certificate_chain():
    cells = [(n, a, dim) for n in (2, 5, 10) for a in (2, 10, 100)
             for dim in (3, 100)]
    cells += [(2, 2, 3), (10, 100, 100)]
    failures = 0
    chain_checks = 0
    for idx, (n, a, dim) in enumerate(cells):
        seed = 100 + idx
        shape = "uniform_ball" if idx % 2 else "gaussian_clipped"
        ds = generate(GeneratorSpec(n_clusters=n, cluster_size=a, dim=dim,
                                    seed=seed, cluster_shape=shape))
        cert = validate_dataset(ds, separation_threshold(n))
        assert cert.satisfied
        p = input_affinities(ds, theorem_scales(ds.k))
        if not affinity_bounds_check(p, ds, cert).passed:
            failures += 1
        if not certify_lattice_loss(ds).passed:
            failures += 1
        d = 1 if idx % 2 == 0 else 2
        embeddings = [init_embedding(ds.k, d, (0.01, 1.0, 100.0)[i % 3],
                                     10_000 + 97 * idx + i)
                      for i in range(100)]
        cfg = OptimizerConfig(iterations=300 if ds.k <= 500 else 150,
                              seed=seed)
        opt, _ = minimize(p, init_embedding(ds.k, d, cfg.init_scale, cfg.seed),
                          gaussian_kernel(), cfg)
        embeddings.append(opt)
        embeddings.append(perfect_embedding(ds))
        for emb in embeddings:
            chain_checks += 1
            if not certify_chain(ds, emb, p=p, cert=cert).passed:
                failures += 1
    ok = failures == 0
    record_criterion("A5", ok,
                     f"{len(cells)} datasets, {chain_checks} chain checks, "
                     f"{failures} failures")
    assert failures == 0


def test_a6_ball_inequality(rng):
    worst = math.inf
    pairs = 0
    ok = True
    for kern in (gaussian_kernel(), cauchy_kernel(), exponential_kernel(1.0)):
        for i in range(30):
            k = int(rng.integers(5, 41))
            d = int(rng.integers(1, 4))
            scale = (0.01, 1.0, 100.0)[i % 3]
            coords = scale * rng.standard_normal((k, d))
            if i % 7 == 0:
                coords = np.round(coords / scale) * scale
            report = inverse_q_ball_check(Embedding(coords), kern)
            pairs += report.pairs_checked
            worst = min(worst, report.worst_slack)
            ok = ok and report.passed
    record_criterion("A6", ok,
                     f"90 embeddings, {pairs} pairs, worst slack {worst:+.2e}")
    assert ok


def test_a7_mc_consistency(gaussian_runs):
    _, (ds, emb) = gaussian_runs
    q = quality_exact(emb, ds)
    hits = 0
    for seed in range(100):
        value, stderr = quality_mc(emb, ds, 10_000, seed)
        if abs(value - q) <= 4.0 * stderr:
            hits += 1
    ok = hits >= 95
    record_criterion("A7", ok,
                     f"{hits}/100 trials within 4 stderr at 1e4 samples")
    assert hits >= 95


def test_a8_breakdown_sweep():
    base = GeneratorSpec(n_clusters=10, cluster_size=20, dim=20, seed=0)
    report = separation_sweep(base, (0.5, 1.5, 3.4), (0, 1, 2, 3, 4))
    summary = report.summary()
    q_lo = summary["0.5"]["mean_quality"]
    q_hi = summary["3.4"]["mean_quality"]
    m_lo = summary["0.5"]["mean_mismatches"]
    m_hi = summary["3.4"]["mean_mismatches"]
    ok = q_lo > q_hi and m_lo > m_hi
    record_criterion("A8", ok,
                     f"mean Q {q_lo:.4f} > {q_hi:.4f}, "
                     f"mean mismatches {m_lo:.1f} > {m_hi:.1f}")
    assert q_lo > q_hi
    assert m_lo > m_hi


def test_a9_cauchy_pipeline(cauchy_runs):
    runs, (ds, _) = cauchy_runs
    hard = sum(r.quality <= HARD_BOUND + 1e-9 for r in runs)
    clean = sum(r.mismatches == 0 and r.contiguous for r in runs)
    general = certify_general_kernel(ds, cauchy_kernel(), d=1,
                                     ball_embeddings=3)
    total = sum(r.seconds for r in runs)
    ok = hard == 10 and clean >= 7 and general.ratio_finite
    record_criterion("A9", ok,
                     f"hard bound {hard}/10, clean {clean}/10, "
                     f"lattice ratio {general.ratio:.4f}, {total:.0f}s")
    assert hard == 10
    assert clean >= 7
    assert general.ratio_finite
