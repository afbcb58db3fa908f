import math

import numpy as np
import pytest

from snesep import (GeneratorSpec, OptimizerConfig, ValidationError, generate,
                    save_sweep, separation_sweep, separation_threshold,
                    validate_dataset)
from snesep.core import distance_matrix


def min_cross(ds):
    dist = distance_matrix(ds.points)
    cross = ds.labels[:, None] != ds.labels[None, :]
    return float(dist[cross].min())


class TestSpecValidation:
    def test_good_specs(self):
        GeneratorSpec(n_clusters=1, cluster_size=2, dim=1, seed=0)
        GeneratorSpec(n_clusters=3, cluster_size=4, dim=2, seed=0,
                      mode="violate", target_c=0.5)
        GeneratorSpec(n_clusters=2, cluster_size=2, dim=1, seed=0,
                      cluster_shape="uniform_ball")

    @pytest.mark.parametrize("kwargs", [
        {"n_clusters": 0, "cluster_size": 2, "dim": 1},
        {"n_clusters": 2, "cluster_size": 1, "dim": 1},
        {"n_clusters": 2, "cluster_size": 2, "dim": 0},
        {"n_clusters": 2, "cluster_size": 2, "dim": 1, "mode": "sorta"},
        {"n_clusters": 2, "cluster_size": 2, "dim": 1, "margin": 0.5},
        {"n_clusters": 2, "cluster_size": 2, "dim": 1, "margin": math.inf},
        {"n_clusters": 2, "cluster_size": 2, "dim": 1, "cluster_shape": "cube"},
        {"n_clusters": 2, "cluster_size": 2, "dim": 1, "target_c": 1.0},
        {"n_clusters": 2, "cluster_size": 2, "dim": 1, "mode": "violate"},
        {"n_clusters": 1, "cluster_size": 2, "dim": 1, "mode": "violate", "target_c": 1.0},
        {"n_clusters": 2, "cluster_size": 2, "dim": 1, "mode": "violate", "target_c": -2.0},
    ])
    def test_bad_specs(self, kwargs):
        with pytest.raises(ValidationError):
            GeneratorSpec(seed=0, **kwargs)


class TestSatisfyMode:
    @pytest.mark.parametrize("shape", ["gaussian_clipped", "uniform_ball"])
    @pytest.mark.parametrize("margin", [1.0, 2.0])
    def test_meets_hypotheses(self, shape, margin):
        spec = GeneratorSpec(n_clusters=5, cluster_size=6, dim=8, seed=11,
                             margin=margin, cluster_shape=shape)
        ds = generate(spec)
        cert = validate_dataset(ds, separation_threshold(5))
        assert cert.satisfied
        assert cert.max_diameter <= 1.0
        assert cert.min_separation >= margin * cert.threshold

    def test_high_dimension_terminates(self):
        # the clipped gaussian must keep its acceptance rate high even when
        # the ambient dimension is large
        ds = generate(GeneratorSpec(n_clusters=2, cluster_size=10, dim=300, seed=0))
        assert validate_dataset(ds, separation_threshold(2)).satisfied

    def test_single_cluster(self):
        ds = generate(GeneratorSpec(n_clusters=1, cluster_size=7, dim=3, seed=2))
        cert = validate_dataset(ds, 0.0)
        assert cert.satisfied and cert.min_separation == math.inf

    def test_deterministic(self):
        spec = GeneratorSpec(n_clusters=3, cluster_size=4, dim=2, seed=9)
        np.testing.assert_array_equal(generate(spec).points, generate(spec).points)
        other = GeneratorSpec(n_clusters=3, cluster_size=4, dim=2, seed=10)
        assert not np.array_equal(generate(spec).points, generate(other).points)


class TestViolateMode:
    @pytest.mark.parametrize("target", [0.5, 1.5, 3.4])
    def test_hits_the_target_separation(self, target):
        spec = GeneratorSpec(n_clusters=4, cluster_size=5, dim=6, seed=1,
                             mode="violate", target_c=target)
        ds = generate(spec)
        assert abs(min_cross(ds) - target) < 1e-6
        cert = validate_dataset(ds, separation_threshold(4))
        assert cert.max_diameter <= 1.0
        assert cert.satisfied == (target >= cert.threshold)

    def test_diameters_unaffected(self):
        ds = generate(GeneratorSpec(n_clusters=3, cluster_size=8, dim=4, seed=5,
                                    mode="violate", target_c=0.3))
        assert validate_dataset(ds, 0.0).max_diameter <= 1.0


class TestSweep:
    def test_small_sweep(self, tmp_path):
        base = GeneratorSpec(n_clusters=3, cluster_size=3, dim=3, seed=0)
        cfg = OptimizerConfig(iterations=60)
        report = separation_sweep(base, [0.6, 2.5], [0, 1], cfg)
        assert len(report.cells) == 4
        assert report.targets == (0.6, 2.5)
        for cell in report.cells:
            assert abs(cell.measured_c - cell.target_c) < 1e-6
            assert math.isfinite(cell.q_exact)
            assert cell.contiguous in (True, False)

        csv_path = tmp_path / "sweep.csv"
        json_path = tmp_path / "sweep.json"
        save_sweep(report, csv_path, json_path)
        lines = csv_path.read_text().strip().split("\n")
        assert lines[0] == "c,seed,Q,mismatches,contiguous"
        assert len(lines) == 5

        summary = report.summary()
        assert set(summary) == {"0.6", "2.5"}
        for stats in summary.values():
            assert {"mean_quality", "mean_mismatches", "contiguous_fraction"} <= set(stats)

    def test_cells_use_distinct_draws(self):
        base = GeneratorSpec(n_clusters=2, cluster_size=3, dim=2, seed=0)
        cfg = OptimizerConfig(iterations=30)
        report = separation_sweep(base, [1.0, 2.0], [0], cfg)
        assert report.cells[0].measured_c != report.cells[1].measured_c

    def test_empty_inputs_rejected(self):
        base = GeneratorSpec(n_clusters=2, cluster_size=3, dim=2, seed=0)
        with pytest.raises(ValidationError):
            separation_sweep(base, [], [0])
        with pytest.raises(ValidationError):
            separation_sweep(base, [1.0], [])
