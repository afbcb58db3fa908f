import numpy as np
import pytest

from snesep import (OptimizationTrace, OptimizerConfig, OptimizerDivergence,
                    ValidationError, cauchy_kernel, default_config, gaussian_kernel,
                    init_embedding, input_affinities, loss_at, minimize, save_trace,
                    theorem_scales)
from conftest import random_dataset


def setup_problem(rng, n=3, a=4, dim=3):
    ds = random_dataset(rng, n, a, dim)
    p = input_affinities(ds, theorem_scales(ds.k))
    return ds, p


class TestConfig:
    def test_defaults(self):
        cfg = default_config()
        assert cfg.method == "adam"
        assert cfg.step_size == 0.05
        assert cfg.iterations == 2000
        assert cfg.init_scale == 0.01
        assert cfg.seed == 0

    @pytest.mark.parametrize("kwargs", [
        {"method": "lbfgs"},
        {"step_size": 0.0},
        {"step_size": float("nan")},
        {"beta1": 1.0},
        {"beta2": -0.1},
        {"iterations": 0},
        {"init_scale": 0.0},
        {"epsilon": 0.0},
        {"early_stop_grad_norm": -1.0},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValidationError):
            OptimizerConfig(**kwargs)


class TestMinimize:
    def test_loss_decreases_and_best_returned(self, rng):
        ds, p = setup_problem(rng)
        cfg = OptimizerConfig(iterations=300)
        start = init_embedding(ds.k, 2, cfg.init_scale, cfg.seed)
        emb, trace = minimize(p, start, gaussian_kernel(), cfg)
        assert trace.loss_history[-1] < trace.loss_history[0]
        final = loss_at(p, emb, gaussian_kernel()).total
        # the returned embedding is never worse than anything on the trace
        assert final <= float(np.min(trace.loss_history)) + 1e-9

    def test_trace_lengths(self, rng):
        ds, p = setup_problem(rng)
        cfg = OptimizerConfig(iterations=50, early_stop_grad_norm=0.0)
        start = init_embedding(ds.k, 1, cfg.init_scale, cfg.seed)
        _, trace = minimize(p, start, gaussian_kernel(), cfg)
        assert trace.iterations_run == 50
        assert len(trace.loss_history) == len(trace.grad_norm_history) == 50
        assert not trace.converged

    def test_deterministic_per_seed(self, rng):
        ds, p = setup_problem(rng)
        cfg = OptimizerConfig(iterations=40)
        runs = []
        for _ in range(2):
            start = init_embedding(ds.k, 2, cfg.init_scale, 7)
            emb, _ = minimize(p, start, gaussian_kernel(), cfg)
            runs.append(emb.coords)
        np.testing.assert_array_equal(runs[0], runs[1])
        other = minimize(p, init_embedding(ds.k, 2, cfg.init_scale, 8),
                         gaussian_kernel(), cfg)[0]
        assert not np.array_equal(runs[0], other.coords)

    def test_early_stop(self, rng):
        ds, p = setup_problem(rng)
        cfg = OptimizerConfig(iterations=500, early_stop_grad_norm=1e9)
        start = init_embedding(ds.k, 1, cfg.init_scale, 0)
        _, trace = minimize(p, start, gaussian_kernel(), cfg)
        assert trace.converged and trace.iterations_run == 1

    def test_momentum_method_works(self, rng):
        ds, p = setup_problem(rng)
        cfg = OptimizerConfig(method="gd_momentum", step_size=0.5, iterations=200)
        start = init_embedding(ds.k, 2, cfg.init_scale, 0)
        emb, trace = minimize(p, start, cauchy_kernel(), cfg)
        assert trace.loss_history[-1] < trace.loss_history[0]

    def test_divergence_carries_trace(self, rng):
        ds, p = setup_problem(rng)
        # a start so distant that squared distances overflow immediately
        start = init_embedding(ds.k, 1, 1e200, 0)
        with pytest.warns(RuntimeWarning), pytest.raises(OptimizerDivergence) as exc_info:
            minimize(p, start, gaussian_kernel(), default_config())
        trace = exc_info.value.trace
        assert isinstance(trace, OptimizationTrace)
        assert trace.iterations_run == len(trace.loss_history)

    def test_size_mismatch(self, rng):
        ds, p = setup_problem(rng)
        with pytest.raises(ValidationError):
            minimize(p, init_embedding(ds.k + 1, 1, 0.01, 0), gaussian_kernel(),
                     default_config())


class TestTraceIO:
    def test_save_trace(self, rng, tmp_path):
        ds, p = setup_problem(rng)
        cfg = OptimizerConfig(iterations=25, early_stop_grad_norm=0.0)
        _, trace = minimize(p, init_embedding(ds.k, 1, 0.01, 0), gaussian_kernel(), cfg)
        path = tmp_path / "trace.csv"
        save_trace(trace, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "iter,loss,grad_norm"
        assert len(lines) == 26
        first = lines[1].split(",")
        assert first[0] == "0" and float(first[1]) > 0
