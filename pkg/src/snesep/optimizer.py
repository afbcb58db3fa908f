"""Deterministic first-order minimization of the embedding loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from snesep.affinity import AffinityMatrix
from snesep.core import Embedding, ValidationError
from snesep.kernels import KernelSpec
from snesep.objective import loss_and_gradient

METHODS = ("adam", "gd_momentum")


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "adam"
    step_size: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    iterations: int = 2000
    seed: int = 0
    init_scale: float = 1e-2
    early_stop_grad_norm: float = 1e-7

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        if not (math.isfinite(self.step_size) and self.step_size > 0):
            raise ValidationError("step_size must be positive")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not (0.0 <= b < 1.0):
                raise ValidationError(f"{name} must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        if self.iterations < 1:
            raise ValidationError("iterations must be at least 1")
        if self.early_stop_grad_norm < 0:
            raise ValidationError("early_stop_grad_norm must be nonnegative")
        if not (math.isfinite(self.init_scale) and self.init_scale > 0):
            raise ValidationError("init_scale must be positive")


def default_config() -> OptimizerConfig:
    return OptimizerConfig()


@dataclass(frozen=True, eq=False)
class OptimizationTrace:
    loss_history: np.ndarray
    grad_norm_history: np.ndarray
    iterations_run: int
    converged: bool


class OptimizerDivergence(RuntimeError):
    """Raised when the loss or gradient turns non-finite; carries the trace."""

    def __init__(self, message: str, trace: OptimizationTrace):
        super().__init__(message)
        self.trace = trace


def init_embedding(k: int, d: int, scale: float, seed: int) -> Embedding:
    """Gaussian start, N(0, scale^2) per coordinate, reproducible per seed."""
    if k < 1 or d < 1:
        raise ValidationError("k and d must be positive")
    if not (math.isfinite(scale) and scale > 0):
        raise ValidationError(f"init scale must be positive, got {scale}")
    rng = np.random.default_rng(seed)
    return Embedding(scale * rng.standard_normal((k, d)))


def minimize(p: AffinityMatrix, init: Embedding, kern: KernelSpec,
             cfg: OptimizerConfig) -> tuple[Embedding, OptimizationTrace]:
    """Run the configured method and return the lowest-loss iterate seen.

    The trace records loss and gradient norm at every visited iterate, in
    order.  converged means the gradient norm dropped below the early-stop
    threshold before the iteration budget ran out.  A non-finite loss or
    gradient aborts with the partial trace attached to the exception.
    """
    if p.k != init.k:
        raise ValidationError("affinities and initial embedding disagree on point count")
    x = np.array(init.coords, dtype=float)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    losses: list[float] = []
    grad_norms: list[float] = []
    best_loss = math.inf
    best_x = x.copy()
    converged = False

    def _abort(reason: str) -> OptimizerDivergence:
        trace = _trace(losses, grad_norms, converged)
        return OptimizerDivergence(f"optimization diverged: {reason}", trace)

    for step in range(1, cfg.iterations + 1):
        if not np.all(np.isfinite(x)):
            raise _abort(f"iterate overflowed at iteration {step}")
        try:
            value, grad = loss_and_gradient(p.values, x, kern)
        except ValidationError as exc:
            # finite coordinates whose pairwise distances overflow land here
            raise _abort(str(exc)) from exc
        if not math.isfinite(value):
            raise _abort(f"loss became {value} at iteration {step}")
        if not np.all(np.isfinite(grad)):
            raise _abort(f"gradient became non-finite at iteration {step}")
        losses.append(value)
        gnorm = float(np.linalg.norm(grad))
        grad_norms.append(gnorm)
        if value < best_loss:
            best_loss = value
            best_x = x.copy()
        if gnorm < cfg.early_stop_grad_norm:
            converged = True
            break
        if cfg.method == "adam":
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad
            m_hat = m / (1.0 - cfg.beta1 ** step)
            v_hat = v / (1.0 - cfg.beta2 ** step)
            x = x - cfg.step_size * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        else:
            v = cfg.beta1 * v - cfg.step_size * grad
            x = x + v
    else:
        # the budget ran out after an update, score the final iterate too
        if np.all(np.isfinite(x)):
            try:
                value, _ = loss_and_gradient(p.values, x, kern)
            except ValidationError:
                value = math.inf
            if math.isfinite(value) and value < best_loss:
                best_loss = value
                best_x = x.copy()

    return Embedding(best_x), _trace(losses, grad_norms, converged)


def _trace(losses: list[float], grad_norms: list[float], converged: bool) -> OptimizationTrace:
    return OptimizationTrace(np.asarray(losses), np.asarray(grad_norms),
                             len(losses), converged)


def save_trace(trace: OptimizationTrace, path: str) -> None:
    """CSV with one row per visited iterate: iter,loss,grad_norm."""
    with open(path, "w", newline="") as fh:
        fh.write("iter,loss,grad_norm\n")
        for i, (lo, gn) in enumerate(zip(trace.loss_history, trace.grad_norm_history)):
            fh.write(f"{i},{lo:.17g},{gn:.17g}\n")
