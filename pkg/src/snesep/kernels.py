"""Radial kernel families for the output similarities.

Three built-in profiles f(r) on r >= 0:

    gaussian      f(r) = exp(-r^2)
    cauchy        f(r) = 1 / (1 + r^2)
    exponential   f(r) = exp(-rate * r)

Each family ships with a gaussian minorant (alpha, beta) such that
f(r) >= alpha * exp(-beta r^2), and an upper bound on sum_{k>=1} f(k).
Both are the admissibility ingredients the certificates need: a monotone
profile, a gaussian floor, and a summable tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from snesep.core import ValidationError

FAMILIES = ("gaussian", "cauchy", "exponential")

# Frozen tail sums, verified against partial sums plus analytic remainders
# in admissibility() and in the test suite.
_GAUSSIAN_TAIL = 0.38632
_CAUCHY_TAIL = 1.07668  # (pi*coth(pi) - 1)/2 = 1.076674...


@dataclass(frozen=True)
class KernelSpec:
    family: str
    rate: float | None = None
    minorant: tuple[float, float] = (1.0, 1.0)
    tail_sum_bound: float = _GAUSSIAN_TAIL

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}")
        if self.family == "exponential":
            if self.rate is None or not math.isfinite(self.rate) or self.rate <= 0:
                raise ValidationError("exponential kernel needs a positive finite rate")
        elif self.rate is not None:
            raise ValidationError(f"{self.family} kernel takes no rate parameter")
        alpha, beta = self.minorant
        if alpha <= 0 or beta <= 0:
            raise ValidationError("minorant constants must be positive")
        if not (math.isfinite(self.tail_sum_bound) and self.tail_sum_bound > 0):
            raise ValidationError("tail_sum_bound must be positive and finite")


def gaussian_kernel() -> KernelSpec:
    # f equals its own minorant, so (1, 1) is exact.
    return KernelSpec("gaussian", minorant=(1.0, 1.0), tail_sum_bound=_GAUSSIAN_TAIL)


def cauchy_kernel() -> KernelSpec:
    # 1/(1+r^2) >= e^{-1-r^2} for all r, since e^u >= u with u = 1 + r^2.
    return KernelSpec("cauchy", minorant=(math.exp(-1.0), 1.0), tail_sum_bound=_CAUCHY_TAIL)


def exponential_kernel(rate: float) -> KernelSpec:
    # exp(-rate*r) >= exp(-rate^2/4) * exp(-r^2) for all r >= 0 (AM-GM on
    # r^2 + rate^2/4 >= rate*r), and sum_{k>=1} exp(-rate*k) = 1/(e^rate - 1).
    if not (math.isfinite(rate) and rate > 0):
        raise ValidationError("exponential kernel needs a positive finite rate")
    tail = 1.0 / math.expm1(rate)
    return KernelSpec("exponential", rate=rate,
                      minorant=(math.exp(-rate * rate / 4.0), 1.0),
                      tail_sum_bound=tail * (1.0 + 1e-12))


def parse_kernel(text: str) -> KernelSpec:
    """Parse a kernel name: 'gaussian', 'cauchy', or 'exp:<rate>'."""
    if text == "gaussian":
        return gaussian_kernel()
    if text == "cauchy":
        return cauchy_kernel()
    if text.startswith("exp:"):
        try:
            rate = float(text.split(":", 1)[1])
        except ValueError as exc:
            raise ValidationError(f"bad exponential rate in {text!r}") from exc
        return exponential_kernel(rate)
    raise ValidationError(f"unknown kernel {text!r}, expected gaussian, cauchy, or exp:<rate>")


def kernel_label(kern: KernelSpec) -> str:
    if kern.family == "exponential":
        return f"exp:{kern.rate:g}"
    return kern.family


def _as_radii(r) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("kernel argument must be finite")
    if np.any(arr < 0):
        raise ValidationError("kernel argument must be nonnegative")
    return arr


def evaluate(kern: KernelSpec, r) -> np.ndarray:
    arr = _as_radii(r)
    if kern.family == "gaussian":
        return np.exp(-arr * arr)
    if kern.family == "cauchy":
        return 1.0 / (1.0 + arr * arr)
    return np.exp(-kern.rate * arr)


def evaluate_derivative(kern: KernelSpec, r) -> np.ndarray:
    arr = _as_radii(r)
    if kern.family == "gaussian":
        return -2.0 * arr * np.exp(-arr * arr)
    if kern.family == "cauchy":
        s = 1.0 + arr * arr
        return -2.0 * arr / (s * s)
    return -kern.rate * np.exp(-kern.rate * arr)


def log_evaluate(kern: KernelSpec, r) -> np.ndarray:
    """ln f(r) without forming f, usable far beyond floating underflow."""
    arr = _as_radii(r)
    if kern.family == "gaussian":
        return -arr * arr
    if kern.family == "cauchy":
        return -np.log1p(arr * arr)
    return -kern.rate * arr


def grad_weight(kern: KernelSpec, r) -> np.ndarray:
    """f'(r) / (r f(r)), the radial factor of the loss gradient.

    For gaussian and cauchy the zero-distance limit is finite (-2) and is
    used directly.  The exponential profile has no finite limit, entries at
    r = 0 are set to zero; the caller decides whether that needs flagging.
    """
    arr = _as_radii(r)
    if kern.family == "gaussian":
        return np.full_like(arr, -2.0)
    if kern.family == "cauchy":
        return -2.0 / (1.0 + arr * arr)
    out = np.zeros_like(arr)
    np.divide(-kern.rate, arr, out=out, where=arr > 0)
    return out


def monotone_decreasing(values: np.ndarray) -> bool:
    """True when a sampled profile never increases, with strict overall decrease."""
    vals = np.asarray(values, dtype=float)
    if vals.size < 2:
        return True
    return bool(np.all(np.diff(vals) <= 0.0) and vals[-1] < vals[0])


@dataclass(frozen=True)
class AdmissibilityEvidence:
    monotone_ok: bool
    minorant_ok: bool
    tail_partial_sum: float
    tail_remainder_bound: float
    tail_ok: bool

    @property
    def passed(self) -> bool:
        return self.monotone_ok and self.minorant_ok and self.tail_ok


def default_grid(r_max: float = 20.0, step: float = 0.01) -> np.ndarray:
    return np.arange(0.0, r_max + step, step)


def admissibility(kern: KernelSpec, grid: np.ndarray | None = None) -> AdmissibilityEvidence:
    """Check the three admissibility conditions on a finite grid.

    (i) f never increases along the grid, (ii) f dominates its declared
    gaussian minorant on the grid, (iii) a partial sum of f at the positive
    integers plus an analytic remainder stays below the declared tail bound.
    """
    if grid is None:
        grid = default_grid()
    grid = _as_radii(grid)
    values = evaluate(kern, grid)
    alpha, beta = kern.minorant
    floor = alpha * np.exp(-beta * grid * grid)
    monotone_ok = monotone_decreasing(values)
    minorant_ok = bool(np.all(values >= floor * (1.0 - 1e-12)))

    if kern.family == "gaussian":
        kmax = 10
        partial = float(np.sum(np.exp(-np.arange(1.0, kmax + 1) ** 2)))
        # for k > K, k^2 >= K*k, so the tail is under a geometric series
        remainder = math.exp(-kmax * (kmax + 1)) / -math.expm1(-kmax)
    elif kern.family == "cauchy":
        kmax = 100_000
        ks = np.arange(1.0, kmax + 1)
        partial = float(np.sum(1.0 / (1.0 + ks * ks)))
        # integral comparison: sum_{k>K} 1/(1+k^2) <= pi/2 - arctan(K)
        remainder = math.pi / 2.0 - math.atan(kmax)
    else:
        kmax = 60
        rate = kern.rate
        partial = float(np.sum(np.exp(-rate * np.arange(1.0, kmax + 1))))
        remainder = math.exp(-rate * (kmax + 1)) / -math.expm1(-rate)
    tail_ok = (partial + remainder) <= kern.tail_sum_bound + 1e-9
    return AdmissibilityEvidence(monotone_ok, minorant_ok, partial, remainder, tail_ok)
