"""Potential-theoretic kernels and kernel functionals.

Heat kernel convention throughout: p(s, x, y) = (4 pi s)^{-n/2} exp(-|x-y|^2 / 4s),
the transition density of Brownian motion with variance 2s per coordinate.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.signal import fftconvolve

from .field import ScalarField
from .geometry import GridDomain

EULER_GAMMA = 0.5772156649015329
_E1_EPS = 1e-16
_E1_MAXIT = 500

SELF_CELL_NOTE = "self-cell distance clamped to h/2"
DIRECT_CHUNK_ELEMS = 1 << 21
DIRECT_WORK_LIMIT = 2e7


def _e1_series(a: float) -> float:
    # E1(a) = -gamma - ln a - sum_{k>=1} (-a)^k / (k k!)
    total, term, k = 0.0, 1.0, 0
    while True:
        k += 1
        term *= -a / k
        contrib = term / k
        total += contrib
        if abs(contrib) < _E1_EPS * abs(total) or k > _E1_MAXIT:
            break
    return -EULER_GAMMA - math.log(a) - total


def _e1_continued_fraction(a: float) -> float:
    """e^a E1(a) by the modified Lentz method; accurate for a >= 1."""
    tiny = 1e-300
    b = a + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _E1_MAXIT):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _E1_EPS:
            break
    return h


def _e1_scalar(a: float) -> float:
    return _e1_series(a) if a < 1.0 else _e1_continued_fraction(a) * math.exp(-a)


def _e1_scaled_scalar(a: float) -> float:
    """e^a E1(a), representable where E1 itself underflows."""
    return _e1_series(a) * math.exp(a) if a < 1.0 else _e1_continued_fraction(a)


def exp_integral_e1(a):
    """Exponential integral E1(a) = int_a^inf e^{-y}/y dy for a > 0.

    Series below a = 1, continued fraction above.  Accepts scalars or arrays.
    """
    arr = np.asarray(a, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("E1 requires a > 0")
    if arr.ndim == 0:
        return _e1_scalar(float(arr))
    return np.vectorize(_e1_scalar, otypes=[float])(arr)


def heat_kernel(s, r, n: int):
    s = np.asarray(s, dtype=float)
    return (4 * np.pi * s) ** (-n / 2) * np.exp(-np.asarray(r, dtype=float) ** 2 / (4 * s))


def heat_kernel_time_integral(r: float, t: float, n: int) -> float:
    """int_0^t p(s, x, y) ds for |x - y| = r in R^n.

    n = 2 gives E1(r^2/4t)/(4 pi) and diverges as t -> inf; n = 3 gives
    erfc(r/(2 sqrt t))/(4 pi r), the Newtonian potential 1/(4 pi r) at t = inf.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    if not t > 0:
        raise ValueError("t must be positive")
    if n == 2:
        if math.isinf(t):
            raise ValueError("the planar time integral diverges for t = inf")
        return exp_integral_e1(r * r / (4.0 * t)) / (4.0 * math.pi)
    if n == 3:
        if math.isinf(t):
            return 1.0 / (4.0 * math.pi * r)
        return math.erfc(r / (2.0 * math.sqrt(t))) / (4.0 * math.pi * r)
    raise ValueError(f"dimension must be 2 or 3, got {n}")


class LemmaCheck(NamedTuple):
    a: float
    lhs: float
    rhs: float
    ratio: float


def lemma_bound_check(t: float, r: float, c1: float, c2: float) -> LemmaCheck:
    """Both sides of the planar kernel bound at a = r^2 / (c2 t).

    lhs = int_0^t (c1/s) exp(-r^2/(c2 s)) ds = c1 E1(a)
    rhs = (1 + max(0, -log a)) exp(-a)
    """
    if min(t, r, c1, c2) <= 0:
        raise ValueError("all arguments must be positive")
    a = r * r / (c2 * t)
    lhs = c1 * exp_integral_e1(a)
    log_factor = 1.0 + max(0.0, -math.log(a))
    rhs = log_factor * math.exp(-a)
    # the common factor e^{-a} cancels in the ratio; this keeps it finite when both sides underflow
    ratio = c1 * _e1_scaled_scalar(a) / log_factor
    return LemmaCheck(a, lhs, rhs, ratio)


def lemma_grid(refine: int = 1) -> np.ndarray:
    """a = m 10^k for k = -4..4, m in {1, 2, 5}; ``refine`` > 1 adds log-spaced points between."""
    base = np.array(sorted(m * 10.0**k for k in range(-4, 5) for m in (1, 2, 5)))
    if refine <= 1:
        return base
    logs = np.log(base)
    fine = [np.exp(np.linspace(lo, hi, refine, endpoint=False)) for lo, hi in zip(logs[:-1], logs[1:])]
    return np.concatenate([*fine, base[-1:]])


def lemma_sweep(a_values=None, c1: float = 1.0, c2: float = 1.0, t: float = 1.0) -> list[LemmaCheck]:
    if a_values is None:
        a_values = lemma_grid()
    return [lemma_bound_check(t, math.sqrt(a * c2 * t), c1, c2) for a in np.asarray(a_values, dtype=float)]


def lemma_sweep_to_csv(rows: list[LemmaCheck], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "lhs", "rhs", "ratio"])
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def kernel_domination_constant(total_measure: float, r_values) -> float:
    """Smallest C with E1(r^2/4T)/(4 pi) <= C max(1, log(T/r^2)) on the given radii, T = |Omega|."""
    r = np.asarray(r_values, dtype=float)
    T = float(total_measure)
    pot = exp_integral_e1(r * r / (4.0 * T)) / (4.0 * math.pi)
    ker = np.maximum(1.0, np.log(T / (r * r)))
    return float(np.max(pot / ker))


@dataclass(frozen=True, eq=False)
class KernelFunctionalResult:
    max_value: float
    argmax: np.ndarray
    per_point_values: np.ndarray | None
    eval_points: np.ndarray | None
    method: str
    note: str = SELF_CELL_NOTE


def log_kernel(scale: float) -> Callable[[np.ndarray], np.ndarray]:
    def k(d):
        return np.maximum(1.0, np.log(scale / (d * d)))

    return k


def riesz_kernel(n: int = 3) -> Callable[[np.ndarray], np.ndarray]:
    return lambda d: d ** (2.0 - n)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("ABP_LAB_WORKERS", "1")))
    except ValueError:
        return 1


def _direct(points, src_points, weights, kernel, h, workers):
    # fixed chunking keeps every per-point sum independent of the worker count
    size = max(1, DIRECT_CHUNK_ELEMS // max(1, len(src_points)))
    chunks = [slice(i, i + size) for i in range(0, len(points), size)]

    def run(sl):
        diff = points[sl, None, :] - src_points[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        np.maximum(d, 0.5 * h, out=d)
        return np.einsum("ij,j->i", kernel(d), weights)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(sl) for sl in chunks]
    return np.concatenate(parts) if parts else np.empty(0)


def _fft(domain: GridDomain, g_abs: np.ndarray, eval_idx: np.ndarray, kernel, h):
    shape = domain.cell_class.shape
    dense = np.zeros(shape)
    dense[tuple(domain.interior_index.T)] = g_abs
    offs = [np.arange(-(m - 1), m) * h for m in shape]
    grids = np.meshgrid(*offs, indexing="ij")
    d = np.sqrt(sum(c * c for c in grids))
    np.maximum(d, 0.5 * h, out=d)
    conv = fftconvolve(dense, kernel(d), mode="full")
    # output index i + (m - 1) holds the sum centered on cell i
    shift = np.array([m - 1 for m in shape])
    return conv[tuple((eval_idx + shift).T)]


def kernel_functional(
    domain: GridDomain,
    g: ScalarField,
    kernel: Callable[[np.ndarray], np.ndarray],
    eval_index: np.ndarray | None = None,
    method: str = "auto",
    keep_values: bool = True,
) -> KernelFunctionalResult:
    """x -> sum_y K(|x - y|) |g(y)| h^n at interior cells, with its max.

    ``eval_index`` selects interior cells (positions into the interior
    ordering) at which to evaluate; the default is all of them.  ``method``
    is "direct" (fixed-order sums over the support of g), "fft" (lattice
    convolution) or "auto".
    """
    if g.domain is not domain:
        raise ValueError("field does not live on this domain")
    h = domain.spacing
    w = np.abs(g.interior_values) * domain.cell_volume
    if eval_index is None:
        eval_index = np.arange(domain.n_interior)
    eval_index = np.asarray(eval_index, dtype=np.int64)
    points = domain.interior_points[eval_index]
    support = np.flatnonzero(w)
    if method == "auto":
        method = "direct" if len(points) * len(support) <= DIRECT_WORK_LIMIT else "fft"
    if len(support) == 0:
        values = np.zeros(len(points))
    elif method == "direct":
        values = _direct(points, domain.interior_points[support], w[support], kernel, h, _workers())
    elif method == "fft":
        values = _fft(domain, w, domain.interior_index[eval_index], kernel, h)
        np.maximum(values, 0.0, out=values)
    else:
        raise ValueError(f"unknown method {method!r}")
    k = int(np.argmax(values))
    return KernelFunctionalResult(
        max_value=float(values[k]),
        argmax=points[k].copy(),
        per_point_values=values if keep_values else None,
        eval_points=points if keep_values else None,
        method=method,
    )


def top_k_candidates(u: ScalarField, k: int) -> np.ndarray:
    """Interior positions of the k largest |u| values, for restricted evaluation."""
    a = np.abs(u.interior_values)
    k = min(k, len(a))
    return np.sort(np.argpartition(-a, k - 1)[:k])


def log_kernel_functional(
    domain: GridDomain, g: ScalarField, scale: float, **kwargs
) -> KernelFunctionalResult:
    """max_x sum_y max{1, log(scale/|x-y|^2)} |g(y)| h^2 on a planar domain."""
    if domain.dimension != 2:
        raise ValueError("the logarithmic kernel functional is planar (n = 2)")
    if not scale > 0:
        raise ValueError("scale must be positive")
    return kernel_functional(domain, g, log_kernel(scale), **kwargs)


def riesz_functional(domain: GridDomain, g: ScalarField, **kwargs) -> KernelFunctionalResult:
    """max_x sum_y |g(y)| h^3 / |x-y| on a 3D domain."""
    if domain.dimension != 3:
        raise ValueError("the Riesz functional is used in dimension n = 3")
    return kernel_functional(domain, g, riesz_kernel(3), **kwargs)
