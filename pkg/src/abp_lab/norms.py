"""Lebesgue and Lorentz norms of grid fields via decreasing rearrangement.

A grid field is piecewise constant on cells of volume h^n, so its decreasing
rearrangement f* is a step function and every norm below has a closed form
plateau by plateau.  Lorentz norms use the unnormalized convention

    ||f||_{p,q} = ( int_0^inf (t^{1/p} f*(t))^q dt/t )^{1/q},
    ||f||_{p,inf} = sup_t t^{1/p} f*(t),

which coincides with the L^p norm when q = p.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .field import ScalarField

LORENTZ_CONVENTION = "Lpq-unnormalized"
ZERO_CUTOFF = 1e-15


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Nonincreasing step function given as (value, measure) plateaus."""

    values: np.ndarray
    measures: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        m = np.asarray(self.measures, dtype=float)
        if v.shape != m.shape or v.ndim != 1:
            raise ValueError("values and measures must be 1-D and of equal length")
        if np.any(v < 0) or np.any(m <= 0):
            raise ValueError("plateau values must be >= 0 and measures > 0")
        if np.any(np.diff(v) >= 0):
            raise ValueError("plateau values must be strictly decreasing")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "measures", m)

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.measures)

    @property
    def total_measure(self) -> float:
        return float(self.measures.sum())

    def plateaus(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.measures.tolist()))

    def __call__(self, t) -> np.ndarray:
        """Evaluate f*(t) (right-continuous, zero past the support)."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.cumulative, t, side="right")
        padded = np.append(self.values, 0.0)
        return padded[np.minimum(k, len(self.values))]

    def lp_norm(self, p: float) -> float:
        _check_p(p)
        if math.isinf(p):
            return float(self.values[0]) if len(self.values) else 0.0
        return float(np.sum(self.values**p * self.measures) ** (1.0 / p))


def _check_p(p: float) -> None:
    if not p >= 1:
        raise ValueError(f"exponent p must be >= 1, got {p}")


def decreasing_rearrangement(f: ScalarField | np.ndarray, cell_volume: float | None = None) -> StepFunction:
    """Sort |interior values| descending and merge ties into plateaus.

    Values below ``ZERO_CUTOFF * max|f|`` are dropped (they form the zero
    plateau, which carries no norm).
    """
    if isinstance(f, ScalarField):
        vals = np.abs(f.interior_values)
        cell_volume = f.domain.cell_volume
    else:
        vals = np.abs(np.asarray(f, dtype=float)).ravel()
        if cell_volume is None:
            raise ValueError("cell_volume is required for raw arrays")
    if vals.size == 0 or vals.max() == 0:
        return StepFunction(np.empty(0), np.empty(0))
    vals = vals[vals >= ZERO_CUTOFF * vals.max()]
    uniq, counts = np.unique(vals, return_counts=True)
    return StepFunction(uniq[::-1], counts[::-1] * cell_volume)


def lp_norm(f: ScalarField, p: float) -> float:
    """(sum_interior |f|^p h^n)^{1/p}; p = inf gives the max."""
    _check_p(p)
    a = np.abs(f.interior_values)
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    return float((np.sum(a**p) * f.domain.cell_volume) ** (1.0 / p))


def lorentz_norm_step(fs: StepFunction, p: float, q: float) -> float:
    """Lorentz norm of a step function, exact plateau by plateau."""
    if not p > 1:
        raise ValueError(f"Lorentz exponent p must be > 1, got {p}")
    if not q >= 1:
        raise ValueError(f"Lorentz exponent q must be >= 1, got {q}")
    if len(fs.values) == 0:
        return 0.0
    right = fs.cumulative
    if math.isinf(q):
        return float(np.max(fs.values * right ** (1.0 / p)))
    left = np.concatenate(([0.0], right[:-1]))
    # int_a^b v^q t^{q/p - 1} dt = v^q (p/q) (b^{q/p} - a^{q/p})
    e = q / p
    pieces = fs.values**q * (p / q) * (right**e - left**e)
    return float(np.sum(pieces) ** (1.0 / q))


def lorentz_norm(f: ScalarField, p: float, q: float) -> float:
    return lorentz_norm_step(decreasing_rearrangement(f), p, q)


def weak_norm_of_power(n: int, alpha: float) -> float:
    """||1/|x|^alpha||_{L^{n/alpha, inf}(R^n)} = |unit ball|^{alpha/n}."""
    unit_ball = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return unit_ball ** (alpha / n)


def rearrangement_to_csv(fs: StepFunction, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value", "measure", "cumulative_measure"])
        for v, m, c in zip(fs.values, fs.measures, fs.cumulative):
            w.writerow([repr(float(v)), repr(float(m)), repr(float(c))])
