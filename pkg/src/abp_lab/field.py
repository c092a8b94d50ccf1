"""Scalar fields on grid domains and closed-form test functions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .geometry import BOUNDARY, CLASS_NAMES, INTERIOR, GridDomain

PointFn = Callable[[np.ndarray], np.ndarray]


class FieldError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values on the interior and boundary cells of a domain.

    Both arrays follow the row-major cell order of ``domain.interior_index``
    and ``domain.boundary_index``.
    """

    domain: GridDomain
    interior_values: np.ndarray
    boundary_values: np.ndarray

    def __post_init__(self):
        iv = np.asarray(self.interior_values, dtype=float)
        bv = np.asarray(self.boundary_values, dtype=float)
        if iv.shape != (self.domain.n_interior,) or bv.shape != (len(self.domain.boundary_index),):
            raise FieldError("value arrays are not aligned with the domain cells")
        if not (np.all(np.isfinite(iv)) and np.all(np.isfinite(bv))):
            raise FieldError("field values must be finite")
        object.__setattr__(self, "interior_values", iv)
        object.__setattr__(self, "boundary_values", bv)

    def grid(self, fill: float = np.nan) -> np.ndarray:
        """Dense lattice array; exterior cells carry ``fill``."""
        out = np.full(self.domain.cell_class.shape, fill, dtype=float)
        out[tuple(self.domain.interior_index.T)] = self.interior_values
        out[tuple(self.domain.boundary_index.T)] = self.boundary_values
        return out

    def with_values(self, interior=None, boundary=None) -> "ScalarField":
        return ScalarField(
            self.domain,
            self.interior_values if interior is None else interior,
            self.boundary_values if boundary is None else boundary,
        )

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if other.domain is not self.domain:
            raise FieldError("fields live on different domains")
        return self.with_values(
            self.interior_values + other.interior_values,
            self.boundary_values + other.boundary_values,
        )

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "ScalarField":
        return self.with_values(scalar * self.interior_values, scalar * self.boundary_values)

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return -1.0 * self

    def __abs__(self) -> "ScalarField":
        return self.with_values(np.abs(self.interior_values), np.abs(self.boundary_values))


@dataclass(frozen=True)
class TestFunction:
    """A closed-form function together with its Laplacian.

    Both evaluators take an ``(..., n)`` array of points and return ``(...)``.
    """

    __test__ = False  # not a pytest class

    name: str
    eval_u: PointFn = field(repr=False)
    eval_lap_u: PointFn = field(repr=False)
    params: dict = field(default_factory=dict)
    smooth: bool = True

    def eval_trace(self, points: np.ndarray) -> np.ndarray:
        return self.eval_u(points)

    def scaled(self, factor: float) -> "TestFunction":
        return TestFunction(
            name=self.name,
            eval_u=lambda p: factor * self.eval_u(p),
            eval_lap_u=lambda p: factor * self.eval_lap_u(p),
            params={**self.params, "scale": factor * self.params.get("scale", 1.0)},
            smooth=self.smooth,
        )

    def describe(self) -> dict:
        return {"name": self.name, **self.params}


def _sq_dist(points: np.ndarray, center) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    d = p - np.asarray(center, dtype=float)[: p.shape[-1]]
    return np.einsum("...i,...i->...", d, d)


def constant(c: float) -> TestFunction:
    return TestFunction(
        "constant",
        lambda p: np.full(np.shape(p)[:-1], float(c)),
        lambda p: np.zeros(np.shape(p)[:-1]),
        {"c": c},
    )


def affine(coeffs, offset: float = 0.0) -> TestFunction:
    a = np.asarray(coeffs, dtype=float)
    return TestFunction(
        "affine",
        lambda p: np.asarray(p, dtype=float) @ a[: np.shape(p)[-1]] + offset,
        lambda p: np.zeros(np.shape(p)[:-1]),
        {"coeffs": a.tolist(), "offset": offset},
    )


def paraboloid(center=(0.0, 0.0, 0.0), height: float = 1.0) -> TestFunction:
    """height - |x - center|^2, whose Laplacian is the constant -2n."""
    return TestFunction(
        "paraboloid",
        lambda p: height - _sq_dist(p, center),
        lambda p: np.full(np.shape(p)[:-1], -2.0 * np.shape(p)[-1]),
        {"center": list(center), "height": height},
    )


def radial_square(center=(0.0, 0.0, 0.0)) -> TestFunction:
    return TestFunction(
        "radial_square",
        lambda p: _sq_dist(p, center),
        lambda p: np.full(np.shape(p)[:-1], 2.0 * np.shape(p)[-1]),
        {"center": list(center)},
    )


def harmonic_quadratic(center=(0.0, 0.0, 0.0)) -> TestFunction:
    """(x - cx)^2 - (y - cy)^2, harmonic in any dimension >= 2."""

    def u(p):
        p = np.asarray(p, dtype=float)
        return (p[..., 0] - center[0]) ** 2 - (p[..., 1] - center[1]) ** 2

    return TestFunction(
        "harmonic_quadratic", u, lambda p: np.zeros(np.shape(p)[:-1]), {"center": list(center)}
    )


def sine_product(freq: float = math.pi) -> TestFunction:
    """prod_k sin(freq x_k); Laplacian is -n freq^2 times itself."""

    def u(p):
        return np.prod(np.sin(freq * np.asarray(p, dtype=float)), axis=-1)

    return TestFunction(
        "sine_product", u, lambda p: -np.shape(p)[-1] * freq**2 * u(p), {"freq": freq}
    )


def bump(center=(0.0, 0.0, 0.0), radius: float = 0.25, amplitude: float = 1.0) -> TestFunction:
    """C^2 bump amplitude * (1 - |x-c|^2/radius^2)^3 supported in the ball B(center, radius)."""

    def u(p):
        s = _sq_dist(p, center) / radius**2
        return amplitude * np.where(s < 1.0, (1.0 - s) ** 3, 0.0)

    def lap(p):
        n = np.shape(p)[-1]
        s = _sq_dist(p, center) / radius**2
        inner = (1.0 - s) * (24.0 * s - 6.0 * n * (1.0 - s)) / radius**2
        return amplitude * np.where(s < 1.0, inner, 0.0)

    return TestFunction(
        "bump", u, lap, {"center": list(center), "radius": radius, "amplitude": amplitude}
    )


def add(f: TestFunction, g: TestFunction, name: str | None = None) -> TestFunction:
    return TestFunction(
        name or f"{f.name}+{g.name}",
        lambda p: f.eval_u(p) + g.eval_u(p),
        lambda p: f.eval_lap_u(p) + g.eval_lap_u(p),
        {"terms": [f.describe(), g.describe()]},
        smooth=f.smooth and g.smooth,
    )


def _evaluate(fn: PointFn, points: np.ndarray, what: str, name: str) -> np.ndarray:
    with np.errstate(all="ignore"):
        values = np.asarray(fn(points), dtype=float)
    values = np.broadcast_to(values, points.shape[:-1]).copy()
    bad = ~np.isfinite(values)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise FieldError(
            f"{name}: {what} is non-finite ({values[k]}) at cell center {points[k].tolist()}"
        )
    return values


def cell_average(fn: PointFn, points: np.ndarray, h: float, m: int, name: str = "") -> np.ndarray:
    """Mean of ``fn`` over the m^n midpoint sub-samples of each cell centered at ``points``."""
    n = points.shape[1]
    ticks = ((np.arange(m) + 0.5) / m - 0.5) * h
    offsets = np.stack(np.meshgrid(*[ticks] * n, indexing="ij"), axis=-1).reshape(-1, n)
    out = np.empty(len(points))
    chunk = max(1, (1 << 20) // len(offsets))
    for i in range(0, len(points), chunk):
        pts = points[i : i + chunk, None, :] + offsets[None, :, :]
        vals = _evaluate(fn, pts.reshape(-1, n), "laplacian", name)
        out[i : i + chunk] = vals.reshape(-1, len(offsets)).mean(axis=1)
    return out


def sample(domain: GridDomain, f: TestFunction, lap_subsamples: int = 1) -> tuple[ScalarField, ScalarField]:
    """Samples of u and of its closed-form Laplacian on every cell.

    u is taken at cell centers.  The Laplacian is taken at centers too, or,
    with ``lap_subsamples`` = m > 1, averaged over m^n sub-points per cell,
    which resolves a discontinuous Laplacian far better than one sample.
    """
    ip, bp = domain.interior_points, domain.boundary_points
    u = ScalarField(
        domain,
        _evaluate(f.eval_u, ip, "u", f.name),
        _evaluate(f.eval_trace, bp, "boundary trace", f.name),
    )
    if lap_subsamples > 1:
        lap_i = cell_average(f.eval_lap_u, ip, domain.spacing, lap_subsamples, f.name)
        lap_b = cell_average(f.eval_lap_u, bp, domain.spacing, lap_subsamples, f.name)
    else:
        lap_i = _evaluate(f.eval_lap_u, ip, "laplacian", f.name)
        lap_b = _evaluate(f.eval_lap_u, bp, "laplacian", f.name)
    return u, ScalarField(domain, lap_i, lap_b)


def discrete_laplacian(u: ScalarField) -> ScalarField:
    """Standard (2n+1)-point Laplacian on interior cells; boundary output is 0."""
    dom = u.domain
    dense = u.grid(fill=0.0)
    idx = dom.interior_index
    acc = np.zeros(len(idx))
    for axis in range(dom.dimension):
        step = np.zeros(dom.dimension, dtype=np.int64)
        step[axis] = 1
        acc += dense[tuple((idx + step).T)]
        acc += dense[tuple((idx - step).T)]
    acc -= 2 * dom.dimension * u.interior_values
    return u.with_values(acc / dom.spacing**2, np.zeros_like(u.boundary_values))


class Extrema(NamedTuple):
    interior_sup: float
    boundary_sup: float
    argmax: np.ndarray


def extrema(u: ScalarField) -> Extrema:
    """Sup of |u| over interior and over boundary cells, plus the interior argmax."""
    a = np.abs(u.interior_values)
    k = int(np.argmax(a))
    bsup = float(np.abs(u.boundary_values).max()) if len(u.boundary_values) else 0.0
    return Extrema(float(a[k]), bsup, u.domain.interior_points[k].copy())


def field_to_csv(u: ScalarField, path) -> None:
    """Columns: ix, iy[, iz], x, y[, z], class, value."""
    dom = u.domain
    n = dom.dimension
    axes = "xyz"[:n]
    header = [f"i{a}" for a in axes] + list(axes) + ["class", "value"]
    blocks = [
        (dom.interior_index, dom.interior_points, INTERIOR, u.interior_values),
        (dom.boundary_index, dom.boundary_points, BOUNDARY, u.boundary_values),
    ]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for idx, pts, cls, vals in blocks:
            for i, x, v in zip(idx, pts, vals):
                w.writerow([*map(int, i), *(repr(float(c)) for c in x), CLASS_NAMES[cls], repr(float(v))])
