"""Shape descriptors and their grid discretizations.

A shape is an analytic open set in R^2 or R^3 (disk, rectangle, annulus,
L-shape, ball, box).  ``build_domain`` samples it on a uniform lattice and
classifies every cell as interior, boundary or exterior by the position of
the cell center.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Any, Mapping

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import cdist

EXTERIOR = 0
BOUNDARY = 1
INTERIOR = 2

CLASS_NAMES = {EXTERIOR: "exterior", BOUNDARY: "boundary", INTERIOR: "interior"}

# membership codes shared with the compiled Monte Carlo kernels
CODE_DISK = 0
CODE_RECTANGLE = 1
CODE_ANNULUS = 2
CODE_LSHAPE = 3
CODE_BALL = 4
CODE_BOX = 5
CODE_MASK = 6

MIN_CELLS_PER_AXIS = 10


class DomainError(ValueError):
    """Invalid shape descriptor or a discretization that is too coarse."""


def _vec(values, n: int, name: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if len(out) != n:
        raise DomainError(f"{name} must have {n} components, got {len(out)}")
    return out


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    kind = "disk"
    dimension = 2
    simply_connected = True

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, 2, "center"))
        if not self.radius > 0:
            raise DomainError("disk radius must be positive")

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        return np.einsum("...i,...i->...", d, d) < self.radius**2

    def bounds(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def anchor(self, h: float) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def inradius(self) -> float:
        return self.radius

    def kernel_spec(self):
        return CODE_DISK, np.array([*self.center, self.radius])


@dataclass(frozen=True)
class Rectangle:
    corner: tuple[float, float] = (0.0, 0.0)
    widths: tuple[float, float] = (1.0, 1.0)

    kind = "rectangle"
    dimension = 2
    simply_connected = True

    def __post_init__(self):
        object.__setattr__(self, "corner", _vec(self.corner, self.dimension, "corner"))
        object.__setattr__(self, "widths", _vec(self.widths, self.dimension, "widths"))
        if min(self.widths) <= 0:
            raise DomainError(f"{self.kind} widths must be positive")

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        lo = np.asarray(self.corner)
        hi = lo + np.asarray(self.widths)
        return np.all((p > lo) & (p < hi), axis=-1)

    def bounds(self):
        lo = np.asarray(self.corner)
        return lo, lo + np.asarray(self.widths)

    def anchor(self, h: float) -> np.ndarray:
        return np.asarray(self.corner) + 0.5 * h

    @property
    def area(self) -> float:
        return float(np.prod(self.widths))

    @property
    def inradius(self) -> float:
        return 0.5 * min(self.widths)

    def kernel_spec(self):
        return CODE_RECTANGLE, np.array([*self.corner, *self.widths])


@dataclass(frozen=True)
class Annulus:
    center: tuple[float, float] = (0.0, 0.0)
    r_in: float = 0.5
    r_out: float = 1.0

    kind = "annulus"
    dimension = 2
    simply_connected = False

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, 2, "center"))
        if not 0 < self.r_in < self.r_out:
            raise DomainError("annulus needs 0 < r_in < r_out")

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        r2 = np.einsum("...i,...i->...", d, d)
        return (r2 > self.r_in**2) & (r2 < self.r_out**2)

    def bounds(self):
        c = np.asarray(self.center)
        return c - self.r_out, c + self.r_out

    def anchor(self, h: float) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @property
    def area(self) -> float:
        return math.pi * (self.r_out**2 - self.r_in**2)

    @property
    def inradius(self) -> float:
        return 0.5 * (self.r_out - self.r_in)

    def kernel_spec(self):
        return CODE_ANNULUS, np.array([*self.center, self.r_in, self.r_out])


@dataclass(frozen=True)
class LShape:
    """Square of side ``width`` with the upper-right ``notch`` x ``notch`` square removed."""

    corner: tuple[float, float] = (0.0, 0.0)
    width: float = 1.0
    notch: float = 0.5

    kind = "l_shape"
    dimension = 2
    simply_connected = True

    def __post_init__(self):
        object.__setattr__(self, "corner", _vec(self.corner, 2, "corner"))
        if not (self.width > 0 and 0 < self.notch < self.width):
            raise DomainError("l_shape needs width > 0 and 0 < notch < width")

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float) - np.asarray(self.corner)
        x, y = p[..., 0], p[..., 1]
        w, a = self.width, self.width - self.notch
        in_square = (x > 0) & (x < w) & (y > 0) & (y < w)
        in_notch = (x >= a) & (y >= a)
        return in_square & ~in_notch

    def bounds(self):
        lo = np.asarray(self.corner)
        return lo, lo + self.width

    def anchor(self, h: float) -> np.ndarray:
        return np.asarray(self.corner) + 0.5 * h

    @property
    def area(self) -> float:
        return self.width**2 - self.notch**2

    @property
    def inradius(self) -> float:
        # disk wedged between the two outer edges and the re-entrant corner,
        # unless the arms are so wide that the centered disk fits
        arm = self.width - self.notch
        return min(arm * (2.0 - math.sqrt(2.0)), 0.5 * self.width)

    def kernel_spec(self):
        return CODE_LSHAPE, np.array([*self.corner, self.width, self.notch])


@dataclass(frozen=True)
class Ball3D:
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 1.0

    kind = "ball3d"
    dimension = 3
    simply_connected = True

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, 3, "center"))
        if not self.radius > 0:
            raise DomainError("ball radius must be positive")

    contains = Disk.contains
    bounds = Disk.bounds
    anchor = Disk.anchor

    @property
    def area(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius**3

    @property
    def inradius(self) -> float:
        return self.radius

    def kernel_spec(self):
        return CODE_BALL, np.array([*self.center, self.radius])


@dataclass(frozen=True)
class Box3D(Rectangle):
    corner: tuple[float, float, float] = (0.0, 0.0, 0.0)
    widths: tuple[float, float, float] = (1.0, 1.0, 1.0)

    kind = "box3d"
    dimension = 3

    def kernel_spec(self):
        return CODE_BOX, np.array([*self.corner, *self.widths])


SHAPES = {cls.kind: cls for cls in (Disk, Rectangle, Annulus, LShape, Ball3D, Box3D)}

Shape = Disk | Rectangle | Annulus | LShape | Ball3D | Box3D


def shape_from_config(cfg: Mapping[str, Any]) -> Shape:
    """Build a shape from a JSON-style mapping such as ``{"shape": "disk", "radius": 1}``.

    Unknown keys other than ``h`` are rejected so that typos surface early.
    """
    cfg = dict(cfg)
    kind = cfg.pop("shape", None)
    cfg.pop("h", None)
    if kind not in SHAPES:
        raise DomainError(f"unknown shape {kind!r}; expected one of {sorted(SHAPES)}")
    cls = SHAPES[kind]
    allowed = set(cls.__dataclass_fields__)
    extra = set(cfg) - allowed
    if extra:
        raise DomainError(f"unexpected fields for {kind}: {sorted(extra)}")
    try:
        return cls(**cfg)
    except TypeError as exc:
        raise DomainError(str(exc)) from exc


def shape_to_config(shape: Shape) -> dict[str, Any]:
    out = {"shape": shape.kind}
    for key, value in asdict(shape).items():
        out[key] = list(value) if isinstance(value, tuple) else value
    return out


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Cell-centered lattice discretization of a shape.

    ``cell_class[idx]`` is one of EXTERIOR, BOUNDARY, INTERIOR, and the center
    of cell ``idx`` sits at ``origin + idx * spacing``.
    """

    dimension: int
    spacing: float
    origin: np.ndarray
    cell_class: np.ndarray
    shape: Shape = field(repr=False)

    @property
    def shape_tag(self) -> str:
        return json.dumps(shape_to_config(self.shape), sort_keys=True)

    @property
    def h(self) -> float:
        return self.spacing

    @cached_property
    def interior_mask(self) -> np.ndarray:
        return self.cell_class == INTERIOR

    @cached_property
    def interior_index(self) -> np.ndarray:
        return np.argwhere(self.cell_class == INTERIOR)

    @cached_property
    def boundary_index(self) -> np.ndarray:
        return np.argwhere(self.cell_class == BOUNDARY)

    @cached_property
    def interior_points(self) -> np.ndarray:
        return self.origin + self.interior_index * self.spacing

    @cached_property
    def boundary_points(self) -> np.ndarray:
        return self.origin + self.boundary_index * self.spacing

    @property
    def n_interior(self) -> int:
        return len(self.interior_index)

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dimension

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        """Integer lattice index of the cell containing each point."""
        return np.floor((np.asarray(points, dtype=float) - self.origin) / self.spacing + 0.5).astype(np.int64)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Grid-mask membership: the point falls in an interior cell."""
        idx = self.cell_of(points)
        dims = np.asarray(self.cell_class.shape)
        ok = np.all((idx >= 0) & (idx < dims), axis=-1)
        out = np.zeros(idx.shape[:-1], dtype=bool)
        sel = idx[ok]
        out[ok] = self.cell_class[tuple(sel.T)] == INTERIOR
        return out

    def kernel_spec(self):
        dims = self.cell_class.shape
        params = np.array([float(self.dimension), self.spacing, *self.origin, *map(float, dims)])
        return CODE_MASK, params

    def mask_flat(self) -> np.ndarray:
        return np.ascontiguousarray((self.cell_class == INTERIOR).astype(np.uint8).ravel())


def build_domain(shape: Shape | Mapping[str, Any], h: float | None = None) -> GridDomain:
    """Discretize ``shape`` with cell size ``h``.

    ``shape`` may also be a config mapping, in which case ``h`` defaults to
    its ``"h"`` entry.
    """
    if isinstance(shape, Mapping):
        if h is None:
            h = shape.get("h")
        shape = shape_from_config(shape)
    if h is None or not h > 0:
        raise DomainError(f"grid spacing must be positive, got {h!r}")
    h = float(h)
    n = shape.dimension
    lo, hi = (np.asarray(b, dtype=float) for b in shape.bounds())
    anchor = shape.anchor(h)
    pad = 2
    i_lo = np.floor((lo - anchor) / h).astype(int) - pad
    i_hi = np.ceil((hi - anchor) / h).astype(int) + pad
    dims = tuple(int(d) for d in i_hi - i_lo + 1)
    if np.prod(dims, dtype=float) > 5e8:
        raise DomainError(f"grid of {dims} cells is too large")
    origin = anchor + i_lo * h
    axes = [origin[k] + h * np.arange(dims[k]) for k in range(n)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    interior = shape.contains(centers)
    if not interior.any():
        raise DomainError(f"{shape.kind} has empty interior at h={h}")
    for k in range(n):
        other = tuple(j for j in range(n) if j != k)
        extent = np.flatnonzero(interior.any(axis=other))
        if extent[-1] - extent[0] + 1 < MIN_CELLS_PER_AXIS:
            raise DomainError(
                f"h={h} leaves fewer than {MIN_CELLS_PER_AXIS} interior cells along axis {k}"
            )
    cross = ndimage.generate_binary_structure(n, 1)
    boundary = ndimage.binary_dilation(interior, structure=cross) & ~interior
    cell_class = np.full(dims, EXTERIOR, dtype=np.int8)
    cell_class[boundary] = BOUNDARY
    cell_class[interior] = INTERIOR
    cell_class.setflags(write=False)
    origin.setflags(write=False)
    return GridDomain(dimension=n, spacing=h, origin=origin, cell_class=cell_class, shape=shape)


def measure(domain: GridDomain) -> float:
    """Area (n=2) or volume (n=3): interior cell count times h^n."""
    return domain.n_interior * domain.cell_volume


def inradius(domain: GridDomain) -> float:
    """Largest distance from an interior cell center to the nearest non-interior center."""
    dist = ndimage.distance_transform_edt(domain.interior_mask, sampling=domain.spacing)
    return float(dist.max())


def diameter(domain: GridDomain) -> float:
    pts = domain.interior_points
    try:
        pts = pts[ConvexHull(pts).vertices]
    except QhullError:
        pass
    return float(cdist(pts, pts).max())
