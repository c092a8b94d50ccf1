"""Dirichlet problems for the discrete Laplacian on grid domains."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .field import ScalarField
from .geometry import GridDomain

SCHEME = "conjugate-gradient (matrix-free, 2n+1-point stencil)"

Data = Union[ScalarField, np.ndarray, Callable[[np.ndarray], np.ndarray], float]


@dataclass(frozen=True)
class SolveDiagnostics:
    iterations: int
    residual_inf: float
    tolerance: float
    scheme: str = SCHEME


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, diagnostics: SolveDiagnostics):
        super().__init__(f"{message} ({diagnostics})")
        self.diagnostics = diagnostics


def _neighbors(domain: GridDomain):
    """Per interior cell and axis direction: interior position, or -1 with a boundary position."""
    n = domain.dimension
    lookup_int = np.full(domain.cell_class.shape, -1, dtype=np.int64)
    lookup_int[tuple(domain.interior_index.T)] = np.arange(domain.n_interior)
    lookup_bdy = np.full(domain.cell_class.shape, -1, dtype=np.int64)
    lookup_bdy[tuple(domain.boundary_index.T)] = np.arange(len(domain.boundary_index))
    nbr_int, nbr_bdy = [], []
    for axis in range(n):
        for sign in (1, -1):
            step = np.zeros(n, dtype=np.int64)
            step[axis] = sign
            pos = tuple((domain.interior_index + step).T)
            nbr_int.append(lookup_int[pos])
            nbr_bdy.append(lookup_bdy[pos])
    return np.stack(nbr_int, axis=1), np.stack(nbr_bdy, axis=1)


def _values(data: Data, points: np.ndarray, attr: str) -> np.ndarray:
    if isinstance(data, ScalarField):
        return getattr(data, attr).copy()
    if callable(data):
        return np.asarray(data(points), dtype=float).reshape(len(points))
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0:
        return np.full(len(points), float(arr))
    if arr.shape != (len(points),):
        raise ValueError(f"expected {len(points)} values, got shape {arr.shape}")
    return arr.copy()


def solve_dirichlet(
    domain: GridDomain,
    f: Data,
    g: Data,
    tol: float | None = None,
    max_iter: int = 100_000,
) -> tuple[ScalarField, SolveDiagnostics]:
    """Solve -Lap_h u = f on interior cells with u = g on boundary cells.

    ``f`` and ``g`` may be fields, arrays aligned with the interior/boundary
    ordering, callables of points, or scalars.  Iterates until the sup-norm
    residual is at most ``tol`` (default 1e-8 max(1, ||f||_inf)).
    """
    fi = _values(f, domain.interior_points, "interior_values")
    gb = _values(g, domain.boundary_points, "boundary_values")
    if tol is None:
        tol = 1e-8 * max(1.0, float(np.abs(fi).max(initial=0.0)))
    n2 = 2 * domain.dimension
    inv_h2 = 1.0 / domain.spacing**2
    nbr_int, nbr_bdy = _neighbors(domain)
    N = domain.n_interior
    # padded slot N reads as zero for boundary neighbors
    gather = np.where(nbr_int >= 0, nbr_int, N)
    b = fi.copy()
    bmask = nbr_bdy >= 0
    b += inv_h2 * np.where(bmask, np.append(gb, 0.0)[np.where(bmask, nbr_bdy, len(gb))], 0.0).sum(axis=1)

    work = np.zeros(N + 1)

    def apply(x):
        work[:N] = x
        return inv_h2 * (n2 * x - work[gather].sum(axis=1))

    x = np.zeros(N)
    r = b - apply(x)
    p = r.copy()
    rr = r @ r
    it = 0
    res = float(np.abs(r).max(initial=0.0))
    while res > tol:
        if it >= max_iter:
            raise ConvergenceError("solver did not converge", SolveDiagnostics(it, res, tol))
        Ap = apply(p)
        alpha = rr / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        it += 1
        res = float(np.abs(r).max())
        if res <= tol:
            # confirm against the true residual; restart if the recursion drifted
            r = b - apply(x)
            res = float(np.abs(r).max())
            if res <= tol:
                break
            p = r.copy()
            rr = r @ r
            continue
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    return ScalarField(domain, x, gb), SolveDiagnostics(it, res, tol)


def harmonic_extension(domain: GridDomain, g: Data, tol: float | None = None) -> ScalarField:
    """Discrete harmonic function with boundary values g."""
    if tol is None:
        gb = _values(g, domain.boundary_points, "boundary_values")
        # boundary data enters the right-hand side scaled by 1/h^2
        tol = 1e-12 * max(1.0, float(np.abs(gb).max(initial=0.0))) / domain.spacing**2
    return solve_dirichlet(domain, 0.0, g, tol=tol)[0]


def reduction_terms(u: ScalarField) -> tuple[float, float, float]:
    """(max|u|, max_boundary|u|, max|u - phi|) with phi the harmonic extension of u's trace.

    The maximum principle for phi gives max|u| <= max_boundary|u| + max|u - phi|.
    """
    phi = harmonic_extension(u.domain, u)
    diff = np.abs(u.interior_values - phi.interior_values).max()
    return (
        float(np.abs(u.interior_values).max()),
        float(np.abs(u.boundary_values).max()),
        float(diff),
    )
