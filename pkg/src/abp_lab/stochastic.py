"""Brownian motion with an absorbing boundary: Feynman-Kac estimates and exit probabilities.

Paths move with Gaussian increments of variance 2 dt per coordinate, so the
free transition density is (4 pi t)^{-n/2} exp(-r^2/4t) and the generator is
the Laplacian itself.  With that generator Ito's formula gives, for paths
stopped at the exit time tau,

    u(x) = E u(w(T ^ tau)) - E int_0^{T ^ tau} (Lap u)(w(s)) ds,

which is the estimate reported by ``simulate``.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import erfc

from . import _mc
from .geometry import Ball3D, Disk, GridDomain, Shape

PointFn = Callable[[np.ndarray], np.ndarray]

BISECTION_FACTOR = 1e-3
DEFAULT_DT_FACTOR = 1e-4
DEFAULT_C_GEO = 4.0
# steps advanced per compiled call in ``simulate``; lap_u is evaluated once per block
BLOCK_STEPS = 64


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings; results are a pure function of these fields."""

    seed: int = 0
    n_paths: int = 10_000
    dt: float = 1e-4
    horizon: float = 1.0
    substream_width: int = 1 << 16

    def __post_init__(self):
        if self.n_paths <= 0:
            raise SimulationError("n_paths must be positive")
        if not self.dt > 0:
            raise SimulationError("dt must be positive")
        if not self.horizon > 0:
            raise SimulationError("horizon must be positive")
        if self.substream_width <= 0:
            raise SimulationError("substream_width must be positive")
        if not 0 <= self.seed < 2**64:
            raise SimulationError("seed must fit in 64 bits")

    def replace(self, **changes) -> "McConfig":
        return McConfig(**{**asdict(self), **changes})


def default_dt(shape: Shape | GridDomain) -> float:
    """1e-4 inradius^2."""
    return DEFAULT_DT_FACTOR * _inradius(shape) ** 2


class PathStats(NamedTuple):
    exit_fraction: float
    mean_terminal_u: float
    mean_occupation_integral: float
    stderr_exit: float
    stderr_terminal_u: float
    stderr_occupation: float
    estimate: float
    stderr_estimate: float
    n_paths: int
    exit_times: np.ndarray


class ProbabilityEstimate(NamedTuple):
    estimate: float
    stderr: float


def standard_error(x: np.ndarray) -> float:
    """Sample standard deviation (ddof = 1) over sqrt(len(x)); 0 for fewer than two samples."""
    if len(x) < 2:
        return 0.0
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("ABP_LAB_WORKERS", "1")))
    except ValueError:
        return 1


def _inradius(shape) -> float:
    if isinstance(shape, GridDomain):
        from .geometry import inradius

        return inradius(shape)
    return shape.inradius


def _membership(shape):
    code, prm = shape.kernel_spec()
    mask = shape.mask_flat() if isinstance(shape, GridDomain) else np.zeros(1, dtype=np.uint8)
    return code, np.ascontiguousarray(prm, dtype=float), mask


def _check_start(shape, x0) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (shape.dimension,):
        raise SimulationError(f"x0 must have {shape.dimension} coordinates")
    if not bool(shape.contains(x0[None, :])[0]):
        raise SimulationError(f"start point {x0.tolist()} is not inside the shape")
    return x0


def _steps(horizon: float, dt: float) -> tuple[int, float]:
    if dt >= horizon:
        raise SimulationError(f"dt={dt} must be smaller than the horizon {horizon}")
    n = int(math.ceil(horizon / dt - 1e-9))
    last = horizon - (n - 1) * dt
    return n, last


def _substreams(cfg: McConfig) -> list[tuple[int, int]]:
    w = cfg.substream_width
    return [(s, min(w, cfg.n_paths - s)) for s in range(0, cfg.n_paths, w)]


def _map_ordered(fn, items):
    workers = _workers()
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def simulate(
    shape: Shape | GridDomain,
    x0,
    u_boundary: PointFn,
    lap_u: PointFn,
    cfg: McConfig,
    eval_u: PointFn | None = None,
) -> PathStats:
    """Feynman-Kac estimate of u(x0) from absorbed Brownian paths.

    Each path accumulates int lap_u ds by the left-endpoint rule until it
    leaves the shape or reaches ``cfg.horizon``.  On the exit step the
    crossing is located by bisection and the path is frozen there; its
    terminal value is ``u_boundary`` at that point.  Paths still inside at
    the horizon are valued with ``eval_u`` (falling back to ``u_boundary``).
    """
    x0 = _check_start(shape, x0)
    n_steps, last_dt = _steps(cfg.horizon, cfg.dt)
    code, prm, mask = _membership(shape)
    tol = BISECTION_FACTOR * math.sqrt(cfg.dt)
    value_at_horizon = eval_u or u_boundary

    h_all = np.full(n_steps, cfg.dt)
    h_all[-1] = last_dt

    def run(block):
        first, m = block
        streams = _mc.seed_streams(np.uint64(cfg.seed), _mc.TAG_PATH, np.arange(first, first + m, dtype=np.int64))
        pos = np.tile(x0, (m, 1))
        occ = np.zeros(m)
        t_exit = np.full(m, np.inf)
        active = np.arange(m)
        t = 0.0
        for s0 in range(0, n_steps, BLOCK_STEPS):
            h_steps = h_all[s0 : s0 + BLOCK_STEPS]
            k = len(active)
            p = pos[active]
            st = streams[active]
            rec = np.empty((k, len(h_steps), x0.shape[0]))
            wts = np.empty((k, len(h_steps)))
            te = np.full(k, np.inf)
            _mc.advance_block(p, st, h_steps, t, code, prm, mask, tol, rec, wts, te)
            live = wts > 0
            lap = np.zeros(wts.shape)
            lap[live] = np.asarray(lap_u(rec[live]), dtype=float)
            occ[active] += (lap * wts).sum(axis=1)
            pos[active] = p
            streams[active] = st
            out = np.isfinite(te)
            t_exit[active[out]] = te[out]
            active = active[~out]
            t += float(h_steps.sum())
            if len(active) == 0:
                break
        absorbed = np.isfinite(t_exit)
        term = np.empty(m)
        if absorbed.any():
            term[absorbed] = u_boundary(pos[absorbed])
        if (~absorbed).any():
            term[~absorbed] = value_at_horizon(pos[~absorbed])
        return t_exit, term, occ

    parts = _map_ordered(run, _substreams(cfg))
    t_exit = np.concatenate([p[0] for p in parts])
    term = np.concatenate([p[1] for p in parts])
    occ = np.concatenate([p[2] for p in parts])
    flag = np.isfinite(t_exit).astype(float)
    combined = term - occ
    return PathStats(
        exit_fraction=float(flag.mean()),
        mean_terminal_u=float(term.mean()),
        mean_occupation_integral=float(occ.mean()),
        stderr_exit=standard_error(flag),
        stderr_terminal_u=standard_error(term),
        stderr_occupation=standard_error(occ),
        estimate=float(combined.mean()),
        stderr_estimate=standard_error(combined),
        n_paths=cfg.n_paths,
        exit_times=t_exit,
    )


def exit_times(shape: Shape | GridDomain, x0, t: float, cfg: McConfig) -> np.ndarray:
    """Per-path first exit times up to ``t`` (inf for paths that stay inside)."""
    x0 = _check_start(shape, x0)
    n_steps, last_dt = _steps(t, cfg.dt)
    code, prm, mask = _membership(shape)
    tol = BISECTION_FACTOR * math.sqrt(cfg.dt)

    def run(block):
        first, m = block
        return _mc.exit_times(x0, first, m, n_steps, cfg.dt, last_dt, np.uint64(cfg.seed), code, prm, mask, tol)

    return np.concatenate(_map_ordered(run, _substreams(cfg)))


def exit_probability(shape: Shape | GridDomain, x0, t: float, cfg: McConfig) -> ProbabilityEstimate:
    """Fraction of discretely monitored paths that leave the shape by time t."""
    flag = np.isfinite(exit_times(shape, x0, t, cfg)).astype(float)
    return ProbabilityEstimate(float(flag.mean()), standard_error(flag))


def free_terminal_exterior_probability(
    shape: Shape | GridDomain,
    x0,
    t: float,
    mode: str = "mc",
    cfg: McConfig | None = None,
) -> ProbabilityEstimate:
    """P(free Brownian motion from x0 lies outside the shape at time t).

    ``mc`` draws the time-t position in a single Gaussian jump (exact in
    distribution).  ``exact_ball`` is the closed form for a disk or ball
    centered at x0: exp(-R^2/4t) in the plane.
    """
    x0 = np.asarray(x0, dtype=float)
    if not t > 0:
        raise SimulationError("t must be positive")
    if mode == "exact_ball":
        if not isinstance(shape, (Disk, Ball3D)) or not np.allclose(shape.center, x0, rtol=0, atol=0):
            raise SimulationError("exact_ball mode needs a disk or ball centered at x0")
        rho2 = shape.radius**2 / (4.0 * t)
        if shape.dimension == 2:
            return ProbabilityEstimate(math.exp(-rho2), 0.0)
        rho = math.sqrt(2.0 * rho2)
        tail = erfc(rho / math.sqrt(2.0)) + math.sqrt(2.0 / math.pi) * rho * math.exp(-rho2)
        return ProbabilityEstimate(float(tail), 0.0)
    if mode != "mc":
        raise SimulationError(f"unknown mode {mode!r}")
    cfg = cfg or McConfig()
    code, prm, mask = _membership(shape)

    def run(block):
        first, m = block
        return _mc.free_jump_outside(x0, first, m, t, np.uint64(cfg.seed), code, prm, mask)

    flag = np.concatenate(_map_ordered(run, _substreams(cfg))).astype(float)
    return ProbabilityEstimate(float(flag.mean()), standard_error(flag))


def inradius_exit_check(
    shape: Shape | GridDomain, x0, cfg: McConfig, c_geo: float = DEFAULT_C_GEO
) -> ProbabilityEstimate:
    """Exit probability by time c_geo * inradius^2 for a simply connected shape."""
    target = shape.shape if isinstance(shape, GridDomain) else shape
    if not target.simply_connected:
        raise SimulationError(f"{target.kind} is not simply connected")
    return exit_probability(shape, x0, c_geo * _inradius(shape) ** 2, cfg)


def exit_time_histogram(times: np.ndarray, horizon: float, bins: int = 50):
    """Counts of finite exit times in equal bins over [0, horizon]."""
    finite = times[np.isfinite(times)]
    counts, edges = np.histogram(finite, bins=bins, range=(0.0, horizon))
    return edges[:-1], counts


def histogram_to_csv(t_bins, counts, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_bin", "count"])
        for t, c in zip(t_bins, counts):
            w.writerow([repr(float(t)), int(c)])
