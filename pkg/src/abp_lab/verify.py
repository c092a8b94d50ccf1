"""Verifiers for maximum-principle inequalities and empirical-constant sweeps.

Every verifier samples a closed-form test function on a grid domain and
compares the two sides of one inequality,

    sup_interior |u|  <=  sup_boundary |u|  +  c * F(Lap u),

reporting the empirical ("implied") constant c = max(0, lhs - bdy) / F.  The
functionals F are:

* ``classical``  diam^{2 - n/s} ||Lap u||_{L^s}, s > n/2;
* ``thm1``       the Lorentz norm ||Lap u||_{L^{3/2,1}} in three dimensions;
* ``thm2``       max_x sum_y max{1, log(|Omega| / |x-y|^2)} |Lap u(y)| h^2;
* ``corollary``  the same with |Omega| replaced by inradius^2.

By default the Laplacian is the closed form carried by the test function;
``cross_check=True`` also evaluates F on the discrete Laplacian of the
sampled u and records the relative difference.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy import integrate

from . import field as fields
from .field import ScalarField, TestFunction, discrete_laplacian, extrema, sample
from .geometry import (
    Annulus,
    Ball3D,
    Box3D,
    Disk,
    DomainError,
    GridDomain,
    LShape,
    Rectangle,
    Shape,
    build_domain,
    diameter,
    inradius,
    measure,
    shape_to_config,
)
from .kernels import SELF_CELL_NOTE, kernel_functional, log_kernel_functional, riesz_functional
from .norms import LORENTZ_CONVENTION, decreasing_rearrangement, lorentz_norm, lorentz_norm_step, lp_norm, weak_norm_of_power

THEOREM_TAGS = ("classical", "thm1", "thm2", "corollary")
SUSPECT_FACTOR = 1e3
CHAIN_RTOL = 1e-12
NONSMOOTH_SUBSAMPLES = {2: 8, 3: 4}

CONVENTIONS = {
    "lorentz": LORENTZ_CONVENTION,
    "kernel_self_cell": SELF_CELL_NOTE,
    "laplacian": "closed form at cell centers; cell average over m^n sub-points when it is discontinuous",
    "measure": "interior cell count * h^n",
    "inradius": "max distance from an interior center to a non-interior center",
    "implied_constant": "max(0, lhs - boundary) / functional; 0 if both vanish, inf if only F does",
}


class VerificationError(ValueError):
    pass


def implied_constant(lhs: float, bdy: float, functional: float) -> float:
    excess = max(0.0, lhs - bdy)
    if functional > 0:
        return excess / functional
    return 0.0 if excess == 0 else math.inf


@dataclass(frozen=True)
class InequalityReport:
    """Both sides of one inequality on one (domain, function) pair."""

    theorem_tag: str
    lhs_interior_sup: float
    boundary_sup: float
    functional_value: float
    implied_constant: float
    domain: dict
    function: dict
    h: float
    tolerances: dict = field(default_factory=dict)
    conventions: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.theorem_tag not in THEOREM_TAGS:
            raise VerificationError(f"unknown theorem tag {self.theorem_tag!r}")
        if not self.functional_value >= 0:
            raise VerificationError("functional value must be non-negative")

    @property
    def passed(self) -> bool:
        """All recorded checks hold and the implied constant is finite."""
        return math.isfinite(self.implied_constant) and all(self.checks.values())

    @property
    def suspect(self) -> bool:
        return self.lhs_interior_sup - self.boundary_sup > SUSPECT_FACTOR * self.functional_value

    def to_dict(self) -> dict:
        return {
            "theorem_tag": self.theorem_tag,
            "lhs_interior_sup": _num(self.lhs_interior_sup),
            "boundary_sup": _num(self.boundary_sup),
            "functional_value": _num(self.functional_value),
            "implied_constant": _num(self.implied_constant),
            "domain": self.domain,
            "function": self.function,
            "h": self.h,
            "tolerances": self.tolerances,
            "conventions": self.conventions,
            "extras": {k: _jsonable(v) for k, v in self.extras.items()},
            "checks": dict(self.checks),
            "passed": self.passed,
        }


def _num(x: float):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_num(x) for x in v.ravel()]
    if isinstance(v, (float, np.floating)):
        return _num(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _descriptor(domain: GridDomain) -> dict:
    out = {**shape_to_config(domain.shape), "n_interior": domain.n_interior}
    name = preset_name(domain.shape)
    if name is not None:
        out["preset"] = name
    return out


class _Sides(NamedTuple):
    u: ScalarField
    lap: ScalarField
    lhs: float
    bdy: float
    argmax: np.ndarray


def lap_subsamples(f: TestFunction, dimension: int) -> int:
    """Sub-samples per axis for the closed-form Laplacian: cell averages when it jumps."""
    return 1 if f.smooth else NONSMOOTH_SUBSAMPLES[dimension]


def _sides(domain: GridDomain, f: TestFunction, laplacian: str = "closed_form") -> _Sides:
    u, lap = sample(domain, f, lap_subsamples(f, domain.dimension))
    if laplacian == "discrete":
        lap = discrete_laplacian(u)
    elif laplacian != "closed_form":
        raise VerificationError(f"unknown laplacian mode {laplacian!r}")
    ex = extrema(u)
    return _Sides(u, lap, ex.interior_sup, ex.boundary_sup, ex.argmax)


def _argmax_index(u: ScalarField) -> int:
    return int(np.argmax(np.abs(u.interior_values)))


def _report(tag, domain, f, sides, functional, tolerances=None, extras=None, checks=None, conv=None):
    return InequalityReport(
        theorem_tag=tag,
        lhs_interior_sup=sides.lhs,
        boundary_sup=sides.bdy,
        functional_value=float(functional),
        implied_constant=implied_constant(sides.lhs, sides.bdy, functional),
        domain=_descriptor(domain),
        function=f.describe(),
        h=domain.spacing,
        tolerances=tolerances or {},
        conventions={**CONVENTIONS, **(conv or {})},
        extras=extras or {},
        checks=checks or {},
    )


def _cross_check(extras: dict, closed: float, discrete: float) -> None:
    extras["discrete_functional"] = discrete
    scale = max(abs(closed), abs(discrete))
    extras["discrete_relative_difference"] = abs(closed - discrete) / scale if scale > 0 else 0.0


# --- sharpness family ------------------------------------------------------------


def sharpness_family(epsilon: float, center=(0.0, 0.0)) -> TestFunction:
    """Radial family on the unit disk with a concentrated Laplacian.

    u = 1/2 - log(eps) - r^2/(2 eps^2) for r <= eps and -log r beyond, so
    u is C^1, harmonic for r > eps, vanishes on r = 1, and
    Lap u = -2/eps^2 on r < eps.
    """
    eps = float(epsilon)
    if not 0 < eps < 1:
        raise VerificationError(f"epsilon must lie in (0, 1), got {epsilon}")
    c = np.asarray(center, dtype=float)

    def r2(p):
        d = np.asarray(p, dtype=float)[..., :2] - c
        return np.einsum("...i,...i->...", d, d)

    def u(p):
        s = r2(p)
        inner = 0.5 - math.log(eps) - s / (2 * eps * eps)
        with np.errstate(divide="ignore"):
            outer = -0.5 * np.log(s)
        return np.where(s <= eps * eps, inner, outer)

    def lap(p):
        return np.where(r2(p) < eps * eps, -2.0 / (eps * eps), 0.0)

    return TestFunction("u_eps", u, lap, {"epsilon": eps, "center": c.tolist()}, smooth=False)


def sharpness_sup(epsilon: float) -> float:
    return 0.5 + math.log(1.0 / epsilon)


def radial_log_kernel(epsilon: float, scale: float = math.pi) -> float:
    """Log-kernel functional of |Lap u_eps| at the disk center, by radial quadrature.

    int_{|y| < eps} (2/eps^2) max{1, log(scale/|y|^2)} dy
    """
    eps = float(epsilon)
    # the kernel switches from log to 1 at r = sqrt(scale/e)
    knee = math.sqrt(scale / math.e)
    g = lambda r: 2 * math.pi * r * (2.0 / eps**2) * max(1.0, math.log(scale / (r * r)))
    pts = [knee] if knee < eps else None
    val, _ = integrate.quad(g, 0.0, eps, points=pts, limit=200, epsabs=0, epsrel=1e-13)
    return val


@dataclass(frozen=True)
class SharpnessRecord:
    epsilon: float
    sup_u: float
    l1_lap: float
    log_kernel: float
    ratio_l1: float
    ratio_kernel: float
    log_kernel_radial: float
    h: float

    def to_dict(self) -> dict:
        return {k: _num(v) for k, v in self.__dict__.items()}


def sharpness_record(epsilon: float, h: float = 1 / 256, domain: GridDomain | None = None) -> SharpnessRecord:
    """Both sharpness ratios for u_eps on the unit disk.

    sup u and ||Lap u||_{L^1} = 2 pi are exact; the log-kernel functional is
    evaluated on the grid (scale = grid measure) and by radial quadrature.
    """
    domain = domain or build_domain(Disk((0.0, 0.0), 1.0), h)
    f = sharpness_family(epsilon)
    _, lap = sample(domain, f, lap_subsamples(f, 2))
    scale = measure(domain)
    grid_value = log_kernel_functional(domain, abs(lap), scale, keep_values=False).max_value
    sup_u = sharpness_sup(epsilon)
    l1 = 2.0 * math.pi
    return SharpnessRecord(
        epsilon=float(epsilon),
        sup_u=sup_u,
        l1_lap=l1,
        log_kernel=grid_value,
        ratio_l1=sup_u / l1,
        ratio_kernel=sup_u / grid_value,
        log_kernel_radial=radial_log_kernel(epsilon, scale),
        h=domain.spacing,
    )


def sharpness_to_csv(records: Sequence[SharpnessRecord], path) -> None:
    cols = ["epsilon", "sup_u", "l1_lap", "log_kernel", "log_kernel_radial", "ratio_l1", "ratio_kernel", "h"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in records:
            w.writerow([repr(float(getattr(r, c))) for c in cols])


# --- verifiers --------------------------------------------------------------------


def verify_classical(
    domain: GridDomain,
    f: TestFunction,
    s: float,
    *,
    allow_endpoint: bool = False,
    cross_check: bool = False,
) -> InequalityReport:
    """Classical bound with functional diam^{2-n/s} ||Lap u||_{L^s}, s > n/2.

    ``allow_endpoint`` admits s = n/2 as a diagnostic only: no inequality of
    this form holds there, and the report says so.
    """
    n = domain.dimension
    if not (s > n / 2 or (allow_endpoint and s == n / 2)):
        raise VerificationError(f"the classical estimate needs s > n/2 = {n / 2}, got s = {s}")
    sides = _sides(domain, f)
    diam = diameter(domain)
    factor = diam ** (2.0 - n / s)
    F = factor * lp_norm(sides.lap, s)
    extras = {"s": s, "diameter": diam}
    conv = {}
    if s == n / 2:
        conv["endpoint"] = "s = n/2: diagnostic ratio only, no inequality is claimed"
    if cross_check:
        _cross_check(extras, F, factor * lp_norm(_sides(domain, f, "discrete").lap, s))
    return _report("classical", domain, f, sides, F, extras=extras, conv=conv)


def discrete_weak_norm(domain: GridDomain, x: np.ndarray) -> float:
    """||y -> 1/max(|x - y|, h/2)||_{L^{3, inf}} over the interior cells."""
    d = np.linalg.norm(domain.interior_points - np.asarray(x)[None, :], axis=1)
    k = 1.0 / np.maximum(d, 0.5 * domain.spacing)
    return lorentz_norm_step(decreasing_rearrangement(k, domain.cell_volume), 3.0, math.inf)


def verify_theorem1(domain: GridDomain, f: TestFunction, *, cross_check: bool = False) -> InequalityReport:
    """Lorentz endpoint bound in three dimensions: F = ||Lap u||_{L^{3/2,1}}.

    Also evaluates the Riesz potential R(x*) = sum_y |Lap u(y)| h^3 / |x* - y|
    at the maximizer x* of |u| and checks the chain

        lhs - bdy <= R(x*) <= C ||Lap u||_{L^{3/2,1}},

    with C the weak-L^3 norm of the discrete kernel centered at x* (the
    continuum value (4 pi / 3)^{1/3} is reported alongside).
    """
    if domain.dimension != 3:
        raise VerificationError("the Lorentz endpoint verifier is three-dimensional")
    sides = _sides(domain, f)
    lap_abs = abs(sides.lap)
    F = lorentz_norm(lap_abs, 1.5, 1.0)
    k = _argmax_index(sides.u)
    riesz = riesz_functional(domain, lap_abs, eval_index=np.array([k]), method="direct").max_value
    x_star = domain.interior_points[k]
    c_disc = discrete_weak_norm(domain, x_star)
    c_cont = weak_norm_of_power(3, 1.0)
    excess = max(0.0, sides.lhs - sides.bdy)
    extras = {
        "riesz_at_argmax": riesz,
        "argmax": x_star,
        "weak_norm_discrete": c_disc,
        "weak_norm_continuum": c_cont,
        "constant_lhs_over_riesz": excess / riesz if riesz > 0 else (0.0 if excess == 0 else math.inf),
        "constant_riesz_over_lorentz": riesz / F if F > 0 else 0.0,
    }
    checks = {
        "pointwise_riesz_bound": excess <= riesz * (1 + CHAIN_RTOL),
        "lorentz_duality": riesz <= c_disc * F * (1 + CHAIN_RTOL),
    }
    if cross_check:
        _cross_check(extras, F, lorentz_norm(abs(_sides(domain, f, "discrete").lap), 1.5, 1.0))
    return _report(
        "thm1", domain, f, sides, F,
        tolerances={"chain_rtol": CHAIN_RTOL}, extras=extras, checks=checks,
    )


def _log_functional(domain, lap_abs, scale, method="auto"):
    return log_kernel_functional(domain, lap_abs, scale, method=method)


def verify_theorem2(domain: GridDomain, f: TestFunction, *, cross_check: bool = False) -> InequalityReport:
    """Planar log-kernel bound with scale |Omega|."""
    if domain.dimension != 2:
        raise VerificationError("the log-kernel verifier is planar")
    sides = _sides(domain, f)
    scale = measure(domain)
    res = _log_functional(domain, abs(sides.lap), scale)
    extras = {"scale": scale, "functional_argmax": res.argmax, "method": res.method}
    if cross_check:
        disc = _log_functional(domain, abs(_sides(domain, f, "discrete").lap), scale).max_value
        _cross_check(extras, res.max_value, disc)
    return _report("thm2", domain, f, sides, res.max_value, extras=extras)


def verify_corollary(
    domain: GridDomain, f: TestFunction, *, method: str = "auto", cross_check: bool = False
) -> InequalityReport:
    """Log-kernel bound with scale inradius^2 on a simply connected planar shape.

    Records the pointwise comparison with the |Omega|-scaled functional; both
    are evaluated by the same method on the same cells, so when
    inradius^2 <= |Omega| the comparison holds exactly.
    """
    if domain.dimension != 2:
        raise VerificationError("the log-kernel verifier is planar")
    if not domain.shape.simply_connected:
        raise VerificationError(f"{domain.shape.kind} is not simply connected")
    sides = _sides(domain, f)
    lap_abs = abs(sides.lap)
    r_in = inradius(domain)
    area = measure(domain)
    cor = _log_functional(domain, lap_abs, r_in**2, method)
    thm = _log_functional(domain, lap_abs, area, cor.method)
    gap = thm.per_point_values - cor.per_point_values
    extras = {
        "scale": r_in**2,
        "inradius": r_in,
        "theorem2_functional": thm.max_value,
        "min_pointwise_gap": float(gap.min()),
        "method": cor.method,
    }
    checks = {}
    if r_in**2 <= area:
        checks["pointwise_below_theorem2"] = bool(np.all(gap >= 0))
    if cross_check:
        disc = _log_functional(domain, abs(_sides(domain, f, "discrete").lap), r_in**2, method).max_value
        _cross_check(extras, cor.max_value, disc)
    return _report("corollary", domain, f, sides, cor.max_value, extras=extras, checks=checks)


def verify(domain: GridDomain, f: TestFunction, theorem: str, **options) -> InequalityReport:
    if theorem == "classical":
        return verify_classical(domain, f, **options)
    if theorem == "thm1":
        return verify_theorem1(domain, f, **options)
    if theorem == "thm2":
        return verify_theorem2(domain, f, **options)
    if theorem == "corollary":
        return verify_corollary(domain, f, **options)
    raise VerificationError(f"unknown theorem tag {theorem!r}; expected one of {THEOREM_TAGS}")


# --- named domains and functions ----------------------------------------------------

DOMAIN_PRESETS: dict[str, Shape] = {
    "disk": Disk((0.0, 0.0), 1.0),
    "square": Rectangle((0.0, 0.0), (1.0, 1.0)),
    "annulus": Annulus((0.0, 0.0), 0.5, 1.0),
    "l_shape": LShape((0.0, 0.0), 1.0, 0.5),
    "thin_rectangle": Rectangle((0.0, 0.0), (10.0, 0.5)),
    "ball": Ball3D((0.0, 0.0, 0.0), 1.0),
    "cube": Box3D((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)),
}


def reference_point(shape: Shape) -> np.ndarray:
    """A well-inside point: center of a largest inscribed disk where easy."""
    if isinstance(shape, (Disk, Ball3D)):
        return np.asarray(shape.center, dtype=float)
    if isinstance(shape, Rectangle):
        return np.asarray(shape.corner) + 0.5 * np.asarray(shape.widths)
    if isinstance(shape, Annulus):
        return np.asarray(shape.center) + np.array([0.5 * (shape.r_in + shape.r_out), 0.0])
    if isinstance(shape, LShape):
        return np.asarray(shape.corner) + shape.inradius
    raise DomainError(f"no reference point for {shape.kind}")


def circumradius(shape: Shape, ref: np.ndarray) -> float:
    """Largest distance from ``ref`` to a point of the shape."""
    if isinstance(shape, (Disk, Ball3D, Annulus)):
        radius = shape.r_out if isinstance(shape, Annulus) else shape.radius
        return float(np.linalg.norm(ref - np.asarray(shape.center)) + radius)
    lo, hi = (np.asarray(b, dtype=float) for b in shape.bounds())
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(len(lo), -1).T
    return float(np.linalg.norm(corners - ref, axis=1).max())


def preset_name(shape: Shape) -> str | None:
    return next((k for k, v in DOMAIN_PRESETS.items() if v == shape), None)


FUNCTION_NAMES = ("paraboloid", "harmonic", "u_eps", "bump", "harmonic_plus_bump", "concentrated_bump")


def function_for(shape: Shape, name: str, eps: float = 0.05) -> TestFunction:
    """Named test function placed relative to ``reference_point(shape)``.

    paraboloid: R^2 - |x - x_ref|^2 with R the largest distance from x_ref to
    the shape, positive inside (1 - r^2 on the unit disk and ball);
    harmonic: (x - x_ref)^2 - (y - y_ref)^2; u_eps: the sharpness family
    centered at x_ref; bump: off-center C^2 bump; concentrated_bump: narrow
    bump at x_ref.
    """
    ref = reference_point(shape)
    r_in = shape.inradius
    n = shape.dimension
    direction = np.array([1.0, 0.5, 0.25][:n])
    direction /= np.linalg.norm(direction)
    if name == "paraboloid":
        return fields.paraboloid(center=ref, height=circumradius(shape, ref) ** 2)
    if name == "harmonic":
        return fields.harmonic_quadratic(center=ref)
    if name == "u_eps":
        if n != 2:
            raise VerificationError("u_eps is a planar family")
        return sharpness_family(eps, center=ref)
    if name == "bump":
        return fields.bump(center=ref + 0.3 * r_in * direction, radius=0.5 * r_in)
    if name == "harmonic_plus_bump":
        return fields.add(
            fields.harmonic_quadratic(center=ref),
            fields.bump(center=ref + 0.3 * r_in * direction, radius=0.5 * r_in),
            name="harmonic_plus_bump",
        )
    if name == "concentrated_bump":
        return fields.bump(center=ref, radius=0.15 * r_in)
    raise VerificationError(f"unknown function {name!r}; expected one of {FUNCTION_NAMES}")


# --- sweeps ---------------------------------------------------------------------------

MANIFEST_VERSION = 1

DEFAULT_MANIFEST: dict[str, Any] = {
    "version": MANIFEST_VERSION,
    "planar": {
        "domains": {"disk": 1 / 64, "square": 1 / 64, "annulus": 1 / 64, "l_shape": 1 / 64, "thin_rectangle": 1 / 64},
        "functions": ["paraboloid", "harmonic", "u_eps", "bump"],
        "eps": 0.05,
        "theorems": [["classical", {"s": 2.0}], ["thm2", {}], ["corollary", {}]],
    },
    "spatial": {
        "domains": {"ball": 1 / 32},
        "functions": ["paraboloid", "harmonic_plus_bump", "concentrated_bump"],
        "theorems": [["thm1", {}], ["classical", {"s": 2.0}]],
    },
}


def manifest_hash(manifest: Mapping[str, Any]) -> str:
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class SuiteEntry:
    domain: GridDomain
    function: TestFunction
    theorem: str
    options: dict = field(default_factory=dict)


def suite_from_manifest(manifest: Mapping[str, Any] = DEFAULT_MANIFEST) -> list[SuiteEntry]:
    """Expand a manifest in its listed order; theorems inapplicable to a shape are skipped."""
    entries = []
    for block in ("planar", "spatial"):
        spec = manifest.get(block)
        if not spec:
            continue
        for dom_name, h in spec["domains"].items():
            shape = DOMAIN_PRESETS[dom_name]
            domain = build_domain(shape, h)
            for fn_name in spec["functions"]:
                f = function_for(shape, fn_name, spec.get("eps", 0.05))
                for tag, opts in spec["theorems"]:
                    if tag == "corollary" and not shape.simply_connected:
                        continue
                    entries.append(SuiteEntry(domain, f, tag, dict(opts)))
    return entries


@dataclass(frozen=True)
class SweepRow:
    index: int
    theorem_tag: str
    domain: dict
    function: dict
    report: InequalityReport | None
    error: str | None

    @property
    def flagged(self) -> bool:
        return self.report is not None and self.report.suspect


@dataclass(frozen=True)
class SweepResult:
    rows: list
    max_constants: dict
    manifest_hash: str | None = None

    @property
    def flagged(self) -> list:
        return [r for r in self.rows if r.flagged]

    @property
    def errors(self) -> list:
        return [r for r in self.rows if r.error is not None]

    def to_dict(self) -> dict:
        return {
            "manifest_hash": self.manifest_hash,
            "max_implied_constant": {k: _num(v) for k, v in self.max_constants.items()},
            "rows": [
                {
                    "index": r.index,
                    "theorem_tag": r.theorem_tag,
                    "flagged": r.flagged,
                    "error": r.error,
                    "report": r.report.to_dict() if r.report else None,
                }
                for r in self.rows
            ],
        }


def constant_sweep(suite: Iterable[SuiteEntry | tuple], manifest: Mapping | None = None) -> SweepResult:
    """Run each entry's verifier; per-row failures are recorded, not raised."""
    entries = [e if isinstance(e, SuiteEntry) else SuiteEntry(*e) for e in suite]
    if not entries:
        raise VerificationError("the suite is empty")
    rows = []
    best: dict[str, float] = {}
    for i, e in enumerate(entries):
        desc = _descriptor(e.domain)
        try:
            rep = verify(e.domain, e.function, e.theorem, **e.options)
            err = None
        except (ValueError, ArithmeticError) as exc:
            rep, err = None, f"{type(exc).__name__}: {exc}"
        rows.append(SweepRow(i, e.theorem, desc, e.function.describe(), rep, err))
        if rep is not None:
            best[e.theorem] = max(best.get(e.theorem, 0.0), rep.implied_constant)
    return SweepResult(rows, best, manifest_hash(manifest) if manifest is not None else None)


REPORT_COLUMNS = (
    "index", "theorem_tag", "domain", "function", "h",
    "lhs_interior_sup", "boundary_sup", "functional_value", "implied_constant",
    "passed", "flagged", "error",
)


def sweep_to_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in result.rows:
            rep = r.report
            nums = (
                [repr(rep.h), repr(rep.lhs_interior_sup), repr(rep.boundary_sup),
                 repr(rep.functional_value), repr(rep.implied_constant), rep.passed]
                if rep else ["", "", "", "", "", False]
            )
            dom = r.domain.get("preset", r.domain["shape"])
            w.writerow([r.index, r.theorem_tag, dom, r.function["name"], *nums, r.flagged, r.error or ""])


def reports_to_csv(reports: Sequence[InequalityReport], path) -> None:
    rows = [SweepRow(i, rep.theorem_tag, rep.domain, rep.function, rep, None) for i, rep in enumerate(reports)]
    sweep_to_csv(SweepResult(rows, {}), path)


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


_NUMBER = {"oneOf": [{"type": "number"}, {"enum": ["inf", "-inf", "nan"]}]}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "InequalityReport",
    "type": "object",
    "required": [
        "theorem_tag", "lhs_interior_sup", "boundary_sup", "functional_value",
        "implied_constant", "h", "conventions", "domain", "function",
    ],
    "properties": {
        "theorem_tag": {"enum": list(THEOREM_TAGS)},
        "lhs_interior_sup": _NUMBER,
        "boundary_sup": _NUMBER,
        "functional_value": {"type": "number", "minimum": 0},
        "implied_constant": _NUMBER,
        "h": {"type": "number", "exclusiveMinimum": 0},
        "conventions": {"type": "object"},
        "domain": {"type": "object", "required": ["shape"]},
        "function": {"type": "object", "required": ["name"]},
        "extras": {"type": "object"},
        "checks": {"type": "object", "additionalProperties": {"type": "boolean"}},
        "passed": {"type": "boolean"},
    },
}

SWEEP_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ConstantSweep",
    "type": "object",
    "required": ["manifest_hash", "max_implied_constant", "rows"],
    "properties": {
        "manifest_hash": {"type": ["string", "null"]},
        "max_implied_constant": {"type": "object", "additionalProperties": _NUMBER},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "theorem_tag", "flagged", "error", "report"],
                "properties": {
                    "report": {"oneOf": [{"type": "null"}, REPORT_SCHEMA]},
                    "error": {"type": ["string", "null"]},
                },
            },
        },
    },
}
