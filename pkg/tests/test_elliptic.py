import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abp_lab.elliptic import (
    SCHEME,
    ConvergenceError,
    SolveDiagnostics,
    harmonic_extension,
    reduction_terms,
    solve_dirichlet,
)
from abp_lab.field import affine, bump, constant, harmonic_quadratic, paraboloid, sample, sine_product
from abp_lab.geometry import Annulus, Ball3D, Disk, LShape, Rectangle, build_domain
from abp_lab.verify import DOMAIN_PRESETS, FUNCTION_NAMES, function_for, lap_subsamples

SQUARE = build_domain(Rectangle(), 1 / 32)
DOMAINS = [
    build_domain(Rectangle(), 1 / 32),
    build_domain(Disk(), 1 / 24),
    build_domain(LShape(), 1 / 32),
    build_domain(Annulus(), 1 / 32),
]


def test_sine_pair_on_unit_square():
    dom = build_domain(Rectangle(), 1 / 64)
    u, lap = sample(dom, sine_product())
    sol, diag = solve_dirichlet(dom, -lap, 0.0)
    assert diag.residual_inf <= diag.tolerance
    assert diag.scheme == SCHEME
    # zero data sits h/2 outside the square, so agreement is first order here
    assert np.abs(sol.interior_values - u.interior_values).max() < 2 * dom.spacing
    assert sol.interior_values.max() == pytest.approx(1.0, abs=0.05)


def test_constant_data_reproduced():
    sol, _ = solve_dirichlet(SQUARE, 0.0, 5.0)
    assert np.abs(sol.interior_values - 5.0).max() < 1e-10


def test_disk_paraboloid():
    dom = build_domain(Disk(), 1 / 32)
    sol, _ = solve_dirichlet(dom, 4.0, 0.0)
    r2 = (dom.interior_points**2).sum(axis=1)
    assert np.abs(sol.interior_values - (1 - r2)).max() < 4 * dom.spacing


@pytest.mark.parametrize("f", [affine((0.3, -1.2), 0.5), harmonic_quadratic((0.5, 0.5))], ids=lambda f: f.name)
def test_harmonic_extension_reproduces_discrete_harmonic(f):
    # affine and x^2 - y^2 are exactly discrete-harmonic
    u, _ = sample(SQUARE, f)
    phi = harmonic_extension(SQUARE, u)
    assert np.abs(phi.interior_values - u.interior_values).max() < 1e-10


def test_second_order_convergence():
    errs = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        dom = build_domain(Rectangle(), h)
        u, lap = sample(dom, sine_product())
        sol, _ = solve_dirichlet(dom, -lap, u)
        errs.append(np.abs(sol.interior_values - u.interior_values).max())
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3 <= r <= 5 for r in ratios), ratios


def test_3d_solve():
    dom = build_domain(Ball3D(), 1 / 12)
    u, lap = sample(dom, paraboloid())
    sol, _ = solve_dirichlet(dom, -lap, u)
    # the stencil is exact on quadratics
    assert np.abs(sol.interior_values - u.interior_values).max() < 1e-9


def test_input_forms_agree():
    u, lap = sample(SQUARE, sine_product())
    a, _ = solve_dirichlet(SQUARE, -lap, u)
    b, _ = solve_dirichlet(SQUARE, -lap.interior_values, u.boundary_values)
    c, _ = solve_dirichlet(SQUARE, lambda p: 2 * math.pi**2 * sine_product().eval_u(p), sine_product().eval_u)
    assert np.array_equal(a.interior_values, b.interior_values)
    assert np.allclose(a.interior_values, c.interior_values, atol=1e-12)
    with pytest.raises(ValueError):
        solve_dirichlet(SQUARE, np.zeros(3), 0.0)


def test_non_convergence_carries_diagnostics():
    u, lap = sample(SQUARE, sine_product())
    with pytest.raises(ConvergenceError) as info:
        solve_dirichlet(SQUARE, -lap, u, max_iter=3)
    assert isinstance(info.value.diagnostics, SolveDiagnostics)
    assert info.value.diagnostics.iterations == 3
    assert info.value.diagnostics.residual_inf > info.value.diagnostics.tolerance


def test_deterministic():
    u, lap = sample(SQUARE, bump((0.4, 0.6), 0.3))
    a, da = solve_dirichlet(SQUARE, -lap, u)
    b, db = solve_dirichlet(SQUARE, -lap, u)
    assert np.array_equal(a.interior_values, b.interior_values) and da == db


@pytest.mark.parametrize("preset", ["disk", "square", "annulus", "l_shape"])
@pytest.mark.parametrize("name", FUNCTION_NAMES)
def test_reduction_inequality_on_suite(preset, name):
    shape = DOMAIN_PRESETS[preset]
    dom = build_domain(shape, 1 / 32)
    f = function_for(shape, name, eps=0.1)
    u, _ = sample(dom, f, lap_subsamples(f, 2))
    full, bdy, diff = reduction_terms(u)
    assert full <= bdy + diff + 1e-9


# --- properties -----------------------------------------------------------------------


@given(st.integers(0, len(DOMAINS) - 1), st.integers(0, 2**32 - 1), st.floats(0.1, 100.0))
def test_discrete_maximum_principle(which, seed, scale):
    dom = DOMAINS[which]
    g = scale * np.random.default_rng(seed).normal(size=len(dom.boundary_index))
    phi = harmonic_extension(dom, g)
    # exact comparison, no tolerance
    assert phi.interior_values.max() <= g.max()
    assert phi.interior_values.min() >= g.min()


@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_solver_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    f1, f2 = rng.normal(size=(2, SQUARE.n_interior))
    g1, g2 = rng.normal(size=(2, len(SQUARE.boundary_index)))
    tol = 1e-11
    s1 = solve_dirichlet(SQUARE, f1, g1, tol=tol)[0].interior_values
    s2 = solve_dirichlet(SQUARE, f2, g2, tol=tol)[0].interior_values
    s = solve_dirichlet(SQUARE, a * f1 + b * f2, a * g1 + b * g2, tol=tol)[0].interior_values
    assert np.allclose(s, a * s1 + b * s2, atol=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_residual_contract(seed):
    rng = np.random.default_rng(seed)
    f = 10 * rng.normal(size=SQUARE.n_interior)
    _, diag = solve_dirichlet(SQUARE, f, 0.0)
    assert diag.residual_inf <= diag.tolerance
    assert diag.tolerance == pytest.approx(1e-8 * max(1.0, np.abs(f).max()))
