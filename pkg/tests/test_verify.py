import csv
import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from abp_lab.field import TestFunction, constant, paraboloid
from abp_lab.geometry import Annulus, Ball3D, Disk, LShape, Rectangle, build_domain, measure
from abp_lab.norms import lp_norm
from abp_lab.verify import (
    DEFAULT_MANIFEST,
    DOMAIN_PRESETS,
    FUNCTION_NAMES,
    REPORT_SCHEMA,
    SWEEP_SCHEMA,
    InequalityReport,
    SuiteEntry,
    VerificationError,
    constant_sweep,
    discrete_weak_norm,
    function_for,
    implied_constant,
    manifest_hash,
    radial_log_kernel,
    reports_to_csv,
    sharpness_family,
    sharpness_record,
    sharpness_sup,
    sharpness_to_csv,
    suite_from_manifest,
    sweep_to_csv,
    verify,
    verify_classical,
    verify_corollary,
    verify_theorem1,
    verify_theorem2,
    write_json,
)

DISK64 = build_domain(Disk(), 1 / 64)
DISK256 = build_domain(Disk(), 1 / 256)
BALL = build_domain(Ball3D(), 1 / 32)
THIN = build_domain(Rectangle((0, 0), (10, 0.5)), 1 / 32)


def sharp_closed_form(eps, scale=math.pi):
    return 4 * math.pi * math.log(1 / eps) + 2 * math.pi * (1 + math.log(scale))


# --- implied constant and report contract ---------------------------------------------


def test_implied_constant_rules():
    assert implied_constant(2.0, 0.5, 3.0) == 0.5
    assert implied_constant(0.5, 2.0, 3.0) == 0.0
    assert implied_constant(0.0, 0.0, 0.0) == 0.0
    assert implied_constant(1.0, 0.0, 0.0) == math.inf


def test_report_validation():
    base = dict(lhs_interior_sup=1.0, boundary_sup=0.0, functional_value=1.0, implied_constant=1.0, domain={}, function={}, h=0.1)
    with pytest.raises(VerificationError):
        InequalityReport(theorem_tag="thm3", **base)
    with pytest.raises(VerificationError):
        InequalityReport(theorem_tag="thm2", **{**base, "functional_value": -1.0})


# --- sharpness family -----------------------------------------------------------------


def test_sharpness_family_values():
    f = sharpness_family(0.1)
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert f.eval_u(pts).tolist() == pytest.approx([0.5 + math.log(10), math.log(10), 0.0, 0.0], abs=1e-14)
    assert f.eval_lap_u(np.array([[0.05, 0.0], [0.5, 0.0]])).tolist() == pytest.approx([-200.0, 0.0], rel=1e-12)
    assert sharpness_sup(0.1) == pytest.approx(2.8026, abs=1e-4)


@given(st.floats(0.01, 0.9))
def test_sharpness_family_is_c1(eps):
    f = sharpness_family(eps)
    d = 1e-7 * eps
    inner = (f.eval_u(np.array([[eps - d, 0.0]])) - f.eval_u(np.array([[eps - 2 * d, 0.0]])))[0] / d
    outer = (f.eval_u(np.array([[eps + 2 * d, 0.0]])) - f.eval_u(np.array([[eps + d, 0.0]])))[0] / d
    assert inner == pytest.approx(-1 / eps, rel=1e-4)
    assert outer == pytest.approx(-1 / eps, rel=1e-4)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.5, 2.0])
def test_sharpness_rejects_bad_eps(eps):
    with pytest.raises(VerificationError):
        sharpness_family(eps)


def test_sharpness_l1_norm():
    eps = 0.01
    oracle = integrate.quad(lambda r: 2 * math.pi * r * 2 / eps**2, 0, eps)[0]
    assert oracle == pytest.approx(2 * math.pi, rel=1e-12)
    f = sharpness_family(eps)
    from abp_lab.field import sample

    lap = sample(DISK256, f, lap_subsamples=8)[1]
    # cells straddling r = eps carry an O(h / eps) quadrature error
    assert lp_norm(lap, 1) == pytest.approx(2 * math.pi, rel=0.02)


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05, 0.02, 0.01])
def test_radial_oracle_closed_form(eps):
    assert radial_log_kernel(eps) == pytest.approx(sharp_closed_form(eps), rel=1e-10)


def test_sharpness_records(tmp_path):
    recs = [sharpness_record(e, domain=DISK256) for e in (0.1, 0.01)]
    for r in recs:
        assert r.sup_u == 0.5 + math.log(1 / r.epsilon)
        assert r.l1_lap == 2 * math.pi
        assert r.log_kernel == pytest.approx(r.log_kernel_radial, rel=0.05)
        assert 0.05 <= r.ratio_kernel <= 0.12
    assert recs[1].ratio_l1 > recs[0].ratio_l1
    sharpness_to_csv(recs, tmp_path / "s.csv")
    rows = list(csv.reader((tmp_path / "s.csv").open()))
    assert rows[0][0] == "epsilon" and len(rows) == 3


# --- classical ------------------------------------------------------------------------


def test_classical_disk_paraboloid():
    rep = verify_classical(DISK64, function_for(Disk(), "paraboloid"), 2.0)
    assert rep.lhs_interior_sup == pytest.approx(1.0)
    assert rep.boundary_sup < 3 * DISK64.spacing
    assert rep.functional_value == pytest.approx(2 * 4 * math.sqrt(math.pi), rel=0.01)
    assert rep.implied_constant == pytest.approx(0.0705, abs=0.002)
    assert rep.passed


def test_classical_constant_function():
    rep = verify_classical(DISK64, constant(3.0), 2.0)
    assert rep.implied_constant == 0.0 and rep.functional_value == 0.0


def test_classical_rejects_endpoint():
    with pytest.raises(VerificationError):
        verify_classical(DISK64, sharpness_family(0.1), 1.0)
    with pytest.raises(VerificationError):
        verify_classical(BALL, function_for(Ball3D(), "paraboloid"), 1.5)
    rep = verify_classical(DISK64, sharpness_family(0.1), 1.0, allow_endpoint=True)
    assert "endpoint" in rep.conventions
    assert rep.functional_value == pytest.approx(2 * math.pi, rel=0.05)


# --- theorem 1 ------------------------------------------------------------------------


def test_theorem1_ball_paraboloid():
    rep = verify_theorem1(BALL, function_for(Ball3D(), "paraboloid"))
    closed = 9 * (4 * math.pi / 3) ** (2 / 3)
    assert rep.functional_value == pytest.approx(closed, rel=0.02)
    assert rep.lhs_interior_sup == pytest.approx(1.0)
    assert rep.implied_constant == pytest.approx((1 - rep.boundary_sup) / closed, rel=0.03)
    assert rep.checks == {"pointwise_riesz_bound": True, "lorentz_duality": True}
    assert rep.extras["weak_norm_continuum"] == pytest.approx((4 * math.pi / 3) ** (1 / 3))
    assert rep.passed


def test_theorem1_concentrated_bump():
    rep = verify_theorem1(BALL, function_for(Ball3D(), "concentrated_bump"))
    assert math.isfinite(rep.implied_constant) and rep.passed


def test_discrete_weak_norm_self_cell():
    # the clamped self cell alone gives (h^3)^{1/3} / (h/2) = 2
    assert discrete_weak_norm(BALL, np.zeros(3)) == pytest.approx(2.0, rel=1e-12)


def test_theorem1_rejects_planar():
    with pytest.raises(VerificationError):
        verify_theorem1(DISK64, function_for(Disk(), "paraboloid"))


# --- theorem 2 and corollary -------------------------------------------------------------


def test_theorem2_sharpness_001():
    rep = verify_theorem2(DISK256, sharpness_family(0.01))
    assert rep.lhs_interior_sup == pytest.approx(0.5 + math.log(100), abs=1e-9)
    assert rep.functional_value == pytest.approx(sharp_closed_form(0.01), rel=0.05)
    assert rep.implied_constant == pytest.approx(0.0715, rel=0.05)


def test_theorem2_sharpness_01():
    rep = verify_theorem2(DISK64, sharpness_family(0.1))
    assert rep.implied_constant == pytest.approx(2.8026 / 42.41, rel=0.05)


def test_theorem2_zero_function():
    rep = verify_theorem2(DISK64, constant(0.0))
    assert (rep.lhs_interior_sup, rep.boundary_sup, rep.functional_value, rep.implied_constant) == (0, 0, 0, 0)


def test_theorem2_rejects_3d():
    with pytest.raises(VerificationError):
        verify_theorem2(BALL, function_for(Ball3D(), "paraboloid"))


def test_corollary_thin_rectangle():
    shape = Rectangle((0, 0), (10, 0.5))
    rep = verify_corollary(THIN, function_for(shape, "bump"))
    assert rep.extras["inradius"] == pytest.approx(0.25, abs=THIN.spacing)
    assert rep.checks["pointwise_below_theorem2"]
    assert rep.functional_value <= rep.extras["theorem2_functional"]
    assert rep.extras["min_pointwise_gap"] >= 0


def test_corollary_disk_gap_bound():
    f = sharpness_family(0.1)
    rep = verify_corollary(DISK64, f)
    from abp_lab.field import sample

    l1 = lp_norm(sample(DISK64, f, lap_subsamples=8)[1], 1)
    gap = rep.extras["theorem2_functional"] - rep.functional_value
    assert 0 <= gap <= l1 * math.log(measure(DISK64) / rep.extras["scale"]) * (1 + 1e-12)


def test_corollary_rejects_annulus():
    with pytest.raises(VerificationError):
        verify_corollary(build_domain(Annulus(), 1 / 32), function_for(Annulus(), "bump"))


def test_dispatch_and_cross_check():
    f = function_for(Rectangle(), "bump")
    dom = build_domain(Rectangle(), 1 / 64)
    rep = verify(dom, f, "thm2", cross_check=True)
    assert rep.theorem_tag == "thm2"
    assert rep.extras["discrete_relative_difference"] < 0.05
    with pytest.raises(VerificationError):
        verify(dom, f, "thm9")


def test_function_for_rejects_unknown():
    with pytest.raises(VerificationError):
        function_for(Disk(), "wiggle")
    with pytest.raises(VerificationError):
        function_for(Ball3D(), "u_eps")


# --- scaling invariance -----------------------------------------------------------------

PLANAR_CASES = [
    (DOMAIN_PRESETS["disk"], "u_eps", "thm2"),
    (DOMAIN_PRESETS["square"], "bump", "corollary"),
    (DOMAIN_PRESETS["l_shape"], "paraboloid", "classical"),
    (DOMAIN_PRESETS["annulus"], "bump", "thm2"),
]
PLANAR_DOMAINS = {id(s): build_domain(s, 1 / 32) for s, _, _ in PLANAR_CASES}
BALL16 = build_domain(Ball3D(), 1 / 16)


@settings(max_examples=15)
@given(st.integers(0, len(PLANAR_CASES) - 1), st.floats(1e-3, 1e3), st.booleans())
def test_implied_constant_scale_invariant(which, lam, negate):
    shape, name, tag = PLANAR_CASES[which]
    dom = PLANAR_DOMAINS[id(shape)]
    f = function_for(shape, name, eps=0.1)
    lam = -lam if negate else lam
    opts = {"s": 2.0} if tag == "classical" else {}
    a = verify(dom, f, tag, **opts).implied_constant
    b = verify(dom, f.scaled(lam), tag, **opts).implied_constant
    assert b == pytest.approx(a, rel=1e-12, abs=1e-15)


@settings(max_examples=8)
@given(st.floats(1e-3, 1e3), st.sampled_from(["paraboloid", "harmonic_plus_bump", "concentrated_bump"]))
def test_theorem1_scale_invariant(lam, name):
    f = function_for(Ball3D(), name)
    a = verify_theorem1(BALL16, f)
    b = verify_theorem1(BALL16, f.scaled(lam))
    assert b.implied_constant == pytest.approx(a.implied_constant, rel=1e-12, abs=1e-15)
    assert b.checks == a.checks


# --- sweeps and export ---------------------------------------------------------------------


def test_empty_suite_rejected():
    with pytest.raises(VerificationError):
        constant_sweep([])


def test_default_manifest_expansion():
    suite = suite_from_manifest()
    # 5 planar domains x 4 functions x 3 theorems, minus the annulus corollary; 1 ball x 3 x 2
    assert len(suite) == 5 * 4 * 3 - 4 + 3 * 2
    assert all(not (e.theorem == "corollary" and e.domain.shape.kind == "annulus") for e in suite)
    assert manifest_hash(DEFAULT_MANIFEST) == manifest_hash(json.loads(json.dumps(DEFAULT_MANIFEST)))


def test_sweep_records_row_errors_and_maxima(tmp_path):
    square = build_domain(Rectangle(), 1 / 32)
    bad = TestFunction("bad", lambda p: np.where(p[..., 0] < 0.5, np.nan, 1.0), lambda p: np.zeros(np.shape(p)[:-1]))
    suite = [
        SuiteEntry(square, function_for(Rectangle(), "bump"), "thm2"),
        (square, bad, "thm2"),  # non-finite samples
        SuiteEntry(square, function_for(Rectangle(), "paraboloid"), "classical", {"s": 1.0}),
        SuiteEntry(square, function_for(Rectangle(), "paraboloid"), "corollary"),
    ]
    res = constant_sweep(suite, manifest={"custom": 1})
    assert [r.error is None for r in res.rows] == [True, False, False, True]
    assert "FieldError" in res.rows[1].error and "VerificationError" in res.rows[2].error
    assert set(res.max_constants) == {"thm2", "corollary"}
    assert res.max_constants["thm2"] == res.rows[0].report.implied_constant
    assert res.manifest_hash == manifest_hash({"custom": 1})
    data = res.to_dict()
    jsonschema.validate(data, SWEEP_SCHEMA)
    write_json(data, tmp_path / "sweep.json")
    assert json.loads((tmp_path / "sweep.json").read_text())["rows"][1]["report"] is None
    sweep_to_csv(res, tmp_path / "sweep.csv")
    rows = list(csv.reader((tmp_path / "sweep.csv").open()))
    assert len(rows) == 5 and rows[2][-1].startswith("FieldError")


def test_suspect_rows_flagged():
    square = build_domain(Rectangle(), 1 / 32)
    # a claimed Laplacian that is far too small makes the functional tiny
    liar = TestFunction("liar", paraboloid((0.5, 0.5), 1.0).eval_u, lambda p: np.full(np.shape(p)[:-1], 1e-9))
    res = constant_sweep([(square, liar, "thm2")])
    assert res.rows[0].flagged and res.flagged == [res.rows[0]]


def test_report_json_schema(tmp_path):
    reports = [
        verify_theorem1(BALL16, function_for(Ball3D(), "paraboloid")),
        verify_theorem2(DISK64, sharpness_family(0.1), cross_check=True),
        verify_classical(DISK64, constant(1.0), 2.0),
    ]
    for rep in reports:
        d = rep.to_dict()
        jsonschema.validate(d, REPORT_SCHEMA)
        assert d["conventions"]["lorentz"] == "Lpq-unnormalized"
        json.dumps(d, allow_nan=False)
    inf_rep = InequalityReport("thm2", 1.0, 0.0, 0.0, math.inf, {"shape": "disk"}, {"name": "x"}, 0.1)
    assert inf_rep.to_dict()["implied_constant"] == "inf" and not inf_rep.passed
    jsonschema.validate(inf_rep.to_dict(), REPORT_SCHEMA)
    reports_to_csv(reports, tmp_path / "r.csv")
    assert len(list(csv.reader((tmp_path / "r.csv").open()))) == 4


@pytest.mark.slow
def test_default_sweep_is_clean():
    res = constant_sweep(suite_from_manifest(), DEFAULT_MANIFEST)
    assert not res.errors and not res.flagged
    assert set(res.max_constants) == {"classical", "thm1", "thm2", "corollary"}
    assert all(0 < c < 1 for c in res.max_constants.values())
    assert all(r.report.passed for r in res.rows)
