"""Command-line front end.

Every subcommand resolves its settings from built-in defaults, then an
optional JSON ``--config`` file, then explicit flags, computes everything,
and only then writes ``manifest.json`` (the resolved settings) plus its
CSV/JSON outputs into ``--out``.  Exit status: 0 when every asserted check
passes, 1 when one fails, 2 for configuration errors (nothing is written).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import elliptic, kernels, stochastic, verify
from .field import extrema, field_to_csv, sample
from .geometry import Disk, build_domain, shape_from_config

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


# --- value parsing ------------------------------------------------------------------


def _float(v) -> float:
    if isinstance(v, bool):
        raise ValueError("expected a number")
    return float(v)


def _pos_float(v) -> float:
    x = _float(v)
    if not (x > 0 and math.isfinite(x)):
        raise ValueError("expected a positive number")
    return x


def _pos_int(v) -> int:
    if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
        raise ValueError("expected a positive integer")
    x = int(v)
    if x <= 0:
        raise ValueError("expected a positive integer")
    return x


def _seed(v) -> int:
    if isinstance(v, bool):
        raise ValueError("expected an integer seed")
    x = int(v)
    if not 0 <= x < 2**64:
        raise ValueError("seed must lie in [0, 2^64)")
    return x


def _choice(*options) -> Callable:
    def conv(v):
        if v not in options:
            raise ValueError(f"expected one of {list(options)}")
        return v

    return conv


def _shape(v):
    if isinstance(v, str):
        if v not in verify.DOMAIN_PRESETS:
            raise ValueError(f"unknown shape preset; expected one of {sorted(verify.DOMAIN_PRESETS)}")
        return v
    if isinstance(v, dict):
        shape_from_config(v)
        return v
    raise ValueError("expected a preset name or a shape mapping")


def _point(v):
    if v is None:
        return None
    if isinstance(v, str):
        v = [float(x) for x in v.split(",")]
    return [float(x) for x in v]


def _float_list(v):
    if isinstance(v, str):
        v = v.split(",")
    out = [float(x) for x in v]
    if not out:
        raise ValueError("expected at least one value")
    return out


def _time(v):
    """A positive float or a named time: omega-over-8 (|Omega|/8) or inradius (c_geo inradius^2)."""
    if isinstance(v, str) and v in ("omega-over-8", "inradius"):
        return v
    return _pos_float(v)


def _optional(conv):
    return lambda v: None if v is None else conv(v)


@dataclass
class Command:
    name: str
    help: str
    settings: dict  # key -> (default, converter)
    run: Callable
    flags: list = field(default_factory=list)


def resolve(cmd: Command, file_cfg: dict, flags: dict) -> dict:
    """Defaults <- config file <- explicit flags, every value validated."""
    unknown = set(file_cfg) - set(cmd.settings) - {"command"}
    if unknown:
        raise ConfigError(f"unknown config keys for {cmd.name}: {sorted(unknown)}")
    if file_cfg.get("command", cmd.name) != cmd.name:
        raise ConfigError(f"config is for command {file_cfg['command']!r}, not {cmd.name!r}")
    out = {}
    for key, (default, conv) in cmd.settings.items():
        value = default
        if key in file_cfg:
            value = file_cfg[key]
        if flags.get(key) is not None:
            value = flags[key]
        try:
            out[key] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc} (got {value!r})") from exc
    return out


def _shape_obj(value):
    return verify.DOMAIN_PRESETS[value] if isinstance(value, str) else shape_from_config(value)


def _default_h(shape) -> float:
    return 1 / 32 if shape.dimension == 3 else 1 / 64


# --- results -------------------------------------------------------------------------


@dataclass
class Outcome:
    summary: list  # (label, value) rows, every value also present in a written file
    files: dict  # filename -> callable(path)
    checks: dict  # name -> bool
    failing_rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _json_writer(obj):
    return lambda path: verify.write_json(obj, path)


# --- commands --------------------------------------------------------------------------


def run_verify(cfg) -> Outcome:
    shape = _shape_obj(cfg["domain"])
    h = cfg["h"] or (1 / 256 if cfg["function"] == "u_eps" and shape.dimension == 2 else _default_h(shape))
    domain = build_domain(shape, h)
    f = verify.function_for(shape, cfg["function"], cfg["eps"])
    opts = {"cross_check": cfg["cross_check"]}
    if cfg["theorem"] == "classical":
        opts["s"] = cfg["s"]
    rep = verify.verify(domain, f, cfg["theorem"], **opts)
    d = rep.to_dict()
    summary = [(k, d[k]) for k in ("theorem_tag", "lhs_interior_sup", "boundary_sup", "functional_value", "implied_constant")]
    summary += [(f"check:{k}", v) for k, v in rep.checks.items()]
    checks = {"implied_constant_finite": math.isfinite(rep.implied_constant), **rep.checks}
    return Outcome(
        summary,
        {"report.json": _json_writer(d), "report.csv": lambda p: verify.reports_to_csv([rep], p)},
        checks,
    )


def run_sweep(cfg) -> Outcome:
    manifest = cfg["manifest"] or verify.DEFAULT_MANIFEST
    suite = verify.suite_from_manifest(manifest)
    res = verify.constant_sweep(suite, manifest)
    d = res.to_dict()
    summary = [("rows_total", len(res.rows)), ("errors_total", len(res.errors)), ("flagged_total", len(res.flagged))]
    summary += [(f"max_implied_constant:{k}", v) for k, v in d["max_implied_constant"].items()]
    summary.append(("manifest_hash", res.manifest_hash))
    d["rows_total"], d["errors_total"], d["flagged_total"] = len(res.rows), len(res.errors), len(res.flagged)
    checks = {
        "no_row_errors": not res.errors,
        "no_flagged_rows": not res.flagged,
        "all_reports_pass": all(r.report.passed for r in res.rows if r.report is not None),
    }
    failing = [
        f"{r.index} {r.theorem_tag} {r.domain.get('preset', r.domain['shape'])} {r.function['name']}: "
        + (r.error or ("flagged" if r.flagged else "checks failed"))
        for r in res.rows
        if r.error or r.flagged or not r.report.passed
    ]
    files = {"sweep.json": _json_writer(d), "sweep.csv": lambda p: verify.sweep_to_csv(res, p)}
    return Outcome(summary, files, checks, failing)


SHARPNESS_BAND = (0.05, 0.12)
SHARPNESS_ORACLE_RTOL = 0.05


def run_sharpness(cfg) -> Outcome:
    eps = sorted(cfg["eps"], reverse=True)
    domain = build_domain(verify.DOMAIN_PRESETS["disk"], cfg["h"])
    recs = [verify.sharpness_record(e, domain=domain) for e in eps]
    l1 = [r.ratio_l1 for r in recs]
    rel = [abs(r.log_kernel - r.log_kernel_radial) / r.log_kernel_radial for r in recs]
    out = {
        "records": [r.to_dict() for r in recs],
        "max_relative_grid_vs_radial": max(rel),
        "ratio_l1_increasing": all(b > a for a, b in zip(l1, l1[1:])),
    }
    summary = [(f"eps={r.epsilon:g}", f"ratio_l1={r.ratio_l1!r} ratio_kernel={r.ratio_kernel!r}") for r in recs]
    summary.append(("max_relative_grid_vs_radial", max(rel)))
    checks = {
        "ratio_l1_increasing": out["ratio_l1_increasing"],
        "ratio_kernel_in_band": all(SHARPNESS_BAND[0] <= r.ratio_kernel <= SHARPNESS_BAND[1] for r in recs),
        "grid_matches_radial": max(rel) <= SHARPNESS_ORACLE_RTOL,
    }
    return Outcome(
        summary,
        {"sharpness.json": _json_writer(out), "sharpness.csv": lambda p: verify.sharpness_to_csv(recs, p)},
        checks,
    )


LEMMA_BOUND = 2.0


def run_lemma(cfg) -> Outcome:
    a = kernels.lemma_grid(cfg["refine"])
    rows = kernels.lemma_sweep(a, c1=cfg["c1"], c2=cfg["c2"], t=cfg["t"])
    c_emp = max(r.ratio for r in rows)
    out = {"c_emp": c_emp, "n_points": len(rows), "e1_at_1": kernels.exp_integral_e1(1.0)}
    summary = [("c_emp", c_emp), ("n_points", len(rows)), ("e1_at_1", out["e1_at_1"])]
    return Outcome(
        summary,
        {"lemma.json": _json_writer(out), "lemma.csv": lambda p: kernels.lemma_sweep_to_csv(rows, p)},
        {"c_emp_at_most_2": c_emp <= LEMMA_BOUND},
    )


def _start(shape, x0):
    return np.asarray(x0 if x0 is not None else verify.reference_point(shape), dtype=float)


def run_exitprob(cfg) -> Outcome:
    shape = _shape_obj(cfg["shape"])
    x0 = _start(shape, cfg["x0"])
    if cfg["t"] == "omega-over-8":
        t = shape.area / 8
    elif cfg["t"] == "inradius":
        t = cfg["c_geo"] * shape.inradius**2
    else:
        t = cfg["t"]
    dt = cfg["dt"] or stochastic.default_dt(shape)
    mc = stochastic.McConfig(seed=cfg["seed"], n_paths=cfg["paths"], dt=dt, horizon=t)
    out: dict[str, Any] = {"t": t, "x0": x0.tolist(), "dt": dt}
    summary = [("t", t), ("dt", dt)]
    checks = {}
    files = {}
    if cfg["mode"] in ("free", "both"):
        free = stochastic.free_terminal_exterior_probability(shape, x0, t, "mc", mc)
        out["free_terminal"] = {"estimate": free.estimate, "stderr": free.stderr}
        summary += [("free_terminal_estimate", free.estimate), ("free_terminal_stderr", free.stderr)]
        if isinstance(shape, Disk) and np.array_equal(x0, np.asarray(shape.center)):
            exact = stochastic.free_terminal_exterior_probability(shape, x0, t, "exact_ball").estimate
            out["free_terminal"]["exact"] = exact
            summary.append(("free_terminal_exact", exact))
            checks["free_terminal_matches_exact"] = abs(free.estimate - exact) <= 3 * free.stderr
    if cfg["mode"] in ("path", "both"):
        times = stochastic.exit_times(shape, x0, t, mc)
        flag = np.isfinite(times).astype(float)
        est, se = float(flag.mean()), stochastic.standard_error(flag)
        out["path_exit"] = {"estimate": est, "stderr": se}
        summary += [("path_exit_estimate", est), ("path_exit_stderr", se)]
        if "free_terminal" in out:
            fr = out["free_terminal"]
            checks["path_dominates_terminal"] = est + 3 * math.hypot(se, fr["stderr"]) >= fr["estimate"]
        bins, counts = stochastic.exit_time_histogram(times, t, cfg["bins"])
        files["exit_times.csv"] = lambda p: stochastic.histogram_to_csv(bins, counts, p)
    if cfg["t"] == "omega-over-8":
        key = "path_exit" if "path_exit" in out else "free_terminal"
        checks["at_least_half"] = out[key]["estimate"] + 3 * out[key]["stderr"] >= 0.5
    if cfg["t"] == "inradius":
        key = "path_exit" if "path_exit" in out else "free_terminal"
        checks["at_least_one_percent"] = out[key]["estimate"] - 3 * out[key]["stderr"] >= 0.01
    files["exitprob.json"] = _json_writer(out)
    return Outcome(summary, files, checks)


def run_feynman_kac(cfg) -> Outcome:
    shape = _shape_obj(cfg["shape"])
    x0 = _start(shape, cfg["x0"])
    f = verify.function_for(shape, cfg["function"], cfg["eps"])
    horizon = cfg["horizon"] or shape.area
    dt = cfg["dt"] or stochastic.default_dt(shape)
    mc = stochastic.McConfig(seed=cfg["seed"], n_paths=cfg["paths"], dt=dt, horizon=horizon)
    stats = stochastic.simulate(shape, x0, f.eval_u, f.eval_lap_u, mc, eval_u=f.eval_u)
    exact = float(f.eval_u(x0[None, :])[0])
    err = stats.estimate - exact
    out = {
        "x0": x0.tolist(),
        "horizon": horizon,
        "dt": dt,
        "exact": exact,
        "estimate": stats.estimate,
        "stderr_estimate": stats.stderr_estimate,
        "error": err,
        "exit_fraction": stats.exit_fraction,
        "mean_terminal_u": stats.mean_terminal_u,
        "mean_occupation_integral": stats.mean_occupation_integral,
        "stderr_exit": stats.stderr_exit,
        "stderr_terminal_u": stats.stderr_terminal_u,
        "stderr_occupation": stats.stderr_occupation,
        "n_paths": stats.n_paths,
        "sigmas": cfg["sigmas"],
    }
    summary = [(k, out[k]) for k in ("exact", "estimate", "stderr_estimate", "error", "exit_fraction")]
    bins, counts = stochastic.exit_time_histogram(stats.exit_times, horizon, cfg["bins"])
    return Outcome(
        summary,
        {"feynman_kac.json": _json_writer(out), "exit_times.csv": lambda p: stochastic.histogram_to_csv(bins, counts, p)},
        {"within_sigmas": abs(err) <= cfg["sigmas"] * stats.stderr_estimate},
    )


def run_solve(cfg) -> Outcome:
    shape = _shape_obj(cfg["shape"])
    domain = build_domain(shape, cfg["h"] or _default_h(shape))
    f = verify.function_for(shape, cfg["function"], cfg["eps"])
    u, lap = sample(domain, f)
    sol, diag = elliptic.solve_dirichlet(domain, -lap, u, tol=cfg["tol"])
    err = float(np.abs(sol.interior_values - u.interior_values).max())
    ex = extrema(sol)
    out = {
        "iterations": diag.iterations,
        "residual_inf": diag.residual_inf,
        "tolerance": diag.tolerance,
        "scheme": diag.scheme,
        "max_error_vs_closed_form": err,
        "interior_sup": ex.interior_sup,
        "boundary_sup": ex.boundary_sup,
        "h": domain.spacing,
        "n_interior": domain.n_interior,
    }
    summary = [(k, out[k]) for k in ("iterations", "residual_inf", "max_error_vs_closed_form", "h")]
    return Outcome(
        summary,
        {"solve.json": _json_writer(out), "solution.csv": lambda p: field_to_csv(sol, p)},
        {"converged": diag.residual_inf <= diag.tolerance},
    )


_COMMON_MC = {
    "seed": (0, _seed),
    "paths": (100_000, _pos_int),
    "dt": (None, _optional(_pos_float)),
    "bins": (50, _pos_int),
}

COMMANDS = {
    c.name: c
    for c in [
        Command(
            "verify",
            "check one inequality on one domain/function pair",
            {
                "theorem": ("thm2", _choice(*verify.THEOREM_TAGS)),
                "domain": ("disk", _shape),
                "function": ("u_eps", _choice(*verify.FUNCTION_NAMES)),
                "eps": (0.01, _pos_float),
                "h": (None, _optional(_pos_float)),
                "s": (2.0, _pos_float),
                "cross_check": (False, bool),
            },
            run_verify,
            ["theorem", "domain", "function", "eps", "h", "s", "cross_check"],
        ),
        Command(
            "sweep",
            "empirical constants over a suite manifest",
            {"manifest": (None, _optional(lambda v: dict(v)))},
            run_sweep,
        ),
        Command(
            "sharpness",
            "both sharpness ratios along the u_eps family",
            {"eps": ([0.2, 0.1, 0.05, 0.02, 0.01], _float_list), "h": (1 / 256, _pos_float)},
            run_sharpness,
            ["eps", "h"],
        ),
        Command(
            "lemma",
            "planar kernel lemma sweep over a = r^2/(c2 t)",
            {"c1": (1.0, _pos_float), "c2": (1.0, _pos_float), "t": (1.0, _pos_float), "refine": (1, _pos_int)},
            run_lemma,
            ["c1", "c2", "t", "refine"],
        ),
        Command(
            "exitprob",
            "path-exit and free-terminal exterior probabilities",
            {
                "shape": ("disk", _shape),
                "x0": (None, _point),
                "t": ("omega-over-8", _time),
                "c_geo": (stochastic.DEFAULT_C_GEO, _pos_float),
                "mode": ("both", _choice("both", "path", "free")),
                **_COMMON_MC,
            },
            run_exitprob,
            ["shape", "x0", "t", "c_geo", "mode", "seed", "paths", "dt", "bins"],
        ),
        Command(
            "feynman-kac",
            "Monte Carlo Feynman-Kac estimate of u(x0)",
            {
                "shape": ("disk", _shape),
                "function": ("paraboloid", _choice(*verify.FUNCTION_NAMES)),
                "eps": (0.05, _pos_float),
                "x0": (None, _point),
                "horizon": (None, _optional(_pos_float)),
                "sigmas": (3.0, _pos_float),
                **_COMMON_MC,
            },
            run_feynman_kac,
            ["shape", "function", "eps", "x0", "horizon", "sigmas", "seed", "paths", "dt", "bins"],
        ),
        Command(
            "solve",
            "discrete Dirichlet solve against a closed-form solution",
            {
                "shape": ("square", _shape),
                "function": ("paraboloid", _choice(*verify.FUNCTION_NAMES)),
                "eps": (0.05, _pos_float),
                "h": (None, _optional(_pos_float)),
                "tol": (None, _optional(_pos_float)),
            },
            run_solve,
            ["shape", "function", "eps", "h", "tol"],
        ),
    ]
}

_FLAG_HELP = {
    "theorem": "classical, thm1, thm2 or corollary",
    "domain": "domain preset name",
    "shape": "shape preset name",
    "function": "test function name",
    "eps": "sharpness parameter (comma-separated list for 'sharpness')",
    "h": "grid spacing",
    "s": "Lebesgue exponent for the classical bound",
    "cross_check": "also evaluate with the discrete Laplacian",
    "x0": "start point, comma-separated",
    "t": "time, 'omega-over-8' or 'inradius' (c_geo * inradius^2)",
    "c_geo": "multiple of inradius^2 for t = inradius",
    "mode": "both, path or free",
    "seed": "64-bit seed",
    "paths": "number of paths",
    "dt": "time step (default 1e-4 inradius^2)",
    "bins": "exit-time histogram bins",
    "horizon": "time horizon T (default |Omega|)",
    "sigmas": "tolerance in standard errors",
    "c1": "lemma constant c1",
    "c2": "lemma constant c2",
    "refine": "points per decade interval",
    "tol": "solver residual tolerance",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abp-lab", description="Maximum-principle experiments on grid domains.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS.values():
        p = sub.add_parser(cmd.name, help=cmd.help)
        p.add_argument("--config", type=Path, help="JSON file with settings for this command")
        p.add_argument("--out", type=Path, default=Path("abp-lab-out"), help="output directory")
        for key in cmd.flags:
            opt = "--" + key.replace("_", "-")
            if key == "cross_check":
                p.add_argument(opt, action="store_true", default=None, help=_FLAG_HELP[key])
            else:
                p.add_argument(opt, dest=key, default=None, help=_FLAG_HELP[key])
    return parser


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _flag_values(cmd: Command, ns: argparse.Namespace) -> dict:
    out = {}
    for key in cmd.flags:
        raw = getattr(ns, key, None)
        if raw is None:
            continue
        _, conv = cmd.settings[key]
        if isinstance(raw, str) and conv not in (_shape, _time, _point, _float_list):
            raw = _coerce(raw)
        out[key] = raw
    return out


def _coerce(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _format(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def print_summary(cmd: str, outcome: Outcome, stream=None) -> None:
    stream = sys.stdout if stream is None else stream
    rows = [(k, _format(v)) for k, v in outcome.summary]
    rows += [(f"assert:{k}", "pass" if ok else "FAIL") for k, ok in outcome.checks.items()]
    width = max(len(k) for k, _ in rows) if rows else 0
    print(f"abp-lab {cmd}", file=stream)
    for k, v in rows:
        print(f"  {k:<{width}}  {v}", file=stream)
    print(f"  {'status':<{width}}  {'PASS' if outcome.passed else 'FAIL'}", file=stream)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    cmd = COMMANDS[ns.command]
    try:
        cfg = resolve(cmd, _load_config(ns.config), _flag_values(cmd, ns))
        outcome = cmd.run(cfg)
    except elliptic.ConvergenceError as exc:
        print(f"abp-lab {cmd.name}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ConfigError, ValueError) as exc:
        print(f"abp-lab {cmd.name}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = {
        "command": cmd.name,
        "config": cfg,
        "version": __version__,
        "outputs": sorted(outcome.files),
        "checks": outcome.checks,
        "passed": outcome.passed,
    }
    ns.out.mkdir(parents=True, exist_ok=True)
    verify.write_json(manifest, ns.out / "manifest.json")
    for name, writer in outcome.files.items():
        writer(ns.out / name)
    print_summary(cmd.name, outcome)
    if not outcome.passed:
        failed = [k for k, ok in outcome.checks.items() if not ok]
        print(f"abp-lab {cmd.name}: failed checks: {', '.join(failed)}", file=sys.stderr)
        for row in outcome.failing_rows:
            print(f"  failing row: {row}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
