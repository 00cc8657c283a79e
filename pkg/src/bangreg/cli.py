"""Command-line interface: ``bangreg {solve,certify,perturb,metric,report}``.

Every subcommand reads one JSON configuration file. Exit codes: 0 success,
1 usage or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import csvio
from .control import l1_distance
from .bangbang import SweepOptions, reference_solution
from .certify import FAMILIES, CertifyOptions, certify
from .dynamics import DEFAULT_N, solution_for_control, verify_inclusion
from .errors import (
    BangRegError,
    CertificationError,
    ConfigError,
    ExpressionError,
    IntegrationError,
    NonIsolatedZeroError,
    PolytopeError,
    ProblemError,
    SweepError,
    TieError,
)
from .experiment import ExperimentRow, PerturbationSpec, run_experiment
from .metrics import dstar, dY, zero_set
from .problem import problem_from_dict
from .svg import loglog_svg

log = logging.getLogger("bangreg")

OK, CONFIG_ERROR, NUMERICAL_ERROR = 0, 1, 2
NUMERICAL = (IntegrationError, SweepError, TieError, CertificationError, NonIsolatedZeroError)
CONFIG = (ConfigError, ProblemError, ExpressionError, PolytopeError)

CONFIG_HELP = """\
configuration file (JSON) keys, with defaults:
  problem     {"builtin": NAME, "params": {"nu": 2, "T": 1}}  or inline
              {"n", "m", "T", "x0", "U": {"box": {"lo": [..], "hi": [..]}} | {"simplex": [[..], ..]},
               "a", "B", "w", "s", "l": "0"}               (exactly one source)
  grid        4096 grid intervals
  solver      {"max_iters": 50, "tol": 1e-10, "root_tol": 1e-12,
               "tie_policy": "freeze", "reference": "sweep" | "analytic"}
  certify     {"nu": null (estimate), "tau": null, "alpha0": null (0.1 T diam U),
               "n_samples": 500, "n_lemma3": 20, "seed": 0,
               "families": ["needle", "multi", "near_zero"], "growth": true}
  experiment  {"family": "constant-rho", "ladder": [..] | {"lo": 1e-4, "hi": 1e-1,
               "rungs": 16}, "seeds": [..] (mandatory), "a": null, "b": null}
  metric      {"T": ..., "Z": [...]}  (otherwise taken from the problem)
  output      "out"  output directory (overridden by --out)
"""


# ------------------------------------------------------------------ config


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def _section(cfg, key) -> dict:
    sec = cfg.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"field '{key}' must be an object")
    return sec


def _problem(cfg):
    spec = cfg.get("problem")
    if not isinstance(spec, dict):
        raise ConfigError("field 'problem' is required and must be an object")
    if "builtin" in spec and any(k in spec for k in ("a", "B", "w", "s")):
        raise ConfigError("field 'problem': give either a builtin name or inline expressions, not both")
    try:
        return problem_from_dict(spec)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"field 'problem': {exc}") from None


def _grid(cfg) -> int:
    N = cfg.get("grid", DEFAULT_N)
    if not isinstance(N, int) or N < 8:
        raise ConfigError("field 'grid' must be an integer >= 8")
    return N


def _sweep_options(cfg) -> SweepOptions:
    sec = {k: v for k, v in _section(cfg, "solver").items() if k != "reference"}
    try:
        return SweepOptions(N=_grid(cfg), **sec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'solver': {exc}") from None


def _certify_options(cfg) -> CertifyOptions:
    sec = dict(_section(cfg, "certify"))
    if "families" in sec:
        sec["families"] = tuple(sec["families"])
        bad = set(sec["families"]) - set(FAMILIES)
        if bad:
            raise ConfigError(f"field 'certify.families': unknown {sorted(bad)}")
    try:
        return CertifyOptions(N=_grid(cfg), **sec)
    except TypeError as exc:
        raise ConfigError(f"field 'certify': {exc}") from None


def _experiment_spec(cfg) -> PerturbationSpec:
    sec = _section(cfg, "experiment")
    if not sec:
        raise ConfigError("field 'experiment' is required for perturb")
    if "seeds" not in sec:
        raise ConfigError("field 'experiment.seeds' is mandatory")
    ladder = sec.get("ladder", {"lo": 1e-4, "hi": 1e-1, "rungs": 16})
    if isinstance(ladder, dict):
        try:
            ladder = np.geomspace(float(ladder["lo"]), float(ladder["hi"]), int(ladder["rungs"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"field 'experiment.ladder': {exc}") from None
    return PerturbationSpec(sec.get("family", "constant-rho"), tuple(ladder), tuple(sec["seeds"]))


def _out_dir(cfg) -> Path:
    out = Path(cfg.get("output", "out"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from None
    return out


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    if isinstance(o, float) and not np.isfinite(o):
        return None
    raise TypeError(f"not serializable: {type(o).__name__}")


def _reference(prob, cfg):
    how = _section(cfg, "solver").get("reference", "sweep")
    if how not in ("sweep", "analytic"):
        raise ConfigError("field 'solver.reference' must be 'sweep' or 'analytic'")
    return reference_solution(prob, N=_grid(cfg), opts=_sweep_options(cfg), analytic=how == "analytic")


# ------------------------------------------------------------------ commands


def cmd_solve(cfg) -> int:
    """Solve the unperturbed optimality system; write x, p, u and sigma CSV files."""
    prob = _problem(cfg)
    out = _out_dir(cfg)
    ref = _reference(prob, cfg)
    rep = verify_inclusion(prob, ref.x, ref.p, ref.u, tol=1e-7)
    csvio.write_trajectory(out / "x.csv", ref.x, "x")
    csvio.write_trajectory(out / "p.csv", ref.p, "p")
    csvio.write_control(out / "u.csv", ref.u)
    csvio.write_samples(out / "sigma.csv", ref.profile.t, ref.profile.sigma, "sigma")
    summary = {
        "problem": prob.to_dict(), "switch_times": ref.u.switch_times.tolist(),
        "inclusion": rep.as_dict(), "inclusion_passed": rep.passed, "config": cfg,
    }
    _write_json(out / "solve.json", summary)
    print(f"solved {prob.name}: {len(ref.u.values)} piece(s), switch times {ref.u.switch_times.tolist()}")
    print(f"inclusion defect {rep.max_defect:.3e} ({'pass' if rep.passed else 'fail'})")
    return OK if rep.passed else NUMERICAL_ERROR


def cmd_certify(cfg) -> int:
    """Estimate the certification constants and write certification.json."""
    prob = _problem(cfg)
    opts = _certify_options(cfg)
    out = _out_dir(cfg)
    report = certify(prob, _reference(prob, cfg), opts)
    data = report.as_dict()
    data["config"] = cfg
    _write_json(out / "certification.json", data)
    c = report.constants
    print(f"zeros: {report.zeros.times}")
    print(f"nu_hat = {report.nu_estimate}, nu = {c.nu}, mu_hat = {c.mu}, tau = {c.tau}")
    print(f"gamma0_hat = {c.gamma0}, gamma1_hat = {c.gamma1} ({'empirical over family F'})")
    print(f"kappa0 = {c.kappa0}, delta = {c.delta}, kappa1 = {c.kappa1}, rho1 = {c.rho1}")
    for line in report.summary_lines():
        print(line)
    for issue in report.issues:
        print(f"issue: {issue}")
    return OK


def _plot(rows, summary, title) -> str:
    use = [r for r in rows if r.usable]
    lines = []
    if summary.get("theta_hat") is not None:
        lines.append((f"fit: slope {summary['theta_hat']:.3f}", summary["theta_hat"], summary["kappa_hat"]))
    if use and summary.get("kappa_star"):
        lines.append((f"kappa* d_Z^{summary['exponent']:.4g}", summary["exponent"], summary["kappa_star"]))
    series = [("d_Y (valid rows)", [r.d_Z for r in use], [r.d_Y for r in use])]
    return loglog_svg(series, lines, title=title, xlabel="d_Z(z, 0)", ylabel="d_Y(y, y_hat)")


def cmd_perturb(cfg) -> int:
    """Run a perturbation ladder; write rows.csv, fit.json and loglog.svg."""
    prob = _problem(cfg)
    spec = _experiment_spec(cfg)
    out = _out_dir(cfg)
    sec = _section(cfg, "experiment")
    cert_cfg = dict(_section(cfg, "certify"))
    cert_cfg.setdefault("growth", False)
    copts = _certify_options({**cfg, "certify": cert_cfg})
    ref = _reference(prob, cfg)
    report = certify(prob, ref, copts)
    res = run_experiment(prob, spec, ref, report.constants, report.zeros, a=sec.get("a"), b=sec.get("b"),
                         N=_grid(cfg), opts=_sweep_options(cfg), on_failure="flag")
    csvio.write_table(out / "rows.csv", ExperimentRow.columns(), [r.values() for r in res.rows])
    summary = dict(res.summary)
    summary["constants"] = asdict(report.constants)
    summary["config"] = cfg
    summary["title"] = f"{prob.name}: {spec.family}"
    _write_json(out / "fit.json", summary)
    (out / "loglog.svg").write_text(_plot(res.rows, res.summary, summary["title"]))
    print(f"{summary['n_rows']} rows, {summary['n_flagged']} flagged, {summary['n_usable']} used in the fit")
    if res.fit is not None:
        print(f"theta_hat = {res.fit.theta:.4f}, kappa_hat = {res.fit.kappa:.4g}, "
              f"kappa* = {summary['kappa_star']:.4g} (exponent {summary['exponent']:.4g})")
    else:
        print("no Hölder fit (too few usable rows or too little spread)")
    return OK


def _read_rows(path) -> list:
    header, records = csvio.read_records(path)
    if header != ExperimentRow.columns():
        raise ConfigError(f"{path}: unexpected columns {header}")
    rows = []
    for lineno, d in enumerate(records, start=2):
        try:
            rows.append(ExperimentRow(
                float(d["magnitude"]), float(d["d_Z"]), float(d["u_l1"]), float(d["dstar"]), float(d["d_Y"]),
                int(d["iterations"]), float(d["inclusion_defect"]), d["family"], int(d["seed"]),
                d["hyp_ii"] == "1", d["hyp_iii"] == "1", d["valid"] == "1",
            ))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return rows


def cmd_metric(cfg, u1_path, u2_path) -> int:
    """Print d*, the L1 distance and, with a problem in the config, the d_Y components."""
    sec = _section(cfg, "metric")
    prob = _problem(cfg) if "problem" in cfg else None
    T = sec.get("T", prob.T if prob else None)
    if T is None:
        raise ConfigError("field 'metric.T' is required when no problem is given")
    u1 = csvio.read_control(_control_path(u1_path), float(T))
    u2 = csvio.read_control(_control_path(u2_path), float(T))
    if "Z" in sec:
        Z = [float(s) for s in sec["Z"]]
    elif prob is not None:
        Z = zero_set(_reference(prob, cfg).profile, prob.U.edge_dirs).times
    else:
        raise ConfigError("field 'metric.Z' is required when no problem is given")
    result = {"dstar": dstar(u1, u2, Z, T), "l1": l1_distance(u1, u2), "Z": list(Z), "T": float(T)}
    if prob is not None:
        N = _grid(cfg)
        y1, y2 = solution_for_control(prob, u1, N=N), solution_for_control(prob, u2, N=N)
        result["dY"] = dY(y1, y2, Z, T).as_dict()
    print(json.dumps(result, indent=2))
    return OK


def _control_path(p) -> Path:
    p = Path(p)
    return p / "u.csv" if p.is_dir() else p


def cmd_report(cfg) -> int:
    """Summarize the files found in the output directory; re-render loglog.svg."""
    out = Path(cfg.get("output", "out"))
    if not out.is_dir():
        raise ConfigError(f"output directory {out} does not exist")
    found = False
    if (out / "solve.json").is_file():
        found = True
        s = json.loads((out / "solve.json").read_text())
        print(f"solve: switch times {s['switch_times']}, inclusion passed {s['inclusion_passed']}")
    if (out / "certification.json").is_file():
        found = True
        c = json.loads((out / "certification.json").read_text())
        print("certification: " + "; ".join(c["summary"]))
        print("constants: " + ", ".join(f"{k}={v}" for k, v in c["constants"].items() if v is not None))
    if (out / "rows.csv").is_file() and (out / "fit.json").is_file():
        found = True
        fit = json.loads((out / "fit.json").read_text())
        rows = _read_rows(out / "rows.csv")
        (out / "loglog.svg").write_text(_plot(rows, fit, fit.get("title", "perturbation ladder")))
        print(f"perturb: {len(rows)} rows, theta_hat = {fit.get('theta_hat')}, kappa* = {fit.get('kappa_star')}")
    if not found:
        raise ConfigError(f"no results found in {out}")
    return OK


# ------------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bangreg", description=__doc__.splitlines()[0],
        epilog=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", help="output directory (overrides 'output')")
        p.add_argument("--grid", type=int, help="grid intervals (overrides 'grid', default 4096)")
        p.add_argument("--seed", type=int, help="seed for sampling and experiments (overrides config seeds)")
        return p

    common(sub.add_parser("solve", help="solve the unperturbed optimality system"))
    common(sub.add_parser("certify", help="estimate and check the certification constants"))
    common(sub.add_parser("perturb", help="run a perturbation ladder and fit the Hölder exponent"))
    m = common(sub.add_parser("metric", help="distances between two controls given as CSV files"))
    m.add_argument("u1", help="control CSV (or a solve output directory)")
    m.add_argument("u2", help="control CSV (or a solve output directory)")
    common(sub.add_parser("report", help="summarize an output directory"))
    return parser


def _apply_overrides(cfg, args) -> dict:
    cfg = dict(cfg)
    if args.out:
        cfg["output"] = args.out
    if args.grid is not None:
        cfg["grid"] = args.grid
    if args.seed is not None:
        cfg["certify"] = {**_section(cfg, "certify"), "seed": args.seed}
        if "experiment" in cfg:
            cfg["experiment"] = {**_section(cfg, "experiment"), "seeds": [args.seed]}
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return OK if exc.code == 0 else CONFIG_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "certify":
            return cmd_certify(cfg)
        if args.command == "perturb":
            return cmd_perturb(cfg)
        if args.command == "metric":
            return cmd_metric(cfg, args.u1, args.u2)
        return cmd_report(cfg)
    except CONFIG as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except BangRegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
