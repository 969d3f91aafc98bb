"""Batch front end: verify inequality suites, run flows, refinement studies.

Exit codes: 0 success; 1 check failure (report still written); 2 bad
configuration or unparsable input; 3 flow did not converge; 4 the flow step
size collapsed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .bodies import BodySpec, make_body, make_random, spec_from_json
from .calculus import assemble
from .flow import (
    NoConvergenceError,
    ProblemSpec,
    StepCollapseError,
    certify,
    run,
)
from .grid import Grid, ScalarField, build_grid
from .inequalities import SUITE_CHECKS, run_suite
from .refine import STUDY_CHECKS, observed_orders, run_study

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_STEP_COLLAPSE = 4


class ConfigError(ValueError):
    pass


def parse_resolution(token: str):
    """"64x128" -> (64, 128) on S^2; "256" -> 256 on S^1."""
    token = token.strip().lower()
    if "x" in token:
        a, _, b = token.partition("x")
        return (int(a), int(b))
    return int(token)


def resolution_dim(res) -> int:
    return 2 if isinstance(res, tuple) else 1


def load_body_object(source: str) -> dict:
    """--body accepts a JSON file path or an inline JSON object."""
    text = source
    if not source.lstrip().startswith("{"):
        if not os.path.exists(source):
            raise ConfigError(f"body file not found: {source}")
        with open(source) as fh:
            text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"malformed body JSON: {err}") from err
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError("body JSON must be an object with a 'kind' field")
    return obj


def realize_body(obj: dict, grid: Grid) -> ScalarField:
    """Sample a body description on the grid.

    Supports the parametric kinds (ball, shifted_ball, ellipsoid, harmonic),
    seeded random bodies {"kind": "random", "seed": S, "eps": E, "l_max": L,
    "origin_symmetric": bool}, and stored node samples {"kind": "samples",
    "grid": {"n": ..., "shape": [...]}, "h": [...]}.
    """
    kind = obj["kind"]
    try:
        if kind == "random":
            return make_random(
                int(obj["seed"]),
                grid.n,
                grid,
                eps=float(obj.get("eps", 0.2)),
                l_max=int(obj.get("l_max", 4)),
                origin_symmetric=bool(obj.get("origin_symmetric", False)),
            )
        if kind == "samples":
            desc = obj.get("grid", {})
            shape = tuple(desc.get("shape", ()))
            if desc.get("n") != grid.n or shape != grid.shape:
                raise ConfigError(
                    f"stored samples live on grid n={desc.get('n')} "
                    f"{'x'.join(map(str, shape))}, not on the requested grid"
                )
            return ScalarField(grid, np.asarray(obj["h"], dtype=float))
        spec = spec_from_json(obj, n=grid.n)
        return make_body(spec, grid)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"invalid body: {err}") from err


def body_to_json(field: ScalarField) -> dict:
    grid = field.grid
    return {
        "kind": "samples",
        "grid": {"n": grid.n, "shape": list(grid.shape)},
        "h": field.values.tolist(),
    }


def _write_json(path: str | None, payload: dict):
    text = json.dumps(payload, sort_keys=True, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_text(path: str | None, text: str):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config_block(args, grid: Grid) -> dict:
    return {
        "grid": grid.describe(),
        "n": grid.n,
        "seed": args.seed,
        "threads": args.threads,
        "tol_override": os.environ.get("ISOFLOW_TOL_OVERRIDE", ""),
        "version": __version__,
    }


def cmd_verify(args) -> int:
    res = parse_resolution(args.grid)
    grid = build_grid(resolution_dim(res), res)
    body_obj = load_body_object(args.body)
    body = realize_body(body_obj, grid)
    geom = assemble(body)
    checks = args.suite
    if checks != "all":
        checks = tuple(c.strip() for c in checks.split(","))
        unknown = set(checks) - set(SUITE_CHECKS)
        if unknown:
            raise ConfigError(f"unknown suite checks: {sorted(unknown)}")
    reports = run_suite(geom, checks, seed=args.seed)
    worst: dict[str, float] = {}
    for rep in reports:
        worst[rep.name] = min(worst.get(rep.name, np.inf), rep.slack_rel)
    all_ok = all(rep.holds() for rep in reports)
    payload = {
        "command": "verify",
        "config": _config_block(args, grid),
        "body": {"spec": body_obj, "hash": geom.body_hash},
        "reports": [rep.to_dict() for rep in reports],
        "summary": {"worst_slack_rel": worst, "all_ok": all_ok},
    }
    _write_json(args.out, payload)
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def cmd_flow(args) -> int:
    res = parse_resolution(args.grid)
    grid = build_grid(resolution_dim(res), res)
    body_obj = load_body_object(args.body)
    body = realize_body(body_obj, grid)
    try:
        prob = ProblemSpec.parse(args.problem)
    except (ValueError, KeyError) as err:
        raise ConfigError(f"bad problem spec: {err}") from err

    def finish(payload, trace, code):
        if args.trace and trace is not None:
            _write_text(args.trace, trace.to_csv())
        _write_json(args.out, payload)
        return code

    base = {
        "command": "flow",
        "config": _config_block(args, grid),
        "problem": prob.describe(),
        "body": {"spec": body_obj},
        "warnings": prob.hypothesis_warnings(grid.n),
    }
    try:
        result = run(body, prob, tol=args.tol, max_steps=args.max_steps)
    except NoConvergenceError as err:
        base.update(
            {
                "converged": False,
                "error": "no_convergence",
                "residual_inf": err.residual,
                "steps": err.state.steps,
            }
        )
        return finish(base, err.trace, EXIT_NO_CONVERGENCE)
    except StepCollapseError as err:
        base.update({"converged": False, "error": "step_collapse", "t": err.state.t})
        return finish(base, err.trace, EXIT_STEP_COLLAPSE)
    certificates = certify(result.state.geometry, prob)
    certified = all(rep.holds() for rep in certificates)
    base.update(
        {
            "converged": True,
            "steps": result.state.steps,
            "residual_inf": result.residual_inf,
            "sphere_dist": result.sphere_dist,
            "ellipsoid_dist": result.ellipsoid_dist,
            "final_body": body_to_json(result.state.h),
            "certificates": [rep.to_dict() for rep in certificates],
            "certified": certified,
        }
    )
    return finish(base, result.trace, EXIT_OK if certified else EXIT_CHECK_FAILED)


def cmd_refine_study(args) -> int:
    tokens = [t for t in args.grid.split(",") if t.strip()]
    if len(tokens) < 2:
        raise ConfigError("refine-study needs a comma-separated resolution ladder")
    resolutions = [parse_resolution(t) for t in tokens]
    dims = {resolution_dim(r) for r in resolutions}
    if len(dims) != 1:
        raise ConfigError("ladder mixes S^1 and S^2 resolutions")
    body_obj = load_body_object(args.body)
    if body_obj["kind"] == "samples":
        raise ConfigError("stored samples cannot be re-sampled across a ladder")
    if args.check not in STUDY_CHECKS:
        raise ConfigError(
            f"unknown check {args.check!r}; have {sorted(STUDY_CHECKS)}"
        )
    rows = run_study(
        args.check,
        lambda grid: realize_body(body_obj, grid),
        resolutions,
        seed=args.seed,
    )
    lines = ["resolution,residual,observed_order,exact"]
    for row in rows:
        order = "" if row.order is None else f"{row.order:.3f}"
        lines.append(f"{row.resolution},{row.residual!r},{order},{int(row.exact)}")
    _write_text(args.out, "\n".join(lines) + "\n")
    if rows[-1].exact or rows[-2].exact:
        return EXIT_OK  # at the roundoff floor; no meaningful order
    orders = observed_orders(rows)
    return EXIT_OK if orders and orders[-1] >= 3.0 else EXIT_CHECK_FAILED


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="isoflow",
        description="Support-function calculus: verification suites and curvature flows",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--body", required=True, help="body JSON path or inline JSON")
        p.add_argument("--grid", required=True, help="resolution: N (S^1) or WxH (S^2)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", default=None, help="output path (default stdout)")

    pv = sub.add_parser("verify", help="run inequality/identity checks")
    common(pv)
    pv.add_argument("--suite", default="all", help="'all' or comma-separated checks")
    pv.set_defaults(fn=cmd_verify)

    pf = sub.add_parser("flow", help="solve an isotropic curvature problem")
    common(pf)
    pf.add_argument("--problem", required=True, help="e.g. gauss_power:alpha=1")
    pf.add_argument("--tol", type=float, default=1e-8)
    pf.add_argument("--max-steps", type=int, default=4000)
    pf.add_argument("--trace", default=None, help="write the trace CSV here")
    pf.set_defaults(fn=cmd_flow)

    pr = sub.add_parser("refine-study", help="residual ladder across resolutions")
    common(pr)
    pr.add_argument("--check", required=True, help=f"one of {sorted(STUDY_CHECKS)}")
    pr.set_defaults(fn=cmd_refine_study)
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as err:
        return EXIT_BAD_CONFIG if err.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
