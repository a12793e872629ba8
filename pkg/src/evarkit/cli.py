"""Command-line front end.

Every command prints one JSON report with schema tag ``evarkit/1``, the
hash of the effective configuration and the hash of the grid it ran on.
Exit codes: 0 ok, 1 input error, 2 verification failure, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import adversary, finite, reduction, subpsi, symmetry
from .constraints import evaluate, evaluate_affine_candidate
from .lp import NumericalStallError
from .measure import (DEFAULT_TOL, DiscreteMeasure, EVariable, Hypothesis, SampleGrid,
                      expectation, grid_from_json, hypothesis_from_json)

SCHEMA = "evarkit/1"
COMMANDS = ("verify", "maximal", "subpsi", "symmetry", "reduce", "relaxed-demo", "etest")
EXIT_OK, EXIT_INPUT, EXIT_VERIFY, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(ValueError):
    pass


class VerificationFailure(Exception):
    def __init__(self, report: dict):
        super().__init__("verification failed")
        self.report = report


# -- deterministic JSON -------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x + 0.0, ".17g")


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, floats at 17 significant digits."""
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(f"{json.dumps(k)}:{dumps(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def digest(obj: Any) -> str:
    return hashlib.sha256(dumps(obj).encode()).hexdigest()[:16]


def load_schema() -> dict:
    return json.loads((Path(__file__).parent / "schema" / "report.json").read_text())


# -- config -------------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    grid: Any = None
    constraints: list | None = None
    candidate: dict | None = None
    tol: float = DEFAULT_TOL
    output: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if not (isinstance(self.tol, (int, float)) and self.tol >= 0):
            raise InputError("tol must be a nonnegative number")

    def hashable(self) -> dict:
        d = asdict(self)
        d.pop("output")
        return d


def _read_json_arg(text: str, what: str) -> Any:
    """Inline JSON, or a path to a JSON file."""
    s = text.strip()
    p = Path(s)
    if len(s) < 4096 and p.is_file():
        src, name = p.read_text(encoding="utf-8"), str(p)
    else:
        src, name = s, what
    try:
        return json.loads(src)
    except json.JSONDecodeError as e:
        raise InputError(f"{name}: line {e.lineno} column {e.colno}: {e.msg}") from None


def config_from_file(path: str, command: str) -> RunConfig:
    doc = _read_json_arg(path, "config")
    if not isinstance(doc, dict):
        raise InputError("config must be a JSON object")
    schema = doc.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise InputError(f"unsupported config schema {schema!r}; expected {SCHEMA!r}")
    known = {"schema", "command", "grid", "constraints", "candidate", "tol", "options", "output"}
    extra = sorted(set(doc) - known)
    if extra:
        raise InputError(f"unknown config keys: {', '.join(extra)}")
    cmd = doc.get("command", command)
    if cmd != command:
        raise InputError(f"config is for {cmd!r}, not {command!r}")
    return RunConfig(command=command, grid=doc.get("grid"), constraints=doc.get("constraints"),
                     candidate=doc.get("candidate"), tol=doc.get("tol", DEFAULT_TOL),
                     output=doc.get("output"), options=dict(doc.get("options", {})))


def _grid(cfg: RunConfig) -> SampleGrid:
    if cfg.grid is None:
        raise InputError("config needs a grid")
    try:
        return grid_from_json(cfg.grid)
    except (ValueError, TypeError) as e:
        raise InputError(f"grid: {e}") from None


def _hypothesis(cfg: RunConfig, grid: SampleGrid) -> Hypothesis:
    if not cfg.constraints:
        raise InputError("config needs a nonempty constraints list")
    try:
        return hypothesis_from_json(grid, cfg.constraints)
    except (ValueError, TypeError, KeyError) as e:
        raise InputError(f"constraints: {e}") from None


def _candidate(cfg: RunConfig, H: Hypothesis) -> EVariable:
    """Candidate from ``{"pi"}``, ``{"values"}`` or ``{"constant"}``."""
    c = cfg.candidate
    if not isinstance(c, dict) or len(c) == 0:
        raise InputError("config needs a candidate: {\"pi\"}, {\"values\"} or {\"constant\"}")
    try:
        if "pi" in c:
            return finite.candidate_evar(c["pi"], H, cfg.tol)
        if "values" in c:
            return EVariable(H.grid, c["values"])
        if "constant" in c:
            return EVariable.constant(H.grid, float(c["constant"]))
    except (ValueError, TypeError) as e:
        raise InputError(f"candidate: {e}") from None
    raise InputError(f"candidate needs 'pi', 'values' or 'constant', got {sorted(c)}")


def _envelope(cfg: RunConfig, grid_hash: str | None, result: dict, warnings=()) -> dict:
    return {"schema": SCHEMA, "command": cfg.command, "config_hash": digest(cfg.hashable()),
            "grid_hash": grid_hash, "result": result, "warnings": list(warnings)}


# -- commands -----------------------------------------------------------------

def run_verify(cfg: RunConfig) -> dict:
    grid = _grid(cfg)
    H = _hypothesis(cfg, grid)
    h = _candidate(cfg, H)
    rep = adversary.worst_case_expectation(h, H, cfg.tol)
    out = _envelope(cfg, rep.grid_hash, rep.to_dict())
    if rep.verdict == adversary.VIOLATED:
        raise VerificationFailure(out)
    return out


def _mean_var_defaults(cfg: RunConfig) -> RunConfig:
    o = cfg.options
    sigma = float(o.get("sigma", 1.0))
    if cfg.grid is None:
        cfg.grid = {"start": -4 * sigma, "stop": 4 * sigma, "step": sigma / 2}
    if cfg.constraints is None:
        cfg.constraints = [{"kind": "mean_var", "params": {"sigma": sigma}}]
    return cfg


def run_maximal(cfg: RunConfig) -> dict:
    o = cfg.options
    mv = cfg.constraints is None
    if mv:
        cfg = _mean_var_defaults(cfg)
    grid = _grid(cfg)
    H = _hypothesis(cfg, grid)
    result: dict = {}
    if mv and cfg.candidate is None:
        try:
            params = finite.MeanVarParams(float(o.get("sigma", 1.0)), float(o.get("alpha", 0.0)),
                                          float(o.get("beta", 1.0)))
        except ValueError as e:
            raise InputError(str(e)) from None
        result["mean_var"] = {"sigma": params.sigma, "alpha": params.alpha, "beta": params.beta}
        result["ellipse_maximal"] = finite.mean_var_maximal(params)
        pi = params.pi() if params.beta >= 0 else None
        if pi is not None:
            h = finite.candidate_evar(pi, H, cfg.tol)
        else:
            h = EVariable(grid, np.maximum(params.candidate(grid.points), 0.0))
    else:
        h = _candidate(cfg, H)
        pi = np.asarray(cfg.candidate["pi"], dtype=float) if "pi" in cfg.candidate else None
    result["pi"] = None if pi is None else pi.tolist()
    result["in_pi_phi"] = None if pi is None else finite.in_pi_phi(pi, H, cfg.tol)
    rep = adversary.worst_case_expectation(h, H, cfg.tol)
    result["worst_value"] = rep.worst_value
    result["evar_verdict"] = rep.verdict
    result["constraint_qualification"] = finite.check_constraint_qualification(H, cfg.tol)
    gh = grid.digest()
    if rep.verdict == adversary.VIOLATED:
        result["adversary_verdict"] = None
        raise VerificationFailure(_envelope(cfg, gh, result))
    mx = adversary.maximality_check(h, H, cfg.tol)
    result["adversary_verdict"] = mx.verdict
    result["dominator_pi"] = None if mx.pi is None else mx.pi.tolist()
    if "ellipse_maximal" in result:
        result["agree"] = result["ellipse_maximal"] == (mx.verdict == adversary.MAXIMAL)
    return _envelope(cfg, gh, result)


def _psi(o: dict) -> subpsi.PsiFunction:
    kind = o.get("psi", "gaussian")
    try:
        if kind == "gaussian":
            return subpsi.gaussian(float(o.get("sigma", 1.0)))
        if kind == "gamma":
            return subpsi.gamma(float(o.get("shape", 1.0)), float(o.get("scale", 1.0)))
        if kind == "exponential":
            return subpsi.exponential(float(o.get("scale", 1.0)))
    except (ValueError, TypeError) as e:
        raise InputError(f"psi: {e}") from None
    raise InputError(f"unknown psi {kind!r}")


def run_subpsi(cfg: RunConfig) -> dict:
    o = cfg.options
    psi = _psi(o)
    mix = o.get("mix", {"nodes": [1.0], "weights": [1.0]})
    try:
        mixture = subpsi.LambdaMixture(mix["nodes"], mix["weights"])
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"mix: {e}") from None
    if not mixture.is_probability:
        raise InputError("mix weights must sum to one")
    if np.any(mixture.nodes < 0) or np.any(mixture.nodes > psi.lam_max) or (
            not psi.closed and np.any(mixture.nodes >= psi.lam_max)):
        raise InputError("mix nodes leave the domain of psi")
    if cfg.grid is None:
        cfg.grid = {"start": -3.0, "stop": 3.0, "step": 0.5}
    grid = _grid(cfg)
    if not grid.is_scalar:
        raise InputError("subpsi needs a scalar grid")
    h = subpsi.mixture_evar(psi, mixture, grid)
    lam_grid = subpsi.lambda_grid(psi, x_max=max(1.0, float(np.abs(grid.points).max())))
    table, ok = [], True
    for x0 in o.get("chernoff_points", [0.5, 1.0, 2.0]):
        x0 = float(x0)
        star = subpsi.psi_star(psi, x0)
        row = {"x": x0, "psi_star": star, "chernoff_bound": subpsi.chernoff_bound(psi, x0)}
        if star < subpsi.VALUE_CAP:
            p = 0.5 * math.exp(-star)
            nu = subpsi.two_point_subpsi(psi, x0, p, lam_grid)
            chk = subpsi.verify_subpsi(nu, psi, lam_grid)
            hv = subpsi.mixture_evar(psi, mixture, nu.grid)
            e = expectation(nu, hv)
            row.update({"two_point_atoms": nu.grid.points.tolist(), "two_point_weights": nu.weights.tolist(),
                        "subpsi_ok": chk.ok, "max_violation": chk.max_violation,
                        "tail_probability": subpsi.tail_probability(nu, x0),
                        "mixture_expectation": e})
            ok = ok and chk.ok and e <= 1.0 + cfg.tol
        table.append(row)
    result = {"psi": psi.to_dict(), "mixture": mixture.to_dict(), "x": grid.points.tolist(),
              "h": h.values.tolist(), "capped": h.capped, "chernoff_table": table, "verified": ok,
              "lambda_grid": {"n": int(lam_grid.size), "min": float(lam_grid.min()),
                              "max": float(lam_grid.max())}}
    out = _envelope(cfg, grid.digest(), result)
    if not ok:
        raise VerificationFailure(out)
    return out


def run_symmetry(cfg: RunConfig) -> dict:
    o = cfg.options
    name = o.get("group", "s2")
    n = _group_dim(name)
    coords = cfg.grid if cfg.grid is not None else [0.0, 1.0]
    try:
        vals = np.asarray(coords, dtype=float).ravel()
        grid = symmetry.product_grid(vals, n)
        G = symmetry.group_from_name(name, grid)
    except (ValueError, TypeError) as e:
        raise InputError(f"symmetry: {e}") from None
    f_spec = o.get("f", 0)
    if isinstance(f_spec, int):
        if not 0 <= f_spec < n:
            raise InputError(f"f: coordinate {f_spec} out of range for dimension {n}")
        f = grid.points[:, f_spec]
    else:
        f = np.asarray(f_spec, dtype=float).ravel()
        if f.size != len(grid):
            raise InputError(f"f has {f.size} values, grid has {len(grid)} points")
    f_pi = symmetry.orbit_average(f, G)
    h = symmetry.exact_evar(f, G)
    rng = np.random.default_rng(int(o.get("seed", 0)))
    worst = 0.0
    for _ in range(int(o.get("trials", 20))):
        mu = DiscreteMeasure(grid, rng.dirichlet(np.ones(len(grid))))
        worst = max(worst, abs(expectation(symmetry.symmetrize_measure(mu, G), h) - 1.0))
    H = symmetry.invariance_constraints(G)
    rep = adversary.worst_case_expectation(h, H, cfg.tol)
    result = {"group": name, "order": G.order, "points": grid.points.tolist(), "f": f.tolist(),
              "f_pi": f_pi.tolist(), "h": h.values.tolist(), "c": h.params["c"],
              "max_exactness_error": worst, "worst_value": rep.worst_value, "evar_verdict": rep.verdict}
    out = _envelope(cfg, grid.digest(), result)
    if rep.verdict == adversary.VIOLATED or worst > 1e-10:
        raise VerificationFailure(out)
    return out


def _group_dim(name: str) -> int:
    name = name.strip().lower()
    if name.startswith("s") and name[1:].isdigit():
        return int(name[1:])
    _, _, arg = name.partition(":")
    if arg.isdigit():
        return int(arg)
    raise InputError(f"unknown group {name!r}")


def _moment_rows(spec, grid: SampleGrid) -> np.ndarray:
    if not isinstance(spec, list) or not spec:
        raise InputError("moments must be a nonempty list")
    rows = []
    for k, m in enumerate(spec):
        if isinstance(m, dict):
            try:
                rows.append(evaluate(m["kind"], m.get("params", {}), grid.points))
            except (KeyError, ValueError) as e:
                raise InputError(f"moments[{k}]: {e}") from None
        else:
            r = np.asarray(m, dtype=float).ravel()
            if r.size != len(grid):
                raise InputError(f"moments[{k}] has {r.size} values, grid has {len(grid)} points")
            rows.append(r)
    return np.vstack(rows)


def run_reduce(cfg: RunConfig) -> dict:
    o = cfg.options
    grid = _grid(cfg)
    if "weights" not in o:
        raise InputError("measure needs weights")
    try:
        mu, spec = reduction.reduce_from_json(grid, o["weights"], _moment_rows(o.get("moments"), grid))
    except ValueError as e:
        raise InputError(f"measure: {e}") from None
    nu = reduction.barycenter_reduce(mu, spec)
    res = reduction.moment_residual(nu, spec)
    result = {"weights": nu.weights.tolist(), "support": nu.support.tolist(),
              "atoms": len(nu.support), "m": spec.m, "targets": spec.targets.tolist(),
              "residual": res}
    out = _envelope(cfg, grid.digest(), result)
    if len(nu.support) > spec.m + 1 or res > reduction.RESIDUAL_TOL * max(1.0, np.abs(spec.targets).max()):
        raise VerificationFailure(out)
    return out


def run_relaxed_demo(cfg: RunConfig) -> dict:
    n = int(cfg.options.get("n", 40))
    if n < 1:
        raise InputError("n must be positive")
    demo = reduction.nat_counterexample(n)
    return _envelope(cfg, None, demo.to_dict())


def read_csv(text: str) -> np.ndarray:
    """Numeric rows; the first row may be a header. Errors name the line."""
    rows, width = [], None
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            vals = [float(c) for c in row]
        except ValueError:
            if lineno == 1:
                continue
            raise InputError(f"data line {lineno}: non-numeric value in {row!r}") from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise InputError(f"data line {lineno}: expected {width} columns, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"data line {lineno}: non-finite value")
        rows.append(vals)
    if not rows:
        raise InputError("data has no numeric rows")
    return np.array(rows)


def run_etest(cfg: RunConfig, data: np.ndarray) -> dict:
    alpha = float(cfg.options.get("alpha", 0.05))
    if not 0 < alpha < 1:
        raise InputError("alpha must lie in (0, 1)")
    grid = _grid(cfg)
    H = _hypothesis(cfg, grid)
    h = _candidate(cfg, H)
    rep = adversary.worst_case_expectation(h, H, cfg.tol)
    warnings = []
    if data.shape[1] != grid.dim:
        raise InputError(f"data has {data.shape[1]} columns, grid points have dimension {grid.dim}")
    closed = "pi" in cfg.candidate and grid.is_scalar and all(g.kind is not None for g in H.constraints)
    if closed:
        e = evaluate_affine_candidate(H, cfg.candidate["pi"], data[:, 0])
        mode = "closed_form"
    else:
        mode = "nearest_grid"
        half = 0.5 * _grid_step(grid)
        e = np.empty(len(data))
        for k, row in enumerate(data):
            i, dist = grid.nearest(row if not grid.is_scalar else row[0])
            e[k] = h.values[i]
            if dist > half:
                warnings.append(f"observation {k} is {dist:.6g} from the nearest grid point")
    combined = float(np.prod(e))
    result = {"evar_verdict": rep.verdict, "worst_value": rep.worst_value, "evaluation": mode,
              "e_values": e.tolist(), "combined": combined,
              "combination": {"method": "product", "label": "extension"},
              "alpha": alpha, "threshold": 1.0 / alpha, "reject": combined >= 1.0 / alpha}
    out = _envelope(cfg, grid.digest(), result, warnings)
    if rep.verdict == adversary.VIOLATED:
        raise VerificationFailure(out)
    return out


def _grid_step(grid: SampleGrid) -> float:
    pts = grid.points
    if len(grid) < 2:
        return math.inf
    if grid.is_scalar:
        return float(np.diff(pts).max())
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    return float(d.min(axis=1).max())


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evarkit", description="Construct and verify e-variables.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="JSON config (inline or path)")
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--output", "-o", default=None, help="write the report here instead of stdout")

    p = sub.add_parser("verify", help="worst-case expectation of a candidate")
    common(p, True)

    p = sub.add_parser("maximal", help="maximality of an affine candidate (mean-variance by default)")
    common(p)
    p.add_argument("--sigma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)

    p = sub.add_parser("subpsi", help="mixture e-variable and Chernoff table for a sub-psi class")
    common(p)
    p.add_argument("--psi", choices=["gaussian", "gamma", "exponential"])
    p.add_argument("--sigma", type=float)
    p.add_argument("--shape", type=float)
    p.add_argument("--scale", type=float)
    p.add_argument("--mix", help='{"nodes": [...], "weights": [...]} (inline or path)')
    p.add_argument("--grid", help="grid (inline JSON or path)")
    p.add_argument("--chernoff-points", help="JSON list of x values")

    p = sub.add_parser("symmetry", help="exact e-variable 1 + f - f_pi for a finite group")
    common(p)
    p.add_argument("--group", help="s2, s3, cyclic:n or signs:d")
    p.add_argument("--grid", help="coordinate values; the grid is their product")
    p.add_argument("--f", help="coordinate index or JSON list of values")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)

    p = sub.add_parser("reduce", help="barycenter reduction to at most m + 1 atoms")
    common(p)
    p.add_argument("--measure", help='{"grid": ..., "weights": ...} (inline or path)')
    p.add_argument("--moments", help="JSON list of value lists or closed forms")

    p = sub.add_parser("relaxed-demo", help="truncated countable counterexample")
    common(p)
    p.add_argument("--n", type=int)

    p = sub.add_parser("etest", help="run an e-test on CSV data")
    common(p, True)
    p.add_argument("--data", required=True, help="CSV file")
    p.add_argument("--alpha", type=float)
    return ap


def _config(args) -> RunConfig:
    cfg = config_from_file(args.config, args.command) if args.config else RunConfig(args.command)
    if args.tol is not None:
        cfg.tol = args.tol
    if args.output is not None:
        cfg.output = args.output
    o = cfg.options
    for key in ("sigma", "alpha", "beta", "psi", "shape", "scale", "group", "seed", "trials", "n"):
        v = getattr(args, key, None)
        if v is not None:
            o[key] = v
    if getattr(args, "mix", None):
        o["mix"] = _read_json_arg(args.mix, "mix")
    if getattr(args, "chernoff_points", None):
        o["chernoff_points"] = _read_json_arg(args.chernoff_points, "chernoff-points")
    if getattr(args, "grid", None):
        cfg.grid = _read_json_arg(args.grid, "grid")
    if getattr(args, "f", None) is not None:
        f = _read_json_arg(args.f, "f")
        o["f"] = f
    if getattr(args, "measure", None):
        m = _read_json_arg(args.measure, "measure")
        if not isinstance(m, dict) or "grid" not in m:
            raise InputError("measure needs a grid and weights")
        cfg.grid = m["grid"]
        o["weights"] = m.get("weights")
    if getattr(args, "moments", None):
        o["moments"] = _read_json_arg(args.moments, "moments")
    return cfg


def run(cfg: RunConfig, data: np.ndarray | None = None) -> dict:
    if cfg.command == "etest":
        if data is None:
            raise InputError("etest needs data")
        return run_etest(cfg, data)
    return {"verify": run_verify, "maximal": run_maximal, "subpsi": run_subpsi,
            "symmetry": run_symmetry, "reduce": run_reduce,
            "relaxed-demo": run_relaxed_demo}[cfg.command](cfg)


def _emit(report: dict, cfg: RunConfig | None, code: int) -> int:
    report = dict(report, exit_code=code)
    text = dumps(report) + "\n"
    if cfg is not None and cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = None
    try:
        cfg = _config(args)
        data = None
        if cfg.command == "etest":
            if args.alpha is not None:
                cfg.options["alpha"] = args.alpha
            path = Path(args.data)
            if not path.is_file():
                raise InputError(f"data: no such file {args.data!r}")
            data = read_csv(path.read_text(encoding="utf-8-sig"))
            cfg.options["data_hash"] = hashlib.sha256(data.tobytes()).hexdigest()[:16]
        return _emit(run(cfg, data), cfg, EXIT_OK)
    except VerificationFailure as vf:
        return _emit(vf.report, cfg, EXIT_VERIFY)
    except (NumericalStallError, subpsi.ConstructionError, np.linalg.LinAlgError) as e:
        print(f"evarkit: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError, KeyError, TypeError) as e:
        print(f"evarkit: input error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
