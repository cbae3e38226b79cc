"""Batch command-line entry point.

Usage::

    kummer-secants CONFIG.json [--output PATH] [--threads N] [--verbose]

The config is a JSON object with ``command``, ``genus`` and ``omega`` (a
g x g array of ``[re, im]`` pairs) plus command-specific keys; see
``docs/report-schema.md``.  Exit codes: 0 report written (status may still
be ``failed``), 2 config error, 3 internal numerical panic.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import KummerSecantError, ParseError, SearchFailed, ValidationError
from .geometry import divisor_intersection_points, find_degenerate_secant, restricted_values, restriction_check
from .hierarchy import initial_state, make_grid, p_coefficients, run_hierarchy
from .kummer import (
    addition_formula_residuals,
    center_config,
    config_from_centered,
    degenerate_secant_test,
    honest_secant_test,
)
from .parallel import set_max_workers
from .theta_core import ThetaCharacteristic, TruncationPolicy, random_points, theta_values, validate_siegel

log = logging.getLogger("kummer_secants")

COMMANDS = ("theta-eval", "addition-check", "secant-check", "secant-search", "hierarchy-run", "restriction-check")

# defaults per key; a command only reads the keys it lists in _KEYS
DEFAULTS = {
    "tol": 1e-12,
    "max_radius": 15.0,
    "seed": 0,
    "include_timing": False,
    "points": None,
    "characteristic": None,
    "pairs": 100,
    "threshold": 1e-9,
    "m": 1,
    "zeta": None,
    "tol_rank": 1e-7,
    "mode": "honest",
    "u": None,
    "b": None,
    "d1": None,
    "tol_search": 1e-10,
    "max_iters": 100,
    "grid_size": None,
    "S_max": 5,
    "tol_solve": 1e-8,
    "search": False,
    "orders": [1, 2],
    "n_starts": 16,
    "tol_divisor": 1e-10,
    "output_path": None,
}

_COMMON = ("tol", "max_radius", "seed", "include_timing", "output_path")
_KEYS = {
    "theta-eval": ("points", "characteristic"),
    "addition-check": ("pairs", "threshold"),
    "secant-check": ("mode", "m", "points", "zeta", "u", "d1", "b", "tol_rank"),
    "secant-search": ("m", "tol_search", "max_iters", "grid_size", "tol_rank"),
    "hierarchy-run": ("m", "points", "u", "b", "search", "S_max", "tol_solve", "grid_size", "tol_search", "max_iters"),
    "restriction-check": ("u", "b", "S_max", "tol_solve", "grid_size", "tol_search", "max_iters", "orders", "n_starts", "tol_divisor"),
}

POSITIVE = ("tol", "max_radius", "threshold", "tol_rank", "tol_search", "tol_solve", "tol_divisor")


@dataclass
class RunConfig:
    command: str
    genus: int
    omega: np.ndarray
    params: dict = field(default_factory=dict)

    def echo(self) -> dict:
        out = {"command": self.command, "genus": self.genus, "omega": _cmat(self.omega)}
        out.update({k: _echo_value(v) for k, v in sorted(self.params.items())})
        return out


def _echo_value(v):
    if isinstance(v, np.ndarray):
        return _cvecs(v) if v.ndim == 2 else _cvec(v)
    return v


# -- parsing ---------------------------------------------------------------


def _complex(v, where):
    if isinstance(v, bool) or not isinstance(v, list) or len(v) != 2 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ParseError(f"{where}: expected a complex number as [re, im], got {json.dumps(v)}")
    return complex(float(v[0]), float(v[1]))


def _complex_vector(v, g, where):
    if not isinstance(v, list) or len(v) != g:
        raise ParseError(f"{where}: expected a list of {g} complex [re, im] entries")
    return np.array([_complex(x, f"{where}[{i}]") for i, x in enumerate(v)])


def _complex_vectors(v, g, where):
    if not isinstance(v, list) or not v:
        raise ParseError(f"{where}: expected a nonempty list of complex {g}-vectors")
    return np.array([_complex_vector(x, g, f"{where}[{i}]") for i, x in enumerate(v)])


def _number(v, where, kind=float):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}: expected a number, got {json.dumps(v)}")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise ParseError(f"{where}: expected an integer, got {v}")
        return int(v)
    return float(v)


def parse_config(text) -> RunConfig:
    """Parse and validate a JSON config (bytes or str)."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"config is not valid UTF-8: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ParseError("top level: expected an object")
    for key in ("command", "genus", "omega"):
        if key not in raw:
            raise ParseError(f"missing required field '{key}'")
    command = raw["command"]
    if command not in COMMANDS:
        raise ParseError(f"command: unknown command {json.dumps(command)}; expected one of {', '.join(COMMANDS)}")
    g = _number(raw["genus"], "genus", int)
    if g < 1:
        raise ValidationError("genus: must be a positive integer")
    om = raw["omega"]
    if not isinstance(om, list) or len(om) != g or not all(isinstance(r, list) and len(r) == g for r in om):
        raise ParseError(f"omega: expected a {g}x{g} array of [re, im] pairs")
    omega = np.array([[_complex(x, f"omega[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(om)])
    try:
        validate_siegel(omega)
    except ValidationError as exc:
        raise ValidationError(f"omega: {exc}") from exc

    allowed = set(_COMMON) | set(_KEYS[command])
    unknown = sorted(set(raw) - allowed - {"command", "genus", "omega"})
    if unknown:
        raise ParseError(f"unknown field(s) for {command}: {', '.join(unknown)}")
    params = {k: raw.get(k, DEFAULTS[k]) for k in sorted(allowed)}

    for k in POSITIVE:
        if k in params:
            params[k] = _number(params[k], k)
            if not params[k] > 0 or not math.isfinite(params[k]):
                raise ValidationError(f"{k}: must be a positive finite number, got {params[k]}")
    for k in ("seed", "pairs", "m", "max_iters", "S_max", "n_starts"):
        if k in params:
            params[k] = _number(params[k], k, int)
            if params[k] < 0 or (k in ("pairs", "m", "max_iters", "n_starts") and params[k] < 1):
                raise ValidationError(f"{k}: out of range ({params[k]})")
    if "grid_size" in params and params["grid_size"] is not None:
        params["grid_size"] = _number(params["grid_size"], "grid_size", int)
        if params["grid_size"] < 2 * 2**g:
            raise ValidationError(f"grid_size: needs at least {2 * 2**g} points for genus {g}")
    for k in ("include_timing", "search"):
        if k in params and not isinstance(params[k], bool):
            raise ParseError(f"{k}: expected true or false")
    if "tol_rank" in params and not params["tol_rank"] < 1:
        raise ValidationError("tol_rank: must lie in (0, 1)")
    if params.get("output_path") is not None and not isinstance(params["output_path"], str):
        raise ParseError("output_path: expected a string")
    for k in ("points", "b"):
        if params.get(k) is not None:
            params[k] = _complex_vectors(params[k], g, k)
    for k in ("zeta", "u", "d1"):
        if params.get(k) is not None:
            params[k] = _complex_vector(params[k], g, k)
    if params.get("characteristic") is not None:
        ch = params["characteristic"]
        if not isinstance(ch, dict) or set(ch) - {"a", "b"}:
            raise ParseError("characteristic: expected an object with keys 'a' and 'b'")
        for k in ("a", "b"):
            v = ch.get(k, [0.0] * g)
            if not isinstance(v, list) or len(v) != g:
                raise ParseError(f"characteristic.{k}: expected {g} real numbers")
            ch[k] = [_number(x, f"characteristic.{k}[{i}]") for i, x in enumerate(v)]
    if "mode" in params and params["mode"] not in ("honest", "degenerate"):
        raise ParseError("mode: expected 'honest' or 'degenerate'")
    if "orders" in params:
        o = params["orders"]
        if not isinstance(o, list) or not o:
            raise ParseError("orders: expected a nonempty list of integers")
        params["orders"] = [_number(x, f"orders[{i}]", int) for i, x in enumerate(o)]
        if min(params["orders"]) < 1:
            raise ValidationError("orders: entries must be >= 1")
    if command == "theta-eval" and params["points"] is None:
        raise ParseError("points: required for theta-eval")
    return RunConfig(command=command, genus=g, omega=omega, params=params)


# -- serialization ---------------------------------------------------------


def _c(z):
    return [float(np.real(z)), float(np.imag(z))]


def _cvec(v):
    return [_c(x) for x in np.ravel(v)]


def _cvecs(vs):
    return [_cvec(v) for v in vs]


def _cmat(a):
    return [[_c(x) for x in row] for row in np.asarray(a)]


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == 0.0:
        return "0.0"
    text = format(x, ".17g").replace("e+", "e")
    return text if any(c in text for c in ".en") else text + ".0"


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats printed at 17 significant digits and stable key order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(x, (int, float, bool, type(None), np.floating, np.integer)) for x in obj):
            return "[" + ", ".join(dumps(x, indent, _level + 1) for x in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(x, indent, _level + 1) for x in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- workflows -------------------------------------------------------------


def _policy(cfg):
    return TruncationPolicy(cfg.params["tol"], cfg.params["max_radius"])


def _report_secant(rep):
    return {
        "matrix_rows": rep.matrix_rows,
        "singular_values": list(rep.singular_values),
        "rank_estimate": rep.rank_estimate,
        "is_secant": rep.is_secant,
        "gap_ratio": rep.gap_ratio,
    }


def _theta_eval(cfg, sm, policy, verbose):
    p = cfg.params
    ch = None
    if p["characteristic"] is not None:
        ch = ThetaCharacteristic(p["characteristic"]["a"], p["characteristic"]["b"])
    vals = theta_values(sm, p["points"], ch, policy)
    return "success", {"values": _cvec(vals)}


def _addition_check(cfg, sm, policy, verbose):
    p = cfg.params
    rng = np.random.default_rng(p["seed"])
    Z = random_points(sm, p["pairs"], rng)
    W = random_points(sm, p["pairs"], rng)
    res = addition_formula_residuals(sm, Z, W, policy)
    payload = {"pairs": p["pairs"], "max_residual": float(res.max()), "threshold": p["threshold"], "passed": bool(res.max() <= p["threshold"])}
    if verbose:
        payload["residuals"] = [float(r) for r in res]
    return ("success" if payload["passed"] else "failed"), payload


def _secant_check(cfg, sm, policy, verbose):
    p = cfg.params
    g = cfg.genus
    rng = np.random.default_rng(p["seed"])
    if p["mode"] == "degenerate":
        u = p["u"] if p["u"] is not None else random_points(sm, 1, rng)[0]
        d1 = p["d1"] if p["d1"] is not None else rng.normal(size=g) + 1j * rng.normal(size=g)
        b = p["b"] if p["b"] is not None else random_points(sm, p["m"], rng)
        rep = degenerate_secant_test(sm, u, d1, b, p["tol_rank"], policy)
        payload = {"mode": "degenerate", "m": len(b), "u": _cvec(u), "d1": _cvec(d1), "b": _cvecs(b)}
    else:
        pts = p["points"] if p["points"] is not None else random_points(sm, p["m"] + 2, rng)
        zeta = p["zeta"] if p["zeta"] is not None else np.zeros(g, dtype=complex)
        config = center_config(list(pts), sm)
        rep = honest_secant_test(sm, config, zeta, p["tol_rank"], policy)
        payload = {"mode": "honest", "m": len(pts) - 2, "points": _cvecs(pts), "zeta": _cvec(zeta)}
    payload["report"] = _report_secant(rep)
    payload["verdict"] = rep.is_secant
    return "success", payload


def _search_payload(res, sm, tol_rank, policy):
    rep = degenerate_secant_test(sm, res.config.centered_u, res.d1, res.config.centered_b, tol_rank, policy)
    return {
        "u": _cvec(res.config.centered_u),
        "b": _cvecs(res.config.centered_b),
        "d1": _cvec(res.d1),
        "d1_scale": res.d1_scale,
        "alpha1_1": _c(res.alpha1_1),
        "alpha_j_1": [_c(a) for a in res.alpha_j_1],
        "final_residual": res.final_residual,
        "iterations": res.iterations,
        "seed": res.seed,
        "degenerate_secant_test": _report_secant(rep),
    }


def _secant_search(cfg, sm, policy, verbose):
    p = cfg.params
    try:
        res = find_degenerate_secant(sm, p["m"], p["seed"], p["tol_search"], p["max_iters"], policy, p["grid_size"])
    except SearchFailed as exc:
        payload = {"error": str(exc)}
        if exc.result is not None:
            payload.update(_search_payload(exc.result, sm, p["tol_rank"], policy))
        return "failed", payload
    return "success", _search_payload(res, sm, p["tol_rank"], policy)


def _order_rows(state):
    rows = []
    for s in range(1, state.solved + 1):
        rows.append(
            {
                "order": s,
                "residual": state.residuals[s - 1],
                "tol": state.tolerances[s - 1],
                "condition_number": state.conditions[s - 1],
                "alpha": {str(j): _c(state.alphas.entries.get((j, s), 0.0)) for j in state.alphas.free_rows()},
                "D": _cvec(state.w[s - 1]),
            }
        )
    return rows


def _hierarchy_payload(state, S_max, verbose, policy):
    payload = {
        "u": _cvec(state.config.centered_u),
        "b": _cvecs(state.config.centered_b),
        "grid_seed": state.grid.seed,
        "grid_size": state.grid.count,
        "residual_scale": state.scale,
        "S_max": S_max,
        "solved_orders": state.solved,
        "orders": _order_rows(state),
        "first_failing_order": None if state.failure is None else state.failure["order"],
        "failure": state.failure,
    }
    if verbose and state.solved:
        coeffs = p_coefficients(state, state.grid.points, state.solved, policy)
        payload["grid_diagnostics"] = [
            {"order": s, "abs_P": [float(v) for v in np.abs(coeffs[:, s]) / state.scale]} for s in range(1, state.solved + 1)
        ]
    return payload


def _hierarchy_start(cfg, sm, policy, rng):
    """Initial state from explicit points, explicit (u, b), a search, or random points."""
    p = cfg.params
    search = None
    if p.get("points") is not None:
        config = center_config(list(p["points"]), sm)
    elif p.get("u") is not None and p.get("b") is not None:
        config = config_from_centered(p["u"], list(p["b"]), sm)
    elif p.get("search", False) or cfg.command == "restriction-check":
        search = find_degenerate_secant(sm, p.get("m", 1), p["seed"], p["tol_search"], p["max_iters"], policy, p["grid_size"])
        config = search.config
    else:
        pts = random_points(sm, p["m"] + 1, rng)
        config = config_from_centered(pts[0], list(pts[1:]), sm)
    if search is not None:
        state = search.state
        if p["grid_size"] is not None and state.grid.count != p["grid_size"]:
            state = None
    else:
        state = None
    if state is None:
        grid = make_grid(sm, config, p["grid_size"], seed=int(rng.integers(2**31)), policy=policy)
        state = initial_state(sm, config, grid, policy=policy)
    return state, search


def _hierarchy_run(cfg, sm, policy, verbose):
    p = cfg.params
    rng = np.random.default_rng(p["seed"])
    try:
        state, search = _hierarchy_start(cfg, sm, policy, rng)
    except SearchFailed as exc:
        return "failed", {"error": str(exc)}
    state = run_hierarchy(sm, state.config, p["S_max"], p["tol_solve"], policy=policy, state=state)
    payload = _hierarchy_payload(state, p["S_max"], verbose, policy)
    if search is not None:
        payload["search"] = _search_payload(search, sm, 1e-7, policy)
    if state.failure is None:
        status = "success"
    else:
        status = "partial" if state.solved > 0 else "failed"
    return status, payload


def _restriction_check(cfg, sm, policy, verbose):
    p = cfg.params
    if cfg.genus != 2:
        return "failed", {"error": "restriction-check is implemented for genus 2, m = 1"}
    rng = np.random.default_rng(p["seed"])
    try:
        state, search = _hierarchy_start(cfg, sm, policy, rng)
    except SearchFailed as exc:
        return "failed", {"error": str(exc)}
    if state.config.m != 1:
        return "failed", {"error": "restriction-check is implemented for m = 1"}
    need = max(p["S_max"], max(p["orders"]) - 1)
    state = run_hierarchy(sm, state.config, need, p["tol_solve"], policy=policy, state=state)
    payload = _hierarchy_payload(state, need, verbose, policy)
    G = divisor_intersection_points(sm, state.config.centered_u, p["n_starts"], p["tol_divisor"], policy, seed=p["seed"])
    payload["intersection_points"] = _cvecs(G.points)
    checks = []
    for s in p["orders"]:
        if state.solved < s - 1:
            checks.append({"order": s, "skipped": f"orders below {s} not solved"})
            continue
        r, expected = restricted_values(state, s, G, policy)
        checks.append(
            {
                "order": s,
                "identity_residual": restriction_check(state, s, G, policy),
                "max_abs_R_s": float(np.max(np.abs(r)) / state.scale),
            }
        )
    payload["restriction"] = checks
    ok = state.failure is None and all("skipped" not in c for c in checks)
    return ("success" if ok else "partial"), payload


WORKFLOWS = {
    "theta-eval": _theta_eval,
    "addition-check": _addition_check,
    "secant-check": _secant_check,
    "secant-search": _secant_search,
    "hierarchy-run": _hierarchy_run,
    "restriction-check": _restriction_check,
}


def dispatch(cfg: RunConfig, verbose: bool = False) -> dict:
    """Run the configured workflow and return the report as a dict.

    Workflow errors are embedded with status ``failed``; unexpected
    exceptions propagate.
    """
    sm = validate_siegel(cfg.omega)
    policy = _policy(cfg)
    start = time.perf_counter()
    try:
        status, payload = WORKFLOWS[cfg.command](cfg, sm, policy, verbose)
    except KummerSecantError as exc:
        status, payload = "failed", {"error": f"{type(exc).__name__}: {exc}"}
    report = {
        "artifact_version": __version__,
        "command": cfg.command,
        "status": status,
        "config_echo": cfg.echo(),
        "payload": payload,
    }
    if cfg.params.get("include_timing"):
        report["timing_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
    return report


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="kummer-secants", description="Theta-function secant verification runs")
    ap.add_argument("config", help="path to the JSON config file")
    ap.add_argument("--output", help="report path (default: stdout, or output_path from the config)")
    ap.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    ap.add_argument("--verbose", action="store_true", help="add per-grid-point diagnostics")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)

    try:
        with open(args.config, "rb") as fh:
            cfg = parse_config(fh.read())
        if args.threads is not None:
            set_max_workers(args.threads)
    except (OSError, ParseError, ValidationError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = dispatch(cfg, verbose=args.verbose)
    except Exception as exc:  # noqa: BLE001
        log.exception("numerical panic")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    text = dumps(report) + "\n"
    out = args.output or cfg.params.get("output_path")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
