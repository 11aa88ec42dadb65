"""Command-line front end.

Exit codes: 0 success or certified, 1 structural error (bad input),
2 solver did not converge (including infeasible targets), 3 the
certificate or the oracle comparison failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certificates import Certificate, moment_certificate, transport_certificate
from .gauge import ConvexGaugeSpec, conjugate_gauge, gauge, pgauge_sandwich, support_of_levelset
from .integrands import FAMILY_TAGS, IntegrandFamily
from .measures import DiscreteMeasure, FeatureMap, StructuralError, push_moments
from .moment_solver import CERT_TOL, qualification_check, solve
from .oracles import entropy_oracle_grid, ot_oracle_vertices
from .problems import Box, Equality, MomentProblem
from .transport import TransportProblem, slackness_check, solve_ot

log = logging.getLogger("saddlepoint")

EXIT_OK, EXIT_STRUCTURAL, EXIT_NONCONVERGED, EXIT_CERT = 0, 1, 2, 3
TOL_ENV = "SADDLEPOINT_TOL"
OT_CERT_TOL = 1e-9
SOLVER_TOL = 1e-10
ORACLE_ATOL = 1e-9

ENTROPY_KEYS = {"kind", "reference", "family", "features", "constraint"}
OT_KEYS = {"kind", "mu", "nu", "cost"}
GAUGE_KEYS = {"kind", "family", "A", "w", "which", "symmetric"}
ENTROPY_SOLUTION_KEYS = {"kind", "x", "y", "Q", "value", "certificate", "meta"}
OT_SOLUTION_KEYS = {"kind", "plan", "f", "g", "value", "certificate", "meta"}


# --------------------------------------------------------------- encoding


def _clean(obj):
    """Make ``obj`` strict-JSON: arrays to lists, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _num(x):
    if isinstance(x, str) and x in ("inf", "-inf", "nan"):
        return float(x)
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise StructuralError(f"expected a number, got {x!r}")
    return float(x)


def _nums(xs, name):
    if not isinstance(xs, list):
        raise StructuralError(f"{name} must be a list")
    return [_nums(x, name) if isinstance(x, list) else _num(x) for x in xs]


def dumps(obj) -> str:
    # json renders floats with repr, the shortest round-trip form
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _load(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise StructuralError(f"cannot read {path}: {e.strerror}") from None
    try:
        data = json.loads(text, parse_constant=lambda c: (_ for _ in ()).throw(
            StructuralError(f"non-standard JSON constant {c}")))
    except json.JSONDecodeError as e:
        raise StructuralError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from None
    if not isinstance(data, dict):
        raise StructuralError(f"{path}: top level must be an object")
    return data


def _strict(d: dict, allowed: set, required: set, where: str):
    if not isinstance(d, dict):
        raise StructuralError(f"{where} must be an object")
    unknown = set(d) - allowed
    if unknown:
        raise StructuralError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise StructuralError(f"{where}: missing keys {sorted(missing)}")


# ---------------------------------------------------------------- parsing


def parse_family(d: dict, n: int) -> IntegrandFamily:
    _strict(d, {"tag", "params"}, {"tag"}, "family")
    tag = d["tag"]
    if tag not in FAMILY_TAGS:
        raise StructuralError(f"unknown family tag {tag!r}")
    params = d.get("params") or {}
    if tag == "Custom":
        _strict(params, {"s", "gamma", "dgamma", "scale", "divisor"}, {"s", "gamma", "dgamma"},
                "family.params")
    else:
        _strict(params, {"scale", "divisor"}, set(), "family.params")
    scale = params.get("scale", 1.0)
    divisor = params.get("divisor", 1.0)
    scale = _nums(scale, "scale") if isinstance(scale, list) else _num(scale)
    divisor = _nums(divisor, "divisor") if isinstance(divisor, list) else _num(divisor)
    if tag == "Custom":
        fam = IntegrandFamily.from_table(_nums(params["s"], "s"), _nums(params["gamma"], "gamma"),
                                         _nums(params["dgamma"], "dgamma"), scale, divisor)
    else:
        fam = IntegrandFamily(tag, scale, divisor)
    fam.check_size(n)
    return fam


def _bound(v, default):
    return default if v is None else _num(v)


def parse_constraint(d: dict, K: int) -> Box:
    _strict(d, {"type", "values"}, {"type", "values"}, "constraint")
    kind = d["type"]
    if kind == "equality":
        return Equality(_nums(d["values"], "constraint.values"))
    if kind == "box":
        v = d["values"]
        _strict(v, {"lower", "upper"}, {"lower", "upper"}, "constraint.values")
        lo = [_bound(x, -math.inf) for x in v["lower"]]
        hi = [_bound(x, math.inf) for x in v["upper"]]
        return Box(lo, hi)
    raise StructuralError(f"unknown constraint type {kind!r}")


def parse_problem(data: dict):
    kind = data.get("kind")
    if kind == "entropy":
        _strict(data, ENTROPY_KEYS, ENTROPY_KEYS, "problem")
        ref = data["reference"]
        _strict(ref, {"support", "weights"}, {"weights"}, "reference")
        R = DiscreteMeasure(ref.get("support"), _nums(ref["weights"], "reference.weights"))
        T = FeatureMap(_nums(data["features"], "features"))
        fam = parse_family(data["family"], len(R))
        return MomentProblem(R, fam, T, parse_constraint(data["constraint"], T.K))
    if kind == "ot":
        _strict(data, OT_KEYS, OT_KEYS, "problem")
        return TransportProblem(_nums(data["mu"], "mu"), _nums(data["nu"], "nu"),
                                _nums(data["cost"], "cost"))
    raise StructuralError(f"problem kind must be 'entropy' or 'ot', got {kind!r}")


def parse_gauge_spec(data: dict) -> ConvexGaugeSpec:
    _strict(data, GAUGE_KEYS, {"kind", "family", "A", "w"}, "gauge spec")
    if data["kind"] != "gauge":
        raise StructuralError("gauge spec kind must be 'gauge'")
    if data["family"] not in FAMILY_TAGS or data["family"] == "Custom":
        raise StructuralError(f"gauge spec needs a built-in family, got {data['family']!r}")
    which = data.get("which", "lambda_max")
    if which not in ("gamma", "lambda", "lambda_max"):
        raise StructuralError(f"unknown ridge function {which!r}")
    return ConvexGaugeSpec.from_ridge(data["family"], _nums(data["A"], "A"), _nums(data["w"], "w"),
                                      which, bool(data.get("symmetric", False)))


def _certificate_from(d: dict) -> Certificate:
    d = dict(d)
    for k in ("primal_value", "dual_value", "gap", "young_residual"):
        d[k] = _num(d[k])
    d["kkt"] = {k: _num(v) for k, v in d["kkt"].items()}
    return Certificate.from_dict(d)


# ------------------------------------------------------------- tolerances


def resolve_tol(flag, recorded, default) -> float:
    """Flag, then the ``SADDLEPOINT_TOL`` variable, then a recorded value, then the default."""
    if flag is not None:
        tol = flag
    elif os.environ.get(TOL_ENV):
        try:
            tol = float(os.environ[TOL_ENV])
        except ValueError:
            raise StructuralError(f"{TOL_ENV} is not a number") from None
    elif recorded is not None:
        tol = recorded
    else:
        tol = default
    if not (tol > 0 and math.isfinite(tol)):
        raise StructuralError("tolerance must be positive and finite")
    return float(tol)


# ---------------------------------------------------------------- outputs


def _write(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _emit(doc: dict, csv_rows, args):
    _write(dumps(doc), args.out)
    if args.format == "csv":
        text = _csv_text(csv_rows)
        if args.out:
            Path(args.out).with_suffix(".csv").write_text(text)
        else:
            sys.stdout.write(text)


def entropy_document(p: MomentProblem, x, y, Q, cert: Certificate, meta: dict) -> dict:
    return {"kind": "entropy", "x": x, "y": y, "Q": Q, "value": cert.primal_value,
            "certificate": cert.to_dict(), "meta": meta}


# ------------------------------------------------------------- subcommands


def cmd_solve_entropy(args) -> int:
    p = parse_problem(_load(args.problem))
    if not isinstance(p, MomentProblem):
        raise StructuralError("solve-entropy needs an entropy problem")
    tol = resolve_tol(args.tol, None, CERT_TOL)
    solver_tol = min(SOLVER_TOL, tol)
    sol = solve(p, solver_tol, args.max_iter, cert_tol=tol)
    c = sol.certificate
    meta = {"version": __version__,
            "tolerances": {"cert": tol, "solver": solver_tol},
            "iterations": sol.dual.iterations,
            "converged": sol.dual.converged,
            "message": sol.dual.message}
    code = EXIT_OK
    if args.oracle:
        meta["oracle"], ok = _entropy_oracle(p, c.primal_value)
        if not ok:
            code = EXIT_CERT
    Q = sol.primal.Q.weights
    doc = entropy_document(p, sol.x, sol.dual.y, Q, c, meta)
    rows = [("id", "reference", "Q")] + [(str(i), r, q) for i, r, q in
                                         zip(p.reference.ids, p.reference.weights, Q)]
    _emit(doc, rows, args)
    if not sol.dual.converged:
        print(f"not converged: {sol.dual.message}; qualification={c.qualification}", file=sys.stderr)
        return EXIT_NONCONVERGED
    if not c.passed(tol):
        print("certificate failed", file=sys.stderr)
        return EXIT_CERT
    return code


def _entropy_oracle(p: MomentProblem, value: float):
    if not p.is_equality or p.n > 4 or p.family.code is None:
        return {"status": "skipped", "reason": "grid oracle needs an equality constraint, "
                "n <= 4 and a built-in family"}, True
    try:
        o = entropy_oracle_grid(p)
    except StructuralError as e:
        return {"status": "skipped", "reason": str(e)}, True
    agrees = o.agrees(value, ORACLE_ATOL)
    return {"status": "ran", "value": o.value, "h": o.h, "bound": o.bound,
            "agrees": agrees}, agrees


def cmd_solve_ot(args) -> int:
    p = parse_problem(_load(args.problem))
    if not isinstance(p, TransportProblem):
        raise StructuralError("solve-ot needs an ot problem")
    tol = resolve_tol(args.tol, None, OT_CERT_TOL)
    sol = solve_ot(p, tol)
    c = sol.certificate
    meta = {"version": __version__, "tolerances": {"cert": tol}, "converged": True}
    code = EXIT_OK
    if args.oracle:
        m, n = p.shape
        if m > 4 or n > 4:
            meta["oracle"] = {"status": "skipped", "reason": "vertex enumeration needs m, n <= 4"}
        else:
            ov = ot_oracle_vertices(p.mu, p.nu, p.cost)
            agrees = abs(ov - c.primal_value) <= ORACLE_ATOL
            meta["oracle"] = {"status": "ran", "value": ov, "agrees": agrees}
            if not agrees:
                code = EXIT_CERT
    doc = {"kind": "ot", "plan": sol.plan, "f": sol.potentials.f, "g": sol.potentials.g,
           "value": c.primal_value, "certificate": c.to_dict(), "meta": meta}
    _emit(doc, [list(r) for r in sol.plan], args)
    if not c.passed(tol):
        print("certificate failed", file=sys.stderr)
        return EXIT_CERT
    return code


def cmd_certify(args) -> int:
    p = parse_problem(_load(args.problem))
    s = _load(args.solution)
    meta = s.get("meta") or {}
    recorded = (meta.get("tolerances") or {}).get("cert")
    recorded = None if recorded is None else _num(recorded)
    if isinstance(p, MomentProblem):
        _strict(s, ENTROPY_SOLUTION_KEYS, {"y", "Q"}, "solution")
        y = np.array(_nums(s["y"], "y"))
        Q = p.reference.with_weights(_nums(s["Q"], "Q"))
        if y.shape != (p.K,):
            raise StructuralError(f"y must have length {p.K}")
        tol = resolve_tol(args.tol, recorded, CERT_TOL)
        xp = p.constraint.project(push_moments(p.features, Q))
        qual = qualification_check(p, xp).status
        c = moment_certificate(p, Q, y, bool(meta.get("converged", True)), qual, tol)
    else:
        _strict(s, OT_SOLUTION_KEYS, {"plan", "f", "g"}, "solution")
        plan = np.array(_nums(s["plan"], "plan"), dtype=float)
        f = np.array(_nums(s["f"], "f"))
        g = np.array(_nums(s["g"], "g"))
        if plan.shape != p.shape or f.shape != (p.shape[0],) or g.shape != (p.shape[1],):
            raise StructuralError("plan and potentials do not match the problem dimensions")
        tol = resolve_tol(args.tol, recorded, OT_CERT_TOL)
        c = transport_certificate(p.mu, p.nu, p.cost, plan, f, g, True, tol)
    ok = c.passed(tol)
    sys.stdout.write(dumps({"certified": ok, "tol": tol, "certificate": c.to_dict()}))
    return EXIT_OK if ok else EXIT_CERT


def _point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise StructuralError(f"bad point {text!r}") from None


def cmd_gauge(args) -> int:
    spec = parse_gauge_spec(_load(args.spec))
    r = _point(args.point)
    if args.op == "gauge":
        out = {"op": "gauge", "value": gauge(spec, r)}
    elif args.op == "support":
        out = {"op": "support", "value": support_of_levelset(spec, r)}
    else:
        sw = pgauge_sandwich(spec, r)
        out = {"op": "sandwich", "lower": sw.lower, "support": sw.mid, "upper": sw.upper,
               "conjugate_gauge": conjugate_gauge(spec, r), "holds": sw.ok}
    sys.stdout.write(dumps(out))
    return EXIT_OK


# --------------------------------------------------------------- generator


def generate_entropy(seed: int, size: int, family: str = "RelativeEntropy", k: int = 3) -> dict:
    """Random entropy instance; targets are moments of a random positive measure.

    Uses ``numpy.random.default_rng(seed)`` (PCG64) in a fixed draw order:
    support coordinates, reference weights, then the target measure.
    """
    rng = np.random.default_rng(seed)
    n = size
    k = max(1, min(k, n))
    z = np.sort(rng.uniform(-1.0, 1.0, n))
    R = rng.uniform(0.5, 1.5, n)
    R = R / R.sum()
    feats = np.vander(z, k, increasing=True)
    if family == "Fermi":
        # densities of the target must stay below R
        P = R * rng.uniform(0.2, 0.8, n)
    else:
        P = rng.uniform(0.2, 1.0, n)
        P = P / P.sum()
    xhat = feats.T @ P
    return {"kind": "entropy",
            "reference": {"support": [f"z{i}" for i in range(n)], "weights": R},
            "family": {"tag": family, "params": {}},
            "features": feats,
            "constraint": {"type": "equality", "values": xhat}}


def generate_ot(seed: int, size: int) -> dict:
    """Random transport instance with ``size x size`` costs.

    Uses ``numpy.random.default_rng(seed)``: mu, nu, then the cost matrix.
    """
    rng = np.random.default_rng(seed)
    mu = rng.uniform(0.1, 1.0, size)
    nu = rng.uniform(0.1, 1.0, size)
    mu, nu = mu / mu.sum(), nu / nu.sum()
    cost = rng.uniform(0.0, 1.0, (size, size))
    return {"kind": "ot", "mu": mu, "nu": nu, "cost": cost}


def cmd_gen(args) -> int:
    if args.size < 1:
        raise StructuralError("size must be at least 1")
    if args.kind == "entropy":
        doc = generate_entropy(args.seed, args.size, args.family, args.features)
    else:
        doc = generate_ot(args.seed, args.size)
    _write(dumps(doc), args.out)
    return EXIT_OK


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="saddlepoint",
                                 description="Certified entropy, transport and gauge computations.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    se = sub.add_parser("solve-entropy", help="entropy minimisation under moment constraints")
    se.add_argument("problem")
    se.add_argument("--tol", type=float, help="certification tolerance")
    se.add_argument("--max-iter", type=int, default=200)
    se.add_argument("--oracle", action="store_true", help="compare with the grid oracle")
    se.add_argument("--out")
    se.add_argument("--format", choices=("json", "csv"), default="json")
    se.set_defaults(func=cmd_solve_entropy)

    so = sub.add_parser("solve-ot", help="discrete optimal transport")
    so.add_argument("problem")
    so.add_argument("--tol", type=float, help="certification tolerance")
    so.add_argument("--oracle", action="store_true", help="compare with vertex enumeration")
    so.add_argument("--out")
    so.add_argument("--format", choices=("json", "csv"), default="json")
    so.set_defaults(func=cmd_solve_ot)

    ga = sub.add_parser("gauge", help="gauge, support function or sandwich bounds")
    ga.add_argument("spec")
    ga.add_argument("--op", choices=("gauge", "support", "sandwich"), required=True)
    ga.add_argument("--point", required=True, help="comma-separated coordinates")
    ga.set_defaults(func=cmd_gauge)

    ce = sub.add_parser("certify", help="re-check a solution file")
    ce.add_argument("problem")
    ce.add_argument("solution")
    ce.add_argument("--tol", type=float)
    ce.set_defaults(func=cmd_certify)

    gn = sub.add_parser("gen", help="deterministic random instances")
    gn.add_argument("kind", choices=("entropy", "ot"))
    gn.add_argument("--seed", type=int, required=True)
    gn.add_argument("--size", type=int, required=True)
    gn.add_argument("--family", default="RelativeEntropy",
                    choices=[t for t in FAMILY_TAGS if t != "Custom"])
    gn.add_argument("--features", type=int, default=3, help="number of polynomial features")
    gn.add_argument("--out")
    gn.set_defaults(func=cmd_gen)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_STRUCTURAL
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (StructuralError, KeyError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STRUCTURAL


def main() -> None:
    sys.exit(run())
