"""Command-line entry point: ``spf <command> [flags] [file]``.

Results go to stdout as JSON (CSV for ``bench``). Failures print
``{"error": code, "detail": message}`` to stderr and exit 1 (domain error) or
2 (usage error).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import apps
from .bench import BenchConfig, run_benchmark
from .engine import EngineConfig, sum_spf
from .graph import SpfError, graph_from_json, graph_to_json, is_decomposable, is_deterministic, variables_from_json
from .learn import LearnConfig, learn_spf, load_dataset_csv
from .semiring import SEMIRINGS, CarrierError, get_semiring
from .store import ResourceError
from .summation import sum_decomposable
from .translate import translate
from .treelike import build_treelike, junction_tree_from_json, treewidth, validate_junction_tree


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_seed() -> int:
    raw = os.environ.get("SPF_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SPF_SEED must be an integer, got {raw!r}") from None


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _format(path: str, override: Optional[str]) -> str:
    if override:
        return override
    suffix = Path(path).suffix.lower()
    return {".cnf": "dimacs", ".json": "json", ".csv": "csv"}.get(suffix, "json")


def _load_json(path: str) -> dict:
    try:
        obj = json.loads(_read(path))
    except json.JSONDecodeError as e:
        raise SpfError(f"invalid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise SpfError("expected a JSON object")
    return obj


def _load_typed(path: str, expected: str) -> dict:
    obj = _load_json(path)
    kind = obj.get("type", expected)
    if kind != expected:
        raise SpfError(f"expected a {expected!r} document, got type {kind!r}")
    return obj


def _load_graph(args, semiring=None):
    return graph_from_json(_load_typed(args.file, "spf"), semiring)


def _load_cnf(args) -> "apps.Cnf":
    fmt = _format(args.file, args.format)
    if fmt != "dimacs":
        raise UsageError(f"{args.command} expects a DIMACS .cnf file")
    return apps.parse_dimacs(_read(args.file))


def _engine_config(args) -> EngineConfig:
    return EngineConfig(
        variable_heuristic=args.heuristic,
        child_order=args.order,
        enforce_determinism=getattr(args, "deterministic", False),
        node_budget=args.budget,
    )


def _evidence(args) -> dict:
    if not args.evidence:
        return {}
    try:
        e = json.loads(args.evidence)
    except json.JSONDecodeError as err:
        raise UsageError(f"--evidence is not JSON: {err}") from None
    if not isinstance(e, dict):
        raise UsageError("--evidence must be a JSON object of variable -> value")
    return e


def _json_value(v):
    if isinstance(v, float) and v != v:
        return "nan"
    if v in (float("inf"), float("-inf")) and isinstance(v, float):
        return "inf" if v > 0 else "-inf"
    return v


# --- commands --------------------------------------------------------------

def cmd_sum(args):
    g = _load_graph(args, args.semiring)
    res = sum_decomposable(g, leaf_restarts=args.restarts, seed=args.seed)
    return {"value": g.semiring.to_json(res.value), "semiring": g.semiring.name, "op_counts": res.op_counts.as_dict()}


def cmd_sumspf(args):
    g = _load_graph(args, args.semiring)
    value, stats, _ = sum_spf(g, _engine_config(args))
    return {"value": g.semiring.to_json(value), "semiring": g.semiring.name, "stats": stats.as_dict()}


def cmd_sat(args):
    r = apps.sat(_load_cnf(args), _engine_config(args))
    out = {"satisfiable": r.satisfiable, "stats": r.stats}
    if r.witness is not None:
        out["witness"] = r.witness
    return out


def cmd_count(args):
    return {"count": str(apps.model_count(_load_cnf(args), _engine_config(args)))}


def cmd_maxsat(args):
    r = apps.max_sat(_load_cnf(args), _engine_config(args))
    return {"value": r.value, "witness": r.witness, "stats": r.stats}


def cmd_csp(args):
    csp = apps.csp_from_json(_load_typed(args.file, "csp"))
    r = apps.solve_csp(csp, _engine_config(args))
    out = {"satisfiable": r.satisfiable, "stats": r.stats}
    if r.solution is not None:
        out["solution"] = r.solution
    return out


def cmd_evidence(args):
    g = _load_graph(args)
    value = apps.probability_of_evidence(g, _evidence(args), normalize=args.normalize)
    return {"value": value, "normalized": args.normalize}


def cmd_mpe(args):
    r = apps.mpe(_load_graph(args), _evidence(args))
    return {"value": r.value, "state": r.state}


def cmd_integrate(args):
    return {"value": apps.integrate(_load_graph(args))}


def cmd_minimize(args):
    r = apps.minimize_msf(_load_graph(args), restarts=args.restarts, seed=args.seed)
    return {"value": r.value, "argmin": r.argmin}


def cmd_check(args):
    g = _load_graph(args)
    d = is_decomposable(g)
    out = {
        "decomposable": bool(d),
        "witness": None if d else {"node": d.node, "variable": g.vars[d.variable].name},
        "size": g.size,
        "nodes": len(g.nodes),
        "semiring": g.semiring.name,
    }
    if args.deterministic:
        out["deterministic"] = is_deterministic(g)
    return out


def cmd_translate(args):
    g = _load_graph(args)
    return graph_to_json(translate(g, args.to, unchecked=args.unchecked))


def cmd_treelike(args):
    obj = _load_typed(args.file, "junction-tree")
    if "variables" not in obj:
        raise SpfError("junction-tree JSON needs 'variables'")
    vars = variables_from_json(obj["variables"])
    s = get_semiring(args.semiring or obj.get("semiring", "sum-product"))
    jt, psi = junction_tree_from_json(obj, vars)
    report = validate_junction_tree(jt, vars)
    if args.validate_only or not report:
        return {
            "valid": report.ok,
            "violation": None if report.ok else {"kind": report.kind, "vertex": report.vertex, "detail": report.detail},
            "treewidth": treewidth(jt) if report.ok else None,
        }
    psi = {i: [s.coerce(a) for a in t] for i, t in psi.items()}
    return graph_to_json(build_treelike(jt, psi, s, vars))


def cmd_learn(args):
    fmt = _format(args.file, args.format)
    if fmt != "csv":
        raise UsageError("learn expects a CSV dataset")
    data = load_dataset_csv(_read(args.file))
    estimator = args.estimator
    if estimator is None:
        estimator = "table-average" if data.labels is not None else "cluster-mean-quadratic"
    cfg = LearnConfig(t=args.t, v=args.v, rho_min=args.rho_min, k=args.k, seed=args.seed,
                      leaf_estimator=estimator, semiring=args.semiring or "min-sum")
    return graph_to_json(learn_spf(data, cfg))


def cmd_bench(args):
    try:
        dims = tuple(int(d) for d in args.dims.split(","))
    except ValueError:
        raise UsageError(f"--dims must be comma-separated integers, got {args.dims!r}") from None
    try:
        cfg = BenchConfig(dims=dims, train=args.train, test=args.test, budget_secs=args.budget_secs,
                          seed=args.seed, leaf_restarts=args.restarts)
    except ValueError as e:
        raise UsageError(str(e)) from None
    text = run_benchmark(cfg).to_csv()
    if args.out:
        Path(args.out).write_text(text)
    return text


COMMANDS = {
    "sum": cmd_sum,
    "sumspf": cmd_sumspf,
    "sat": cmd_sat,
    "count": cmd_count,
    "maxsat": cmd_maxsat,
    "csp": cmd_csp,
    "mpe": cmd_mpe,
    "evidence": cmd_evidence,
    "integrate": cmd_integrate,
    "minimize": cmd_minimize,
    "learn": cmd_learn,
    "bench": cmd_bench,
    "check": cmd_check,
    "translate": cmd_translate,
    "treelike": cmd_treelike,
}


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _unit(text):
    v = float(text)
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1)")
    return v


def build_parser(seed: int) -> argparse.ArgumentParser:
    p = _Parser(prog="spf", description="Sum-product functions over commutative semirings.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    semirings = sorted(SEMIRINGS)

    def add(name, help, file=True):
        sp = sub.add_parser(name, help=help)
        if file:
            sp.add_argument("file", help="input file ('-' for stdin)")
            sp.add_argument("--format", choices=["json", "dimacs", "csv"], help="override the extension-based format")
        sp.add_argument("--seed", type=int, default=seed)
        return sp

    def engine_flags(sp):
        sp.add_argument("--heuristic", choices=["most-shared", "first-index"], default="most-shared")
        sp.add_argument("--order", choices=["absorbing-first", "declaration"], default="absorbing-first")
        sp.add_argument("--budget", type=_positive, default=10 ** 6, help="node budget")

    sp = add("sum", "sum a decomposable SPF in one pass")
    sp.add_argument("--semiring", choices=semirings)
    sp.add_argument("--restarts", type=_positive, default=16)
    sp = add("sumspf", "sum any SPF by conditioning")
    sp.add_argument("--semiring", choices=semirings)
    sp.add_argument("--deterministic", action="store_true", help="compile to deterministic form first")
    engine_flags(sp)
    for name, help in [("sat", "satisfiability of a DIMACS CNF"), ("count", "model count of a DIMACS CNF"),
                       ("maxsat", "MAX-SAT of a DIMACS CNF"), ("csp", "solve a CSP JSON instance")]:
        engine_flags(add(name, help))
    for name, help in [("evidence", "probability of evidence in an SPN"), ("mpe", "most probable state of an SPN")]:
        sp = add(name, help)
        sp.add_argument("--evidence", help='JSON object, e.g. \'{"X1": 1}\'')
        if name == "evidence":
            sp.add_argument("--normalize", action="store_true")
    add("integrate", "integrate an SPF over its interval domains")
    sp = add("minimize", "global minimum of a min-sum SPF")
    sp.add_argument("--restarts", type=_positive, default=16)
    sp = add("learn", "learn an SPF from a CSV dataset")
    sp.add_argument("--t", type=_positive, default=30)
    sp.add_argument("--v", type=_positive, default=2)
    sp.add_argument("--rho-min", type=_unit, default=0.3)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--estimator", choices=["table-average", "cluster-mean-quadratic"])
    sp.add_argument("--semiring", choices=semirings)
    sp = add("bench", "learned versus direct minimization benchmark (CSV)", file=False)
    sp.add_argument("--dims", default="4,8,12,16")
    sp.add_argument("--train", type=_positive, default=300)
    sp.add_argument("--test", type=_positive, default=50)
    sp.add_argument("--budget-secs", type=float, default=2.0)
    sp.add_argument("--restarts", type=_positive, help="cap on restarts per learned leaf (default: time budget only)")
    sp.add_argument("--out", help="also write the CSV here")
    sp = add("check", "decomposability report")
    sp.add_argument("--deterministic", action="store_true", help="also test determinism by enumeration")
    sp = add("translate", "move a 0/1 SPF to another semiring")
    sp.add_argument("--to", required=True, choices=semirings)
    sp.add_argument("--unchecked", action="store_true", help="skip the determinism check")
    sp = add("treelike", "tree-like SPF from a junction tree")
    sp.add_argument("--semiring", choices=semirings)
    sp.add_argument("--validate-only", action="store_true")
    return p


def _fail(code: str, detail: str, status: int) -> int:
    sys.stderr.write(json.dumps({"error": code, "detail": detail}, sort_keys=True) + "\n")
    return status


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        parser = build_parser(_default_seed())
        args = parser.parse_args(argv)
        result = COMMANDS[args.command](args)
    except UsageError as e:
        return _fail("usage", str(e), 2)
    except ResourceError as e:
        detail = str(e)
        if e.stats is not None:
            detail += f" (stats: {json.dumps(e.stats.as_dict(), sort_keys=True)})"
        return _fail("resource", detail, 1)
    except apps.DimacsError as e:
        return _fail("parse", str(e), 1)
    except (SpfError, CarrierError, ValueError, KeyError, TypeError) as e:
        return _fail("domain", str(e), 1)
    if isinstance(result, str):
        sys.stdout.write(result)
    else:
        sys.stdout.write(json.dumps(result, sort_keys=True, default=_json_value) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
