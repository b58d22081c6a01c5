"""Command-line front end.

Every subcommand prints one JSON document on stdout (``export-dot`` prints
DOT unless ``--output`` is given).  Logs go to stderr.  Exit status is 0 on
success, 2 for malformed or inconsistent input and 3 when a solver fails.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import __version__
from .economy import demand_profile
from .errors import SOLVER_ERRORS, DimensionTooLarge, RamexError, SchemaError, SizeLimit
from .exchange_value import all_criteria, exchange_value
from .h_optimizer import sigma_sweep
from .io import dumps, parse_economy, parse_graph, parse_plan, to_dot
from .plan_polytope import build_constraints, polytope_dimension_formula, polytope_dimension_rank
from .tolerances import DEFAULT, Tolerances
from .transport_graph import euler_characteristic, m_alpha_cost, route_matrix

log = logging.getLogger("ramex")

EXIT_OK, EXIT_SCHEMA, EXIT_SOLVER = 0, 2, 3
_SOLVER_FAILURES = SOLVER_ERRORS + (DimensionTooLarge, SizeLimit)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _tolerances(specs) -> Tolerances:
    """``--tol 1e-8`` sets every tolerance; ``--tol bal=1e-8`` sets one."""
    tol = DEFAULT
    for spec in specs or ():
        name, _, value = spec.rpartition("=")
        try:
            x = float(value)
        except ValueError:
            raise UsageError(f"--tol expects F or NAME=F, got {spec!r}") from None
        if x <= 0:
            raise UsageError("--tol values must be > 0")
        try:
            tol = tol.with_overrides(**({name: x} if name else {k: x for k in tol.as_dict()}))
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
    return tol


def _read(path, what):
    if path is None:
        raise UsageError(f"this subcommand needs --{what}")
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise SchemaError("", f"cannot read {what} file: {exc.strerror}") from None


def _economy(args):
    return parse_economy(_read(args.economy, "economy"))


def _graph(args, tol):
    return parse_graph(_read(args.graph, "graph"), tol)


def _reference_plan(args, economy):
    if args.plan is not None:
        return parse_plan(_read(args.plan, "plan"), (economy.k, economy.l))
    return demand_profile(economy).plan


def cmd_demand(args, tol):
    eco = _economy(args)
    dp = demand_profile(eco)
    return {
        "q_bar": dp.plan.tolist(),
        "floors": list(dp.floors),
        "source_masses": dp.source_masses.tolist(),
        "sink_masses": dp.sink_masses.tolist(),
        "scale": dp.scale,
        "goods": [g.id for g in eco.goods],
        "consumers": [c.id for c in eco.consumers],
    }


def cmd_routes(args, tol):
    G = _graph(args, tol)
    rm = route_matrix(G)
    k, l = rm.shape
    return {
        "routes": [[None if rm[i, j] is None else list(rm[i, j]) for j in range(l)] for i in range(k)],
        "present": rm.present().astype(int).tolist(),
        "count": rm.count,
    }


def cmd_dims(args, tol):
    G = _graph(args, tol)
    plan = None if args.plan is None else parse_plan(_read(args.plan, "plan"), (G.k, G.l))
    cs = build_constraints(G, plan, tol=tol)
    rank_dim = polytope_dimension_rank(cs, tol)
    formula_dim = polytope_dimension_formula(G)
    return {
        "rank_dim": rank_dim,
        "formula_dim": formula_dim,
        "agree": rank_dim == formula_dim,
        "routes": route_matrix(G).count,
        "euler_characteristic": euler_characteristic(G),
        "equations": cs.equation_strings(),
    }


def cmd_value(args, tol):
    eco = _economy(args)
    G = _graph(args, tol)
    return exchange_value(eco, G, _reference_plan(args, eco), tol).to_json()


def cmd_criteria(args, tol):
    eco = _economy(args)
    G = None if args.graph is None else _graph(args, tol)
    reports = all_criteria(eco, G, _reference_plan(args, eco), tol)
    return {"criteria": [r.to_json() for r in reports]}


def cmd_cost(args, tol):
    G = _graph(args, tol)
    alpha = 0.5 if args.alpha is None else args.alpha
    return {"alpha": alpha, "M_alpha": m_alpha_cost(G, alpha)}


def _sigmas(text):
    try:
        out = [float(s) for s in text.split(",")]
    except ValueError:
        raise UsageError(f"--sigma expects F or F,F,..., got {text!r}") from None
    if any(s < 0 for s in out):
        raise UsageError("--sigma values must be >= 0")
    return out


def cmd_optimize(args, tol):
    eco = _economy(args)
    alpha = 0.5 if args.alpha is None else args.alpha
    if not 0 <= alpha < 1:
        raise UsageError("--alpha must lie in [0, 1) for optimize")
    sigmas = _sigmas(args.sigma or "0")
    plan = None if args.plan is None else _reference_plan(args, eco)
    results = sigma_sweep(eco, alpha, sigmas, args.max_interior, plan, tol)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sigma", "rank", "signature", "M_alpha", "V", "H", "argmin", "template"])
            for res in results:
                for rank, c in enumerate(res.candidates):
                    w.writerow([res.sigma, rank, c.signature, repr(c.cost), repr(c.value), repr(c.h(res.sigma)), int(rank == 0), c.template.describe()])
        log.info("wrote %s", args.csv)
    if len(results) == 1:
        return results[0].to_json()
    return {"sweep": [r.to_json() for r in results]}


def cmd_export_dot(args, tol):
    G = _graph(args, tol)
    text = to_dot(G, Path(args.graph).stem)
    if args.output:
        Path(args.output).write_text(text)
        return {"written": args.output, "edges": len(G.edges)}
    return text


COMMANDS = {
    "demand": cmd_demand,
    "routes": cmd_routes,
    "dims": cmd_dims,
    "value": cmd_value,
    "criteria": cmd_criteria,
    "cost": cmd_cost,
    "optimize": cmd_optimize,
    "export-dot": cmd_export_dot,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ramex", description="Exchange value and transport cost of branching transport networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--economy", metavar="PATH")
    p.add_argument("--graph", metavar="PATH")
    p.add_argument("--plan", metavar="PATH")
    p.add_argument("--alpha", type=float, metavar="F")
    p.add_argument("--sigma", metavar="F[,F...]")
    p.add_argument("--tol", action="append", metavar="F|NAME=F")
    p.add_argument("--max-interior", type=int, default=2, metavar="N")
    p.add_argument("--csv", metavar="PATH", help="optimize: also write the sigma sweep as CSV")
    p.add_argument("--output", "-o", metavar="PATH", help="export-dot: write DOT here")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="pretty", action="store_false", help="compact JSON (default)")
    fmt.add_argument("--pretty", dest="pretty", action="store_true", help="indented JSON")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _error(kind, detail, pretty, **extra):
    body = {"kind": kind, "detail": detail}
    body.update(extra)
    return dumps({"error": body}, pretty)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    pretty = "--pretty" in argv
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(_error("usage", str(exc), pretty))
        return EXIT_SCHEMA
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        tol = _tolerances(args.tol)
        out = COMMANDS[args.command](args, tol)
    except UsageError as exc:
        print(_error("usage", str(exc), pretty))
        return EXIT_SCHEMA
    except SchemaError as exc:
        print(_error(exc.kind, exc.detail, pretty, pointer=exc.pointer))
        return EXIT_SCHEMA
    except _SOLVER_FAILURES as exc:
        print(_error(exc.kind, str(exc), pretty))
        return EXIT_SOLVER
    except RamexError as exc:
        print(_error(exc.kind, str(exc), pretty))
        return EXIT_SCHEMA
    except ValueError as exc:
        print(_error("invalid_input", str(exc), pretty))
        return EXIT_SCHEMA
    if isinstance(out, str):
        sys.stdout.write(out)
        return EXIT_OK
    out["meta"] = {"command": args.command, "tolerances": tol.as_dict(), "version": __version__}
    print(dumps(out, pretty))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
