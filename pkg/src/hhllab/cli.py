"""Command-line interface: ``hhllab {solve,heat,powerflow,estimate}``.

Exit codes: 0 success, 1 bad input, 2 singular or incompatible system,
3 zero success probability, 4 power-flow divergence, 5 undecomposable circuit.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources as ir
from pathlib import Path

import numpy as np

from . import heat, hhl, io, linalg, powerflow, resources, transforms
from .circuit import ZeroProbabilityError, load_circuit, stats

EXIT_OK, EXIT_PARSE, EXIT_SINGULAR, EXIT_ZERO_PROB, EXIT_DIVERGED, EXIT_UNDECOMPOSABLE = range(6)
CONFIG_ENV = "QLSS_CONFIG"
HEAT_L_RANGE = (2, 6)
HEAT_COLUMNS = ("l", "n_c", "state_error", "vector_error", "depth", "gates", "gates_after_fusion", "reduction_pct")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)


def parse_range(text: str) -> list[int]:
    """``"3:6"``, ``"3..6"`` or ``"3-6"`` (inclusive), ``"3,5,7"`` or a single positive integer."""
    text = str(text).strip()
    m = re.fullmatch(r"(\d+)\s*(?::|\.\.|-)\s*(\d+)", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        values = list(range(lo, hi + 1))
    else:
        try:
            values = [int(p) for p in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse range {text!r}") from None
    if min(values) < 1:
        raise argparse.ArgumentTypeError(f"clock sizes must be >= 1 in {text!r}")
    return values


def _budget(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("budget must lie in (0, 1)")
    return v


def _positive(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return v


def build_parser() -> _Parser:
    p = _Parser(prog="hhllab", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON config file (overrides $QLSS_CONFIG; flags override both)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomised inputs")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweep points")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve A x = b from files with HHL")
    s.add_argument("matrix", help="Matrix Market file")
    s.add_argument("rhs", help="vector file (.json pairs or .csv re,im)")
    s.add_argument("--nc", type=int)
    s.add_argument("--t", type=_positive)
    s.add_argument("--c-const", type=_positive)
    s.add_argument("--out", help="solution JSON path")

    h = sub.add_parser("heat", help="2-D heat system sweep over n_c")
    h.add_argument("--l", type=int, default=3)
    h.add_argument("--r", type=_positive, default=0.00016)
    h.add_argument("--nc-range", type=parse_range, default=[3, 4, 5, 6])
    h.add_argument("--forcing", choices=("ones", "random"), default="ones")
    h.add_argument("--t-mode", choices=("spectrum", "anchored"), default="spectrum",
                   help="spectrum: t from |lambda|_max; anchored: smallest |lambda| lands on clock value 1")
    h.add_argument("--out", help="CSV path (stdout if omitted)")

    f = sub.add_parser("powerflow", help="Newton-Raphson power flow")
    f.add_argument("case", nargs="?", help="case JSON (bundled 4-bus case if omitted)")
    f.add_argument("--solver", choices=("classical", "hhl"), default="classical")
    f.add_argument("--nc", type=parse_range, help="clock size or range (hhl only), e.g. 5 or 4:7")
    f.add_argument("--max-iter", type=int, default=50)
    f.add_argument("--out", default=".", help="output directory")

    e = sub.add_parser("estimate", help="fault-tolerant resource estimate")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("circuit", nargs="?", help="circuit JSON")
    src.add_argument("--from-heat", action="store_true")
    src.add_argument("--from-powerflow", nargs="?", const="bundled", metavar="CASE")
    e.add_argument("--l", type=int, default=3)
    e.add_argument("--r", type=_positive, default=0.00016)
    e.add_argument("--nc", type=parse_range, default=[4])
    e.add_argument("--qubits", choices=sorted(resources.PRESETS), default="ns-1e-4")
    e.add_argument("--budget", type=_budget, default=0.01)
    e.add_argument("--out", help="report JSON path (stdout if omitted)")
    e.add_argument("--sweep-out", help="sweep CSV path")
    return p


# --- configuration ------------------------------------------------------------

def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise io.ParseError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise io.ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise io.ParseError(f"{path}: config must be a JSON object")
    return data


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def load_config(path: str | None) -> dict:
    """Bundled defaults, then ``$QLSS_CONFIG``, then ``path``."""
    cfg = json.loads(ir.files("hhllab.data").joinpath("default_config.json").read_text())
    env = os.environ.get(CONFIG_ENV)
    if env:
        cfg = _merge(cfg, _read_json(env))
    if path:
        cfg = _merge(cfg, _read_json(path))
    return cfg


_RESERVED = {"qec", "factory", "rotation_cycles", "solve", "heat", "powerflow", "estimate"}


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    first = parser.parse_args(argv)
    cfg = load_config(first.config)
    sub = parser._subparsers._group_actions[0].choices[first.command]  # noqa: SLF001
    dests = {a.dest for a in sub._actions} | {"seed", "jobs"}
    section = cfg.get(first.command, {})
    unknown = set(section) - dests
    if unknown:
        raise io.ParseError(f"config section {first.command!r}: unknown keys {sorted(unknown)}")
    defaults = {k: v for k, v in cfg.items() if k in dests and k not in _RESERVED}
    defaults.update(section)
    for k in ("nc_range", "nc"):
        if k in defaults and not isinstance(defaults[k], list) and first.command != "solve":
            defaults[k] = parse_range(defaults[k])
    parser.set_defaults(**{k: defaults.pop(k) for k in ("seed", "jobs") if k in defaults})
    sub.set_defaults(**defaults)
    args = parser.parse_args(argv)
    args.cfg = cfg
    return args


# --- commands -----------------------------------------------------------------

def _emit_json(data, path) -> None:
    if path:
        io.write_json(path, data)
    else:
        print(json.dumps(data, indent=2, sort_keys=True))


def cmd_solve(args) -> int:
    a = io.read_matrix(args.matrix)
    b = io.read_vector(args.rhs)
    if a.shape[0] != a.shape[1] or a.shape[0] != b.size:
        raise linalg.SingularMatrixError(f"incompatible shapes: matrix {a.shape}, rhs {b.size}")
    system = linalg.prepare(a, b)
    config = hhl.HHLConfig.for_system(system, args.nc, args.t, args.c_const)
    sol = hhl.solve(system, config)
    print(f"state_error {sol.state_error:.6e}")
    print(f"vector_error {sol.vector_error:.6e}")
    if args.out:
        io.write_json(args.out, sol.to_dict())
    return EXIT_OK


def heat_row(l: int, r: float, n_c: int, forcing=None, t_mode: str = "spectrum") -> tuple:
    system = heat.heat_matrix(heat.HeatSpec(l, r, forcing))
    t = None
    if t_mode == "anchored":
        t = hhl.anchored_time(linalg.metrics(system.a)["eig_min_abs"], n_c, 1)
    config = hhl.HHLConfig.for_system(system, n_c=n_c, t=t)
    circ = hhl.build(system, config)
    sol = hhl.solve(system, config, circ)
    lowered = transforms.decompose(circ)
    st = stats(lowered)
    fused = len(transforms.fuse(lowered).gates)
    total = st["total_gates"]
    return (l, n_c, sol.state_error, sol.vector_error, st["depth"], total, fused, 100.0 * (1 - fused / total))


def _heat_job(a):
    return heat_row(*a)


def cmd_heat(args) -> int:
    lo, hi = HEAT_L_RANGE
    if not lo <= args.l <= hi:
        raise UsageError(f"--l must lie in [{lo}, {hi}] for state-vector simulation")
    forcing = None
    if args.forcing == "random":
        forcing = tuple(np.random.default_rng(args.seed).uniform(0.5, 1.5, args.l ** 2))
    jobs = [(args.l, args.r, n, forcing, args.t_mode) for n in args.nc_range]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_heat_job, jobs))
    else:
        rows = [_heat_job(j) for j in jobs]
    if args.out:
        io.write_csv(args.out, HEAT_COLUMNS, rows)
    else:
        import csv
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(HEAT_COLUMNS)
        w.writerows([[io._cell(v) for v in r] for r in rows])  # noqa: SLF001
    return EXIT_OK


def _case(path):
    if path in (None, "bundled"):
        return powerflow.bundled_case()
    try:
        return powerflow.load_case(path)
    except (KeyError, TypeError) as exc:
        raise io.ParseError(f"{path}: missing or malformed field {exc}") from exc
    except json.JSONDecodeError as exc:
        raise io.ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


def _powerflow_result(case, trace, solver, n_c) -> dict:
    return {
        "solver": solver,
        "n_c": n_c,
        "converged": trace.converged,
        "iterations": trace.iterations_used,
        "final_mismatch": trace.records[-1].mismatch_inf_norm,
        "buses": [{"id": b.id, "kind": b.kind, "v_mag": float(v), "theta": float(t)}
                  for b, v, t in zip(case.buses, trace.v_mag, trace.theta)],
    }


def _write_trace(out: Path, tag: str, trace) -> None:
    io.write_csv(out / f"trace_{tag}.csv", powerflow.NRTrace.CSV_COLUMNS, trace.rows())


def cmd_powerflow(args) -> int:
    case = _case(args.case)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.solver == "classical":
        runs = [(None, hhl.classical_solver)]
    else:
        runs = [(n, hhl.HHLSolver(n_c=n)) for n in (args.nc or [None])]
    status = EXIT_OK
    for n_c, solver in runs:
        tag = args.solver if n_c is None else f"{args.solver}_nc{n_c}"
        try:
            trace = powerflow.nr_solve(case, solver, args.max_iter)
        except powerflow.PowerFlowDiverged as exc:
            _write_trace(out, tag, exc.trace)
            print(f"{tag}: diverged: {exc}", file=sys.stderr)
            status = EXIT_DIVERGED
            continue
        _write_trace(out, tag, trace)
        io.write_json(out / f"voltages_{tag}.json", _powerflow_result(case, trace, args.solver, n_c))
        final = trace.records[-1].mismatch_inf_norm
        print(f"{tag}: converged={trace.converged} iterations={trace.iterations_used} mismatch={final:.3e}")
        if not trace.converged:
            status = EXIT_DIVERGED
    return status


def _estimate_system(args):
    if args.from_heat:
        lo, hi = HEAT_L_RANGE
        if not lo <= args.l <= hi:
            raise UsageError(f"--l must lie in [{lo}, {hi}]")
        return heat.heat_matrix(heat.HeatSpec(args.l, args.r))
    case = _case(args.from_powerflow)
    return powerflow.jacobian(case)


def cmd_estimate(args) -> int:
    qp = resources.qubit_preset(args.qubits)
    qec, factory, rot = resources.specs_from_config(args.cfg)
    budget = resources.ErrorBudget(args.budget)
    if args.circuit:
        circ = transforms.decompose(load_circuit(args.circuit))
        report = resources.estimate(circ, qp, qec, factory, budget, rot).to_dict()
        report.update(qubits=args.qubits, budget=args.budget)
        _emit_json(report, args.out)
        return EXIT_OK
    system = _estimate_system(args)
    sweep = resources.sweep_nc(system, args.nc, qp, qec, factory, budget, args.jobs, rot)
    reports = []
    for n, r in sweep.reports.items():
        d = r.to_dict()
        d.update(n_c=n, qubits=args.qubits, budget=args.budget)
        reports.append(d)
    if len(reports) == 1:
        _emit_json(reports[0], args.out)
    else:
        _emit_json({"reports": reports, "fits": sweep.fits}, args.out)
    if args.sweep_out:
        io.write_csv(args.sweep_out, resources.SWEEP_COLUMNS, sweep.rows)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "heat": cmd_heat, "powerflow": cmd_powerflow, "estimate": cmd_estimate}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (io.ParseError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (linalg.SingularMatrixError, linalg.NotHermitianError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except ZeroProbabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ZERO_PROB
    except (transforms.UndecomposableError, resources.NotDecomposedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDECOMPOSABLE
    except ValueError as exc:  # remaining validation failures in user input
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
