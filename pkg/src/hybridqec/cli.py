"""``hybridqec`` command line: compile, simulate, switch-ler, memory-ler, analyze, vqa.

Every JSON output is ``{"manifest": ..., "result": ...}``; the manifest holds
the subcommand, flags, seed, a hash of the inputs and a timestamp. Exit codes:
0 ok, 2 usage (bad flags, missing files), 3 validation, 4 infeasible,
5 internal error. ``HYBRIDQEC_WORKERS`` sets the default worker count for
Monte Carlo sweeps.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4, 5
SOURCE_PREFIX = "#@ "
OUTPUT_FLAGS = ("out", "csv", "stats")


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


def _floats(text: str) -> list[float]:
    """``1e-3``, ``1e-4,1e-3`` or a log range ``1e-4..1e-2[:n]``."""
    if ".." in text:
        span, _, count = text.partition(":")
        lo, hi = (float(v) for v in span.split(".."))
        n = int(count) if count else 5
        if lo <= 0 or hi <= 0 or n < 1:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        return [float(v) for v in np.geomspace(lo, hi, n)]
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p.read_text()


def manifest(args: argparse.Namespace, inputs: dict[str, str] | None = None) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    hashed = {k: v for k, v in flags.items() if k not in OUTPUT_FLAGS}
    h = hashlib.sha256(json.dumps(hashed, sort_keys=True, default=str).encode())
    for name, text in sorted((inputs or {}).items()):
        h.update(name.encode())
        h.update(text.encode())
    return {
        "subcommand": args.command,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "input_hash": h.hexdigest(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "version": __version__,
    }


def _dump(obj) -> str:
    def default(o):
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, float) and math.isinf(o):
            return None
        return str(o)

    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def _emit(args, result, inputs=None, path: str | None = None) -> None:
    text = _dump({"manifest": manifest(args, inputs), "result": result})
    target = path if path is not None else getattr(args, "out", None)
    if target:
        Path(target).write_text(text)
    else:
        sys.stdout.write(text)


def _write_csv(path: str, rows: list[dict]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    keys = [k for k in rows[0] if not isinstance(rows[0][k], (dict, list))]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def _workers(args) -> int:
    if getattr(args, "workers", None):
        return args.workers
    return max(1, int(os.environ.get("HYBRIDQEC_WORKERS", "1")))


# -- subcommands -----------------------------------------------------------------


def cmd_compile(args) -> int:
    from .compiler import RoutingConfig, compile_circuit, parse_circuit
    from .isa import serialize, validate
    from .qccd import QccdLayout

    text = _read(args.circuit)
    circ = parse_circuit(text)
    layout = None
    inputs = {"circuit": text}
    if args.layout:
        inputs["layout"] = _read(args.layout)
        layout = QccdLayout.load(args.layout)
    res = compile_circuit(circ, args.max_logic, d=args.d, layout=layout,
                          config=RoutingConfig(args.lookahead, args.extended_weight, args.config),
                          proactive=args.proactive)
    diags = validate(res.program)
    if diags:
        raise ValidationFailure("; ".join(map(str, diags)))
    source = "".join(f"{SOURCE_PREFIX}{line}\n" for line in circ.to_qasm().splitlines())
    Path(args.out).write_text(serialize(res.program) + "# source circuit\n" + source)
    stats = res.stats()
    if args.stats:
        _emit(args, stats, inputs, args.stats)
    else:
        print(f"n2={stats['n2']} nc={stats['nc']} instructions={len(res.program)} -> {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .compiler import parse_circuit
    from .execute import execute_program, matches_direct
    from .isa import parse, validate
    from .qccd import QccdLayout

    text = _read(args.program)
    prog = parse(text)
    layout = QccdLayout.load(args.layout) if args.layout else None
    diags = validate(prog, layout)
    if diags:
        raise ValidationFailure("; ".join(map(str, diags)))
    res = execute_program(prog, layout, seed=args.seed, qec_rounds=args.qec_rounds)
    out = {
        "instructions": len(prog), "encodes": res.encodes, "shrinks": res.shrinks,
        "z_fixes": res.z_fixes, "x_fixes": res.x_fixes,
        "cost": res.machine.cost.to_dict(), "num_ions": res.machine.num_ions,
    }
    inputs = {"program": text}
    if args.verify:
        if args.circuit:
            src = _read(args.circuit)
        else:
            src = "\n".join(line[len(SOURCE_PREFIX):] for line in text.splitlines() if line.startswith(SOURCE_PREFIX))
            if not src:
                raise UsageError("--verify needs --circuit or a program written by 'compile'")
        inputs["circuit"] = src
        circ = parse_circuit(src)
        ok = matches_direct(res, circ)
        out["verified"] = ok
        if not ok:
            _emit(args, out, inputs)
            raise ValidationFailure("compiled program does not reproduce the input circuit's state")
    _emit(args, out, inputs)
    return EXIT_OK


def _switch_point(job):
    from .circuit import NoiseSpec
    from .encoding import conversion_ler

    d, p2, config, direction, shots, seed, decoder, p_meas = job
    noise = NoiseSpec.trapped_ion(p2=p2, p_meas=p_meas)
    est = conversion_ler(d, config, noise, shots, direction=direction, seed=seed, decoder=decoder)
    return {"d": d, "p2": p2, "config": config, "direction": direction, **est.to_dict()}


def cmd_switch_ler(args) -> int:
    from .encoding import CONFIG_NAMES, DIRECTIONS

    for c in args.config:
        if c not in CONFIG_NAMES:
            raise UsageError(f"unknown config {c!r}; choose from {sorted(CONFIG_NAMES)}")
    if args.direction not in DIRECTIONS:
        raise UsageError(f"unknown direction {args.direction!r}")
    for d in args.d:
        if d < 3 or d % 2 == 0:
            raise ValidationFailure(f"distance {d} must be odd and >= 3")
    jobs = [(d, p2, c, args.direction, args.shots, args.seed + 1000 * i, args.decoder, args.p_meas)
            for i, (c, d, p2) in enumerate((c, d, p) for c in args.config for d in args.d for p in args.p2)]
    rows = _run_jobs(_switch_point, jobs, _workers(args))
    if args.csv:
        _write_csv(args.csv, rows)
    _emit(args, {"rows": rows})
    return EXIT_OK


def _memory_point(job):
    from .circuit import NoiseSpec
    from .surface import build_patch, memory_experiment

    d, p2, rounds, shots, seed, decoder, basis, p_meas = job
    noise = NoiseSpec.trapped_ion(p2=p2, p_meas=p_meas)
    est = memory_experiment(build_patch(d), rounds or d, noise, shots, basis=basis, seed=seed, decoder=decoder)
    return {"d": d, "p2": p2, "rounds": rounds or d, "basis": basis, **est.to_dict()}


def cmd_memory_ler(args) -> int:
    for d in args.d:
        if d < 3 or d % 2 == 0:
            raise ValidationFailure(f"distance {d} must be odd and >= 3")
    jobs = [(d, p2, args.rounds, args.shots, args.seed + 1000 * i, args.decoder, args.basis, args.p_meas)
            for i, (d, p2) in enumerate((d, p) for d in args.d for p in args.p2)]
    rows = _run_jobs(_memory_point, jobs, _workers(args))
    if args.csv:
        _write_csv(args.csv, rows)
    _emit(args, {"rows": rows})
    return EXIT_OK


def _run_jobs(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, jobs))


def cmd_analyze(args) -> int:
    from .analysis import report

    _emit(args, report(n=args.n, d=args.d, p2=args.p2, pL=args.pL, pc=args.pc, t=args.t))
    return EXIT_OK


def cmd_vqa(args) -> int:
    from .vqa import CliffordAnsatz, GaConfig, NoiseModel, conversion_profile, hamiltonian_from_spec, run_ga

    inputs = {}
    if not args.ham.startswith(("ising", "heisenberg")):
        inputs["ham"] = _read(args.ham)
    ham = hamiltonian_from_spec(args.ham)
    ansatz = CliffordAnsatz(ham.n, layers=args.layers, span=args.span)
    model = NoiseModel(args.model, p1=args.p1, p2=args.p2, max_logic=args.max_logic)
    run = run_ga(ham, model, args.generations, args.seed, ansatz, GaConfig(population=args.population))
    result = run.to_dict()
    result["conversions"] = conversion_profile(ansatz, args.max_logic)
    result["num_params"] = ansatz.num_params
    _emit(args, result, inputs)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hybridqec", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compile", help="circuit -> .hisa program")
    p.add_argument("--circuit", required=True)
    p.add_argument("--layout")
    p.add_argument("--max-logic", type=int, default=2)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--out", required=True)
    p.add_argument("--stats")
    p.add_argument("--config", default="center:triangles")
    p.add_argument("--lookahead", type=int, default=20)
    p.add_argument("--extended-weight", type=float, default=0.5)
    p.add_argument("--proactive", action="store_true")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("simulate", help="run a .hisa program at zero noise")
    p.add_argument("--program", required=True)
    p.add_argument("--layout")
    p.add_argument("--circuit")
    p.add_argument("--verify", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--qec-rounds", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("switch-ler", help="conversion logical error rates")
    p.add_argument("--d", type=_ints, default=[3, 5, 7])
    p.add_argument("--p2", type=_floats, default=[1e-3])
    p.add_argument("--p-meas", type=float, default=1e-4)
    p.add_argument("--config", type=lambda s: s.split(","), default=["center"])
    p.add_argument("--direction", default="enlarge")
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--decoder", default="mwpm", choices=["uf", "mwpm"])
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_switch_ler)

    p = sub.add_parser("memory-ler", help="memory-experiment logical error rates")
    p.add_argument("--d", type=_ints, default=[3, 5])
    p.add_argument("--p2", type=_floats, default=[1e-3])
    p.add_argument("--p-meas", type=float, default=1e-4)
    p.add_argument("--rounds", type=int, default=None, help="default: d")
    p.add_argument("--basis", default="Z", choices=["X", "Z"])
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--decoder", default="mwpm", choices=["uf", "mwpm"])
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_memory_ler)

    p = sub.add_parser("analyze", help="closed-form error and budget report")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--d", type=int, default=9)
    p.add_argument("--p2", type=float, default=1e-3)
    p.add_argument("--pL", type=float, default=1e-6)
    p.add_argument("--pc", type=float, default=4.3e-3)
    p.add_argument("--t", type=float, default=31.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("vqa", help="genetic VQA run under a noise model")
    p.add_argument("--ham", default="ising:n=10")
    p.add_argument("--model", default="ideal", choices=["ideal", "nisq", "selective", "flexion", "msd"],
                   help="flexion is an alias of selective")
    p.add_argument("--generations", type=int, default=150)
    p.add_argument("--population", type=int, default=64)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--span", type=int, default=None)
    p.add_argument("--max-logic", type=int, default=None)
    p.add_argument("--p1", type=float, default=1e-6)
    p.add_argument("--p2", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_vqa)
    return ap


def main(argv=None) -> int:
    from .analysis import AnalysisError
    from .circuit import CircuitError
    from .compiler import CompileError, InfeasibleError
    from .decoder import DecodingError, HyperedgeError
    from .execute import ExecutionError
    from .isa import IsaParseError
    from .qccd import QccdError
    from .vqa import VqaError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hybridqec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, HyperedgeError) as exc:
        print(f"hybridqec: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except AnalysisError as exc:
        code = EXIT_INFEASIBLE if "cannot host" in str(exc) else EXIT_VALIDATION
        print(f"hybridqec: {exc}", file=sys.stderr)
        return code
    except QccdError as exc:
        code = EXIT_INFEASIBLE if exc.rule == "D" else EXIT_VALIDATION
        print(f"hybridqec: {exc}", file=sys.stderr)
        return code
    except (ValidationFailure, IsaParseError, CompileError, CircuitError, ExecutionError, VqaError,
            DecodingError, ValueError) as exc:
        print(f"hybridqec: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        print(f"hybridqec: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
