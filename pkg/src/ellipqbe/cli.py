"""Command-line interface: synth, verify, estimate, succprob, solve, export.

Exit codes: 0 success, 1 schema error, 2 verification failure, 3 resource ceiling.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import analysis as an
from . import fd_reference as fd
from .block_encoding import EXTRACT_SYSTEM_CEILING, BlockEncoding, EncodingError
from .circuit import CircuitError, from_text, to_text

EXIT_SCHEMA, EXIT_VERIFY, EXIT_CEILING = 1, 2, 3
HEADER = "# ellipqbe-encoding "

FORCINGS = {
    "sin_pi": lambda *x: np.pi**2 * np.sin(np.pi * x[0]),
    "cos_pi": lambda *x: np.pi**2 * np.cos(np.pi * x[0]),
    "sincos": lambda *x: np.sin(2 * np.pi * x[0]) * np.cos(2 * np.pi * x[1]),
    "constant": lambda *x: np.ones_like(np.asarray(x[0], dtype=float)),
}


def _load_spec(path: str | None) -> dict:
    text = sys.stdin.read() if path in (None, "-") else open(path).read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise an.SchemaError(f"invalid JSON: {exc}") from exc


def _rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    keys = list(rows[0]) if rows else []
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(v) if isinstance(v, (dict, list)) else v for k, v in r.items()})
    return buf.getvalue()


def _render(obj: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"
    if fmt == "csv":
        return _rows_to_csv([obj])
    lines = []
    for k in sorted(obj):
        v = obj[k]
        lines.append(f"{k}: {json.dumps(v, default=float) if isinstance(v, (dict, list)) else v}")
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _encoding_from_text(text: str) -> BlockEncoding:
    meta = None
    for ln in text.splitlines():
        if ln.startswith(HEADER):
            meta = json.loads(ln[len(HEADER) :])
            break
    if meta is None:
        raise an.SchemaError("circuit file lacks the encoding header")
    c = from_text(text)
    return BlockEncoding(c, float(meta["lambda"]), int(meta["system_qubits"]), int(meta["work_qubits"]),
                         meta.get("descriptor", ""))


# ----------------------------------------------------------------------------
# Commands


def cmd_synth(args, problem):
    be = an.build_encoding(problem)
    meta = {"format_version": an.FORMAT_VERSION, "lambda": be.lam, "system_qubits": be.system_qubits,
            "work_qubits": be.work_qubits, "descriptor": be.descriptor, "spec": problem.to_dict()}
    _emit(HEADER + json.dumps(meta, sort_keys=True) + "\n" + to_text(be.circuit), args.out)
    return 0


def cmd_verify(args, problem):
    be = None
    if args.circuit:
        be = _encoding_from_text(open(args.circuit).read())
    rep = an.verify(problem, be, args.tolerance, args.ceiling)
    _emit(_render(rep, args.format), args.out)
    return 0 if rep["passed"] else EXIT_VERIFY


def cmd_estimate(args, problem):
    rep = an.resource_table(problem)
    _emit(_render(rep.to_dict(), args.format), args.out)
    return 0


def cmd_succprob(args, problem):
    g = problem.grid
    be = an.build_encoding(problem)
    an.check_ceiling(be, args.ceiling)
    rhs = problem.raw.get("rhs")
    if rhs is not None:
        rhs = np.asarray(rhs, dtype=complex)
        rhs = rhs / np.linalg.norm(rhs)
    out = {"format_version": an.FORMAT_VERSION, "measured": an.success_prob_measured(problem, rhs, be)}
    if rhs is None and problem.operator == "laplacian":
        ana = an.success_prob_analytic(g.d * g.eta, g.N)
        out.update(analytic_finite_N=ana["finite_N"], analytic_large_N=ana["large_N"],
                   finite_N_caveat=ana["finite_N_caveat"])
    _emit(_render(out, args.format), args.out)
    return 0


def _forcing(raw: dict, d: int):
    f = raw.get("forcing", "sin_pi")
    if isinstance(f, list):
        return np.asarray(f, dtype=float)
    if f not in FORCINGS:
        raise an.SchemaError(f"unknown forcing {f!r}; expected a list or one of {sorted(FORCINGS)}")
    if f == "sincos" and d < 2:
        raise an.SchemaError("the sincos forcing needs d >= 2")
    return FORCINGS[f]


def cmd_solve(args, problem):
    raw = problem.raw
    if "convergence" in raw:
        c = raw["convergence"]
        rep = an.convergence_report(c["family"], c.get("ns", range(4, 9)), int(c.get("a", 2)))
        if args.format == "csv":
            rows = [{"N": N, "error": e} for N, e in zip(rep["N"], rep["errors"])]
            _emit(_rows_to_csv(rows) + f"# slope={rep['slope']}\n", args.out)
        else:
            _emit(_render(rep, args.format), args.out)
        return 0
    g = problem.grid
    N = g.N
    if g.N ** (g.d * g.eta) > fd.DENSE_LIMIT or g.n * g.d * g.eta > args.ceiling:
        raise an.ResourceCeilingError("problem exceeds the dense solve ceiling")
    f = _forcing(raw, g.d)
    if problem.operator == "masked":
        _, u = _projection(problem, f)
    elif problem.operator == "laplacian":
        r = problem.request
        bcs = list(r.bc)
        axes = [_axis_grid(b.kind, N) for b in bcs] * g.eta
        A = -fd.assemble_dd([fd.laplacian_matrix_1d(g.n, r.a, b).entries / h**2
                             for b, (_, h) in zip(bcs, axes)], g.d, g.eta).entries
        x = np.arange(N ** (g.d * g.eta))
        pts = [nodes[(x // N**k) % N] for k, (nodes, _) in enumerate(axes)]
        b = f(*pts) if callable(f) else f
        u = fd.solve_bvp(A, b, lstsq_fallback=True)
    else:
        raise an.SchemaError("solve supports laplacian and masked problems, or a convergence study")
    R = g.d * g.eta
    rows = [{**{f"x{k}": int((i // N**k) % N) for k in range(R)}, "u": float(v)} for i, v in enumerate(u)]
    _emit(_rows_to_csv(rows) if args.format != "json" else
          json.dumps({"format_version": an.FORMAT_VERSION, "u": [float(v) for v in u]}) + "\n", args.out)
    return 0


def _axis_grid(kind: str, N: int):
    """Node positions and spacing on [0, 1] for one axis."""
    if kind == "dirichlet":
        return np.arange(1, N + 1) / (N + 1), 1 / (N + 1)
    if kind == "neumann":
        return (np.arange(N) + 0.5) / N, 1 / N
    return np.arange(N) / N, 1 / N


def _projection(problem, f):
    from .domain import projection_reference

    r = problem.request
    g = r["grid"]
    return projection_reference(r["membership"], g.n, g.d, f)


def cmd_export(args, problem):
    g = problem.grid
    if g.n * g.d * g.eta > args.ceiling or g.N ** (g.d * g.eta) > fd.DENSE_LIMIT:
        raise an.ResourceCeilingError("operator exceeds the dense export ceiling")
    A = an.reference_operator(problem)
    if args.format == "csv":
        _emit(fd.export_csv(A), args.out)
    else:
        obj = fd.export_sparse(A)
        obj["format_version"] = an.FORMAT_VERSION
        _emit(json.dumps(obj) + "\n", args.out)
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "verify": cmd_verify,
    "estimate": cmd_estimate,
    "succprob": cmd_succprob,
    "solve": cmd_solve,
    "export": cmd_export,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ellipqbe", description="Block encodings of discretized elliptic operators.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--spec", help="JSON problem spec (default: stdin)")
        s.add_argument("--out", help="output file (default: stdout)")
        s.add_argument("--tolerance", type=float, default=None)
        s.add_argument("--ceiling", type=int, default=EXTRACT_SYSTEM_CEILING,
                       help="largest system width to extract or densify")
        s.add_argument("--format", choices=("json", "csv", "text"), default="json")
        if name == "verify":
            s.add_argument("--circuit", help="verify a circuit written by synth instead of re-synthesizing")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        problem = an.ProblemSpec.from_dict(_load_spec(args.spec))
        return COMMANDS[args.command](args, problem)
    except an.ResourceCeilingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CEILING
    except (an.SchemaError, fd.OperatorError, EncodingError, CircuitError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
