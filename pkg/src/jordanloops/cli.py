"""Command-line entry point.

Every subcommand prints plain text (or CSV) to standard output.  With
``--out PATH`` the same content goes to a file and a JSON manifest with the
run configuration and a SHA-256 of the payload is written next to it as
``PATH.json``.  Relative output paths are resolved against
``$JORDANLOOPS_OUTPUT_DIR`` when that variable is set.

Exit codes: 0 success, 1 invalid input or unresolved domain condition,
2 numerical failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import re
import sys
from dataclasses import replace

import numpy as np

from .algebra import assemble, parse_generator
from .analysis import (
    HEADER,
    MODULES,
    PAIRS,
    VERSION,
    ScanPlan,
    c_grid,
    extrapolate,
    format_number,
    parse_plan,
    run_scan,
    theory_b,
    write_scan,
)
from .basis import ModuleSpec, build_basis, format_state
from .characters import multiplicity_D, partition_terms
from .errors import InvalidArgument, JordanLoopsError, NumericalFailure
from .inner import gram
from .jordan import default_c_sequence, measure_b_Tt_limit
from .koosaleur import LEFT, RIGHT, h0, h_n, hamiltonian_unscaled, koo_saleur, momentum_operator
from .params import CONVENTIONS, NEGATED, LatticeParams, param_from_c
from .spectral import block_by_momentum, eigendecompose, identify_fields

OUTPUT_DIR_ENV = "JORDANLOOPS_OUTPUT_DIR"
EX_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- shared helpers -------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _add_params(p: argparse.ArgumentParser, required: bool = True) -> None:
    group = p.add_mutually_exclusive_group(required=required)
    group.add_argument("--c", type=float, help="central charge, c < 1")
    group.add_argument("--x", type=float, help="Kac parameter, x > 0")
    group.add_argument("--m", type=float, help="loop weight")
    p.add_argument("--e-inf", type=float, default=None, help="override e_inf (with --m: free symbolic matrices)")
    p.add_argument("--convention", choices=CONVENTIONS, default=NEGATED)
    p.add_argument("--y", type=float, default=1.0)


def _params(args) -> LatticeParams:
    if args.c is not None:
        params = LatticeParams.from_c(args.c, args.convention, args.y)
    elif args.x is not None:
        params = LatticeParams.from_x(args.x, args.convention, args.y)
    elif args.e_inf is not None:
        return LatticeParams.symbolic(args.m, args.e_inf, args.convention, args.y)
    else:
        return LatticeParams.from_loop_weight(args.m, args.convention, args.y)
    if args.e_inf is not None:
        params = replace(params, e_inf=args.e_inf)
    return params


def _params_dict(params: LatticeParams) -> dict:
    return {
        "m": params.m,
        "e_inf": params.e_inf,
        "v_F": params.v_F,
        "c": params.c,
        "x": params.x,
        "convention": params.convention,
        "y": params.y,
    }


def _resolve(path: str) -> str:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def _emit(text: str, args, config: dict) -> None:
    """Print ``text`` or write it with a manifest when ``--out`` is given."""
    out = getattr(args, "out", None)
    if not out:
        sys.stdout.write(text)
        return
    path = _resolve(out)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    manifest = {
        "tool": "jordanloops",
        "version": VERSION,
        "command": args.command,
        "config": config,
        "sha256": hashlib.sha256(text.encode()).hexdigest(),
    }
    with open(path + ".json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    print(f"wrote {path}")


def _rounded(v: float) -> float:
    return float(format_number(v))


def _matrix_text(mat: np.ndarray, fmt: str, header: dict) -> str:
    if fmt == "json":
        rows = [[[_rounded(z.real), _rounded(z.imag)] for z in row] for row in mat]
        payload = dict(header, shape=list(mat.shape), data=rows)
        return json.dumps(payload, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", "re", "im"])
    for (r, c), z in np.ndenumerate(mat):
        if z != 0:
            w.writerow([r + 1, c + 1, format_number(z.real), format_number(z.imag)])
    return buf.getvalue()


def _basis_from(args):
    order = "appendix" if getattr(args, "appendix_order", False) else "default"
    return build_basis(ModuleSpec.parse(args.module), args.N, order)


# -- subcommands ----------------------------------------------------------------


def cmd_basis(args) -> int:
    basis = _basis_from(args)
    if args.json:
        text = json.dumps(basis.to_json(), indent=1) + "\n"
    else:
        text = "".join(f"{format_state(s)}\n" for s in basis.states)
    _emit(text, args, basis.to_json() | {"states": len(basis)})
    return 0


def _operator_matrix(args, basis, params) -> tuple[str, np.ndarray]:
    name = args.operator
    if name == "H":
        return "H", hamiltonian_unscaled(basis, params).data
    if name == "H0":
        return "H0", h0(basis, params).data
    if name == "Ln":
        op = koo_saleur(args.n, RIGHT if args.antichiral else LEFT, basis, params)
        return op.label, op.data
    if name == "Hn":
        op = h_n(args.n, basis, params)
        return op.label, op.data
    kind, val = parse_generator(name, basis.n_sites)
    op = assemble((kind, val), basis, params)
    return op.label, op.data


def cmd_op(args) -> int:
    basis = _basis_from(args)
    params = _params(args)
    label, mat = _operator_matrix(args, basis, params)
    header = {"N": args.N, "module": str(basis.spec), "order": basis.order, "operator": label}
    _emit(_matrix_text(mat, args.format, header), args, header | {"params": _params_dict(params)})
    return 0


def cmd_gram(args) -> int:
    basis = _basis_from(args)
    params = _params(args)
    g = gram(basis, args.kind, params)
    header = {"N": args.N, "module": str(basis.spec), "order": basis.order, "product": args.kind}
    _emit(_matrix_text(g.data, args.format, header), args, header | {"params": _params_dict(params)})
    return 0


def _relative_labels(data, n_sites: int) -> None:
    ground = min(data, key=lambda d: d.eigenvalue.real).momentum
    for d in data:
        q = (d.momentum - ground) % n_sites
        d.momentum = q - n_sites if q > n_sites // 2 else q


def _tag_lookup(args, params, basis, data) -> dict[int, str]:
    """Index of the datum carrying each field tag, matched by eigenvector overlap."""
    if not args.tags:
        return {}
    names = tuple(t.strip() for t in args.tags.split(",") if t.strip())
    found = identify_fields(args.N, params, names)
    out: dict[int, str] = {}
    for name, tag in found.items():
        if not tag or tag.basis is None or tag.basis.spec != basis.spec:
            continue
        # inside a degenerate cluster the tagged vector is a combination of
        # listed eigenvectors; the largest overlap picks one representative
        v = tag.datum.eigenvector
        k = max(range(len(data)), key=lambda i: abs(np.vdot(v, data[i].eigenvector)))
        out[k] = f"{out[k]}+{name}" if k in out else name
    return out


def cmd_spectrum(args) -> int:
    basis = _basis_from(args)
    params = _params(args)
    label, mat = _operator_matrix(args, basis, params)
    L = args.N // 2
    tau = momentum_operator(basis, params)
    power = 2 if tau.label != "tau" else 1
    try:
        data = block_by_momentum(mat, tau.data, args.N, power)
        _relative_labels(data, args.N)
    except InvalidArgument:
        data = list(eigendecompose(mat))
    tags = _tag_lookup(args, params, basis, data)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "c", "module", "p", "re_lambda", "h_plus_hbar", "tag"])
    for k, d in enumerate(data):
        lam = d.eigenvalue
        if label == "H0":
            weight = format_number(lam.real)
        elif label == "H":
            weight = format_number((L / (math.pi * params.v_F)) * lam.real + params.c / 12.0)
        else:
            weight = ""
        p = "" if d.momentum is None else d.momentum
        w.writerow([args.N, format_number(params.c), str(basis.spec), p, format_number(lam.real), weight, tags.get(k, "")])
    config = {"N": args.N, "module": str(basis.spec), "operator": label, "params": _params_dict(params)}
    _emit(buf.getvalue(), args, config)
    return 0


def _c_values(args, pair) -> tuple[float, ...]:
    if args.grid is not None:
        return tuple(c_grid(args.grid, exclude_zero=pair == ("T", "Tprime")))
    if args.c is None:
        raise InvalidArgument("give --c values or --grid DIVISOR")
    return tuple(float(v) for v in args.c.split(","))


def _scan_cmd(args, measure: str) -> int:
    pair = tuple(s.strip() for s in args.pair.split(","))
    if pair not in PAIRS:
        raise InvalidArgument(f"unknown pair {args.pair!r}; choose one of {sorted(','.join(p) for p in PAIRS)}")
    plan = ScanPlan(
        measure=measure,
        pair=pair,
        sizes=tuple(args.N),
        c_values=_c_values(args, pair),
        convention=args.convention,
        y=args.y,
        chiral=getattr(args, "chiral", False),
        jobs=args.jobs,
    )
    table = run_scan(plan)
    text = table.to_csv()
    _emit(text, args, plan.to_dict() | {"module": MODULES[pair]})
    return 0


def cmd_jscan(args) -> int:
    return _scan_cmd(args, "J")


def cmd_bmeasure(args) -> int:
    return _scan_cmd(args, "b")


def cmd_btt(args) -> int:
    cs = default_c_sequence(range(args.k_min, args.k_max + 1))
    lines = []
    results = []
    for n in args.N:
        lim = measure_b_Tt_limit(n, cs, args.degree, args.tolerance, args.chiral)
        results.append(lim)
        lines.append(f"N = {n}  L = {lim.L}")
        lines.append(f"b = {format_number(lim.b)}")
        lines.append(f"  b1 limit = {format_number(lim.b1_limit.real)}  b2 limit = {format_number(lim.b2_limit.real)}")
        lines.append(f"  |b1 - b2| = {format_number(lim.gap)}  fit residual = {format_number(lim.residual)}")
        lines.append(f"  sensitivity (drop outermost pair) = {format_number(lim.sensitivity)}")
        lines.append("  c, b1, b2")
        for c, b1, b2 in sorted(lim.samples, key=lambda s: s[0]):
            lines.append(f"  {format_number(c)}, {format_number(b1.real)}, {format_number(b2.real)}")
    config = {"N": list(args.N), "c_sequence": cs, "degree": args.degree, "tolerance": args.tolerance}
    _emit("\n".join(lines) + "\n", args, config | {"b": [r.b for r in results]})
    return 0


def cmd_chars(args) -> int:
    if args.x is None and args.c is None:
        raise InvalidArgument("give --x or --c")
    x = args.x if args.x is not None else param_from_c(args.c)
    lines = [f"x = {format_number(x)}"]
    if args.check_D10:
        d = multiplicity_D(1, 0.0, x)
        lines.append(f"D_1,0 = {format_number(d)}")
    if args.D:
        j, K = args.D
        lines.append(f"D_{int(j)},{format_number(K)} = {format_number(multiplicity_D(int(j), K, x))}")
    payload = []
    if args.cutoff is not None:
        lines.append("term, coefficient, h, hbar, multiplicity")
        for t in partition_terms(x, args.cutoff):
            monos = t.series.collect(args.cutoff)
            entry = {"term": t.label, "coefficient": t.coefficient, "monomials": []}
            for (h, hb), a in monos.items():
                lines.append(f"{t.label}, {format_number(t.coefficient)}, {format_number(h)}, {format_number(hb)}, {format_number(a)}")
                entry["monomials"].append([h, hb, a])
            payload.append(entry)
    text = json.dumps({"x": x, "terms": payload}, indent=1) + "\n" if args.json else "\n".join(lines) + "\n"
    _emit(text, args, {"x": x, "cutoff": args.cutoff})
    return 0


def cmd_scan(args) -> int:
    with open(args.plan) as fh:
        plan = parse_plan(fh.read())
    table = run_scan(plan, args.jobs)
    text = table.to_csv()
    if args.out:
        path = _resolve(args.out)
        write_scan(table, path)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    return 0


def _read_series(path: str, which: str) -> dict[tuple[str, float], list[tuple[int, float]]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(HEADER) - set(rows[0]):
        raise InvalidArgument(f"{path} is not a scan table")
    column = which if which == "J" else f"{which}_re"
    out: dict[tuple[str, float], list[tuple[int, float]]] = {}
    for r in rows:
        if r["marker"] or r[column] in ("", "nan"):
            continue
        out.setdefault((r["pair"], float(r["c"])), []).append((int(r["N"]) // 2, float(r[column])))
    return out


def cmd_extrapolate(args) -> int:
    if args.values:
        pts = []
        for item in args.values.split(","):
            L, y = item.split(":")
            pts.append((float(L), float(y)))
        series = {("values", float("nan")): pts}
    elif args.csv:
        series = _read_series(args.csv, args.which)
    else:
        raise InvalidArgument("give --csv TABLE or --values L:y,...")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["pair", "c", "points", "limit", "residual", "sensitivity", "theory"])
    for (pair, c), pts in sorted(series.items()):
        limit, diag = extrapolate(pts, args.degree)
        theory = ""
        kind = PAIRS.get(tuple(pair.split(",")))
        if args.which == "b1" and isinstance(kind, tuple) and c < 1:
            x = param_from_c(c)
            theory = format_number(theory_b(kind, x))
        w.writerow([pair, format_number(c), diag.n_points, format_number(limit), format_number(diag.residual), format_number(diag.sensitivity), theory])
    _emit(buf.getvalue(), args, {"source": args.csv, "which": args.which, "degree": args.degree})
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jordanloops", description="Emerging Jordan blocks in periodic loop-model chains.")
    parser.add_argument("--version", action="version", version=f"jordanloops {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, params: bool = True, module: str | None = "glued-quotient:2"):
        p.add_argument("--N", type=int, required=True, help="number of sites (even)")
        if module is not None:
            p.add_argument("--module", default=module, help="standard:J[:PHI] | quotient-zero | glued:J | glued-quotient:J")
            p.add_argument("--appendix-order", action="store_true", help="ascending sectors, wrapping arc first")
        if params:
            _add_params(p)
        p.add_argument("--out", help="write to a file (plus PATH.json manifest)")

    p = sub.add_parser("basis", help="list link states")
    common(p, params=False)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_basis)

    for name, func in (("op", cmd_op), ("spectrum", cmd_spectrum)):
        p = sub.add_parser(name, help="operator matrix" if name == "op" else "eigenvalues with momentum labels")
        common(p)
        p.add_argument("--operator", default="H0" if name == "spectrum" else "H", help="H, H0, Ln, Hn, e<k> or tau[^k]")
        p.add_argument("--n", type=int, default=0, help="mode index for Ln / Hn")
        p.add_argument("--antichiral", action="store_true", help="Lbar_n instead of L_n")
        if name == "op":
            p.add_argument("--format", choices=("csv", "json"), default="csv")
            p.set_defaults(func=cmd_op)
        else:
            p.add_argument("--tags", help="comma-separated field tags to mark in the output")
            p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("gram", help="Gram matrix of a scalar product")
    common(p)
    p.add_argument("--kind", choices=("loop", "euclidean"), default="loop")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_gram)

    for name, func in (("jscan", cmd_jscan), ("bmeasure", cmd_bmeasure)):
        p = sub.add_parser(name, help="J measure scan" if name == "jscan" else "indecomposability parameter scan")
        p.add_argument("--N", type=_int_list, required=True, help="comma-separated sizes")
        p.add_argument("--pair", default="alpha,beta", help="alpha,beta | mu,nu | T,Tprime")
        p.add_argument("--c", help="comma-separated central charges")
        p.add_argument("--grid", type=int, help="use the c grid k*pi/DIVISOR instead of --c")
        p.add_argument("--convention", choices=CONVENTIONS, default=NEGATED)
        p.add_argument("--y", type=float, default=1.0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out")
        if name == "bmeasure":
            p.add_argument("--chiral", action="store_true", help="use L_{-n} instead of H_{-n}")
        p.set_defaults(func=func)

    p = sub.add_parser("btt", help="b(T,t) as c -> 0 in the glued quotient")
    p.add_argument("--N", type=_int_list, required=True)
    p.add_argument("--k-min", type=int, default=3, help="smallest k in c = +-pi 10^-k")
    p.add_argument("--k-max", type=int, default=8)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--tolerance", type=float, default=1e-6, help="allowed |b1 - b2| at the limit")
    p.add_argument("--chiral", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_btt)

    p = sub.add_parser("chars", help="character and multiplicity arithmetic")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--x", type=float)
    group.add_argument("--c", type=float)
    p.add_argument("--check-D10", action="store_true", help="print D_{1,0}")
    p.add_argument("--D", type=float, nargs=2, metavar=("J", "K"), help="print D_{J,K}")
    p.add_argument("--cutoff", type=float, help="list partition-function monomials up to this weight")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_chars)

    p = sub.add_parser("scan", help="run a plan file")
    p.add_argument("plan")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", help="CSV path; the manifest goes to PATH.json")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("extrapolate", help="polynomial extrapolation in 1/L")
    p.add_argument("--csv", help="scan table")
    p.add_argument("--values", help="L:y pairs, comma-separated")
    p.add_argument("--which", choices=("J", "b1", "b2"), default="b1")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_extrapolate)
    return parser


_NEGATIVE_VALUE = re.compile(r"^-[\d.]")
_VALUE_FLAGS = ("--c", "--x", "--m", "--e-inf", "--values", "--y")


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Turn ``--c -1,-0.5`` into ``--c=-1,-0.5`` so lists of negatives parse."""
    out = []
    i = 0
    while i < len(argv):
        if argv[i] in _VALUE_FLAGS and i + 1 < len(argv) and _NEGATIVE_VALUE.match(argv[i + 1]):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_attach_negative_values(argv))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EX_USAGE
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (JordanLoopsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
