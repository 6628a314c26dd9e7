"""Command-line entry point: element verification and convergence studies.

Every command writes CSV (or a markdown table with ``--markdown``) preceded
by a ``#`` header line that names the schema version and the run settings.
The exit status is 0 only if every check requested by the command passed.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import analysis, assembly, fespace, mesh, ref_element
from .fields import constant_field
from .quadrature import rule_for

SCHEMA = "h2curl-csv/1"
THREADS_ENV = "H2CURL_THREADS"

EXPECTED_INTERP = {"rect": 0.15, "tri": 0.2}
EXPECTED_SOLVE = {"rect": 0.2, "tri": 0.25}


class UsageError(ValueError):
    pass


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    checks: list[tuple[str, bool, str]] = field(default_factory=list)  # (name, passed, detail)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, bool(ok), detail))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"not an integer: {text!r}") from None


def parse_int_list(text: str) -> list[int]:
    """``"16,24,32"`` or ``"2..5"`` (inclusive) or a mix like ``"2..4,8"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            a, b = _int(lo), _int(hi)
            if b < a:
                raise UsageError(f"empty range {part!r}")
            out.extend(range(a, b + 1))
        else:
            out.append(_int(part))
    if not out:
        raise UsageError("empty integer list")
    return out


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if not np.isfinite(v) else f"{float(v):.10e}"
    return "" if v is None else str(v)


def render_csv(table: Table, command: str) -> str:
    buf = io.StringIO()
    meta = " ".join(f"{k}={v}" for k, v in table.meta.items())
    buf.write(f"# {SCHEMA} command={command} {meta}".rstrip() + "\n")
    buf.write(",".join(table.columns) + "\n")
    for row in table.rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    for name, ok, detail in table.checks:
        buf.write(f"# check {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip() + "\n")
    return buf.getvalue()


def render_markdown(table: Table, command: str) -> str:
    lines = [f"**{command}** " + ", ".join(f"{k}={v}" for k, v in table.meta.items()), ""]
    lines.append("| " + " | ".join(table.columns) + " |")
    lines.append("|" + "---|" * len(table.columns))
    for row in table.rows:
        lines.append("| " + " | ".join(_fmt(v) for v in row) + " |")
    if table.checks:
        lines.append("")
        for name, ok, detail in table.checks:
            lines.append(f"- {'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _check_order(shape: str, k: int) -> None:
    if shape not in ref_element.MIN_ORDER:
        raise UsageError(f"unknown shape {shape!r}")
    if k < ref_element.MIN_ORDER[shape]:
        raise UsageError(f"{shape} elements need k >= {ref_element.MIN_ORDER[shape]}, got {k}")


def _square_mesh(shape: str, N: int) -> mesh.Mesh2D:
    return mesh.uniform_rect_mesh(N) if shape == "rect" else mesh.uniform_tri_mesh(N)


def verify_element(shape: str, k: int) -> Table:
    _check_order(shape, k)
    el = ref_element.build_element(shape, k)
    t = Table(["check", "value", "threshold", "pass"], meta={"shape": shape, "k": k})
    rep = ref_element.verify_unisolvence(el)
    t.rows.append(["vandermonde_cond", rep.cond, None, True])
    ok = rep.max_offdiag < 1e-9
    t.rows.append(["duality_defect", rep.max_offdiag, 1e-9, ok])
    t.check("duality", ok, f"max |l_i(phi_j) - delta_ij| = {rep.max_offdiag:.3e}")
    if shape == "rect":
        want = (4 * (k - 1), 4 * k, (k - 1) ** 2 + (k - 2) ** 2 - 1)
    else:
        want = (3 * (k - 1), 3 * k, (k - 1) * (k - 3))
    got = tuple(rep.counts[c] for c in (ref_element.NODE_CURL, ref_element.EDGE_MOMENT, ref_element.INTERIOR_MOMENT))
    for name, g, w in zip(("node_curl", "edge_moment", "interior_moment"), got, want):
        t.rows.append([f"count_{name}", g, w, g == w])
    t.check("dof_counts", got == want, f"{got} vs {want}")
    worst = max(ref_element.verify_trace_determination(el, e) for e in range(len(el.edges)))
    t.rows.append(["trace_residual", worst, 1e-9, worst < 1e-9])
    t.check("trace_determination", worst < 1e-9, f"{worst:.3e}")
    if (shape, k) in (("rect", 3), ("tri", 4)):
        try:
            perm, err = ref_element.verify_appendix_basis(el, ref_element.appendix_basis(shape))
            t.rows.append(["appendix_error", err, 1e-6, True])
            t.rows.append(["appendix_permutation", " ".join(str(int(p)) for p in perm), None, True])
            t.check("appendix", True, f"permutation error {err:.3e}")
        except ref_element.AppendixMismatchError as exc:
            # a documented mismatch is a finding, not a failure of the element
            t.rows.append(["appendix_mismatch_rows", " ".join(str(r) for r in exc.rows), None, False])
            t.meta["appendix"] = "mismatch"
            if shape == "tri":
                alt = ref_element.build_tri_element(k, ref_element.ALT_TRI_VERTICES)
                try:
                    perm, err = ref_element.verify_appendix_basis(alt, ref_element.appendix_basis(shape))
                    t.rows.append(["appendix_alt_error", err, 1e-6, True])
                    t.meta["appendix"] = "alt-match"
                except ref_element.AppendixMismatchError as exc2:
                    t.rows.append(["appendix_alt_mismatch_rows", " ".join(str(r) for r in exc2.rows), None, False])
    return t


def _rates_or_none(values, hs):
    if len(values) < 2:
        return [None] * len(values)
    return [None] + analysis.rates(values, hs)


def interp_study(shape: str, k: int, Ns: Sequence[int], tol: float | None = None) -> Table:
    _check_order(shape, k)
    if len(Ns) < 2 or any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise UsageError("interp-study needs at least two strictly increasing mesh sizes")
    ex = analysis.manufactured_example1()
    reports = []
    for N in Ns:
        V = fespace.build_h2curl_space(_square_mesh(shape, N), k)
        reports.append(analysis.error_norms(fespace.interpolate(V, ex.u), ex.u))
    t = _error_table(reports, [1.0 / N for N in Ns], {"shape": shape, "k": k, "k_table": k - 1})
    tol = EXPECTED_INTERP[shape] if tol is None else tol
    hs = [1.0 / N for N in Ns]
    for name, want in (("l2", k), ("curl", k), ("curlcurl", k - 1)):
        slope = analysis.fitted_rate([getattr(r, name) for r in reports], hs)
        t.check(f"{name}_fitted_rate", abs(slope - want) <= tol, f"{slope:.4f} vs {want} +- {tol}")
    return t


def _error_table(reports, hs, meta) -> Table:
    cols = ["h", "n_dofs", "l2_err", "l2_rate", "curl_err", "curl_rate", "curlcurl_err", "curlcurl_rate"]
    t = Table(cols, meta=meta)
    r = {n: _rates_or_none([getattr(x, n) for x in reports], hs) for n in ("l2", "curl", "curlcurl")}
    for i, rep in enumerate(reports):
        t.rows.append([hs[i], rep.n_dofs, rep.l2, r["l2"][i], rep.curl, r["curl"][i], rep.curlcurl, r["curlcurl"][i]])
    return t


def solve_example1(shape: str, k: int, Ns: Sequence[int], tol: float | None = None) -> Table:
    _check_order(shape, k)
    if len(Ns) < 2 or any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise UsageError("solve-example1 needs at least two strictly increasing mesh sizes")
    ex = analysis.manufactured_example1()
    reports, p_ratio, bu_ratio, resid = [], [], [], []
    for N in Ns:
        m = _square_mesh(shape, N)
        V, S = fespace.build_h2curl_space(m, k), fespace.build_h1_space(m, k)
        system = assembly.assemble(V, S, ex.f)
        sol = assembly.solve(system)
        rep = analysis.error_norms(sol.u, ex.u)
        reports.append(analysis.ErrorReport(rep.l2, rep.curl, rep.curlcurl, rep.h, V.n_global + S.n_global))
        p_ratio.append(_scalar_norm(sol.p) / analysis.field_norms(sol.u)[0])
        _, Bred, _ = system.reduced()
        uf = sol.u.coeffs[system.free_v]
        bu_ratio.append(float(np.linalg.norm(Bred @ uf) / np.linalg.norm(uf)))
        resid.append(sol.residual)
    hs = [1.0 / N for N in Ns]
    t = _error_table(reports, hs, {"shape": shape, "k": k, "k_table": k - 1})
    t.columns += ["p_over_u", "Bu_rel", "backward_err"]
    for row, a, b, c in zip(t.rows, p_ratio, bu_ratio, resid):
        row += [a, b, c]
    tol = EXPECTED_SOLVE[shape] if tol is None else tol
    for name, want in (("l2", k), ("curl", k), ("curlcurl", k - 1)):
        rs = analysis.rates([getattr(r, name) for r in reports], hs)
        t.check(f"{name}_last_rate", abs(rs[-1] - want) <= tol,
                f"{rs[-1]:.4f} vs {want} +- {tol} (all: " + " ".join(f"{x:.4f}" for x in rs) + ")")
    t.check("p_zero", max(p_ratio) < 1e-8, f"max ||p_h||/||u_h|| = {max(p_ratio):.3e}")
    t.check("constraint", max(bu_ratio) < 1e-9, f"max ||B u_h||/||u_h|| = {max(bu_ratio):.3e}")
    return t


def _scalar_norm(ph: fespace.FeFunction) -> float:
    sp = ph.space
    rule = rule_for(sp.shape, analysis.error_quadrature_degree(sp.k))
    v, _ = ph.evaluate(rule.points)
    return float(np.sqrt(np.sum(rule.weights[None, :] * sp.det[:, None] * v**2)))


def solve_lshape(levels: Sequence[int], kappa: float, k: int = 4) -> Table:
    if not (0.0 < kappa <= 0.5):
        raise UsageError(f"kappa must lie in (0, 0.5], got {kappa}")
    _check_order("tri", k)
    levels = list(levels)
    if len(levels) < 2 or any(b != a + 1 for a, b in zip(levels, levels[1:])) or levels[0] < 0:
        raise UsageError("solve-lshape needs consecutive refinement levels, e.g. 1..5")
    f = constant_field(1.0, 1.0)
    sols, meshes = [], []
    for n in levels:
        m = mesh.graded_lshape_mesh(n, kappa)
        V, S = fespace.build_h2curl_space(m, k), fespace.build_h1_space(m, k)
        sols.append(assembly.solve(assembly.assemble(V, S, f)))
        meshes.append(m)
    diffs = [analysis.successive_diff(a.u, b.u) for a, b in zip(sols, sols[1:])]
    d = np.array(diffs)
    orders = [analysis.halving_orders(d[:, j]) + [None] for j in range(3)]
    cols = ["n", "n_cells", "n_dofs", "l2_diff", "l2_order", "curl_diff", "curl_order", "curlcurl_diff", "curlcurl_order"]
    t = Table(cols, meta={"shape": "tri", "k": k, "k_table": k - 1, "kappa": kappa})
    for i, n in enumerate(levels[:-1]):
        sp = sols[i].u.space
        t.rows.append([n, meshes[i].n_cells, sp.n_global + sols[i].p.space.n_global,
                       d[i, 0], orders[0][i], d[i, 1], orders[1][i], d[i, 2], orders[2][i]])
    return t


def dof_table(ks: Sequence[int], Ns: Sequence[int], build: bool = False) -> Table:
    cols = ["k_table", "k_def", "N", "M1", "delta1", "M2", "delta2"]
    if build:
        cols += ["built_rect", "built_tri"]
    t = Table(cols)
    ok1 = ok2 = okb = True
    for k in ks:
        for N in Ns:
            c = analysis.dof_counts(k, N)
            row = [k, k + 1, N, c.M1, c.delta1, c.M2, c.delta2]
            if k >= 3 and N >= 2:
                ok1 &= c.delta1 > 0
            if k >= 3 and N >= 3:
                ok2 &= c.delta2 > 0
            if build:
                br = _built_total("rect", k + 1, N)
                bt = _built_total("tri", k + 1, N) if k + 1 >= 4 else None
                row += [br, bt]
                okb &= br == c.M1 and (bt is None or bt == c.M2)
            t.rows.append(row)
    t.check("delta1_positive", ok1, "for k >= 3, N >= 2")
    t.check("delta2_positive", ok2, "for k >= 3, N >= 3")
    if build:
        t.check("built_totals", okb, "V_h + S_h totals equal M1 (rect) and M2 (tri)")
    return t


def _built_total(shape: str, k_def: int, N: int) -> int:
    m = _square_mesh(shape, N)
    return fespace.build_h2curl_space(m, k_def).n_global + fespace.build_h1_space(m, k_def).n_global


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="h2curl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--output", "-o", help="write here instead of stdout")
        sp.add_argument("--markdown", action="store_true", help="render a markdown table")
        sp.add_argument("--threads", type=int, help=f"BLAS/OpenMP thread cap (default: ${THREADS_ENV})")

    sp = sub.add_parser("verify-element", help="duality, trace and appendix checks for one element")
    sp.add_argument("--shape", choices=("rect", "tri"), required=True)
    sp.add_argument("--k", type=int, required=True)
    common(sp)

    for name, helptext in (("interp-study", "interpolation errors of the manufactured solution"),
                           ("solve-example1", "solve the manufactured problem on the unit square")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--shape", choices=("rect", "tri"), required=True)
        sp.add_argument("--k", type=int, required=True)
        sp.add_argument("--n", required=True, help="mesh sizes N (h = 1/N), e.g. 16,24,32")
        sp.add_argument("--tol", type=float, help="rate tolerance")
        common(sp)

    sp = sub.add_parser("solve-lshape", help="successive differences on graded L-shape meshes")
    sp.add_argument("--levels", required=True, help="consecutive refinement levels, e.g. 1..5")
    sp.add_argument("--kappa", type=float, default=0.245)
    sp.add_argument("--k", type=int, default=4)
    common(sp)

    sp = sub.add_parser("dof-table", help="DOF-count formulas (table convention k >= 2)")
    sp.add_argument("--k", required=True, help="table-convention orders, e.g. 2..5")
    sp.add_argument("--n", required=True, help="mesh sizes, e.g. 10 or 2..10")
    sp.add_argument("--build", action="store_true", help="also build the spaces and compare totals")
    common(sp)
    return p


def _thread_limit(n: int | None):
    if n is None:
        env = os.environ.get(THREADS_ENV)
        n = int(env) if env else None
    if n is None:
        return nullcontext()
    if n < 1:
        raise UsageError("thread count must be positive")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def run(args: argparse.Namespace) -> tuple[int, str]:
    with _thread_limit(args.threads):
        if args.command == "verify-element":
            table = verify_element(args.shape, args.k)
        elif args.command == "interp-study":
            table = interp_study(args.shape, args.k, parse_int_list(args.n), args.tol)
        elif args.command == "solve-example1":
            table = solve_example1(args.shape, args.k, parse_int_list(args.n), args.tol)
        elif args.command == "solve-lshape":
            table = solve_lshape(parse_int_list(args.levels), args.kappa, args.k)
        else:
            ks = parse_int_list(args.k)
            if min(ks) < 2:
                raise UsageError("table-convention order must be >= 2")
            table = dof_table(ks, parse_int_list(args.n), args.build)
    text = (render_markdown if args.markdown else render_csv)(table, args.command)
    return (0 if table.passed else 1), text


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        status, text = run(args)
    except (UsageError, ref_element.OrderTooLowError) as exc:
        parser.print_usage(sys.stderr)
        print(f"h2curl: error: {exc}", file=sys.stderr)
        return 2
    except assembly.SingularSystemError as exc:
        print(f"h2curl: solver failure: {exc}", file=sys.stderr)
        return 3
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
