"""Command line front end: ``lvig analyze|graph|stability|simulate SYSTEM.json``.

Exit codes: 0 clean, 1 analysis found a problem (graph diff, anomalies,
nonhyperbolic equilibria, failed verification), 2 invalid input.

SYSTEM.json::

    {"name": "...", "n": 3, "A": [[...], ...], "b": [...],
     "tolerances": {"tol": 1e-9, "sign_tol": 1e-9}, "assert_vl": false}

The environment variable LVIG_THREADS sets the number of worker threads used
for ODE edge verification (default 1).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .community import label
from .equilibria import LVSystem
from .errors import LVError, PreconditionFailed, VerificationInconclusive
from .graphs import Provenance, analyze_graphs, export_graph, merge_graphs
from .matrix_analysis import DEFAULT_TOL, Method, VLCertificate
from .oracle import integrate, verify_edge_detail
from .stability import distance_to_residual, perturbation_sweep, residual_hyperplanes

EXIT_OK, EXIT_PROBLEM, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


@dataclass
class SystemFile:
    name: str
    n: int
    A: list[list[float]]
    b: list[float]
    tolerances: dict[str, float] = field(default_factory=dict)
    assert_vl: bool = False

    def system(self) -> LVSystem:
        cert = VLCertificate.user_asserted() if self.assert_vl else None
        return LVSystem(np.array(self.A, dtype=float), np.array(self.b, dtype=float), cert, self.name)


class _NonFinite:
    def __init__(self, token: str, line: int):
        self.token, self.line = token, line


def _parse_json(text: str):
    cursor = [0]

    def locate(token: str) -> int:
        pos = text.find(token, cursor[0])
        if pos < 0:
            return 0
        cursor[0] = pos + len(token)
        return text.count("\n", 0, pos) + 1

    def on_constant(token):
        return _NonFinite(token, locate(token))

    def on_float(token):
        value = float(token)
        if not math.isfinite(value):
            return _NonFinite(token, locate(token))
        locate(token)
        return value

    def on_int(token):
        locate(token)
        return int(token)

    try:
        return json.loads(text, parse_constant=on_constant, parse_float=on_float, parse_int=on_int)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _number(value, where: str) -> float:
    if isinstance(value, _NonFinite):
        raise InputError(f"{where}: non-finite value {value.token} (line {value.line})")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"{where}: expected a number, got {value!r}")
    return float(value)


def load_system_file(path) -> SystemFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    data = _parse_json(text)
    if not isinstance(data, dict):
        raise InputError("top level must be a JSON object")
    for key in ("A", "b"):
        if key not in data:
            raise InputError(f"missing field {key!r}")
    A_raw, b_raw = data["A"], data["b"]
    if not isinstance(b_raw, list):
        raise InputError("b: expected a list")
    n = data.get("n", len(b_raw))
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InputError(f"n: expected a positive integer, got {n!r}")
    if len(b_raw) != n:
        raise InputError(f"b: has {len(b_raw)} entries, expected n={n}")
    if not isinstance(A_raw, list) or len(A_raw) != n:
        raise InputError(f"A: expected {n} rows")
    A = []
    for r, row in enumerate(A_raw):
        if not isinstance(row, list) or len(row) != n:
            raise InputError(f"A[{r}]: expected a row of {n} numbers")
        A.append([_number(x, f"A[{r}][{c}]") for c, x in enumerate(row)])
    b = [_number(x, f"b[{i}]") for i, x in enumerate(b_raw)]
    tolerances = {}
    for key, value in (data.get("tolerances") or {}).items():
        if key not in ("tol", "sign_tol"):
            raise InputError(f"tolerances: unknown key {key!r}")
        tolerances[key] = _number(value, f"tolerances.{key}")
        if tolerances[key] <= 0:
            raise InputError(f"tolerances.{key}: must be positive")
    assert_vl = data.get("assert_vl", False)
    if not isinstance(assert_vl, bool):
        raise InputError("assert_vl: expected true or false")
    name = data.get("name", Path(path).stem)
    return SystemFile(str(name), n, A, b, tolerances, assert_vl)


def _tolerances(args, sf: SystemFile) -> tuple[float, float]:
    tol = args.tol if args.tol is not None else sf.tolerances.get("tol", DEFAULT_TOL)
    sign_tol = args.sign_tol if args.sign_tol is not None else sf.tolerances.get("sign_tol", DEFAULT_TOL)
    return tol, sign_tol


def _fmt_vec(u) -> str:
    return "(" + ", ".join(f"{x:.6f}" for x in u) + ")"


def _sign_char(s: int) -> str:
    return {1: "+", -1: "-", 0: "0"}[int(s)]


def cmd_analyze(args, out) -> int:
    sf = load_system_file(args.system)
    tol, sign_tol = _tolerances(args, sf)
    sys_ = sf.system()
    cert = sys_.vl_certificate
    status = EXIT_OK

    print(f"system: {sf.name} (n={sys_.n})", file=out)
    if cert.method == Method.USER_ASSERTED:
        print("VL certificate: asserted by user", file=out)
    else:
        details = [m.value for m in [cert.method] if m is not None]
        if cert.lambda_max is not None:
            details.append(f"lambda_max={cert.lambda_max:.6g}")
        print(f"VL certificate: {cert.verdict.value} ({', '.join(details)})", file=out)
    if not cert.is_vl:
        print("warning: matrix not certified VL-stable; graph coincidence is not guaranteed", file=out)
        status = EXIT_PROBLEM

    scheme, ig, is_, diff = analyze_graphs(sys_, sign_tol, tol)
    catalog = sys_.catalog(tol)
    width = max(12, max(len(eq.label) for eq in catalog) + 2)
    print(f"admissible communities: {len(catalog)} (degenerate subsets: {len(catalog.degenerate)})", file=out)
    print(f"{'community':<{width}}{'u*':<{11 * sys_.n + 4}}hyperbolic  GASS", file=out)
    for eq in catalog:
        hyp = "no" if eq.community in scheme.nonhyperbolic else "yes"
        flag = "GASS" if eq.is_gass else ""
        print(f"{eq.label:<{width}}{_fmt_vec(eq.u_star):<{11 * sys_.n + 4}}{hyp:<12}{flag}".rstrip(), file=out)

    print("invasion scheme (rows: communities, columns: species)", file=out)
    print(" " * width + " ".join(f"{i + 1:>2}" for i in range(sys_.n)), file=out)
    for c in scheme.communities:
        print(f"{label(c):<{width}}" + " ".join(f"{_sign_char(s):>2}" for s in scheme.signs[c]), file=out)

    print(f"edges: IG {len(ig.edges)}, IS {len(is_.edges)}", file=out)
    print(diff.describe(), file=out)
    if not diff.empty:
        status = EXIT_PROBLEM
    if is_.anomalies:
        print(f"anomalies: {len(is_.anomalies)} self-edges dropped from IS", file=out)
        status = EXIT_PROBLEM
    if scheme.nonhyperbolic:
        names = ", ".join(label(c) for c in scheme.nonhyperbolic)
        print(f"warning: nonhyperbolic equilibria: {names}", file=out)
        status = EXIT_PROBLEM
    if catalog.boundary:
        print("warning: boundary equilibria (coordinate within tol of zero): "
              + ", ".join(label(c) for c in catalog.boundary), file=out)
    return status


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("LVIG_THREADS", "1")))
    except ValueError:
        return 1


def cmd_graph(args, out) -> int:
    sf = load_system_file(args.system)
    tol, sign_tol = _tolerances(args, sf)
    sys_ = sf.system()
    _, ig, is_, diff = analyze_graphs(sys_, sign_tol, tol)
    g = merge_graphs(ig, is_)
    status = EXIT_OK if diff.empty and not is_.anomalies else EXIT_PROBLEM
    if args.verify:
        def check(edge):
            try:
                return verify_edge_detail(sys_, edge.key, args.eps, args.tmax).verified
            except (VerificationInconclusive, LVError):
                return None

        with ThreadPoolExecutor(_workers()) as pool:
            verdicts = list(pool.map(check, g.edges))
        edges = []
        for e, ok in zip(g.edges, verdicts):
            if ok:
                edges.append(replace(e, provenance=Provenance.ODE_VERIFIED))
            else:
                edges.append(e)
                what = "inconclusive" if ok is None else "not verified"
                print(f"warning: edge {label(e.src)} -> {label(e.dst)} {what}", file=sys.stderr)
                status = EXIT_PROBLEM
        g.edges = edges
    out.write(export_graph(g, args.format))
    return status


def cmd_stability(args, out) -> int:
    sf = load_system_file(args.system)
    _, sign_tol = _tolerances(args, sf)
    sys_ = sf.system()
    try:
        report = perturbation_sweep(sys_, args.radius, args.trials, args.seed, sign_tol)
    except PreconditionFailed as exc:
        print(f"error: {exc}", file=out)
        return EXIT_PROBLEM
    payload = json.loads(report.to_json())
    if args.cones:
        arrangement = residual_hyperplanes(sys_.A)
        dist = distance_to_residual(sys_, arrangement)
        payload["cones"] = {
            "hyperplanes": len(arrangement),
            "singular_subsets": [label(c) for c in arrangement.singular],
            "distance_restricted": dist.restricted,
            "distance_unrestricted": dist.unrestricted,
        }
        if args.csv:
            Path(args.csv).write_text(arrangement.to_csv(), encoding="utf-8")
    out.write(json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def _parse_u0(text: str, n: int) -> np.ndarray:
    try:
        u0 = np.array([float(tok) for tok in text.split(",")])
    except ValueError:
        raise InputError(f"--u0: not a comma separated list of numbers: {text!r}") from None
    if u0.shape != (n,):
        raise InputError(f"--u0: expected {n} values, got {u0.size}")
    if not np.all(np.isfinite(u0)) or np.any(u0 < 0):
        raise InputError("--u0: entries must be finite and nonnegative")
    return u0


def cmd_simulate(args, out) -> int:
    sf = load_system_file(args.system)
    tol, _ = _tolerances(args, sf)
    sys_ = sf.system()
    u0 = _parse_u0(args.u0, sys_.n) if args.u0 else np.full(sys_.n, 0.1)
    traj = integrate(sys_, u0, args.tmax, tol=args.limit_tol, catalog=sys_.catalog(tol))
    if args.dump:
        Path(args.dump).write_text(traj.to_csv(), encoding="utf-8")
    cls = traj.classification
    if len(traj.times) == 1 and traj.final_speed == 0.0:
        where = f": {cls.equilibrium.label}" if cls.converged else ""
        print(f"equilibrium{where}", file=out)
    else:
        print(cls.describe(), file=out)
    print(f"final state: {_fmt_vec(traj.final_state)} at t={traj.times[-1]:.6g}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lvig", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("system", help="system JSON file")
    common.add_argument("--tol", type=float, default=None,
                        help=f"positivity/complementarity tolerance (default {DEFAULT_TOL:g})")
    common.add_argument("--sign-tol", type=float, default=None,
                        help=f"invasion rates with |r| <= this count as zero (default {DEFAULT_TOL:g})")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("analyze", parents=[common], help="equilibria, invasion scheme, IG vs IS")

    p = sub.add_parser("graph", parents=[common], help="export the attractor graph")
    p.add_argument("--format", choices=["dot", "json"], default="dot")
    p.add_argument("--verify", action="store_true", help="verify every edge by ODE integration")
    p.add_argument("--eps", type=float, default=1e-4, help="seed offset for --verify (default 1e-4)")
    p.add_argument("--tmax", type=float, default=1e4, help="integration horizon for --verify (default 1e4)")

    p = sub.add_parser("stability", parents=[common], help="perturbation sweep and stability cones")
    p.add_argument("--radius", type=float, default=1.0, help="perturbation radius (default 1)")
    p.add_argument("--trials", type=int, default=200, help="samples per radius (default 200)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--cones", action="store_true", help="report nonhyperbolicity hyperplanes")
    p.add_argument("--csv", help="with --cones, write the hyperplanes to this CSV file")

    p = sub.add_parser("simulate", parents=[common], help="integrate from an initial state")
    p.add_argument("--u0", help="comma separated initial abundances (default 0.1 each)")
    p.add_argument("--tmax", type=float, default=1e4, help="integration horizon (default 1e4)")
    p.add_argument("--limit-tol", type=float, default=1e-4,
                   help="distance to call convergence to an equilibrium (default 1e-4)")
    p.add_argument("--dump", help="write the trajectory as CSV (t, u1..un)")
    return parser


COMMANDS = {"analyze": cmd_analyze, "graph": cmd_graph, "stability": cmd_stability,
            "simulate": cmd_simulate}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except (InputError, LVError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
