"""Experiment driver: JSON configs in, reports and CSV tables out.

`lorot run config.json` executes every check in the config and exits 0
only if all pass (2 on a failed check, 1 on any config problem).  The
single-check subcommands are thin aliases that run one check kind from
the same config schema; `coeffs`, `bishop-gromov`, and `smooth-verify`
are flag-driven.  Reports are deterministic for a fixed config; file
writes are atomic (write-then-rename); LOROT_THREADS caps the worker
pool used when a config holds several independent checks.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from .coeffs import CoeffDomainError, CoeffParams, sigma, tau_coeff
from .curvature import (
    ConditionSpec,
    CurvatureError,
    bishop_gromov,
    bonnet_myers_bound,
    brunn_minkowski,
    check_tcd,
    check_tmcp,
    good_geodesic_bisect,
    midpoint_check,
    mutual_singularity_probe,
    scan_sup_tau,
    tmcp_good_geodesic,
)
from .entropy import EntropyError
from .geodesics import GeodesicError, build_plan, minkowski_oracle
from .reporting import CheckReport, Entry, _atomic_write
from .smoothlab import SmoothLabError, verify_distortion_concavity
from .spacetime import (
    SpacetimeError,
    build_grid_space,
    causal_diamond,
    kernel_tau_cross,
    minkowski_kernel,
    space_from_json,
)
from .transport import (
    DiscreteMeasure,
    TransportError,
    instance_from_json,
    solve_lp_optimal,
    uniform_measure,
)

EXIT_PASS = 0
EXIT_CONFIG = 1
EXIT_CHECK = 2

SCHEMA = 1

_MODULE_ERRORS = (
    CoeffDomainError,
    CurvatureError,
    EntropyError,
    GeodesicError,
    SmoothLabError,
    SpacetimeError,
    TransportError,
)


class ConfigError(ValueError):
    """Config schema violation; message carries the field path."""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract here is exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _field(doc: dict, name: str, path: str, kind=None, default=KeyError):
    if name not in doc:
        if default is KeyError:
            raise ConfigError(f"{path}.{name}: required field is missing")
        return default
    value = doc[name]
    if kind == "number":
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{path}.{name}: expected a number, got {value!r}")
        return float(value)
    if kind == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{path}.{name}: expected an integer, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path}.{name}: expected a string, got {value!r}")
        return value
    if kind == "list":
        if not isinstance(value, list):
            raise ConfigError(f"{path}.{name}: expected a list, got {value!r}")
        return value
    if kind == "dict":
        if not isinstance(value, dict):
            raise ConfigError(f"{path}.{name}: expected an object, got {value!r}")
        return value
    return value


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    schema = doc.get("schema")
    if schema != SCHEMA:
        raise ConfigError(f"{path}: schema: expected {SCHEMA}, got {schema!r}")
    return doc


def _box_indices(space, box, path: str) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape != (space.points.shape[1], 2):
        raise ConfigError(f"{path}: box must be a per-axis [lo, hi] list")
    inside = np.all(
        (space.points >= box[:, 0]) & (space.points <= box[:, 1]), axis=1
    )
    idx = np.flatnonzero(inside)
    if len(idx) == 0:
        raise ConfigError(f"{path}: box contains no cell centers")
    return idx


def _measure_from_node(space, node, path: str) -> DiscreteMeasure:
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected an object")
    is_ac = bool(node.get("is_ac", True))
    if "box" in node:
        idx = _box_indices(space, node["box"], path)
        stride = node.get("stride")
        if stride is not None:
            stride = [stride] * space.points.shape[1] if isinstance(stride, int) else list(stride)
            multi = np.array(np.unravel_index(idx, space.resolution)).T
            base = multi.min(axis=0)
            keep = np.all((multi - base) % np.asarray(stride, dtype=int) == 0, axis=1)
            idx = idx[keep]
        return uniform_measure(space, idx, is_ac=is_ac)
    if "atoms" in node:
        pairs = _field(node, "atoms", path, "list")
        try:
            support = [int(i) for i, _ in pairs]
            weights = [float(w) for _, w in pairs]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.atoms: expected [index, weight] pairs") from exc
        return DiscreteMeasure(space, support, weights, is_ac)
    raise ConfigError(f"{path}: measure needs either a box or an atoms field")


def _spec_from_node(node: dict, path: str, default_variant: str) -> ConditionSpec:
    return ConditionSpec(
        variant=_field(node, "variant", path, "str", default_variant),
        K=_field(node, "K", path, "number"),
        N=_field(node, "N", path, "number"),
        p=_field(node, "p", path, "number"),
        Nprime_grid=tuple(_field(node, "Nprime_grid", path, "list", ())),
        t_grid=tuple(_field(node, "t_grid", path, "list", ())),
    )


def _report_with_plan(pair):
    plan, report = pair
    return report


def _run_one_check(node, path, context):
    space, kernel, oracle, measures = context
    kind = _field(node, "kind", path, "str")
    tol = node.get("tolerance")

    def mu(field_name):
        name = _field(node, field_name, path, "str")
        if name not in measures:
            raise ConfigError(f"{path}.{field_name}: unknown measure {name!r}")
        return measures[name]

    if kind == "tcd":
        spec = _spec_from_node(node, path, "TCD_reduced")
        return check_tcd(mu("mu0"), mu("mu1"), spec, kernel, oracle, tolerance=tol)
    if kind == "tmcp":
        spec = _spec_from_node(node, path, "TMCP_reduced")
        x1 = _field(node, "x1", path, "list")
        return check_tmcp(mu("mu0"), x1, spec, kernel, oracle, tolerance=tol)
    if kind == "brunn_minkowski":
        A0 = _box_indices(space, _field(node, "A0", path, "list"), f"{path}.A0")
        A1 = _box_indices(space, _field(node, "A1", path, "list"), f"{path}.A1")
        return brunn_minkowski(
            A0,
            A1,
            _field(node, "t", path, "number"),
            _field(node, "K", path, "number"),
            _field(node, "N_grid", path, "list"),
            kernel,
            oracle,
            space,
            tolerance=tol,
        )
    if kind == "bishop_gromov":
        x = _field(node, "x", path, "list")
        y = node.get("diamond_tip")
        if y is not None:
            E = causal_diamond(space, x, y, kernel)
            xa = np.asarray(x, dtype=float)[np.newaxis]
            ya = np.asarray(y, dtype=float)[np.newaxis]

            def in_e(pts, _xa=xa, _ya=ya):
                return (kernel_tau_cross(kernel, _xa, pts)[0] > 0.0) & (
                    kernel_tau_cross(kernel, pts, _ya)[:, 0] > 0.0
                )

        else:
            E = _box_indices(space, _field(node, "E", path, "list"), f"{path}.E")
            in_e = None
        return bishop_gromov(
            x,
            E,
            _field(node, "r", path, "number"),
            _field(node, "R", path, "number"),
            _field(node, "K", path, "number"),
            _field(node, "N", path, "number"),
            _field(node, "delta", path, "number"),
            space,
            kernel,
            E_membership=in_e,
            oracle=oracle,
            tolerance=tol,
        )
    if kind == "bonnet_myers":
        K = _field(node, "K", path, "number")
        N = _field(node, "N", path, "number")
        full, reduced = bonnet_myers_bound(K, N)
        sup = scan_sup_tau(space, kernel)
        entries = [
            Entry(t=None, Nprime=N, lhs=sup, rhs=full, label="full"),
            Entry(t=None, Nprime=N, lhs=sup, rhs=reduced, label="reduced"),
        ]
        eps = space.cell_diameter if tol is None else float(tol)
        return CheckReport(
            spec={"check": "bonnet_myers", "K": K, "N": N, "sup_tau": sup},
            entries=entries,
            tolerance=eps,
            discretization={"h": space.cell_diameter, "eps": eps},
        )
    if kind == "good_geodesic":
        return _report_with_plan(
            good_geodesic_bisect(
                mu("mu0"),
                mu("mu1"),
                _field(node, "p", path, "number"),
                _field(node, "K", path, "number"),
                _field(node, "N", path, "number"),
                _field(node, "depth", path, "int"),
                kernel,
                oracle,
                tolerance=tol,
            )
        )
    if kind == "tmcp_good_geodesic":
        return _report_with_plan(
            tmcp_good_geodesic(
                mu("mu0"),
                _field(node, "x1", path, "list"),
                _field(node, "p", path, "number"),
                _field(node, "K", path, "number"),
                _field(node, "N", path, "number"),
                _field(node, "depth", path, "int"),
                kernel,
                oracle,
                tolerance=tol,
            )
        )
    if kind == "midpoint":
        return midpoint_check(
            mu("mu0"),
            mu("mu1"),
            _field(node, "p", path, "number"),
            _field(node, "K", path, "number"),
            _field(node, "N_grid", path, "list"),
            kernel,
            oracle,
            tolerance=tol,
        )
    if kind == "mutual_singularity":
        p = _field(node, "p", path, "number")
        plans = []
        for k, pair in enumerate(_field(node, "pairs", path, "list")):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(f"{path}.pairs[{k}]: expected [mu0, mu1] names")
            m0, m1 = (measures.get(name) for name in pair)
            if m0 is None or m1 is None:
                raise ConfigError(f"{path}.pairs[{k}]: unknown measure name")
            plans.append(build_plan(solve_lp_optimal(m0, m1, p, kernel), oracle))
        return mutual_singularity_probe(
            plans, _field(node, "t_grid", path, "list"), space
        )
    if kind == "smooth":
        return verify_distortion_concavity(
            _field(node, "j_samples", path, "list"),
            _field(node, "theta", path, "number"),
            _field(node, "K", path, "number"),
            _field(node, "Nprime", path, "number"),
            t_grid=node.get("t_grid"),
            tolerance=float(node.get("tolerance", 1e-8)),
        )
    raise ConfigError(f"{path}.kind: unknown check kind {kind!r}")


def _thread_cap(n_tasks: int) -> int:
    raw = os.environ.get("LOROT_THREADS", "")
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            print(f"warning: ignoring non-integer LOROT_THREADS={raw!r}", file=sys.stderr)
            cap = 1
        return max(1, min(cap, n_tasks))
    return max(1, min(4, n_tasks))


def run(config_path: str, only_kind: Optional[str] = None, seed: Optional[int] = None) -> int:
    """Execute a config; 0 all pass, 2 any check fails, 1 config error."""
    try:
        doc = _load_json(config_path)
        if seed is None:
            seed = _field(doc, "seed", "config", "int", 0)
        space = space_from_json(_field(doc, "space", "config", "dict"))
        kernel = minkowski_kernel(space.dim)
        oracle = minkowski_oracle(kernel)
        measures = {}
        for name, node in _field(doc, "measures", "config", "dict", {}).items():
            measures[name] = _measure_from_node(space, node, f"measures.{name}")
        check_nodes = _field(doc, "checks", "config", "list")
        if only_kind is not None:
            check_nodes = [
                n for n in check_nodes if isinstance(n, dict) and n.get("kind") == only_kind
            ]
            if not check_nodes:
                raise ConfigError(f"checks: no check of kind {only_kind!r} in config")
        out_dir = _field(doc, "output_dir", "config", "str", ".")
        context = (space, kernel, oracle, measures)

        def task(k, node):
            if not isinstance(node, dict):
                raise ConfigError(f"checks[{k}]: expected an object")
            return _run_one_check(node, f"checks[{k}]", context)

        reports = [None] * len(check_nodes)
        if len(check_nodes) > 1:
            with concurrent.futures.ThreadPoolExecutor(
                max_workers=_thread_cap(len(check_nodes))
            ) as pool:
                futures = {
                    pool.submit(task, k, node): k
                    for k, node in enumerate(check_nodes)
                }
                for fut in concurrent.futures.as_completed(futures):
                    reports[futures[fut]] = fut.result()
        elif check_nodes:
            reports[0] = task(0, check_nodes[0])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _MODULE_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    all_pass = True
    summary = []
    for k, (node, report) in enumerate(zip(check_nodes, reports)):
        name = node.get("name", f"{node.get('kind', 'check')}[{k}]")
        report_path = node.get("report")
        csv_path = node.get("csv")
        if report_path:
            report_path = os.path.join(out_dir, report_path)
            report.write_json(report_path)
        if csv_path:
            csv_path = os.path.join(out_dir, csv_path)
            report.write_csv(csv_path)
        status = "PASS" if report.passed else "FAIL"
        all_pass &= report.passed
        worst = report.worst_margin
        worst_txt = "inf" if math.isinf(worst) else f"{worst:.6g}"
        line = f"{name}: {status} worst_margin={worst_txt}"
        if report_path:
            line += f" report={report_path}"
        print(line)
        summary.append(
            {
                "name": name,
                "kind": node.get("kind"),
                "pass": report.passed,
                "report": report_path,
                "csv": csv_path,
            }
        )
    summary_path = doc.get("summary")
    if summary_path:
        _atomic_write(
            os.path.join(out_dir, summary_path),
            json.dumps({"schema": SCHEMA, "seed": seed, "checks": summary}, indent=2)
            + "\n",
        )
    return EXIT_PASS if all_pass else EXIT_CHECK


def _cmd_coeffs(args) -> int:
    params = CoeffParams(K=args.K, N=args.N, t=args.t, theta=args.theta)
    value = tau_coeff(params) if args.family == "tau" else sigma(params)
    print("inf" if value.is_inf else repr(value.value))
    return EXIT_PASS


def _cmd_transport(args) -> int:
    doc = _load_json(args.config)
    space = space_from_json(_field(doc, "space", "config", "dict"))
    kernel = minkowski_kernel(space.dim)
    mu0, mu1, p = instance_from_json(doc, space)
    result = solve_lp_optimal(mu0, mu1, p, kernel)
    obj = "-inf" if result.objective.is_neg_inf else result.objective.value
    print(
        f"objective={obj!r} feasible={result.feasible} "
        f"monge_defect={result.monge_defect!r} pivots={result.n_pivots}"
    )
    if args.coupling:
        if result.coupling is None:
            print("no coupling to write (infeasible)", file=sys.stderr)
        else:
            result.coupling.write_csv(args.coupling)
            print(f"coupling={args.coupling}")
    if args.result:
        payload = {
            "schema": SCHEMA,
            "objective": obj,
            "feasible": result.feasible,
            "monge_defect": result.monge_defect,
            "p": result.p,
            "n_pivots": result.n_pivots,
            "pricing_rounds": result.pricing_rounds,
        }
        _atomic_write(args.result, json.dumps(payload, indent=2) + "\n")
        print(f"result={args.result}")
    return EXIT_PASS


def _cmd_bishop_gromov(args) -> int:
    if args.T <= 0:
        raise ConfigError(f"--T must be positive, got {args.T}")
    kernel = minkowski_kernel(1)
    oracle = minkowski_oracle(kernel)
    half = args.T / 2.0
    space = build_grid_space(
        [[0.0, args.T], [-half, half]], (args.resolution, args.resolution)
    )
    x = (0.0, 0.0)
    y = (args.T, 0.0)
    E = causal_diamond(space, x, y, kernel)
    xa = np.asarray(x)[np.newaxis]
    ya = np.asarray(y)[np.newaxis]

    def in_e(pts):
        return (kernel_tau_cross(kernel, xa, pts)[0] > 0.0) & (
            kernel_tau_cross(kernel, pts, ya)[:, 0] > 0.0
        )

    report = bishop_gromov(
        x, E, args.r, args.R, args.K, args.N, args.delta, space, kernel,
        E_membership=in_e, oracle=oracle,
    )
    ratio = report.spec["v_r"] / report.spec["v_R"]
    model = report.entry("v_full").lhs
    status = "PASS" if report.passed else "FAIL"
    print(f"ratio={ratio:.6f} model={model:.6f} {status}")
    if args.report:
        report.write_json(args.report)
        print(f"report={args.report}")
    if args.csv:
        report.write_csv(args.csv)
    return EXIT_PASS if report.passed else EXIT_CHECK


def _cmd_smooth_verify(args) -> int:
    doc = _load_json(args.config)
    report = verify_distortion_concavity(
        _field(doc, "j_samples", "config", "list"),
        _field(doc, "theta", "config", "number"),
        _field(doc, "K", "config", "number"),
        _field(doc, "Nprime", "config", "number"),
        t_grid=doc.get("t_grid"),
        tolerance=float(doc.get("tolerance", 1e-8)),
    )
    status = "PASS" if report.passed else "FAIL"
    hyp = report.spec["hypothesis_holds"]
    print(f"{status} hypothesis_holds={hyp} worst_margin={report.worst_margin:.6g}")
    if args.report:
        report.write_json(args.report)
        print(f"report={args.report}")
    if args.csv:
        report.write_csv(args.csv)
    return EXIT_PASS if report.passed else EXIT_CHECK


def _build_parser() -> _Parser:
    parser = _Parser(prog="lorot", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--seed", type=int, default=None,
        help="override the config seed recorded in run summaries",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p_run = sub.add_parser("run", help="execute every check in a config")
    p_run.add_argument("config")

    p_coeffs = sub.add_parser("coeffs", help="evaluate one distortion coefficient")
    p_coeffs.add_argument("--K", type=float, required=True)
    p_coeffs.add_argument("--N", type=float, required=True)
    p_coeffs.add_argument("--t", type=float, required=True)
    p_coeffs.add_argument("--theta", type=float, required=True)
    p_coeffs.add_argument("--family", choices=("sigma", "tau"), default="sigma")

    p_tr = sub.add_parser("transport", help="solve one l^p transport instance")
    p_tr.add_argument("--config", required=True)
    p_tr.add_argument("--coupling", help="write the optimal coupling CSV here")
    p_tr.add_argument("--result", help="write the solve summary JSON here")

    for cmd, kind in (
        ("check-tcd", "tcd"),
        ("check-tmcp", "tmcp"),
        ("good-geodesic", "good_geodesic"),
        ("midpoint", "midpoint"),
        ("brunn-minkowski", "brunn_minkowski"),
    ):
        p = sub.add_parser(cmd, help=f"run the {kind} checks from a config")
        p.add_argument("--config", required=True)
        p.set_defaults(only_kind=kind)

    p_bg = sub.add_parser("bishop-gromov", help="flat diamond volume comparison")
    p_bg.add_argument("--T", type=float, required=True)
    p_bg.add_argument("--r", type=float, required=True)
    p_bg.add_argument("--R", type=float, required=True)
    p_bg.add_argument("--K", type=float, required=True)
    p_bg.add_argument("--N", type=float, required=True)
    p_bg.add_argument("--delta", type=float, default=0.02)
    p_bg.add_argument("--resolution", type=int, default=512)
    p_bg.add_argument("--report")
    p_bg.add_argument("--csv")

    p_sm = sub.add_parser("smooth-verify", help="distortion-concavity check on j samples")
    p_sm.add_argument("--config", required=True)
    p_sm.add_argument("--report")
    p_sm.add_argument("--csv")

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "run":
            return run(args.config, seed=args.seed)
        if args.command == "coeffs":
            return _cmd_coeffs(args)
        if args.command == "transport":
            return _cmd_transport(args)
        if args.command == "bishop-gromov":
            return _cmd_bishop_gromov(args)
        if args.command == "smooth-verify":
            return _cmd_smooth_verify(args)
        return run(args.config, only_kind=args.only_kind, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _MODULE_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
