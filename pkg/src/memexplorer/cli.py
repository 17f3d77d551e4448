"""Command-line entry point.

Exit codes: 0 success, 1 run failure (oracle mismatch, failing seed, bad
internal state), 2 invalid or missing input, 3 infeasible design, 4 empty
archive.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import default_catalog_path, load_catalog, max_stacks, validate_hierarchy
from .design import DesignPoint
from .errors import (
    CapacityExceededError,
    CatalogParseError,
    CatalogValidationError,
    ContractViolation,
    DomainError,
    EncodingError,
    InfeasibleBandwidthError,
    InfeasibleDecodeError,
    MemExplorerError,
    SearchSpaceError,
)
from .hierarchy import effective_bandwidths

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_EMPTY = 0, 1, 2, 3, 4

HISTORY_COLUMNS = ("step", "hv", "throughput_tps", "power_w", "design_id")
SUMMARY_COLUMNS = ("method", "step", "hv_mean", "hv_std", "n_seeds")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _catalog(path: str | None = None):
    if path is not None and not Path(path).is_file():
        raise CliError(EXIT_INPUT, f"catalog file not found: {path}")
    try:
        return load_catalog(path)
    except (CatalogParseError, CatalogValidationError) as exc:
        raise CliError(EXIT_INPUT, str(exc)) from exc


def _load_json_file(path: str, what: str):
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_INPUT, f"{what} file not found: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INPUT, f"{what} file {path} is not valid JSON: {exc}") from exc


def _workload(path: str):
    from .workload import Workload

    doc = _load_json_file(path, "workload")
    try:
        return Workload.from_dict(doc)
    except MemExplorerError as exc:
        raise CliError(EXIT_INPUT, f"invalid workload {path}: {exc}") from exc


def _design(path: str, catalog) -> DesignPoint:
    doc = _load_json_file(path, "design")
    try:
        return DesignPoint.from_dict(doc, catalog)
    except (MemExplorerError, KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"invalid design {path}: {exc}") from exc


def _manifest(command: str, args: argparse.Namespace, files: dict[str, str]) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    hashes = {name: _sha256(p) for name, p in sorted(files.items()) if p}
    hashes["catalog"] = _sha256(default_catalog_path())
    return {
        "command": command,
        "flags": flags,
        "inputs_sha256": hashes,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


# -- catalog ---------------------------------------------------------------


def cmd_catalog(args) -> int:
    catalog = _catalog(args.file)
    if args.action == "validate":
        print(f"catalog OK: {len(catalog)} technologies ({args.file or default_catalog_path()})")
        return EXIT_OK
    print(f"{'name':<10}{'kind':<10}{'GB/unit':>10}{'GB/s/unit':>11}{'mm/unit':>9}{'max units':>11}")
    for tech in catalog.values():
        units = "-" if tech.on_chip else str(max_stacks(tech))
        shore = "-" if tech.on_chip else f"{tech.shoreline_per_unit:g}"
        print(f"{tech.name:<10}{tech.kind.value:<10}{tech.capacity_per_unit / 1e9:>10g}"
              f"{tech.bandwidth_per_unit / 1e9:>11g}{shore:>9}{units:>11}")
    return EXIT_OK


# -- eval ------------------------------------------------------------------


def _check_design(design: DesignPoint, catalog) -> None:
    report = validate_hierarchy(design.hierarchy, catalog)
    if not report.feasible:
        raise CliError(EXIT_INFEASIBLE, "infeasible design: " + "; ".join(report.reasons))
    try:
        effective_bandwidths(design.hierarchy)
    except InfeasibleBandwidthError as exc:
        raise CliError(EXIT_INFEASIBLE, f"infeasible design: {exc}") from exc


def cmd_eval(args) -> int:
    from .evaluator import eval_decode, eval_pd_combined, eval_prefill, kv_handoff_bytes, stage_breakdown

    catalog = _catalog()
    design = _design(args.design, catalog)
    workload = _workload(args.workload)
    _check_design(design, catalog)
    try:
        if args.stage == "prefill":
            doc = eval_prefill(design, workload, args.batch or 1).to_dict()
        elif args.stage == "decode":
            doc = eval_decode(design, workload, args.batch).to_dict()
        elif args.stage == "combined":
            pre = eval_prefill(design, workload)
            dec = eval_decode(design, workload, args.batch)
            kv = kv_handoff_bytes(workload, design.precision)
            doc = eval_pd_combined(pre, dec, kv, args.link_bandwidth * 1e9, design, design).to_dict()
        else:
            doc = {"stage": "Breakdown", "parts": {name: r.to_dict() for name, r in stage_breakdown(design, workload)}}
    except (CapacityExceededError, InfeasibleDecodeError, InfeasibleBandwidthError) as exc:
        raise CliError(EXIT_INFEASIBLE, f"infeasible: {exc}") from exc
    except (ContractViolation, DomainError) as exc:
        raise CliError(EXIT_INPUT, str(exc)) from exc
    doc = {"design_id": design.design_id, "design": design.summary(), "result": doc}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, doc)
    r = doc["result"]
    if "tps" in r:
        print(f"{design.summary()}: {r['tps']:.6g} tok/s, {r['tokens_per_joule']:.6g} tok/J -> {out}")
    else:
        print(f"{design.summary()} -> {out}")
    return EXIT_OK


# -- validate (transfer oracle) --------------------------------------------


def cmd_validate(args) -> int:
    from .oracle import MIB, validate_against_analytic

    try:
        rep = validate_against_analytic(args.cases, args.seed, args.tolerance, args.chunk_mib * MIB)
    except ContractViolation as exc:
        raise CliError(EXIT_INPUT, str(exc)) from exc
    if args.out:
        write_json(Path(args.out), rep.to_dict())
    status = "PASS" if rep.passed else "FAIL"
    print(f"{status}: {len(rep.cases)} cases, max rel err {rep.max_rel_err:.3e}, "
          f"mean {rep.mean_rel_err:.3e}, tolerance {rep.tolerance:g}, failures {len(rep.failures)}")
    return EXIT_OK if rep.passed else EXIT_FAIL


# -- explore / report ------------------------------------------------------


@dataclass(frozen=True)
class PointRecord:
    design_id: str
    throughput_tps: float
    power_w: float
    tdp_w: float
    batch: int
    tokens_per_joule: float


def _methods(spec: str) -> list[str]:
    from .dse.engine import Method

    names = [m.value for m in Method] if spec == "all" else [s.strip() for s in spec.split(",") if s.strip()]
    order = [m.value for m in Method]
    bad = [n for n in names if n not in order]
    if bad or not names:
        raise CliError(EXIT_INPUT, f"unknown method(s) {bad}; choose from {order} or 'all'")
    return sorted(set(names), key=order.index)


def _design_doc(design: DesignPoint, rec, genes, stage: str) -> dict:
    doc = design.to_dict()
    doc["evaluation"] = {
        "stage": stage,
        "genes": [int(g) for g in genes],
        "throughput_tps": rec.throughput_tps,
        "power_w": rec.power_w,
        "tdp_w": rec.tdp_w,
        "batch": rec.batch,
        "tokens_per_joule": rec.tokens_per_joule,
        "latency_s": rec.latency_s,
    }
    return doc


def _emit_report(run: Path, out: Path, k: int, tdp: float, methods: list[str] | None = None) -> int:
    """Rebuild the merged archive from a run directory and write the tables."""
    from .dse.pareto import ParetoArchive
    from .dse.report import FRONTIER_COLUMNS, POINT_COLUMNS, row_for, structure_check, top_rows

    histories = sorted(run.glob("history_*.csv"))
    if methods:
        histories = [h for h in histories if h.stem.split("_")[1] in methods]
    catalog = _catalog()
    points: dict[str, PointRecord] = {}
    designs: dict[str, DesignPoint] = {}
    stages: dict[str, str] = {}
    for h in histories:
        for row in read_csv(h):
            did = row["design_id"]
            if did in points:
                continue
            path = run / "designs" / f"{did}.json"
            doc = _load_json_file(str(path), "design")
            ev = doc.get("evaluation") or {}
            points[did] = PointRecord(did, float(ev["throughput_tps"]), float(ev["power_w"]),
                                      float(ev["tdp_w"]), int(ev["batch"]), float(ev["tokens_per_joule"]))
            designs[did] = DesignPoint.from_dict(doc, catalog)
            stages[did] = str(ev.get("stage", ""))
    archive = ParetoArchive((0.0, float(tdp)))
    for did in sorted(points):
        rec = points[did]
        if rec.tdp_w <= tdp:
            archive.insert(did, (-rec.throughput_tps, rec.power_w), rec)
    if len(archive) == 0:
        raise CliError(EXIT_EMPTY, f"no feasible evaluated design under {tdp:g} W in {run}")
    front = {e.key for e in archive}
    rows = top_rows([row_for(designs[e.key], e.payload) for e in archive], k, tdp)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "frontier.csv", FRONTIER_COLUMNS, (r.values(i + 1) for i, r in enumerate(rows)))
    write_csv(out / "pareto_points.csv", POINT_COLUMNS + ("on_front",), (
        (did, p.throughput_tps, p.power_w, p.tokens_per_joule, p.tdp_w <= tdp, did in front)
        for did, p in sorted(points.items())
    ))
    best = rows[0]
    print(f"frontier: {len(archive)} points; best tokens/J {best.tokens_per_joule:.6g} "
          f"({best.compute}/V{best.vlen} | {best.tiers}) -> {out / 'frontier.csv'}")
    check = structure_check(stages[best.design_id], designs[best.design_id], best.design_id)
    write_json(out / "structure_check.json", check.to_dict())
    print(check.message())
    return EXIT_OK


def cmd_explore(args) -> int:
    from .dse.engine import Objective, run_dse
    from .dse.space import DesignSpace, FeasibilityFilter
    from .workload import Stage

    methods = _methods(args.method)
    workload = _workload(args.workload)
    if args.space:
        try:
            space = DesignSpace.from_dict(_load_json_file(args.space, "space"))
        except (MemExplorerError, TypeError, ValueError) as exc:
            raise CliError(EXIT_INPUT, f"invalid space {args.space}: {exc}") from exc
    else:
        space = DesignSpace()
    stage = Stage.PREFILL if args.stage == "prefill" else Stage.DECODE
    if args.seeds < 1 or args.budget < 1:
        raise CliError(EXIT_INPUT, "--seeds and --budget must be positive")
    out = Path(args.out)
    (out / "designs").mkdir(parents=True, exist_ok=True)
    feasible = FeasibilityFilter(space, workload, stage, args.tdp)
    objective = Objective(space, workload, stage)
    seeds = list(range(args.seed, args.seed + args.seeds))
    curves: dict[str, list[list[float]]] = {m: [] for m in methods}
    for method in methods:
        for seed in seeds:
            try:
                hist, _ = run_dse(space, workload, stage, method, args.budget, seed, args.tdp,
                                  n_init=min(args.n_init, args.budget), pool_size=args.pool_size,
                                  objective=objective, feasible=feasible)
            except (MemExplorerError, np.linalg.LinAlgError) as exc:
                code = EXIT_INFEASIBLE if isinstance(exc, SearchSpaceError) else EXIT_FAIL
                raise CliError(code, f"{method} seed {seed} failed: {exc}") from exc
            rows = []
            for ev in hist.evaluations:
                rec = ev.record
                rows.append((ev.step, ev.hv, rec.throughput_tps, rec.power_w, rec.design_id))
                path = out / "designs" / f"{rec.design_id}.json"
                if not path.exists():
                    write_json(path, _design_doc(space.to_design(rec.genes), rec, rec.genes, stage.value))
            write_csv(out / f"history_{method}_{seed}.csv", HISTORY_COLUMNS, rows)
            curves[method].append(hist.hv)
            if not args.quiet:
                print(f"{method} seed {seed}: final hv {hist.final_hv:.6g}", file=sys.stderr)
    summary = []
    for method in methods:
        hv = np.array(curves[method])
        n = hv.shape[0]
        std = hv.std(axis=0, ddof=1) if n > 1 else np.zeros(hv.shape[1])
        for step in range(hv.shape[1]):
            summary.append((method, step, float(hv[:, step].mean()), float(std[step]), n))
    write_csv(out / "hv_summary.csv", SUMMARY_COLUMNS, summary)
    write_json(out / "manifest.json", _manifest("explore", args, {"workload": args.workload, "space": args.space}))
    for method in methods:
        finals = [c[-1] for c in curves[method]]
        print(f"{method}: mean final hv {np.mean(finals):.6g} over {len(finals)} seed(s)")
    return _emit_report(out, out, args.k, args.tdp)


def cmd_report(args) -> int:
    run = Path(args.run)
    if not run.is_dir():
        raise CliError(EXIT_INPUT, f"run directory not found: {run}")
    methods = _methods(args.method) if args.method else None
    return _emit_report(run, Path(args.out) if args.out else run, args.k, args.tdp, methods)


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memexplorer", description="NPU memory-hierarchy co-design toolkit.")
    p.add_argument("--version", action="version", version=f"memexplorer {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("catalog", help="list or validate the memory technology catalog")
    c.add_argument("action", choices=("list", "validate"))
    c.add_argument("file", nargs="?", help="catalog JSON (default: bundled)")
    c.set_defaults(func=cmd_catalog)

    e = sub.add_parser("eval", help="evaluate one design on one workload")
    e.add_argument("--design", required=True, help="design JSON")
    e.add_argument("--workload", required=True, help="workload JSON")
    e.add_argument("--stage", choices=("prefill", "decode", "combined", "breakdown"), default="prefill")
    e.add_argument("--batch", type=int, default=None, help="batch size (decode default: largest that fits)")
    e.add_argument("--link-bandwidth", type=float, default=900.0, help="KV hand-off link in GB/s (combined)")
    e.add_argument("--out", default="result.json")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("validate", help="check the transfer model against the chunked simulator")
    v.add_argument("--cases", type=int, default=50)
    v.add_argument("--seed", type=int, default=7)
    v.add_argument("--tolerance", type=float, default=0.02)
    v.add_argument("--chunk-mib", type=float, default=1.0)
    v.add_argument("--out", default=None, help="optional JSON report")
    v.set_defaults(func=cmd_validate)

    x = sub.add_parser("explore", help="run design-space exploration")
    x.add_argument("--space", default=None, help="design-space overrides JSON")
    x.add_argument("--workload", required=True)
    x.add_argument("--stage", choices=("prefill", "decode"), default="prefill")
    x.add_argument("--method", default="ehvi", help="ehvi, nsga2, random, a comma list, or 'all'")
    x.add_argument("--budget", type=int, default=100)
    x.add_argument("--seeds", type=int, default=10, help="number of seeds")
    x.add_argument("--seed", type=int, default=0, help="first seed")
    x.add_argument("--tdp", type=float, default=700.0, help="TDP budget in W")
    x.add_argument("--n-init", type=int, default=20)
    x.add_argument("--pool-size", type=int, default=2048)
    x.add_argument("--k", type=int, default=5, help="frontier rows to report")
    x.add_argument("--quiet", action="store_true")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_explore)

    r = sub.add_parser("report", help="rebuild frontier tables from a run directory")
    r.add_argument("--run", required=True)
    r.add_argument("--k", type=int, default=5)
    r.add_argument("--tdp", type=float, default=700.0)
    r.add_argument("--method", default=None, help="restrict to these methods")
    r.add_argument("--out", default=None, help="output directory (default: the run directory)")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"memexplorer: {exc}", file=sys.stderr)
        return exc.code
    except (EncodingError, ContractViolation, DomainError) as exc:
        print(f"memexplorer: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MemExplorerError as exc:
        print(f"memexplorer: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
