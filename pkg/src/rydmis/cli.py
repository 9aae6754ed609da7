"""Command-line interface.

Subcommands: ``run``, ``sweep``, ``oracle``, ``verify``, ``graph export``
and the ``analyze`` group.  Exit codes: 0 success, 2 configuration error,
3 engine failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    classify_phase,
    rank_solutions,
    susceptibility_curve,
)
from .config import (
    array_from_result,
    dump_canonical,
    execute_run,
    load_json,
    load_result,
    result_to_dict,
    write_result,
)
from .errors import ConfigError, RydmisError
from .graphs import (
    bitstring,
    brute_force_mwis,
    format_vertex_set,
    independent_sets_ranked,
    library_graph,
    load_graph,
    parse_vertex_set,
    save_graph,
)
from .sweeps import run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ENGINE = 3
EXIT_VERIFY = 4

_CSV_FMT = "{:.17g}"


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_run(args: argparse.Namespace) -> int:
    cfg_path = Path(args.config)
    cfg = load_json(cfg_path)
    started = time.monotonic()
    result, array, echo = execute_run(
        cfg, base_dir=cfg_path.parent, seed_override=args.seed
    )
    elapsed = time.monotonic() - started

    ranked = rank_solutions(result, array)
    labels = {entry.mask: entry.label for entry in ranked}
    record = result_to_dict(
        result, array, echo,
        labels=labels,
        wall_time_s=elapsed if args.timing else None,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"{cfg_path.stem}.result.json"
    write_result(out_path, record)

    print(f"wrote {out_path}")
    print(f"norm drift {result.norm_drift:.3e}, mean density {result.mean_density:.4f}")
    for entry in ranked[:5]:
        print(
            f"  {format_vertex_set(entry.mask):<16} "
            f"P={entry.probability:.6f}  [{entry.label}]"
        )
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec_path = Path(args.config)
    spec = load_json(spec_path)
    seed = args.seed if args.seed is not None else int(spec.get("seed", 0))
    out_dir = Path(args.out)
    manifest = run_sweep(
        spec, out_dir,
        master_seed=seed,
        base_dir=spec_path.parent,
        threads=args.threads,
    )
    failed = [p for p in manifest["points"] if p["status"] != "ok"]
    print(f"wrote {out_dir / 'manifest.json'} ({len(manifest['points'])} points, "
          f"{len(failed)} failed)")
    for p in failed:
        print(f"  point {p['index']} failed: {p['error']}")
    return EXIT_OK


def _cmd_oracle(args: argparse.Namespace) -> int:
    array = load_graph(args.graph)
    weights = np.ones(array.n_atoms) if args.unit_weights else None
    sets, total = brute_force_mwis(array, weights)
    print(f"{array.n_atoms} atoms, {len(array.edges)} edges, "
          f"unit-disk radius {array.unit_disk_radius:g} um")
    print(f"optimal weight {total:.6g} attained by {len(sets)} set(s):")
    for mask in sets:
        print(f"  {format_vertex_set(mask)}")
    ranked = independent_sets_ranked(array, weights)
    limit = args.top if args.top > 0 else len(ranked)
    print("independent sets by weight:")
    for mask, weight in ranked[:limit]:
        print(f"  {weight:>10.6g}  {format_vertex_set(mask)}")
    if limit < len(ranked):
        print(f"  ... {len(ranked) - limit} more")
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    path = Path(args.result)
    record = load_result(path)
    array = array_from_result(record, base_dir=path.parent)
    checks: list[tuple[str, bool, str]] = []

    dist = record.get("distribution", [])
    total = sum(e["probability"] for e in dist)
    checks.append((
        "normalization",
        abs(total - 1.0) <= 1.0e-6,
        f"sum of probabilities = {total:.9f}",
    ))

    complete = len(dist) == (1 << array.n_atoms)
    checks.append((
        "completeness",
        complete,
        f"{len(dist)} entries for {1 << array.n_atoms} basis states",
    ))

    mwis_sets, _ = brute_force_mwis(array)
    mwis = set(mwis_sets)
    mismatches = 0
    argmax_entry = None
    for entry in dist:
        mask = parse_vertex_set(entry["set"])
        if argmax_entry is None or entry["probability"] > argmax_entry[1]:
            argmax_entry = (mask, entry["probability"])
        if "class" in entry and entry["class"]:
            from .graphs import classify_configuration, is_independent  # local: avoids cycle at module import

            if not is_independent(array, mask):
                expected = "frustrated"
            elif mask in mwis:
                expected = "mwis"
            else:
                expected = "independent"
            if entry["class"] != expected:
                mismatches += 1
    checks.append((
        "classification",
        mismatches == 0,
        f"{mismatches} label(s) disagree with the oracle",
    ))

    if argmax_entry is None:
        checks.append(("argmax-in-optimum", False, "empty distribution"))
    else:
        checks.append((
            "argmax-in-optimum",
            argmax_entry[0] in mwis,
            f"most probable set {format_vertex_set(argmax_entry[0])}, "
            f"optimum {[format_vertex_set(m) for m in sorted(mwis)]}",
        ))

    ok = True
    for name, passed, detail in checks:
        status = "PASS" if passed else "FAIL"
        print(f"{status} {name}: {detail}")
        ok = ok and passed
    return EXIT_OK if ok else EXIT_VERIFY


def _cmd_graph_export(args: argparse.Namespace) -> int:
    weights = None
    if args.weights is not None:
        try:
            weights = json.loads(args.weights)
        except json.JSONDecodeError:
            raise ConfigError("--weights", f"expected a number or JSON list, got {args.weights!r}")
    array = library_graph(args.name, args.lambda_um, radius=args.radius_um, weights=weights)
    if args.wire_weight is not None:
        array = array.with_wire_weight(args.wire_weight)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"{args.name.lower()}_lambda{args.lambda_um:g}.graph.json"
    save_graph(out_path, array, name=args.name, lam=args.lambda_um)
    print(f"wrote {out_path} ({array.n_atoms} atoms, {len(array.edges)} edges)")
    return EXIT_OK


def _load_manifest_points(manifest_path: Path) -> tuple[dict, list[tuple[dict, dict]]]:
    manifest = load_json(manifest_path)
    base = manifest_path.parent
    points = []
    for entry in manifest.get("points", []):
        if entry.get("status") != "ok":
            continue
        record = load_result(base / entry["result_file"])
        points.append((entry, record))
    return manifest, points


def _cmd_analyze_susceptibility(args: argparse.Namespace) -> int:
    manifest_path = Path(args.manifest)
    manifest, points = _load_manifest_points(manifest_path)
    if manifest.get("axis2") is not None:
        raise ConfigError("manifest", "susceptibility analysis needs a 1D sweep")
    samples = [(entry["axis1"], record["mean_density"]) for entry, record in points]
    samples.sort(key=lambda p: p[0])
    curve = susceptibility_curve(samples)
    rows = [
        [_CSV_FMT.format(x), _CSV_FMT.format(y), _CSV_FMT.format(chi)]
        for (x, y), chi in zip(samples, curve.chi_at_points)
    ]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "susceptibility.csv"
    _write_csv(out_path, ["delta_f_2pi_MHz", "mean_density", "susceptibility"], rows)
    if curve.delta_c is None:
        print(f"wrote {out_path}; critical detuning undefined ({curve.flag})")
    else:
        print(f"wrote {out_path}; critical detuning {curve.delta_c:.6g} (2pi MHz)")
    return EXIT_OK


def _cmd_analyze_rank(args: argparse.Namespace) -> int:
    path = Path(args.result)
    record = load_result(path)
    array = array_from_result(record, base_dir=path.parent)
    probs = np.zeros(1 << array.n_atoms)
    stderr = np.zeros(1 << array.n_atoms)
    has_stderr = False
    for entry in record["distribution"]:
        mask = parse_vertex_set(entry["set"])
        probs[mask] = entry["probability"]
        if entry.get("stderr") is not None:
            stderr[mask] = entry["stderr"]
            has_stderr = True
    from .engine import RunResult

    result = RunResult(
        probabilities=probs,
        rydberg_density=np.array(record["rydberg_density"], dtype=float),
        norm_drift=float(record["norm_drift"]),
        trajectories=int(record.get("trajectories", 0)),
        stderr=stderr if has_stderr else None,
    )
    ranked = rank_solutions(result, array)
    rows = [
        [
            format_vertex_set(e.mask),
            bitstring(e.mask, array.n_atoms),
            _CSV_FMT.format(e.probability),
            e.label,
        ]
        for e in ranked
    ]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "solutions.csv"
    _write_csv(out_path, ["set", "bitstring", "probability", "class"], rows)
    print(f"wrote {out_path}")
    return EXIT_OK


def _cmd_analyze_phases(args: argparse.Namespace) -> int:
    manifest_path = Path(args.manifest)
    manifest, points = _load_manifest_points(manifest_path)
    tracked = list(manifest.get("tracked_states", []))
    rows = []
    for entry, record in points:
        array = array_from_result(record, base_dir=manifest_path.parent)
        probs = np.zeros(1 << array.n_atoms)
        for e in record["distribution"]:
            probs[parse_vertex_set(e["set"])] = e["probability"]
        from .engine import RunResult

        result = RunResult(
            probabilities=probs,
            rydberg_density=np.array(record["rydberg_density"], dtype=float),
            norm_drift=float(record["norm_drift"]),
            trajectories=int(record.get("trajectories", 0)),
        )
        phase = classify_phase(result, array, threshold=args.threshold)
        lookup = {e["set"]: e["probability"] for e in record["distribution"]}
        row = [_CSV_FMT.format(entry["axis1"])]
        if manifest.get("axis2") is not None:
            row.append(_CSV_FMT.format(entry["axis2"]))
        row.append(phase)
        row += [_CSV_FMT.format(lookup.get(name, 0.0)) for name in tracked]
        rows.append(row)
    header = ["axis1"] + (["axis2"] if manifest.get("axis2") is not None else [])
    header += ["phase"] + [f"P{name}" for name in tracked]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "phases.csv"
    _write_csv(out_path, header, rows)
    print(f"wrote {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydmis",
        description="Quantum-annealing simulator for maximum-weight independent "
                    "sets encoded in Rydberg atom arrays",
    )
    parser.add_argument("--version", action="version", version=f"rydmis {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one run config and write a result file")
    p_run.add_argument("--config", required=True, help="run config JSON")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--timing", action="store_true",
                       help="include wall time in the result (breaks byte-reproducibility)")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    p_sweep.add_argument("--config", required=True, help="sweep spec JSON")
    p_sweep.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p_sweep.add_argument("--out", default="sweep_out", help="output directory")
    p_sweep.add_argument("--threads", type=int, default=1, help="worker processes")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_oracle = sub.add_parser("oracle", help="exact MWIS report for a graph file")
    p_oracle.add_argument("graph", help="graph JSON file")
    p_oracle.add_argument("--unit-weights", action="store_true",
                          help="ignore stored weights (plain MIS)")
    p_oracle.add_argument("--top", type=int, default=0,
                          help="limit the ranked listing (0 = all)")
    p_oracle.set_defaults(func=_cmd_oracle)

    p_verify = sub.add_parser("verify", help="cross-check a result file against the oracle")
    p_verify.add_argument("result", help="result JSON file")
    p_verify.set_defaults(func=_cmd_verify)

    p_graph = sub.add_parser("graph", help="graph utilities")
    graph_sub = p_graph.add_subparsers(dest="graph_command", required=True)
    p_export = graph_sub.add_parser("export", help="write a bundled layout to a graph file")
    p_export.add_argument("--name", required=True, help="layout name (P4, Fan3, Pan3, ...)")
    p_export.add_argument("--lambda-um", dest="lambda_um", type=float, required=True,
                          help="spacing constant in um")
    p_export.add_argument("--radius-um", dest="radius_um", type=float, default=None,
                          help="unit-disk radius (default 1.5 * lambda)")
    p_export.add_argument("--weights", default=None,
                          help="uniform weight or JSON list, 2pi*MHz")
    p_export.add_argument("--wire-weight", dest="wire_weight", type=float, default=None,
                          help="weight for wire-species atoms, 2pi*MHz")
    p_export.add_argument("--out", default=".", help="output directory")
    p_export.set_defaults(func=_cmd_graph_export)

    p_an = sub.add_parser("analyze", help="post-processing to CSV")
    an_sub = p_an.add_subparsers(dest="analyze_command", required=True)

    p_sus = an_sub.add_parser("susceptibility",
                              help="density derivative along a 1D detuning sweep")
    p_sus.add_argument("--manifest", required=True, help="sweep manifest JSON")
    p_sus.add_argument("--out", default=".", help="output directory")
    p_sus.set_defaults(func=_cmd_analyze_susceptibility)

    p_rank = an_sub.add_parser("rank", help="ranked solutions of one result file")
    p_rank.add_argument("result", help="result JSON file")
    p_rank.add_argument("--out", default=".", help="output directory")
    p_rank.set_defaults(func=_cmd_analyze_rank)

    p_ph = an_sub.add_parser("phases", help="phase labels over a sweep grid")
    p_ph.add_argument("--manifest", required=True, help="sweep manifest JSON")
    p_ph.add_argument("--threshold", type=float, default=0.4,
                      help="dominance threshold for the phase label")
    p_ph.add_argument("--out", default=".", help="output directory")
    p_ph.set_defaults(func=_cmd_analyze_phases)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RydmisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
