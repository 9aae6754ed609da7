"""Parameter sweeps: grid specs, deterministic seeding, manifest and CSV.

A sweep spec is a JSON object::

    {
      "run": { ... run config template ... },
      "axis1": {"path": "schedule.tau_us", "values": [1.0, 2.0, 5.0]},
      "axis2": {"path": "ratio.delta_f_over_omega0", "values": [...]},   # optional
      "tracked_states": [[1, 3], "{2, 4}"],
      "budget": {"max_points": 10000, "max_atoms": 12}                   # optional
    }

Axis paths are either dotted keys into the run config
(``schedule.tau_us``, ``graph.lambda_um``, ``graph.wire_weight_2pi_MHz``,
...) or one of the ratio shorthands that implement dimensionless scans:

* ``ratio.delta_f_over_omega0`` - every vertex weight set to x * omega0;
* ``ratio.rb_over_lambda``     - spacing constant set to R_b / x at fixed
  interaction coefficients (geometry is rebuilt, the physics constants are
  never touched);
* ``ratio.wire_weight_over_omega0`` - wire vertices set to x * omega0.

Every grid point derives its seed from the master seed and its point index
alone, so results never depend on worker count or completion order.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .config import (
    TOOL_NAME,
    build_table,
    dump_canonical,
    execute_run,
    resolve_omega0,
    result_to_dict,
    write_result,
)
from .drive import blockade_radius
from .errors import ConfigError
from .graphs import Species, format_vertex_set, parse_vertex_set, vertex_mask

MANIFEST_SCHEMA_VERSION = 1
AGGREGATE_CSV_SCHEMA = 1

DEFAULT_MAX_POINTS = 10_000
DEFAULT_MAX_SWEEP_ATOMS = 12

_SEED_DOMAIN_SWEEP = 4

#: CSV numeric format: 17 significant digits, '.' decimal, no locale.
_FMT = "{:.17g}"


def point_seed(master_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(_SEED_DOMAIN_SWEEP, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# axis resolution
# ---------------------------------------------------------------------------

def _set_dotted(cfg: dict, path: str, value: Any) -> None:
    parts = path.split(".")
    node = cfg
    for part in parts[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[parts[-1]] = value


def _template_omega0(cfg: Mapping) -> float:
    schedule = cfg.get("schedule")
    if not isinstance(schedule, Mapping):
        raise ConfigError("run.schedule", "sweep template needs a schedule block")
    return resolve_omega0(schedule)


def apply_axis(cfg: dict, path: str, value: float) -> None:
    """Write one axis value into a run-config dict (in place)."""
    if path == "ratio.delta_f_over_omega0":
        omega0 = _template_omega0(cfg)
        graph = cfg.setdefault("graph", {})
        if "chain" in graph:
            graph["chain"]["weights_2pi_MHz"] = value * omega0
        elif "library" in graph:
            graph["weights_2pi_MHz"] = value * omega0
        else:
            raise ConfigError(
                "axis.path",
                "ratio.delta_f_over_omega0 needs a library or chain graph block",
            )
    elif path == "ratio.wire_weight_over_omega0":
        omega0 = _template_omega0(cfg)
        graph = cfg.setdefault("graph", {})
        if "library" not in graph:
            raise ConfigError(
                "axis.path", "ratio.wire_weight_over_omega0 needs a library graph block"
            )
        graph["wire_weight_2pi_MHz"] = value * omega0
    elif path == "ratio.rb_over_lambda":
        omega0 = _template_omega0(cfg)
        table = build_table(cfg.get("interactions"))
        c6 = table.coefficients(Species.GRAPH, Species.GRAPH).c6
        rb = blockade_radius(c6, omega0)
        graph = cfg.setdefault("graph", {})
        if "library" not in graph:
            raise ConfigError("axis.path", "ratio.rb_over_lambda needs a library graph block")
        graph["lambda_um"] = rb / value
    elif path == "ratio.rb_over_spacing":
        omega0 = _template_omega0(cfg)
        table = build_table(cfg.get("interactions"))
        c6 = table.coefficients(Species.GRAPH, Species.GRAPH).c6
        rb = blockade_radius(c6, omega0)
        graph = cfg.setdefault("graph", {})
        if "chain" not in graph:
            raise ConfigError("axis.path", "ratio.rb_over_spacing needs a chain graph block")
        graph["chain"]["spacing_um"] = rb / value
    elif path.startswith("ratio."):
        raise ConfigError("axis.path", f"unknown ratio shorthand {path!r}")
    else:
        _set_dotted(cfg, path, value)


# ---------------------------------------------------------------------------
# spec validation
# ---------------------------------------------------------------------------

def _axis(spec: Mapping, name: str, required: bool) -> tuple[str, list[float]] | None:
    axis = spec.get(name)
    if axis is None:
        if required:
            raise ConfigError(name, "missing required field")
        return None
    if not isinstance(axis, Mapping):
        raise ConfigError(name, "expected an object")
    path = axis.get("path")
    if not isinstance(path, str) or not path:
        raise ConfigError(f"{name}.path", "expected a nonempty string")
    values = axis.get("values")
    if not isinstance(values, (list, tuple)) or len(values) < 2:
        raise ConfigError(f"{name}.values", "expected a list of at least two values")
    out = [float(v) for v in values]
    if sorted(out) != out:
        raise ConfigError(f"{name}.values", "grid values must be sorted ascending")
    if len(set(out)) != len(out):
        raise ConfigError(f"{name}.values", "grid values must be distinct")
    return path, out


def _tracked_masks(spec: Mapping) -> list[int]:
    tracked = spec.get("tracked_states", [])
    if not isinstance(tracked, (list, tuple)):
        raise ConfigError("tracked_states", "expected a list")
    masks = []
    for i, entry in enumerate(tracked):
        if isinstance(entry, str):
            masks.append(parse_vertex_set(entry))
        elif isinstance(entry, (list, tuple)):
            masks.append(vertex_mask(int(v) for v in entry))
        else:
            raise ConfigError(f"tracked_states[{i}]", f"cannot interpret {entry!r}")
    return masks


class SweepPlan:
    """Validated sweep: the point grid plus bookkeeping."""

    def __init__(self, spec: Mapping):
        if not isinstance(spec, Mapping):
            raise ConfigError("<sweep>", "expected an object")
        run = spec.get("run")
        if not isinstance(run, Mapping):
            raise ConfigError("run", "sweep needs a 'run' config template")
        self.template = dict(run)
        self.axis1_path, self.axis1_values = _axis(spec, "axis1", required=True)
        axis2 = _axis(spec, "axis2", required=False)
        self.axis2_path, self.axis2_values = axis2 if axis2 else (None, None)
        self.tracked = _tracked_masks(spec)

        budget = spec.get("budget", {})
        if not isinstance(budget, Mapping):
            raise ConfigError("budget", "expected an object")
        max_points = int(budget.get("max_points", DEFAULT_MAX_POINTS))
        self.max_atoms = int(budget.get("max_atoms", DEFAULT_MAX_SWEEP_ATOMS))
        n_points = len(self.axis1_values) * (len(self.axis2_values) if self.axis2_values else 1)
        if n_points > max_points:
            raise ConfigError(
                "budget.max_points",
                f"sweep would run {n_points} points, over the budget of {max_points}",
            )
        self.points = []
        idx = 0
        for v1 in self.axis1_values:
            if self.axis2_values is None:
                self.points.append((idx, v1, None))
                idx += 1
            else:
                for v2 in self.axis2_values:
                    self.points.append((idx, v1, v2))
                    idx += 1

    def point_config(self, index: int, v1: float, v2: float | None, master_seed: int) -> dict:
        import json as _json

        cfg = _json.loads(_json.dumps(self.template))
        apply_axis(cfg, self.axis1_path, v1)
        if self.axis2_path is not None:
            apply_axis(cfg, self.axis2_path, v2)
        cfg["seed"] = point_seed(master_seed, index)
        evo = cfg.setdefault("evolution", {})
        evo.setdefault("max_atoms", self.max_atoms)
        return cfg


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def _run_point(args: tuple) -> tuple[int, dict | None, str | None]:
    index, cfg, base_dir, out_dir = args
    try:
        result, array, echo = execute_run(cfg, base_dir=Path(base_dir) if base_dir else None)
        record = result_to_dict(result, array, echo)
        path = Path(out_dir) / "points" / f"point_{index:05d}.result.json"
        write_result(path, record)
        return index, record, None
    except Exception as exc:  # failures are recorded per point, sweep continues
        return index, None, f"{type(exc).__name__}: {exc}"


def run_sweep(
    spec: Mapping,
    out_dir: str | Path,
    *,
    master_seed: int,
    base_dir: Path | None = None,
    threads: int = 1,
) -> dict:
    """Execute all grid points, write per-point results, manifest and CSV.

    Point failures are recorded in the manifest and do not stop the sweep.
    Returns the manifest dict.
    """
    plan = SweepPlan(spec)
    out = Path(out_dir)
    (out / "points").mkdir(parents=True, exist_ok=True)

    tasks = [
        (idx, plan.point_config(idx, v1, v2, master_seed), str(base_dir) if base_dir else None, str(out))
        for idx, v1, v2 in plan.points
    ]
    results: dict[int, tuple[dict | None, str | None]] = {}
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for index, record, error in pool.map(_run_point, tasks):
                results[index] = (record, error)
    else:
        for task in tasks:
            index, record, error = _run_point(task)
            results[index] = (record, error)

    manifest_points = []
    records: dict[int, dict] = {}
    for idx, v1, v2 in plan.points:
        record, error = results[idx]
        entry: dict[str, Any] = {"index": idx, "axis1": v1}
        if plan.axis2_path:
            entry["axis2"] = v2
        if error is not None:
            entry["status"] = "failed"
            entry["error"] = error
        else:
            entry["status"] = "ok"
            entry["result_file"] = f"points/point_{idx:05d}.result.json"
            records[idx] = record
        manifest_points.append(entry)

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool": {"name": TOOL_NAME, "version": __version__},
        "seed": master_seed,
        "axis1": {"path": plan.axis1_path, "values": plan.axis1_values},
        "axis2": None if plan.axis2_path is None else {
            "path": plan.axis2_path, "values": plan.axis2_values},
        "tracked_states": [format_vertex_set(m) for m in plan.tracked],
        "points": manifest_points,
        "aggregate_csv": "aggregate.csv",
        "csv_schema": AGGREGATE_CSV_SCHEMA,
        "csv_columns": _aggregate_header(manifest_tracked=[format_vertex_set(m) for m in plan.tracked],
                                         has_axis2=plan.axis2_path is not None),
    }
    (out / "aggregate.csv").write_text(
        build_aggregate_csv(manifest, records), encoding="utf-8"
    )
    (out / "manifest.json").write_text(dump_canonical(manifest), encoding="utf-8")
    return manifest


def _aggregate_header(manifest_tracked: Sequence[str], has_axis2: bool) -> list[str]:
    header = ["axis1"] + (["axis2"] if has_axis2 else [])
    header += [f"P{name}" for name in manifest_tracked]
    header += ["mean_density"]
    return header


def build_aggregate_csv(manifest: Mapping, records: Mapping[int, Mapping]) -> str:
    """Aggregate CSV text as a pure fold over per-point result records.

    Failed points are skipped; rows follow the manifest point order.
    """
    has_axis2 = manifest.get("axis2") is not None
    tracked = list(manifest.get("tracked_states", []))
    header = _aggregate_header(tracked, has_axis2)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for entry in manifest["points"]:
        if entry.get("status") != "ok":
            continue
        record = records[entry["index"]]
        probs = {e["set"]: e["probability"] for e in record["distribution"]}
        row = [_FMT.format(entry["axis1"])]
        if has_axis2:
            row.append(_FMT.format(entry["axis2"]))
        row += [_FMT.format(probs.get(name, 0.0)) for name in tracked]
        row.append(_FMT.format(record["mean_density"]))
        writer.writerow(row)
    return buf.getvalue()


def rebuild_aggregate(out_dir: str | Path) -> str:
    """Re-derive the aggregate CSV from the manifest and point files."""
    import json as _json

    out = Path(out_dir)
    manifest = _json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    records = {}
    for entry in manifest["points"]:
        if entry.get("status") == "ok":
            records[entry["index"]] = _json.loads(
                (out / entry["result_file"]).read_text(encoding="utf-8")
            )
    return build_aggregate_csv(manifest, records)
