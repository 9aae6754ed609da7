"""Run configuration files: schema, validation, execution and result I/O.

A run config is a JSON object::

    {
      "graph": {"file": "p4_mis.json"}
               | {"library": "P4", "lambda_um": 7.0,
                  "unit_disk_radius_um": 10.5,        # optional
                  "weights_2pi_MHz": 4.0 | [..],       # required
                  "wire_weight_2pi_MHz": 1.6}          # optional
               | {"chain": {"n_sites": 9, "spacing_um": 7.1,
                            "unit_disk_radius_um": ...,   # optional
                            "weights_2pi_MHz": 4.0 | [..]}},
      "schedule": {"omega0_2pi_MHz": 1.75
                   | "one_photon": {"omega420_2pi_MHz": 40.0,
                                     "omega1013_2pi_MHz": 50.0,
                                     "delta_m_2pi_MHz": 570.0},
                   "delta0_2pi_MHz": -6.0, "alpha_d": 1.0, "tau_us": 5.0,
                   "tf1_us": ..., "tf2_us": ...},       # optional
      "interactions": {...},                             # optional override
      "evolution": {"method": "tdse" | "trajectories",
                    "trajectories": 200,
                    "gamma_mode": "scaled" | "bare",
                    "population_factor": ...,            # optional
                    "dt_max_phase_rad": 0.05,
                    "max_atoms": 16},
      "disorder": {"sigma_um": [0.1, 0.1, 0.6], "samples": 20,
                   "distribution": "gaussian"},          # optional
      "seed": 1
    }

The per-atom final detunings are the vertex weights of the graph block.
Validation errors carry the dotted path of the offending field.  Result
files are canonical JSON (sorted keys) so identical (config, seed) pairs
produce byte-identical output; wall-clock timing is only included on
explicit request since it would break that contract.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from .drive import DriveSchedule, schedule_for_array, two_photon_rabi
from .engine import (
    DEFAULT_DT_MAX_PHASE,
    DEFAULT_MAX_ATOMS,
    DisorderModel,
    RunResult,
    propagate_disordered,
    propagate_tdse,
    propagate_trajectories,
)
from .errors import ConfigError, RydmisError
from .graphs import (
    AtomArray,
    array_from_dict,
    bitstring,
    format_vertex_set,
    library_graph,
    linear_chain,
    load_graph,
)
from .interactions import InteractionTable, PairCoefficients, default_interaction_table

RESULT_SCHEMA_VERSION = 1
TOOL_NAME = "rydmis"


def _require(mapping: Mapping, key: str, path: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return mapping[key]


def _number(value: Any, path: str, *, positive: bool = False, nonnegative: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    v = float(value)
    if positive and not v > 0:
        raise ConfigError(path, f"must be > 0, got {v}")
    if nonnegative and v < 0:
        raise ConfigError(path, f"must be >= 0, got {v}")
    return v


def _integer(value: Any, path: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def load_json(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a JSON object")
    return data


# ---------------------------------------------------------------------------
# block builders
# ---------------------------------------------------------------------------

def build_array(graph_cfg: Mapping, base_dir: Path | None = None) -> AtomArray:
    """Materialize the graph block of a run config."""
    if not isinstance(graph_cfg, Mapping):
        raise ConfigError("graph", "expected an object")
    kinds = [k for k in ("file", "library", "chain") if k in graph_cfg]
    if len(kinds) != 1:
        raise ConfigError("graph", "exactly one of 'file', 'library', 'chain' is required")
    kind = kinds[0]
    try:
        if kind == "file":
            path = Path(graph_cfg["file"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            array = load_graph(path)
        elif kind == "library":
            lam = _number(_require(graph_cfg, "lambda_um", "graph"), "graph.lambda_um", positive=True)
            radius = graph_cfg.get("unit_disk_radius_um")
            weights = _require(graph_cfg, "weights_2pi_MHz", "graph")
            array = library_graph(
                str(graph_cfg["library"]),
                lam,
                radius=None if radius is None else _number(radius, "graph.unit_disk_radius_um", positive=True),
                weights=weights,
            )
            if "wire_weight_2pi_MHz" in graph_cfg:
                array = array.with_wire_weight(
                    _number(graph_cfg["wire_weight_2pi_MHz"], "graph.wire_weight_2pi_MHz")
                )
        else:
            chain = graph_cfg["chain"]
            if not isinstance(chain, Mapping):
                raise ConfigError("graph.chain", "expected an object")
            radius = chain.get("unit_disk_radius_um")
            array = linear_chain(
                _integer(_require(chain, "n_sites", "graph.chain"), "graph.chain.n_sites", minimum=1),
                _number(_require(chain, "spacing_um", "graph.chain"), "graph.chain.spacing_um", positive=True),
                radius=None if radius is None else _number(radius, "graph.chain.unit_disk_radius_um", positive=True),
                weights=_require(chain, "weights_2pi_MHz", "graph.chain"),
            )
    except ConfigError:
        raise
    except (RydmisError, OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError("graph", str(exc)) from exc
    return array


def resolve_omega0(schedule_cfg: Mapping) -> float:
    """Plateau Rabi frequency from either form of the schedule block."""
    has_direct = "omega0_2pi_MHz" in schedule_cfg
    has_one_photon = "one_photon" in schedule_cfg
    if has_direct == has_one_photon:
        raise ConfigError(
            "schedule", "exactly one of 'omega0_2pi_MHz' or 'one_photon' is required"
        )
    if has_direct:
        return _number(schedule_cfg["omega0_2pi_MHz"], "schedule.omega0_2pi_MHz", nonnegative=True)
    op = schedule_cfg["one_photon"]
    if not isinstance(op, Mapping):
        raise ConfigError("schedule.one_photon", "expected an object")
    omega420 = _number(_require(op, "omega420_2pi_MHz", "schedule.one_photon"),
                       "schedule.one_photon.omega420_2pi_MHz", nonnegative=True)
    omega1013 = _number(_require(op, "omega1013_2pi_MHz", "schedule.one_photon"),
                        "schedule.one_photon.omega1013_2pi_MHz", nonnegative=True)
    delta_m = _number(_require(op, "delta_m_2pi_MHz", "schedule.one_photon"),
                      "schedule.one_photon.delta_m_2pi_MHz")
    if delta_m == 0:
        raise ConfigError("schedule.one_photon.delta_m_2pi_MHz", "must be nonzero")
    return two_photon_rabi(omega420, omega1013, delta_m)


def default_population_factor(schedule_cfg: Mapping) -> float | None:
    """Upper-leg population fraction implied by the one-photon block, if any."""
    op = schedule_cfg.get("one_photon")
    if not isinstance(op, Mapping):
        return None
    try:
        return (float(op["omega1013_2pi_MHz"]) / (2.0 * float(op["delta_m_2pi_MHz"]))) ** 2
    except (KeyError, TypeError, ValueError):
        return None


def build_schedule(schedule_cfg: Mapping, array: AtomArray) -> DriveSchedule:
    if not isinstance(schedule_cfg, Mapping):
        raise ConfigError("schedule", "expected an object")
    omega0 = resolve_omega0(schedule_cfg)
    delta0 = _number(_require(schedule_cfg, "delta0_2pi_MHz", "schedule"), "schedule.delta0_2pi_MHz")
    tau = _number(_require(schedule_cfg, "tau_us", "schedule"), "schedule.tau_us", positive=True)
    alpha_d = _number(schedule_cfg.get("alpha_d", 1.0), "schedule.alpha_d", positive=True)
    tf1 = schedule_cfg.get("tf1_us")
    tf2 = schedule_cfg.get("tf2_us")
    try:
        return schedule_for_array(
            omega0,
            delta0,
            array.weights,
            alpha_d=alpha_d,
            tau=tau,
            t_f1=None if tf1 is None else _number(tf1, "schedule.tf1_us", positive=True),
            t_f2=None if tf2 is None else _number(tf2, "schedule.tf2_us", positive=True),
        )
    except RydmisError as exc:
        raise ConfigError("schedule", str(exc)) from exc


def build_table(interactions_cfg: Mapping | None) -> InteractionTable:
    if interactions_cfg is None:
        return default_interaction_table()
    if not isinstance(interactions_cfg, Mapping):
        raise ConfigError("interactions", "expected an object")
    default = default_interaction_table()
    pairs = dict(default.pairs)
    decay = dict(default.decay)
    for key, entry in interactions_cfg.get("pairs", {}).items():
        parts = tuple(sorted(str(key).split("-")))
        if len(parts) != 2 or any(p not in ("graph", "wire") for p in parts):
            raise ConfigError(f"interactions.pairs.{key}", "key must be like 'graph-wire'")
        path = f"interactions.pairs.{key}"
        try:
            pairs[parts] = PairCoefficients(
                c6=_number(_require(entry, "c6_2pi_GHz_um6", path), f"{path}.c6_2pi_GHz_um6", positive=True),
                c3=_number(_require(entry, "c3_2pi_GHz_um3", path), f"{path}.c3_2pi_GHz_um3", positive=True),
                r_vdw=_number(_require(entry, "r_vdw_um", path), f"{path}.r_vdw_um", positive=True),
                r_lr=_number(_require(entry, "r_lr_um", path), f"{path}.r_lr_um", positive=True),
            )
        except RydmisError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(path, str(exc)) from exc
    for key, entry in interactions_cfg.get("decay", {}).items():
        if key not in ("graph", "wire"):
            raise ConfigError(f"interactions.decay.{key}", "species must be 'graph' or 'wire'")
        decay[key] = 1.0 / _number(
            _require(entry, "tau_m_us", f"interactions.decay.{key}"),
            f"interactions.decay.{key}.tau_m_us", positive=True,
        )
    return InteractionTable(pairs=pairs, decay=decay)


def _evolution_fields(cfg: Mapping) -> dict:
    evolution = cfg.get("evolution", {})
    if not isinstance(evolution, Mapping):
        raise ConfigError("evolution", "expected an object")
    method = evolution.get("method", "tdse")
    if method not in ("tdse", "trajectories"):
        raise ConfigError("evolution.method", f"must be 'tdse' or 'trajectories', got {method!r}")
    out = {
        "method": method,
        "trajectories": _integer(evolution.get("trajectories", 200), "evolution.trajectories", minimum=1),
        "gamma_mode": evolution.get("gamma_mode", "scaled"),
        "population_factor": evolution.get("population_factor"),
        "dt_max_phase": _number(
            evolution.get("dt_max_phase_rad", DEFAULT_DT_MAX_PHASE),
            "evolution.dt_max_phase_rad", positive=True),
        "max_atoms": _integer(evolution.get("max_atoms", DEFAULT_MAX_ATOMS),
                              "evolution.max_atoms", minimum=1),
    }
    if out["gamma_mode"] not in ("scaled", "bare"):
        raise ConfigError("evolution.gamma_mode",
                          f"must be 'scaled' or 'bare', got {out['gamma_mode']!r}")
    if out["population_factor"] is not None:
        out["population_factor"] = _number(out["population_factor"],
                                           "evolution.population_factor", nonnegative=True)
    return out


def _disorder_model(cfg: Mapping, seed: int) -> DisorderModel | None:
    disorder = cfg.get("disorder")
    if disorder is None:
        return None
    if not isinstance(disorder, Mapping):
        raise ConfigError("disorder", "expected an object")
    sigma = disorder.get("sigma_um")
    if not isinstance(sigma, (list, tuple)) or len(sigma) != 3:
        raise ConfigError("disorder.sigma_um", "expected [sigma_x, sigma_y, sigma_z]")
    try:
        return DisorderModel(
            sigma=tuple(_number(s, "disorder.sigma_um", nonnegative=True) for s in sigma),
            samples=_integer(_require(disorder, "samples", "disorder"), "disorder.samples", minimum=1),
            seed=seed,
            distribution=str(disorder.get("distribution", "gaussian")),
        )
    except RydmisError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("disorder", str(exc)) from exc


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def execute_run(
    cfg: Mapping,
    *,
    base_dir: Path | None = None,
    seed_override: int | None = None,
) -> tuple[RunResult, AtomArray, dict]:
    """Validate and execute one run config.

    Returns (result, array, resolved config echo).  The echo carries the
    effective seed, so a result file can be re-run as-is.
    """
    if not isinstance(cfg, Mapping):
        raise ConfigError("<config>", "expected an object")
    array = build_array(_require(cfg, "graph", "<config>"), base_dir)
    schedule = build_schedule(_require(cfg, "schedule", "<config>"), array)
    table = build_table(cfg.get("interactions"))
    evo = _evolution_fields(cfg)
    seed = seed_override if seed_override is not None else cfg.get("seed", 0)
    seed = _integer(seed, "seed", minimum=0)
    model = _disorder_model(cfg, seed)

    factor = evo["population_factor"]
    if factor is None:
        factor = default_population_factor(cfg.get("schedule", {}))

    if model is not None:
        result = propagate_disordered(
            array, table, schedule, model,
            method=evo["method"],
            n_trajectories=evo["trajectories"],
            seed=seed,
            gamma_mode=evo["gamma_mode"],
            population_factor=factor,
            dt_max_phase=evo["dt_max_phase"],
            max_atoms=evo["max_atoms"],
        )
    elif evo["method"] == "tdse":
        result = propagate_tdse(
            array, table, schedule,
            dt_max_phase=evo["dt_max_phase"], max_atoms=evo["max_atoms"],
        )
    else:
        result = propagate_trajectories(
            array, table, schedule, evo["trajectories"], seed,
            gamma_mode=evo["gamma_mode"],
            population_factor=factor,
            dt_max_phase=evo["dt_max_phase"],
            max_atoms=evo["max_atoms"],
        )

    echo = json.loads(json.dumps(dict(cfg)))  # deep copy, JSON-clean
    echo["seed"] = seed
    return result, array, echo


# ---------------------------------------------------------------------------
# result files
# ---------------------------------------------------------------------------

def result_to_dict(
    result: RunResult,
    array: AtomArray,
    config_echo: Mapping,
    *,
    labels: Mapping[int, str] | None = None,
    wall_time_s: float | None = None,
) -> dict:
    """JSON-ready result record (schema v1), distribution sorted by
    descending probability with ascending-mask tie-break."""
    n = array.n_atoms
    probs = np.asarray(result.probabilities, dtype=float)
    order = np.lexsort((np.arange(len(probs)), -probs))
    entries = []
    for b in order:
        mask = int(b)
        entry = {
            "bitstring": bitstring(mask, n),
            "set": format_vertex_set(mask),
            "probability": float(probs[mask]),
            "stderr": None if result.stderr is None else float(result.stderr[mask]),
        }
        if labels is not None:
            entry["class"] = labels.get(mask, "")
        entries.append(entry)
    out = {
        "schema_version": RESULT_SCHEMA_VERSION,
        "tool": {"name": TOOL_NAME, "version": __version__},
        "config": dict(config_echo),
        "distribution": entries,
        "rydberg_density": [float(v) for v in result.rydberg_density],
        "mean_density": result.mean_density,
        "norm_drift": result.norm_drift,
        "trajectories": result.trajectories,
        "engine": dict(result.metadata),
    }
    if wall_time_s is not None:
        out["wall_time_s"] = wall_time_s
    return out


def dump_canonical(data: Mapping) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_result(path: str | Path, data: Mapping) -> None:
    Path(path).write_text(dump_canonical(data), encoding="utf-8")


def load_result(path: str | Path) -> dict:
    return load_json(path)


def array_from_result(data: Mapping, base_dir: Path | None = None) -> AtomArray:
    """Rebuild the atom array a result file was produced from."""
    cfg = data.get("config")
    if not isinstance(cfg, Mapping) or "graph" not in cfg:
        raise ConfigError("config.graph", "result file carries no graph block")
    return build_array(cfg["graph"], base_dir)
