"""Atom-array geometry, unit-disk graphs and the exact classical MWIS oracle.

Vertices are 1-based.  A configuration of Rydberg excitations is stored as a
plain ``int`` bitmask in which bit ``i - 1`` corresponds to vertex ``i``
(vertex 1 is the least significant bit).  Every module in the package shares
this convention; :func:`bitstring` renders a mask msb-first, so vertex 1 is
the rightmost character.

Edges follow the closed-disk criterion ``dist(i, j)**2 <= radius**2``, i.e.
ties at exactly the unit-disk radius count as edges.  Distances are compared
squared so the criterion is bit-exact reproducible from the stored positions.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import GeometryError, RydmisError

#: Enumeration above this size is refused (2**24 masks is the practical limit).
ORACLE_MAX_ATOMS = 24

#: Default unit-disk radius of the bundled layouts, in units of the spacing
#: constant.  1.5 sits inside the blockade window of the annealing regime the
#: bundled configs target (nearest neighbours and sqrt(2)-diagonals blockaded,
#: next-nearest pairs at >= 1.73 spacings free), which is what makes the
#: triangle of the pan graphs an edge while keeping its tail independent.
LIBRARY_RADIUS_FACTOR = 1.5

_ENUM_CHUNK = 1 << 20


class Species(str, enum.Enum):
    """Role of an atom: part of the encoded graph or of an auxiliary wire."""

    GRAPH = "graph"
    WIRE = "wire"


@dataclass(frozen=True)
class Vertex:
    """A single trapped atom: 1-based index, position in um, species tag and
    weight (the per-atom final detuning, value/2pi in MHz)."""

    index: int
    position: tuple[float, float, float]
    species: Species = Species.GRAPH
    weight: float = 1.0


@dataclass(frozen=True)
class AtomArray:
    """Immutable atom arrangement with derived unit-disk edges."""

    vertices: tuple[Vertex, ...]
    unit_disk_radius: float
    edges: frozenset[tuple[int, int]]

    @property
    def n_atoms(self) -> int:
        return len(self.vertices)

    @cached_property
    def positions(self) -> np.ndarray:
        """(N, 3) array of positions in um."""
        return np.array([v.position for v in self.vertices], dtype=float)

    @cached_property
    def weights(self) -> np.ndarray:
        """(N,) array of vertex weights (2pi*MHz)."""
        return np.array([v.weight for v in self.vertices], dtype=float)

    @cached_property
    def species(self) -> tuple[Species, ...]:
        return tuple(v.species for v in self.vertices)

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        """(N, N) matrix of pairwise distances in um."""
        delta = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt(np.sum(delta * delta, axis=-1))

    def distance(self, i: int, j: int) -> float:
        """Distance in um between vertices ``i`` and ``j`` (1-based)."""
        return float(self.distance_matrix[i - 1, j - 1])

    def with_weights(self, weights: Sequence[float]) -> "AtomArray":
        """Copy of the array with the given per-vertex weights."""
        if len(weights) != self.n_atoms:
            raise GeometryError(
                f"expected {self.n_atoms} weights, got {len(weights)}"
            )
        vertices = tuple(
            Vertex(v.index, v.position, v.species, float(w))
            for v, w in zip(self.vertices, weights)
        )
        return AtomArray(vertices, self.unit_disk_radius, self.edges)

    def with_wire_weight(self, wire_weight: float) -> "AtomArray":
        """Copy with every wire-species vertex set to ``wire_weight``."""
        weights = [
            float(wire_weight) if v.species is Species.WIRE else v.weight
            for v in self.vertices
        ]
        return self.with_weights(weights)


# ---------------------------------------------------------------------------
# vertex-set bitmask helpers
# ---------------------------------------------------------------------------

def vertex_mask(members: Iterable[int]) -> int:
    """Bitmask for a collection of 1-based vertex indices."""
    mask = 0
    for i in members:
        if i < 1:
            raise RydmisError(f"vertex indices are 1-based, got {i}")
        mask |= 1 << (i - 1)
    return mask


def mask_members(mask: int) -> tuple[int, ...]:
    """Sorted 1-based vertex indices present in ``mask``."""
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def format_vertex_set(mask: int) -> str:
    """Render a mask as sorted set notation, e.g. ``{1, 3}``."""
    return "{" + ", ".join(str(i) for i in mask_members(mask)) + "}"


def parse_vertex_set(text: str) -> int:
    """Inverse of :func:`format_vertex_set`; also accepts bare ``1,3`` lists."""
    body = text.strip().removeprefix("{").removesuffix("}").strip()
    if not body:
        return 0
    try:
        return vertex_mask(int(tok) for tok in body.split(","))
    except ValueError as exc:
        raise RydmisError(f"cannot parse vertex set {text!r}") from exc


def bitstring(mask: int, n_atoms: int) -> str:
    """msb-first 0/1 string of length ``n_atoms`` (vertex 1 is rightmost)."""
    return format(mask, f"0{n_atoms}b")


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _pairwise_check(positions: np.ndarray, min_distance: float | None) -> None:
    n = len(positions)
    for i in range(n):
        for j in range(i + 1, n):
            d2 = float(np.sum((positions[i] - positions[j]) ** 2))
            if d2 == 0.0:
                raise GeometryError(
                    f"vertices {i + 1} and {j + 1} share the same position"
                )
            if min_distance is not None and d2 < min_distance * min_distance:
                raise GeometryError(
                    f"vertices {i + 1} and {j + 1} are {math.sqrt(d2):.4f} um "
                    f"apart, closer than the minimum spacing {min_distance} um"
                )


def _edges_for(positions: np.ndarray, radius: float) -> frozenset[tuple[int, int]]:
    n = len(positions)
    r2 = radius * radius
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            d2 = float(np.sum((positions[i] - positions[j]) ** 2))
            if d2 <= r2:
                edges.add((i + 1, j + 1))
    return frozenset(edges)


def build_unit_disk_graph(
    positions: Sequence[Sequence[float]],
    radius: float,
    *,
    species: Sequence[Species] | None = None,
    weights: Sequence[float] | float | None = None,
    min_distance: float | None = None,
) -> AtomArray:
    """Build an atom array whose edges are exactly the pairs within ``radius``.

    Parameters
    ----------
    positions
        One 3-vector (um) per vertex, in vertex order.
    radius
        Unit-disk radius in um; pairs at exactly the radius are edges.
    species, weights
        Optional per-vertex species tags and weights.  A scalar weight is
        broadcast to every vertex; defaults are graph-species and weight 1.
    min_distance
        When given, any pair closer than this spacing is rejected (used to
        enforce the short-range validity floor of the pair potential).
    """
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    if pos.size == 0:
        raise GeometryError("need at least one position")
    if pos.shape[1] != 3:
        raise GeometryError(f"positions must be 3-vectors, got shape {pos.shape}")
    if not radius > 0:
        raise GeometryError(f"unit-disk radius must be > 0, got {radius}")
    n = len(pos)
    _pairwise_check(pos, min_distance)

    if species is None:
        species = [Species.GRAPH] * n
    elif len(species) != n:
        raise GeometryError("species list length does not match positions")
    if weights is None:
        weight_list = [1.0] * n
    elif np.isscalar(weights):
        weight_list = [float(weights)] * n
    else:
        if len(weights) != n:  # type: ignore[arg-type]
            raise GeometryError("weights length does not match positions")
        weight_list = [float(w) for w in weights]  # type: ignore[union-attr]

    vertices = tuple(
        Vertex(i + 1, (float(p[0]), float(p[1]), float(p[2])), Species(species[i]), weight_list[i])
        for i, p in enumerate(pos)
    )
    return AtomArray(vertices, float(radius), _edges_for(pos, radius))


def linear_chain(
    n_sites: int,
    spacing: float,
    *,
    radius: float | None = None,
    weights: Sequence[float] | float | None = None,
) -> AtomArray:
    """Equally spaced 1D chain along x, nearest-neighbour edges by default."""
    if n_sites < 1:
        raise GeometryError("chain needs at least one site")
    if not spacing > 0:
        raise GeometryError("chain spacing must be > 0")
    if radius is None:
        radius = LIBRARY_RADIUS_FACTOR * spacing
    positions = [(i * spacing, 0.0, 0.0) for i in range(n_sites)]
    return build_unit_disk_graph(positions, radius, weights=weights)


# ---------------------------------------------------------------------------
# bundled layouts
# ---------------------------------------------------------------------------

#: Apex drop of the J14 bipyramid, in units of the spacing constant; chosen so
#: the apex-to-ring edges match the ring edge length to ~1e-4.
_J14_APEX_DROP = -0.183368
_J14_PRISM_HEIGHT = 1.0

LIBRARY_GRAPHS = ("P4", "Fan3", "Pan3", "Pan5_W1", "Pan7_W2", "Tower", "J14")


def _p4_positions(lam: float) -> list[tuple[float, float, float]]:
    h = 0.5 * math.sqrt(3.0) * lam
    return [(-lam, 0.0, 0.0), (-0.5 * lam, h, 0.0), (0.5 * lam, h, 0.0), (lam, 0.0, 0.0)]


def _fan3_positions(lam: float) -> list[tuple[float, float, float]]:
    h = 0.5 * math.sqrt(3.0) * lam
    return [
        (0.0, 0.0, 0.0),
        (-lam, 0.0, 0.0),
        (-0.5 * lam, h, 0.0),
        (0.5 * lam, h, 0.0),
        (lam, 0.0, 0.0),
    ]


def _pan3_positions(lam: float) -> list[tuple[float, float, float]]:
    s = lam / math.sqrt(2.0)
    return [(-s, s, 0.0), (-s, -s, 0.0), (0.0, 0.0, 0.0), (lam, 0.0, 0.0)]


def wire_positions_w1(lam: float) -> list[tuple[float, float, float]]:
    """Two-atom wire bridging vertices 1 and 2 of the Pan3 layout: each wire
    atom sits exactly one spacing from its graph vertex and from its partner."""
    x = -lam / math.sqrt(2.0) - 0.5 * lam * math.sqrt(1.0 + 2.0 * math.sqrt(2.0))
    return [(x, 0.5 * lam, 0.0), (x, -0.5 * lam, 0.0)]


def wire_positions_w2(lam: float) -> list[tuple[float, float, float]]:
    """Four-atom wire for the Pan3 layout; the chain runs 1-5-7-8-6-2 with
    one-spacing links."""
    s = lam / math.sqrt(2.0)
    x_inner = -s - lam
    x_outer = -0.5 * lam * (2.0 + math.sqrt(2.0) + math.sqrt(1.0 + 2.0 * math.sqrt(2.0)))
    return [
        (x_inner, s, 0.0),
        (x_inner, -s, 0.0),
        (x_outer, 0.5 * lam, 0.0),
        (x_outer, -0.5 * lam, 0.0),
    ]


def _tower_positions(lam: float) -> list[tuple[float, float, float]]:
    s = lam / math.sqrt(2.0)
    return [
        (0.0, 0.0, 0.0),
        (0.0, -lam, 0.0),
        (-s, -s - lam, 0.0),
        (s, -s - lam, 0.0),
        (2.0 * s, -2.0 * s - lam, 0.0),
        (0.0, -lam * (1.0 + math.sqrt(2.0)), 0.0),
        (-2.0 * s, -2.0 * s - lam, 0.0),
    ]


def _j14_positions(lam: float) -> list[tuple[float, float, float]]:
    x0 = 0.0
    y0 = 0.0
    a = lam / math.sqrt(3.0)
    b = lam / (2.0 * math.sqrt(3.0))
    eta = _J14_APEX_DROP
    q = _J14_PRISM_HEIGHT
    return [
        (x0, y0, eta * lam),
        (x0, y0 + a, -lam),
        (x0 - 0.5 * lam, y0 - b, -lam),
        (x0 + 0.5 * lam, y0 - b, -lam),
        (x0 + 0.5 * lam, y0 - b, -2.0 * lam * q),
        (x0, y0 + a, -2.0 * lam * q),
        (x0 - 0.5 * lam, y0 - b, -2.0 * lam * q),
        (x0, y0, -lam * (eta + 2.0 * q + 1.0)),
    ]


def library_graph(
    name: str,
    lam: float,
    *,
    radius: float | None = None,
    weights: Sequence[float] | float | None = None,
) -> AtomArray:
    """One of the bundled layouts, scaled by the spacing constant ``lam`` (um).

    ``Pan5_W1`` and ``Pan7_W2`` are the Pan3 layout augmented with a two- and
    four-atom wire respectively; the wire atoms are tagged wire-species and
    appended after the graph vertices.  The default unit-disk radius is
    ``LIBRARY_RADIUS_FACTOR * lam`` for every layout.
    """
    if not lam > 0:
        raise GeometryError(f"spacing constant must be > 0, got {lam}")
    key = name.strip().lower()
    builders = {
        "p4": (_p4_positions, 0),
        "fan3": (_fan3_positions, 0),
        "pan3": (_pan3_positions, 0),
        "pan5_w1": (None, 2),
        "pan7_w2": (None, 4),
        "tower": (_tower_positions, 0),
        "j14": (_j14_positions, 0),
    }
    if key not in builders:
        raise RydmisError(
            f"unknown library graph {name!r}; choose one of {', '.join(LIBRARY_GRAPHS)}"
        )
    if radius is None:
        radius = LIBRARY_RADIUS_FACTOR * lam

    if key == "pan5_w1":
        positions = _pan3_positions(lam) + wire_positions_w1(lam)
        species = [Species.GRAPH] * 4 + [Species.WIRE] * 2
    elif key == "pan7_w2":
        positions = _pan3_positions(lam) + wire_positions_w2(lam)
        species = [Species.GRAPH] * 4 + [Species.WIRE] * 4
    else:
        positions = builders[key][0](lam)
        species = [Species.GRAPH] * len(positions)
    return build_unit_disk_graph(positions, radius, species=species, weights=weights)


def attach_wire(
    base: AtomArray,
    wire_positions: Sequence[Sequence[float]],
    wire_weight: float,
    *,
    min_distance: float | None = None,
) -> AtomArray:
    """Append wire-species atoms with a uniform weight to an existing array.

    Indices continue after the existing vertices and edges are recomputed
    with the base array's unit-disk radius.  A wire atom closer than
    ``min_distance`` to any atom (old or new) is a spacing violation.
    """
    wire = np.atleast_2d(np.asarray(wire_positions, dtype=float))
    if wire.size == 0:
        raise GeometryError("wire needs at least one position")
    positions = np.vstack([base.positions, wire])
    _pairwise_check(positions, min_distance)
    species = list(base.species) + [Species.WIRE] * len(wire)
    weights = list(base.weights) + [float(wire_weight)] * len(wire)
    return build_unit_disk_graph(
        positions, base.unit_disk_radius, species=species, weights=weights
    )


# ---------------------------------------------------------------------------
# exact oracle
# ---------------------------------------------------------------------------

def is_independent(array: AtomArray, mask: int) -> bool:
    """True iff no edge has both endpoints selected in ``mask``."""
    if mask < 0 or mask >= (1 << array.n_atoms):
        raise RydmisError(
            f"vertex set {format_vertex_set(mask & ((1 << 64) - 1))} is out of "
            f"range for {array.n_atoms} atoms"
        )
    for i, j in array.edges:
        if (mask >> (i - 1)) & (mask >> (j - 1)) & 1:
            return False
    return True


def _resolve_weights(array: AtomArray, weights) -> np.ndarray:
    if weights is None:
        w = array.weights
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (array.n_atoms,):
            raise RydmisError(
                f"expected {array.n_atoms} weights, got shape {w.shape}"
            )
    return w


def _independent_flags(array: AtomArray, masks: np.ndarray) -> np.ndarray:
    ok = np.ones(len(masks), dtype=bool)
    for i, j in sorted(array.edges):
        ok &= ((masks >> (i - 1)) & (masks >> (j - 1)) & 1) == 0
    return ok


def _mask_weights(masks: np.ndarray, w: np.ndarray) -> np.ndarray:
    total = np.zeros(len(masks), dtype=float)
    for k in range(len(w)):
        total += w[k] * ((masks >> k) & 1)
    return total


def brute_force_mwis(
    array: AtomArray, weights: Sequence[float] | None = None
) -> tuple[list[int], float]:
    """All independent sets attaining the maximum total weight, by enumeration.

    Returns the optimal masks sorted ascending plus the optimal weight.  With
    unit weights this is the list of maximum independent sets.  Refuses
    arrays above ``ORACLE_MAX_ATOMS``.
    """
    n = array.n_atoms
    if n > ORACLE_MAX_ATOMS:
        raise RydmisError(
            f"oracle enumeration is limited to {ORACLE_MAX_ATOMS} atoms, got {n}"
        )
    w = _resolve_weights(array, weights)
    best_weight = 0.0
    best: list[int] = []
    for start in range(0, 1 << n, _ENUM_CHUNK):
        stop = min(start + _ENUM_CHUNK, 1 << n)
        masks = np.arange(start, stop, dtype=np.int64)
        indep = _independent_flags(array, masks)
        masks = masks[indep]
        totals = _mask_weights(masks, w)
        if len(totals) == 0:
            continue
        chunk_best = float(totals.max())
        if chunk_best > best_weight:
            best_weight = chunk_best
            best = [int(m) for m in masks[totals == chunk_best]]
        elif chunk_best == best_weight:
            best.extend(int(m) for m in masks[totals == chunk_best])
    return sorted(best), best_weight


def independent_sets_ranked(
    array: AtomArray, weights: Sequence[float] | None = None
) -> list[tuple[int, float]]:
    """Every independent set as (mask, total weight), heaviest first.

    Ties are broken by ascending mask.  Intended for cross-checking simulated
    rankings on small arrays; the full list has up to 2**N entries.
    """
    n = array.n_atoms
    if n > ORACLE_MAX_ATOMS:
        raise RydmisError(
            f"oracle enumeration is limited to {ORACLE_MAX_ATOMS} atoms, got {n}"
        )
    w = _resolve_weights(array, weights)
    masks = np.arange(1 << n, dtype=np.int64)
    masks = masks[_independent_flags(array, masks)]
    totals = _mask_weights(masks, w)
    order = np.lexsort((masks, -totals))
    return [(int(masks[k]), float(totals[k])) for k in order]


def mis_cardinality(array: AtomArray) -> int:
    """Size of a maximum independent set (unit weights)."""
    sets, weight = brute_force_mwis(array, np.ones(array.n_atoms))
    return int(round(weight))


def classify_configuration(
    array: AtomArray,
    mask: int,
    weights: Sequence[float] | None = None,
    *,
    mwis_sets: Sequence[int] | None = None,
) -> str:
    """Label a configuration: ``mwis``, ``independent`` or ``frustrated``.

    ``frustrated`` means the excited vertices are not an independent set.
    ``mwis_sets`` may carry a precomputed optimum to avoid re-enumerating when
    classifying many configurations of the same array.
    """
    if not is_independent(array, mask):
        return "frustrated"
    if mwis_sets is None:
        mwis_sets, _ = brute_force_mwis(array, weights)
    return "mwis" if mask in set(mwis_sets) else "independent"


# ---------------------------------------------------------------------------
# graph files
# ---------------------------------------------------------------------------

GRAPH_SCHEMA_VERSION = 1


def array_to_dict(array: AtomArray, name: str | None = None, lam: float | None = None,
                  comment: str | None = None) -> dict:
    """JSON-ready description of an array (schema v1)."""
    out: dict = {
        "schema_version": GRAPH_SCHEMA_VERSION,
        "unit_disk_radius_um": array.unit_disk_radius,
        "vertices": [
            {
                "index": v.index,
                "xyz_um": list(v.position),
                "species": v.species.value,
                "weight_2pi_MHz": v.weight,
            }
            for v in array.vertices
        ],
    }
    if name is not None:
        out["name"] = name
    if lam is not None:
        out["lambda_um"] = lam
    if comment is not None:
        out["comment"] = comment
    return out


def array_from_dict(data: Mapping) -> AtomArray:
    """Rebuild an array from :func:`array_to_dict` output.

    Edges are rederived from positions and the stored radius; vertex indices
    must be contiguous 1..N.
    """
    try:
        radius = float(data["unit_disk_radius_um"])
        raw = list(data["vertices"])
    except (KeyError, TypeError) as exc:
        raise RydmisError(f"graph file is missing required field: {exc}") from exc
    raw.sort(key=lambda entry: entry["index"])
    indices = [int(entry["index"]) for entry in raw]
    if indices != list(range(1, len(raw) + 1)):
        raise GeometryError(f"vertex indices must be contiguous 1..N, got {indices}")
    positions = [entry["xyz_um"] for entry in raw]
    species = [Species(entry.get("species", "graph")) for entry in raw]
    weights = [float(entry.get("weight_2pi_MHz", 1.0)) for entry in raw]
    return build_unit_disk_graph(positions, radius, species=species, weights=weights)


def save_graph(path: str | Path, array: AtomArray, **meta) -> None:
    Path(path).write_text(
        json.dumps(array_to_dict(array, **meta), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_graph(path: str | Path) -> AtomArray:
    return array_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
