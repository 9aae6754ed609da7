"""Pair-potential coefficients and the two-regime interaction law.

For a pair at distance R the interaction is resonant dipole-dipole
``C3 / R**3`` below the van der Waals crossover radius and ``C6 / R**6``
from the crossover on; below the short-range validity floor ``r_lr`` the
asymptotic description breaks down and the pair is rejected outright.
The two branches are not stitched continuously; the discontinuity at
``r_vdw`` is the documented behaviour of the piecewise fit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import GeometryError, RydmisError
from .graphs import AtomArray, Species
from .units import GHZ_TO_MHZ


@dataclass(frozen=True)
class PairCoefficients:
    """Fit coefficients for one species pair.

    c6 in 2pi*GHz*um^6, c3 in 2pi*GHz*um^3, radii in um.
    """

    c6: float
    c3: float
    r_vdw: float
    r_lr: float

    def __post_init__(self):
        if self.c6 <= 0 or self.c3 <= 0:
            raise RydmisError("interaction coefficients must be > 0")
        if not 0 < self.r_lr < self.r_vdw:
            raise RydmisError(
                f"need 0 < r_lr < r_vdw, got r_lr={self.r_lr}, r_vdw={self.r_vdw}"
            )


def _pair_key(a: Species, b: Species) -> tuple[str, str]:
    return tuple(sorted((Species(a).value, Species(b).value)))  # type: ignore[return-value]


@dataclass(frozen=True)
class InteractionTable:
    """Symmetric species-pair coefficients plus per-species decay rates.

    ``decay`` holds the intermediate-state decay rate gamma_m = 1/tau_m in
    1/us for each species.
    """

    pairs: Mapping[tuple[str, str], PairCoefficients]
    decay: Mapping[str, float]

    def coefficients(self, a: Species, b: Species) -> PairCoefficients:
        key = _pair_key(a, b)
        try:
            return self.pairs[key]
        except KeyError as exc:
            raise RydmisError(f"no interaction coefficients for pair {key}") from exc

    def gamma(self, species: Species) -> float:
        try:
            return self.decay[Species(species).value]
        except KeyError as exc:
            raise RydmisError(f"no decay rate for species {species!r}") from exc


def default_interaction_table() -> InteractionTable:
    """Coefficients used by the bundled configurations.

    The graph-graph entry comes from the standard homonuclear 81S pair fits.
    The wire-involved C6/C3 values are order-of-magnitude reconstructions
    (no measured fit shipped here); quantitative dual-species studies should
    override them through the ``interactions`` config block.
    """
    return InteractionTable(
        pairs={
            ("graph", "graph"): PairCoefficients(c6=2550.0, c3=54.0, r_vdw=3.7, r_lr=2.0),
            ("graph", "wire"): PairCoefficients(c6=3070.0, c3=59.0, r_vdw=4.0, r_lr=2.0),
            ("wire", "wire"): PairCoefficients(c6=3700.0, c3=65.0, r_vdw=4.0, r_lr=2.0),
        },
        decay={
            "graph": 1.0 / 0.118,
            "wire": 1.0 / 0.135,
        },
    )


def pair_interaction(table: InteractionTable, a: Species, b: Species, r_um: float) -> float:
    """Interaction energy of one pair at distance ``r_um``, value/2pi in MHz.

    ``C6/R**6`` for R >= r_vdw, ``C3/R**3`` for r_lr < R < r_vdw; distances
    at or below r_lr are rejected.
    """
    coeff = table.coefficients(a, b)
    if r_um <= coeff.r_lr:
        raise GeometryError(
            f"pair distance {r_um:.4f} um is at or below the short-range floor "
            f"{coeff.r_lr} um for species pair {_pair_key(a, b)}"
        )
    if r_um >= coeff.r_vdw:
        return coeff.c6 * GHZ_TO_MHZ / r_um**6
    return coeff.c3 * GHZ_TO_MHZ / r_um**3


def interaction_matrix(array: AtomArray, table: InteractionTable) -> np.ndarray:
    """(N, N) symmetric matrix of pair interactions in 2pi*MHz, zero diagonal.

    Every pair is included regardless of the unit-disk edges: the 1/R**6
    tail acts on all pairs, the graph edges only define the combinatorial
    problem.  Raises if any pair sits at or below its r_lr floor.
    """
    n = array.n_atoms
    out = np.zeros((n, n), dtype=float)
    dist = array.distance_matrix
    for i in range(n):
        for j in range(i + 1, n):
            v = pair_interaction(
                table, array.species[i], array.species[j], float(dist[i, j])
            )
            out[i, j] = v
            out[j, i] = v
    return out
