"""Post-processing of run results: solution ranking, crystalline order
parameters, domain-wall statistics, susceptibility and phase classification.

All functions are pure with respect to their inputs; a ``RunResult`` plus
its ``AtomArray`` fully determine every output.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from .engine import RunResult
from .errors import AnalysisError
from .graphs import (
    AtomArray,
    brute_force_mwis,
    is_independent,
    mis_cardinality,
)

PHASE_LABELS = (
    "PM_down",
    "single_excitation",
    "MIS_AFM",
    "multi_excitation",
    "PM_up",
    "floating",
)

#: Numeric prefactor of the exponential boundary model (see
#: :func:`fit_phase_boundary`): a quarter of the numeric C6 coefficient.
BOUNDARY_PREFACTOR = 0.25 * 2550.0

#: Default probability mass a configuration class must hold to be called
#: the dominant phase.
PHASE_DOMINANCE_THRESHOLD = 0.40

#: Default probability mass a perfect-order class must hold to be called
#: the dominant crystalline order.
ORDER_DOMINANCE_THRESHOLD = 0.30

#: Validity window of the chain scans, in blockade radii per lattice spacing.
CHAIN_RATIO_WINDOW = (1.0, 3.2)


# ---------------------------------------------------------------------------
# solution ranking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RankedSolution:
    mask: int
    probability: float
    label: str  # mwis | independent | frustrated


def rank_solutions(
    result: RunResult,
    array: AtomArray,
    weights: Sequence[float] | None = None,
) -> list[RankedSolution]:
    """Configurations sorted by probability (descending, ties by ascending
    mask), each labelled against the exact oracle.

    The probabilities are reported exactly as found in the result, no
    smoothing or renormalization.
    """
    probs = np.asarray(result.probabilities, dtype=float)
    if probs.ndim != 1 or len(probs) != (1 << array.n_atoms):
        raise AnalysisError(
            f"distribution of length {probs.shape} does not match "
            f"{array.n_atoms} atoms"
        )
    mwis_sets, _ = brute_force_mwis(array, weights)
    mwis = set(mwis_sets)
    order = np.lexsort((np.arange(len(probs)), -probs))
    out = []
    for b in order:
        mask = int(b)
        if not is_independent(array, mask):
            label = "frustrated"
        elif mask in mwis:
            label = "mwis"
        else:
            label = "independent"
        out.append(RankedSolution(mask, float(probs[mask]), label))
    return out


# ---------------------------------------------------------------------------
# chain geometry and Z_n order
# ---------------------------------------------------------------------------

def chain_site_order(array: AtomArray, *, tol: float = 1e-6) -> list[int]:
    """1-based vertex indices sorted along the chain axis.

    Raises ``AnalysisError`` unless the atoms are collinear within ``tol``
    times the chain extent.
    """
    pos = array.positions
    if array.n_atoms == 1:
        return [1]
    center = pos.mean(axis=0)
    rel = pos - center
    # principal axis via the dominant singular vector
    _, s, vt = np.linalg.svd(rel, full_matrices=False)
    axis = vt[0]
    along = rel @ axis
    extent = float(along.max() - along.min())
    if extent <= 0:
        raise AnalysisError("degenerate chain: zero extent")
    residual = rel - np.outer(along, axis)
    if float(np.abs(residual).max()) > tol * extent:
        raise AnalysisError("atoms are not collinear: not a chain geometry")
    return [int(i) + 1 for i in np.argsort(along, kind="stable")]


def zn_masks(site_order: Sequence[int], n: int) -> list[int]:
    """The n phase-shifted perfect-order masks for a chain.

    Offset k excites every n-th site starting from the k-th site along the
    chain.
    """
    masks = []
    for offset in range(n):
        mask = 0
        for pos, vertex in enumerate(site_order):
            if pos % n == offset:
                mask |= 1 << (vertex - 1)
        masks.append(mask)
    return masks


def zn_order(result: RunResult, array: AtomArray, n: int) -> float:
    """Total probability of the n canonical perfect Z_n strings of a chain."""
    if not 2 <= n <= 4:
        raise AnalysisError(f"Z_n order is implemented for n in 2..4, got {n}")
    site_order = chain_site_order(array)
    probs = np.asarray(result.probabilities, dtype=float)
    return float(sum(probs[m] for m in zn_masks(site_order, n)))


@dataclass(frozen=True)
class OrderReport:
    """Perfect-order probabilities and the dominant order of one run."""

    p_zn: dict[int, float]
    dominant_order: str  # disordered | Z2 | Z3 | Z4 | floating
    mean_density: float


def order_report(
    result: RunResult,
    array: AtomArray,
    *,
    threshold: float = ORDER_DOMINANCE_THRESHOLD,
) -> OrderReport:
    """Classify the crystalline order of a chain run.

    The dominant order is the strongest perfect Z_n class if it holds at
    least ``threshold`` probability; otherwise the state counts as floating
    when the mean density sits in the ordered band [1/4, 1/3] (between the
    period-4 and period-3 fillings), else disordered.
    """
    p = {n: zn_order(result, array, n) for n in (2, 3, 4)}
    best = max(p, key=lambda n: (p[n], -n))
    density = result.mean_density
    if p[best] >= threshold:
        dominant = f"Z{best}"
    elif 0.25 <= density <= (1.0 / 3.0):
        dominant = "floating"
    else:
        dominant = "disordered"
    return OrderReport(p_zn=p, dominant_order=dominant, mean_density=density)


# ---------------------------------------------------------------------------
# domain walls
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainWallCount:
    """Wall counts of one configuration: span-2 interruptions are type I,
    span-3 are type II, anything longer lands in ``other``."""

    type_i: int
    type_ii: int
    other: int

    @property
    def total(self) -> int:
        return self.type_i + self.type_ii + self.other


def _site_bits(config, n_sites: int | None) -> list[int]:
    if isinstance(config, str):
        bits = [int(c) for c in config.strip()]
        if n_sites is not None and len(bits) != n_sites:
            raise AnalysisError(
                f"bitstring length {len(bits)} does not match n_sites={n_sites}"
            )
        return bits
    if n_sites is None:
        raise AnalysisError("n_sites is required when passing a mask")
    return [(int(config) >> i) & 1 for i in range(n_sites)]


def detect_domain_walls(config, n_sites: int | None = None, n: int = 2) -> DomainWallCount:
    """Count ordering interruptions of a chain configuration.

    ``config`` is either a site-order string (site 1 leftmost) or an integer
    mask plus ``n_sites``.  An interruption is a maximal run of adjacent
    same-state pairs; each maximal interruption counts as exactly one wall,
    typed by its span in sites.  Edge atoms in the ground state belong to an
    adjacent interruption when one touches the edge and are never counted as
    a separate wall, so every perfect alternating string has zero walls.
    """
    if n != 2:
        raise AnalysisError("only period-2 wall detection is implemented")
    bits = _site_bits(config, n_sites)
    type_i = type_ii = other = 0
    run = 0  # current count of consecutive equal adjacent pairs
    for j in range(len(bits) - 1):
        if bits[j] == bits[j + 1]:
            run += 1
        elif run:
            span = run + 1
            if span == 2:
                type_i += 1
            elif span == 3:
                type_ii += 1
            else:
                other += 1
            run = 0
    if run:
        span = run + 1
        if span == 2:
            type_i += 1
        elif span == 3:
            type_ii += 1
        else:
            other += 1
    return DomainWallCount(type_i, type_ii, other)


@dataclass(frozen=True)
class DomainWallReport:
    """Distribution-level wall statistics.

    ``type_i_prob``/``type_ii_prob`` are the probabilities of observing at
    least one wall of that type; ``any_wall_prob`` of observing any wall at
    all; ``mean_walls`` is the expected total wall count.
    """

    type_i_prob: float
    type_ii_prob: float
    any_wall_prob: float
    mean_walls: float


def domain_wall_report(result: RunResult, array: AtomArray, n: int = 2) -> DomainWallReport:
    """Aggregate wall statistics of a chain run."""
    site_order = chain_site_order(array)
    probs = np.asarray(result.probabilities, dtype=float)
    p_i = p_ii = p_any = mean = 0.0
    for mask, p in enumerate(probs):
        if p == 0.0:
            continue
        bits = [(mask >> (v - 1)) & 1 for v in site_order]
        count = detect_domain_walls("".join(str(b) for b in bits), n=n)
        if count.type_i:
            p_i += p
        if count.type_ii:
            p_ii += p
        if count.total:
            p_any += p
        mean += p * count.total
    return DomainWallReport(float(p_i), float(p_ii), float(p_any), float(mean))


# ---------------------------------------------------------------------------
# susceptibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SusceptibilityCurve:
    """Spline-derivative susceptibility of a density-vs-detuning scan.

    ``delta_c`` is None when the curve is degenerate (flat input) or when
    the maximum lands on a grid endpoint; ``flag`` says which.
    """

    delta_f: np.ndarray          # refined grid
    chi: np.ndarray              # d<n>/d(delta_f) on the refined grid
    chi_at_points: np.ndarray    # same derivative at the input points
    delta_c: float | None
    flag: str | None = None


def susceptibility_curve(points: Sequence[tuple[float, float]]) -> SusceptibilityCurve:
    """Susceptibility from (final detuning, mean density) samples.

    Fits a natural cubic spline through the points, differentiates it
    analytically and locates the maximum on a 10x refined grid.  Needs at
    least five strictly increasing detuning values.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 5:
        raise AnalysisError("need at least five (delta_f, density) points")
    x = pts[:, 0]
    y = pts[:, 1]
    if not np.all(np.diff(x) > 0):
        raise AnalysisError("detuning grid must be strictly increasing")
    spline = CubicSpline(x, y, bc_type="natural")
    deriv = spline.derivative()
    refined = np.linspace(x[0], x[-1], 10 * (len(x) - 1) + 1)
    chi = deriv(refined)
    chi_pts = deriv(x)
    if np.ptp(y) == 0.0:
        return SusceptibilityCurve(refined, chi, chi_pts, None, "degenerate")
    imax = int(np.argmax(chi))
    if imax == 0 or imax == len(refined) - 1:
        return SusceptibilityCurve(refined, chi, chi_pts, None, "maximum_at_grid_edge")
    return SusceptibilityCurve(refined, chi, chi_pts, float(refined[imax]), None)


# ---------------------------------------------------------------------------
# phase classification
# ---------------------------------------------------------------------------

def _phase_class_masses(result: RunResult, array: AtomArray) -> dict[str, float]:
    n = array.n_atoms
    probs = np.asarray(result.probabilities, dtype=float)
    states = np.arange(1 << n, dtype=np.int64)
    pc = np.zeros(1 << n, dtype=np.int64)
    for k in range(n):
        pc += (states >> k) & 1
    indep = np.ones(1 << n, dtype=bool)
    for i, j in sorted(array.edges):
        indep &= ((states >> (i - 1)) & (states >> (j - 1)) & 1) == 0
    card = mis_cardinality(array)

    masses = {label: 0.0 for label in PHASE_LABELS[:-1]}
    # precedence: the named classes are disjoint except for small-N corner
    # cases, resolved in this order
    assigned = np.full(1 << n, "", dtype=object)
    sel = pc == 0
    assigned[sel] = "PM_down"
    sel = (assigned == "") & (pc == n)
    assigned[sel] = "PM_up"
    sel = (assigned == "") & indep & (pc == card)
    assigned[sel] = "MIS_AFM"
    sel = (assigned == "") & (pc == n - 1)
    assigned[sel] = "multi_excitation"
    sel = (assigned == "") & (pc == 1)
    assigned[sel] = "single_excitation"
    for label in masses:
        masses[label] = float(probs[assigned == label].sum())
    return masses


def classify_phase(
    result: RunResult,
    array: AtomArray,
    *,
    threshold: float = PHASE_DOMINANCE_THRESHOLD,
) -> str:
    """Dominant phase of a final distribution.

    Basis states are grouped into configuration classes (all ground, single
    excitation, independent sets of maximum cardinality, N-1 excitations,
    all excited); the phase is the heaviest class when it holds at least
    ``threshold`` of the probability mass, otherwise ``floating``.
    """
    masses = _phase_class_masses(result, array)
    label = max(masses, key=lambda k: masses[k])
    if masses[label] >= threshold:
        return label
    return "floating"


# ---------------------------------------------------------------------------
# phase-boundary fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryFit:
    xi: float
    residual_rms: float


def fit_phase_boundary(points: Sequence[tuple[float, float]]) -> BoundaryFit:
    """Fit boundary samples to ``0.25 * 2550 * exp(-xi * x)``.

    ``points`` are (blockade radius / spacing, detuning ratio) samples with
    positive ordinates; only the decay constant is free, the prefactor is
    pinned to the numeric C6 value over four.  Least squares in linear
    space, seeded by the log-space closed form.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
        raise AnalysisError("need at least four boundary points")
    x = pts[:, 0]
    b = pts[:, 1]
    if np.any(b <= 0):
        raise AnalysisError("boundary ordinates must be positive")
    xi0 = float(np.sum(x * np.log(BOUNDARY_PREFACTOR / b)) / np.sum(x * x))
    sol = least_squares(
        lambda xi: BOUNDARY_PREFACTOR * np.exp(-xi[0] * x) - b,
        x0=[max(xi0, 1e-6)],
        bounds=([1e-9], [np.inf]),
    )
    res = BOUNDARY_PREFACTOR * np.exp(-sol.x[0] * x) - b
    return BoundaryFit(xi=float(sol.x[0]), residual_rms=float(np.sqrt(np.mean(res**2))))


# ---------------------------------------------------------------------------
# floating-phase scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FloatingScan:
    """Order classification along a chain-compression scan."""

    ratios: tuple[float, ...]
    reports: tuple[OrderReport, ...]
    window: tuple[float, float] | None = field(default=None)


def floating_phase_scan(
    points: Sequence[tuple[float, RunResult, AtomArray]],
    *,
    threshold: float = ORDER_DOMINANCE_THRESHOLD,
) -> FloatingScan:
    """Classify chain runs along a blockade-radius/spacing grid.

    Returns the per-point order reports plus the widest contiguous ratio
    window classified as floating (None when absent).  Ratios outside the
    validity window [1, 3.2] only trigger a warning.
    """
    if not points:
        raise AnalysisError("scan needs at least one point")
    ratios = tuple(float(p[0]) for p in points)
    lo, hi = CHAIN_RATIO_WINDOW
    if min(ratios) < lo or max(ratios) > hi:
        warnings.warn(
            f"scan ratios outside the validity window [{lo}, {hi}]; "
            "the interaction power law is unreliable there",
            stacklevel=2,
        )
    reports = tuple(
        order_report(result, array, threshold=threshold)
        for _, result, array in points
    )
    best: tuple[float, float] | None = None
    start = None
    for idx, rep in enumerate(reports):
        if rep.dominant_order == "floating":
            if start is None:
                start = idx
        elif start is not None:
            window = (ratios[start], ratios[idx - 1])
            if best is None or window[1] - window[0] > best[1] - best[0]:
                best = window
            start = None
    if start is not None:
        window = (ratios[start], ratios[-1])
        if best is None or window[1] - window[0] > best[1] - best[0]:
            best = window
    return FloatingScan(ratios=ratios, reports=reports, window=best)
