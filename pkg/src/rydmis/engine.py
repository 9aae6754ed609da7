"""State-vector propagation over the 2**N bitstring basis.

The instantaneous Hamiltonian (angular units) is

    H(t) = sum_b [ -sum_i delta_i(t) b_i + sum_{i<j} V_ij b_i b_j ] |b><b|
         + (omega(t)/2) sum_i (bit flip on atom i)

where V runs over all pairs (the full interaction tail, not only unit-disk
edges) and delta_i(t) interpolates from the shared delta0 to the per-atom
final value along the sin^2 course of the schedule.

The stepper is fixed-step RK4.  The step is chosen so that the phase
advanced per step never exceeds ``dt_max_phase`` (radians) for a spectral
norm estimated as ``max_t |delta|_max + sum_pairs V + N * omega0 / 2``;
runs always start from the all-ground state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .drive import DriveSchedule, max_abs_detuning
from .errors import EngineError, GeometryError, RydmisError
from .graphs import AtomArray, build_unit_disk_graph
from .interactions import InteractionTable, interaction_matrix
from .units import to_angular

#: State-vector size cap: 2**16 amplitudes.
DEFAULT_MAX_ATOMS = 16

#: Default cap on the phase advanced per RK4 step, in radians.  The policy
#: ceiling is 0.05 rad; the default sits at half of that so the worst case
#: (a state pinned at the spectral edge, e.g. a single driven atom) keeps
#: its norm drift below 1e-8 over multi-us sweeps.
DEFAULT_DT_MAX_PHASE = 0.025

#: Hard ceiling of the fixed-step policy.
DT_MAX_PHASE_CEILING = 0.05

#: Closed-system runs whose norm drifts beyond this are flagged failed.
NORM_DRIFT_LIMIT = 1.0e-6

#: Intermediate-state population fraction of the upper excitation leg for
#: the default two-photon configuration (50 MHz one-photon Rabi frequency,
#: 570 MHz intermediate detuning): (omega_upper / (2 delta_m))**2.
DEFAULT_POPULATION_FACTOR = (50.0 / (2.0 * 570.0)) ** 2

_SEED_DOMAIN_TRAJECTORY = 1
_SEED_DOMAIN_DISORDER = 2
_SEED_DOMAIN_DISORDER_RUN = 3


@dataclass
class DisorderModel:
    """Per-axis positional spread (um), sample count and RNG seed.

    ``distribution`` is ``gaussian`` (sigma = quoted spread) or ``uniform``
    (offsets drawn from [-spread, +spread]).
    """

    sigma: tuple[float, float, float]
    samples: int
    seed: int
    distribution: str = "gaussian"

    def __post_init__(self):
        self.sigma = tuple(float(s) for s in self.sigma)
        if len(self.sigma) != 3 or any(s < 0 for s in self.sigma):
            raise RydmisError(f"sigma must be three values >= 0, got {self.sigma}")
        if self.samples < 1:
            raise RydmisError(f"samples must be >= 1, got {self.samples}")
        if self.distribution not in ("gaussian", "uniform"):
            raise RydmisError(
                f"distribution must be 'gaussian' or 'uniform', got {self.distribution!r}"
            )


@dataclass
class RunResult:
    """Final-time distribution and diagnostics of one propagation.

    ``probabilities[b]`` is the probability of bitstring ``b`` (vertex 1 =
    least significant bit).  ``stderr`` is the per-bitstring standard error
    of the mean for trajectory runs and the per-bitstring spread (sample
    standard deviation) for disorder averages; None for single closed runs.
    """

    probabilities: np.ndarray
    rydberg_density: np.ndarray
    norm_drift: float
    trajectories: int
    stderr: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_atoms(self) -> int:
        return len(self.rydberg_density)

    @property
    def mean_density(self) -> float:
        """Rydberg density averaged over atoms."""
        return float(np.mean(self.rydberg_density))


# ---------------------------------------------------------------------------
# Hamiltonian pieces
# ---------------------------------------------------------------------------

def bits_matrix(n_atoms: int) -> np.ndarray:
    """(2**N, N) 0/1 matrix: entry [b, i] is bit i of basis state b."""
    states = np.arange(1 << n_atoms, dtype=np.int64)
    return ((states[:, None] >> np.arange(n_atoms)[None, :]) & 1).astype(np.float64)


def interaction_diagonal(array: AtomArray, table: InteractionTable) -> np.ndarray:
    """2**N vector of pair-interaction energies per basis state (2pi*MHz)."""
    n = array.n_atoms
    v = interaction_matrix(array, table)
    states = np.arange(1 << n, dtype=np.int64)
    diag = np.zeros(1 << n, dtype=float)
    for i in range(n):
        bi = (states >> i) & 1
        for j in range(i + 1, n):
            diag += v[i, j] * (bi & ((states >> j) & 1))
    return diag


def diagonal_energies(
    array: AtomArray,
    table: InteractionTable,
    delta_snapshot: np.ndarray,
    *,
    max_atoms: int = DEFAULT_MAX_ATOMS,
) -> np.ndarray:
    """Cost diagonal -sum_i delta_i b_i + sum_{i<j} V_ij b_i b_j (2pi*MHz).

    ``delta_snapshot`` holds the instantaneous per-atom detunings.  The
    interaction sum runs over every pair, evaluated from the geometry.
    """
    n = array.n_atoms
    if n > max_atoms:
        raise EngineError(f"state size limit is {max_atoms} atoms, got {n}")
    delta = np.asarray(delta_snapshot, dtype=float)
    if delta.shape != (n,):
        raise EngineError(f"expected {n} detunings, got shape {delta.shape}")
    return interaction_diagonal(array, table) - bits_matrix(n) @ delta


def apply_hamiltonian(state: np.ndarray, diagonal: np.ndarray, omega: float) -> np.ndarray:
    """Matrix-free H @ state: diagonal part plus (omega/2) bit flips.

    Works in whatever consistent units ``diagonal`` and ``omega`` share;
    cost O(N * 2**N), no 2**N x 2**N matrix is ever formed.
    """
    state = np.asarray(state)
    dim = state.shape[0]
    if diagonal.shape[0] != dim:
        raise EngineError("state and diagonal dimensions differ")
    n = dim.bit_length() - 1
    if (1 << n) != dim:
        raise EngineError(f"state length {dim} is not a power of two")
    out = diagonal * state
    half = 0.5 * omega
    for k in range(n):
        flipped = state.reshape(-1, 2, 1 << k)[:, ::-1, :].reshape(dim)
        out = out + half * flipped
    return out


def _schedule_for(array: AtomArray, schedule: DriveSchedule) -> None:
    if schedule.n_atoms != array.n_atoms:
        raise EngineError(
            f"schedule carries {schedule.n_atoms} final detunings for "
            f"{array.n_atoms} atoms"
        )


def hamiltonian_norm_bound(array: AtomArray, table: InteractionTable,
                           schedule: DriveSchedule) -> float:
    """Spectral-norm estimate (2pi*MHz) used by the fixed-step policy."""
    v = interaction_matrix(array, table)
    pair_sum = float(np.sum(np.triu(v, 1)))
    return max_abs_detuning(schedule) + pair_sum + array.n_atoms * schedule.omega0 / 2.0


def _step_count(bound_2pi_mhz: float, tau: float, dt_max_phase: float) -> int:
    omega_bound = to_angular(bound_2pi_mhz)
    return max(16, int(math.ceil(tau * omega_bound / dt_max_phase)))


def _kernel_arrays(array: AtomArray, table: InteractionTable, schedule: DriveSchedule):
    n = array.n_atoms
    bits = bits_matrix(n)
    diag_v = to_angular(1.0) * interaction_diagonal(array, table)
    pop = bits.sum(axis=1)
    wsum = bits @ (to_angular(1.0) * np.asarray(schedule.delta_f))
    arg = math.sin(schedule._sweep_argument())
    inv_sin2 = 1.0 / (arg * arg)
    params = (
        to_angular(schedule.delta0),
        to_angular(schedule.omega0),
        schedule.t_f1,
        schedule.t_f2,
        schedule.tau,
        schedule.alpha_d,
        inv_sin2,
    )
    return diag_v, pop, wsum, params


def _density(probabilities: np.ndarray, n_atoms: int) -> np.ndarray:
    return bits_matrix(n_atoms).T @ probabilities


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

def propagate_tdse(
    array: AtomArray,
    table: InteractionTable,
    schedule: DriveSchedule,
    *,
    dt_max_phase: float = DEFAULT_DT_MAX_PHASE,
    max_atoms: int = DEFAULT_MAX_ATOMS,
) -> RunResult:
    """Closed-system sweep from the all-ground state to the final time.

    The result distribution is |amplitudes|^2 without renormalization; a
    norm drift beyond ``NORM_DRIFT_LIMIT`` raises ``EngineError`` (step size
    too large for the requested accuracy).
    """
    n = array.n_atoms
    if n > max_atoms:
        raise EngineError(f"state size limit is {max_atoms} atoms, got {n}")
    _schedule_for(array, schedule)
    diag_v, pop, wsum, params = _kernel_arrays(array, table, schedule)
    bound = hamiltonian_norm_bound(array, table, schedule)
    n_steps = _step_count(bound, schedule.tau, dt_max_phase)

    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[0] = 1.0
    drift = _kernels.propagate_closed(psi, diag_v, pop, wsum, *params, n, n_steps)
    if drift > NORM_DRIFT_LIMIT:
        raise EngineError(
            f"norm drift {drift:.3e} exceeds {NORM_DRIFT_LIMIT:.1e}; "
            f"the fixed-step policy was too coarse for this run"
        )
    probs = np.abs(psi) ** 2
    return RunResult(
        probabilities=probs,
        rydberg_density=_density(probs, n),
        norm_drift=float(drift),
        trajectories=0,
        metadata={
            "method": "tdse",
            "n_steps": n_steps,
            "dt_us": schedule.tau / n_steps,
            "norm_bound_2pi_MHz": bound,
        },
    )


def _gamma_vector(array: AtomArray, table: InteractionTable, gamma_mode: str,
                  population_factor: float | None) -> np.ndarray:
    if gamma_mode not in ("scaled", "bare"):
        raise RydmisError(f"gamma_mode must be 'scaled' or 'bare', got {gamma_mode!r}")
    factor = 1.0
    if gamma_mode == "scaled":
        factor = DEFAULT_POPULATION_FACTOR if population_factor is None else population_factor
        if not 0.0 <= factor <= 1.0:
            raise RydmisError(f"population factor must be in [0, 1], got {factor}")
    return np.array([table.gamma(s) * factor for s in array.species], dtype=float)


def trajectory_seed_sequence(seed: int, index: int) -> np.random.SeedSequence:
    """Per-trajectory seed derivation; merge order never depends on scheduling."""
    return np.random.SeedSequence(seed, spawn_key=(_SEED_DOMAIN_TRAJECTORY, index))


def propagate_trajectories(
    array: AtomArray,
    table: InteractionTable,
    schedule: DriveSchedule,
    n_trajectories: int,
    seed: int,
    *,
    gamma_mode: str = "scaled",
    population_factor: float | None = None,
    dt_max_phase: float = DEFAULT_DT_MAX_PHASE,
    max_atoms: int = DEFAULT_MAX_ATOMS,
) -> RunResult:
    """Monte Carlo wave-function average of the dissipative sweep.

    Each atom carries a projector jump channel at its species' decay rate.
    In ``scaled`` mode (default) the rate is multiplied by the
    intermediate-state population fraction ``population_factor``
    (adiabatic-elimination bookkeeping for a two-photon drive); ``bare``
    applies the full rate.  Identical (seed, n_trajectories) pairs give
    bit-identical output.
    """
    n = array.n_atoms
    if n > max_atoms:
        raise EngineError(f"state size limit is {max_atoms} atoms, got {n}")
    if n_trajectories < 1:
        raise EngineError(f"need at least one trajectory, got {n_trajectories}")
    _schedule_for(array, schedule)
    gammas = _gamma_vector(array, table, gamma_mode, population_factor)
    diag_v, pop, wsum, params = _kernel_arrays(array, table, schedule)
    gsum = bits_matrix(n) @ gammas
    bound = hamiltonian_norm_bound(array, table, schedule) + float(gsum.max()) / (4.0 * to_angular(1.0))
    n_steps = _step_count(bound, schedule.tau, dt_max_phase)

    # expected jump budget: total decay weight if every atom stayed excited
    expected_jumps = 0.5 * float(gammas.sum()) * schedule.tau
    base_pool = 4 * (int(expected_jumps) + 8) + 16

    dim = 1 << n
    mean = np.zeros(dim, dtype=float)
    m2 = np.zeros(dim, dtype=float)
    total_jumps = 0
    for k in range(n_trajectories):
        rng = np.random.Generator(np.random.PCG64(trajectory_seed_sequence(seed, k)))
        pool = base_pool
        while True:
            uniforms = rng.random(pool)
            psi = np.zeros(dim, dtype=np.complex128)
            psi[0] = 1.0
            consumed, n_jumps = _kernels.propagate_jump_trajectory(
                psi, diag_v, pop, wsum, gsum, gammas, uniforms, *params, n, n_steps
            )
            if consumed >= 0:
                break
            # pool exhausted: retry the whole trajectory with a fresh rng so
            # the longer pool starts with the same draws (stream prefix)
            rng = np.random.Generator(np.random.PCG64(trajectory_seed_sequence(seed, k)))
            pool *= 4
        total_jumps += n_jumps
        p = np.abs(psi) ** 2
        p /= p.sum()
        delta = p - mean
        mean += delta / (k + 1)
        m2 += delta * (p - mean)

    if n_trajectories > 1:
        stderr = np.sqrt(m2 / (n_trajectories - 1) / n_trajectories)
    else:
        stderr = np.zeros(dim, dtype=float)
    return RunResult(
        probabilities=mean,
        rydberg_density=_density(mean, n),
        norm_drift=float(abs(1.0 - mean.sum())),
        trajectories=n_trajectories,
        stderr=stderr,
        metadata={
            "method": "trajectories",
            "n_steps": n_steps,
            "dt_us": schedule.tau / n_steps,
            "norm_bound_2pi_MHz": bound,
            "gamma_mode": gamma_mode,
            "gamma_per_atom_inv_us": [float(g) for g in gammas],
            "total_jumps": total_jumps,
        },
    )


# ---------------------------------------------------------------------------
# positional disorder
# ---------------------------------------------------------------------------

def _min_pair_floor(array: AtomArray, table: InteractionTable | None) -> float | None:
    if table is None:
        return None
    floors = []
    for i in range(array.n_atoms):
        for j in range(i + 1, array.n_atoms):
            floors.append(table.coefficients(array.species[i], array.species[j]).r_lr)
    return max(floors) if floors else None


def sample_disorder(
    array: AtomArray,
    model: DisorderModel,
    *,
    table: InteractionTable | None = None,
    max_redraws: int = 100,
) -> list[AtomArray]:
    """Arrays with every atom independently displaced by the model's spread.

    Edges are recomputed from the perturbed positions.  When ``table`` is
    given, samples bringing any pair to or below its short-range floor are
    redrawn (up to ``max_redraws`` times each, then an error).
    """
    floor = _min_pair_floor(array, table)
    out = []
    for k in range(model.samples):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(model.seed, spawn_key=(_SEED_DOMAIN_DISORDER, k))
        ))
        for attempt in range(max_redraws + 1):
            if model.distribution == "gaussian":
                offsets = rng.normal(0.0, 1.0, size=(array.n_atoms, 3)) * np.asarray(model.sigma)
            else:
                offsets = rng.uniform(-1.0, 1.0, size=(array.n_atoms, 3)) * np.asarray(model.sigma)
            positions = array.positions + offsets
            try:
                perturbed = build_unit_disk_graph(
                    positions,
                    array.unit_disk_radius,
                    species=list(array.species),
                    weights=list(array.weights),
                    min_distance=floor,
                )
            except GeometryError:
                continue
            out.append(perturbed)
            break
        else:
            raise EngineError(
                f"disorder sample {k} violated the minimum spacing "
                f"{max_redraws} times in a row"
            )
    return out


def propagate_disordered(
    array: AtomArray,
    table: InteractionTable,
    schedule: DriveSchedule,
    model: DisorderModel,
    *,
    method: str = "tdse",
    n_trajectories: int = 1,
    seed: int = 0,
    gamma_mode: str = "scaled",
    population_factor: float | None = None,
    dt_max_phase: float = DEFAULT_DT_MAX_PHASE,
    max_atoms: int = DEFAULT_MAX_ATOMS,
) -> RunResult:
    """Sample-averaged run over positional disorder.

    Each sample is propagated from its perturbed geometry (interactions
    recomputed); the result is the sample mean with the per-bitstring spread
    (sample standard deviation) in ``stderr``.
    """
    samples = sample_disorder(array, model, table=table)
    dim = 1 << array.n_atoms
    probs = np.zeros((len(samples), dim), dtype=float)
    drift = 0.0
    jumps = 0
    for k, sample in enumerate(samples):
        if method == "tdse":
            res = propagate_tdse(
                sample, table, schedule,
                dt_max_phase=dt_max_phase, max_atoms=max_atoms,
            )
        elif method == "trajectories":
            res = propagate_trajectories(
                sample, table, schedule, n_trajectories,
                int(np.random.SeedSequence(seed, spawn_key=(_SEED_DOMAIN_DISORDER_RUN, k))
                    .generate_state(1, dtype=np.uint64)[0]),
                gamma_mode=gamma_mode, population_factor=population_factor,
                dt_max_phase=dt_max_phase, max_atoms=max_atoms,
            )
            jumps += res.metadata.get("total_jumps", 0)
        else:
            raise RydmisError(f"unknown method {method!r}")
        probs[k] = res.probabilities
        drift = max(drift, res.norm_drift)
    mean = probs.mean(axis=0)
    spread = probs.std(axis=0, ddof=1) if len(samples) > 1 else np.zeros(dim)
    return RunResult(
        probabilities=mean,
        rydberg_density=_density(mean, array.n_atoms),
        norm_drift=float(drift),
        trajectories=n_trajectories if method == "trajectories" else 0,
        stderr=spread,
        metadata={
            "method": f"disorder+{method}",
            "samples": len(samples),
            "distribution": model.distribution,
            "total_jumps": jumps,
        },
    )
