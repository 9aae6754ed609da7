"""rydmis: quantum-annealing simulation of maximum-weight independent sets
encoded in Rydberg atom arrays, with an exact classical oracle for every
quantum result.

Module map:

* ``graphs``       - geometry, unit-disk edges, bundled layouts, exact oracle
* ``drive``        - Rabi/detuning time profiles and derived drive quantities
* ``interactions`` - pair-potential coefficients and the two-regime law
* ``engine``       - state-vector propagation (closed, jump-unraveled, disordered)
* ``analysis``     - ranking, crystalline order, domain walls, susceptibility,
                     phase classification and boundary fits
* ``config``/``sweeps``/``cli`` - experiment orchestration and file formats
"""

__version__ = "0.1.0"

from .analysis import (
    BoundaryFit,
    DomainWallCount,
    DomainWallReport,
    OrderReport,
    RankedSolution,
    SusceptibilityCurve,
    classify_phase,
    detect_domain_walls,
    domain_wall_report,
    fit_phase_boundary,
    floating_phase_scan,
    order_report,
    rank_solutions,
    susceptibility_curve,
    zn_order,
)
from .drive import (
    DriveSchedule,
    blockade_radius,
    delta_at,
    omega_at,
    schedule_for_array,
    sweep_rate,
    two_photon_rabi,
)
from .engine import (
    DisorderModel,
    RunResult,
    apply_hamiltonian,
    diagonal_energies,
    propagate_disordered,
    propagate_tdse,
    propagate_trajectories,
    sample_disorder,
)
from .errors import (
    AnalysisError,
    ConfigError,
    EngineError,
    GeometryError,
    RydmisError,
)
from .graphs import (
    AtomArray,
    Species,
    Vertex,
    attach_wire,
    bitstring,
    brute_force_mwis,
    build_unit_disk_graph,
    classify_configuration,
    format_vertex_set,
    is_independent,
    library_graph,
    linear_chain,
    load_graph,
    mask_members,
    parse_vertex_set,
    save_graph,
    vertex_mask,
)
from .interactions import (
    InteractionTable,
    PairCoefficients,
    default_interaction_table,
    interaction_matrix,
    pair_interaction,
)

__all__ = [name for name in dir() if not name.startswith("_")]
