"""Time profiles of the Rabi frequency and per-atom detuning.

The Rabi profile is trapezoidal: linear ramp to the plateau value on
``[0, t_f1]``, flat until ``t_f2``, linear ramp back to zero at ``tau``.
The detuning starts at ``delta0``, follows a sin^2 course on
``[t_f1, t_f2)`` and holds the per-atom final value from ``t_f2`` on::

    delta_i(t) = A_i * sin(alpha_d * (t - t_f1) / tau)**2 + delta0
    A_i        = (delta_f_i - delta0) / sin(alpha_d * (t_f2 - t_f1) / tau)**2

The amplitude pins ``delta_i(t_f2) = delta_f_i`` exactly for any
``alpha_d > 0``.  When the sine argument exceeds pi/2 inside the window the
course overshoots and comes back; that is accepted behaviour, not an error.

All frequencies are value/2pi in MHz, all times in us (see ``units``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import RydmisError
from .units import GHZ_TO_MHZ


@dataclass(frozen=True)
class DriveSchedule:
    """Drive parameters shared by all atoms, plus per-atom final detunings.

    Parameters
    ----------
    omega0
        Plateau two-photon Rabi frequency (2pi*MHz).
    delta0
        Initial detuning, shared by all atoms (2pi*MHz).
    delta_f
        Final detuning per atom (2pi*MHz); encodes the vertex weights.
    alpha_d
        Course parameter of the sin^2 sweep, > 0.
    tau
        Total drive duration (us).
    t_f1, t_f2
        Plateau boundaries; default to tau/10 and 9*tau/10.
    """

    omega0: float
    delta0: float
    delta_f: tuple[float, ...]
    alpha_d: float = 1.0
    tau: float = 5.0
    t_f1: float = field(default=-1.0)
    t_f2: float = field(default=-1.0)

    def __post_init__(self):
        if not self.tau > 0:
            raise RydmisError(f"tau must be > 0, got {self.tau}")
        if not self.alpha_d > 0:
            raise RydmisError(f"alpha_d must be > 0, got {self.alpha_d}")
        if self.omega0 < 0:
            raise RydmisError(f"omega0 must be >= 0, got {self.omega0}")
        if len(self.delta_f) == 0:
            raise RydmisError("delta_f needs at least one atom")
        object.__setattr__(self, "delta_f", tuple(float(d) for d in self.delta_f))
        if self.t_f1 < 0:
            object.__setattr__(self, "t_f1", self.tau / 10.0)
        if self.t_f2 < 0:
            object.__setattr__(self, "t_f2", 9.0 * self.tau / 10.0)
        if not (0.0 < self.t_f1 < self.t_f2 < self.tau):
            raise RydmisError(
                f"need 0 < t_f1 < t_f2 < tau, got t_f1={self.t_f1}, "
                f"t_f2={self.t_f2}, tau={self.tau}"
            )

    @property
    def n_atoms(self) -> int:
        return len(self.delta_f)

    def _check_time(self, t: float) -> None:
        if t < 0.0 or t > self.tau:
            raise RydmisError(f"t={t} outside the drive window [0, {self.tau}]")

    def _sweep_argument(self) -> float:
        return self.alpha_d * (self.t_f2 - self.t_f1) / self.tau


def two_photon_rabi(omega_420: float, omega_1013: float, delta_m: float) -> float:
    """Effective two-photon Rabi frequency omega_420*omega_1013/(2*delta_m).

    All three inputs and the result are value/2pi in MHz; ``delta_m`` is the
    detuning from the intermediate state and must be nonzero.
    """
    if delta_m == 0:
        raise RydmisError("intermediate-state detuning must be nonzero")
    return omega_420 * omega_1013 / (2.0 * delta_m)


def omega_at(schedule: DriveSchedule, t: float) -> float:
    """Rabi frequency at time ``t`` (2pi*MHz)."""
    schedule._check_time(t)
    if t <= schedule.t_f1:
        return schedule.omega0 * (t / schedule.t_f1)
    if t <= schedule.t_f2:
        return schedule.omega0
    return schedule.omega0 * (t - schedule.tau) / (schedule.t_f2 - schedule.tau)


def sweep_amplitude(schedule: DriveSchedule, atom: int) -> float:
    """The sin^2 amplitude A_i for a 1-based atom index (2pi*MHz)."""
    if not 1 <= atom <= schedule.n_atoms:
        raise RydmisError(f"atom index {atom} out of range 1..{schedule.n_atoms}")
    s = math.sin(schedule._sweep_argument())
    return (schedule.delta_f[atom - 1] - schedule.delta0) / (s * s)


def sweep_fraction(schedule: DriveSchedule, t: float) -> float:
    """Dimensionless sweep progress: 0 before t_f1, 1 from t_f2 on.

    ``delta_i(t) = delta0 + (delta_f_i - delta0) * sweep_fraction(t)`` for
    every atom, which is what the propagation kernels evaluate.
    """
    schedule._check_time(t)
    if t < schedule.t_f1:
        return 0.0
    if t >= schedule.t_f2:
        return 1.0
    s = math.sin(schedule.alpha_d * (t - schedule.t_f1) / schedule.tau)
    d = math.sin(schedule._sweep_argument())
    return (s * s) / (d * d)


def delta_at(schedule: DriveSchedule, atom: int, t: float) -> float:
    """Detuning of a 1-based atom at time ``t`` (2pi*MHz)."""
    schedule._check_time(t)
    if not 1 <= atom <= schedule.n_atoms:
        raise RydmisError(f"atom index {atom} out of range 1..{schedule.n_atoms}")
    if t < schedule.t_f1:
        return schedule.delta0
    if t >= schedule.t_f2:
        return schedule.delta_f[atom - 1]
    s = math.sin(schedule.alpha_d * (t - schedule.t_f1) / schedule.tau)
    return sweep_amplitude(schedule, atom) * s * s + schedule.delta0


def peak_sweep_fraction(schedule: DriveSchedule) -> float:
    """Maximum of :func:`sweep_fraction` over the drive window.

    Equals 1 when the sine argument stays within [0, pi/2]; larger when the
    course overshoots (alpha_d * (t_f2 - t_f1) / tau > pi/2).
    """
    arg = schedule._sweep_argument()
    if arg <= 0.5 * math.pi:
        return 1.0
    s = math.sin(arg)
    return 1.0 / (s * s)


def max_abs_detuning(schedule: DriveSchedule) -> float:
    """max over atoms and times of |delta_i(t)| (2pi*MHz); used for step bounds."""
    peak = peak_sweep_fraction(schedule)
    worst = abs(schedule.delta0)
    for df in schedule.delta_f:
        worst = max(worst, abs(schedule.delta0 + peak * (df - schedule.delta0)), abs(df))
    return worst


def sweep_rate(schedule: DriveSchedule) -> float:
    """Mean detuning ramp rate (delta_f - delta0)/(t_f2 - t_f1), in 2pi*MHz/us.

    With per-atom final detunings the largest one labels the schedule, which
    coincides with the shared value for uniform sweeps.
    """
    df = max(schedule.delta_f)
    return (df - schedule.delta0) / (schedule.t_f2 - schedule.t_f1)


def blockade_radius(c6: float, omega0: float) -> float:
    """Blockade radius (C6/omega0)**(1/6) in um.

    ``c6`` is quoted in 2pi*GHz*um^6 and ``omega0`` in 2pi*MHz; the 2pi
    factors cancel and the GHz/MHz mismatch is converted here.
    """
    if not c6 > 0:
        raise RydmisError(f"C6 must be > 0, got {c6}")
    if not omega0 > 0:
        raise RydmisError(f"omega0 must be > 0, got {omega0}")
    return (c6 * GHZ_TO_MHZ / omega0) ** (1.0 / 6.0)


def schedule_for_array(
    omega0: float,
    delta0: float,
    weights: Sequence[float],
    *,
    alpha_d: float = 1.0,
    tau: float = 5.0,
    t_f1: float | None = None,
    t_f2: float | None = None,
) -> DriveSchedule:
    """Schedule whose per-atom final detunings are the vertex weights."""
    return DriveSchedule(
        omega0=omega0,
        delta0=delta0,
        delta_f=tuple(float(w) for w in weights),
        alpha_d=alpha_d,
        tau=tau,
        t_f1=-1.0 if t_f1 is None else t_f1,
        t_f2=-1.0 if t_f2 is None else t_f2,
    )
