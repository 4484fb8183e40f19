"""Nonlinear 0D junction-network solver.

A single bifurcation network: prescribed inlet flow, one junction pressure-
difference law per outlet (anything exposing ``dp``/``dp_dq``/``dp_dqdot``),
and a resistance boundary condition closing each outlet.  The unknowns are
(P_inlet, Q_1, Q_2) and the residual system is

    mass:       Q_1 + Q_2 - Q_inlet
    pressure k: P_inlet + dP_k(Q_k, dQ_k/dt) - (R_k * Q_k + P_distal_k)

solved by damped Newton iteration with the analytic Jacobian.  In transient
marches dQ/dt is the backward difference against the previous converged step,
consistent with how virtual-experiment traces define it, so fitting and
solving share one discretization.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, SolverError
from .geometry import to_mmhg

MAX_NEWTON_ITERATIONS = 100
MAX_LINE_SEARCH_HALVINGS = 30
RESIDUAL_TOLERANCE = 1e-10


@dataclass(frozen=True)
class BoundaryCondition:
    """Outlet closure P_outlet = resistance * Q + distal_pressure (CGS units)."""

    resistance: float
    distal_pressure: float = 0.0

    def __post_init__(self):
        if not (self.resistance > 0 and math.isfinite(self.resistance)):
            raise ConfigurationError(
                f"resistance must be positive, got {self.resistance}"
            )


@dataclass(frozen=True)
class NetworkState:
    """Converged solution of the junction network at one instant."""

    p_inlet: float
    q_outlet_1: float
    q_outlet_2: float
    p_outlet_1: float
    p_outlet_2: float


@dataclass
class SolveInfo:
    """Diagnostics of one Newton solve."""

    iterations: int = 0
    residual_norms: list = field(default_factory=list)


def residual_and_jacobian(
    x: Sequence[float],
    laws,
    bcs,
    q_inlet: float,
    q_prev: Sequence[float] | None = None,
    dt: float | None = None,
):
    """Residual vector and analytic Jacobian at x = (p_inlet, q1, q2).

    With ``q_prev`` and ``dt`` given, each outlet's flow derivative is
    (q_k - q_prev_k)/dt and the pressure rows pick up the d(dP)/d(dQ/dt)/dt
    Jacobian contribution; otherwise the solve is steady (dQ/dt = 0).
    """
    p, q1, q2 = x
    law1, law2 = laws
    bc1, bc2 = bcs
    if q_prev is None:
        qd1 = qd2 = 0.0
        dqd_dq = 0.0
    else:
        qd1 = (q1 - q_prev[0]) / dt
        qd2 = (q2 - q_prev[1]) / dt
        dqd_dq = 1.0 / dt
    r0 = q1 + q2 - q_inlet
    r1 = p + law1.dp(q1, qd1, q_inlet) - (bc1.resistance * q1 + bc1.distal_pressure)
    r2 = p + law2.dp(q2, qd2, q_inlet) - (bc2.resistance * q2 + bc2.distal_pressure)
    d1 = law1.dp_dq(q1, qd1, q_inlet) + law1.dp_dqdot(q1, qd1, q_inlet) * dqd_dq - bc1.resistance
    d2 = law2.dp_dq(q2, qd2, q_inlet) + law2.dp_dqdot(q2, qd2, q_inlet) * dqd_dq - bc2.resistance
    residual = (r0, r1, r2)
    jacobian = ((0.0, 1.0, 1.0), (1.0, d1, 0.0), (1.0, 0.0, d2))
    return residual, jacobian


def _residual_norm(residual) -> float:
    return max(abs(residual[0]), abs(residual[1]), abs(residual[2]))


def _newton_step(residual, jacobian):
    # Structured elimination of the 3x3 system J dx = -r; the Jacobian always
    # has the sparsity [[0,1,1],[1,d1,0],[1,0,d2]].
    r0, r1, r2 = residual
    d1 = jacobian[1][1]
    d2 = jacobian[2][2]
    if d1 == 0.0 or d2 == 0.0 or (d1 + d2) == 0.0:
        raise SolverError(
            "singular Jacobian in junction-network solve",
            residual_norm=_residual_norm(residual),
        )
    dp = (r0 - r1 / d1 - r2 / d2) / (1.0 / d1 + 1.0 / d2)
    dq1 = (-r1 - dp) / d1
    dq2 = (-r2 - dp) / d2
    return dp, dq1, dq2


def _solve_network(laws, bcs, q_inlet, x0, q_prev=None, dt=None):
    x = list(x0)
    info = SolveInfo()
    residual, jacobian = residual_and_jacobian(x, laws, bcs, q_inlet, q_prev, dt)
    norm = _residual_norm(residual)
    info.residual_norms.append(norm)
    for _ in range(MAX_NEWTON_ITERATIONS):
        if norm <= RESIDUAL_TOLERANCE * max(1.0, abs(x[0])):
            return x, info
        dx = _newton_step(residual, jacobian)
        scale = 1.0
        accepted = False
        for _ in range(MAX_LINE_SEARCH_HALVINGS + 1):
            trial = [x[0] + scale * dx[0], x[1] + scale * dx[1], x[2] + scale * dx[2]]
            trial_residual, trial_jacobian = residual_and_jacobian(
                trial, laws, bcs, q_inlet, q_prev, dt
            )
            trial_norm = _residual_norm(trial_residual)
            if math.isfinite(trial_norm) and trial_norm < norm:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            raise SolverError(
                "Newton line search stalled",
                residual_norm=norm,
                iterate=tuple(x),
            )
        x = trial
        residual, jacobian = trial_residual, trial_jacobian
        norm = trial_norm
        info.iterations += 1
        info.residual_norms.append(norm)
    if norm <= RESIDUAL_TOLERANCE * max(1.0, abs(x[0])):
        return x, info
    raise SolverError(
        f"Newton did not converge in {MAX_NEWTON_ITERATIONS} iterations "
        f"(residual {norm:.3e})",
        residual_norm=norm,
        iterate=tuple(x),
    )


def _initial_state(laws, bcs, q_inlet, initial_split, q_prev=None, dt=None):
    f1, f2 = initial_split
    total = f1 + f2
    if total <= 0:
        raise ConfigurationError("initial flow split fractions must be positive")
    q1 = q_inlet * f1 / total
    q2 = q_inlet * f2 / total
    if q_prev is None:
        qd1 = qd2 = 0.0
    else:
        qd1 = (q1 - q_prev[0]) / dt
        qd2 = (q2 - q_prev[1]) / dt
    p1 = bcs[0].resistance * q1 + bcs[0].distal_pressure - laws[0].dp(q1, qd1, q_inlet)
    p2 = bcs[1].resistance * q2 + bcs[1].distal_pressure - laws[1].dp(q2, qd2, q_inlet)
    return [0.5 * (p1 + p2), q1, q2]


def _state_from_solution(x, bcs) -> NetworkState:
    p, q1, q2 = x
    return NetworkState(
        p_inlet=p,
        q_outlet_1=q1,
        q_outlet_2=q2,
        p_outlet_1=bcs[0].resistance * q1 + bcs[0].distal_pressure,
        p_outlet_2=bcs[1].resistance * q2 + bcs[1].distal_pressure,
    )


def solve_steady(
    laws,
    bcs,
    q_inlet: float,
    initial_split=(0.5, 0.5),
    return_info: bool = False,
):
    """Solve the steady network (dQ/dt = 0) for a prescribed inlet flow.

    ``initial_split`` seeds the Newton iteration; pass outlet-area fractions
    when a geometry is available, which keeps quadratic laws away from their
    spurious branches.
    """
    x0 = _initial_state(laws, bcs, q_inlet, initial_split)
    x, info = _solve_network(laws, bcs, q_inlet, x0)
    state = _state_from_solution(x, bcs)
    return (state, info) if return_info else state


@dataclass
class NetworkTimeSeries:
    """Per-step network solutions of a transient march."""

    times: np.ndarray
    p_inlet: np.ndarray
    q_outlet_1: np.ndarray
    q_outlet_2: np.ndarray
    p_outlet_1: np.ndarray
    p_outlet_2: np.ndarray
    dt: float

    def state_at(self, index: int) -> NetworkState:
        return NetworkState(
            p_inlet=float(self.p_inlet[index]),
            q_outlet_1=float(self.q_outlet_1[index]),
            q_outlet_2=float(self.q_outlet_2[index]),
            p_outlet_1=float(self.p_outlet_1[index]),
            p_outlet_2=float(self.p_outlet_2[index]),
        )

    def to_csv(self, path) -> None:
        """Write the series with pressures duplicated in mmHg columns."""
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                [
                    "t",
                    "p_inlet",
                    "q_outlet_1",
                    "p_outlet_1",
                    "q_outlet_2",
                    "p_outlet_2",
                    "p_inlet_mmhg",
                    "p_outlet_1_mmhg",
                    "p_outlet_2_mmhg",
                ]
            )
            for i in range(len(self.times)):
                writer.writerow(
                    [
                        repr(float(self.times[i])),
                        repr(float(self.p_inlet[i])),
                        repr(float(self.q_outlet_1[i])),
                        repr(float(self.p_outlet_1[i])),
                        repr(float(self.q_outlet_2[i])),
                        repr(float(self.p_outlet_2[i])),
                        repr(to_mmhg(float(self.p_inlet[i]))),
                        repr(to_mmhg(float(self.p_outlet_1[i]))),
                        repr(to_mmhg(float(self.p_outlet_2[i]))),
                    ]
                )


def step_count(duration: float, dt: float) -> int:
    """Number of steps in [0, duration]; duration must be a multiple of dt."""
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    steps = round(duration / dt)
    if steps < 1 or abs(steps * dt - duration) > 1e-9 * max(1.0, duration):
        raise ConfigurationError(
            f"duration {duration} is not a positive multiple of dt {dt}"
        )
    return steps


def solve_transient(
    laws,
    bcs,
    waveform: Callable[[float], float],
    duration: float,
    dt: float,
    initial_split=(0.5, 0.5),
) -> NetworkTimeSeries:
    """March the network over [0, duration] with a prescribed inlet waveform.

    The first step is a steady solve at waveform(0); later steps use the
    backward-difference flow derivative and warm-start from the previous
    solution.
    """
    steps = step_count(duration, dt)
    times = np.arange(steps + 1) * dt
    p = np.empty(steps + 1)
    q1 = np.empty(steps + 1)
    q2 = np.empty(steps + 1)
    x0 = _initial_state(laws, bcs, waveform(0.0), initial_split)
    x, _ = _solve_network(laws, bcs, waveform(0.0), x0)
    p[0], q1[0], q2[0] = x
    for i in range(1, steps + 1):
        q_inlet = waveform(float(times[i]))
        q_prev = (x[1], x[2])
        try:
            x, _ = _solve_network(laws, bcs, q_inlet, list(x), q_prev, dt)
        except SolverError as exc:
            raise SolverError(
                f"transient solve failed at step {i} (t = {times[i]:.6g} s): {exc}",
                residual_norm=exc.residual_norm,
                iterate=exc.iterate,
                step_index=i,
            ) from exc
        p[i], q1[i], q2[i] = x
    return NetworkTimeSeries(
        times=times,
        p_inlet=p,
        q_outlet_1=q1,
        q_outlet_2=q2,
        p_outlet_1=bcs[0].resistance * q1 + bcs[0].distal_pressure,
        p_outlet_2=bcs[1].resistance * q2 + bcs[1].distal_pressure,
        dt=dt,
    )


def cycle_integral(q: np.ndarray, dp: np.ndarray) -> float:
    """Signed loop integral of dP over Q along a closed flow cycle.

    Trapezoidal integration including the segment closing the path back to
    the first point.  Zero (up to quadrature error) whenever dP is a function
    of Q alone; the sign follows the inductance when an inductive term is the
    only source of hysteresis.
    """
    q = np.asarray(q, dtype=float)
    dp = np.asarray(dp, dtype=float)
    q_closed = np.append(q, q[0])
    dp_closed = np.append(dp, dp[0])
    return float(np.sum(0.5 * (dp_closed[1:] + dp_closed[:-1]) * np.diff(q_closed)))
