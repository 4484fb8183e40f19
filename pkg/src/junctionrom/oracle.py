"""Synthetic ground truth standing in for 3D flow simulations.

Each bifurcation carries a hidden, physics-motivated pressure-difference law
per outlet: Poiseuille segment losses for the linear resistance, a
Bernoulli-with-loss term for the quadratic resistance, and a fluid-column
inertance.  Virtual experiments solve the junction network with that law and
record (flow, flow derivative, pressure difference) per outlet, mirroring the
steady 50%/100% runs and the single sinusoidal transient run of the data-
generation protocol.  Downstream code must treat the law as opaque; only
exact-recovery tests may call :func:`true_coefficients` directly.

The ``nonideal`` mode adds a transitional-loss perturbation proportional to
|Q|^1.75 so fitted coefficients are no longer exactly representable, and
measurement noise can be added to every recorded pressure difference.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ConfigurationError
from .geometry import BifurcationGeometry, FluidProperties, _check_outlet_index
from .junctions import RRICoefficients, poiseuille_resistance
from .solver import BoundaryCondition, solve_steady, solve_transient

ORACLE_MODES = ("pure_rri", "nonideal")

# Empirical loss factor of the hidden quadratic term.
QUADRATIC_LOSS_FACTOR = 1.5

# Outlet boundary condition used by the virtual-experiment protocol.  The
# distal pressure is zero; the resistance is chosen large enough that the
# network stays solvable across all built-in cohort boxes (isoradial
# geometries exhibit quadratic pressure recovery whose differential slope
# exceeds small outlet resistances at sampled flows, leaving the steady
# network without a root).
DEFAULT_BC_RESISTANCE = 2500.0
DEFAULT_BC = BoundaryCondition(resistance=DEFAULT_BC_RESISTANCE, distal_pressure=0.0)
DEFAULT_BCS = (DEFAULT_BC, DEFAULT_BC)

# Transient protocol defaults: one sinusoidal pulse at 1 kHz sampling.
DEFAULT_TIME_STEP = 0.001
DEFAULT_PERIOD = 1.0


@dataclass(frozen=True)
class OracleMode:
    """Oracle behavior switch.

    ``pure_rri`` produces data exactly representable by the RRI block;
    ``nonideal`` perturbs the quadratic term with a sign(Q)*|Q|^exponent
    transitional loss scaled by ``perturbation_scale`` times the quadratic
    coefficient.  ``noise_std`` is the standard deviation (dyn/cm^2) of
    Gaussian measurement noise added to recorded pressure differences.
    """

    mode: str = "pure_rri"
    noise_std: float = 0.0
    perturbation_scale: float = 0.1
    perturbation_exponent: float = 1.75

    def __post_init__(self):
        if self.mode not in ORACLE_MODES:
            raise ConfigurationError(
                f"unknown oracle mode {self.mode!r}; choose one of: {', '.join(ORACLE_MODES)}"
            )
        if self.noise_std < 0:
            raise ConfigurationError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.perturbation_exponent <= 1.0:
            raise ConfigurationError("perturbation_exponent must exceed 1")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "noise_std": self.noise_std,
            "perturbation_scale": self.perturbation_scale,
            "perturbation_exponent": self.perturbation_exponent,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OracleMode":
        return cls(
            mode=data.get("mode", "pure_rri"),
            noise_std=float(data.get("noise_std", 0.0)),
            perturbation_scale=float(data.get("perturbation_scale", 0.1)),
            perturbation_exponent=float(data.get("perturbation_exponent", 1.75)),
        )


def true_coefficients(
    geom: BifurcationGeometry, outlet_index: int, fluid: FluidProperties
) -> RRICoefficients:
    """Hidden ground-truth RRI coefficients for one outlet.

    Linear part: series Poiseuille resistances of the inlet and outlet
    segments.  Quadratic part: Bernoulli exchange between the inlet dynamic
    pressure (with the flow split estimated from the cube-law fraction
    r_k^3/(r_1^3+r_2^3)) and the outlet dynamic pressure inflated by an
    angle-dependent loss factor.  Inertance: fluid column inertia of both
    segments, negative under the P_outlet - P_inlet convention.
    """
    _check_outlet_index(outlet_index)
    r_out = geom.outlet_radius(outlet_index)
    l_out = geom.l_outlet_1 if outlet_index == 1 else geom.l_outlet_2
    theta = geom.theta_1 if outlet_index == 1 else geom.theta_2
    area_in = geom.area_inlet
    area_out = math.pi * r_out**2
    split = r_out**3 / (geom.r_outlet_1**3 + geom.r_outlet_2**3)

    r_linear = -(
        poiseuille_resistance(fluid.viscosity, geom.l_inlet, geom.r_inlet)
        + poiseuille_resistance(fluid.viscosity, l_out, r_out)
    )
    r_quadratic = (fluid.density / 2.0) * (
        1.0 / (split**2 * area_in**2)
        - (1.0 + QUADRATIC_LOSS_FACTOR * math.sin(theta)) / area_out**2
    )
    inductance = -fluid.density * (geom.l_inlet / area_in + l_out / area_out)
    return RRICoefficients(r_linear, r_quadratic, inductance)


class _TrueJunctionLaw:
    """Hidden per-outlet law: RRI block plus the optional nonideal loss."""

    def __init__(self, coeffs: RRICoefficients, mode: OracleMode):
        self._r_lin = coeffs.r_linear
        self._r_quad = coeffs.r_quadratic
        self._inductance = coeffs.inductance
        if mode.mode == "nonideal":
            self._pert = mode.perturbation_scale * coeffs.r_quadratic
            self._exponent = mode.perturbation_exponent
        else:
            self._pert = 0.0
            self._exponent = mode.perturbation_exponent

    def dp(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        value = (
            self._r_lin * q_outlet
            + self._r_quad * q_outlet * q_outlet
            + self._inductance * q_dot
        )
        if self._pert != 0.0 and q_outlet != 0.0:
            value += self._pert * math.copysign(
                abs(q_outlet) ** self._exponent, q_outlet
            )
        return value

    def dp_dq(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        slope = self._r_lin + 2.0 * self._r_quad * q_outlet
        if self._pert != 0.0 and q_outlet != 0.0:
            slope += self._pert * self._exponent * abs(q_outlet) ** (self._exponent - 1.0)
        return slope

    def dp_dqdot(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        return self._inductance


def _oracle_laws(geom, fluid, mode):
    return (
        _TrueJunctionLaw(true_coefficients(geom, 1, fluid), mode),
        _TrueJunctionLaw(true_coefficients(geom, 2, fluid), mode),
    )


def _area_split(geom):
    total = geom.area_outlet_1 + geom.area_outlet_2
    return (geom.area_outlet_1 / total, geom.area_outlet_2 / total)


def inlet_waveform(t: float, q_max: float, period: float) -> float:
    """Single sinusoidal pulse q_max * sin^2(pi t / period).

    Starts at zero, peaks at q_max at period/2, and returns to zero.
    """
    if period <= 0:
        raise ConfigurationError(f"period must be positive, got {period}")
    s = math.sin(math.pi * t / period)
    return q_max * s * s


@dataclass(frozen=True)
class SteadySample:
    """One steady operating point of one outlet."""

    q_outlet: float
    dp: float
    inlet_fraction: float

    def __post_init__(self):
        if not (math.isfinite(self.q_outlet) and math.isfinite(self.dp)):
            raise ConfigurationError("steady sample values must be finite")
        if self.inlet_fraction not in (0.25, 0.5, 0.75, 1.0):
            raise ConfigurationError(
                f"inlet_fraction must be one of 0.25/0.5/0.75/1.0, got {self.inlet_fraction}"
            )

    def to_dict(self) -> dict:
        return {
            "q_outlet": self.q_outlet,
            "dp": self.dp,
            "inlet_fraction": self.inlet_fraction,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SteadySample":
        return cls(
            q_outlet=float(data["q_outlet"]),
            dp=float(data["dp"]),
            inlet_fraction=float(data["inlet_fraction"]),
        )


@dataclass
class TransientTrace:
    """Per-outlet time series of one transient virtual experiment.

    ``q_dot`` is the backward difference (q[i] - q[i-1])/dt with q_dot[0] = 0,
    matching the discretization the network solver used to produce the data.
    """

    times: np.ndarray
    q: np.ndarray
    q_dot: np.ndarray
    dp: np.ndarray
    dt: float

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.q) == len(self.q_dot) == len(self.dp) == n):
            raise ConfigurationError("trace arrays must have equal length")
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")

    @classmethod
    def from_flow_series(cls, times, q, dp, dt) -> "TransientTrace":
        q = np.asarray(q, dtype=float)
        q_dot = np.empty_like(q)
        q_dot[0] = 0.0
        q_dot[1:] = np.diff(q) / dt
        return cls(
            times=np.asarray(times, dtype=float),
            q=q,
            q_dot=q_dot,
            dp=np.asarray(dp, dtype=float),
            dt=dt,
        )

    def __len__(self) -> int:
        return len(self.times)


def run_steady(
    geom: BifurcationGeometry,
    fluid: FluidProperties,
    q_inlet: float,
    mode: OracleMode,
    bcs: Tuple[BoundaryCondition, BoundaryCondition] = DEFAULT_BCS,
    inlet_fraction: float = 1.0,
    seed: int | None = None,
) -> Tuple[SteadySample, SteadySample]:
    """One steady virtual experiment; returns one sample per outlet.

    The recorded pressure difference re-evaluates the hidden law at the
    converged flow (plus measurement noise when configured), so in pure mode
    samples satisfy the RRI relation exactly.
    """
    laws = _oracle_laws(geom, fluid, mode)
    state = solve_steady(laws, bcs, q_inlet, initial_split=_area_split(geom))
    dp1 = laws[0].dp(state.q_outlet_1, 0.0, q_inlet)
    dp2 = laws[1].dp(state.q_outlet_2, 0.0, q_inlet)
    if mode.noise_std > 0:
        rng = np.random.default_rng(seed)
        noise = rng.normal(0.0, mode.noise_std, size=2)
        dp1 += noise[0]
        dp2 += noise[1]
    return (
        SteadySample(q_outlet=state.q_outlet_1, dp=dp1, inlet_fraction=inlet_fraction),
        SteadySample(q_outlet=state.q_outlet_2, dp=dp2, inlet_fraction=inlet_fraction),
    )


def run_transient(
    geom: BifurcationGeometry,
    fluid: FluidProperties,
    q_max: float,
    period: float = DEFAULT_PERIOD,
    dt: float = DEFAULT_TIME_STEP,
    mode: OracleMode = OracleMode(),
    bcs: Tuple[BoundaryCondition, BoundaryCondition] = DEFAULT_BCS,
    seed: int | None = None,
) -> Tuple[TransientTrace, TransientTrace]:
    """One transient virtual experiment over a single inlet pulse.

    Marches the network at the given time step, then records per-outlet
    traces whose pressure differences re-evaluate the hidden law at the
    converged flows and backward-difference derivatives.
    """
    laws = _oracle_laws(geom, fluid, mode)
    series = solve_transient(
        laws,
        bcs,
        lambda t: inlet_waveform(t, q_max, period),
        duration=period,
        dt=dt,
        initial_split=_area_split(geom),
    )
    q_in = series.q_outlet_1 + series.q_outlet_2
    traces = []
    for law, q in ((laws[0], series.q_outlet_1), (laws[1], series.q_outlet_2)):
        q_dot = np.empty_like(q)
        q_dot[0] = 0.0
        q_dot[1:] = np.diff(q) / dt
        dp = np.array(
            [law.dp(q[i], q_dot[i], q_in[i]) for i in range(len(q))]
        )
        traces.append(
            TransientTrace(times=series.times.copy(), q=q, q_dot=q_dot, dp=dp, dt=dt)
        )
    if mode.noise_std > 0:
        rng = np.random.default_rng(seed)
        for trace in traces:
            trace.dp = trace.dp + rng.normal(0.0, mode.noise_std, size=len(trace))
    return traces[0], traces[1]


def export_traces_csv(trace_1: TransientTrace, trace_2: TransientTrace, path) -> None:
    """Plot-friendly CSV of one transient experiment.

    Columns: t, Q (inlet flow), Q_dot (its backward difference), and the
    pressure difference of each outlet.
    """
    q_inlet = trace_1.q + trace_2.q
    q_inlet_dot = np.empty_like(q_inlet)
    q_inlet_dot[0] = 0.0
    q_inlet_dot[1:] = np.diff(q_inlet) / trace_1.dt
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "Q", "Q_dot", "dP_outlet1", "dP_outlet2"])
        for i in range(len(trace_1)):
            writer.writerow(
                [
                    repr(float(trace_1.times[i])),
                    repr(float(q_inlet[i])),
                    repr(float(q_inlet_dot[i])),
                    repr(float(trace_1.dp[i])),
                    repr(float(trace_2.dp[i])),
                ]
            )
