"""Closed-form pressure-difference models over a bifurcation inlet-outlet pair.

Sign convention: every model returns dP = P_outlet_1 - P_inlet in dyn/cm^2,
so a pressure loss across the junction is negative.  All models treat
outlet 1 of the supplied geometry as the modeled outlet; swap the roles with
:func:`junctionrom.geometry.swap_outlets` to model the other one.

Angle convention: geometries store each outlet's deviation from the inlet
axis.  The branch-to-branch angle expected by the analytic junction model is
pi minus that deviation, so a straight continuation with equal velocities
yields zero loss; the mapping is applied wherever a geometry is consumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError
from .geometry import BifurcationGeometry, FluidProperties


@dataclass(frozen=True)
class RRICoefficients:
    """Coefficients of dP = r_linear*Q + r_quadratic*Q^2 + inductance*dQ/dt.

    Units: r_linear g cm^-4 s^-1, r_quadratic g cm^-7, inductance g cm^-4.
    No sign is enforced, but the inductance of a physical junction is
    expected to be negative under the P_outlet - P_inlet convention.
    """

    r_linear: float
    r_quadratic: float
    inductance: float = 0.0

    def __post_init__(self):
        for name in ("r_linear", "r_quadratic", "inductance"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite")

    def without_inductance(self) -> "RRICoefficients":
        """The steady RR reduction (inductance dropped)."""
        return RRICoefficients(self.r_linear, self.r_quadratic, 0.0)

    def to_dict(self) -> dict:
        return {
            "r_linear": self.r_linear,
            "r_quadratic": self.r_quadratic,
            "inductance": self.inductance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RRICoefficients":
        return cls(
            float(data["r_linear"]),
            float(data["r_quadratic"]),
            float(data.get("inductance", 0.0)),
        )


@dataclass(frozen=True)
class FlowState:
    """Instantaneous outlet flow (cm^3/s) and its time derivative (cm^3/s^2)."""

    flow: float
    dflow_dt: float = 0.0


def dp_static() -> float:
    """Static-pressure continuity: the junction imposes no pressure difference."""
    return 0.0


def dp_total_pressure(u_inlet: float, u_outlet: float, fluid: FluidProperties) -> float:
    """Total-pressure continuity: dP = rho/2 * (u_inlet^2 - u_outlet^2)."""
    return 0.5 * fluid.density * (u_inlet**2 - u_outlet**2)


def dp_unified0d(
    u_inlet: float, u_outlet: float, theta_branch: float, fluid: FluidProperties
) -> float:
    """Analytic junction loss at the bifurcation point.

    ``theta_branch`` is the angle between the outlet and inlet branch
    directions (pi - deviation angle).  Evaluated verbatim as

        (1 - (u_inlet/u_outlet) * cos(3/4 * (pi - theta_branch))) * rho * u_outlet^2

    which requires a nonzero outlet velocity.
    """
    if u_outlet == 0.0:
        raise ZeroDivisionError("dp_unified0d requires a nonzero outlet velocity")
    ratio = u_inlet / u_outlet
    bracket = 1.0 - ratio * math.cos(0.75 * (math.pi - theta_branch))
    return bracket * fluid.density * u_outlet**2


def _unified0d_expanded(
    u_inlet: float, u_outlet: float, theta_branch: float, density: float
) -> float:
    # Algebraically expanded form of dp_unified0d; removes the removable
    # singularity at u_outlet = 0 so network solves can pass through zero flow.
    cos_term = math.cos(0.75 * (math.pi - theta_branch))
    return density * u_outlet**2 - density * u_inlet * u_outlet * cos_term


def poiseuille_resistance(viscosity: float, length: float, radius: float) -> float:
    """Fully developed laminar pipe-flow resistance 8*mu*l / (pi*r^4)."""
    if radius <= 0:
        raise ConfigurationError(f"radius must be positive, got {radius}")
    return 8.0 * viscosity * length / (math.pi * radius**4)


def dp_unified0d_poiseuille(
    geom: BifurcationGeometry,
    q_inlet: float,
    q_outlet: float,
    fluid: FluidProperties,
    adjustment: float = 0.0,
) -> float:
    """Analytic junction loss extended to the measurement stations.

    Adds Poiseuille segment losses for the inlet and outlet vessels to the
    bifurcation-point model, so the result is comparable with station-to-
    station measurements.  ``adjustment`` is an additive hook for a combined-
    model correction and defaults to 0.  Velocities are bulk values Q/A.
    Uses the expanded core, which is well defined at zero flow.
    """
    u_inlet = q_inlet / geom.area_inlet
    u_outlet = q_outlet / geom.area_outlet_1
    theta_branch = math.pi - geom.theta_1
    core = _unified0d_expanded(u_inlet, u_outlet, theta_branch, fluid.density)
    loss_inlet = poiseuille_resistance(fluid.viscosity, geom.l_inlet, geom.r_inlet)
    loss_outlet = poiseuille_resistance(
        fluid.viscosity, geom.l_outlet_1, geom.r_outlet_1
    )
    return core + adjustment - loss_inlet * q_inlet - loss_outlet * q_outlet


def dp_rri(coeffs: RRICoefficients, state: FlowState) -> float:
    """dP of the RRI block: r_linear*Q + r_quadratic*Q^2 + inductance*dQ/dt."""
    q = state.flow
    return coeffs.r_linear * q + coeffs.r_quadratic * q * q + coeffs.inductance * state.dflow_dt


def dp_rri_derivatives(coeffs: RRICoefficients, state: FlowState) -> tuple[float, float]:
    """Analytic partials of :func:`dp_rri` with respect to Q and dQ/dt."""
    return (coeffs.r_linear + 2.0 * coeffs.r_quadratic * state.flow, coeffs.inductance)


# --- Junction laws -----------------------------------------------------------
#
# The network solver accepts any object exposing dp / dp_dq / dp_dqdot with
# the signature (q_outlet, q_dot, q_inlet); the prescribed inlet flow is passed
# through so velocity-based closures can form the inlet velocity.


class RRILaw:
    """RRI block as a solver closure; ignores the inlet flow."""

    def __init__(self, coeffs: RRICoefficients):
        self.coeffs = coeffs

    def dp(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        c = self.coeffs
        return c.r_linear * q_outlet + c.r_quadratic * q_outlet * q_outlet + c.inductance * q_dot

    def dp_dq(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        c = self.coeffs
        return c.r_linear + 2.0 * c.r_quadratic * q_outlet

    def dp_dqdot(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        return self.coeffs.inductance


class StaticContinuityLaw:
    """Zero pressure difference regardless of flow."""

    def dp(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        return 0.0

    def dp_dq(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        return 0.0

    def dp_dqdot(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        return 0.0


class TotalPressureLaw:
    """Total-pressure continuity with bulk velocities u = Q/A."""

    def __init__(self, geom: BifurcationGeometry, fluid: FluidProperties):
        self._area_inlet = geom.area_inlet
        self._area_outlet = geom.area_outlet_1
        self._density = fluid.density

    def dp(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        u_in = q_inlet / self._area_inlet
        u_out = q_outlet / self._area_outlet
        return 0.5 * self._density * (u_in * u_in - u_out * u_out)

    def dp_dq(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        return -self._density * q_outlet / self._area_outlet**2

    def dp_dqdot(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        return 0.0


class Unified0DPoiseuilleLaw:
    """Station-to-station analytic model as a solver closure.

    Uses the expanded core so the law, unlike raw :func:`dp_unified0d`, is
    defined at zero outlet flow crossed during Newton iterations.
    """

    def __init__(
        self,
        geom: BifurcationGeometry,
        fluid: FluidProperties,
        adjustment: float = 0.0,
    ):
        self._geom = geom
        self._fluid = fluid
        self._adjustment = adjustment
        self._cos = math.cos(0.75 * (math.pi - (math.pi - geom.theta_1)))
        self._r_in = poiseuille_resistance(fluid.viscosity, geom.l_inlet, geom.r_inlet)
        self._r_out = poiseuille_resistance(
            fluid.viscosity, geom.l_outlet_1, geom.r_outlet_1
        )

    def dp(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        return dp_unified0d_poiseuille(
            self._geom, q_inlet, q_outlet, self._fluid, self._adjustment
        )

    def dp_dq(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        geom = self._geom
        rho = self._fluid.density
        u_in = q_inlet / geom.area_inlet
        area_out = geom.area_outlet_1
        return (
            2.0 * rho * q_outlet / area_out**2
            - rho * u_in * self._cos / area_out
            - self._r_out
        )

    def dp_dqdot(self, q_outlet: float, q_dot: float, q_inlet: float) -> float:
        return 0.0


JUNCTION_MODEL_KINDS = ("static", "total", "unified0d", "rri")


def make_law(
    kind: str,
    geom: BifurcationGeometry | None = None,
    fluid: FluidProperties | None = None,
    coeffs: RRICoefficients | None = None,
    adjustment: float = 0.0,
):
    """Build a solver closure by model name.

    ``rri`` needs coefficients; ``total`` and ``unified0d`` need a geometry
    (outlet 1 is the modeled outlet) and fluid properties.
    """
    if kind == "static":
        return StaticContinuityLaw()
    if kind == "rri":
        if coeffs is None:
            raise ConfigurationError("rri law requires coefficients")
        return RRILaw(coeffs)
    if kind in ("total", "unified0d"):
        if geom is None:
            raise ConfigurationError(f"{kind} law requires a geometry")
        fluid = fluid or FluidProperties()
        if kind == "total":
            return TotalPressureLaw(geom, fluid)
        return Unified0DPoiseuilleLaw(geom, fluid, adjustment)
    raise ConfigurationError(
        f"unknown junction model {kind!r}; choose one of: {', '.join(JUNCTION_MODEL_KINDS)}"
    )
