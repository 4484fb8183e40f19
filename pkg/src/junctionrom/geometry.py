"""Bifurcation geometry, fluid properties, cohort specifications, and sampling.

Everything internal runs in CGS units (cm, g, s): radii and lengths in cm,
velocities in cm/s, flows in cm^3/s, pressures in dyn/cm^2.  Pressures are
converted to mmHg only at reporting boundaries.  Outlet angles are stored in
radians as the deviation of each outlet from the inlet axis, so a straight
continuation has angle 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigurationError

# 1 mmHg expressed in dyn/cm^2.
MMHG_IN_CGS = 1333.22

# Measurement stations sit 10 inlet diameters away from the bifurcation point,
# far enough for fully developed flow; sampled lengths add a bounded jitter so
# the length features are not a deterministic function of the inlet radius.
STATION_DIAMETERS = 10


def to_mmhg(pressure_cgs: float) -> float:
    """Convert a pressure from dyn/cm^2 to mmHg."""
    return pressure_cgs / MMHG_IN_CGS


def from_mmhg(pressure_mmhg: float) -> float:
    """Convert a pressure from mmHg to dyn/cm^2."""
    return pressure_mmhg * MMHG_IN_CGS


@dataclass(frozen=True)
class FluidProperties:
    """Blood-like fluid: density in g/cm^3, dynamic viscosity in poise."""

    density: float = 1.06
    viscosity: float = 0.04

    def __post_init__(self):
        if not (self.density > 0 and math.isfinite(self.density)):
            raise ConfigurationError(f"density must be positive, got {self.density}")
        if not (self.viscosity > 0 and math.isfinite(self.viscosity)):
            raise ConfigurationError(f"viscosity must be positive, got {self.viscosity}")


@dataclass(frozen=True)
class BifurcationGeometry:
    """One inlet splitting into two outlets.

    Outlet 1 is, by convention, the outlet whose pressure difference is being
    modeled; outlet 2 is the auxiliary outlet.  Use :func:`swap_outlets` to
    exchange the roles.  Lengths are the distances from the bifurcation point
    to the measurement stations.
    """

    r_inlet: float
    r_outlet_1: float
    r_outlet_2: float
    theta_1: float
    theta_2: float
    l_outlet_1: float
    l_outlet_2: float
    l_inlet: float

    def __post_init__(self):
        for name in ("r_inlet", "r_outlet_1", "r_outlet_2"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigurationError(f"{name} must be positive, got {value}")
        for name in ("l_inlet", "l_outlet_1", "l_outlet_2"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigurationError(f"{name} must be positive, got {value}")
        for name in ("theta_1", "theta_2"):
            value = getattr(self, name)
            if not (0.0 <= value < math.pi / 2):
                raise ConfigurationError(
                    f"{name} must lie in [0, pi/2) radians, got {value}"
                )

    @property
    def area_inlet(self) -> float:
        return math.pi * self.r_inlet**2

    @property
    def area_outlet_1(self) -> float:
        return math.pi * self.r_outlet_1**2

    @property
    def area_outlet_2(self) -> float:
        return math.pi * self.r_outlet_2**2

    def outlet_radius(self, outlet_index: int) -> float:
        _check_outlet_index(outlet_index)
        return self.r_outlet_1 if outlet_index == 1 else self.r_outlet_2

    def to_dict(self) -> dict:
        return {
            "r_inlet": self.r_inlet,
            "r_outlet_1": self.r_outlet_1,
            "r_outlet_2": self.r_outlet_2,
            "theta_1": self.theta_1,
            "theta_2": self.theta_2,
            "l_outlet_1": self.l_outlet_1,
            "l_outlet_2": self.l_outlet_2,
            "l_inlet": self.l_inlet,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BifurcationGeometry":
        return cls(**{k: float(data[k]) for k in cls.__dataclass_fields__})


def swap_outlets(geom: BifurcationGeometry) -> BifurcationGeometry:
    """Return the same bifurcation with the outlet roles exchanged."""
    return BifurcationGeometry(
        r_inlet=geom.r_inlet,
        r_outlet_1=geom.r_outlet_2,
        r_outlet_2=geom.r_outlet_1,
        theta_1=geom.theta_2,
        theta_2=geom.theta_1,
        l_outlet_1=geom.l_outlet_2,
        l_outlet_2=geom.l_outlet_1,
        l_inlet=geom.l_inlet,
    )


# Fixed ordering of the regression features; index 1 is the modeled outlet.
FEATURE_NAMES = (
    "r_inlet",
    "r_outlet_1",
    "r_outlet_2",
    "theta_1",
    "theta_2",
    "l_outlet_1",
    "l_outlet_2",
)


def feature_vector(geom: BifurcationGeometry, outlet_index: int = 1) -> np.ndarray:
    """Seven geometric features in the frozen order of ``FEATURE_NAMES``.

    ``outlet_index=2`` returns the role-swapped permutation (positions 2<->3,
    4<->5, 6<->7 exchanged); swapping twice is the identity.
    """
    _check_outlet_index(outlet_index)
    if outlet_index == 2:
        geom = swap_outlets(geom)
    return np.array(
        [
            geom.r_inlet,
            geom.r_outlet_1,
            geom.r_outlet_2,
            geom.theta_1,
            geom.theta_2,
            geom.l_outlet_1,
            geom.l_outlet_2,
        ]
    )


def _check_outlet_index(outlet_index: int) -> None:
    if outlet_index not in (1, 2):
        raise ConfigurationError(f"outlet_index must be 1 or 2, got {outlet_index}")


Interval = Tuple[float, float]


@dataclass(frozen=True)
class CohortSpec:
    """Uniform sampling box for one bifurcation cohort.

    Outlet sizes are described either by a direct outlet-radius interval or by
    an outlet-to-inlet radius-ratio interval (exactly one of the two).  Angles
    are in degrees, matching the tabulated ranges; they are converted to
    radians during sampling.
    """

    name: str
    inlet_radius: Interval
    outlet_angle_deg: Interval
    inlet_velocity: Interval
    outlet_radius: Optional[Interval] = None
    radius_ratio: Optional[Interval] = None

    def __post_init__(self):
        if (self.outlet_radius is None) == (self.radius_ratio is None):
            raise ConfigurationError(
                "exactly one of outlet_radius and radius_ratio must be given"
            )
        for field in ("inlet_radius", "outlet_angle_deg", "inlet_velocity",
                      "outlet_radius", "radius_ratio"):
            interval = getattr(self, field)
            if interval is None:
                continue
            lo, hi = interval
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ConfigurationError(f"{field} interval [{lo}, {hi}] is invalid")
        if self.inlet_radius[0] <= 0:
            raise ConfigurationError("inlet_radius must be positive")
        if self.outlet_radius is not None and self.outlet_radius[0] <= 0:
            raise ConfigurationError("outlet_radius must be positive")
        if self.radius_ratio is not None and self.radius_ratio[0] <= 0:
            raise ConfigurationError("radius_ratio must be positive")
        lo, hi = self.outlet_angle_deg
        if not (0.0 <= lo and hi < 90.0):
            raise ConfigurationError("outlet_angle_deg must lie within [0, 90)")

    def to_dict(self) -> dict:
        data = {
            "name": self.name,
            "inlet_radius": list(self.inlet_radius),
            "outlet_angle_deg": list(self.outlet_angle_deg),
            "inlet_velocity": list(self.inlet_velocity),
        }
        if self.outlet_radius is not None:
            data["outlet_radius"] = list(self.outlet_radius)
        else:
            data["radius_ratio"] = list(self.radius_ratio)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "CohortSpec":
        def interval(key):
            if key not in data:
                return None
            lo, hi = data[key]
            return (float(lo), float(hi))

        try:
            return cls(
                name=str(data["name"]),
                inlet_radius=interval("inlet_radius"),
                outlet_angle_deg=interval("outlet_angle_deg"),
                inlet_velocity=interval("inlet_velocity"),
                outlet_radius=interval("outlet_radius"),
                radius_ratio=interval("radius_ratio"),
            )
        except KeyError as exc:
            raise ConfigurationError(f"cohort spec is missing key {exc}") from exc

    @classmethod
    def from_json_file(cls, path) -> "CohortSpec":
        with open(path) as handle:
            return cls.from_dict(json.load(handle))


# Built-in cohorts.  Isoradial outlets are sampled directly; the other two
# cohorts sample an outlet-to-inlet ratio per outlet and multiply by the inlet
# radius.  The ratio bounds are chosen so the product range spans the target
# outlet-radius range exactly (lo/lo to hi/hi of the tabulated intervals).
ISORADIAL = CohortSpec(
    name="isoradial",
    inlet_radius=(0.44, 0.66),
    outlet_radius=(0.44, 0.66),
    outlet_angle_deg=(36.0, 54.0),
    inlet_velocity=(49.0, 74.0),
)

PULMONARY = CohortSpec(
    name="pulmonary",
    inlet_radius=(0.28, 0.37),
    radius_ratio=(0.16 / 0.28, 0.27 / 0.37),  # outlet radii 0.16 - 0.27 cm
    outlet_angle_deg=(13.0, 19.0),
    inlet_velocity=(95.0, 140.0),
)

BRACHIOCEPHALIC = CohortSpec(
    name="brachiocephalic",
    inlet_radius=(0.46, 0.59),
    radius_ratio=(0.28 / 0.46, 0.43 / 0.59),  # outlet radii 0.28 - 0.43 cm
    outlet_angle_deg=(16.0, 24.0),
    inlet_velocity=(127.0, 180.0),
)

BUILTIN_COHORTS = {
    spec.name: spec for spec in (ISORADIAL, PULMONARY, BRACHIOCEPHALIC)
}


def builtin_cohort(name: str) -> CohortSpec:
    try:
        return BUILTIN_COHORTS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_COHORTS))
        raise ConfigurationError(f"unknown cohort {name!r}; choose one of: {known}")


@dataclass(frozen=True)
class CohortSample:
    """One sampled virtual-experiment case: a geometry plus its inlet velocity."""

    geometry: BifurcationGeometry
    inlet_velocity: float

    @property
    def q_inlet(self) -> float:
        """Peak inlet flow implied by the sampled velocity, cm^3/s."""
        return self.inlet_velocity * self.geometry.area_inlet


def sample_cohort_case(spec: CohortSpec, rng_seed: int) -> CohortSample:
    """Draw one geometry and inlet velocity uniformly from the cohort box.

    Deterministic in ``rng_seed``.  Draw order is fixed (inlet radius, outlet
    sizes, angles, length jitters, velocity) so the geometry produced for a
    seed never changes.
    """
    rng = np.random.default_rng(rng_seed)
    r_inlet = rng.uniform(*spec.inlet_radius)
    if spec.radius_ratio is not None:
        r_1 = r_inlet * rng.uniform(*spec.radius_ratio)
        r_2 = r_inlet * rng.uniform(*spec.radius_ratio)
    else:
        r_1 = rng.uniform(*spec.outlet_radius)
        r_2 = rng.uniform(*spec.outlet_radius)
    theta_1 = math.radians(rng.uniform(*spec.outlet_angle_deg))
    theta_2 = math.radians(rng.uniform(*spec.outlet_angle_deg))
    station = STATION_DIAMETERS * 2.0 * r_inlet
    l_inlet = station + rng.uniform(0.0, 2.0 * r_inlet)
    l_1 = station + rng.uniform(0.0, 2.0 * r_inlet)
    l_2 = station + rng.uniform(0.0, 2.0 * r_inlet)
    velocity = rng.uniform(*spec.inlet_velocity)
    geometry = BifurcationGeometry(
        r_inlet=r_inlet,
        r_outlet_1=r_1,
        r_outlet_2=r_2,
        theta_1=theta_1,
        theta_2=theta_2,
        l_outlet_1=l_1,
        l_outlet_2=l_2,
        l_inlet=l_inlet,
    )
    return CohortSample(geometry=geometry, inlet_velocity=velocity)


def sample_cohort_geometry(spec: CohortSpec, rng_seed: int) -> BifurcationGeometry:
    """Geometry-only view of :func:`sample_cohort_case` (same draws, same seed)."""
    return sample_cohort_case(spec, rng_seed).geometry
