"""Extraction of RRI coefficients from virtual-experiment data.

Two routes mirror the data-generation protocol: the standard route solves the
two steady operating points exactly for the resistances and then least-
squares the inductance from the transient trace; the transient-optimized (TO)
route fits all three coefficients to the trace at once.  Least squares is
solved by orthogonal factorization (LAPACK lstsq), never normal equations,
because the [Q, Q^2, dQ/dt] design matrix can be poorly scaled.

The first trace sample is excluded from every trace-based fit: its backward-
difference flow derivative is undefined and pinned to zero by convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import DegenerateDataError
from .geometry import BifurcationGeometry
from .junctions import RRICoefficients
from .oracle import SteadySample, TransientTrace

# Relative threshold below which the steady 2x2 system counts as singular.
_SINGULAR_REL = 1e-14


def fit_steady(s50: SteadySample, s100: SteadySample) -> Tuple[float, float]:
    """Exact (r_linear, r_quadratic) from the 50% and 100% operating points.

    Solves [Q50, Q50^2; Q100, Q100^2] [r_lin; r_quad] = [dP50; dP100]; the
    result reproduces both samples to machine precision.
    """
    q_a, q_b = s50.q_outlet, s100.q_outlet
    determinant = q_a * q_b * (q_b - q_a)
    scale = max(abs(q_a), abs(q_b)) ** 3
    if scale == 0.0 or abs(determinant) <= _SINGULAR_REL * scale:
        raise DegenerateDataError(
            f"steady operating points Q={q_a:.6g} and Q={q_b:.6g} do not "
            "determine the resistances (zero or coincident flows)"
        )
    r_quadratic = (s100.dp / q_b - s50.dp / q_a) / (q_b - q_a)
    r_linear = s50.dp / q_a - r_quadratic * q_a
    return r_linear, r_quadratic


def fit_steady_least_squares(samples: Sequence[SteadySample]) -> Tuple[float, float]:
    """Least-squares resistances from several steady operating points.

    Alternative to :func:`fit_steady` when more than two steady runs are
    available (the optional four-point protocol); reduces to the exact solve
    for two points.
    """
    if len(samples) < 2:
        raise DegenerateDataError("need at least two steady samples")
    q = np.array([s.q_outlet for s in samples])
    dp = np.array([s.dp for s in samples])
    design = np.column_stack([q, q * q])
    solution, _, rank, _ = np.linalg.lstsq(design, dp, rcond=None)
    if rank < 2:
        raise DegenerateDataError(
            "steady samples are rank deficient; flows may coincide or vanish"
        )
    return float(solution[0]), float(solution[1])


def _trace_rows(trace: TransientTrace):
    # Skip the first sample: q_dot[0] is pinned to 0 by convention rather
    # than measured, so it contributes no information.
    return trace.q[1:], trace.q_dot[1:], trace.dp[1:]


def fit_inductance(trace: TransientTrace, r_linear: float, r_quadratic: float) -> float:
    """Closed-form least-squares inductance given the steady resistances.

    Minimizes sum_i (dp_i - r_lin q_i - r_quad q_i^2 - L qdot_i)^2, i.e.
    L = sum(residual * qdot) / sum(qdot^2).
    """
    q, q_dot, dp = _trace_rows(trace)
    denominator = float(np.dot(q_dot, q_dot))
    if denominator == 0.0:
        raise DegenerateDataError(
            "trace has an identically zero flow derivative; inductance is undetermined"
        )
    residual = dp - r_linear * q - r_quadratic * q * q
    return float(np.dot(residual, q_dot) / denominator)


def fit_transient_optimized(trace: TransientTrace) -> Tuple[RRICoefficients, float]:
    """All three coefficients from the transient trace, plus the residual RMS.

    One linear equation per timestep: dp_i = r_lin q_i + r_quad q_i^2 +
    L qdot_i.  Solved by orthogonalization; raises when the design matrix
    loses rank, naming the dependent column combination.
    """
    q, q_dot, dp = _trace_rows(trace)
    design = np.column_stack([q, q * q, q_dot])
    solution, _, rank, singular_values = np.linalg.lstsq(design, dp, rcond=None)
    if rank < 3:
        raise DegenerateDataError(
            "transient design matrix is rank deficient: "
            + _describe_deficiency(design, singular_values)
        )
    fitted = design @ solution
    residual_rms = float(np.sqrt(np.mean((dp - fitted) ** 2)))
    coeffs = RRICoefficients(
        r_linear=float(solution[0]),
        r_quadratic=float(solution[1]),
        inductance=float(solution[2]),
    )
    return coeffs, residual_rms


_COLUMN_NAMES = ("Q", "Q^2", "dQ/dt")


def _describe_deficiency(design: np.ndarray, singular_values: np.ndarray) -> str:
    norms = np.linalg.norm(design, axis=0)
    zero_columns = [name for name, n in zip(_COLUMN_NAMES, norms) if n == 0.0]
    if zero_columns:
        return f"column(s) {', '.join(zero_columns)} are identically zero"
    # Name the columns dominating the null-space direction.
    _, _, vt = np.linalg.svd(design / norms, full_matrices=False)
    null_direction = np.abs(vt[-1])
    involved = [
        name
        for name, weight in zip(_COLUMN_NAMES, null_direction)
        if weight > 0.1 * null_direction.max()
    ]
    return f"columns {', '.join(involved)} are linearly dependent"


@dataclass(frozen=True)
class FittedRecord:
    """Fitted coefficients of one geometry-outlet pair."""

    geometry: BifurcationGeometry
    outlet_index: int
    steady_coefficients: Tuple[float, float]
    inductance: float
    to_coefficients: RRICoefficients
    residual_rms: float

    @property
    def standard_coefficients(self) -> RRICoefficients:
        """Steady resistances combined with the trace-fitted inductance."""
        r_linear, r_quadratic = self.steady_coefficients
        return RRICoefficients(r_linear, r_quadratic, self.inductance)


def fit_record(
    geometry: BifurcationGeometry,
    outlet_index: int,
    steady_samples: Sequence[SteadySample],
    trace: TransientTrace,
    use_steady_least_squares: bool = False,
) -> FittedRecord:
    """Run both fitting routes for one geometry-outlet pair.

    ``use_steady_least_squares`` switches the steady fit to the multi-point
    least-squares variant; the default pairs the 50% and 100% samples in the
    exact two-point solve.
    """
    if use_steady_least_squares:
        r_linear, r_quadratic = fit_steady_least_squares(steady_samples)
    else:
        by_fraction = {s.inlet_fraction: s for s in steady_samples}
        try:
            s50, s100 = by_fraction[0.5], by_fraction[1.0]
        except KeyError as exc:
            raise DegenerateDataError(
                "two-point steady fit needs the 50% and 100% operating points"
            ) from exc
        r_linear, r_quadratic = fit_steady(s50, s100)
    inductance = fit_inductance(trace, r_linear, r_quadratic)
    to_coefficients, residual_rms = fit_transient_optimized(trace)
    return FittedRecord(
        geometry=geometry,
        outlet_index=outlet_index,
        steady_coefficients=(r_linear, r_quadratic),
        inductance=inductance,
        to_coefficients=to_coefficients,
        residual_rms=residual_rms,
    )
