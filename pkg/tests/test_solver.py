import math

import numpy as np
import pytest

from junctionrom.errors import ConfigurationError, SolverError
from junctionrom.geometry import to_mmhg
from junctionrom.junctions import RRICoefficients, RRILaw, StaticContinuityLaw
from junctionrom.solver import (
    BoundaryCondition,
    cycle_integral,
    residual_and_jacobian,
    solve_steady,
    solve_transient,
    step_count,
)


def rri_laws(c1, c2):
    return (RRILaw(RRICoefficients(*c1)), RRILaw(RRICoefficients(*c2)))


BCS = (BoundaryCondition(100.0), BoundaryCondition(100.0))


class TestSteady:
    def test_zero_inlet_zero_distal(self):
        laws = rri_laws((-20.0, -1.0, -5.0), (-30.0, -2.0, -6.0))
        state = solve_steady(laws, BCS, 0.0)
        assert state.p_inlet == 0.0
        assert state.q_outlet_1 == 0.0
        assert state.q_outlet_2 == 0.0

    def test_linear_laws_match_current_divider(self):
        # dp_k = r_k * Q with resistances 100/200 and junction slopes -20/-40:
        # Q_k = P / (R_k - r_k), so P * (1/120 + 1/240) = 10 -> P = 800.
        laws = rri_laws((-20.0, 0.0, 0.0), (-40.0, 0.0, 0.0))
        bcs = (BoundaryCondition(100.0), BoundaryCondition(200.0))
        state = solve_steady(laws, bcs, 10.0)
        assert state.p_inlet == pytest.approx(800.0, rel=1e-12)
        assert state.q_outlet_1 == pytest.approx(800.0 / 120.0, rel=1e-12)
        assert state.q_outlet_2 == pytest.approx(800.0 / 240.0, rel=1e-12)
        assert state.p_outlet_1 == pytest.approx(100.0 * state.q_outlet_1, rel=1e-14)

    def test_symmetric_split(self):
        laws = rri_laws((-25.0, -1.5, -8.0), (-25.0, -1.5, -8.0))
        state = solve_steady(laws, BCS, 30.0)
        assert state.q_outlet_1 == pytest.approx(15.0, rel=1e-12)
        assert state.q_outlet_2 == pytest.approx(15.0, rel=1e-12)

    def test_mass_conservation(self):
        laws = rri_laws((-25.0, -1.5, 0.0), (-55.0, -3.5, 0.0))
        for q_in in (0.5, 5.0, 50.0):
            state = solve_steady(laws, BCS, q_in, initial_split=(0.3, 0.7))
            assert abs(state.q_outlet_1 + state.q_outlet_2 - q_in) <= 1e-12 * max(
                1.0, q_in
            )

    def test_distal_pressure_offsets(self):
        laws = rri_laws((-10.0, 0.0, 0.0), (-10.0, 0.0, 0.0))
        bcs = (BoundaryCondition(100.0, 500.0), BoundaryCondition(100.0, 500.0))
        state = solve_steady(laws, bcs, 20.0)
        assert state.p_outlet_1 == pytest.approx(100.0 * state.q_outlet_1 + 500.0)
        assert state.q_outlet_1 == pytest.approx(10.0, rel=1e-12)

    def test_nonconvergence_diagnostics(self):
        # Strong quadratic pressure recovery on outlet 1 caps its branch curve
        # below what outlet 2 demands: the network has no root at this inlet
        # flow against a 100-unit outlet resistance.
        laws = rri_laws((-31.7, 2.6, 0.0), (-21.9, 0.61, 0.0))
        with pytest.raises(SolverError) as excinfo:
            solve_steady(laws, BCS, 58.4)
        assert excinfo.value.residual_norm is not None
        assert excinfo.value.iterate is not None

    def test_quadratic_local_convergence(self):
        laws = rri_laws((-45.0, -2.6, 0.0), (-22.0, -0.6, 0.0))
        _, info = solve_steady(laws, BCS, 40.0, return_info=True)
        norms = info.residual_norms
        # Once inside the basin, each step at least squares the residual
        # (up to a constant) until floating-point floor.
        small = [n for n in norms if n < 1e-4 * max(1.0, norms[0])]
        for before, after in zip(small, small[1:]):
            if before > 1e-13 * norms[0]:
                assert after <= 50.0 * before**2 / max(1.0, norms[0]) + 1e-9


class TestJacobian:
    def test_matches_finite_differences_at_random_states(self):
        rng = np.random.default_rng(11)
        laws = rri_laws((-45.0, -2.6, -30.0), (-22.0, -0.6, -50.0))
        bcs = (BoundaryCondition(120.0, 10.0), BoundaryCondition(80.0, -5.0))
        for _ in range(100):
            x = [rng.uniform(-1e3, 1e3), rng.uniform(-40, 40), rng.uniform(-40, 40)]
            q_prev = (rng.uniform(-40, 40), rng.uniform(-40, 40))
            dt = 1e-3
            residual, jacobian = residual_and_jacobian(
                x, laws, bcs, 30.0, q_prev, dt
            )
            for col in range(3):
                h = 1e-6 * max(1.0, abs(x[col]))
                x_hi = list(x)
                x_lo = list(x)
                x_hi[col] += h
                x_lo[col] -= h
                r_hi, _ = residual_and_jacobian(x_hi, laws, bcs, 30.0, q_prev, dt)
                r_lo, _ = residual_and_jacobian(x_lo, laws, bcs, 30.0, q_prev, dt)
                for row in range(3):
                    fd = (r_hi[row] - r_lo[row]) / (2 * h)
                    # Compare against the row scale: difference error in the
                    # large entries bounds what the finite difference of any
                    # entry of that row can resolve.
                    row_scale = max(max(abs(v) for v in jacobian[row]), 1.0)
                    assert abs(jacobian[row][col] - fd) <= 1e-6 * row_scale


class TestTransient:
    def test_zero_waveform(self):
        laws = rri_laws((-20.0, -1.0, -5.0), (-30.0, -2.0, -6.0))
        series = solve_transient(laws, BCS, lambda t: 0.0, duration=0.05, dt=0.001)
        assert np.all(series.q_outlet_1 == 0.0)
        assert np.all(series.p_inlet == 0.0)

    def test_step_count_and_times(self):
        laws = rri_laws((-20.0, -1.0, -5.0), (-30.0, -2.0, -6.0))
        series = solve_transient(laws, BCS, lambda t: 1.0, duration=1.0, dt=0.001)
        assert len(series.times) == 1001
        assert series.times[0] == 0.0
        assert series.times[-1] == pytest.approx(1.0, rel=1e-12)

    def test_duration_must_be_multiple_of_dt(self):
        with pytest.raises(ConfigurationError):
            step_count(1.0005, 0.001)

    def test_constant_waveform_is_stationary(self):
        laws = rri_laws((-45.0, -2.6, -30.0), (-22.0, -0.6, -50.0))
        steady = solve_steady(laws, BCS, 25.0)
        series = solve_transient(laws, BCS, lambda t: 25.0, duration=0.05, dt=0.001)
        assert series.q_outlet_1[-1] == pytest.approx(steady.q_outlet_1, abs=1e-8)
        assert series.p_inlet[-1] == pytest.approx(steady.p_inlet, abs=1e-8)

    def test_mass_conservation_every_step(self):
        laws = rri_laws((-45.0, -2.6, -30.0), (-22.0, -0.6, -50.0))
        waveform = lambda t: 40.0 * math.sin(math.pi * t / 0.2) ** 2
        series = solve_transient(laws, BCS, waveform, duration=0.2, dt=0.001)
        q_in = np.array([waveform(t) for t in series.times])
        gap = np.abs(series.q_outlet_1 + series.q_outlet_2 - q_in)
        assert np.all(gap <= 1e-12 * np.maximum(1.0, q_in))

    def test_step_failure_names_step(self):
        class BlowUpLaw:
            def dp(self, q, q_dot, q_in):
                return math.inf if q_in > 0.5 else 0.0

            def dp_dq(self, q, q_dot, q_in):
                return 0.0

            def dp_dqdot(self, q, q_dot, q_in):
                return 0.0

        with pytest.raises(SolverError) as excinfo:
            solve_transient(
                (BlowUpLaw(), BlowUpLaw()),
                BCS,
                lambda t: t * 100.0,
                duration=0.05,
                dt=0.001,
            )
        assert excinfo.value.step_index is not None
        assert "step" in str(excinfo.value)

    def test_csv_round_trip(self, tmp_path):
        laws = rri_laws((-20.0, -1.0, -5.0), (-30.0, -2.0, -6.0))
        series = solve_transient(laws, BCS, lambda t: 10.0, duration=0.01, dt=0.001)
        path = tmp_path / "series.csv"
        series.to_csv(path)
        rows = path.read_text().strip().splitlines()
        assert rows[0].split(",")[:3] == ["t", "p_inlet", "q_outlet_1"]
        assert len(rows) == 1 + len(series.times)
        first = rows[1].split(",")
        assert float(first[6]) == pytest.approx(to_mmhg(series.p_inlet[0]), rel=1e-12)


class TestHysteresis:
    def waveform(self, t):
        return 30.0 * math.sin(math.pi * t / 0.2) ** 2

    def loop(self, inductance):
        laws = rri_laws((-45.0, -2.6, inductance), (-22.0, -0.6, inductance))
        series = solve_transient(laws, BCS, self.waveform, duration=0.2, dt=0.0005)
        q = series.q_outlet_1
        dp = series.p_outlet_1 - series.p_inlet
        return q, dp

    def test_no_inductance_no_loop_area(self):
        q, dp = self.loop(0.0)
        area = cycle_integral(q, dp)
        scale = (q.max() - q.min()) * (dp.max() - dp.min())
        assert abs(area) <= 1e-8 * max(scale, 1.0)

    def test_inductance_creates_signed_loop(self):
        q, dp = self.loop(-30.0)
        area = cycle_integral(q, dp)
        scale = (q.max() - q.min()) * (dp.max() - dp.min())
        assert area < 0  # sign follows the (negative) inductance
        assert abs(area) > 1e-3 * scale

    def test_static_closure_keeps_pressures_equal(self):
        laws = (StaticContinuityLaw(), StaticContinuityLaw())
        series = solve_transient(laws, BCS, self.waveform, duration=0.1, dt=0.001)
        np.testing.assert_allclose(series.p_outlet_1, series.p_inlet, atol=1e-9)
        np.testing.assert_allclose(series.p_outlet_2, series.p_inlet, atol=1e-9)

    def test_interchangeable_closures(self):
        # Any law exposing value + derivatives drops into the same solve.
        from junctionrom.geometry import BifurcationGeometry, FluidProperties, swap_outlets
        from junctionrom.junctions import make_law

        geom = BifurcationGeometry(
            r_inlet=0.5, r_outlet_1=0.35, r_outlet_2=0.4,
            theta_1=0.3, theta_2=0.35,
            l_outlet_1=10.5, l_outlet_2=10.5, l_inlet=10.5,
        )
        fluid = FluidProperties()
        bcs = (BoundaryCondition(2500.0), BoundaryCondition(2500.0))
        for kind in ("static", "total", "unified0d"):
            laws = (
                make_law(kind, geom=geom, fluid=fluid),
                make_law(kind, geom=swap_outlets(geom), fluid=fluid),
            )
            state = solve_steady(laws, bcs, 30.0)
            assert abs(state.q_outlet_1 + state.q_outlet_2 - 30.0) <= 1e-12 * 30.0
