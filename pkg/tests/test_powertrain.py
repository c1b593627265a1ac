import math

import numpy as np
import pytest

from shev_mompc.errors import DegenerateDataError, DomainError, RangeError, ValidationError
from shev_mompc.powertrain import (
    BatteryParams,
    EngineParams,
    FuelSample,
    VehicleParams,
    VehicleState,
    battery_current,
    battery_power_from_current,
    engine_operating_point,
    engine_power_from_split,
    fit_fuel_coefficients,
    fuel_increment,
    fuel_rate,
    net_acceleration,
    step_longitudinal,
    step_soc,
    wheel_power,
)

VEH = VehicleParams()
BAT = BatteryParams()
ENG = EngineParams()


class TestNetAcceleration:
    def test_coastdown_at_10mps(self):
        # direct evaluation of the longitudinal balance with the default
        # constants: (0 - C_A v^2 - m g f) / m
        expected = -(0.5063 * 100.0 + 1405.0 * 9.81 * 0.01) / 1405.0
        got = net_acceleration(VehicleState(0.0, 10.0), 0.0, VEH)
        assert got == pytest.approx(expected, abs=1e-15)
        assert got == pytest.approx(-0.13413, abs=1e-5)

    def test_standstill_is_clamped(self):
        assert net_acceleration(VehicleState(0.0, 0.0), 0.0, VEH) == 0.0
        # small reverse force cannot pull the vehicle backwards
        assert net_acceleration(VehicleState(0.0, 0.0), -500.0, VEH) == 0.0

    def test_force_balance_at_25mps(self):
        balance = 0.5063 * 25.0**2 + 1405.0 * 9.81 * 0.01  # 454.27 N
        assert net_acceleration(VehicleState(0.0, 25.0), balance, VEH) == pytest.approx(0.0, abs=1e-12)
        assert net_acceleration(VehicleState(0.0, 25.0), 454.2, VEH) == pytest.approx(0.0, abs=1e-4)

    def test_rejects_nonfinite_and_out_of_box(self):
        with pytest.raises(ValidationError):
            net_acceleration(VehicleState(0.0, float("nan")), 0.0, VEH)
        with pytest.raises(ValidationError):
            net_acceleration(VehicleState(0.0, 5.0), 5000.0, VEH)


class TestStepLongitudinal:
    def test_euler_step_uses_prestep_velocity(self):
        accel = -(0.5063 * 100.0 + 1405.0 * 9.81 * 0.01) / 1405.0
        nxt = step_longitudinal(VehicleState(0.0, 10.0), 0.0, 1.0, VEH)
        assert nxt.position == pytest.approx(10.0)
        assert nxt.velocity == pytest.approx(10.0 + accel)

    def test_rest_stays_at_rest(self):
        nxt = step_longitudinal(VehicleState(5.0, 0.0), 0.0, 1.0, VEH)
        assert nxt.position == 5.0
        assert nxt.velocity == 0.0

    def test_clamps_at_vmax(self):
        nxt = step_longitudinal(VehicleState(0.0, VEH.v_max - 0.01), VEH.force_max, 1.0, VEH)
        assert nxt.velocity == VEH.v_max

    def test_velocity_always_in_bounds(self):
        rng = np.random.default_rng(7)
        state = VehicleState(0.0, 3.0)
        for force in rng.uniform(VEH.force_min, VEH.force_max, size=200):
            state = step_longitudinal(state, float(force), 1.0, VEH)
            assert 0.0 <= state.velocity <= VEH.v_max

    def test_rejects_bad_dt(self):
        with pytest.raises(ValidationError):
            step_longitudinal(VehicleState(0.0, 1.0), 0.0, 0.0, VEH)


class TestWheelPowerAndSplit:
    def test_wheel_power_values(self):
        assert wheel_power(0.0, 20.0) == 0.0
        assert wheel_power(454.2, 25.0) == pytest.approx(11355.0)
        assert wheel_power(-500.0, 10.0) == pytest.approx(-5000.0)

    def test_split_examples(self):
        assert engine_power_from_split(11355.0, 5000.0, ENG) == pytest.approx(11355.0 / 0.96 - 5000.0)
        assert engine_power_from_split(0.0, 0.0, ENG) == 0.0
        assert engine_power_from_split(9600.0, 10000.0, ENG) == pytest.approx(0.0)

    def test_power_balance_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            p_r = rng.uniform(-2e4, 3e4)
            p_b = rng.uniform(-2e4, 2e4)
            p_e = engine_power_from_split(p_r, p_b, ENG)
            assert ENG.motor_efficiency * (p_e + p_b) == pytest.approx(p_r, rel=1e-9, abs=1e-9)


class TestBattery:
    def test_zero_power_zero_current(self):
        assert battery_current(0.0, BAT) == 0.0
        assert battery_power_from_current(0.0, BAT) == 0.0

    def test_discharge_closed_form(self):
        current = battery_current(10000.0, BAT)
        assert current == pytest.approx(49.494, abs=1e-3)
        # back-substitution oracle: I (V_oc - I R) must reproduce the power
        back = current * (BAT.open_circuit_voltage - current * BAT.resistance)
        assert back == pytest.approx(10000.0, rel=1e-9)

    def test_charge_closed_form(self):
        current = battery_current(-10000.0, BAT)
        assert current == pytest.approx(-42.278, abs=1e-3)
        back = current * (BAT.open_circuit_voltage - current * BAT.resistance)
        assert back == pytest.approx(-10000.0, rel=1e-9)

    def test_power_from_current_at_limits(self):
        assert battery_power_from_current(90.0, BAT) == pytest.approx(90.0 * (220.64 - 90.0 * 0.3757))
        assert battery_power_from_current(-90.0, BAT) == pytest.approx(-90.0 * (220.64 + 90.0 * 0.3757))

    def test_round_trip_on_current_range(self):
        currents = np.linspace(BAT.current_min, BAT.current_max, 1000)
        back = battery_current(battery_power_from_current(currents, BAT), BAT)
        assert np.max(np.abs(back - currents)) <= 1e-9

    def test_current_monotone_in_power(self):
        powers = np.linspace(-30000.0, BAT.max_discharge_power * 0.999, 500)
        currents = battery_current(powers, BAT)
        assert np.all(np.diff(currents) > 0)

    def test_domain_error_beyond_discharge_limit(self):
        with pytest.raises(DomainError):
            battery_current(BAT.max_discharge_power * 1.01, BAT)

    def test_sign_convention(self):
        assert battery_current(5000.0, BAT) > 0
        assert battery_current(-5000.0, BAT) < 0


class TestSoc:
    def test_no_current_no_change(self):
        assert step_soc(0.66, 0.0, 1.0, BAT) == 0.66

    def test_discharge_drops_soc(self):
        p = battery_power_from_current(84.24, BAT)
        assert step_soc(0.66, p, 1.0, BAT) == pytest.approx(0.66 - 84.24 / 84240.0, abs=1e-12)

    def test_charge_raises_soc(self):
        p = battery_power_from_current(-84.24, BAT)
        assert step_soc(0.5, p, 1.0, BAT) == pytest.approx(0.501, abs=1e-12)

    def test_telescoping(self):
        rng = np.random.default_rng(3)
        powers = rng.uniform(-8000.0, 8000.0, size=400)
        soc = 0.6
        for p in powers:
            soc = step_soc(soc, float(p), 1.0, BAT)
        ledger = 0.6 - np.sum(battery_current(powers, BAT)) / BAT.capacity_coulomb
        assert soc == pytest.approx(ledger, abs=1e-12)


class TestFuel:
    def test_idle_burn(self):
        assert fuel_rate(0.0, ENG) == pytest.approx(0.0583, abs=1e-15)

    def test_affine_at_10kw(self):
        assert fuel_rate(10000.0, ENG) == pytest.approx(0.6723, abs=1e-12)

    def test_affine_at_envelope_corner(self):
        # 0.0614 g/(s kW) * 11.76 kW + 0.0583 g/s
        assert fuel_rate(ENG.power_max, ENG) == pytest.approx(0.0614 * 11.76 + 0.0583, abs=1e-12)

    def test_rejects_negative_power(self):
        with pytest.raises(ValidationError):
            fuel_rate(-1.0, ENG)

    def test_strictly_increasing(self):
        rates = fuel_rate(np.linspace(0.0, ENG.power_max, 200), ENG)
        assert np.all(np.diff(rates) > 0)

    def test_increment(self):
        assert fuel_increment(0.0, 1.0, ENG) == pytest.approx(0.0583)
        assert fuel_increment(10000.0, 2.0, ENG) == pytest.approx(1.3446)
        with pytest.raises(ValidationError):
            fuel_increment(0.0, 0.0, ENG)


class TestOperatingLine:
    def test_engine_off(self):
        op = engine_operating_point(0.0, ENG)
        assert (op.engine_speed, op.engine_torque, op.engine_power) == (0.0, 0.0, 0.0)

    def test_envelope_corner(self):
        op = engine_operating_point(11760.0, ENG)
        assert op.engine_speed == pytest.approx(105.0)
        assert op.engine_torque == pytest.approx(112.0)

    def test_half_power(self):
        op = engine_operating_point(5880.0, ENG)
        assert op.engine_speed == pytest.approx(52.5)
        assert op.engine_torque == pytest.approx(112.0)

    def test_consistency_over_admissible_range(self):
        for p in np.linspace(1.0, ENG.power_max, 50):
            op = engine_operating_point(float(p), ENG)
            assert op.engine_speed * op.engine_torque == pytest.approx(p, rel=1e-9)
            assert ENG.speed_min <= op.engine_speed <= ENG.speed_max
            assert ENG.torque_min <= op.engine_torque <= ENG.torque_max

    def test_range_error(self):
        with pytest.raises(RangeError):
            engine_operating_point(ENG.power_max + 1.0, ENG)
        with pytest.raises(RangeError):
            engine_operating_point(-1.0, ENG)


class TestFuelFit:
    def test_noiseless_recovery(self):
        powers = np.linspace(0.0, 11760.0, 25)
        samples = [FuelSample(p, 0.0614 * p / 1000.0 + 0.0583) for p in powers]
        fit = fit_fuel_coefficients(samples)
        assert fit.alpha == pytest.approx(0.0614, abs=1e-9)
        assert fit.beta == pytest.approx(0.0583, abs=1e-9)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_two_point_line(self):
        fit = fit_fuel_coefficients([FuelSample(0.0, 0.0583), FuelSample(10000.0, 0.6723)])
        assert fit.alpha == pytest.approx(0.0614, abs=1e-12)
        assert fit.beta == pytest.approx(0.0583, abs=1e-12)

    def test_degenerate_data(self):
        with pytest.raises(DegenerateDataError):
            fit_fuel_coefficients([FuelSample(5000.0, 0.3), FuelSample(5000.0, 0.4)])
        with pytest.raises(DegenerateDataError):
            fit_fuel_coefficients([FuelSample(5000.0, 0.3)])


class TestParamValidation:
    def test_vehicle_invariants(self):
        with pytest.raises(ValidationError):
            VehicleParams(mass=-1.0)
        with pytest.raises(ValidationError):
            VehicleParams(force_min=100.0)

    def test_battery_invariants(self):
        with pytest.raises(ValidationError):
            BatteryParams(soc_min=0.9, soc_max=0.8)
        with pytest.raises(ValidationError):
            BatteryParams(resistance=0.0)
        assert BatteryParams.from_amp_hours(23.4).capacity_coulomb == pytest.approx(84240.0)

    def test_engine_invariants(self):
        with pytest.raises(ValidationError):
            EngineParams(motor_efficiency=0.0)
        assert EngineParams().power_max == pytest.approx(11760.0)
