"""Plant models for a series hybrid electric powertrain.

Longitudinal dynamics of the chassis, the engine operating line with its
affine fuel model, and an internal-resistance battery. Everything here is
a pure function of its arguments; the vectorised cores accept numpy arrays
so the controller can sweep whole grids of candidate controls through the
same arithmetic the scalar plant step uses.

Sign conventions: traction force and wheel power are positive when driving,
negative when braking; battery power and current are positive on discharge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, DomainError, RangeError, ValidationError

GRAVITY = 9.81  # m/s^2


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


@dataclass(frozen=True)
class VehicleParams:
    """Chassis and driveline constants for the longitudinal model.

    ``drive_force`` passed to the dynamics is the net traction force at the
    wheel in newtons; driveline efficiency and tire radius are kept for
    reporting but are already absorbed into that force.
    """

    mass: float = 1405.0              # kg
    driveline_efficiency: float = 0.96
    tire_radius: float = 0.3050       # m
    aero_coeff: float = 0.5063        # kg/m, drag force = aero_coeff * v^2
    rolling_resistance: float = 0.01
    gravity: float = GRAVITY          # m/s^2
    grade: float = 0.0                # rad, road slope
    force_min: float = -3000.0        # N
    force_max: float = 3000.0         # N
    v_max: float = 40.0               # m/s

    def __post_init__(self) -> None:
        _require(self.mass > 0, "mass must be positive")
        _require(0 < self.driveline_efficiency <= 1, "driveline_efficiency must be in (0, 1]")
        _require(self.aero_coeff >= 0, "aero_coeff must be non-negative")
        _require(self.rolling_resistance >= 0, "rolling_resistance must be non-negative")
        _require(self.force_min < 0 < self.force_max, "force bounds must straddle zero")
        _require(self.v_max > 0, "v_max must be positive")


@dataclass(frozen=True)
class VehicleState:
    """Longitudinal position [m] and velocity [m/s]."""

    position: float = 0.0
    velocity: float = 0.0


@dataclass(frozen=True)
class BatteryParams:
    """Internal-resistance battery model constants.

    Capacity is stored in coulombs; ``from_amp_hours`` converts once from
    the Ah rating so the SOC update can work directly in seconds.
    """

    open_circuit_voltage: float = 220.64   # V
    resistance: float = 0.3757             # ohm
    capacity_coulomb: float = 84240.0      # C (23.4 Ah)
    soc_min: float = 0.3
    soc_max: float = 0.8
    current_min: float = -90.0             # A (charge)
    current_max: float = 90.0              # A (discharge)

    def __post_init__(self) -> None:
        _require(self.open_circuit_voltage > 0, "open_circuit_voltage must be positive")
        _require(self.resistance > 0, "resistance must be positive")
        _require(self.capacity_coulomb > 0, "capacity_coulomb must be positive")
        _require(0 <= self.soc_min < self.soc_max <= 1, "SOC limits must satisfy 0 <= min < max <= 1")
        _require(self.current_min < 0 < self.current_max, "current bounds must straddle zero")
        _require(math.isfinite(self.max_discharge_power) and self.max_discharge_power > 0,
                 "discharge power bound must be finite and positive")

    @classmethod
    def from_amp_hours(cls, capacity_ah: float, **kwargs) -> "BatteryParams":
        return cls(capacity_coulomb=capacity_ah * 3600.0, **kwargs)

    @property
    def max_discharge_power(self) -> float:
        """Largest terminal power the cell can source, V_oc^2 / (4 R)."""
        return self.open_circuit_voltage**2 / (4.0 * self.resistance)

    @property
    def domain_margin(self) -> float:
        """Safety margin keeping the current square root strictly real."""
        return 1e-9 * self.max_discharge_power

    def power_bounds(self) -> tuple[float, float]:
        """Battery power box implied by the current limits and the domain."""
        lo = battery_power_from_current(self.current_min, self)
        hi = min(battery_power_from_current(self.current_max, self),
                 self.max_discharge_power - self.domain_margin)
        return lo, hi


@dataclass(frozen=True)
class EngineParams:
    """Engine envelope, motor efficiency and affine fuel coefficients."""

    speed_min: float = 0.0        # rad/s
    speed_max: float = 105.0      # rad/s
    torque_min: float = 0.0       # N*m
    torque_max: float = 112.0     # N*m
    motor_efficiency: float = 0.96
    fuel_alpha: float = 0.0614    # g/(s*kW)
    fuel_beta: float = 0.0583     # g/s, idle burn

    def __post_init__(self) -> None:
        _require(0 <= self.speed_min < self.speed_max, "engine speed limits invalid")
        _require(0 <= self.torque_min < self.torque_max, "engine torque limits invalid")
        _require(0 < self.motor_efficiency <= 1, "motor_efficiency must be in (0, 1]")
        _require(self.fuel_alpha > 0, "fuel_alpha must be positive")
        _require(self.fuel_beta >= 0, "fuel_beta must be non-negative")

    @property
    def power_max(self) -> float:
        """Corner power of the envelope [W]."""
        return self.speed_max * self.torque_max


@dataclass(frozen=True)
class ShevParams:
    """Bundle of the three physical parameter sets for one vehicle."""

    vehicle: VehicleParams = field(default_factory=VehicleParams)
    battery: BatteryParams = field(default_factory=BatteryParams)
    engine: EngineParams = field(default_factory=EngineParams)


@dataclass(frozen=True)
class OperatingPoint:
    """Engine speed [rad/s], torque [N*m] and power [W] on the operating line."""

    engine_speed: float
    engine_torque: float
    engine_power: float


@dataclass(frozen=True)
class FuelSample:
    """One (engine power [W], fuel mass rate [g/s]) measurement."""

    engine_power: float
    fuel_rate: float


@dataclass(frozen=True)
class FuelFit:
    """Affine fuel model recovered by least squares."""

    alpha: float      # g/(s*kW)
    beta: float       # g/s
    r_squared: float


# ---------------------------------------------------------------------------
# vectorised cores — shared verbatim by the scalar plant and the batched
# controller rollout so both paths produce bit-identical trajectories
# ---------------------------------------------------------------------------

def accel_core(velocity, drive_force, p: VehicleParams):
    """Net longitudinal acceleration [m/s^2]; broadcasts over arrays.

    At standstill the rolling/aero resistances are dropped and only a net
    forward force can act, so the model never pushes the vehicle backwards.
    """
    v = np.asarray(velocity, dtype=float)
    f = np.asarray(drive_force, dtype=float)
    grade_force = p.mass * p.gravity * math.sin(p.grade)
    rolling = p.mass * p.gravity * p.rolling_resistance * math.cos(p.grade)
    moving = (f - p.aero_coeff * v * v - rolling - grade_force) / p.mass
    standstill = np.maximum(f - grade_force, 0.0) / p.mass
    return np.where(v > 0.0, moving, standstill)


def speed_step_core(velocity, drive_force, dt: float, p: VehicleParams):
    """Forward-Euler velocity update clamped to [0, v_max]."""
    raw = np.asarray(velocity, dtype=float) + dt * accel_core(velocity, drive_force, p)
    return np.clip(raw, 0.0, p.v_max)


def battery_current_core(battery_power, b: BatteryParams):
    """Terminal current [A] from terminal power [W]; no domain check."""
    p = np.asarray(battery_power, dtype=float)
    disc = b.open_circuit_voltage**2 - 4.0 * b.resistance * p
    return (b.open_circuit_voltage - np.sqrt(disc)) / (2.0 * b.resistance)


def battery_current_slope(battery_power, b: BatteryParams):
    """d(current)/d(power) [A/W] on the valid domain."""
    p = np.asarray(battery_power, dtype=float)
    disc = b.open_circuit_voltage**2 - 4.0 * b.resistance * p
    return 1.0 / np.sqrt(disc)


def fuel_rate_core(engine_power, eng: EngineParams):
    """Affine fuel rate [g/s]; alpha applies per kW of engine power."""
    return eng.fuel_alpha * (np.asarray(engine_power, dtype=float) / 1000.0) + eng.fuel_beta


# ---------------------------------------------------------------------------
# scalar operations with input validation
# ---------------------------------------------------------------------------

def net_acceleration(state: VehicleState, drive_force: float, p: VehicleParams) -> float:
    """Net acceleration [m/s^2] for the current state and traction force."""
    if not (math.isfinite(state.velocity) and math.isfinite(drive_force)):
        raise ValidationError("non-finite velocity or drive force")
    if not p.force_min <= drive_force <= p.force_max:
        raise ValidationError(
            f"drive force {drive_force} outside [{p.force_min}, {p.force_max}]")
    return float(accel_core(state.velocity, drive_force, p))


def step_longitudinal(state: VehicleState, drive_force: float, dt: float,
                      p: VehicleParams) -> VehicleState:
    """One Euler step of the longitudinal dynamics.

    Position integrates the pre-step velocity; velocity is clamped to
    [0, v_max] after the update.
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    net_acceleration(state, drive_force, p)  # input validation
    return VehicleState(
        position=state.position + dt * state.velocity,
        velocity=float(speed_step_core(state.velocity, drive_force, dt, p)),
    )


def wheel_power(drive_force, velocity):
    """Power at the wheel [W], signed (negative while braking)."""
    out = np.asarray(drive_force, dtype=float) * np.asarray(velocity, dtype=float)
    return float(out) if out.ndim == 0 else out


def engine_power_from_split(wheel_request, battery_power, eng: EngineParams):
    """Engine power [W] that balances the requested power with the battery.

    Callers are responsible for checking the engine envelope on the result.
    """
    out = np.asarray(wheel_request, dtype=float) / eng.motor_efficiency \
        - np.asarray(battery_power, dtype=float)
    return float(out) if out.ndim == 0 else out


def battery_current(battery_power, b: BatteryParams):
    """Terminal current [A]; raises DomainError beyond the discharge limit."""
    p = np.asarray(battery_power, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValidationError("non-finite battery power")
    if np.any(p > b.max_discharge_power - b.domain_margin):
        raise DomainError(
            f"battery power {float(np.max(p)):.1f} W exceeds the discharge "
            f"capability {b.max_discharge_power:.1f} W")
    out = battery_current_core(p, b)
    return float(out) if out.ndim == 0 else out


def battery_power_from_current(current, b: BatteryParams):
    """Terminal power [W] delivered at a given current [A]."""
    i = np.asarray(current, dtype=float)
    out = i * (b.open_circuit_voltage - i * b.resistance)
    return float(out) if out.ndim == 0 else out


def step_soc(soc: float, battery_power: float, dt: float, b: BatteryParams) -> float:
    """One Euler step of the state of charge; no clamping at the SOC limits."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    current = battery_current(battery_power, b)
    return soc - current * dt / b.capacity_coulomb


def fuel_rate(engine_power, eng: EngineParams):
    """Fuel mass rate [g/s] on the operating line; engine power must be >= 0."""
    p = np.asarray(engine_power, dtype=float)
    if np.any(p < 0):
        raise ValidationError("engine power must be non-negative")
    out = fuel_rate_core(p, eng)
    return float(out) if out.ndim == 0 else out


def fuel_increment(engine_power: float, dt: float, eng: EngineParams) -> float:
    """Fuel mass [g] burned over one stage of length dt."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    return dt * fuel_rate(engine_power, eng)


def engine_operating_point(engine_power: float, eng: EngineParams) -> OperatingPoint:
    """Resolve engine power to the (speed, torque) pair on the operating line.

    The line runs at maximum torque, so speed scales linearly with power;
    zero power parks the engine at (0, 0).
    """
    if engine_power < 0 or engine_power > eng.power_max:
        raise RangeError(
            f"engine power {engine_power:.1f} W outside [0, {eng.power_max:.1f}] W")
    if engine_power == 0:
        return OperatingPoint(0.0, 0.0, 0.0)
    speed = engine_power / eng.torque_max
    return OperatingPoint(speed, eng.torque_max, engine_power)


def fit_fuel_coefficients(samples: list[FuelSample]) -> FuelFit:
    """Ordinary least squares of fuel rate [g/s] on engine power [kW]."""
    if len(samples) < 2:
        raise DegenerateDataError("need at least two fuel samples")
    power_kw = np.array([s.engine_power for s in samples], dtype=float) / 1000.0
    rate = np.array([s.fuel_rate for s in samples], dtype=float)
    if np.ptp(power_kw) == 0:
        raise DegenerateDataError("all samples share one engine power; slope is undetermined")
    pbar = power_kw.mean()
    rbar = rate.mean()
    sxx = float(np.sum((power_kw - pbar) ** 2))
    sxy = float(np.sum((power_kw - pbar) * (rate - rbar)))
    alpha = sxy / sxx
    beta = rbar - alpha * pbar
    residual = rate - (alpha * power_kw + beta)
    total = float(np.sum((rate - rbar) ** 2))
    r_squared = 1.0 if total == 0 else 1.0 - float(np.sum(residual**2)) / total
    return FuelFit(alpha=alpha, beta=beta, r_squared=r_squared)
