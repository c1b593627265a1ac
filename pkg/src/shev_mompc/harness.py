"""Closed-loop simulation harness: solve, apply the first control, advance.

The plant uses exactly the same step arithmetic as the controller's
predictor (no model mismatch), so a replay of the logged controls must
reproduce every logged state bit for bit. Trace CSVs are written with
shortest round-trip float formatting, which makes reruns byte-identical
and the CSV a lossless serialisation of the log.

Power accounting at each applied step: the commanded traction force and
the realised velocity define the wheel power; the engine covers the
electrical balance but never runs backwards, so whatever braking power
the battery cannot absorb is attributed to the friction brake and the
logged powertrain power ``P_r`` stays on the engine+battery balance.
"""
from __future__ import annotations

import csv
import io
import logging
import os
import tempfile
from dataclasses import dataclass, field, fields

import numpy as np

from .controller import MompcConfig, OcpSolution, solve_step
from .cycles import DriveCycle, ReferenceTrajectory, is_on_grid, preview, reference_trajectory
from .errors import DomainError, SimulationAbort, ValidationError
from .powertrain import (
    BatteryParams,
    ShevParams,
    VehicleState,
    battery_current,
    fuel_rate,
    step_longitudinal,
)

logger = logging.getLogger(__name__)

TRACE_COLUMNS = [
    "t", "s", "s_ref", "v", "v_ref", "F_d", "P_r", "P_b", "P_e", "I_b",
    "SOC", "mdot_f", "cost_total", "J_m", "J_f", "J_b", "solver_iters",
    "kkt_residual", "fallback_flag", "friction_brake_W",
]
_INT_COLUMNS = {"solver_iters", "fallback_flag"}


@dataclass
class SimLog:
    """Columnar per-step record of one closed-loop run."""

    columns: dict[str, np.ndarray]
    dt: float

    def __len__(self) -> int:
        return len(self.columns["t"])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def to_csv(self, path) -> None:
        write_atomic(path, self.to_csv_text())

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for i in range(len(self)):
            row = []
            for name in TRACE_COLUMNS:
                value = self.columns[name][i]
                row.append(str(int(value)) if name in _INT_COLUMNS else repr(float(value)))
            writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path) -> "SimLog":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != TRACE_COLUMNS:
                raise ValidationError(f"unexpected trace header: {header}")
            rows = [[float(cell) for cell in row] for row in reader]
        data = np.array(rows, dtype=float).reshape(len(rows), len(TRACE_COLUMNS))
        columns = {name: data[:, j].copy() for j, name in enumerate(TRACE_COLUMNS)}
        t = columns["t"]
        dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
        return cls(columns=columns, dt=dt)


@dataclass
class SimMetrics:
    """Aggregates derived exactly from a SimLog."""

    total_fuel_g: float
    velocity_rmse: float
    position_rmse: float
    soc_final: float
    soc_min: float
    soc_max: float
    current_min: float
    current_max: float
    violation_count: int
    mean_solve_iterations: float
    fallback_count: int

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def write_atomic(path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    truncated artifact."""
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _plant_power_split(force: float, velocity: float, battery_power: float,
                       plant: ShevParams) -> tuple[float, float, float]:
    """Resolve one applied control into (P_e, P_r, friction_brake_W).

    The engine is clamped at zero: braking power beyond what the battery
    absorbs goes to the friction brake, and P_r is the powertrain's share
    of wheel power so the engine/battery balance holds identically.
    """
    eta = plant.engine.motor_efficiency
    wheel = force * velocity
    engine_raw = wheel / eta - battery_power
    engine = max(engine_raw, 0.0)
    powertrain = eta * (engine + battery_power)
    friction = max(powertrain - wheel, 0.0)
    return engine, powertrain, friction


def run_closed_loop(cycle: DriveCycle, cfg: MompcConfig, plant: ShevParams,
                    initial_state: VehicleState = VehicleState(0.0, 0.0),
                    initial_soc: float = 0.66) -> SimLog:
    """Run the receding-horizon loop over a full cycle.

    The cycle must already live on the controller grid. One record is
    logged per cycle sample; iteration is strictly sequential and fully
    deterministic.
    """
    if not is_on_grid(cycle, cfg.dt):
        raise ValidationError("cycle must be resampled to the controller dt first")
    if np.any(cycle.speeds > plant.vehicle.v_max):
        raise ValidationError("cycle exceeds the vehicle's maximum speed")
    ref = reference_trajectory(cycle, cfg.dt)
    steps = len(cycle)
    cols = {name: np.zeros(steps) for name in TRACE_COLUMNS}

    state = initial_state
    soc = float(initial_soc)
    pb_lo, pb_hi = plant.battery.power_bounds()
    warm: OcpSolution | None = None

    for k in range(steps):
        window = preview(ref, k, cfg.horizon)
        sol = solve_step(state, soc, window, cfg, plant, warm=warm)
        force = float(np.clip(sol.decision.force[0],
                              plant.vehicle.force_min, plant.vehicle.force_max))
        pb = float(np.clip(sol.decision.battery_power[0], pb_lo, pb_hi))

        engine, powertrain, friction = _plant_power_split(force, state.velocity, pb, plant)
        try:
            current = battery_current(pb, plant.battery)
        except DomainError as exc:  # unreachable: pb sits inside the hard box
            raise SimulationAbort(f"applied control left the battery domain: {exc}") from exc
        burn_rate = fuel_rate(engine, plant.engine)

        cols["t"][k] = k * cfg.dt
        cols["s"][k] = state.position
        cols["s_ref"][k] = ref.s_ref[k]
        cols["v"][k] = state.velocity
        cols["v_ref"][k] = ref.v_ref[k]
        cols["F_d"][k] = force
        cols["P_r"][k] = powertrain
        cols["P_b"][k] = pb
        cols["P_e"][k] = engine
        cols["I_b"][k] = current
        cols["SOC"][k] = soc
        cols["mdot_f"][k] = burn_rate
        cols["cost_total"][k] = sol.cost_total
        cols["J_m"][k] = sol.cost_motion
        cols["J_f"][k] = sol.cost_fuel
        cols["J_b"][k] = sol.cost_battery
        cols["solver_iters"][k] = sol.diagnostics.iterations
        cols["kkt_residual"][k] = sol.diagnostics.kkt_residual
        cols["fallback_flag"][k] = 1.0 if sol.diagnostics.fallback else 0.0
        cols["friction_brake_W"][k] = friction

        state = step_longitudinal(state, force, cfg.dt, plant.vehicle)
        soc = soc - current * cfg.dt / plant.battery.capacity_coulomb
        warm = sol
        if k % 200 == 0:
            logger.info("step %d/%d: v=%.2f m/s soc=%.4f", k, steps, state.velocity, soc)

    return SimLog(columns=cols, dt=cfg.dt)


def compute_metrics(log: SimLog, battery: BatteryParams) -> SimMetrics:
    """Summarise a log; bound violations use a 1e-6 tolerance."""
    if len(log) == 0:
        raise ValidationError("cannot summarise an empty log")
    dt = log.dt
    soc_after = log["SOC"] - log["I_b"] * dt / battery.capacity_coulomb
    soc_seen = np.concatenate([log["SOC"], soc_after[-1:]])
    tol = 1e-6
    violations = (
        (np.abs(log["I_b"]) > battery.current_max + tol)
        | (soc_after > battery.soc_max + tol)
        | (soc_after < battery.soc_min - tol)
    )
    return SimMetrics(
        total_fuel_g=float(np.sum(log["mdot_f"] * dt)),
        velocity_rmse=float(np.sqrt(np.mean((log["v"] - log["v_ref"]) ** 2))),
        position_rmse=float(np.sqrt(np.mean((log["s"] - log["s_ref"]) ** 2))),
        soc_final=float(soc_after[-1]),
        soc_min=float(np.min(soc_seen)),
        soc_max=float(np.max(soc_seen)),
        current_min=float(np.min(log["I_b"])),
        current_max=float(np.max(log["I_b"])),
        violation_count=int(np.sum(violations)),
        mean_solve_iterations=float(np.mean(log["solver_iters"])),
        fallback_count=int(np.sum(log["fallback_flag"] > 0)),
    )


def replay_check(log: SimLog, plant: ShevParams, tol: float = 1e-9) -> bool:
    """Re-simulate the plant from the logged controls and verify the log.

    Checks every plant-derived column (states, currents, powers, fuel)
    against a fresh rollout from the logged initial state; solver-side
    columns are not replayable and are skipped. Empty logs pass vacuously.
    """
    n = len(log)
    if n == 0:
        return True
    state = VehicleState(position=float(log["s"][0]), velocity=float(log["v"][0]))
    soc = float(log["SOC"][0])
    for k in range(n):
        force = float(log["F_d"][k])
        pb = float(log["P_b"][k])
        engine, powertrain, friction = _plant_power_split(force, state.velocity, pb, plant)
        current = battery_current(pb, plant.battery)
        expected = {
            "s": state.position,
            "v": state.velocity,
            "SOC": soc,
            "P_e": engine,
            "P_r": powertrain,
            "I_b": current,
            "mdot_f": fuel_rate(engine, plant.engine),
            "friction_brake_W": friction,
        }
        for name, value in expected.items():
            if abs(float(log[name][k]) - value) > tol:
                logger.warning("replay mismatch at step %d column %s: %r vs %r",
                               k, name, float(log[name][k]), value)
                return False
        state = step_longitudinal(state, force, log.dt, plant.vehicle)
        soc = soc - current * log.dt / plant.battery.capacity_coulomb
    return True
