"""Weighted-sum multi-objective MPC for the series hybrid powertrain.

Each control step transcribes the finite-horizon problem into a small NLP
by single shooting: the decision vector stacks the traction-force and
battery-power sequences (normalised for conditioning) plus one shared soft
slack per SOC stage and per engine-power stage. States are generated by
forward substitution of the plant steps, so the dynamics never appear as
equality constraints. Battery current limits are enforced exactly through
the battery-power box; SOC and engine-envelope limits are softened with
quadratically penalised slacks. Velocity bounds ride along as hard rows
but are satisfied structurally because the predictor clamps speed.

The same rollout arithmetic is exposed in batched form so tests can brute
force cost surfaces over control grids and compare against the solver.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cycles import ReferenceWindow
from .errors import ValidationError
from .nlp import NlpProblem, NlpSolution, SolveStatus, solve_nlp
from .powertrain import (
    BatteryParams,
    EngineParams,
    ShevParams,
    VehicleParams,
    VehicleState,
    accel_core,
    battery_current_core,
    battery_current_slope,
    speed_step_core,
)

logger = logging.getLogger(__name__)


@dataclass
class MompcConfig:
    """Controller tuning: horizon, objective weights and scalings.

    The three objective weights must be non-negative and sum to one (they
    are re-normalised exactly on construction; larger deviations are the
    config loader's job to fix). ``control_weight`` acts on the traction
    force divided by ``force_norm`` so its magnitude is comparable with the
    tracking terms.
    """

    horizon: int = 10
    dt: float = 1.0
    weight_motion: float = 1.0 / 3.0
    weight_fuel: float = 1.0 / 3.0
    weight_battery: float = 1.0 / 3.0
    track_weight: np.ndarray = field(default_factory=lambda: np.eye(2))
    control_weight: float = 1.0
    fuel_weight: float = 5.0
    soc_weight: float = 300.0
    soc_ref: float = 0.5
    force_norm: float = 3000.0
    pb_norm: float = 20000.0
    soft_penalty: float = 1e4

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValidationError("horizon must be at least 1")
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        w = np.array([self.weight_motion, self.weight_fuel, self.weight_battery], dtype=float)
        if np.any(w < 0):
            raise ValidationError("objective weights must be non-negative")
        total = float(w.sum())
        if abs(total - 1.0) > 1e-6:
            raise ValidationError(
                f"objective weights must sum to 1 (got {total}); "
                "use the config loader to renormalise")
        self.weight_motion, self.weight_fuel, self.weight_battery = (w / total).tolist()
        q = np.atleast_2d(np.asarray(self.track_weight, dtype=float))
        if q.shape == (1, 1):
            q = float(q[0, 0]) * np.eye(2)
        if q.shape != (2, 2) or not np.allclose(q, q.T):
            raise ValidationError("track_weight must be a scalar or symmetric 2x2 matrix")
        if np.any(np.linalg.eigvalsh(q) < -1e-12):
            raise ValidationError("track_weight must be positive semidefinite")
        self.track_weight = q
        if self.control_weight <= 0:
            raise ValidationError("control_weight must be positive")
        if self.fuel_weight < 0 or self.soc_weight < 0:
            raise ValidationError("fuel_weight and soc_weight must be non-negative")
        if not 0.0 <= self.soc_ref <= 1.0:
            raise ValidationError("soc_ref must lie in [0, 1]")
        if self.force_norm <= 0 or self.pb_norm <= 0:
            raise ValidationError("force_norm and pb_norm must be positive")
        if self.soft_penalty <= 0:
            raise ValidationError("soft_penalty must be positive")

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.weight_motion, self.weight_fuel, self.weight_battery)


@dataclass(frozen=True)
class DecisionVector:
    """Per-stage traction force [N] and battery power [W] over the horizon."""

    force: np.ndarray
    battery_power: np.ndarray


@dataclass
class SolverDiagnostics:
    status: SolveStatus
    iterations: int
    kkt_residual: float
    constraint_violation: float
    objective_value: float
    fallback: bool = False


@dataclass
class OcpSolution:
    """Optimal plan plus the predicted trajectories and cost split."""

    decision: DecisionVector
    position: np.ndarray      # N+1
    velocity: np.ndarray      # N+1
    soc: np.ndarray           # N+1
    engine_power: np.ndarray  # N (raw power-balance value, may dip below 0)
    current: np.ndarray       # N
    cost_total: float
    cost_motion: float
    cost_fuel: float
    cost_battery: float
    slack_penalty: float
    diagnostics: SolverDiagnostics


@dataclass(frozen=True)
class ParetoPoint:
    weights: tuple[float, float, float]
    cost_motion: float
    cost_energy: float   # fuel + battery objectives, unweighted
    dominated: bool


# ---------------------------------------------------------------------------
# prediction rollout (batched) and stage costs
# ---------------------------------------------------------------------------

def rollout(position: float, velocity: float, soc: float, force, battery_power,
            plant: ShevParams, dt: float) -> dict[str, np.ndarray]:
    """Forward-substitute the plant over the horizon.

    ``force``/``battery_power`` have shape (..., N); leading axes broadcast,
    which is how the brute-force grid oracle sweeps control candidates.
    """
    force = np.asarray(force, dtype=float)
    pb = np.asarray(battery_power, dtype=float)
    n = force.shape[-1]
    lead = np.broadcast_shapes(force.shape[:-1], pb.shape[:-1])
    veh, bat, eng = plant.vehicle, plant.battery, plant.engine

    s = np.empty(lead + (n + 1,))
    v = np.empty(lead + (n + 1,))
    c = np.empty(lead + (n + 1,))
    pe = np.empty(lead + (n,))
    cur = np.empty(lead + (n,))
    s[..., 0] = position
    v[..., 0] = velocity
    c[..., 0] = soc
    for k in range(n):
        f_k = force[..., k]
        p_k = pb[..., k]
        v_k = v[..., k]
        s[..., k + 1] = s[..., k] + dt * v_k
        v[..., k + 1] = speed_step_core(v_k, f_k, dt, veh)
        i_k = battery_current_core(p_k, bat)
        cur[..., k] = i_k
        c[..., k + 1] = c[..., k] - i_k * dt / bat.capacity_coulomb
        pe[..., k] = (f_k * v_k) / eng.motor_efficiency - p_k
    return {"position": s, "velocity": v, "soc": c, "engine_power": pe, "current": cur}


def motion_cost(position, velocity, window: ReferenceWindow, force,
                track_weight: np.ndarray, control_weight: float,
                force_norm: float):
    """Tracking error plus normalised control effort over the window."""
    es = np.asarray(position, dtype=float) - window.s_ref
    ev = np.asarray(velocity, dtype=float) - window.v_ref
    q = track_weight
    state_term = (q[0, 0] * es * es + 2.0 * q[0, 1] * es * ev + q[1, 1] * ev * ev).sum(axis=-1)
    zf = np.asarray(force, dtype=float) / force_norm
    control_term = control_weight * (zf * zf).sum(axis=-1)
    out = state_term + control_term
    return float(out) if np.ndim(out) == 0 else out


def fuel_cost(engine_power, fuel_weight: float, dt: float, eng: EngineParams):
    """Sum of squared per-stage fuel increments; the terminal stage reuses
    the last commanded engine power so the window stays N+1 terms long.

    Evaluates the affine fuel law as-is, so transiently negative engine
    powers explored by the solver stay differentiable; bounds are enforced
    by the OCP constraints, not here.
    """
    pe = np.asarray(engine_power, dtype=float)
    dm = dt * (eng.fuel_alpha * (pe / 1000.0) + eng.fuel_beta)
    out = fuel_weight * ((dm * dm).sum(axis=-1) + dm[..., -1] ** 2)
    return float(out) if np.ndim(out) == 0 else out


def battery_cost(soc, soc_ref: float, soc_weight: float):
    """Quadratic SOC regulation cost over the N+1 window."""
    dev = np.asarray(soc, dtype=float) - soc_ref
    out = soc_weight * (dev * dev).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def penalty_objective(position: float, velocity: float, soc: float, force,
                      battery_power, window: ReferenceWindow, cfg: MompcConfig,
                      plant: ShevParams):
    """Weighted objective with soft-constraint slacks eliminated in closed
    form — exactly the value the NLP attains for given controls at the
    optimal slack choice. This is the brute-force oracle's cost function.
    """
    traj = rollout(position, velocity, soc, force, battery_power, plant, cfg.dt)
    bat, eng = plant.battery, plant.engine
    j_m = motion_cost(traj["position"], traj["velocity"], window, force,
                      cfg.track_weight, cfg.control_weight, cfg.force_norm)
    j_f = fuel_cost(traj["engine_power"], cfg.fuel_weight, cfg.dt, eng)
    j_b = battery_cost(traj["soc"], cfg.soc_ref, cfg.soc_weight)
    c = traj["soc"][..., 1:]
    soc_slack = np.maximum.reduce([np.zeros_like(c), bat.soc_min - c, c - bat.soc_max])
    pe = traj["engine_power"]
    pe_slack = np.maximum.reduce([np.zeros_like(pe), -pe, pe - eng.power_max]) / cfg.pb_norm
    penalty = cfg.soft_penalty * ((soc_slack**2).sum(axis=-1) + (pe_slack**2).sum(axis=-1))
    w_m, w_f, w_b = cfg.weights
    out = w_m * j_m + w_f * j_f + w_b * j_b + penalty
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# transcription into an NlpProblem
# ---------------------------------------------------------------------------

class _Transcription:
    """Decision-vector layout, rollout cache and analytic derivatives.

    z = [force/force_norm (N), battery_power/pb_norm (N),
         soc slack (N, stages 1..N), engine-power slack (N, normalised)]
    """

    def __init__(self, state: VehicleState, soc: float, window: ReferenceWindow,
                 cfg: MompcConfig, plant: ShevParams):
        n = cfg.horizon
        if len(window.v_ref) != n + 1:
            raise ValidationError(f"window must contain {n + 1} reference pairs")
        if not 0.0 <= soc <= 1.0:
            raise ValidationError("soc must lie in [0, 1]")
        self.n = n
        self.state = state
        self.soc0 = float(soc)
        self.window = window
        self.cfg = cfg
        self.plant = plant
        self.dim = 4 * n
        self.idx_f = slice(0, n)
        self.idx_p = slice(n, 2 * n)
        self.idx_ss = slice(2 * n, 3 * n)
        self.idx_sp = slice(3 * n, 4 * n)

        veh, bat = plant.vehicle, plant.battery
        pb_lo, pb_hi = bat.power_bounds()
        self.pb_lo, self.pb_hi = pb_lo, pb_hi
        lower = np.concatenate([
            np.full(n, veh.force_min / cfg.force_norm),
            np.full(n, pb_lo / cfg.pb_norm),
            np.zeros(2 * n),
        ])
        upper = np.concatenate([
            np.full(n, veh.force_max / cfg.force_norm),
            np.full(n, pb_hi / cfg.pb_norm),
            np.full(2 * n, np.inf),
        ])
        self.lower, self.upper = lower, upper
        self.hessian_diag = np.concatenate([
            np.ones(2 * n),
            np.full(2 * n, 2.0 * cfg.soft_penalty),
        ])
        self._cache_key: bytes | None = None
        self._cache: dict | None = None

    # -- packing ----------------------------------------------------------
    def pack(self, force: np.ndarray, battery_power: np.ndarray,
             slack_soc: np.ndarray | None = None,
             slack_pe: np.ndarray | None = None) -> np.ndarray:
        z = np.zeros(self.dim)
        z[self.idx_f] = np.asarray(force, dtype=float) / self.cfg.force_norm
        z[self.idx_p] = np.asarray(battery_power, dtype=float) / self.cfg.pb_norm
        if slack_soc is None or slack_pe is None:
            slack_soc, slack_pe = self._natural_slacks(z)
        z[self.idx_ss] = slack_soc
        z[self.idx_sp] = slack_pe
        return z

    def unpack(self, z: np.ndarray) -> DecisionVector:
        return DecisionVector(
            force=z[self.idx_f] * self.cfg.force_norm,
            battery_power=z[self.idx_p] * self.cfg.pb_norm,
        )

    def _natural_slacks(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Smallest feasible slacks for the given controls."""
        traj = self._rollout(z)
        bat, eng = self.plant.battery, self.plant.engine
        c = traj["soc"][1:]
        ss = np.maximum.reduce([np.zeros_like(c), bat.soc_min - c, c - bat.soc_max])
        pe = traj["engine_power"]
        sp = np.maximum.reduce([np.zeros_like(pe), -pe, pe - eng.power_max]) / self.cfg.pb_norm
        return ss, sp

    # -- cached rollout ----------------------------------------------------
    def _rollout(self, z: np.ndarray, need_sens: bool = False) -> dict:
        key = z.tobytes()
        if key != self._cache_key:
            dec = self.unpack(z)
            traj = rollout(self.state.position, self.state.velocity, self.soc0,
                           dec.force, dec.battery_power, self.plant, self.cfg.dt)
            traj["force"] = dec.force
            traj["battery_power"] = dec.battery_power
            traj["sens"] = None
            self._cache_key = key
            self._cache = traj
        if need_sens and self._cache["sens"] is None:
            self._cache["sens"] = self._sensitivities(self._cache)
        return self._cache

    def _sensitivities(self, traj: dict) -> dict:
        """Forward sensitivities of the rollout w.r.t. physical controls.

        Velocity/position react only to force; SOC only to battery power.
        Clamped velocity stages propagate zero derivative, matching the
        piecewise definition of the plant step.
        """
        n = self.n
        cfg, veh, bat, eng = self.cfg, self.plant.vehicle, self.plant.battery, self.plant.engine
        v = traj["velocity"]
        force = traj["force"]
        pb = traj["battery_power"]
        dt = cfg.dt
        grade_force = veh.mass * veh.gravity * np.sin(veh.grade)

        sv = np.zeros((n + 1, n))
        ss = np.zeros((n + 1, n))
        for k in range(n):
            v_k = v[k]
            if v_k > 0.0:
                da_dv = -2.0 * veh.aero_coeff * v_k / veh.mass
                da_df = 1.0 / veh.mass
            else:
                # standstill: right-derivative convention so the launch kink
                # (F crossing the grade force at rest) is seen by the solver
                da_dv = 0.0
                da_df = (1.0 / veh.mass) if (force[k] - grade_force) >= 0.0 else 0.0
            raw = v_k + dt * float(accel_core(v_k, force[k], veh))
            clamp = 1.0 if 0.0 <= raw < veh.v_max else 0.0
            ss[k + 1] = ss[k] + dt * sv[k]
            sv[k + 1] = clamp * (1.0 + dt * da_dv) * sv[k]
            sv[k + 1, k] += clamp * dt * da_df

        iprime = np.asarray(battery_current_slope(pb, bat))  # dI/dP per stage
        dsoc_dp = -dt * iprime / bat.capacity_coulomb        # soc(k) gains this for j < k

        # dPe(k)/dF_j = v_k/eta * delta_kj + F_k/eta * sv[k, j]
        dpe_df = (force[:, None] / eng.motor_efficiency) * sv[:n, :]
        dpe_df[np.arange(n), np.arange(n)] += v[:n] / eng.motor_efficiency
        return {"sv": sv, "ss": ss, "dsoc_dp": dsoc_dp, "dpe_df": dpe_df}

    # -- objective / constraints ------------------------------------------
    def cost_terms(self, z: np.ndarray) -> tuple[float, float, float, float]:
        traj = self._rollout(z)
        cfg = self.cfg
        j_m = motion_cost(traj["position"], traj["velocity"], self.window,
                          traj["force"], cfg.track_weight, cfg.control_weight,
                          cfg.force_norm)
        j_f = fuel_cost(traj["engine_power"], cfg.fuel_weight, cfg.dt, self.plant.engine)
        j_b = battery_cost(traj["soc"], cfg.soc_ref, cfg.soc_weight)
        slacks = z[2 * self.n:]
        pen = cfg.soft_penalty * float(slacks @ slacks)
        return j_m, j_f, j_b, pen

    def objective(self, z: np.ndarray) -> float:
        j_m, j_f, j_b, pen = self.cost_terms(z)
        w_m, w_f, w_b = self.cfg.weights
        return w_m * j_m + w_f * j_f + w_b * j_b + pen

    def gradient(self, z: np.ndarray) -> np.ndarray:
        n, cfg = self.n, self.cfg
        traj = self._rollout(z, need_sens=True)
        sens = traj["sens"]
        eng = self.plant.engine
        w_m, w_f, w_b = cfg.weights
        grad = np.zeros(self.dim)

        # motion: state tracking through (ss, sv), control effort directly
        es = traj["position"] - self.window.s_ref
        ev = traj["velocity"] - self.window.v_ref
        q = cfg.track_weight
        qs = 2.0 * (q[0, 0] * es + q[0, 1] * ev)
        qv = 2.0 * (q[0, 1] * es + q[1, 1] * ev)
        g_f_phys = w_m * (qs @ sens["ss"] + qv @ sens["sv"])

        # fuel: terminal stage duplicates the last increment
        dm = cfg.dt * (eng.fuel_alpha * (traj["engine_power"] / 1000.0) + eng.fuel_beta)
        stage_w = np.ones(n)
        stage_w[-1] = 2.0
        coef = 2.0 * cfg.fuel_weight * stage_w * dm * (cfg.dt * eng.fuel_alpha / 1000.0)
        g_f_phys = g_f_phys + w_f * (coef @ sens["dpe_df"])
        g_p_phys = w_f * (-coef)

        # battery: soc(k) depends on all earlier battery powers
        dev = 2.0 * cfg.soc_weight * (traj["soc"] - cfg.soc_ref)
        suffix = np.cumsum(dev[::-1])[::-1]  # suffix[j] = sum_{k >= j} dev[k]
        g_p_phys = g_p_phys + w_b * sens["dsoc_dp"] * suffix[1:]

        grad[self.idx_f] = g_f_phys * cfg.force_norm
        grad[self.idx_f] += w_m * 2.0 * cfg.control_weight * z[self.idx_f]
        grad[self.idx_p] = g_p_phys * cfg.pb_norm
        grad[2 * n:] = 2.0 * cfg.soft_penalty * z[2 * n:]
        return grad

    def constraints(self, z: np.ndarray) -> np.ndarray:
        traj = self._rollout(z)
        bat, eng, veh = self.plant.battery, self.plant.engine, self.plant.vehicle
        c = traj["soc"][1:]
        pe = traj["engine_power"]
        v = traj["velocity"][1:]
        s_soc = z[self.idx_ss]
        s_pe = z[self.idx_sp]
        return np.concatenate([
            bat.soc_min - c - s_soc,
            c - bat.soc_max - s_soc,
            -pe / self.cfg.pb_norm - s_pe,
            (pe - eng.power_max) / self.cfg.pb_norm - s_pe,
            -v / veh.v_max,
            (v - veh.v_max) / veh.v_max,
        ])

    def constraints_jac(self, z: np.ndarray) -> np.ndarray:
        n, cfg = self.n, self.cfg
        traj = self._rollout(z, need_sens=True)
        sens = traj["sens"]
        veh = self.plant.vehicle
        jac = np.zeros((6 * n, self.dim))
        eye = np.eye(n)

        # soc rows: soc(k) gains dsoc_dp[j] from each battery power j < k
        lower_tri = np.tril(np.ones((n, n)))  # rows k=1..N, cols j=0..N-1, j<k
        dsoc = lower_tri * sens["dsoc_dp"][None, :]
        jac[0:n, self.idx_p] = -dsoc * cfg.pb_norm
        jac[0:n, self.idx_ss] = -eye
        jac[n:2 * n, self.idx_p] = dsoc * cfg.pb_norm
        jac[n:2 * n, self.idx_ss] = -eye

        # engine-power rows (normalised by pb_norm)
        dpe_f = sens["dpe_df"] * cfg.force_norm / cfg.pb_norm
        jac[2 * n:3 * n, self.idx_f] = -dpe_f
        jac[2 * n:3 * n, self.idx_p] = eye  # -dPe/dP = +1, / pb_norm * pb_norm
        jac[2 * n:3 * n, self.idx_sp] = -eye
        jac[3 * n:4 * n, self.idx_f] = dpe_f
        jac[3 * n:4 * n, self.idx_p] = -eye
        jac[3 * n:4 * n, self.idx_sp] = -eye

        # velocity rows
        sv = sens["sv"][1:, :] * cfg.force_norm / veh.v_max
        jac[4 * n:5 * n, self.idx_f] = -sv
        jac[5 * n:6 * n, self.idx_f] = sv
        return jac

    def gauss_newton(self, z: np.ndarray) -> np.ndarray:
        """Gauss-Newton Hessian of the objective at z.

        Every objective term is a weighted square, so this captures the full
        curvature except the second derivatives of the dynamics themselves;
        used to seed the quasi-Newton matrix so warm starts converge in a
        couple of iterations.
        """
        n, cfg = self.n, self.cfg
        traj = self._rollout(z, need_sens=True)
        sens = traj["sens"]
        eng = self.plant.engine
        w_m, w_f, w_b = cfg.weights
        dim = self.dim
        bmat = np.zeros((dim, dim))

        ss = np.zeros((n + 1, dim))
        sv = np.zeros((n + 1, dim))
        ss[:, self.idx_f] = sens["ss"] * cfg.force_norm
        sv[:, self.idx_f] = sens["sv"] * cfg.force_norm
        q = cfg.track_weight
        bmat += 2.0 * w_m * (q[0, 0] * ss.T @ ss + q[0, 1] * (ss.T @ sv + sv.T @ ss)
                             + q[1, 1] * sv.T @ sv)
        diag_f = np.arange(n)
        bmat[diag_f, diag_f] += 2.0 * w_m * cfg.control_weight

        dpe = np.zeros((n, dim))
        dpe[:, self.idx_f] = sens["dpe_df"] * cfg.force_norm
        dpe[np.arange(n), n + np.arange(n)] = -cfg.pb_norm
        stage_w = np.ones(n)
        stage_w[-1] = 2.0
        coef = 2.0 * w_f * cfg.fuel_weight * (cfg.dt * eng.fuel_alpha / 1000.0) ** 2
        bmat += coef * dpe.T @ (stage_w[:, None] * dpe)

        dsoc = np.zeros((n + 1, dim))
        dsoc[1:, self.idx_p] = np.tril(np.ones((n, n))) * sens["dsoc_dp"][None, :] * cfg.pb_norm
        bmat += 2.0 * w_b * cfg.soc_weight * dsoc.T @ dsoc

        slack = np.arange(2 * n, 4 * n)
        bmat[slack, slack] += 2.0 * cfg.soft_penalty
        return bmat

    def to_problem(self, seed_z: np.ndarray | None = None) -> NlpProblem:
        return NlpProblem(
            n=self.dim,
            objective=self.objective,
            gradient=self.gradient,
            lower=self.lower,
            upper=self.upper,
            constraints=self.constraints,
            constraints_jac=self.constraints_jac,
            hessian_diag=self.hessian_diag,
            hessian_init=None if seed_z is None else self.gauss_newton(seed_z),
        )


def build_ocp(state: VehicleState, soc: float, window: ReferenceWindow,
              cfg: MompcConfig, plant: ShevParams) -> NlpProblem:
    """Transcribe one control step into an NlpProblem (single shooting)."""
    return _Transcription(state, soc, window, cfg, plant).to_problem()


# ---------------------------------------------------------------------------
# receding-horizon solve and weight sweeps
# ---------------------------------------------------------------------------

def _shifted_plan(warm: OcpSolution) -> tuple[np.ndarray, np.ndarray]:
    f = np.concatenate([warm.decision.force[1:], warm.decision.force[-1:]])
    p = np.concatenate([warm.decision.battery_power[1:], warm.decision.battery_power[-1:]])
    return f, p


def solve_step(state: VehicleState, soc: float, window: ReferenceWindow,
               cfg: MompcConfig, plant: ShevParams,
               warm: OcpSolution | None = None,
               tol_kkt: float = 1e-6, tol_feas: float = 1e-8,
               max_iter: int = 200) -> OcpSolution:
    """Solve one receding-horizon step.

    Warm starts shift the previous plan by one stage and repeat the final
    stage. If the NLP reports infeasibility, a fallback control is applied:
    keep the shifted force plan and saturate battery power toward the
    requested electrical power within its box.
    """
    trans = _Transcription(state, soc, window, cfg, plant)
    n = cfg.horizon
    if warm is not None:
        f0, p0 = _shifted_plan(warm)
        f0 = np.clip(f0, plant.vehicle.force_min, plant.vehicle.force_max)
        p0 = np.clip(p0, trans.pb_lo, trans.pb_hi)
        # Snap numerically-zero forces to +0.0: a warm plan parked a hair on
        # the negative side of the standstill kink would otherwise hide the
        # launch direction from the gradient and freeze the vehicle at rest.
        f0[np.abs(f0) < 1e-3] = 0.0
    else:
        f0 = np.zeros(n)
        p0 = np.zeros(n)
    z0 = trans.pack(f0, p0)
    sol = solve_nlp(trans.to_problem(seed_z=z0), z0, tol_kkt=tol_kkt,
                    tol_feas=tol_feas, max_iter=max_iter)

    fallback = sol.status is SolveStatus.INFEASIBLE
    if fallback:
        force = f0.copy()
        pre = rollout(state.position, state.velocity, soc, force, np.zeros(n),
                      plant, cfg.dt)
        wheel = force * pre["velocity"][:-1]
        pb = np.clip(wheel / plant.engine.motor_efficiency, trans.pb_lo, trans.pb_hi)
        z_star = trans.pack(force, pb)
        logger.warning("solver infeasible; applying saturated fallback control")
    else:
        z_star = sol.x

    dec = trans.unpack(z_star)
    traj = trans._rollout(z_star)
    j_m, j_f, j_b, pen = trans.cost_terms(z_star)
    w_m, w_f, w_b = cfg.weights
    return OcpSolution(
        decision=dec,
        position=traj["position"].copy(),
        velocity=traj["velocity"].copy(),
        soc=traj["soc"].copy(),
        engine_power=traj["engine_power"].copy(),
        current=traj["current"].copy(),
        cost_total=w_m * j_m + w_f * j_f + w_b * j_b + pen,
        cost_motion=j_m,
        cost_fuel=j_f,
        cost_battery=j_b,
        slack_penalty=pen,
        diagnostics=SolverDiagnostics(
            status=sol.status,
            iterations=sol.iterations,
            kkt_residual=sol.kkt_residual,
            constraint_violation=sol.constraint_violation_max,
            objective_value=sol.objective_value,
            fallback=fallback,
        ),
    )


def simplex_weight_grid(count: int) -> list[tuple[float, float, float]]:
    """Deterministic spread of ``count`` weight triples over the simplex.

    Uses the coarsest triangular lattice with at least ``count`` nodes and
    subsamples it evenly, so the extremes (1,0,0) and (0,0,1) are always
    present for count >= 2; a single point returns the balanced triple.
    """
    if count < 1:
        raise ValidationError("weight grid size must be at least 1")
    if count == 1:
        return [(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)]
    m = 1
    while (m + 1) * (m + 2) // 2 < count:
        m += 1
    lattice = []
    for i in range(m, -1, -1):
        for j in range(m - i, -1, -1):
            lattice.append((i / m, j / m, (m - i - j) / m))
    picks = np.round(np.linspace(0, len(lattice) - 1, count)).astype(int)
    triples = []
    for idx in picks:
        w = np.array(lattice[idx])
        w = w / w.sum()
        triples.append((float(w[0]), float(w[1]), float(w[2])))
    return triples


def mark_dominated(points: list[tuple[float, float]]) -> list[bool]:
    """Pairwise Pareto dominance on (J1, J2) pairs, order independent."""
    flags = []
    for i, (a1, a2) in enumerate(points):
        dominated = any(
            (b1 <= a1 and b2 <= a2 and (b1 < a1 or b2 < a2))
            for j, (b1, b2) in enumerate(points) if j != i)
        flags.append(dominated)
    return flags


def _sweep_one(args) -> tuple[float, float]:
    state, soc, window, cfg, plant, weights = args
    cfg_w = replace(cfg, weight_motion=weights[0], weight_fuel=weights[1],
                    weight_battery=weights[2])
    sol = solve_step(state, soc, window, cfg_w, plant)
    return sol.cost_motion, sol.cost_fuel + sol.cost_battery


def pareto_sweep(state: VehicleState, soc: float, window: ReferenceWindow,
                 weight_grid: list[tuple[float, float, float]],
                 cfg: MompcConfig, plant: ShevParams,
                 jobs: int = 1) -> list[ParetoPoint]:
    """Solve one OCP per weight triple and flag dominated objective pairs.

    Costs are recorded unweighted: J1 is the motion objective, J2 the sum
    of the fuel and battery objectives. Duplicate triples are collapsed.
    """
    unique: list[tuple[float, float, float]] = []
    for w in weight_grid:
        if w not in unique:
            unique.append(w)
    tasks = [(state, soc, window, cfg, plant, w) for w in unique]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    flags = mark_dominated(results)
    return [
        ParetoPoint(weights=w, cost_motion=r[0], cost_energy=r[1], dominated=d)
        for w, r, d in zip(unique, results, flags)
    ]
