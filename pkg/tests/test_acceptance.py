"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. The full closed loop over the bundled urban cycle is computed once
(session fixture) and shared by the criteria that inspect it.
"""
import dataclasses
import subprocess
import sys
import time

import numpy as np
import pytest

from shev_mompc.controller import (
    MompcConfig,
    _Transcription,
    pareto_sweep,
    penalty_objective,
    simplex_weight_grid,
    solve_step,
)
from shev_mompc.cycles import ReferenceWindow, preview, reference_trajectory
from shev_mompc.harness import SimLog, replay_check
from shev_mompc.nlp import finite_diff_grad
from shev_mompc.powertrain import (
    FuelSample,
    VehicleState,
    battery_current,
    battery_power_from_current,
    fit_fuel_coefficients,
)


def _report(criterion: str, detail: str) -> None:
    print(f"[ACCEPTANCE] {criterion}: PASS ({detail})")


class TestCriterion1FullCycleClosedLoop:
    def test_tracking_and_hard_limits(self, udds_run, run_config):
        log, metrics, elapsed = udds_run["log"], udds_run["metrics"], udds_run["elapsed"]
        bat = run_config.battery
        assert len(log) == 1370

        soc_seen = np.concatenate([
            log["SOC"], [log["SOC"][-1] - log["I_b"][-1] * log.dt / bat.capacity_coulomb]])
        assert np.all(soc_seen >= bat.soc_min - 1e-9)
        assert np.all(soc_seen <= bat.soc_max + 1e-9)
        assert np.all(np.abs(log["I_b"]) <= bat.current_max + 1e-9)
        assert metrics.violation_count == 0

        assert metrics.velocity_rmse <= 0.5
        nominal = log["fallback_flag"] == 0
        max_err = float(np.max(np.abs(log["v"] - log["v_ref"])[nominal]))
        assert max_err <= 2.0
        assert elapsed < 180.0
        _report("criterion 1 (full-cycle closed loop)",
                f"RMSE {metrics.velocity_rmse:.3f} m/s, max err {max_err:.3f} m/s, "
                f"SOC [{metrics.soc_min:.3f}, {metrics.soc_max:.3f}], "
                f"I [{metrics.current_min:.1f}, {metrics.current_max:.1f}] A, "
                f"{elapsed:.0f} s")


class TestCriterion2PowerBalance:
    def test_engine_battery_balance(self, udds_run, run_config):
        log = udds_run["log"]
        eta = run_config.engine.motor_efficiency
        gap = np.abs(log["P_r"] - eta * (log["P_e"] + log["P_b"]))
        assert float(gap.max()) <= 1e-3
        _report("criterion 2 (power balance)", f"max gap {float(gap.max()):.2e} W")


class TestCriterion3BatteryUnitSuite:
    def test_round_trip_and_closed_forms(self, run_config):
        bat = run_config.battery
        currents = np.linspace(-90.0, 90.0, 1000)
        back = battery_current(battery_power_from_current(currents, bat), bat)
        round_trip = float(np.max(np.abs(back - currents)))
        assert round_trip <= 1e-9

        discharge = battery_current(10000.0, bat)
        charge = battery_current(-10000.0, bat)
        assert discharge == pytest.approx(49.494, abs=1e-3)
        assert charge == pytest.approx(-42.278, abs=1e-3)
        # independent back-substitution oracle for both closed forms
        for current, power in ((discharge, 10000.0), (charge, -10000.0)):
            back_power = current * (bat.open_circuit_voltage - current * bat.resistance)
            assert back_power == pytest.approx(power, rel=1e-6)
        _report("criterion 3 (battery unit suite)",
                f"round trip {round_trip:.1e} A, closed forms {discharge:.3f}/{charge:.3f} A")


class TestCriterion4BruteForceOracle:
    def test_n1_solver_within_one_percent(self, run_config):
        cfg = dataclasses.replace(run_config.controller, horizon=1)
        plant = run_config.plant
        pb_lo, pb_hi = plant.battery.power_bounds()
        f_grid = np.linspace(plant.vehicle.force_min, plant.vehicle.force_max, 200)
        p_grid = np.linspace(pb_lo, pb_hi, 200)
        ff, pp = np.meshgrid(f_grid, p_grid, indexing="ij")
        rng = np.random.default_rng(2024)
        start = time.perf_counter()
        worst_ratio = 0.0
        for _ in range(20):
            v0 = float(rng.uniform(0.0, 20.0))
            soc0 = float(rng.uniform(0.4, 0.75))
            v1 = max(0.0, v0 + float(rng.uniform(-1.5, 1.5)))
            s0 = float(rng.uniform(0.0, 500.0))
            window = ReferenceWindow(s_ref=np.array([s0, s0 + (v0 + v1) / 2.0]),
                                     v_ref=np.array([v0, v1]))
            sol = solve_step(VehicleState(s0, v0), soc0, window, cfg, plant)
            solver_obj = penalty_objective(s0, v0, soc0, sol.decision.force,
                                           sol.decision.battery_power, window, cfg, plant)
            grid_min = float(np.min(penalty_objective(
                s0, v0, soc0, ff[..., None], pp[..., None], window, cfg, plant)))
            assert solver_obj <= 1.01 * grid_min + 1e-9
            worst_ratio = max(worst_ratio, solver_obj / grid_min)
        elapsed = time.perf_counter() - start
        assert elapsed < 30.0
        _report("criterion 4 (horizon-1 grid oracle)",
                f"worst solver/grid ratio {worst_ratio:.6f}, {elapsed:.1f} s")


class TestCriterion5GradientAudit:
    def test_analytic_gradients_match_finite_differences(self, udds_cycle, run_config):
        cfg = run_config.controller
        plant = run_config.plant
        ref = reference_trajectory(udds_cycle, cfg.dt)
        t_index = int(np.argmax(np.diff(ref.v_ref)))  # a demanding window
        window = preview(ref, t_index, cfg.horizon)
        state = VehicleState(float(ref.s_ref[t_index]), float(ref.v_ref[t_index]))
        trans = _Transcription(state, 0.6, window, cfg, plant)

        rng = np.random.default_rng(7)
        h = 1e-4
        worst = 0.0
        for _ in range(100):
            z = trans.lower + rng.random(trans.dim) * (np.minimum(trans.upper, 1.5) - trans.lower)
            grad = trans.gradient(z)
            fd = finite_diff_grad(trans.objective, z, h)
            err = np.abs(grad - fd) / np.maximum(1.0, np.abs(grad))
            worst = max(worst, float(err.max()))

            jac = trans.constraints_jac(z)
            fd_jac = np.empty_like(jac)
            for i in range(trans.dim):
                zp = z.copy(); zp[i] += h
                zm = z.copy(); zm[i] -= h
                fd_jac[:, i] = (trans.constraints(zp) - trans.constraints(zm)) / (2 * h)
            jerr = np.abs(jac - fd_jac) / np.maximum(1.0, np.abs(jac))
            worst = max(worst, float(jerr.max()))
        assert worst <= 1e-5
        _report("criterion 5 (gradient audit)", f"worst relative error {worst:.2e}")


class TestCriterion6SocLedger:
    def test_ledger_on_all_runs(self, udds_run, run_config, synthetic_cycle):
        from shev_mompc.harness import compute_metrics, run_closed_loop

        bat = run_config.battery
        for name, log in (
                ("udds", udds_run["log"]),
                ("synthetic", run_closed_loop(synthetic_cycle, run_config.controller,
                                              run_config.plant, initial_soc=0.66))):
            metrics = compute_metrics(log, bat)
            ledger = log["SOC"][0] - float(np.sum(log["I_b"] * log.dt / bat.capacity_coulomb))
            assert metrics.soc_final == pytest.approx(ledger, abs=1e-9), name
        _report("criterion 6 (SOC ledger)", "telescoping holds within 1e-9 on both cycles")


class TestCriterion7FuelIdentification:
    def test_noiseless_exact_recovery(self):
        powers = np.linspace(0.0, 11760.0, 40)
        samples = [FuelSample(float(p), 0.0614 * float(p) / 1000.0 + 0.0583) for p in powers]
        fit = fit_fuel_coefficients(samples)
        assert fit.alpha == pytest.approx(0.0614, abs=1e-9)
        assert fit.beta == pytest.approx(0.0583, abs=1e-9)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        _report("criterion 7 (fuel identification)",
                f"alpha err {abs(fit.alpha - 0.0614):.1e}, beta err {abs(fit.beta - 0.0583):.1e}, "
                f"R^2 {fit.r_squared}")


class TestCriterion8ParetoSanity:
    def test_order_invariance_and_motion_extreme(self, synthetic_cycle, run_config):
        cfg = run_config.controller
        plant = run_config.plant
        ref = reference_trajectory(synthetic_cycle, cfg.dt)
        t_index = int(np.argmax(np.diff(ref.v_ref)))
        window = preview(ref, t_index, cfg.horizon)
        state = VehicleState(float(ref.s_ref[t_index]), float(ref.v_ref[t_index]))
        grid = simplex_weight_grid(10)

        fwd = pareto_sweep(state, run_config.initial.soc, window, grid, cfg, plant)
        rng = np.random.default_rng(5)
        perm = [grid[i] for i in rng.permutation(len(grid))]
        shuffled = pareto_sweep(state, run_config.initial.soc, window, perm, cfg, plant)
        fwd_map = {p.weights: (p.cost_motion, p.cost_energy, p.dominated) for p in fwd}
        shuf_map = {p.weights: (p.cost_motion, p.cost_energy, p.dominated) for p in shuffled}
        assert fwd_map == shuf_map

        motion_heavy = max(fwd, key=lambda p: p.weights[0])
        assert motion_heavy.weights[0] == 1.0
        assert motion_heavy.cost_motion <= min(p.cost_motion for p in fwd) + 1e-9
        kept = sum(1 for p in fwd if not p.dominated)
        _report("criterion 8 (weight-sweep sanity)",
                f"10 triples, {kept} non-dominated, order-invariant, "
                f"motion extreme J_m {motion_heavy.cost_motion:.4f}")


class TestCriterion9DeterminismAndReplay:
    def test_byte_identical_cli_runs_and_replay(self, tmp_path, udds_run, run_config,
                                                synthetic_cycle):
        rows = ["t_s,v_mps"] + [f"{t:g},{v:g}"
                                for t, v in zip(synthetic_cycle.times, synthetic_cycle.speeds)]
        cycle_path = tmp_path / "synthetic.csv"
        cycle_path.write_text("\n".join(rows) + "\n")

        traces = []
        for run_dir in ("a", "b"):
            out = tmp_path / run_dir
            proc = subprocess.run(
                [sys.executable, "-m", "shev_mompc.cli", "simulate",
                 "--cycle", str(cycle_path), "--out", str(out), "--no-figures"],
                capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            traces.append((out / "trace.csv").read_bytes())
        assert traces[0] == traces[1]

        replayed = SimLog.from_csv(tmp_path / "a" / "trace.csv")
        assert replay_check(replayed, run_config.plant)
        assert replay_check(udds_run["log"], run_config.plant)
        _report("criterion 9 (determinism and replay)",
                f"byte-identical traces ({len(traces[0])} bytes), replay passes")
