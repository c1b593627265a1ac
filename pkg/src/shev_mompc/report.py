"""Figure rendering for simulation traces and Pareto sweeps.

Renders the standard report set next to the delimited outputs: tracked
distance/velocity, the power split, and the battery/fuel profiles, plus a
scatter of the weight-sweep objective pairs. Uses the Agg backend so runs
stay headless.
"""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .controller import ParetoPoint  # noqa: E402
from .harness import SimLog  # noqa: E402


def _save(fig, path) -> None:
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def render_tracking_figure(log: SimLog, path) -> None:
    fig, (ax_s, ax_v) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    t = log["t"]
    ax_s.plot(t, log["s_ref"], "k--", lw=1.0, label="reference")
    ax_s.plot(t, log["s"], "tab:blue", lw=1.0, label="vehicle")
    ax_s.set_ylabel("distance [m]")
    ax_s.legend(loc="upper left")
    ax_v.plot(t, log["v_ref"], "k--", lw=1.0, label="reference")
    ax_v.plot(t, log["v"], "tab:blue", lw=1.0, label="vehicle")
    ax_v.set_ylabel("velocity [m/s]")
    ax_v.set_xlabel("time [s]")
    fig.suptitle("Trajectory tracking")
    _save(fig, path)


def render_power_figure(log: SimLog, path) -> None:
    fig, axes = plt.subplots(3, 1, figsize=(9, 7.5), sharex=True)
    t = log["t"]
    for ax, col, label, color in zip(
            axes, ["P_r", "P_b", "P_e"],
            ["requested power [W]", "battery power [W]", "engine power [W]"],
            ["tab:gray", "tab:orange", "tab:green"]):
        ax.plot(t, log[col], color=color, lw=0.9)
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_ylabel(label)
    axes[-1].set_xlabel("time [s]")
    fig.suptitle("Power split")
    _save(fig, path)


def render_battery_figure(log: SimLog, path, soc_limits=(0.3, 0.8),
                          current_limits=(-90.0, 90.0)) -> None:
    fig, (ax_soc, ax_i, ax_f) = plt.subplots(3, 1, figsize=(9, 7.5), sharex=True)
    t = log["t"]
    ax_soc.plot(t, log["SOC"], "tab:purple", lw=1.0)
    for lim in soc_limits:
        ax_soc.axhline(lim, color="r", lw=0.7, ls=":")
    ax_soc.set_ylabel("SOC [-]")
    ax_i.plot(t, log["I_b"], "tab:orange", lw=0.9)
    for lim in current_limits:
        ax_i.axhline(lim, color="r", lw=0.7, ls=":")
    ax_i.set_ylabel("battery current [A]")
    ax_f.plot(t, log["mdot_f"], "tab:green", lw=0.9)
    ax_f.set_ylabel("fuel rate [g/s]")
    ax_f.set_xlabel("time [s]")
    fig.suptitle("Battery and fuel profiles")
    _save(fig, path)


def render_simulation_figures(log: SimLog, out_dir, soc_limits=(0.3, 0.8),
                              current_limits=(-90.0, 90.0)) -> list[str]:
    paths = [
        os.path.join(out_dir, "fig_tracking.png"),
        os.path.join(out_dir, "fig_power_split.png"),
        os.path.join(out_dir, "fig_battery.png"),
    ]
    render_tracking_figure(log, paths[0])
    render_power_figure(log, paths[1])
    render_battery_figure(log, paths[2], soc_limits, current_limits)
    return paths


def render_pareto_figure(points: list[ParetoPoint], path) -> None:
    fig, ax = plt.subplots(figsize=(7, 5.5))
    dominated = [p for p in points if p.dominated]
    frontier = sorted((p for p in points if not p.dominated), key=lambda p: p.cost_motion)
    if dominated:
        ax.scatter([p.cost_motion for p in dominated], [p.cost_energy for p in dominated],
                   s=30, c="lightgray", label="dominated")
    ax.plot([p.cost_motion for p in frontier], [p.cost_energy for p in frontier],
            "o-", c="tab:red", ms=5, lw=1.0, label="non-dominated")
    ax.set_xlabel("motion objective")
    ax.set_ylabel("fuel + battery objective")
    ax.set_title("Weight-sweep objective pairs")
    ax.legend()
    _save(fig, path)
