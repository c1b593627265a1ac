#!/usr/bin/env python3
"""Generate the bundled drive-cycle CSVs.

Writes two deterministic cycles into src/shev_mompc/data/:

* ``synthetic_120s.csv`` — a clean trapezoidal speed pulse used by fast
  tests: 10 s idle, ramp to 12 m/s at 0.6 m/s^2, 40 s cruise, ramp down at
  0.5 m/s^2, idle to t=119.

* ``udds.csv`` — an urban schedule equivalent to the standard UDDS in its
  published aggregates (1369 s duration, ~11.99 km, 25.35 m/s peak,
  ~19% idle, 14 stop-to-stop hills, accelerations within +-1.48 m/s^2).
  The genuine EPA second-by-second trace is not redistributable from this
  environment, so the file is synthesised to those aggregates; swap in the
  real trace (same two-column format) for regulatory-grade numbers.
"""
from __future__ import annotations

import math
import os

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "shev_mompc", "data")

UDDS_DURATION = 1369          # s, samples at 0..1369 inclusive
UDDS_DISTANCE = 11990.0       # m
UDDS_VMAX = 25.35             # m/s (56.7 mph)
ACCEL_LIMIT = 1.48            # m/s^2

# (peak speed m/s, up accel, down accel) for the 14 hills; hill 2 is the
# long highway-ish pull present in the real schedule
HILLS = [
    (8.0, 1.1, 1.15), (UDDS_VMAX, 0.65, 0.9), (15.0, 1.0, 1.1), (12.0, 1.1, 1.15),
    (10.0, 1.1, 1.15), (13.5, 1.0, 1.1), (11.0, 1.1, 1.15), (14.5, 1.0, 1.1),
    (9.0, 1.1, 1.15), (12.5, 1.05, 1.1), (16.0, 0.95, 1.05), (10.5, 1.1, 1.15),
    (13.0, 1.0, 1.1), (11.5, 1.05, 1.1),
]
IDLE_GAPS = [20, 18, 22, 15, 17, 14, 19, 16, 15, 18, 14, 16, 15, 13]  # before each hill


# reference powertrain limits used to keep the schedule drivable: wheel
# power within what engine plus battery can source, braking within what
# the battery can absorb (with margin left for the controller)
MASS = 1405.0
AERO = 0.5063
ROLL_FORCE = MASS * 9.81 * 0.01
DRIVE_WHEEL_W = 23500.0   # ~0.96 * (11.76 kW engine + 16.8 kW battery), with margin
BRAKE_WHEEL_W = 19500.0   # ~0.96 * 22.9 kW charge limit, with margin


def _accel_cap(v: float) -> float:
    return (DRIVE_WHEEL_W / max(v, 1.0) - AERO * v * v - ROLL_FORCE) / MASS


def _decel_cap(v: float) -> float:
    return (BRAKE_WHEEL_W / max(v, 1.0) + AERO * v * v + ROLL_FORCE) / MASS


def _ramp_up(v0: float, v1: float, accel: float) -> list[float]:
    """Climb from v0 to v1, tapering with the power budget (excludes v0)."""
    out = []
    v = v0
    while v < v1 - 1e-9:
        v = min(v1, v + min(accel, max(0.25, _accel_cap(v))))
        out.append(v)
    return out


def _ramp_down(v0: float, v1: float, decel: float) -> list[float]:
    out = []
    v = v0
    while v > v1 + 1e-9:
        v = max(v1, v - min(decel, max(0.3, _decel_cap(v))))
        out.append(v)
    return out


def _hill(peak: float, a_up: float, a_dn: float, cruise: int, ripple: bool) -> list[float]:
    seg = _ramp_up(0.0, peak, a_up)
    for i in range(cruise):
        dip = 0.2 * (1.0 - math.cos(2.0 * math.pi * i / 17.0)) if ripple else 0.0
        seg.append(peak - dip)
    seg.extend(_ramp_down(seg[-1], 0.0, a_dn))
    return seg


def _assemble(cruises: list[int]) -> list[float]:
    speeds = [0.0]
    for gap, (peak, a_up, a_dn), cruise in zip(IDLE_GAPS, HILLS, cruises):
        speeds.extend([0.0] * (gap - 1))
        speeds.extend(_hill(peak, a_up, a_dn, cruise, ripple=peak < UDDS_VMAX))
    return speeds


def _distance(speeds: list[float]) -> float:
    return sum((a + b) / 2.0 for a, b in zip(speeds[:-1], speeds[1:]))


MIN_CRUISE = 8
TAIL_IDLE = 25


def build_udds() -> list[float]:
    """Fix the idle/ramp skeleton, then trade cruise seconds between fast
    and slow hills (conserving total moving time) until the trapezoidal
    distance matches the target."""
    n_hills = len(HILLS)
    t_fixed = len(_assemble([0] * n_hills))
    c_total = UDDS_DURATION + 1 - TAIL_IDLE - t_fixed
    cruises = [c_total // n_hills] * n_hills
    for i in range(c_total - sum(cruises)):
        cruises[i] += 1

    by_speed = sorted(range(n_hills), key=lambda i: HILLS[i][0])
    pick_fast = 0
    pick_slow = 0
    for _ in range(3000):
        err = UDDS_DISTANCE - _distance(_assemble(cruises))
        if abs(err) <= 10.0:
            break
        if err > 0:
            fast = by_speed[::-1][pick_fast % 3]
            slow = next(i for i in by_speed if cruises[i] > MIN_CRUISE)
            pick_fast += 1
        else:
            fast = next(i for i in by_speed[::-1] if cruises[i] > MIN_CRUISE)
            slow = by_speed[pick_slow % 3]
            pick_slow += 1
            fast, slow = slow, fast  # lengthen a slow hill, shorten a fast one
        if fast == slow:
            break
        cruises[fast] += 1
        cruises[slow] -= 1
    speeds = _assemble(cruises)
    speeds.extend([0.0] * (UDDS_DURATION + 1 - len(speeds)))
    return [round(v, 2) for v in speeds]


def build_synthetic() -> list[float]:
    speeds = [0.0] * 10
    speeds.extend(0.6 * (i + 1) for i in range(20))          # t=10..29 ramp
    speeds.extend([12.0] * 41)                               # t=30..70 cruise
    speeds.extend(12.0 - 0.5 * (i + 1) for i in range(24))   # t=71..94 ramp down
    speeds.extend([0.0] * 25)                                # t=95..119 idle
    return [round(v, 4) for v in speeds]


def check(speeds: list[float], duration: int, name: str) -> None:
    assert len(speeds) == duration + 1, (name, len(speeds))
    accels = [b - a for a, b in zip(speeds[:-1], speeds[1:])]
    assert max(abs(a) for a in accels) <= ACCEL_LIMIT + 0.01, name
    assert min(speeds) >= 0.0 and speeds[0] == 0.0 and speeds[-1] == 0.0, name
    idle = sum(1 for v in speeds if v == 0.0) / len(speeds)
    print(f"{name}: {len(speeds)} samples, {_distance(speeds):.0f} m, "
          f"vmax {max(speeds):.2f} m/s, idle {idle:.1%}")


def write_cycle(path: str, speeds: list[float]) -> None:
    with open(path, "w") as fh:
        fh.write("t_s,v_mps\n")
        for t, v in enumerate(speeds):
            fh.write(f"{t},{v:g}\n")


def main() -> None:
    os.makedirs(OUT_DIR, exist_ok=True)
    udds = build_udds()
    check(udds, UDDS_DURATION, "udds")
    dist = _distance(udds)
    assert abs(dist - UDDS_DISTANCE) <= 40.0, dist
    assert abs(max(udds) - UDDS_VMAX) <= 0.02, max(udds)
    write_cycle(os.path.join(OUT_DIR, "udds.csv"), udds)

    synth = build_synthetic()
    check(synth, 119, "synthetic")
    write_cycle(os.path.join(OUT_DIR, "synthetic_120s.csv"), synth)


if __name__ == "__main__":
    main()
