"""Regenerate src/swingbus/data/ieee39.json from the classic New England tables."""

import json
import os

# from, to, r, x, total b  (pu on 100 MVA)
LINES = [
    (1, 2, 0.0035, 0.0411, 0.6987),
    (1, 39, 0.0010, 0.0250, 0.7500),
    (2, 3, 0.0013, 0.0151, 0.2572),
    (2, 25, 0.0070, 0.0086, 0.1460),
    (3, 4, 0.0013, 0.0213, 0.2214),
    (3, 18, 0.0011, 0.0133, 0.2138),
    (4, 5, 0.0008, 0.0128, 0.1342),
    (4, 14, 0.0008, 0.0129, 0.1382),
    (5, 6, 0.0002, 0.0026, 0.0434),
    (5, 8, 0.0008, 0.0112, 0.1476),
    (6, 7, 0.0006, 0.0092, 0.1130),
    (6, 11, 0.0007, 0.0082, 0.1389),
    (7, 8, 0.0004, 0.0046, 0.0780),
    (8, 9, 0.0023, 0.0363, 0.3804),
    (9, 39, 0.0010, 0.0250, 1.2000),
    (10, 11, 0.0004, 0.0043, 0.0729),
    (10, 13, 0.0004, 0.0043, 0.0729),
    (13, 14, 0.0009, 0.0101, 0.1723),
    (14, 15, 0.0018, 0.0217, 0.3660),
    (15, 16, 0.0009, 0.0094, 0.1710),
    (16, 17, 0.0007, 0.0089, 0.1342),
    (16, 19, 0.0016, 0.0195, 0.3040),
    (16, 21, 0.0008, 0.0135, 0.2548),
    (16, 24, 0.0003, 0.0059, 0.0680),
    (17, 18, 0.0007, 0.0082, 0.1319),
    (17, 27, 0.0013, 0.0173, 0.3216),
    (21, 22, 0.0008, 0.0140, 0.2565),
    (22, 23, 0.0006, 0.0096, 0.1846),
    (23, 24, 0.0022, 0.0350, 0.3610),
    (25, 26, 0.0032, 0.0323, 0.5130),
    (26, 27, 0.0014, 0.0147, 0.2396),
    (26, 28, 0.0043, 0.0474, 0.7802),
    (26, 29, 0.0057, 0.0625, 1.0290),
    (28, 29, 0.0014, 0.0151, 0.2490),
]

# from, to, r, x, tap
TRANSFORMERS = [
    (2, 30, 0.0000, 0.0181, 1.025),
    (6, 31, 0.0000, 0.0250, 1.070),
    (10, 32, 0.0000, 0.0200, 1.070),
    (11, 12, 0.0016, 0.0435, 1.006),
    (13, 12, 0.0016, 0.0435, 1.006),
    (19, 20, 0.0007, 0.0138, 1.060),
    (19, 33, 0.0007, 0.0142, 1.070),
    (20, 34, 0.0009, 0.0180, 1.009),
    (22, 35, 0.0000, 0.0143, 1.025),
    (23, 36, 0.0005, 0.0272, 1.000),
    (25, 37, 0.0006, 0.0232, 1.025),
    (29, 38, 0.0008, 0.0156, 1.025),
]

# bus, P, Q (pu)
LOADS = [
    (3, 3.220, 0.024),
    (4, 5.000, 1.840),
    (7, 2.338, 0.840),
    (8, 5.220, 1.760),
    (12, 0.085, 0.880),
    (15, 3.200, 1.530),
    (16, 3.294, 0.323),
    (18, 1.580, 0.300),
    (20, 6.800, 1.030),
    (21, 2.740, 1.150),
    (23, 2.475, 0.846),
    (24, 3.086, -0.922),
    (25, 2.240, 0.472),
    (26, 1.390, 0.170),
    (27, 2.810, 0.755),
    (28, 2.060, 0.276),
    (29, 2.835, 0.269),
    (31, 0.092, 0.046),
    (39, 11.040, 2.500),
]

# bus, P, Vset, qmin, qmax, pmax, H, x'd, slack
GENERATORS = [
    (30, 2.500, 1.0475, 1.40, 4.00, 10.40, 42.0, 0.0310, False),
    (31, 5.208, 0.9820, -1.00, 3.00, 6.46, 30.3, 0.0697, True),
    (32, 6.500, 0.9831, 1.50, 3.00, 7.25, 35.8, 0.0531, False),
    (33, 6.320, 0.9972, 0.00, 2.50, 6.52, 28.6, 0.0436, False),
    (34, 5.080, 1.0123, 0.00, 1.67, 5.08, 26.0, 0.1320, False),
    (35, 6.500, 1.0493, -1.00, 3.00, 6.87, 34.8, 0.0500, False),
    (36, 5.600, 1.0635, 0.00, 2.40, 5.80, 26.4, 0.0490, False),
    (37, 5.400, 1.0278, 0.00, 2.50, 5.64, 24.3, 0.0570, False),
    (38, 8.300, 1.0265, -1.50, 3.00, 8.65, 34.5, 0.0570, False),
    (39, 10.000, 1.0300, -1.00, 3.00, 11.00, 500.0, 0.0060, False),
]


def main():
    gen_buses = {g[0]: g[8] for g in GENERATORS}
    buses = []
    for i in range(1, 40):
        if i in gen_buses:
            typ = "Slack" if gen_buses[i] else "PV"
        else:
            typ = "PQ"
        buses.append(
            {"id": i, "type": typ, "base_kv": 345.0, "gs": 0.0, "bs": 0.0}
        )

    branches = []
    for f, t, r, x, b in LINES:
        branches.append(
            {"from_bus": f, "to_bus": t, "r": r, "x": x, "b": b,
             "tap": 1.0, "shift": 0.0, "status": True, "circuit": 1}
        )
    for f, t, r, x, tap in TRANSFORMERS:
        branches.append(
            {"from_bus": f, "to_bus": t, "r": r, "x": x, "b": 0.0,
             "tap": tap, "shift": 0.0, "status": True, "circuit": 1}
        )

    loads = []
    for bus, p, q in LOADS:
        plo, phi = sorted((round(0.8 * p, 6), round(1.2 * p, 6)))
        qlo, qhi = sorted((round(0.8 * q, 6), round(1.2 * q, 6)))
        loads.append(
            {"bus": bus, "p": p, "q": q,
             "pmin": plo, "pmax": phi, "qmin": qlo, "qmax": qhi}
        )

    gens = []
    for bus, p, v, qmin, qmax, pmax, h, xdp, slack in GENERATORS:
        gens.append(
            {"bus": bus, "p": p, "v": v, "qmin": qmin, "qmax": qmax,
             "pmin": 0.0, "pmax": pmax, "h": h, "d": 0.0, "xdp": xdp,
             "slack": slack, "status": True}
        )

    doc = {
        "name": "ieee39",
        "base_mva": 100.0,
        "buses": buses,
        "branches": branches,
        "generators": gens,
        "loads": loads,
        "neural_devices": [],
        "config": {"frequency_hz": 60.0},
    }
    out = os.path.join(
        os.path.dirname(__file__), "..", "src", "swingbus", "data", "ieee39.json"
    )
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {os.path.normpath(out)}: {len(buses)} buses, "
          f"{len(branches)} branches, {len(gens)} generators, {len(loads)} loads")


if __name__ == "__main__":
    main()
