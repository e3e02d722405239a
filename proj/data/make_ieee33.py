"""Writes ieee33.json: Baran & Wu 33-bus feeder, impedances rescaled from
12.66 kV to 10.5 kV so per-unit drops are preserved. Branch limits are
not part of the original data and are assigned per feeder section."""
import json, math

BW = [  # from, to, r, x (ohm @ 12.66 kV), P kW, Q kvar at `to`
    (1, 2, 0.0922, 0.0470, 100, 60), (2, 3, 0.4930, 0.2511, 90, 40),
    (3, 4, 0.3660, 0.1864, 120, 80), (4, 5, 0.3811, 0.1941, 60, 30),
    (5, 6, 0.8190, 0.7070, 60, 20), (6, 7, 0.1872, 0.6188, 200, 100),
    (7, 8, 0.7114, 0.2351, 200, 100), (8, 9, 1.0300, 0.7400, 60, 20),
    (9, 10, 1.0440, 0.7400, 60, 20), (10, 11, 0.1966, 0.0650, 45, 30),
    (11, 12, 0.3744, 0.1238, 60, 35), (12, 13, 1.4680, 1.1550, 60, 35),
    (13, 14, 0.5416, 0.7129, 120, 80), (14, 15, 0.5910, 0.5260, 60, 10),
    (15, 16, 0.7463, 0.5450, 60, 20), (16, 17, 1.2890, 1.7210, 60, 20),
    (17, 18, 0.7320, 0.5740, 90, 40), (2, 19, 0.1640, 0.1565, 90, 40),
    (19, 20, 1.5042, 1.3554, 90, 40), (20, 21, 0.4095, 0.4784, 90, 40),
    (21, 22, 0.7089, 0.9373, 90, 40), (3, 23, 0.4512, 0.3083, 90, 50),
    (23, 24, 0.8980, 0.7091, 420, 200), (24, 25, 0.8960, 0.7011, 420, 200),
    (6, 26, 0.2030, 0.1034, 60, 25), (26, 27, 0.2842, 0.1447, 60, 25),
    (27, 28, 1.0590, 0.9337, 60, 20), (28, 29, 0.8042, 0.7006, 120, 70),
    (29, 30, 0.5075, 0.2585, 200, 600), (30, 31, 0.9744, 0.9630, 150, 70),
    (31, 32, 0.3105, 0.3619, 210, 100), (32, 33, 0.3410, 0.5302, 60, 40),
]

LIMITS = {  # kVA by downstream bus
    2: 8000, 3: 6000, 4: 6000, 5: 6000, 6: 6000,
    7: 3000, 8: 3000, 9: 3000, 10: 2000, 11: 2000, 12: 2000, 13: 2000,
    14: 1500, 15: 1500, 16: 1500, 17: 1500, 18: 1500,
    19: 4000, 20: 4000, 21: 2500, 22: 2500,
    23: 4000, 24: 4000, 25: 4000,
    26: 3000, 27: 3000, 28: 3000, 29: 3000, 30: 2500, 31: 2500, 32: 2500, 33: 2500,
}

def main():
    scale = (10.5 / 12.66) ** 2
    buses = [{"id": 1, "kind": "substation", "v_ref_kv": 10.5}]
    branches = []
    for f, t, r, x, p, q in BW:
        buses.append({"id": t, "kind": "load", "v_lower_kv": 10.0,
                      "v_upper_kv": 10.8, "base_load_kw": p,
                      "base_load_kvar": q})
        branches.append({"from": f, "to": t, "r_ohm": round(r * scale, 6),
                         "x_ohm": round(x * scale, 6), "s_limit_kva": LIMITS[t]})
    doc = {
        "name": "33-bus radial feeder (Baran-Wu data at 10.5 kV)",
        "slot_count": 24,
        "voltage_drop_scale": 0.001,
        "buses": sorted(buses, key=lambda b: b["id"]),
        "branches": branches,
        "pv_candidates": [17, 21, 23, 31],
        "ev_candidates": [9, 19, 29],
        "weights": {"pv": 1.0, "ev": 1.0},
    }
    with open("ieee33.json", "w") as fh:
        json.dump(doc, fh, indent=1)

if __name__ == "__main__":
    main()
