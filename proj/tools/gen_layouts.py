#!/usr/bin/env python3
"""Regenerates the shipped layout files under data/layouts/.

Edge lengths are computed from node coordinates so they always match the
Euclidean distance, and the output uses the same canonical form that
save_layout writes (sorted keys, two-space indent, floats everywhere).
"""
import json
import math
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data" / "layouts"


def pt(x, y):
    return {"x": float(x), "y": float(y)}


def rect(x0, y0, x1, y1):
    return {"min": pt(x0, y0), "max": pt(x1, y1)}


def camera(cid, x, y, pan):
    return {
        "id": cid,
        "position": pt(x, y),
        "mount_height": 2.5,
        "pan_azimuth": float(pan),
        "fov_deg": 50.0,
        "min_range_m": 1.0,
        "max_range_m": 19.0,
    }


def build(name, bounds, nodes, edges, zones, gates, machines, mounts, presets):
    pos = {n: (x, y) for n, x, y in nodes}
    doc = {
        "format_version": 1,
        "name": name,
        "bounds": rect(*bounds),
        "zones": [
            {"id": zid, "kind": kind, "area": rect(*area), "nodes": list(ns)}
            for zid, kind, area, ns in zones
        ],
        "nav_nodes": [{"id": n, "x": float(x), "y": float(y)} for n, x, y in nodes],
        "nav_edges": [
            {"from": a, "to": b, "length": math.dist(pos[a], pos[b])} for a, b in edges
        ],
        "service_points": {
            "gates": {"count": len(gates), "nodes": list(gates)},
            "ticket_machines": {"count": len(machines), "nodes": list(machines)},
        },
        "camera_mounts": [
            {"id": mid, "a": pt(ax, ay), "b": pt(bx, by)} for mid, ax, ay, bx, by in mounts
        ],
        "presets": presets,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def default_station():
    nodes = [
        ("e1", 12, 29), ("e2", 48, 29),
        ("x1", 6, 29), ("x2", 54, 29),
        ("c1", 12, 23), ("c2", 30, 23), ("c3", 48, 23),
        ("tm1", 16, 27), ("tm2", 30, 27), ("tm3", 44, 27),
        ("g1", 22, 17), ("g2", 27, 17), ("g3", 33, 17), ("g4", 38, 17),
        ("q1", 24, 11), ("q2", 36, 11),
        ("pl1", 14, 4), ("pl2", 46, 4),
    ]
    edges = [
        ("e1", "c1"), ("e2", "c3"), ("x1", "c1"), ("x2", "c3"),
        ("c1", "c2"), ("c2", "c3"),
        ("c1", "tm1"), ("c2", "tm2"), ("c3", "tm3"),
        ("c1", "g1"), ("c2", "g1"), ("c2", "g2"), ("c2", "g3"), ("c2", "g4"), ("c3", "g4"),
        ("g1", "q1"), ("g2", "q1"), ("g3", "q2"), ("g4", "q2"),
        ("q1", "q2"), ("q1", "pl1"), ("q2", "pl2"),
    ]
    zones = [
        ("entrance_w", "entrance", (9, 28, 15, 30), ["e1"]),
        ("entrance_e", "entrance", (45, 28, 51, 30), ["e2"]),
        ("exit_w", "exit", (3, 28, 8, 30), ["x1"]),
        ("exit_e", "exit", (52, 28, 57, 30), ["x2"]),
        ("concourse", "concourse", (0, 19, 60, 28), ["c1", "c2", "c3"]),
        ("ticket_hall", "ticket_machines", (14, 26, 46, 28), ["tm1", "tm2", "tm3"]),
        ("gate_line", "gate_line", (20, 16, 40, 18), ["g1", "g2", "g3", "g4"]),
        ("platform_w", "platform", (2, 1, 26, 6), ["pl1"]),
        ("platform_e", "platform", (34, 1, 58, 6), ["pl2"]),
    ]
    mounts = [
        ("north_wall", 0, 30, 60, 30),
        ("south_wall", 0, 0, 60, 0),
        ("west_wall", 0, 0, 0, 30),
        ("east_wall", 60, 0, 60, 30),
        ("concourse_beam", 6, 20, 54, 20),
        ("gate_canopy", 15, 14, 45, 14),
    ]
    base = [
        camera("ent_w", 12, 30, 270),
        camera("ent_e", 48, 30, 270),
        camera("conc_w", 0, 23, 0),
        camera("gate_c", 30, 14, 90),
        camera("plat_w", 14, 0, 90),
        camera("plat_e", 46, 0, 90),
    ]
    m7 = base + [camera("conc_e", 60, 23, 180)]
    m9 = m7 + [camera("hall_n", 30, 30, 270), camera("paid_s", 24, 0, 90)]
    m11 = m9 + [camera("gate_w", 15, 14, 20), camera("gate_e", 45, 14, 160)]
    presets = [
        {"name": "Base", "cameras": base},
        {"name": "Model7", "cameras": m7},
        {"name": "Model9", "cameras": m9},
        {"name": "Model11", "cameras": m11},
    ]
    return build("default_station", (0, 0, 60, 30), nodes, edges, zones,
                 ["g1", "g2", "g3", "g4"], ["tm1", "tm2", "tm3"], mounts, presets)


def corridor():
    # A 40 m x 4 m corridor; suspects walk east towards a camera on the east end wall.
    nodes = [("x", 1, 2), ("ent", 2, 2), ("c", 8, 2), ("tm", 8, 3), ("g", 20, 2), ("pl", 38, 2)]
    edges = [("x", "ent"), ("ent", "c"), ("c", "tm"), ("c", "g"), ("g", "pl")]
    zones = [
        ("entrance", "entrance", (1.5, 1, 2.5, 3), ["ent"]),
        ("exit", "exit", (0, 1, 1.5, 3), ["x"]),
        ("hall", "concourse", (3, 0, 18, 4), ["c"]),
        ("machines", "ticket_machines", (7, 3, 9, 4), ["tm"]),
        ("gates", "gate_line", (19, 0, 21, 4), ["g"]),
        ("platform", "platform", (30, 0, 40, 4), ["pl"]),
    ]
    mounts = [("east_wall", 40, 0, 40, 4), ("north_wall", 0, 4, 40, 4)]
    presets = [{"name": "single", "cameras": [camera("end_cam", 40, 2, 160)]}]
    return build("corridor", (0, 0, 40, 4), nodes, edges, zones, ["g"], ["tm"], mounts, presets)


if __name__ == "__main__":
    ROOT.mkdir(parents=True, exist_ok=True)
    (ROOT / "default_station.json").write_text(default_station())
    (ROOT / "corridor.json").write_text(corridor())
