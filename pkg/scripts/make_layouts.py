"""Regenerate the shipped environment layouts in ``src/posh/data``.

Narrow passage: a horizontal wall at y=15 with two 3 m openings and a block
patrolling below it. Forest: 13 seeded layouts of eight 2 m boxes scattered in a
band around the start-goal diagonal, each with a random initial velocity.

    python scripts/make_layouts.py [--out DIR]
"""

import argparse
import json
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "posh" / "data"
N_FOREST = 13


def narrow_passage(left=10.0, right=15.0, opening=3.0, block_x=13.0, block_speed=1.0,
                   patrol=(7.0, 17.0), block_y=12.5, block_half=1.5, wall_y=15.0, cell=0.1):
    h = opening / 2
    segments = [(0.0, left - h), (left + h, right - h), (right + h, 30.0)]
    obstacles = [
        {"id": i, "center": [(a + b) / 2, wall_y], "half_extents": [(b - a) / 2, 0.5]}
        for i, (a, b) in enumerate(segments)
    ]
    obstacles.append({
        "id": 3,
        "center": [block_x, block_y],
        "half_extents": [block_half, block_half],
        "velocity": [-block_speed, 0.0],
        "motion": "patrol",
    })
    return {
        "name": "narrow_passage",
        "kind": "narrow_passage",
        "workspace": {"lo": [0, 0], "hi": [30, 30]},
        "grid": {"cell_size": cell},
        "robot_radius": 0.5,
        "start": [10.0, 2.0],
        "goal": [10.0, 28.0],
        "motion": {"dt": 0.5, "patrol_bounds": list(patrol)},
        "obstacles": obstacles,
    }


def forest(seed, n_obs=8, half=1.0, band=6.0, start=(3.0, 3.0), goal=(27.0, 27.0),
           v_max=1.0, a_max=0.5, cell=0.1, clear=4.0, gap=1.5):
    rng = np.random.default_rng(seed)
    s, g = np.array(start), np.array(goal)
    length = np.linalg.norm(g - s)
    u = (g - s) / length
    normal = np.array([-u[1], u[0]])
    obstacles = []
    while len(obstacles) < n_obs:
        c = s + rng.uniform(clear, length - clear) * u + rng.uniform(-band, band) * normal
        if np.any(c < half + 0.5) or np.any(c > 30 - half - 0.5):
            continue
        if any(np.max(np.abs(c - np.array(o["center"]))) < 2 * half + gap for o in obstacles):
            continue
        ang = rng.uniform(0, 2 * np.pi)
        speed = v_max * np.sqrt(rng.uniform())
        obstacles.append({
            "id": len(obstacles),
            "center": [round(float(c[0]), 3), round(float(c[1]), 3)],
            "half_extents": [half, half],
            "velocity": [round(float(speed * np.cos(ang)), 3), round(float(speed * np.sin(ang)), 3)],
            "motion": "random",
        })
    return {
        "name": f"forest_{seed:02d}",
        "kind": "forest",
        "workspace": {"lo": [0, 0], "hi": [30, 30]},
        "grid": {"cell_size": cell},
        "robot_radius": 0.5,
        "start": list(start),
        "goal": list(goal),
        "motion": {"dt": 0.5, "a_max": a_max, "v_max": v_max},
        "obstacles": obstacles,
    }


def all_layouts():
    out = {"narrow_passage.json": narrow_passage()}
    for k in range(N_FOREST):
        out[f"forest/forest_{k:02d}.json"] = forest(k)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DATA)
    args = ap.parse_args()
    for name, layout in all_layouts().items():
        path = args.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(layout, indent=1) + "\n")
        print(path)


if __name__ == "__main__":
    main()
