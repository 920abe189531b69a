"""Smoke test for the navkit Python extension.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml && pip install target/wheels/navkit-*.whl
"""

import math
import os
import tempfile

import navkit_py as nk


def main():
    grid = nk.generate_map(seed=7, density=0.1)
    assert (grid.width, grid.height) == (200, 200)
    assert abs(grid.occupied_fraction() - 0.121975) < 1e-12

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "map.grid")
        grid.save(path)
        assert nk.Grid.load(path).occupancy() == grid.occupancy()

    open_map = nk.generate_map(seed=0, density=0.0)
    sdf = nk.signed_distance(open_map)
    fmm = nk.goal_distance(open_map, (9.0, 5.0))
    # goal sits at cell (180, 100) of the bordered 10 m map
    assert fmm[100][180] == 0.0
    assert abs(fmm[100][20] - 8.0) < 0.01
    assert min(min(row) for row in sdf) < 0 < sdf[100][100]

    plan = nk.plan_waypoint(open_map, (1.0, 5.0, 0.0), (9.0, 5.0))
    assert plan is not None and plan["waypoint"][0] > 0
    assert len(plan["states"]) == len(plan["controls"]) + 1

    ep = nk.run_episode(open_map, (1.0, 5.0, 0.0), (9.0, 5.0))
    assert ep["outcome"] == "success", ep["failure"]
    end = ep["states"][-1]
    assert math.hypot(end[0] - 9.0, end[1] - 5.0) <= 0.3
    assert all(abs(y - 5.0) < 0.1 for _, y, _ in ep["states"])

    lqr = nk.run_episode(open_map, (1.0, 5.0, 0.0), (9.0, 5.0), agent="expert-lqr")
    assert lqr["outcome"] == "success"

    try:
        nk.run_episode(open_map, (1.0, 5.0, 0.0), (9.0, 5.0), config="[expert]\nlamda1 = 0.2\n")
    except ValueError as e:
        assert "lamda1" in str(e)
    else:
        raise AssertionError("unknown config key accepted")

    print(f"ok: {grid!r}; open-map episode reached the goal in {ep['time_to_goal']:.2f} s over {ep['path_length']:.2f} m")


if __name__ == "__main__":
    main()
