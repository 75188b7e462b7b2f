"""
Stability regions over two dwell times
======================================

Sweep d1 and d2 over [0, 5] in steps of 0.1 for the three bundled systems
and write a CSV table plus an SVG picture for each.
"""

from pathlib import Path

from switchstab import load_fixture
from switchstab.region import Axis, SweepConfig, render_region, sweep

out = Path("regions")
out.mkdir(exist_ok=True)

axes = (Axis(0, 0.0, 5.0, 0.1), Axis(1, 0.0, 5.0, 0.1))

for name in ("case1", "case2", "case3"):
    grid = sweep(SweepConfig(load_fixture(name), axes, workers=4))
    csv_path, svg_path = render_region(grid, out / name, title=name)
    print(name, grid.stable.sum(), "of", grid.stable.size, "stable,", grid.marginal.sum(), "marginal")
    print("  ->", csv_path, svg_path)

# case1: long dwells help, short ones do not.
# case2: staying longer in the stable mode pulls the system into the stable set.
# case3: only a bounded island is stable, too fast or too slow both fail.
