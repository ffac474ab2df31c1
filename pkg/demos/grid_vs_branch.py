"""Grid and branch segmentation on a map with an empty quadrant.

The top-right quadrant holds no features. The grid method classifies fixed
cells, so a cell that straddles populated and empty ground labels all of it.
The branch method labels only the hulls of landmark clusters and leaves the
rest Unknown. Both results are printed as 24x24 letter maps, and the branch
result is written beside the truth as a PGM.
"""

import sys
from pathlib import Path

from semslam import TrialConfig, run_trial
from semslam.render import render_pgm

density = {"Commercial": 40, "Residential": 40, "Industrial": 40, "NonUrban": 0}
res = run_trial(TrialConfig(scenario={"preset": "quadrant", "density": density}, seed=9))


def show(title, grid):
    print(title)
    for row in grid[::-1]:  # north up
        print("  " + "".join("." if c == "Unknown" else c[0] for c in row))


show("truth", res.truth)
show("grid", res.pred_grid[0])
show("branch", res.pred_branch[0])
r = res.report
print(f"grid   IoU {r.grid_iou:.3f}  AP {r.grid_ap:.3f}")
print(f"branch IoU {r.branch_iou:.3f}  AP {r.branch_ap:.3f}")

out = Path(sys.argv[1] if len(sys.argv) > 1 else "grid_vs_branch.pgm")
out.write_bytes(render_pgm(res.truth, res.pred_branch[0]))
print(f"wrote {out}")
