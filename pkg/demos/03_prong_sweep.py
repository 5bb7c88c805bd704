"""How much do torso prongs help an arm-carrying quadruped?

At each torso height we optimise the foot placement without prongs, then
again with the prongs touching the ground, starting from the no-prong
optimum.  Low stances gain the most: the prongs take over the support that
crouched legs cannot give.  Near full height the prongs are barely loaded
and the two curves meet.  Takes about two minutes.
"""
from pathlib import Path

import numpy as np

from prongsuf import quadruped, sweep_height, write_sweep_csv
from prongsuf.cli.plots import emit_plot

rows = sweep_height(quadruped(), np.round(np.arange(0.25, 0.551, 0.05), 3))
for r in rows:
    print(f"b_z {r.b_z:.2f} m   prongs {r.rho_prong:7.2f} N   none {r.rho_noprong:7.2f} N   "
          f"gain {100 * (r.benefit - 1):5.1f}%   feet ({r.x_f:.3f}, {r.y_f:.3f})")

out = Path("demo-output")
out.mkdir(exist_ok=True)
write_sweep_csv(rows, out / "sweep.csv")
emit_plot(rows, "line", out / "sweep.svg")
print(f"\nwrote {out / 'sweep.csv'} and {out / 'sweep.svg'}")
