"""Five ways to compute the SUF on random quadruped postures.

For each scenario we draw a few feasible postures and compare the methods
against exact projection.  Ray shooting along one direction overestimates,
the Fibonacci inner hull and both decision-rule bounds underestimate, and
the decision rules are much cheaper than projection.
"""
import sys

import numpy as np

from prongsuf import assemble, compute_suf, reduce, replay_certificate
from prongsuf.cli.bench import sample_instance, scenario_for, scenario_model

n = int(sys.argv[1]) if len(sys.argv) > 1 else 5
methods = ("exact", "single", "fibonacci", "affine", "quadratic")

for kind in ("teleoperation", "manipulation"):
    model = scenario_model(kind)
    print(f"\n{kind}: {n} postures")
    print(f"{'seed':>4s} " + " ".join(f"{m:>10s}" for m in methods))
    times = {m: [] for m in methods}
    for seed in range(n):
        state = sample_instance(model, kind, seed)
        system = assemble(model, state, scenario_for(kind))
        reduced = reduce(system)
        res = {m: compute_suf(reduced, m) for m in methods}
        for m in methods:
            times[m].append(res[m].wall_time)
        print(f"{seed:4d} " + " ".join(f"{res[m].rho:10.2f}" for m in methods))
        # the decision rules carry a certificate we can check by sampling
        worst = replay_certificate(reduced, res["quadratic"], 500, system=system)
        assert worst < 1e-6, worst
    print("median ms " + " ".join(f"{m} {1e3 * np.median(t):.1f}" for m, t in times.items()))
