"""A single rigid body on the ground, held at its centre of mass.

The body weighs 98.1 N and rests on one frictional point contact (mu = 0.5).
Pushing it sideways is resisted only by friction, pushing it down is always
fine, and pulling it up is fine until it lifts off.  The worst direction
mixes a sideways push with a small lift, and every method should find it.
"""
import numpy as np

from prongsuf import (RobotState, Scenario, assemble, compute_suf, fixture_suf, reduce,
                      single_body, suf_single)

model = single_body()
system = assemble(model, RobotState.zero(model), Scenario(["ground"], "handle"))
reduced = reduce(system)
print(f"reduced system: {len(reduced.b)} rows over (F, dQ) with {reduced.n_free} free recourse dims")
print(f"hand-derived SUF: {fixture_suf():.4f} N\n")

for label, d in [("up", (0, 0, 1)), ("sideways", (1, 0, 0)), ("down", (0, 0, -1))]:
    res = suf_single(reduced, d)
    print(f"largest force {label:9s} {res.rho:10.4f} N  ({res.status})")

k = np.sqrt(2) / 2 * 0.5
worst = np.array([1.0, 0.0, k]) / np.hypot(1.0, k)
print(f"largest force along the worst direction {suf_single(reduced, worst).rho:.4f} N\n")

for method in ("exact", "fibonacci", "affine", "quadratic"):
    res = compute_suf(reduced, method)
    print(f"{method:10s} rho = {res.rho:.6f} N   {1e3 * res.wall_time:7.2f} ms")
