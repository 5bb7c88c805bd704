"""Whole-body control with and without grounded prongs.

A legged robot standing on four feet is asked for a torso acceleration.
Without prongs the controller delivers it.  With both prongs on the ground
the torso is pinned, so the torso-position layer has nothing left to move:
the hierarchy skips it and torques stay within limits however aggressive
the request.
"""
import numpy as np

from prongsuf import TaskSet, quadruped, solve_hqp, standing_state
from prongsuf.design import DesignVariables, design_model

FEET = ("LF_foot", "RF_foot", "LH_foot", "RH_foot")
PRONGS = ("prong_front", "prong_hind")
request = TaskSet(torso_linear=[0.4, 0.0, 0.2])

legs = quadruped(arm=False)
state = standing_state(legs, height=0.45, tol=1e-10, max_iter=5000)
sol = solve_hqp(legs, state, FEET, request)
print("no prongs")
print(f"  torso acceleration {np.round(sol.qddot[:3], 4)}")
print(f"  max |tau| {np.max(np.abs(sol.tau)):.2f} N m, skipped layers {sol.skipped}")

grounded = design_model(quadruped(arm=False), DesignVariables(0.3, 0.2, 0.45))
gstate = standing_state(grounded, height=0.45, tol=1e-10, max_iter=5000)
for scale in (1.0, 100.0):
    tasks = TaskSet(torso_linear=[0.4 * scale, 0.0, 0.2 * scale])
    sol = solve_hqp(grounded, gstate, FEET + PRONGS, tasks)
    print(f"prongs grounded, request x{scale:g}")
    print(f"  torso acceleration {np.round(sol.qddot[:3], 4)}")
    print(f"  max |tau| {np.max(np.abs(sol.tau)):.2f} N m, skipped layers {sol.skipped}")
    for name in PRONGS:
        print(f"  {name} force {np.round(sol.contact_force(name), 2)}")
