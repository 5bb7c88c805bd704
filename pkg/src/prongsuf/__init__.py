"""Disturbance-rejection analysis for legged robots with torso prongs.

The central quantity is the Smallest Unrejectable Force (SUF): the radius of
the largest origin-centred ball of end-effector forces that the robot can
resist in its current posture, given friction and torque limits.
"""
from .contacts import ConstraintSystem, ReducedSystem, Scenario, ScenarioError, assemble, reduce
from .design import (DesignVariables, evaluate_design, optimize_design, sweep_height,
                     write_sweep_csv)
from .geometry import (Polytope3, chebyshev_origin, fibonacci_sphere, hrep_to_vrep,
                       vrep_to_hrep)
from .hqp import HqpInfeasible, HqpSolution, TaskSet, solve_hqp
from .model import (IKError, ModelError, RobotModel, RobotState, dynamics_bias,
                    forward_kinematics, ik_transpose, mass_matrix, point_jacobian)
from .robots import fixture_suf, quadruped, single_body, standing_state
from .suf import (METHODS, DecisionRule, SufResult, compute_suf, replay_certificate, suf_affine,
                  suf_exact, suf_fibonacci, suf_quadratic, suf_single)

__version__ = "0.1.0"

__all__ = [
    "ConstraintSystem", "ReducedSystem", "Scenario", "ScenarioError", "assemble", "reduce",
    "DesignVariables", "evaluate_design", "optimize_design", "sweep_height", "write_sweep_csv",
    "Polytope3", "chebyshev_origin", "fibonacci_sphere", "hrep_to_vrep", "vrep_to_hrep",
    "HqpInfeasible", "HqpSolution", "TaskSet", "solve_hqp",
    "IKError", "ModelError", "RobotModel", "RobotState", "dynamics_bias", "forward_kinematics",
    "ik_transpose", "mass_matrix", "point_jacobian",
    "fixture_suf", "quadruped", "single_body", "standing_state",
    "METHODS", "DecisionRule", "SufResult", "compute_suf", "replay_certificate", "suf_affine",
    "suf_exact", "suf_fibonacci", "suf_quadratic", "suf_single",
]
