import numpy as np
import pytest

from prongsuf.cli.bench import sample_instance, scenario_for, scenario_model
from prongsuf.contacts import Scenario, assemble, reduce
from prongsuf.design import DesignVariables, design_model
from prongsuf.model import Joint, Link, RobotModel, RobotState
from prongsuf.robots import quadruped, single_body, standing_state


def planar_arm(l1=0.3, l2=0.3):
    """Fixed-base two-link arm in the xy plane with a tip contact."""
    links = [Link("base", 1.0), Link("upper", 1.0, [l1 / 2, 0, 0], np.eye(3) * 1e-2),
             Link("fore", 1.0, [l2 / 2, 0, 0], np.eye(3) * 1e-2)]
    joints = [Joint("shoulder", "base", "upper", [0, 0, 1], torque_limit=10.0),
              Joint("elbow", "upper", "fore", [0, 0, 1], [l1, 0, 0], torque_limit=10.0)]
    from prongsuf.model import ContactPoint
    contacts = [ContactPoint("tip", "end_effector", "fore", [l2, 0, 0])]
    return RobotModel(links, joints, contacts, floating_base=False)


@pytest.fixture(scope="session")
def fixture_reduced():
    model = single_body()
    system = assemble(model, RobotState.zero(model), Scenario(["ground"], "handle"))
    return reduce(system)


@pytest.fixture(scope="session")
def pronged_stance():
    """Default model standing at 0.45 m with prongs touching the ground."""
    variables = DesignVariables(0.3, 0.2, 0.45)
    model = design_model(quadruped(), variables)
    state = standing_state(model, height=0.45, ee_target=(0.8, 0.2, 0.4), tol=1e-10,
                           max_iter=5000)
    return model, state


def _instance(kind, seed):
    model = scenario_model(kind)
    state = sample_instance(model, kind, seed)
    system = assemble(model, state, scenario_for(kind))
    return model, state, system, reduce(system)


@pytest.fixture(scope="session")
def manipulation_instance():
    return _instance("manipulation", 7)


@pytest.fixture(scope="session")
def teleoperation_instance():
    return _instance("teleoperation", 7)


def random_state(model, rng, spread=0.5):
    lower, upper = model.joint_limits
    joints = rng.uniform(np.maximum(lower, -spread * np.pi), np.minimum(upper, spread * np.pi))
    if not model.floating_base:
        return RobotState(joints, rng.normal(size=model.nv), np.zeros(model.nv))
    quat = rng.normal(size=4)
    return RobotState.from_parts(model, rng.normal(size=3), quat / np.linalg.norm(quat), joints,
                                 qdot=rng.normal(size=model.nv))
