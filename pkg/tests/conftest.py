import numpy as np
import pytest

from morphodesign.catalog import Catalog, ModuleSpec, default_catalog
from morphodesign.kinematics import Body, Joint, KinematicModel
from morphodesign.rotations import transform


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


def make_chain(joint_specs, base_pose=None, ee_offset=None):
    """Hand-built serial chain for kinematics/dynamics tests.

    ``joint_specs`` is a list of dicts with keys: axis, offset (translation
    from the previous joint frame), mass, com, inertia, plus optional bounds.
    The EE frame sits at ``ee_offset`` from the last joint frame.
    """
    joints = []
    bodies = {-1: Body()}
    for i, spec in enumerate(joint_specs):
        T = transform(p=spec.get("offset", np.zeros(3)))
        joints.append(Joint(parent=i - 1, T_parent=T,
                            axis=np.asarray(spec["axis"], dtype=float),
                            module_id=100 + i, branch="main",
                            torque_limit=spec.get("torque_limit", 1e6),
                            q_bound=spec.get("q_bound", (-np.pi, np.pi)),
                            qd_bound=spec.get("qd_bound", (-10.0, 10.0)),
                            qdd_bound=spec.get("qdd_bound", (-50.0, 50.0))))
        bodies[i] = Body(spec.get("mass", 0.0),
                         np.asarray(spec.get("com", np.zeros(3)), dtype=float),
                         np.asarray(spec.get("inertia", np.zeros((3, 3))), dtype=float))
    last = len(joints) - 1
    ee_T = transform(p=ee_offset if ee_offset is not None else np.zeros(3))
    return KinematicModel(base_pose if base_pose is not None else np.eye(4),
                          joints, bodies, [], ee_joint=last, ee_T_local=ee_T,
                          main_joints=list(range(len(joints))), assist_joints=[],
                          adjacent_pairs=set())


def pendulum(mass=1.5, length=0.7):
    """1R pendulum matching the textbook sign: G = m g l cos(q)."""
    return make_chain([
        {"axis": [0.0, -1.0, 0.0], "mass": mass, "com": [length, 0.0, 0.0],
         "inertia": np.zeros((3, 3))},
    ], ee_offset=np.array([length, 0.0, 0.0]))


def random_serial_model(rng, n_joints=None):
    """Random serial chain with mixed axes and plausible bodies."""
    n = n_joints or int(rng.integers(2, 7))
    specs = []
    for _ in range(n):
        axis = np.zeros(3)
        axis[int(rng.integers(0, 3))] = 1.0
        if rng.random() < 0.5:
            axis = -axis
        specs.append({
            "axis": axis,
            "offset": rng.uniform(-0.1, 0.4, size=3),
            "mass": float(rng.uniform(0.5, 4.0)),
            "com": rng.uniform(-0.2, 0.3, size=3),
            "inertia": _random_spd_inertia(rng),
        })
    return make_chain(specs, ee_offset=rng.uniform(0.05, 0.3, size=3))


def _random_spd_inertia(rng):
    A = rng.uniform(-0.1, 0.1, size=(3, 3))
    return A @ A.T + 0.05 * np.eye(3)
