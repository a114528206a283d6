import numpy as np
import pytest
import yaml
from importlib import resources

from fabricgrasp import fabric as fb
from fabricgrasp.actions import reference_basis
from fabricgrasp.kinematics import load_robot_model, reference_robot


@pytest.fixture(scope="session")
def model():
    return reference_robot()


@pytest.fixture(scope="session")
def basis():
    return reference_basis()


@pytest.fixture(scope="session")
def fabric_config(model, basis):
    doc = yaml.safe_load(
        resources.files("fabricgrasp.data").joinpath("fabric.yaml").read_text()
    )
    return fb.build_fabric_config(model, doc, basis.basis, basis.mean)


PLANAR_1LINK = """
joints:
  - {name: j1, lo: -3.14, hi: 3.14, vel_limit: 2.0}
links:
  - {name: root, parent: base}
  - {name: link1, parent: root, joint: j1, axis: [0, 0, 1]}
  - {name: tip_link, parent: link1, translation: [1.0, 0.0, 0.0]}
task_frames:
  tip: tip_link
"""


@pytest.fixture(scope="session")
def planar_1link():
    return load_robot_model(PLANAR_1LINK)


def make_planar_2link():
    text = """
joints:
  - {name: j1, lo: -6.28, hi: 6.28, vel_limit: 10.0}
  - {name: j2, lo: -6.28, hi: 6.28, vel_limit: 10.0}
links:
  - {name: root, parent: base}
  - {name: link1, parent: root, joint: j1, axis: [0, 0, 1]}
  - {name: elbow, parent: link1, joint: j2, axis: [0, 0, 1], translation: [1.0, 0.0, 0.0]}
  - {name: tip_link, parent: elbow, translation: [1.0, 0.0, 0.0]}
task_frames:
  tip: tip_link
"""
    return load_robot_model(text)


@pytest.fixture(scope="session")
def planar_2link():
    return make_planar_2link()


def geometric_only_config(dof, nominal=None, dt=0.002):
    """Fabric with a single geometric posture term; huge limits so the
    accel/jerk clamps stay inactive."""
    nominal = np.zeros(dof) if nominal is None else np.asarray(nominal, dtype=float)
    return fb.FabricConfig(
        terms=(fb.PostureGeometric(weight=1.0, bend=1.0),),
        damping_gain=10.0,
        accel_limit=1e9,
        jerk_limit=1e12,
        dt=dt,
        substeps=1,
        nominal_posture=nominal,
    )
