import numpy as np
import pytest

from flatcam3d import ExperimentConfig


@pytest.fixture(scope="session")
def small_config():
    """Tiny but fully representative geometry (N=8, M=16, K=3)."""
    return ExperimentConfig(sensor_M=16, scene_N=8, depth_K=3, scene_cards=2).resolved()


@pytest.fixture(scope="session")
def small_op(small_config):
    return small_config.build_rig_operator(n_cameras=1)


@pytest.fixture(scope="session")
def small_op_2cam(small_config):
    return small_config.build_rig_operator(n_cameras=2)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
