import numpy as np
import pytest

from src.estimation.spec import ModelSpec
from src.panel.dataset import PanelDataset
from src.synth.generators import DgpConfig, gen_spatial, gen_twfe, torus_weights


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def twfe_data():
    cfg = DgpConfig(n=30, t=8, beta=[1.0, -0.5], sigma=0.5, seed=11)
    return gen_twfe(cfg)


@pytest.fixture
def twfe_spec():
    return ModelSpec(dependent="y", regressors=("x1", "x2"), name="twfe")


@pytest.fixture
def unbalanced_panel(twfe_data):
    panel, _ = twfe_data
    rng = np.random.default_rng(3)
    masks = {}
    for name in panel.variables:
        mask = np.array(panel.masks[name])
        if name == "x1":
            mask |= rng.random(mask.shape) < 0.08
        masks[name] = mask
    return PanelDataset(panel.entities, panel.years, dict(panel.columns), masks)


@pytest.fixture(scope="module")
def torus():
    return torus_weights(5, 5)


@pytest.fixture(scope="module")
def spatial_data():
    cfg = DgpConfig(n=36, t=8, beta=[1.0], rho=0.4, sigma=0.5, seed=5)
    return gen_spatial(cfg, torus_weights(6, 6))
