import numpy as np
import pytest

from diffreward.envs import EnvSpec, default_prompts, make_prompt_prior
from diffreward.mixture import AnalyticBackend
from diffreward.schedule import default_schedule


@pytest.fixture(scope="session")
def sched():
    return default_schedule()


@pytest.fixture(scope="session")
def blob_spec():
    return EnvSpec()


@pytest.fixture(scope="session")
def corner_prior(blob_spec):
    return make_prompt_prior(blob_spec, default_prompts(blob_spec))


@pytest.fixture(scope="session")
def corner_backend(corner_prior, sched):
    return AnalyticBackend(corner_prior, sched)


class EchoBackend:
    """Test double whose conditional and unconditional predictions coincide."""

    def __init__(self, sched):
        self.sched = sched

    def predict_noise(self, x_noisy, t, prompt):
        ab = float(self.sched.alpha_bars[t])
        return np.asarray(x_noisy) / np.sqrt(1.0 - ab)


@pytest.fixture()
def echo_backend(sched):
    return EchoBackend(sched)
