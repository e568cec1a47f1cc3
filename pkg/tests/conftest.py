import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from bellgap.instances import random_instance, random_linear_instance, random_mdp

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def mdps(draw, max_states=6, max_actions=3):
    seed = draw(st.integers(0, 2**32 - 1))
    S = draw(st.integers(1, max_states))
    A = draw(st.integers(1, max_actions))
    gamma = draw(st.sampled_from([0.0, 0.5, 0.9, 0.99]))
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, S, A, gamma)
    policy = rng.dirichlet(np.ones(A), size=S)
    return mdp, policy / policy.sum(1, keepdims=True), rng


@st.composite
def finite_problems(draw, realizable=None):
    seed = draw(st.integers(0, 2**32 - 1))
    real = draw(st.booleans()) if realizable is None else realizable
    return random_instance(np.random.default_rng(seed), realizable=real)


@st.composite
def linear_problems(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_linear_instance(np.random.default_rng(seed))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
