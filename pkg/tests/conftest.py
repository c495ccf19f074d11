import numpy as np
import pytest

from lyapnet import scenarios
from lyapnet.model import ActionRecord, NetworkSpec, StateSpec


@pytest.fixture
def five():
    return scenarios.by_name("five-queue-chain")


@pytest.fixture
def two():
    return scenarios.by_name("two-queue")


@pytest.fixture
def contq():
    return scenarios.by_name("single-queue-continuous")


@pytest.fixture
def discq():
    return scenarios.by_name("single-queue-discrete")


@pytest.fixture
def tiny_spec():
    """Two queues, two states, hand-checkable numbers."""
    return NetworkSpec(
        name="tiny",
        r=2,
        delta_max=2.0,
        states=[
            StateSpec(0.25, [
                ActionRecord(0.0, [0.0, 0.0], [0.0, 0.0]),
                ActionRecord(1.0, [2.0, 0.0], [0.0, 1.0]),
            ]),
            StateSpec(0.75, [
                ActionRecord(0.5, [1.0, 1.0], [1.0, 0.0]),
                ActionRecord(2.0, [0.0, 0.0], [2.0, 2.0]),
            ]),
        ],
    )


@pytest.fixture
def zero_traffic_spec():
    """One queue that never sees an arrival; every action is free."""
    return NetworkSpec(
        name="silent",
        r=1,
        delta_max=1.0,
        states=[StateSpec(1.0, [ActionRecord(0.0, [0.0], [1.0]),
                                ActionRecord(0.0, [0.0], [0.0])])],
    )
