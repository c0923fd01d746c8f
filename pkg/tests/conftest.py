import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from swingbus.case import Branch, Bus, Generator, Load, PowerSystemCase
from swingbus.case import load_bundled


@pytest.fixture(scope="session")
def ieee39():
    return load_bundled("ieee39")


def make_two_bus(p_load=0.0, q_load=0.0, x=0.1):
    """Slack generator, one reactive line, one PQ load."""
    return PowerSystemCase(
        name="two-bus",
        buses=[Bus(id=1, type="Slack"), Bus(id=2, type="PQ")],
        branches=[Branch(from_bus=1, to_bus=2, r=0.0, x=x)],
        generators=[Generator(bus=1, p=0.0, v=1.0, slack=True,
                              qmin=-9.9, qmax=9.9, pmax=99.0)],
        loads=[Load(bus=2, p=p_load, q=q_load,
                    pmin=0.0, pmax=max(2 * p_load, 1.0),
                    qmin=min(0.0, 2 * q_load), qmax=max(2 * q_load, 1.0))],
    )


def make_smib(p_gen=0.9, x_line=0.4, h=3.5, xdp=0.3, damping=0.0):
    """Single machine tied to a near-infinite bus through two parallel lines."""
    return PowerSystemCase(
        name="smib",
        buses=[Bus(id=1, type="PV"), Bus(id=2, type="Slack")],
        branches=[
            Branch(from_bus=1, to_bus=2, r=0.0, x=x_line, circuit=1),
            Branch(from_bus=1, to_bus=2, r=0.0, x=x_line, circuit=2),
        ],
        generators=[
            Generator(bus=1, p=p_gen, v=1.0, qmin=-9.9, qmax=9.9,
                      pmax=10.0, h=h, d=damping, xdp=xdp),
            Generator(bus=2, p=0.0, v=1.0, qmin=-99.0, qmax=99.0,
                      pmax=99.0, h=1e6, d=0.0, xdp=1e-4, slack=True),
        ],
        loads=[],
    )


@pytest.fixture
def two_bus_loaded():
    return make_two_bus(p_load=1.0, q_load=0.0)


@pytest.fixture
def two_bus_empty():
    return make_two_bus()


@pytest.fixture
def smib():
    return make_smib()
