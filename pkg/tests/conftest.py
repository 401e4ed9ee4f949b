import math

import pytest
from hypothesis import settings

from fwpf.config import load_config
from fwpf.controller import Gains
from fwpf.dynamics import AeroParams

settings.register_profile("fwpf", deadline=None, max_examples=200)
settings.load_profile("fwpf")

DEG = math.pi / 180.0

# polar tuned so 6 deg is both the L/D optimum and the trim AoA
REF_AERO = AeroParams(
    mass=3.0,
    inertia_y=1.0,
    gravity=9.81,
    c_bar=0.005,
    cl0=0.0,
    cl_alpha=9.068818949059397,
    cd0=0.04,
    k_induced=0.04435078304535014,
)
REF_GAINS = Gains()


@pytest.fixture(scope="session")
def nominal_config():
    return load_config("paper_nominal")
