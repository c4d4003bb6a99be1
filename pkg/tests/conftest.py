import numpy as np
import pytest

from mtwgeom.cost_model import builtin_cost, default_domains

# (name, params) pairs covering every built-in family; perturbed_quadratic at
# both signs since they sit on opposite sides of the condition
ALL_COSTS = [
    ("quadratic", ()),
    ("neg_log", ()),
    ("sqrt_plus", ()),
    ("power_p", (-1.0,)),
    ("power_p", (1.5,)),
    ("perturbed_quadratic", (0.2,)),
    ("perturbed_quadratic", (-0.2,)),
]
PASSING = [("quadratic", ()), ("neg_log", ()), ("sqrt_plus", ()), ("perturbed_quadratic", (-0.2,))]
VIOLATING = [("power_p", (-1.0,)), ("power_p", (1.5,)), ("perturbed_quadratic", (0.2,))]


def cost_id(v):
    name, params = v
    return name + ("" if not params else f"[{params[0]:g}]")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make(name, params=()):
    c = builtin_cost(name, params=params)
    om, om_s = default_domains(c)
    return c, om, om_s


# acceptance summary -----------------------------------------------------------

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
