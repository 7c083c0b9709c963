import numpy as np
import pytest

from fracstab.core import Params, getoor_constant
from fracstab.extension import TailedRadialFunction, getoor_trace
from fracstab.quad import pv_frac_lap
from fracstab.solver import EXP_NONLINEARITY, assemble, continue_branch, graded_grid


@pytest.fixture(scope="session")
def op_2_05_40():
    return assemble(Params(2, 0.5), graded_grid(40))


@pytest.fixture(scope="session")
def op_2_05_80():
    return assemble(Params(2, 0.5), graded_grid(80))


@pytest.fixture(scope="session")
def branch_2_05_40(op_2_05_40):
    return continue_branch(op_2_05_40, EXP_NONLINEARITY)


@pytest.fixture(scope="session")
def branch_2_05_80(op_2_05_80):
    return continue_branch(op_2_05_80, EXP_NONLINEARITY)


@pytest.fixture(scope="session")
def getoor_neumann_2_05():
    """Exact operator data of the true benchmark profile for (n, s) = (2, 1/2):
    the benchmark constant inside the ball, the regular exterior integral
    outside (geometrically graded into the boundary singularity), and the
    natural power tail beyond."""
    p = Params(2, 0.5)
    gc = getoor_constant(p)
    profile = lambda t: np.clip(1.0 - np.asarray(t, float) ** 2, 0.0, None) ** p.s
    outer = 1.0 + np.geomspace(1e-10, 7.0, 540)
    hout = np.array([pv_frac_lap(p, profile, float(t)) for t in outer])
    nodes = np.concatenate([[0.0, 1.0 - 1e-12], outer])
    vals = np.concatenate([[gc, gc], hout])
    return TailedRadialFunction(nodes, vals, tail_exponent=p.n + 2 * p.s)
