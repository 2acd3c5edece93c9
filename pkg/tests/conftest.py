import time

import numpy as np
import pytest

from bekkvol import garch
from bekkvol.garch import BekkParameters
from bekkvol.mean import VarMeanParams

from audit import ACCEPTANCE, AUDIT


def _recording(cls, bucket):
    init = cls.__init__

    def __init__(self, *args, **kwargs):
        init(self, *args, **kwargs)
        AUDIT[bucket].append(self)

    cls.__init__ = __init__


_recording(garch.ConditionalPath, "paths")
_recording(garch.CorrelationSummary, "summaries")


def pytest_collection_modifyitems(config, items):
    # the audit has to see everything else first
    last = [i for i in items if "correlation_validity" in i.name]
    items[:] = [i for i in items if i not in last] + last


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def diag_bekk():
    return BekkParameters.diagonal([0.01, 0.01], [0.3, 0.3], [0.9, 0.9])


@pytest.fixture
def full_bekk():
    """Non-diagonal BEKK with small C and persistence close to one."""
    C = np.array([[0.002, 0.001], [0.0, 0.002]])
    A = np.array([[0.433, 0.016], [0.102, 0.358]])
    B = np.array([[0.827, 0.000], [-0.089, 0.936]])
    return BekkParameters(C, A, B)


@pytest.fixture
def zero_mean():
    return VarMeanParams.zero()


RECOVERY_REPS, RECOVERY_T = 50, 2000


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 12):
        terminalreporter.write_line(ACCEPTANCE.get(n, f"FAIL  criterion {n:2d}: no verdict recorded"))


@pytest.fixture(scope="session")
def recovery_fits():
    """Fifty Gaussian fits to data from the diagonal DGP, shared across modules.

    Returns ``(truth, [(simulation, fit), ...], seconds)``.
    """
    from bekkvol.estimation import fit_bekk
    from bekkvol.simulate import SimSpec, simulate_bekk

    truth = BekkParameters.diagonal([0.01, 0.01], [0.3, 0.3], [0.9, 0.9])
    t0 = time.perf_counter()
    out = []
    for i in range(RECOVERY_REPS):
        sim = simulate_bekk(SimSpec(VarMeanParams.zero(), truth, T=RECOVERY_T, seed=20_000 + i))
        out.append((sim, fit_bekk(sim.panel)))
    return truth, out, time.perf_counter() - t0


@pytest.fixture(scope="session")
def concordance_fits():
    """Gaussian and Student-t fits to the same Gaussian-simulated panels,
    as ``[(panel, gaussian_fit, t_fit), ...]``."""
    from bekkvol.estimation import fit_bekk
    from bekkvol.simulate import SimSpec, simulate_bekk

    truth = BekkParameters.diagonal([0.01, 0.01], [0.3, 0.3], [0.9, 0.9])
    out = []
    for i in range(10):
        panel = simulate_bekk(SimSpec(VarMeanParams.zero(), truth, T=2000, seed=30_000 + i)).panel
        out.append((panel, fit_bekk(panel), fit_bekk(panel, distribution="student_t")))
    return out
