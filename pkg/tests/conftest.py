import time

import pytest
from hypothesis import settings

from pararealpinn.model import MarketParams
from pararealpinn.pinn import TrainConfig, generate_collocation, init_kaiming, train

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

DESK_LAYERS = [2, 50, 50, 50, 1]
DESK_PHASES = ((2000, 1e-2), (500, 1e-3))


@pytest.fixture(scope="session")
def desk_pinn():
    """Desk-scale physics-informed network, trained once per session.

    Returns (net, report, seconds).
    """
    params = MarketParams()
    colloc = generate_collocation(params, n_f=20_000, n_b=2_000, n_exp=2_000, seed=0)
    net = init_kaiming(DESK_LAYERS, seed=0)
    t0 = time.perf_counter()
    trained, report = train(net, colloc, TrainConfig(phases=DESK_PHASES, seed=0), params)
    return trained, report, time.perf_counter() - t0


ACCEPTANCE_LINES = {}


def record_criterion(number: int, title: str, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
