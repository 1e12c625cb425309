import math

import pytest

from shuttlekit.trajectories import Protocol, figure_params, synthesize


@pytest.fixture
def fig_params():
    """Factory for the 40Ca+ / 1.4 MHz / 280 um parameter set."""
    return figure_params


@pytest.fixture(scope="session")
def params_5t0():
    return figure_params(5.0)


@pytest.fixture(scope="session")
def quintic_5t0(params_5t0):
    return synthesize(Protocol.QUINTIC, params_5t0)


def all_protocols(params, delta_fraction=0.5):
    """Every protocol that is defined at ``params.duration``."""
    out = [synthesize(Protocol.QUINTIC, params), synthesize(Protocol.UNBOUNDED_OPTIMAL, params),
           synthesize(Protocol.ROBUST_SEPTIC, params)]
    try:
        out.append(synthesize(Protocol.BOUNDED_OPTIMAL, params))
    except ValueError:
        pass
    x = params.omega * params.duration / math.pi
    if abs(x - round(x)) < 1e-12 and round(x) % 2 == 1:
        out.append(synthesize(Protocol.BANG_BANG, params))
    return out


_CRITERIA = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None and rep.when == "call":
        _CRITERIA.append((mark.args[0], mark.args[1], rep.outcome, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    groups = {}
    for num, title, outcome, dur in _CRITERIA:
        g = groups.setdefault(num, [title, True, 0.0])
        g[1] = g[1] and outcome == "passed"
        g[2] += dur
    terminalreporter.section("acceptance criteria")
    for num in sorted(groups):
        title, ok, dur = groups[num]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {title}  ({dur:.2f} s)")
