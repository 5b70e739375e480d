import pytest
from hypothesis import HealthCheck, settings

from photonic_entangle.config import RunConfig, build_problem
from photonic_entangle.dynamics import integrate
from photonic_entangle.figures import fig2_config, fig4_config, fig6_config, figure_runs

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # first call compiles (or loads) the numba kernels; keep that out of timings
    integrate(build_problem(figure_runs("3")["single"], grid_points=3))
    integrate(build_problem(RunConfig.from_dict(fig2_config(0.1e-3)), grid_points=3))


@pytest.fixture
def fig3_problem():
    return build_problem(figure_runs("3")["single"])


@pytest.fixture
def fig4_base():
    return RunConfig.from_dict(fig4_config(500.0))


@pytest.fixture
def fig6_base():
    return RunConfig.from_dict(fig6_config())
