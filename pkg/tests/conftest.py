import time

import pytest
from hypothesis import HealthCheck, settings

from rxgame.distributions import Beta, Exponential, Pareto, ProductMeasure
from rxgame.experiments import sweep
from rxgame.solver import SolverOptions

import reference_tables

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

R = 0.3

# one representative per published table family
FAMILIES = {
    "beta23_exp1": ProductMeasure(Beta(2, 3), Exponential(1.0), R),
    "beta22_exp1": ProductMeasure(Beta(2, 2), Exponential(1.0), R),
    "beta22_pareto2": ProductMeasure(Beta(2, 2), Pareto(1.0, 2.0), R),
}

SWEEPS = {
    "table1": (FAMILIES["beta23_exp1"], "lambda", "spne", reference_tables.TABLE1),
    "table2": (FAMILIES["beta22_exp1"], "s1", "spne", reference_tables.TABLE2),
    "table3": (FAMILIES["beta22_exp1"], "s1", "dictatorial", reference_tables.TABLE3),
    "table4": (FAMILIES["beta22_pareto2"], "s2", "spne", reference_tables.TABLE4),
}


@pytest.fixture(scope="session")
def families():
    return FAMILIES


@pytest.fixture(scope="session")
def table_sweeps():
    """All four published sweeps, computed once per session with wall times."""
    out = {}
    for name, (pm, param, kind, table) in SWEEPS.items():
        start = time.perf_counter()
        rows, diags = sweep(pm, param, [row[0] for row in table], kind, SolverOptions())
        out[name] = {"rows": rows, "diags": diags, "seconds": time.perf_counter() - start,
                     "published": table, "pm": pm, "param": param, "kind": kind}
    return out


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
