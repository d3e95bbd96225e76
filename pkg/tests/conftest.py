import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from seqsubsidy.config import ProtocolConfig

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# small instances that solve in milliseconds but keep the fiducial economics
SMALL = ProtocolConfig(horizon_T=3, n_max=20, cost_fixed=60.0)
SMALL_OPTOUT = ProtocolConfig(horizon_T=2, n_max=30, prior_beta0=1.5)
SMALL_FLAT_COST = ProtocolConfig(horizon_T=2, n_max=25, cost_fixed=20.0, cost_per_sample=0.0)


@pytest.fixture(scope="session")
def small_cfg():
    return SMALL


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(results):
        checks = results[criterion]
        status = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        body = "; ".join(f"{label}: {'ok' if ok else 'FAIL'} ({detail})" for label, ok, detail in checks)
        terminalreporter.write_line(f"criterion {criterion}: {status} | {body}")
