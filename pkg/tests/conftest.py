import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def registry():
    from cxrval.adapters.phantom import phantom_registry

    return phantom_registry()


@pytest.fixture(scope="session")
def fixture_set():
    from cxrval.phantom import fixture_studies

    return fixture_studies()


@pytest.fixture(scope="session")
def protocol_run(fixture_set, registry):
    from cxrval.evaluation import ProtocolConfig, run_protocol

    return run_protocol(fixture_set, registry, ProtocolConfig(seed=0, workers=1))
