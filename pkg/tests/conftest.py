import pytest

from i4sim.model import parse_model
from i4sim.transition import build_transition_model, default_scenario


@pytest.fixture(scope="session")
def baseline_scenario():
    return default_scenario()


@pytest.fixture(scope="session")
def baseline_model(baseline_scenario):
    return build_transition_model(baseline_scenario)


def make_model(doc_overrides=None, **kwargs):
    """Small model-document helper for engine tests."""
    import json

    doc = {
        "name": "test",
        "time": {"start": 0, "stop": 10, "dt": 1},
        "stocks": [],
        "flows": [],
        "auxiliaries": [],
        "parameters": {},
    }
    doc.update(doc_overrides or {})
    doc.update(kwargs)
    return parse_model(json.dumps(doc))
