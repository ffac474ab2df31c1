from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semslam.landmarks import Landmark  # noqa: E402
from semslam.ontology import builtin_ontology, ontology_from_dict  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


SMALL_ONTOLOGY = {
    "name": "fixture",
    "environments": ["NonUrban", "Residential", "Commercial", "Desert"],
    "feature_classes": [
        {"name": "tree", "static": True, "similarity_group": "vegetation",
         "superclasses": [{"env": "NonUrban", "sp": 0.9}, {"env": "Residential", "sp": 0.4}]},
        {"name": "shrub", "static": True, "similarity_group": "vegetation",
         "superclasses": [{"env": "NonUrban", "sp": 0.7}]},
        {"name": "skyscraper", "static": True,
         "superclasses": [{"env": "Commercial", "sp": 1.0}]},
        {"name": "house", "static": True,
         "superclasses": [{"env": "Residential", "sp": 1.0}]},
        {"name": "cactus", "static": True,
         "superclasses": [{"env": "Desert", "sp": 1.0}]},
        {"name": "car", "static": False, "similarity_group": "vehicle",
         "superclasses": [{"env": "Commercial", "sp": 0.3}, {"env": "Residential", "sp": 0.3}]},
        {"name": "sedan", "static": False, "similarity_group": "vehicle",
         "superclasses": [{"env": "Commercial", "sp": 0.3}]},
        {"name": "hatchback", "static": False, "similarity_group": "vehicle",
         "superclasses": [{"env": "Residential", "sp": 0.3}]},
    ],
}


@pytest.fixture(scope="session")
def small_onto():
    return ontology_from_dict(SMALL_ONTOLOGY)


@pytest.fixture(scope="session")
def exclusive():
    return builtin_ontology("exclusive")


@pytest.fixture(scope="session")
def canberra():
    return builtin_ontology("canberra")


def make_lm(i, cls, x, y, conf=1.0, tx=None, ty=None, **kw):
    return Landmark(id=i, cls=cls, confidence=conf, x=x, y=y,
                    true_x=x if tx is None else tx, true_y=y if ty is None else ty, **kw)


def exclusive_class(onto, env):
    """First class whose only superclass is ``env``."""
    for f in onto.feature_classes:
        if {e for (c, e) in onto.relations if c == f} == {env} and onto.is_static(f):
            return f
    raise LookupError(env)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
