"""Shared fixtures: bundled maps and a seeded RNG."""

import json
import os

import numpy as np
import pytest

from schwarzscope import load_map

DATA = os.path.join(os.path.dirname(__file__), "..", "src", "schwarzscope",
                    "data")


def data_path(name):
    return os.path.join(DATA, name)


@pytest.fixture
def logistic():
    return load_map(data_path("logistic.json"))


@pytest.fixture
def tan_map():
    return load_map(data_path("tan_family.json"))


@pytest.fixture
def tan_partition():
    with open(data_path("tan_partition.json")) as fh:
        return json.load(fh)["endpoints"]


@pytest.fixture
def cubic_map():
    return load_map(data_path("piecewise_cubic.json"))


@pytest.fixture
def quartic_map():
    return load_map(data_path("quartic_family.json"))


@pytest.fixture
def neuro_map():
    return load_map(data_path("neuro_return_map.json"))


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)
