from __future__ import annotations

import dataclasses

import pytest

from qbackbone.scenario import ScenarioConfig, default_config


@pytest.fixture
def config_factory():
    """Returns the default scenario with field overrides applied."""

    def make(**overrides) -> ScenarioConfig:
        return dataclasses.replace(default_config(), **overrides)

    return make
