"""Shared fixtures: bundled fixture paths and a session-scoped pipeline run."""

from pathlib import Path
from importlib import resources

import pytest

from urbansent import pipeline


def data_path(*parts) -> Path:
    return Path(str(resources.files("urbansent").joinpath("data", *parts)))


@pytest.fixture(scope="session")
def toy_config_path() -> Path:
    return data_path("toycity", "config.json")


@pytest.fixture(scope="session")
def synthpls_dir() -> Path:
    return data_path("synthpls")


@pytest.fixture(scope="session")
def toy_bundle(tmp_path_factory, toy_config_path):
    """One full pipeline run over the bundled toy city, shared read-only."""
    out = tmp_path_factory.mktemp("toy_bundle")
    cfg = pipeline.load_run_config(toy_config_path, overrides={"out": str(out)})
    manifest = pipeline.run_pipeline(cfg)
    return out, manifest


@pytest.fixture(scope="session")
def toy_config(toy_config_path):
    return pipeline.load_run_config(toy_config_path)
