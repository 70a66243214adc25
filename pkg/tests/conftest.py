"""Shared paths and loaders for the test suite."""

import os

import pytest

from cflkit.cli.dsl import load

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIXTURES = os.path.join(ROOT, "fixtures")
GOLDEN = os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


def golden_path(name: str) -> str:
    return os.path.join(GOLDEN, name)


@pytest.fixture(scope="session")
def hsm():
    return load(fixture_path("hsm.cfl"))


@pytest.fixture(scope="session")
def lin1():
    return load(fixture_path("lin1.cfl"))


@pytest.fixture(scope="session")
def sluis():
    return load(fixture_path("sluis.cfl"))


@pytest.fixture(scope="session")
def bc():
    return load(fixture_path("bc.cfl"))


@pytest.fixture(scope="session")
def affine():
    return load(fixture_path("affine.cfl"))


@pytest.fixture(scope="session")
def bc_sub():
    return load(fixture_path("bc_subconnection.cfl"))


@pytest.fixture(scope="session")
def so5():
    return load(fixture_path("so5.cfl"))


@pytest.fixture(scope="session")
def reduction_example():
    return load(fixture_path("reduction_example.cfl"))


@pytest.fixture(scope="session")
def recon34():
    return load(fixture_path("recon34.cfl"))
