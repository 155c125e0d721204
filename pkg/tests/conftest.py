"""Shared fixtures: the discretized kernel family is expensive, build it once."""

from pathlib import Path

import numpy as np
import pytest

from pxda import (
    ExponentialRMeasure,
    GridSpec,
    HaarRule,
    LaplaceToyModel,
    MultiplicativeAction,
    ProbitModel,
    QrRule,
    discretized_family,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def toy_model():
    return LaplaceToyModel()


@pytest.fixture(scope="session")
def toy_action():
    return MultiplicativeAction(1)


@pytest.fixture(scope="session")
def toy_family(toy_model, toy_action):
    """Joint and kernels for the one-dimensional model on a wide fine grid.

    Keys run best kernel first: haar_pxda, pxda (with the unit-rate
    exponential group measure), da.  Shared by the ordering, idempotence,
    and constructor-identity tests; roughly half a minute to build.
    """
    grid = GridSpec(-30.0, 30.0, 1200)
    rules = {
        "haar_pxda": HaarRule(toy_action),
        "pxda": QrRule(toy_action, ExponentialRMeasure(1.0)),
        "da": None,
    }
    joint, kernels = discretized_family(toy_model, toy_action, rules, grid, grid)
    return grid, joint, kernels


@pytest.fixture(scope="session")
def probit_model():
    return ProbitModel.from_csv(DATA_DIR / "probit_n20_p2.csv")
