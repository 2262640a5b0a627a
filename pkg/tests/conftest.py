"""Shared fixtures: small hand-built networks with known exact behavior."""

import numpy as np
import pytest

from actreshape import BinningSpec, Dataset, Layer, Network


@pytest.fixture
def bounds_example_net():
    """Two ReLU layers over [-1, 1]^3 whose layer-2 activation intervals work
    out to exactly [0, 14] and [0, 5]."""
    first = Layer(np.array([[1.0, 2.0, -1.0], [-1.0, 1.0, 1.0]]), np.zeros(2), "relu")
    second = Layer(np.array([[2.0, 2.0], [-1.0, 1.0]]), np.array([0.0, 2.0]), "relu")
    return Network((first, second), 3, (-1.0, 1.0))


@pytest.fixture
def identity_net():
    """Pass-through network: layer-1 activations equal the input coordinates."""
    return Network((Layer(np.eye(3), np.zeros(3), "identity"),), 3, (0.0, 5.0))


@pytest.fixture
def scalar_net():
    """One-input pass-through network over [0, 10] for single-neuron cases."""
    return Network((Layer(np.ones((1, 1)), np.zeros(1), "identity"),), 1, (0.0, 10.0))


@pytest.fixture
def signature_table(identity_net):
    """Three candidate points landing in bins (1,4,4), (2,1,2), (0,3,4)."""
    pts = np.array([[1.5, 4.5, 4.5], [2.5, 1.5, 2.5], [0.5, 3.5, 4.2]])
    return identity_net, Dataset(pts), BinningSpec(0.0, 1.0, 4)
