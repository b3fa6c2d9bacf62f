import math

import numpy as np
import pytest

import rotakde as rk


@pytest.fixture(scope="session")
def kernel1():
    return rk.build_kernel(1)


@pytest.fixture(scope="session")
def kernel2():
    return rk.build_kernel(2)


@pytest.fixture(scope="session")
def gauss_model():
    g = rk.gaussian_marginal(1.0)
    return rk.make_model(g, g, rk.rotation_from_angle(math.radians(30.0)),
                         2.0, 1.0)


@pytest.fixture(scope="session")
def perturbed_model():
    """Default experiment model: perturbed marginals, beta=2, L=1, eps=0.5,
    rotation 30 degrees."""
    marg = rk.make_perturbed_marginal(2.0, 1.0, 0.5)
    return rk.make_model(marg, marg, rk.rotation_from_angle(math.radians(30.0)),
                         2.0, 1.0)


@pytest.fixture(scope="session")
def signal_model():
    """Rotation-detection model: beta=1 admits a much larger certified
    wiggle, making the rotation identifiable at desk-scale n."""
    marg = rk.make_perturbed_marginal(1.0, 1.0, 0.9)
    return rk.make_model(marg, marg, rk.rotation_from_angle(math.pi / 4),
                         1.0, 1.0)


@pytest.fixture(scope="session")
def net2():
    """Two-element net {0, 45} degrees; the signal model's rotation is the
    second member, so argmin tie-breaking works against it."""
    return rk.RotationNet.from_members(
        0.6, [rk.rotation_from_angle(0.0), rk.rotation_from_angle(math.pi / 4)])


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
