"""Shared fixtures and hypothesis profiles."""
import os
from datetime import timedelta

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", deadline=timedelta(milliseconds=2000), max_examples=200)
settings.register_profile("dev", max_examples=20, deadline=None)
settings.register_profile("default", deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


def arx_response(a, b, u, noise=None):
    """Brute-force monic ARX recursion, written independently of the simulator."""
    n = len(u)
    noise = np.zeros(n) if noise is None else noise
    y = np.zeros(n)
    for k in range(n):
        acc = noise[k]
        for i, ai in enumerate(a, start=1):
            if k - i >= 0:
                acc -= ai * y[k - i]
        for j, bj in enumerate(b):
            if k - j >= 0:
                acc += bj * u[k - j]
        y[k] = acc
    return y


@pytest.fixture
def first_order_data():
    """2000 samples of y(k) = 0.8 y(k-1) + 0.4 u(k) + n(k), n ~ N(0, 0.01^2)."""
    rng = np.random.default_rng(20240611)
    u = rng.standard_normal(2000)
    noise = 0.01 * rng.standard_normal(2000)
    y = arx_response([-0.8], [0.4], u, noise)
    return u, y
