import time

import numpy as np
import pytest

from scarfilter.scar import scar_certificate

LAM_MODE8 = -8.312 - 8.569j
LAM_MODE1 = -1.246 - 1.214j
LAM_RMM = -0.4458 + 3.7161j

# wall time of the first (uncached) certificate construction per lambda
BUILD_SECONDS = {}


def _timed_certificate(lam):
    start = time.perf_counter()
    cert = scar_certificate(lam)
    BUILD_SECONDS.setdefault(lam, time.perf_counter() - start)
    return cert


@pytest.fixture(scope="session")
def cert_mode8():
    return _timed_certificate(LAM_MODE8)


@pytest.fixture(scope="session")
def cert_mode1():
    return _timed_certificate(LAM_MODE1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
