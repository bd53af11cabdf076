import os
import socket

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fougmm.covmodel import CovarianceModel

settings.register_profile("repo", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

if os.environ.get("FOUGMM_OFFLINE"):
    # any attempt to open a network connection fails the run
    def _refuse(*args, **kwargs):
        raise RuntimeError("network access attempted in an offline run")

    socket.socket.connect = _refuse
    socket.create_connection = _refuse

# pass/fail lines collected by the acceptance tests, echoed in the summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class WhiteNoiseModel(CovarianceModel):
    """rho(t) = s * 1{t == 0}; a one-parameter stub with finite memory."""

    param_names = ("s",)

    def rho(self, theta, t):
        t = np.asarray(t, dtype=float)
        return np.where(t == 0.0, float(np.atleast_1d(theta)[0]), 0.0)


class ZeroModel(CovarianceModel):
    param_names = ("s",)

    def rho(self, theta, t):
        return np.zeros_like(np.asarray(t, dtype=float))


class OuModel(CovarianceModel):
    """Classical OU: rho(t) = sigma^2 / (2 lambda) exp(-lambda t); params (lambda, sigma)."""

    param_names = ("lambda", "sigma")

    def rho(self, theta, t):
        lam, sig = np.atleast_1d(theta)
        return sig ** 2 / (2.0 * lam) * np.exp(-lam * np.asarray(t, dtype=float))


@pytest.fixture
def white_noise():
    return WhiteNoiseModel()


@pytest.fixture
def ou_model():
    return OuModel()
