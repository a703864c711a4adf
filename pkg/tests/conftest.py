import math

import numpy as np
import pytest

from noma_mimo import McConfig, PowerControl, Scenario, validate_scenario


@pytest.fixture
def sc10():
    """Two users, 20 dB gain imbalance, small array."""
    return validate_scenario(Scenario(M=10, K=2, T=200, beta_g=100.0,
                                      beta_h=1.0, prelog_mode="omit"))


@pytest.fixture
def sc100():
    return validate_scenario(Scenario(M=100, K=2, T=200, beta_g=100.0,
                                      beta_h=1.0, prelog_mode="apply"))


@pytest.fixture
def pc_half():
    return PowerControl.uniform(1, gamma_g=0.5, gamma_h=0.5)


@pytest.fixture
def mc_small():
    return McConfig(trials=2_000, base_seed=321, chunk=512)


def gamma_log2_moment(m, c, x_max=None, n=400_001):
    """Quadrature oracle: E[log2(1 + c x^2)] for x ~ Gamma(m, 1).

    Independent of the Monte-Carlo path; dense trapezoid on the closed-form
    density. Used to pin expectations of the perfect-CSI beamforming rates.
    """
    if x_max is None:
        x_max = m + 16.0 * math.sqrt(m) + 40.0
    x = np.linspace(1e-12, x_max, n)
    log_pdf = (m - 1) * np.log(x) - x - math.lgamma(m)
    return float(np.trapezoid(np.log2(1.0 + c * x * x) * np.exp(log_pdf), x))
