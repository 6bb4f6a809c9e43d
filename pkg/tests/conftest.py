"""Shared test configuration and fixtures for hopfduet."""

import pytest

from hopfduet.nf_core import NormalFormCoefficients
from hopfduet.presets import params_p, reference_coefficients


def pytest_addoption(parser):
    """Add test filtering options."""
    parser.addoption("--unit", action="store_true", help="Run unit tests only")
    parser.addoption("--integration", action="store_true", help="Run integration tests only")


def pytest_configure(config):
    """Configure pytest markers."""
    config.addinivalue_line("markers", "integration: mark test as integration test")
    config.addinivalue_line("markers", "slow: mark test as slow")
    config.addinivalue_line("markers", "unit: mark test as unit test")

    # Handle test filtering
    if config.getoption("--unit"):
        config.option.markexpr = "not integration and not slow"
    elif config.getoption("--integration"):
        config.option.markexpr = "integration"


@pytest.fixture
def coeffs_m003():
    """Reference coefficient set at b_sp = -0.03 (case 1)."""
    return reference_coefficients("table2-bsp-m003")


@pytest.fixture
def coeffs_p003():
    """Reference coefficient set at b_sp = +0.03 (case 2)."""
    return reference_coefficients("table2-bsp-p003")


@pytest.fixture
def coeffs_0():
    """Reference coefficient set at b_sp = 0 (degenerate case 3)."""
    return reference_coefficients("table2-bsp-0")


@pytest.fixture
def generic_coeffs():
    """Coefficients with every entry nonzero and no special symmetry."""
    return NormalFormCoefficients(
        omega=1.3,
        alpha01=-1.2 + 0.4j,
        alpha_eps0=0.05 - 0.02j,
        alpha_eps1=0.3 + 0.1j,
        alpha_eps2=-0.2 + 0.5j,
        alpha_eps3=0.15 - 0.35j,
        beta_eps0=0.1 + 0.3j,
        beta_eps1=-0.4 + 0.2j,
        beta_eps2=0.25 + 0.05j,
        beta_eps3=-0.1 - 0.45j,
    )


@pytest.fixture
def wc_threshold():
    """Parameter set paperP at its Hopf threshold, uncoupled."""
    from hopfduet.wc_model import wc_hopf_lambda

    return params_p(lambda_slope=wc_hopf_lambda(params_p()))
