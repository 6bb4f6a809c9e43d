"""Named parameter presets: the Wilson-Cowan set `paperP` and the reference normal-form coefficients."""

from typing import Dict

from hopfduet.errors import ConfigError
from hopfduet.nf_core import NormalFormCoefficients
from hopfduet.wc_model import WilsonCowanParams

SET_P = {"a": 7.0, "b": 5.25, "c": 5.0, "d": 0.7, "theta": 2.0, "tau": 1.0}

# Reference coefficients for the coupled pair at the Hopf threshold, keyed by b_sp
REFERENCE_COEFFICIENTS: Dict[str, NormalFormCoefficients] = {
    "table2-bsp-m003": NormalFormCoefficients(
        omega=1.073,
        alpha01=-21.94 - 20.94j,
        alpha_eps2=8.4 + 6.34j,
        alpha_eps3=-24.02 - 46.36j,
        beta_eps0=0.0047 + 0.252j,
        beta_eps1=-12.91 + 19.36j,
        beta_eps2=7.16 - 5.56j,
        beta_eps3=14.29 + 10.02j,
    ),
    "table2-bsp-p003": NormalFormCoefficients(
        omega=1.073,
        alpha01=-21.94 - 20.94j,
        alpha_eps2=9.02 + 6.8j,
        alpha_eps3=-22.3 - 44.92j,
        beta_eps0=-0.0047 + 0.241j,
        beta_eps1=-13.18 + 16.76j,
        beta_eps2=6.46 - 5.47j,
        beta_eps3=13.33 + 10.3j,
    ),
    "table2-bsp-0": NormalFormCoefficients(
        omega=1.073,
        alpha01=-21.94 - 20.94j,
        alpha_eps2=8.72 + 6.57j,
        alpha_eps3=-23.2 - 45.46j,
        beta_eps0=0.246j,
        beta_eps1=-13.05 + 18.06j,
        beta_eps2=6.52 - 5.52j,
        beta_eps3=13.81 + 10.16j,
    ),
}

REFERENCE_BY_BSP = {-0.03: "table2-bsp-m003", 0.03: "table2-bsp-p003", 0.0: "table2-bsp-0"}


def params_p(lambda_slope: float = 3.0, eps: float = 0.0, b_sp: float = 0.0, tau: float = 1.0) -> WilsonCowanParams:
    """Parameter set P with the bifurcation parameters filled in."""
    values = dict(SET_P, tau=tau)
    return WilsonCowanParams(lambda_slope=lambda_slope, eps=eps, b_sp=b_sp, **values)


def reference_coefficients(name: str) -> NormalFormCoefficients:
    try:
        return REFERENCE_COEFFICIENTS[name]
    except KeyError as exc:
        known = ", ".join(sorted(REFERENCE_COEFFICIENTS))
        raise ConfigError(f"unknown coefficient preset '{name}' (known: {known})") from exc


def reference_for_bsp(b_sp: float) -> NormalFormCoefficients:
    for key, name in REFERENCE_BY_BSP.items():
        if abs(key - b_sp) < 1e-12:
            return REFERENCE_COEFFICIENTS[name]
    raise ConfigError(f"no reference coefficients for b_sp={b_sp!r}")
