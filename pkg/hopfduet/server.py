#!/usr/bin/env python3
"""hopfduet tool server - closed-form coupled-Hopf analysis over the Model Context Protocol.

Provides:
- Case classification, C_det and Bautin estimate of a coefficient set
- Stability of the in-phase / anti-phase branches at (lambda, eps)
- Wilson-Cowan Hopf threshold and normal-form coefficient extraction

All responses are plain text. Tools never raise; failures come back as error strings.
"""

import json
import math
from typing import Optional

from mcp.server.fastmcp import FastMCP

from hopfduet.errors import ConfigError, HopfDuetError, error
from hopfduet.nf_analysis import BRANCHES, bautin_estimate, bistable, classify_case, k_stb, tr_det_disc
from hopfduet.nf_core import NormalFormCoefficients, UnfoldingParams
from hopfduet.nf_extract import NORMALIZATIONS, extract_coefficients
from hopfduet.presets import SET_P, reference_coefficients
from hopfduet.wc_model import WilsonCowanParams, wc_hopf_lambda, wc_period

mcp = FastMCP("hopfduet")


def _coefficients(preset: str, coefficients: str) -> NormalFormCoefficients:
    """Coefficient set from a flat JSON mapping, or from a named preset."""
    if coefficients:
        try:
            data = json.loads(coefficients)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"coefficients is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("coefficients must be a JSON object")
        return NormalFormCoefficients.from_dict({k: v for k, v in data.items() if k != "_meta"})
    return reference_coefficients(preset)


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    return "%.6g" % value


def _wc_params(b_sp: float, lambda_slope: Optional[float] = None, eps: float = 0.0) -> WilsonCowanParams:
    values = dict(SET_P, eps=eps, b_sp=b_sp)
    if lambda_slope is None:
        probe = WilsonCowanParams(lambda_slope=1.0, **values)
        lambda_slope = wc_hopf_lambda(probe)
    return WilsonCowanParams(lambda_slope=lambda_slope, **values)


@mcp.tool()
def nf_classify(preset: str = "table2-bsp-0", coefficients: str = "") -> str:
    """Classify a normal-form coefficient set.

    Args:
        preset: Reference coefficient set (table2-bsp-m003, table2-bsp-p003, table2-bsp-0)
        coefficients: Optional flat JSON object (omega, alpha01_re, alpha01_im, ...); overrides preset

    Returns:
        Plain text case label, Hopf subcase, C_det, K_stb values and Bautin estimate
    """
    try:
        c = _coefficients(preset, coefficients)
        case = classify_case(c)
        source = "inline coefficients" if coefficients else f"preset {preset}"
        lines = [f"Classification of {source}:", ""]
        lines.append(f"• Case: {case.case_label}")
        lines.append(f"• Hopf subcase: {case.hopf_subcase}")
        lines.append(f"• Sign of Re beta_eps0: {case.beta_eps0R_sign}")
        lines.append(f"• C_det: {_fmt(case.cdet)} (C_det + Re beta_eps0 {case.cdet_plus_beta_sign})")
        lines.append(f"• K_stb: plus {_fmt(k_stb('plus', c))}, minus {_fmt(k_stb('minus', c))}")
        lines.append(f"• Stability read from: trace of {case.trace_branch}, determinant of {case.det_branch}")
        return "\n".join(lines)
    except Exception as e:
        return error(str(e))


@mcp.tool()
def nf_stability(lam: float, eps: float, preset: str = "table2-bsp-0", coefficients: str = "") -> str:
    """Stability of the in-phase and anti-phase oscillating branches.

    Args:
        lam: Unfolding parameter lambda
        eps: Coupling strength (>= 0)
        preset: Reference coefficient set name
        coefficients: Optional flat JSON coefficient object; overrides preset

    Returns:
        Plain text per-branch trace, determinant, discriminant and node type, plus the bistability predicate
    """
    try:
        c = _coefficients(preset, coefficients)
        p = UnfoldingParams(lam, eps)
        lines = [f"Oscillating branches at lambda={_fmt(lam)}, eps={_fmt(eps)}:", ""]
        for branch in BRANCHES:
            try:
                r = tr_det_disc(p, branch, c)
            except HopfDuetError as exc:
                lines.append(f"• {branch}: {exc}")
                continue
            lines.append(f"• {branch}: s_osc={_fmt(r.s_osc)} {'stable' if r.stable else 'unstable'} {r.node_type}")
            lines.append(f"  tr={_fmt(r.tr)} det={_fmt(r.det)} disc={_fmt(r.disc)}")
            lines.append(f"  second order: tr={_fmt(r.tr2)} det={_fmt(r.det2)} xi={_fmt(r.xi2)}")
        lines.append("")
        lines.append(f"Bistable: {'yes' if bistable(p, c) else 'no'}")
        return "\n".join(lines)
    except Exception as e:
        return error(str(e))


@mcp.tool()
def nf_bautin(preset: str = "table2-bsp-0", coefficients: str = "") -> str:
    """Coupling at which the anti-phase Hopf bifurcation turns subcritical.

    Args:
        preset: Reference coefficient set name
        coefficients: Optional flat JSON coefficient object; overrides preset

    Returns:
        Plain text Bautin estimate eps_BT = -Re(alpha01) / K-_stb
    """
    try:
        c = _coefficients(preset, coefficients)
        return f"Bautin estimate: eps_BT = {_fmt(bautin_estimate(c))}"
    except Exception as e:
        return error(str(e))


@mcp.tool()
def wc_hopf_threshold(b_sp: float = 0.0) -> str:
    """Hopf threshold of the Wilson-Cowan oscillator with parameter set paperP.

    Args:
        b_sp: Inhibitory coupling ratio (does not move the single-oscillator threshold)

    Returns:
        Plain text threshold slope, angular frequency and period
    """
    try:
        p = _wc_params(b_sp)
        period = wc_period(p.lambda_slope, p)
        lines = ["Wilson-Cowan Hopf threshold (paperP):", ""]
        lines.append(f"• lambda_c: {_fmt(p.lambda_slope)}")
        lines.append(f"• omega: {_fmt(2 * math.pi / period)}")
        lines.append(f"• Period: {_fmt(period)}")
        return "\n".join(lines)
    except Exception as e:
        return error(str(e))


@mcp.tool()
def wc_extract(b_sp: float = 0.0, eps_probe: float = 1e-3, normalization: str = "unit-norm") -> str:
    """Extract normal-form coefficients of the coupled Wilson-Cowan pair at the Hopf threshold.

    Args:
        b_sp: Inhibitory coupling ratio
        eps_probe: Coupling step used to split the eps-dependence
        normalization: Eigenvector normalization, "e-component" or "unit-norm"

    Returns:
        Plain text coefficient table, case label and Bautin estimate
    """
    if normalization not in NORMALIZATIONS:
        return error(f"normalization must be one of {', '.join(NORMALIZATIONS)}")
    try:
        report = extract_coefficients(_wc_params(b_sp), eps_probe=eps_probe, normalization=normalization)
        c = report.coefficients
        lines = [f"Normal-form coefficients (b_sp={_fmt(b_sp)}, {normalization}):", ""]
        lines.append(f"• omega: {_fmt(c.omega)}")
        for name in ("alpha01", "alpha_eps2", "alpha_eps3", "beta_eps0", "beta_eps1", "beta_eps2", "beta_eps3"):
            value = getattr(c, name)
            lines.append(f"• {name}: {_fmt(value.real)} {'+' if value.imag >= 0 else '-'} {_fmt(abs(value.imag))}i")
        lines.append("")
        lines.append(f"Case: {classify_case(c).case_label}")
        try:
            lines.append(f"Bautin estimate: {_fmt(bautin_estimate(c))}")
        except HopfDuetError as exc:
            lines.append(f"Bautin estimate: {exc}")
        for warning in report.warnings:
            lines.append(f"Warning: {warning}")
        return "\n".join(lines)
    except Exception as e:
        return error(str(e))


def run():
    """Serve the tools over stdio."""
    mcp.run()


if __name__ == "__main__":
    mcp.run()
