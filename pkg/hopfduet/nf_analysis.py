"""Closed-form bifurcation analysis of the coupled-Hopf normal form.

Branch "plus" is the in-phase family (dphi = 0, subspace d = 0), branch
"minus" the anti-phase family (dphi = pi). Quantities carrying a sign pair
(+/-) take the upper sign on the plus branch.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from hopfduet.errors import (
    DomainError,
    HopfDuetError,
    NotAdmissibleError,
    NotApplicableError,
    SingularChartError,
    SupercriticalityLostError,
)
from hopfduet.nf_core import NormalFormCoefficients, UnfoldingParams, f_phi

logger = logging.getLogger(__name__)

PLUS = "plus"
MINUS = "minus"
BRANCHES = (PLUS, MINUS)

CURVES = ("HB", "TR0", "DET0", "DISC0")

# |beta_eps0R| below this (relative to |beta_eps0I| + 1) counts as zero
SIGN_TOL = 1e-6
# Relative tolerance of the closed-form quadratic discriminant
ROOT_TOL = 1e-12
# |alpha_bar| below this is on the Hopf curve
ON_CURVE_TOL = 1e-12


def branch_sign(branch: str) -> int:
    if branch == PLUS:
        return 1
    if branch == MINUS:
        return -1
    raise DomainError(f"branch must be '{PLUS}' or '{MINUS}', got {branch!r}")


def branch_dphi(branch: str) -> float:
    return 0.0 if branch_sign(branch) > 0 else math.pi


@dataclass(frozen=True)
class HopfCurvePoint:
    branch: str
    lam: float
    eps: float
    alpha_bar: float


@dataclass(frozen=True)
class OscBranchPoint:
    branch: str
    s_osc: float
    lam: float
    eps: float
    K_stb: float


@dataclass(frozen=True)
class StabilityReport:
    """Trace, determinant and discriminant of the (d, dphi) block at s_osc.

    `tr`, `det`, `disc` and the eigenvalues are exact (from the block Jacobian);
    `tr2`, `det2`, `xi2` are the second-order formulas, where xi is the quarter
    discriminant (tr^2 - 4 det)/4.
    """

    branch: str
    s_osc: float
    tr: float
    det: float
    disc: float
    mu1: complex
    mu2: complex
    mu3: complex
    node_type: str
    tr2: float
    det2: float
    xi2: float
    mu2_second_order: complex
    mu3_second_order: complex

    @property
    def stable(self) -> bool:
        return self.node_type in ("stable-node", "stable-focus")


@dataclass(frozen=True)
class CaseClassification:
    beta_eps0R_sign: str
    cdet: float
    cdet_plus_beta_sign: str
    hopf_subcase: str
    case_label: str
    trace_branch: Optional[str]
    det_branch: str

    @property
    def mirrored(self) -> bool:
        return self.case_label.endswith("m")


@dataclass(frozen=True)
class BoundaryPoint:
    branch: str
    curve: str
    eps: float
    lam: float
    admissible: bool


@dataclass(frozen=True)
class InvariantObject:
    """Invariant object of the uncoupled (eps = 0) system."""

    name: str
    s: float
    d: float
    exponents: Tuple[complex, ...]
    full_exponents: Tuple[complex, ...]
    stable: bool
    description: str


class SecondOrder(NamedTuple):
    tr: float
    det: float
    xi: float
    mu2: complex
    mu3: complex


# ---------------------------------------------------------------------------
# Origin
# ---------------------------------------------------------------------------


def origin_jacobian(p: UnfoldingParams, c: NormalFormCoefficients) -> np.ndarray:
    """Linearization at the origin on (z1, conj z1, z2, conj z2)."""
    diag = p.lam + 1j * c.omega + p.eps * c.alpha_eps0
    cross = p.eps * c.beta_eps0
    return np.array(
        [
            [diag, 0, cross, 0],
            [0, np.conj(diag), 0, np.conj(cross)],
            [cross, 0, diag, 0],
            [0, np.conj(cross), 0, np.conj(diag)],
        ],
        dtype=complex,
    )


def origin_eigenvalues(p: UnfoldingParams, c: NormalFormCoefficients) -> Tuple[complex, complex, complex, complex]:
    """(mu+, conj mu+, mu-, conj mu-) with mu+- = lambda + i omega + eps (alpha_eps0 +- beta_eps0)."""
    mu_plus = p.lam + 1j * c.omega + p.eps * (c.alpha_eps0 + c.beta_eps0)
    mu_minus = p.lam + 1j * c.omega + p.eps * (c.alpha_eps0 - c.beta_eps0)
    return mu_plus, mu_plus.conjugate(), mu_minus, mu_minus.conjugate()


def alpha_bar(p: UnfoldingParams, branch: str, c: NormalFormCoefficients) -> float:
    sign = branch_sign(branch)
    return p.lam + p.eps * (c.alpha_eps0.real + sign * c.beta_eps0.real)


def hopf_curve_lambda(eps: float, branch: str, c: NormalFormCoefficients) -> float:
    """lambda on the Hopf curve of the given branch at coupling eps."""
    sign = branch_sign(branch)
    return -eps * (c.alpha_eps0.real + sign * c.beta_eps0.real)


def hopf_curve_point(eps: float, branch: str, c: NormalFormCoefficients) -> HopfCurvePoint:
    lam = hopf_curve_lambda(eps, branch, c)
    return HopfCurvePoint(branch, lam, eps, alpha_bar(UnfoldingParams(lam, eps), branch, c))


# ---------------------------------------------------------------------------
# Oscillating branches
# ---------------------------------------------------------------------------


def k_stb(branch: str, c: NormalFormCoefficients) -> float:
    """K+-_stb, the eps-correction of the cubic coefficient restricted to the branch subspace."""
    a = [v.real for v in c.alpha_eps]
    b = [v.real for v in c.beta_eps]
    return a[2] + a[1] + b[3] + branch_sign(branch) * (b[2] + b[1] + a[3])


def cdet(c: NormalFormCoefficients) -> float:
    return c.beta_eps0.imag * c.alpha01.imag / c.alpha01.real


def restricted_cubic(eps: float, branch: str, c: NormalFormCoefficients) -> float:
    """B = alpha01R + eps K_stb, the cubic coefficient (times 4) of ds/dt on the branch subspace."""
    return c.alpha01.real + eps * k_stb(branch, c)


def hopf_criticality(eps: float, branch: str, c: NormalFormCoefficients) -> str:
    b = restricted_cubic(eps, branch, c)
    if abs(b) <= ON_CURVE_TOL * max(1.0, abs(c.alpha01.real)):
        return "degenerate"
    return "supercritical" if b < 0 else "subcritical"


def s_osc(p: UnfoldingParams, branch: str, c: NormalFormCoefficients) -> OscBranchPoint:
    """Amplitude sum s of the phase-locked oscillating solution on the branch.

    On the Hopf curve itself (|alpha_bar| <= 1e-12) the branch is born with s = 0.
    """
    ab = alpha_bar(p, branch, c)
    k = k_stb(branch, c)
    denom = c.alpha01.real + p.eps * k
    if denom >= 0:
        raise SupercriticalityLostError(
            f"{branch} branch: alpha01R + eps K_stb = {denom:.6g} >= 0 (beyond the Bautin point)"
        )
    if abs(ab) <= ON_CURVE_TOL:
        return OscBranchPoint(branch, 0.0, p.lam, p.eps, k)
    if ab < 0:
        raise NotAdmissibleError(f"{branch} branch not admissible: alpha_bar = {ab:.6g} <= 0")
    return OscBranchPoint(branch, math.sqrt(-4.0 * ab / denom), p.lam, p.eps, k)


def osc_frequency(p: UnfoldingParams, branch: str, c: NormalFormCoefficients) -> float:
    """Angular frequency of the rotating-wave solution on the branch."""
    point = s_osc(p, branch, c)
    r = point.s_osc / 2.0
    if r == 0:
        return c.omega + p.eps * c.alpha_eps0.imag + branch_sign(branch) * p.eps * c.beta_eps0.imag
    return c.omega + c.alpha01.imag * r * r + p.eps / r * f_phi(r, r, branch_dphi(branch), c)


def jacobian_at_osc(p: UnfoldingParams, branch: str, c: NormalFormCoefficients) -> np.ndarray:
    """Jacobian of the reduced system on (s, d, dphi) at the branch's oscillating solution."""
    point = s_osc(p, branch, c)
    s = point.s_osc
    if s == 0:
        raise SingularChartError("Jacobian at s_osc is singular on the Hopf curve (s = 0)")
    sg = branch_sign(branch)
    lam, eps = p.lam, p.eps
    a01 = c.alpha01
    a = c.alpha_eps
    b = c.beta_eps
    c_ss = lam + eps * (a[0].real + sg * b[0].real) + 3 * s**2 / 4 * (
        a01.real + eps * (a[1].real + sg * (b[2].real + b[1].real + a[3].real) + a[2].real + b[3].real)
    )
    c_dd = lam + eps * (a[0].real - sg * b[0].real) + s**2 / 4 * (
        3 * a01.real
        + eps * (3 * (a[1].real - sg * b[2].real) + sg * (b[1].real + a[3].real) - a[2].real - b[3].real)
    )
    c_d_dphi = eps * (-(s**3) / 4 * (2 * b[3].imag + sg * (b[1].imag - a[3].imag) + sg * b[2].imag) - sg * b[0].imag * s)
    c_dphi_d = -a01.imag * s + eps * (
        s * (a[2].imag - a[1].imag + b[3].imag + sg * 2 * b[2].imag) + sg * 4 * b[0].imag / s
    )
    c_dphi_dphi = eps * (s**2 / 2 * (-sg * (b[1].real - a[3].real) - 2 * b[3].real - sg * b[2].real) - sg * 2 * b[0].real)
    return np.array(
        [
            [c_ss, 0.0, 0.0],
            [0.0, c_dd, c_d_dphi],
            [0.0, c_dphi_d, c_dphi_dphi],
        ]
    )


# ---------------------------------------------------------------------------
# Trace, determinant, discriminant
# ---------------------------------------------------------------------------


def second_order(p: UnfoldingParams, branch: str, c: NormalFormCoefficients) -> SecondOrder:
    """Second-order (in lambda, eps) trace, determinant and quarter discriminant of the (d, dphi) block."""
    sg = branch_sign(branch)
    ab = alpha_bar(p, branch, c)
    b0 = c.beta_eps0
    cd = cdet(c)
    tr = -2.0 * (p.lam + p.eps * (c.alpha_eps0.real + sg * 3.0 * b0.real))
    det = sg * 4.0 * p.eps * ab * (cd + b0.real) + 4.0 * p.eps**2 * (b0.imag**2 + b0.real**2)
    xi = ab * (ab - sg * 4.0 * p.eps * cd) - 4.0 * p.eps**2 * b0.imag**2
    root = cmath.sqrt(xi)
    return SecondOrder(tr, det, xi, tr / 2 - root, tr / 2 + root)


def degenerate_trace(p: UnfoldingParams, c: NormalFormCoefficients) -> float:
    """Leading-order trace when beta_eps0R = 0, identical on both branches."""
    return -2.0 * (p.lam + p.eps * c.alpha_eps0.real)


def node_type(tr: float, det: float, disc: float, scale: float = 1.0) -> str:
    tol = 1e-14 * max(scale, 1e-300)
    if abs(det) <= tol * scale:
        return "degenerate"
    if det < 0:
        return "saddle-1u"
    if abs(tr) <= tol:
        return "degenerate"
    if tr < 0:
        return "stable-node" if disc >= 0 else "stable-focus"
    return "saddle-2u" if disc >= 0 else "saddle-focus"


def tr_det_disc(p: UnfoldingParams, branch: str, c: NormalFormCoefficients) -> StabilityReport:
    jac = jacobian_at_osc(p, branch, c)
    block = jac[1:, 1:]
    tr = float(np.trace(block))
    det = float(np.linalg.det(block))
    disc = tr * tr - 4.0 * det
    root = cmath.sqrt(disc / 4.0)
    approx = second_order(p, branch, c)
    scale = max(abs(tr), math.sqrt(abs(det)), abs(jac[0, 0]), 1e-300)
    return StabilityReport(
        branch=branch,
        s_osc=s_osc(p, branch, c).s_osc,
        tr=tr,
        det=det,
        disc=disc,
        mu1=complex(jac[0, 0]),
        mu2=tr / 2 - root,
        mu3=tr / 2 + root,
        node_type=node_type(tr, det, disc, scale),
        tr2=approx.tr,
        det2=approx.det,
        xi2=approx.xi,
        mu2_second_order=approx.mu2,
        mu3_second_order=approx.mu3,
    )


# ---------------------------------------------------------------------------
# Case taxonomy
# ---------------------------------------------------------------------------


def _hopf_inequality(beta_r: float, cd: float, beta_i: float) -> bool:
    return beta_r < -cd + math.sqrt(cd * cd + beta_i * beta_i)


def classify_case(c: NormalFormCoefficients) -> CaseClassification:
    """Sign-table classification of the coefficient set."""
    b0 = c.beta_eps0
    cd = cdet(c)
    if abs(b0.real) < SIGN_TOL * (abs(b0.imag) + 1.0):
        beta_sign = "0"
        beta_r = 0.0
    else:
        beta_sign = "+" if b0.real > 0 else "-"
        beta_r = b0.real
    positive = cd + beta_r >= 0
    combo_sign = "+" if positive else "-"

    if beta_sign == "0":
        label = "case3" if positive else "case3m"
        return CaseClassification(beta_sign, cd, combo_sign, "not-applicable", label, None, MINUS if positive else PLUS)

    if positive:
        label = "case1" if beta_sign == "+" else "case2"
        trace_branch = MINUS if beta_sign == "+" else PLUS
        possible = _hopf_inequality(beta_r, cd, b0.imag)
        det_branch = MINUS
    else:
        label = "case1m" if beta_sign == "-" else "case2m"
        trace_branch = PLUS if beta_sign == "-" else MINUS
        possible = _hopf_inequality(-beta_r, -cd, b0.imag)
        det_branch = PLUS
    subcase = "hopf-possible" if possible else "hopf-impossible"
    return CaseClassification(beta_sign, cd, combo_sign, subcase, label, trace_branch, det_branch)


def bistable(p: UnfoldingParams, c: NormalFormCoefficients, exact: bool = False) -> bool:
    """Whether both phase-locked solutions exist and are stable at (lambda, eps).

    With exact=False the region inequalities of the case taxonomy are evaluated
    with the second-order formulas; with exact=True the exact block spectra are used.
    """
    try:
        reports = {branch: tr_det_disc(p, branch, c) for branch in BRANCHES}
    except HopfDuetError:
        return False
    if exact:
        return all(r.stable and r.mu1.real < 0 for r in reports.values())
    case = classify_case(c)
    det_report = reports[case.det_branch]
    if case.trace_branch is None:
        return det_report.det2 > 0
    return reports[case.trace_branch].tr2 < 0 and det_report.det2 > 0


# ---------------------------------------------------------------------------
# Region boundaries
# ---------------------------------------------------------------------------


def _real_roots(coeffs: Iterable[float]) -> List[float]:
    """Real roots of a polynomial of degree <= 2 (highest power first), leading zeros dropped."""
    values = [float(v) for v in coeffs]
    scale = max((abs(v) for v in values), default=0.0)
    if scale == 0:
        return []
    while values and abs(values[0]) <= ROOT_TOL * scale:
        values.pop(0)
    if len(values) <= 1:
        return []
    if len(values) == 2:
        return [-values[1] / values[0]]
    a, b, q = values
    disc = b * b - 4 * a * q
    if abs(disc) <= ROOT_TOL * max(b * b, abs(4 * a * q)):
        return [-b / (2 * a)]
    if disc < 0:
        return []
    root = math.sqrt(disc)
    # Numerically stable pair
    t = -0.5 * (b + math.copysign(root, b))
    roots = [t / a, q / t] if t != 0 else [-b / (2 * a)]
    return sorted(roots)


def _second_order_roots(eps: float, branch: str, curve: str, c: NormalFormCoefficients) -> List[float]:
    sg = branch_sign(branch)
    b0 = c.beta_eps0
    cd = cdet(c)
    shift = eps * (c.alpha_eps0.real + sg * b0.real)  # alpha_bar = lambda + shift
    if curve == "HB":
        return [-shift]
    if curve == "TR0":
        return [-eps * (c.alpha_eps0.real + sg * 3.0 * b0.real)]
    if curve == "DET0":
        slope = sg * 4.0 * eps * (cd + b0.real)
        return _real_roots([slope, slope * shift + 4.0 * eps**2 * (b0.imag**2 + b0.real**2)])
    if curve == "DISC0":
        lin = -sg * 4.0 * eps * cd
        const = -4.0 * eps**2 * b0.imag**2
        # alpha_bar^2 + lin alpha_bar + const, alpha_bar = lambda + shift
        return _real_roots([1.0, 2.0 * shift + lin, shift * shift + lin * shift + const])
    raise DomainError(f"unknown boundary curve {curve!r}")


def _exact_quantity(lam: float, eps: float, branch: str, curve: str, c: NormalFormCoefficients) -> float:
    report = tr_det_disc(UnfoldingParams(lam, eps), branch, c)
    return {"TR0": report.tr, "DET0": report.det, "DISC0": report.disc}[curve]


def _exact_roots(
    eps: float, branch: str, curve: str, c: NormalFormCoefficients, lam_span: float, samples: int
) -> List[float]:
    if curve == "HB":
        return [hopf_curve_lambda(eps, branch, c)]
    if eps == 0:
        return []
    start = hopf_curve_lambda(eps, branch, c)
    grid = start + lam_span * (np.arange(1, samples + 1) / samples) ** 2
    roots: List[float] = []
    values = []
    for lam in grid:
        try:
            values.append(_exact_quantity(float(lam), eps, branch, curve, c))
        except HopfDuetError:
            values.append(float("nan"))
    for lo, hi, f_lo, f_hi in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if not (math.isfinite(f_lo) and math.isfinite(f_hi)):
            continue
        if f_lo == 0:
            roots.append(float(lo))
        elif f_lo * f_hi < 0:
            roots.append(brentq(_exact_quantity, lo, hi, args=(eps, branch, curve, c), xtol=1e-14, rtol=1e-12))
    return roots


def region_boundaries(
    eps_values: Iterable[float],
    branch: str,
    c: NormalFormCoefficients,
    method: str = "second-order",
    lam_span: Optional[float] = None,
    samples: int = 400,
) -> List[BoundaryPoint]:
    """Sampled boundary curves HB, TR0, DET0, DISC0 in the (lambda, eps) plane.

    Output is ordered by (branch, curve, eps, lambda). `branch` may be "both".
    The exact method brackets sign changes of the exact block quantities on
    a lambda grid above the Hopf curve and refines them with brentq.
    """
    branches = BRANCHES if branch == "both" else (branch,)
    for name in branches:
        branch_sign(name)
    if method not in ("second-order", "exact"):
        raise DomainError(f"method must be 'second-order' or 'exact', got {method!r}")
    eps_sorted = sorted(float(e) for e in eps_values)
    if any(not math.isfinite(e) or e < 0 for e in eps_sorted):
        raise DomainError("eps samples must be finite and nonnegative")
    points: List[BoundaryPoint] = []
    for name in branches:
        for curve in CURVES:
            for eps in eps_sorted:
                if method == "exact":
                    span = lam_span if lam_span is not None else max(0.5 * eps, 1e-3)
                    roots = _exact_roots(eps, name, curve, c, span, samples)
                else:
                    roots = _second_order_roots(eps, name, curve, c)
                for lam in sorted(roots):
                    ab = alpha_bar(UnfoldingParams(lam, eps), name, c)
                    points.append(BoundaryPoint(name, curve, eps, lam, ab >= -ON_CURVE_TOL))
    logger.debug("region_boundaries: %d points (%s)", len(points), method)
    return points


# ---------------------------------------------------------------------------
# Bautin estimate
# ---------------------------------------------------------------------------


def bautin_estimate(c: NormalFormCoefficients) -> float:
    """Coupling at which the anti-phase Hopf curve turns subcritical, -alpha01R / K-_stb."""
    k = k_stb(MINUS, c)
    if k <= 0:
        raise NotApplicableError(f"Bautin estimate requires K-_stb > 0, got {k:.6g}")
    return -c.alpha01.real / k


# ---------------------------------------------------------------------------
# Uncoupled system
# ---------------------------------------------------------------------------


def uncoupled_sd_jacobian(s: float, d: float, lam: float, c: NormalFormCoefficients) -> np.ndarray:
    """Jacobian of the uncoupled (s, d) subsystem."""
    a = c.alpha01.real
    diag = lam + 3 * a / 4 * (s * s + d * d)
    off = a / 4 * 6 * d * s
    return np.array([[diag, off], [off, diag]])


def uncoupled_orbit_frequency(lam: float, c: NormalFormCoefficients) -> float:
    """Frequency of an uncoupled limit cycle, omega - lambda alpha01I / alpha01R."""
    return c.omega - lam * c.alpha01.imag / c.alpha01.real


def uncoupled_catalogue(lam: float, c: NormalFormCoefficients) -> List[InvariantObject]:
    """Invariant objects of the eps = 0 system with their exponents."""
    w = c.omega
    origin = InvariantObject(
        name="S0",
        s=0.0,
        d=0.0,
        exponents=(complex(lam), complex(lam)),
        full_exponents=(lam + 1j * w, lam - 1j * w, lam + 1j * w, lam - 1j * w),
        stable=lam <= 0,
        description="origin",
    )
    if lam <= 0:
        return [origin]
    a = c.alpha01.real
    torus_s = math.sqrt(-4.0 * lam / a)
    single = math.sqrt(-lam / a)
    wo = uncoupled_orbit_frequency(lam, c)
    return [
        origin,
        InvariantObject(
            name="T0",
            s=torus_s,
            d=0.0,
            exponents=(complex(-2 * lam), complex(-2 * lam)),
            full_exponents=(complex(-2 * lam), complex(-2 * lam), 0j, 0j),
            stable=True,
            description="invariant torus, both oscillators on their limit cycles",
        ),
        InvariantObject(
            name="S2",
            s=single,
            d=single,
            exponents=(complex(lam), complex(-2 * lam)),
            full_exponents=(complex(-2 * lam), lam + 1j * w, lam - 1j * w, 0j),
            stable=False,
            description=f"oscillator 1 on its limit cycle (frequency {wo:.6g}), oscillator 2 at rest",
        ),
        InvariantObject(
            name="S3",
            s=single,
            d=-single,
            exponents=(complex(lam), complex(-2 * lam)),
            full_exponents=(complex(-2 * lam), lam + 1j * w, lam - 1j * w, 0j),
            stable=False,
            description=f"oscillator 2 on its limit cycle (frequency {wo:.6g}), oscillator 1 at rest",
        ),
    ]


def summary(c: NormalFormCoefficients) -> Dict[str, object]:
    """Classification, C_det and Bautin estimate in one mapping."""
    case = classify_case(c)
    try:
        eps_bt: Optional[float] = bautin_estimate(c)
    except NotApplicableError:
        eps_bt = None
    return {
        "case_label": case.case_label,
        "hopf_subcase": case.hopf_subcase,
        "beta_eps0R_sign": case.beta_eps0R_sign,
        "cdet": case.cdet,
        "cdet_plus_beta_sign": case.cdet_plus_beta_sign,
        "trace_branch": case.trace_branch,
        "det_branch": case.det_branch,
        "K_stb_plus": k_stb(PLUS, c),
        "K_stb_minus": k_stb(MINUS, c),
        "eps_bautin": eps_bt,
    }
