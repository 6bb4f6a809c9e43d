"""Reduction of the coupled Wilson-Cowan pair to the coupled-Hopf normal form.

Pipeline, all at the origin:

1. Taylor tensors of the real field (analytic sigmoid derivatives) pushed
   into the complex eigenbasis, so that the linear part is diagonal.
2. Homological solve for the quadratic change z = y + Q2(y) that removes
   every quadratic term.
3. Cubic terms f3 = 2 P2(y, Q2(y)) + P3(y) of the transformed field, split
   into resonant and removable monomials.
4. Change to oscillator coordinates with the symmetric/antisymmetric
   combination matrix, read-off of the normal-form coefficients, and
   splitting of the coupling dependence by probing small eps.

Eigenbasis ordering follows the monomial convention: coordinates
(y1, y2, y3, y4) = (y+, y-, conj y+, conj y-) with eigenvalues
(mu+, mu-, conj mu+, conj mu-). The in-phase eigenvector is (v+, v+), the
anti-phase one (v-, -v-).
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from hopfduet.errors import (
    DegenerateBasisError,
    DomainError,
    NotApplicableError,
    NotInHopfRegimeError,
    SmallDivisorError,
)
from hopfduet.nf_analysis import (
    bautin_estimate,
    branch_sign,
    cdet,
    classify_case,
    osc_frequency,
    s_osc,
)
from hopfduet.nf_core import NormalFormCoefficients, UnfoldingParams
from hopfduet.wc_model import WilsonCowanParams, real_taylor_tensors, wc_hopf_lambda, wc_unfolding_lambda

logger = logging.getLogger(__name__)

QUADRATIC_MONOMIALS: Tuple[Tuple[int, ...], ...] = tuple(combinations_with_replacement(range(4), 2))
CUBIC_MONOMIALS: Tuple[Tuple[int, ...], ...] = tuple(combinations_with_replacement(range(4), 3))

# Resonant cubic monomials of the first two components: two unbarred, one barred index
RESONANT_MONOMIALS: Tuple[Tuple[int, int, int], ...] = ((0, 0, 2), (0, 0, 3), (0, 1, 2), (0, 1, 3), (1, 1, 2), (1, 1, 3))

# Conjugation map on indices: y1 <-> y3, y2 <-> y4
CONJ_INDEX = (2, 3, 0, 1)

NORMALIZATIONS = ("e-component", "unit-norm")
SCHEMES = ("central", "forward")

# Symmetric/antisymmetric combination in oscillator coordinates, y = C x
_C2 = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
COMBINATION = np.block([[_C2, np.zeros((2, 2))], [np.zeros((2, 2)), _C2]])

# Names of the eps-linear coefficients in read-off order
SPLIT_NAMES = (
    "alpha_eps0",
    "beta_eps0",
    "alpha_eps1",
    "alpha_eps3",
    "beta_eps1",
    "alpha_eps2",
    "beta_eps3",
    "beta_eps2",
)


def _permutations(indices) -> int:
    counts = Counter(indices)
    total = math.factorial(len(indices))
    for n in counts.values():
        total //= math.factorial(n)
    return total


@dataclass(frozen=True)
class TaylorModel:
    """Taylor expansion of the coupled pair in the complex eigenbasis.

    `p2[k, a, b]` and `p3[k, a, b, c]` are symmetric tensors; the coefficient of
    a monomial is the tensor entry times the number of distinct index orderings.
    """

    lambda_slope: float
    eps: float
    mu: np.ndarray
    basis: np.ndarray
    basis_inv: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    diagonal_residual: float
    eigenvectors: Optional[Tuple[np.ndarray, np.ndarray]] = field(repr=False, default=None)

    @property
    def A(self) -> np.ndarray:
        return np.diag(self.mu)

    @property
    def omega(self) -> float:
        return float(np.max(np.abs(self.mu.imag)))

    def quadratic_coefficients(self) -> np.ndarray:
        """Monomial coefficients, shape (4, 10), columns in QUADRATIC_MONOMIALS order."""
        return np.array([[self.p2[(k,) + m] * _permutations(m) for m in QUADRATIC_MONOMIALS] for k in range(4)])

    def cubic_coefficients(self) -> np.ndarray:
        """Monomial coefficients, shape (4, 20), columns in CUBIC_MONOMIALS order."""
        return np.array([[self.p3[(k,) + m] * _permutations(m) for m in CUBIC_MONOMIALS] for k in range(4)])

    def conjugation_residual(self) -> float:
        """Largest violation of p[conj k, conj a, ...] = conj p[k, a, ...]."""
        perm = list(CONJ_INDEX)
        r2 = np.abs(self.p2[np.ix_(perm, perm, perm)] - np.conj(self.p2)).max()
        r3 = np.abs(self.p3[np.ix_(perm, perm, perm, perm)] - np.conj(self.p3)).max()
        return float(max(r2, r3))


@dataclass(frozen=True)
class QuadraticChange:
    """Coefficients of Q2 in z = y + Q2(y), as a symmetric tensor q2[k, a, b]."""

    q2: np.ndarray
    divisors: np.ndarray
    smallest_divisor: float
    residual: float

    def coefficients(self) -> np.ndarray:
        """Monomial coefficients q_ij, shape (4, 10)."""
        return np.array([[self.q2[(k,) + m] * _permutations(m) for m in QUADRATIC_MONOMIALS] for k in range(4)])

    def apply(self, y: np.ndarray) -> np.ndarray:
        """Q2(y) for a complex 4-vector y."""
        return np.einsum("kab,a,b->k", self.q2, y, y)

    def derivative(self, y: np.ndarray) -> np.ndarray:
        return 2.0 * np.einsum("kab,b->ka", self.q2, y)


class CubicTerms(NamedTuple):
    tensor: np.ndarray
    resonant: np.ndarray
    nonresonant: Dict[Tuple[int, Tuple[int, ...]], complex]


class OscillatorForm(NamedTuple):
    """Normal form in oscillator coordinates: 2x2 linear part and resonant cubic rows."""

    linear: np.ndarray
    resonant: np.ndarray
    symmetry_residual: float


@dataclass(frozen=True)
class ReferenceComparison:
    factor: float
    row_ratios: Dict[str, complex]
    cdet_delta: float
    eps_bautin_delta: Optional[float]
    beta_eps0_delta: complex
    same_case: bool


@dataclass(frozen=True)
class ExtractionReport:
    coefficients: NormalFormCoefficients
    eps_probe: float
    lambda_slope: float
    unfolding_lambda: float
    normalization: str
    scale: complex
    scheme: str
    residuals: float
    smallest_divisor: float
    divisor_floor: float
    extrapolation_delta: float
    symmetry_residual: float
    nonresonant_max: float
    eigenvector: Tuple[complex, complex]
    warnings: Tuple[str, ...] = ()

    def table(self) -> List[Tuple[str, float]]:
        """(name, value) rows of the coefficient table plus diagnostics."""
        rows: List[Tuple[str, float]] = []
        for key, value in self.coefficients.to_dict().items():
            rows.append((key, value))
        rows.extend(
            [
                ("eps_probe", self.eps_probe),
                ("lambda_slope", self.lambda_slope),
                ("unfolding_lambda", self.unfolding_lambda),
                ("homological_residual", self.residuals),
                ("smallest_divisor", self.smallest_divisor),
                ("extrapolation_delta", self.extrapolation_delta),
                ("symmetry_residual", self.symmetry_residual),
                ("nonresonant_max", self.nonresonant_max),
            ]
        )
        return rows


# ---------------------------------------------------------------------------
# Step 1: Taylor expansion in the eigenbasis
# ---------------------------------------------------------------------------


def _branch_eigenvector(block: np.ndarray, label: str) -> Tuple[complex, np.ndarray]:
    values, vectors = np.linalg.eig(block)
    idx = int(np.argmax(values.imag))
    mu = complex(values[idx])
    if abs(mu.imag) <= 1e-12 * max(1.0, abs(mu)):
        raise NotInHopfRegimeError(f"{label} block has real eigenvalues {values}; no oscillatory pair")
    v = vectors[:, idx]
    if abs(v[0]) <= 1e-12 * np.linalg.norm(v):
        raise DegenerateBasisError(f"{label} eigenvector has vanishing E-component")
    return mu, v / v[0]


def _normalize(v: np.ndarray, normalization: str, scale: complex) -> np.ndarray:
    if normalization == "e-component":
        return v * scale
    # unit Euclidean norm of the full 4-vector (v, +-v)
    return v / (math.sqrt(2.0) * np.linalg.norm(v)) * scale


def taylor_expand(
    p: WilsonCowanParams,
    order: int = 3,
    eps: Optional[float] = None,
    normalization: str = "unit-norm",
    scale: complex = 1.0,
) -> TaylorModel:
    """Taylor model of the coupled pair at the origin in the complex eigenbasis.

    `eps` overrides p.eps (negative values allowed for symmetric probing).
    Eigenvectors have E-component 1 times `scale` ("e-component"), or unit
    norm times `scale` ("unit-norm").
    """
    if order not in (2, 3):
        raise DomainError(f"order must be 2 or 3, got {order!r}")
    if normalization not in NORMALIZATIONS:
        raise DomainError(f"normalization must be one of {NORMALIZATIONS}, got {normalization!r}")
    scale = complex(scale)
    if not abs(scale) > 0:
        raise DomainError("normalization scale must be nonzero")
    e = p.eps if eps is None else float(eps)
    linear, quad, cubic = real_taylor_tensors(p, e)

    sym_block = linear[:2, :2] + linear[:2, 2:]
    anti_block = linear[:2, :2] - linear[:2, 2:]
    mu_plus, v_plus = _branch_eigenvector(sym_block, "in-phase")
    mu_minus, v_minus = _branch_eigenvector(anti_block, "anti-phase")
    v_plus = _normalize(v_plus, normalization, scale)
    v_minus = _normalize(v_minus, normalization, scale)

    e_plus = np.concatenate([v_plus, v_plus])
    e_minus = np.concatenate([v_minus, -v_minus])
    basis = np.column_stack([e_plus, e_minus, np.conj(e_plus), np.conj(e_minus)])
    if np.linalg.cond(basis) > 1e12:
        raise DegenerateBasisError("eigenbasis is numerically singular")
    basis_inv = np.linalg.inv(basis)
    mu = np.array([mu_plus, mu_minus, mu_plus.conjugate(), mu_minus.conjugate()])

    diag = basis_inv @ linear @ basis
    off = diag - np.diag(np.diag(diag))
    residual = float(np.abs(off).max() / max(1.0, np.abs(mu).max()))
    if residual > 1e-8:
        raise DegenerateBasisError(f"linear part not diagonal in the eigenbasis (residual {residual:.3g})")

    p2 = np.einsum("ki,imn,ma,nb->kab", basis_inv, quad, basis, basis, optimize=True)
    if order == 3:
        p3 = np.einsum("ki,imno,ma,nb,oc->kabc", basis_inv, cubic, basis, basis, basis, optimize=True)
    else:
        p3 = np.zeros((4, 4, 4, 4), dtype=complex)
    return TaylorModel(
        lambda_slope=p.lambda_slope,
        eps=e,
        mu=mu,
        basis=basis,
        basis_inv=basis_inv,
        p2=p2,
        p3=p3,
        diagonal_residual=residual,
        eigenvectors=(v_plus, v_minus),
    )


# ---------------------------------------------------------------------------
# Step 2: homological equation
# ---------------------------------------------------------------------------


def solve_homological(tm: TaylorModel, divisor_floor: float = 1e-8) -> QuadraticChange:
    """q[k, a, b] = p2[k, a, b] / (mu_a + mu_b - mu_k) for every quadratic monomial."""
    mu = tm.mu
    divisors = mu[None, :, None] + mu[None, None, :] - mu[:, None, None]
    floor = divisor_floor * tm.omega
    smallest = float(np.abs(divisors).min())
    if smallest <= floor:
        k, a, b = np.unravel_index(int(np.argmin(np.abs(divisors))), divisors.shape)
        index = (int(k), int(min(a, b)), int(max(a, b)))
        raise SmallDivisorError(f"homological divisor {smallest:.3g} at (k, i, j) = {index} below floor {floor:.3g}", index)
    q2 = tm.p2 / divisors
    residual = float(np.abs(divisors * q2 - tm.p2).max())
    logger.debug("homological solve: smallest divisor %.6g, residual %.3g", smallest, residual)
    return QuadraticChange(q2=q2, divisors=divisors, smallest_divisor=smallest, residual=residual)


# ---------------------------------------------------------------------------
# Step 3: cubic terms
# ---------------------------------------------------------------------------


def _cubic_tensor(tm: TaylorModel, qc: QuadraticChange) -> np.ndarray:
    raw = 2.0 * np.einsum("kab,acd->kbcd", tm.p2, qc.q2)
    sym = (raw + np.transpose(raw, (0, 2, 1, 3)) + np.transpose(raw, (0, 3, 2, 1))) / 3.0
    return sym + tm.p3


def compute_f3(tm: TaylorModel, qc: QuadraticChange) -> CubicTerms:
    """Cubic part of the field after the quadratic change.

    `resonant` has shape (2, 6): the first two components, columns in
    RESONANT_MONOMIALS order. Removable monomials of those components are
    returned separately and never enter the normal form.
    """
    tensor = _cubic_tensor(tm, qc)
    resonant = np.array([[tensor[(k,) + m] * _permutations(m) for m in RESONANT_MONOMIALS] for k in range(2)])
    nonresonant = {
        (k, m): complex(tensor[(k,) + m] * _permutations(m))
        for k in range(2)
        for m in CUBIC_MONOMIALS
        if m not in RESONANT_MONOMIALS
    }
    return CubicTerms(tensor=tensor, resonant=resonant, nonresonant=nonresonant)


def composed_field(tm: TaylorModel, qc: QuadraticChange, y: np.ndarray) -> np.ndarray:
    """Truncated field pushed through z = y + Q2(y), evaluated at y.

    dy/dt = (I + DQ2(y))^-1 (A z + P2(z) + P3(z)) with z = y + Q2(y).
    """
    y = np.asarray(y, dtype=complex)
    z = y + qc.apply(y)
    rhs = tm.mu * z + np.einsum("kab,a,b->k", tm.p2, z, z) + np.einsum("kabc,a,b,c->k", tm.p3, z, z, z)
    return np.linalg.solve(np.eye(4) + qc.derivative(y), rhs)


# ---------------------------------------------------------------------------
# Step 4: oscillator coordinates and eps-splitting
# ---------------------------------------------------------------------------


def to_normal_form(tm: TaylorModel, f3: CubicTerms) -> OscillatorForm:
    """Apply y = C x and read the x1 equation; the x2 equation is its swap image."""
    c_inv = np.linalg.inv(COMBINATION)
    linear = (c_inv @ np.diag(tm.mu) @ COMBINATION)[:2, :2]
    cubic = np.einsum("ki,imno,mb,nc,od->kbcd", c_inv, f3.tensor, COMBINATION, COMBINATION, COMBINATION, optimize=True)
    resonant = np.array([[cubic[(k,) + m] * _permutations(m) for m in RESONANT_MONOMIALS] for k in range(2)])

    # swap x1 <-> x2 maps index (0, 1, 2, 3) -> (1, 0, 3, 2)
    swap = (1, 0, 3, 2)
    mirrored = np.array([cubic[(1,) + tuple(sorted(swap[i] for i in m))] * _permutations(m) for m in RESONANT_MONOMIALS])
    sym_residual = float(
        max(np.abs(resonant[0] - mirrored).max(), abs(linear[0, 0] - linear[1, 1]), abs(linear[0, 1] - linear[1, 0]))
    )
    return OscillatorForm(linear=linear, resonant=resonant, symmetry_residual=sym_residual)


def _raw_vector(form: OscillatorForm) -> np.ndarray:
    """[L00, L01, m002, m003, m012, m013, m112, m113] of the x1 equation."""
    return np.concatenate([[form.linear[0, 0], form.linear[0, 1]], form.resonant[0]])


class _Probe(NamedTuple):
    raw: np.ndarray
    residual: float
    smallest_divisor: float
    symmetry_residual: float
    nonresonant_max: float
    tm: TaylorModel


def _probe(p, eps, normalization, scale, divisor_floor) -> _Probe:
    tm = taylor_expand(p, eps=eps, normalization=normalization, scale=scale)
    qc = solve_homological(tm, divisor_floor)
    f3 = compute_f3(tm, qc)
    form = to_normal_form(tm, f3)
    nonres = max((abs(v) for v in f3.nonresonant.values()), default=0.0)
    logger.debug("probe eps=%.3g: smallest divisor %.6g", eps, qc.smallest_divisor)
    return _Probe(_raw_vector(form), qc.residual, qc.smallest_divisor, form.symmetry_residual, nonres, tm)


def _coefficients_from_split(omega: float, alpha01: complex, slope: np.ndarray) -> NormalFormCoefficients:
    # raw order: L00, L01, (0,0,2), (0,0,3), (0,1,2), (0,1,3), (1,1,2), (1,1,3)
    split = {name: complex(value) for name, value in zip(SPLIT_NAMES, slope)}
    return NormalFormCoefficients(omega=omega, alpha01=alpha01, **split)


def extract_coefficients(
    p: WilsonCowanParams,
    eps_probe: float = 1e-3,
    scheme: str = "central",
    normalization: str = "unit-norm",
    scale: complex = 1.0,
    divisor_floor: float = 1e-8,
    lambda_slope: Optional[float] = None,
) -> ExtractionReport:
    """Normal-form coefficients of the coupled pair at slope `lambda_slope` (default: the Hopf threshold).

    The eps-derivative of every coefficient is estimated from probes at h and
    h/2 (central: +-h, +-h/2; forward: h, h/2 against eps = 0), combined by
    Richardson extrapolation; the extrapolation change is the error estimate.

    The eigenvectors are normalized again at every probe, so the eps-slopes of
    the cubic coefficients (and with them K_stb and eps_BT) depend on the
    convention by more than a constant |c|^2. "unit-norm" reproduces the
    reference Bautin estimates; "e-component" gives eps_BT about 0.017 lower.
    """
    if not (math.isfinite(eps_probe) and eps_probe > 0):
        raise DomainError(f"eps_probe must be positive, got {eps_probe!r}")
    if scheme not in SCHEMES:
        raise DomainError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    slope_value = wc_hopf_lambda(p) if lambda_slope is None else float(lambda_slope)
    at = p.with_(lambda_slope=slope_value, eps=0.0)

    base = _probe(at, 0.0, normalization, scale, divisor_floor)
    h = eps_probe
    if scheme == "central":
        probes = [_probe(at, e, normalization, scale, divisor_floor) for e in (h, -h, h / 2, -h / 2)]
        d_full = (probes[0].raw - probes[1].raw) / (2 * h)
        d_half = (probes[2].raw - probes[3].raw) / h
        slope = (4.0 * d_half - d_full) / 3.0
    else:
        probes = [_probe(at, e, normalization, scale, divisor_floor) for e in (h, h / 2)]
        d_full = (probes[0].raw - base.raw) / h
        d_half = (probes[1].raw - base.raw) / (h / 2)
        slope = 2.0 * d_half - d_full
    delta = float(np.abs(slope - d_half).max())

    omega = float(base.raw[0].imag)
    alpha01 = complex(base.raw[2])
    coefficients = _coefficients_from_split(omega, alpha01, slope)

    norm = float(np.abs(slope).max())
    warnings: List[str] = []
    if delta > 1e-3 * max(norm, 1e-300):
        msg = f"extrapolation delta {delta:.3g} exceeds 1e-3 of the coefficient scale {norm:.3g}"
        warnings.append(msg)
        logger.warning(msg)
    all_probes = [base] + probes
    v_plus = base.tm.eigenvectors[0]
    report = ExtractionReport(
        coefficients=coefficients,
        eps_probe=eps_probe,
        lambda_slope=slope_value,
        unfolding_lambda=wc_unfolding_lambda(at),
        normalization=normalization,
        scale=complex(scale),
        scheme=scheme,
        residuals=max(pr.residual for pr in all_probes),
        smallest_divisor=min(pr.smallest_divisor for pr in all_probes),
        divisor_floor=divisor_floor,
        extrapolation_delta=delta,
        symmetry_residual=max(pr.symmetry_residual for pr in all_probes),
        nonresonant_max=max(pr.nonresonant_max for pr in all_probes),
        eigenvector=(complex(v_plus[0]), complex(v_plus[1])),
        warnings=tuple(warnings),
    )
    logger.info("extracted coefficients at lambda_slope=%.6g (omega=%.6g)", slope_value, omega)
    return report


def cdet_sensitivity(p: WilsonCowanParams, step: float = 1e-3, **kwargs) -> float:
    """d C_det / d lambda_slope around the Hopf threshold, by central difference."""
    lam_c = wc_hopf_lambda(p)
    up = extract_coefficients(p, lambda_slope=lam_c + step, **kwargs).coefficients
    down = extract_coefficients(p, lambda_slope=lam_c - step, **kwargs).coefficients
    return (cdet(up) - cdet(down)) / (2 * step)


# ---------------------------------------------------------------------------
# Comparison and orbit guesses
# ---------------------------------------------------------------------------

CUBIC_NAMES = ("alpha01", "alpha_eps1", "alpha_eps2", "alpha_eps3", "beta_eps1", "beta_eps2", "beta_eps3")


def compare_with_reference(extracted: NormalFormCoefficients, reference: NormalFormCoefficients) -> ReferenceComparison:
    """Common positive factor between extracted and reference cubic rows, plus invariant differences."""
    ext = np.array([getattr(extracted, n) for n in CUBIC_NAMES])
    ref = np.array([getattr(reference, n) for n in CUBIC_NAMES])
    weight = float(np.sum(np.abs(ref) ** 2))
    factor = float(np.real(np.sum(np.conj(ref) * ext)) / weight) if weight > 0 else float("nan")
    ratios = {n: complex(e / r) for n, e, r in zip(CUBIC_NAMES, ext, ref) if abs(r) > 0}
    try:
        bt_delta: Optional[float] = bautin_estimate(extracted) - bautin_estimate(reference)
    except NotApplicableError:
        bt_delta = None
    return ReferenceComparison(
        factor=factor,
        row_ratios=ratios,
        cdet_delta=cdet(extracted) - cdet(reference),
        eps_bautin_delta=bt_delta,
        beta_eps0_delta=extracted.beta_eps0 - reference.beta_eps0,
        same_case=classify_case(extracted).case_label == classify_case(reference).case_label,
    )


def orbit_guess(
    p: WilsonCowanParams,
    branch: str,
    report: ExtractionReport,
) -> Tuple[np.ndarray, float]:
    """Wilson-Cowan state and period of the phase-locked branch predicted by the extracted normal form.

    The normal-form solution (r, +-r) is mapped back through the combination
    matrix, the quadratic change and the eigenbasis at p.
    """
    sign = branch_sign(branch)
    nf_params = UnfoldingParams(wc_unfolding_lambda(p.with_(eps=0.0)), p.eps)
    c = report.coefficients
    r = s_osc(nf_params, branch, c).s_osc / 2.0
    period = 2.0 * math.pi / osc_frequency(nf_params, branch, c)

    tm = taylor_expand(p, normalization=report.normalization, scale=report.scale)
    qc = solve_homological(tm, report.divisor_floor)
    x = np.array([r, sign * r, r, sign * r], dtype=complex)
    y = COMBINATION @ x
    z = y + qc.apply(y)
    state = np.real(tm.basis @ z)
    logger.debug("orbit guess (%s): r=%.6g period=%.6g", branch, r, period)
    return state, period


__all__ = [
    "CUBIC_MONOMIALS",
    "QUADRATIC_MONOMIALS",
    "RESONANT_MONOMIALS",
    "TaylorModel",
    "QuadraticChange",
    "CubicTerms",
    "OscillatorForm",
    "ExtractionReport",
    "ReferenceComparison",
    "taylor_expand",
    "solve_homological",
    "compute_f3",
    "composed_field",
    "to_normal_form",
    "extract_coefficients",
    "cdet_sensitivity",
    "compare_with_reference",
    "orbit_guess",
]
