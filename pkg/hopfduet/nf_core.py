"""Truncated normal form of two identical coupled oscillators near a Hopf bifurcation.

The field, for oscillator amplitudes z1, z2 and unfolding parameters (lambda, eps), is

    dz1/dt = z1 (lambda + i omega + a01 |z1|^2)
             + eps [ z1 (ae0 + ae1 |z1|^2 + ae2 |z2|^2 + ae3 conj(z2) z1)
                   + z2 (be0 + be1 |z1|^2 + be2 |z2|^2 + be3 conj(z1) z2) ]

with dz2/dt obtained by exchanging 1 and 2. This module evaluates that field in
four charts (complex Cartesian, polar, phase-difference and the reduced
(s, d, dphi) chart) and provides the maps between them. Every coupling function
is a literal transcription of its expanded form; the composed forms are kept
alongside as cross-checks.
"""

import math
from dataclasses import dataclass, fields
from typing import Dict, NamedTuple, Tuple

import numpy as np

from hopfduet.errors import DomainError, SingularChartError

TWO_PI = 2.0 * math.pi

# Relative guard of the polar/reduced charts
CHART_GUARD = 1e-9

COMPLEX_FIELDS = (
    "alpha01",
    "alpha_eps0",
    "alpha_eps1",
    "alpha_eps2",
    "alpha_eps3",
    "beta_eps0",
    "beta_eps1",
    "beta_eps2",
    "beta_eps3",
)

JSON_KEYS = ("omega",) + tuple(f"{name}_{part}" for name in COMPLEX_FIELDS for part in ("re", "im"))


@dataclass(frozen=True)
class NormalFormCoefficients:
    """All constants of the truncated normal form."""

    omega: float
    alpha01: complex
    alpha_eps0: complex = 0j
    alpha_eps1: complex = 0j
    alpha_eps2: complex = 0j
    alpha_eps3: complex = 0j
    beta_eps0: complex = 0j
    beta_eps1: complex = 0j
    beta_eps2: complex = 0j
    beta_eps3: complex = 0j

    def __post_init__(self):
        if not math.isfinite(self.omega):
            raise DomainError("omega must be finite")
        for name in COMPLEX_FIELDS:
            value = complex(getattr(self, name))
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "omega", float(self.omega))
        if self.alpha01.real >= 0:
            raise DomainError(f"Re(alpha01) must be negative (supercritical), got {self.alpha01.real!r}")

    @property
    def alpha_eps(self) -> Tuple[complex, complex, complex, complex]:
        return (self.alpha_eps0, self.alpha_eps1, self.alpha_eps2, self.alpha_eps3)

    @property
    def beta_eps(self) -> Tuple[complex, complex, complex, complex]:
        return (self.beta_eps0, self.beta_eps1, self.beta_eps2, self.beta_eps3)

    def to_dict(self) -> Dict[str, float]:
        """Flat JSON mapping with `<name>_re` / `<name>_im` keys."""
        out: Dict[str, float] = {"omega": self.omega}
        for name in COMPLEX_FIELDS:
            value = getattr(self, name)
            out[f"{name}_re"] = value.real
            out[f"{name}_im"] = value.imag
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "NormalFormCoefficients":
        """Inverse of to_dict. Missing cubic/linear coupling keys default to zero; unknown keys are rejected."""
        unknown = sorted(set(data) - set(JSON_KEYS))
        if unknown:
            raise DomainError(f"unknown coefficient keys: {', '.join(unknown)}")
        for required in ("omega", "alpha01_re", "alpha01_im"):
            if required not in data:
                raise DomainError(f"missing coefficient key: {required}")
        kwargs = {"omega": float(data["omega"])}
        for name in COMPLEX_FIELDS:
            kwargs[name] = complex(float(data.get(f"{name}_re", 0.0)), float(data.get(f"{name}_im", 0.0)))
        return cls(**kwargs)

    def rescaled(self, factor: float) -> "NormalFormCoefficients":
        """Multiply every cubic coefficient by a positive factor.

        This is how the coefficients change when the eigenvector normalization is
        rescaled by c with |c|^2 = 1/factor; linear coefficients are untouched.
        """
        if not factor > 0:
            raise DomainError("rescale factor must be positive")
        kwargs = {f.name: getattr(self, f.name) for f in fields(self)}
        for name in ("alpha01", "alpha_eps1", "alpha_eps2", "alpha_eps3", "beta_eps1", "beta_eps2", "beta_eps3"):
            kwargs[name] = kwargs[name] * factor
        return NormalFormCoefficients(**kwargs)


@dataclass(frozen=True)
class UnfoldingParams:
    """Distance from the Hopf point and coupling strength."""

    lam: float
    eps: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.lam) and math.isfinite(self.eps)):
            raise DomainError("lambda and eps must be finite")
        if self.eps < 0:
            raise DomainError(f"eps must be >= 0, got {self.eps!r}")


@dataclass(frozen=True)
class CartesianState:
    z1: complex
    z2: complex

    def __post_init__(self):
        for name in ("z1", "z2"):
            value = complex(getattr(self, name))
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class PolarState:
    r1: float
    r2: float
    phi1: float
    phi2: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.r1, self.r2, self.phi1, self.phi2)):
            raise DomainError("polar state must be finite")
        if self.r1 < 0 or self.r2 < 0:
            raise DomainError("amplitudes r1, r2 must be nonnegative")
        object.__setattr__(self, "phi1", wrap_angle(self.phi1))
        object.__setattr__(self, "phi2", wrap_angle(self.phi2))

    @property
    def dphi(self) -> float:
        return wrap_angle(self.phi2 - self.phi1)


@dataclass(frozen=True)
class ReducedState:
    s: float
    d: float
    dphi: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.s, self.d, self.dphi)):
            raise DomainError("reduced state must be finite")
        if abs(self.d) > self.s:
            raise DomainError(f"reduced state requires |d| <= s, got s={self.s!r}, d={self.d!r}")
        object.__setattr__(self, "dphi", wrap_angle(self.dphi))


class CartesianRates(NamedTuple):
    dz1: complex
    dz2: complex


class PolarRates(NamedTuple):
    dr1: float
    dr2: float
    dphi1: float
    dphi2: float


class PhaseDifferenceRates(NamedTuple):
    dr1: float
    dr2: float
    ddphi: float


class ReducedRates(NamedTuple):
    ds: float
    dd: float
    ddphi: float


def wrap_angle(angle):
    """Map an angle (or array of angles) into [0, 2 pi)."""
    wrapped = np.mod(angle, TWO_PI)
    if np.ndim(wrapped) == 0:
        value = float(wrapped)
        return 0.0 if value >= TWO_PI else value
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


# ---------------------------------------------------------------------------
# Cartesian chart
# ---------------------------------------------------------------------------


def _oscillator_field(za, zb, p: UnfoldingParams, c: NormalFormCoefficients):
    a0, a1, a2, a3 = c.alpha_eps
    b0, b1, b2, b3 = c.beta_eps
    na = za * np.conj(za)
    nb = zb * np.conj(zb)
    own = za * (p.lam + 1j * c.omega + c.alpha01 * na)
    self_terms = za * (a0 + a1 * na + a2 * nb + a3 * np.conj(zb) * za)
    cross_terms = zb * (b0 + b1 * na + b2 * nb + b3 * np.conj(za) * zb)
    coupling = self_terms + cross_terms
    return own + p.eps * coupling


def eval_nf_cartesian(state: CartesianState, p: UnfoldingParams, c: NormalFormCoefficients) -> CartesianRates:
    """Evaluate (dz1/dt, dz2/dt) of the truncated normal form."""
    return CartesianRates(
        complex(_oscillator_field(state.z1, state.z2, p, c)),
        complex(_oscillator_field(state.z2, state.z1, p, c)),
    )


def nf_real_rhs(t: float, y: np.ndarray, p: UnfoldingParams, c: NormalFormCoefficients) -> np.ndarray:
    """Cartesian field as a real 4D system on (Re z1, Im z1, Re z2, Im z2)."""
    z1 = y[0] + 1j * y[1]
    z2 = y[2] + 1j * y[3]
    f1 = _oscillator_field(z1, z2, p, c)
    f2 = _oscillator_field(z2, z1, p, c)
    return np.array([f1.real, f1.imag, f2.real, f2.imag])


def _wirtinger(za, zb, p: UnfoldingParams, c: NormalFormCoefficients):
    """Derivatives of the oscillator-a field w.r.t. (za, conj za, zb, conj zb)."""
    a0, a1, a2, a3 = c.alpha_eps
    b0, b1, b2, b3 = c.beta_eps
    na = abs(za) ** 2
    nb = abs(zb) ** 2
    cza = np.conj(za)
    czb = np.conj(zb)
    d_za = p.lam + 1j * c.omega + 2 * c.alpha01 * na + p.eps * (
        a0 + 2 * a1 * na + a2 * nb + 2 * a3 * czb * za + b1 * zb * cza
    )
    d_cza = c.alpha01 * za * za + p.eps * (a1 * za * za + b1 * zb * za + b3 * zb * zb)
    d_zb = p.eps * (a2 * za * czb + b0 + b1 * na + 2 * b2 * nb + 2 * b3 * cza * zb)
    d_czb = p.eps * (a2 * za * zb + a3 * za * za + b2 * zb * zb)
    return d_za, d_cza, d_zb, d_czb


def _real_block(d_z, d_cz) -> np.ndarray:
    # df = d_z dz + d_cz conj(dz), dz = dx + i dy
    plus = d_z + d_cz
    minus = d_z - d_cz
    return np.array([[plus.real, -minus.imag], [plus.imag, minus.real]])


def nf_real_jacobian(t: float, y: np.ndarray, p: UnfoldingParams, c: NormalFormCoefficients) -> np.ndarray:
    """Analytic Jacobian of nf_real_rhs."""
    z1 = y[0] + 1j * y[1]
    z2 = y[2] + 1j * y[3]
    jac = np.zeros((4, 4))
    d11, dc11, d12, dc12 = _wirtinger(z1, z2, p, c)
    d22, dc22, d21, dc21 = _wirtinger(z2, z1, p, c)
    jac[0:2, 0:2] = _real_block(d11, dc11)
    jac[0:2, 2:4] = _real_block(d12, dc12)
    jac[2:4, 2:4] = _real_block(d22, dc22)
    jac[2:4, 0:2] = _real_block(d21, dc21)
    return jac


# ---------------------------------------------------------------------------
# Coupling functions (polar and phase-difference charts)
# ---------------------------------------------------------------------------


def f_r(r1, r2, dphi, c: NormalFormCoefficients):
    """Radial coupling term of oscillator 1."""
    a0, a1, a2, a3 = c.alpha_eps
    b0, b1, b2, b3 = c.beta_eps
    cos1, sin1 = np.cos(dphi), np.sin(dphi)
    cos2, sin2 = np.cos(2 * dphi), np.sin(2 * dphi)
    return (
        r1**2 * r2 * ((b1.real + a3.real) * cos1 - (b1.imag - a3.imag) * sin1)
        + r2**2 * r1 * (a2.real + b3.real * cos2 - b3.imag * sin2)
        + r1 * a0.real
        + r1**3 * a1.real
        + r2**3 * (b2.real * cos1 - b2.imag * sin1)
        + r2 * (b0.real * cos1 - b0.imag * sin1)
    )


def f_phi(r1, r2, dphi, c: NormalFormCoefficients):
    """Angular coupling term of oscillator 1 (before division by r1)."""
    a0, a1, a2, a3 = c.alpha_eps
    b0, b1, b2, b3 = c.beta_eps
    cos1, sin1 = np.cos(dphi), np.sin(dphi)
    cos2, sin2 = np.cos(2 * dphi), np.sin(2 * dphi)
    return (
        r1**2 * r2 * ((b1.imag + a3.imag) * cos1 + (b1.real - a3.real) * sin1)
        + r2**2 * r1 * (a2.imag + b3.imag * cos2 + b3.real * sin2)
        + r1 * a0.imag
        + r1**3 * a1.imag
        + r2**3 * (b2.imag * cos1 + b2.real * sin1)
        + r2 * (b0.imag * cos1 + b0.real * sin1)
    )


def f_dphi_composed(r1, r2, dphi, c: NormalFormCoefficients):
    return f_phi(r2, r1, -dphi, c) / r2 - f_phi(r1, r2, dphi, c) / r1


def f_dphi(r1, r2, dphi, c: NormalFormCoefficients):
    """Coupling term of the phase-difference equation, expanded form."""
    a0, a1, a2, a3 = c.alpha_eps
    b0, b1, b2, b3 = c.beta_eps
    cos1, sin1 = np.cos(dphi), np.sin(dphi)
    cos2, sin2 = np.cos(2 * dphi), np.sin(2 * dphi)
    return (
        (r1**2 - r2**2) * (a2.imag - a1.imag + b3.imag * cos2)
        - 2 * r1 * r2 * (b1.real - a3.real) * sin1
        - (r1**2 + r2**2) * b3.real * sin2
        + (r1**3 / r2 - r2**3 / r1) * b2.imag * cos1
        - (r1**3 / r2 + r2**3 / r1) * b2.real * sin1
        + (r1 / r2 - r2 / r1) * b0.imag * cos1
        - (r1 / r2 + r2 / r1) * b0.real * sin1
    )


# ---------------------------------------------------------------------------
# Coupling functions (reduced chart)
# ---------------------------------------------------------------------------


def g_s_composed(s, d, dphi, c: NormalFormCoefficients):
    return f_r((s + d) / 2, (s - d) / 2, dphi, c) + f_r((s - d) / 2, (s + d) / 2, -dphi, c)


def g_d_composed(s, d, dphi, c: NormalFormCoefficients):
    return f_r((s + d) / 2, (s - d) / 2, dphi, c) - f_r((s - d) / 2, (s + d) / 2, -dphi, c)


def g_dphi_composed(s, d, dphi, c: NormalFormCoefficients):
    return f_dphi_composed((s + d) / 2, (s - d) / 2, dphi, c)


def g_s(s, d, dphi, c: NormalFormCoefficients):
    a0, a1, a2, a3 = c.alpha_eps
    b0, b1, b2, b3 = c.beta_eps
    cos1, sin1 = np.cos(dphi), np.sin(dphi)
    cos2, sin2 = np.cos(2 * dphi), np.sin(2 * dphi)
    return (
        s * (cos1 * b0.real + a0.real)
        + d * sin1 * b0.imag
        + s / 4 * (s**2 + 3 * d**2) * (b2.real * cos1 + a1.real)
        + s / 4 * (s**2 - d**2) * ((b1.real + a3.real) * cos1 + a2.real + b3.real * cos2)
        + d / 4 * (s**2 - d**2) * (b3.imag * sin2 - (b1.imag - a3.imag) * sin1)
        + d / 4 * (3 * s**2 + d**2) * b2.imag * sin1
    )


def g_d(s, d, dphi, c: NormalFormCoefficients):
    a0, a1, a2, a3 = c.alpha_eps
    b0, b1, b2, b3 = c.beta_eps
    cos1, sin1 = np.cos(dphi), np.sin(dphi)
    cos2, sin2 = np.cos(2 * dphi), np.sin(2 * dphi)
    return (
        -d * (cos1 * b0.real - a0.real)
        - s * sin1 * b0.imag
        - d / 4 * (d**2 + 3 * s**2) * (b2.real * cos1 - a1.real)
        + d / 4 * (s**2 - d**2) * ((b1.real + a3.real) * cos1 - a2.real - b3.real * cos2)
        - s / 4 * (s**2 - d**2) * (b3.imag * sin2 + (b1.imag - a3.imag) * sin1)
        - s / 4 * (3 * d**2 + s**2) * b2.imag * sin1
    )


def g_dphi(s, d, dphi, c: NormalFormCoefficients):
    a0, a1, a2, a3 = c.alpha_eps
    b0, b1, b2, b3 = c.beta_eps
    cos1, sin1 = np.cos(dphi), np.sin(dphi)
    cos2, sin2 = np.cos(2 * dphi), np.sin(2 * dphi)
    plus = s**2 + d**2
    minus = s**2 - d**2
    return (
        b0.imag * cos1 * (4 * s * d / minus)
        - 2 * b0.real * sin1 * (plus / minus)
        - b2.real * sin1 * (plus**2 / minus - minus / 2)
        + b2.imag * cos1 * 2 * s * d * plus / minus
        - b3.real * sin2 * plus / 2
        - (b1.real - a3.real) * sin1 * minus / 2
        + (a2.imag + b3.imag * cos2 - a1.imag) * s * d
    )


# ---------------------------------------------------------------------------
# Chart evaluations
# ---------------------------------------------------------------------------


def eval_nf_polar(state: PolarState, p: UnfoldingParams, c: NormalFormCoefficients) -> PolarRates:
    """Evaluate (dr1, dr2, dphi1, dphi2) of the polar chart (r1, r2 > 0)."""
    r1, r2 = state.r1, state.r2
    if r1 <= 0 or r2 <= 0:
        raise SingularChartError("polar chart requires r1 > 0 and r2 > 0; use the Cartesian chart")
    delta = state.phi2 - state.phi1
    a = c.alpha01
    dr1 = r1 * (p.lam + a.real * r1**2) + p.eps * f_r(r1, r2, delta, c)
    dr2 = r2 * (p.lam + a.real * r2**2) + p.eps * f_r(r2, r1, -delta, c)
    dphi1 = c.omega + a.imag * r1**2 + p.eps / r1 * f_phi(r1, r2, delta, c)
    dphi2 = c.omega + a.imag * r2**2 + p.eps / r2 * f_phi(r2, r1, -delta, c)
    return PolarRates(float(dr1), float(dr2), float(dphi1), float(dphi2))


def eval_nf_phase_difference(r1: float, r2: float, dphi: float, p: UnfoldingParams, c: NormalFormCoefficients):
    """Evaluate the 3D phase-difference system (dr1, dr2, d(dphi))."""
    if r1 <= 0 or r2 <= 0:
        raise SingularChartError("phase-difference chart requires r1 > 0 and r2 > 0")
    a = c.alpha01
    dr1 = r1 * (p.lam + a.real * r1**2) + p.eps * f_r(r1, r2, dphi, c)
    dr2 = r2 * (p.lam + a.real * r2**2) + p.eps * f_r(r2, r1, -dphi, c)
    ddphi = a.imag * (r2**2 - r1**2) + p.eps * f_dphi(r1, r2, dphi, c)
    return PhaseDifferenceRates(float(dr1), float(dr2), float(ddphi))


def _check_reduced(s, d):
    if s - abs(d) < CHART_GUARD * max(1.0, s):
        raise SingularChartError(f"reduced chart requires s > |d| (s={s!r}, d={d!r}); use the Cartesian chart")


def _reduced_field(s, d, dphi, p: UnfoldingParams, c: NormalFormCoefficients):
    a = c.alpha01
    ds = s * (p.lam + a.real / 4 * (s**2 + 3 * d**2)) + p.eps * g_s(s, d, dphi, c)
    dd = d * (p.lam + a.real / 4 * (d**2 + 3 * s**2)) + p.eps * g_d(s, d, dphi, c)
    ddphi = -a.imag * s * d + p.eps * g_dphi(s, d, dphi, c)
    return ds, dd, ddphi


def eval_nf_reduced(state: ReducedState, p: UnfoldingParams, c: NormalFormCoefficients) -> ReducedRates:
    """Evaluate (ds, dd, d(dphi)) of the reduced chart (s > |d|)."""
    _check_reduced(state.s, state.d)
    ds, dd, ddphi = _reduced_field(state.s, state.d, state.dphi, p, c)
    return ReducedRates(float(ds), float(dd), float(ddphi))


def nf_reduced_rhs(t: float, y: np.ndarray, p: UnfoldingParams, c: NormalFormCoefficients) -> np.ndarray:
    """Reduced field as a real 3D system on (s, d, dphi)."""
    _check_reduced(y[0], y[1])
    return np.array(_reduced_field(y[0], y[1], y[2], p, c), dtype=float)


# ---------------------------------------------------------------------------
# Coordinate maps
# ---------------------------------------------------------------------------


def polar_to_reduced(state: PolarState) -> ReducedState:
    return ReducedState(state.r1 + state.r2, state.r1 - state.r2, state.dphi)


def reduced_to_polar(state: ReducedState) -> Tuple[float, float, float]:
    """Return (r1, r2, dphi); the common phase is not part of the reduced chart."""
    if abs(state.d) > state.s:
        raise DomainError("reduced_to_polar requires |d| <= s")
    return (state.s + state.d) / 2, (state.s - state.d) / 2, state.dphi


def cartesian_to_polar(state: CartesianState) -> PolarState:
    phi1 = math.atan2(state.z1.imag, state.z1.real)
    phi2 = math.atan2(state.z2.imag, state.z2.real)
    return PolarState(abs(state.z1), abs(state.z2), phi1, phi2)


def polar_to_cartesian(state: PolarState) -> CartesianState:
    z1 = state.r1 * complex(math.cos(state.phi1), math.sin(state.phi1))
    z2 = state.r2 * complex(math.cos(state.phi2), math.sin(state.phi2))
    return CartesianState(z1, z2)


def cartesian_to_reduced(state: CartesianState) -> ReducedState:
    return polar_to_reduced(cartesian_to_polar(state))
