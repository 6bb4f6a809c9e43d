"""Wilson-Cowan excitatory/inhibitory oscillators: single, coupled pair and forced pair.

Each population obeys

    tau dE/dt = -E + S(a E - b I + input)
    tau dI/dt = -I + S(c E - d I + eps (E_other - b_sp I_other))

with the shifted logistic S(x) = 1/(1 + exp(-lambda x + theta)) - 1/(1 + exp(theta)),
so that S(0) = 0 and the origin is always an equilibrium of the unforced system.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from hopfduet.errors import DomainError, NotApplicableError

# Logistic argument clamp; inactive in every explored parameter region
EXP_CLAMP = 700.0


@dataclass(frozen=True)
class WilsonCowanParams:
    """Synaptic weights, threshold, time constant and the bifurcation parameters (lambda_slope, eps)."""

    a: float
    b: float
    c: float
    d: float
    theta: float
    tau: float
    lambda_slope: float
    eps: float = 0.0
    b_sp: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "c", "d", "theta", "tau", "lambda_slope", "eps", "b_sp"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, float(value))
        if self.tau <= 0:
            raise DomainError(f"tau must be positive, got {self.tau!r}")
        if self.eps < 0:
            raise DomainError(f"eps must be >= 0, got {self.eps!r}")
        if self.a <= self.d:
            raise DomainError(f"a must exceed d (a={self.a!r}, d={self.d!r})")

    def with_(self, **changes) -> "WilsonCowanParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class WCState:
    E1: float
    I1: float
    E2: float
    I2: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.E1, self.I1, self.E2, self.I2)):
            raise DomainError("Wilson-Cowan state must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.E1, self.I1, self.E2, self.I2], dtype=float)

    @classmethod
    def from_array(cls, y) -> "WCState":
        return cls(float(y[0]), float(y[1]), float(y[2]), float(y[3]))


@dataclass(frozen=True)
class ForcingParams:
    """Anti-phase periodic input: amplitude A, frequency f (Hz), asymmetry h and sharpness n."""

    A: float
    f: float = 2.5
    h: float = 0.0
    n: int = 5

    def __post_init__(self):
        if not (math.isfinite(self.A) and math.isfinite(self.f) and math.isfinite(self.h)):
            raise DomainError("forcing parameters must be finite")
        if self.A < 0:
            raise DomainError(f"forcing amplitude A must be >= 0, got {self.A!r}")
        if self.f <= 0:
            raise DomainError(f"forcing frequency f must be positive, got {self.f!r}")
        if not 0.0 <= self.h <= 1.0:
            raise DomainError(f"input asymmetry h must lie in [0, 1], got {self.h!r}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"sharpness n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def input_period(self) -> float:
        """Period of the input pair (1/(4f) when h = 0, otherwise 1/(2f))."""
        return 1.0 / (4.0 * self.f) if self.h == 0 else 1.0 / (2.0 * self.f)


# ---------------------------------------------------------------------------
# Sigmoid
# ---------------------------------------------------------------------------


def _logistic(u):
    return expit(np.clip(u, -EXP_CLAMP, EXP_CLAMP))


def sigmoid(x, lambda_slope: float, theta: float):
    """Shifted logistic response, S(0) = 0."""
    return _logistic(lambda_slope * x - theta) - _logistic(-theta)


def sigmoid_derivatives(x, lambda_slope: float, theta: float):
    """First three derivatives of the sigmoid, closed forms of the logistic."""
    sig = _logistic(lambda_slope * x - theta)
    slope = sig * (1.0 - sig)
    d1 = lambda_slope * slope
    d2 = lambda_slope**2 * slope * (1.0 - 2.0 * sig)
    d3 = lambda_slope**3 * slope * (1.0 - 6.0 * sig + 6.0 * sig * sig)
    return d1, d2, d3


def s1_constant(theta: float) -> float:
    """S1 = e^theta / (1 + e^theta)^2, so that S'(0) = lambda * S1."""
    sig = float(_logistic(-theta))
    return sig * (1.0 - sig)


# ---------------------------------------------------------------------------
# Single oscillator
# ---------------------------------------------------------------------------


def eval_wc_single(E: float, I: float, p: WilsonCowanParams, drive: float = 0.0) -> Tuple[float, float]:
    dE = (-E + sigmoid(p.a * E - p.b * I + drive, p.lambda_slope, p.theta)) / p.tau
    dI = (-I + sigmoid(p.c * E - p.d * I, p.lambda_slope, p.theta)) / p.tau
    return float(dE), float(dI)


def wc_origin_jacobian(p: WilsonCowanParams) -> np.ndarray:
    """2x2 linearization of a single oscillator at the origin."""
    k = p.lambda_slope * s1_constant(p.theta)
    return np.array([[-1.0 + k * p.a, -k * p.b], [k * p.c, -1.0 - k * p.d]]) / p.tau


def wc_hopf_lambda(p: WilsonCowanParams) -> float:
    """Slope at which the single oscillator undergoes its Hopf bifurcation, 2/((a - d) S1)."""
    if p.a <= p.d:
        raise NotApplicableError("Hopf threshold requires a > d")
    lam_c = 2.0 / ((p.a - p.d) * s1_constant(p.theta))
    jac = wc_origin_jacobian(p.with_(lambda_slope=lam_c))
    if np.linalg.det(jac) <= 0:
        raise NotApplicableError("origin is a saddle at the trace-zero slope; no Hopf pair")
    return lam_c


def wc_unfolding_lambda(p: WilsonCowanParams) -> float:
    """Real part of the single-oscillator origin eigenvalue, the normal-form unfolding parameter."""
    return float(np.max(np.linalg.eigvals(wc_origin_jacobian(p)).real))


def _period_radicand(lambda_slope: float, p: WilsonCowanParams) -> float:
    k = lambda_slope * s1_constant(p.theta)
    return k * k * (p.b * p.c - p.a * p.d) + k * (p.d - p.a) + 1.0


def wc_period(lambda_slope: float, p: WilsonCowanParams) -> float:
    """Period of the branch emerging at the Hopf point, tau 2 pi / sqrt(radicand)."""
    radicand = _period_radicand(lambda_slope, p)
    if radicand <= 0:
        raise NotApplicableError(f"period radicand must be positive, got {radicand!r}")
    return p.tau * 2.0 * math.pi / math.sqrt(radicand)


def forced_tau(f: float, lambda_slope: float, p: WilsonCowanParams) -> float:
    """Time constant that makes the intrinsic period equal to 1/(2f)."""
    if f <= 0:
        raise NotApplicableError("forcing frequency must be positive")
    radicand = _period_radicand(lambda_slope, p)
    if radicand <= 0:
        raise NotApplicableError(f"period radicand must be positive, got {radicand!r}")
    return math.sqrt(radicand) / (4.0 * f * math.pi)


# ---------------------------------------------------------------------------
# Coupled and forced pairs
# ---------------------------------------------------------------------------


def coupling_matrix(p: WilsonCowanParams, eps: Optional[float] = None) -> np.ndarray:
    """Linear map from (E1, I1, E2, I2) to the four sigmoid arguments.

    `eps` overrides p.eps; negative values are accepted here for symmetric
    probing of the coupling dependence.
    """
    e = p.eps if eps is None else eps
    return np.array(
        [
            [p.a, -p.b, 0.0, 0.0],
            [p.c, -p.d, e, -e * p.b_sp],
            [0.0, 0.0, p.a, -p.b],
            [e, -e * p.b_sp, p.c, -p.d],
        ]
    )


def forcing_inputs(t, fp: ForcingParams):
    """Inputs (to E1, to E2) at time t."""
    x = 2.0 * math.pi * fp.f * np.asarray(t, dtype=float)
    sin_term = np.sin(x) ** (2 * fp.n)
    cos_term = np.cos(x) ** (2 * fp.n)
    in1 = fp.A * sin_term + (1.0 - fp.h) * fp.A * cos_term
    in2 = fp.A * cos_term + (1.0 - fp.h) * fp.A * sin_term
    if np.ndim(in1) == 0:
        return float(in1), float(in2)
    return in1, in2


def _drive_vector(inputs: Tuple[float, float]) -> np.ndarray:
    return np.array([inputs[0], 0.0, inputs[1], 0.0])


def wc_rhs(t: float, y: np.ndarray, p: WilsonCowanParams, inputs: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    args = coupling_matrix(p) @ y + _drive_vector(inputs)
    return (-y + sigmoid(args, p.lambda_slope, p.theta)) / p.tau


def wc_jacobian(t: float, y: np.ndarray, p: WilsonCowanParams, inputs: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    m = coupling_matrix(p)
    d1, _, _ = sigmoid_derivatives(m @ y + _drive_vector(inputs), p.lambda_slope, p.theta)
    return (-np.eye(4) + d1[:, None] * m) / p.tau


def wc_forced_rhs(t: float, y: np.ndarray, p: WilsonCowanParams, fp: ForcingParams) -> np.ndarray:
    return wc_rhs(t, y, p, forcing_inputs(t, fp))


def wc_forced_jacobian(t: float, y: np.ndarray, p: WilsonCowanParams, fp: ForcingParams) -> np.ndarray:
    return wc_jacobian(t, y, p, forcing_inputs(t, fp))


def eval_wc_coupled(state: WCState, p: WilsonCowanParams) -> WCState:
    """Time derivative of the symmetric coupled pair."""
    return WCState.from_array(wc_rhs(0.0, state.as_array(), p))


def eval_wc_forced(state: WCState, t: float, p: WilsonCowanParams, fp: ForcingParams) -> WCState:
    """Time derivative of the periodically forced pair."""
    return WCState.from_array(wc_forced_rhs(t, state.as_array(), p, fp))


# ---------------------------------------------------------------------------
# Taylor tensors at the origin
# ---------------------------------------------------------------------------


def real_taylor_tensors(p: WilsonCowanParams, eps: Optional[float] = None):
    """Symmetric Taylor tensors (L, T2, T3) of the unforced pair at the origin.

    The field expands as F(x) = L x + T2(x, x) + T3(x, x, x) with
    T2[k, a, b] = S''(0)/(2 tau) M[k, a] M[k, b] and
    T3[k, a, b, c] = S'''(0)/(6 tau) M[k, a] M[k, b] M[k, c].
    """
    m = coupling_matrix(p, eps)
    d1, d2, d3 = sigmoid_derivatives(0.0, p.lambda_slope, p.theta)
    linear = (-np.eye(4) + d1 * m) / p.tau
    quad = (d2 / (2.0 * p.tau)) * np.einsum("ka,kb->kab", m, m)
    cubic = (d3 / (6.0 * p.tau)) * np.einsum("ka,kb,kc->kabc", m, m, m)
    return linear, quad, cubic
