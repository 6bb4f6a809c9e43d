"""Integration, periodic orbits, Floquet analysis and attractor classification.

Systems are addressed by id: "nf-cartesian" (normal form, real 4D),
"nf-reduced" (normal form, (s, d, dphi)), "wc" (coupled Wilson-Cowan pair)
and "wc-forced" (the pair under anti-phase periodic input). A `ModelSpec`
holds the parameters of one of them and builds the `DynamicalSystem`.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import lstsq
from scipy.optimize import brentq
from scipy.signal import find_peaks

from hopfduet.errors import (
    ConvergenceError,
    DomainError,
    HopfDuetError,
    IntegrationError,
    NoOscillationError,
    NotApplicableError,
)
from hopfduet.nf_analysis import branch_sign, osc_frequency, s_osc
from hopfduet.nf_core import (
    NormalFormCoefficients,
    UnfoldingParams,
    nf_real_jacobian,
    nf_real_rhs,
    nf_reduced_rhs,
    wrap_angle,
)
from hopfduet.wc_model import (
    ForcingParams,
    WilsonCowanParams,
    real_taylor_tensors,
    wc_forced_jacobian,
    wc_forced_rhs,
    wc_jacobian,
    wc_period,
    wc_rhs,
)

logger = logging.getLogger(__name__)

SYSTEM_IDS = ("nf-cartesian", "nf-reduced", "wc", "wc-forced")
LABELS = ("FP", "IP", "AP", "LA", "HA", "OTHER", "UNRESOLVED")
EVENT_TYPES = ("HB", "PF", "PD", "TR", "FOLD")

# Oscillator swap on (x1, y1, x2, y2)
SWAP_INDEX = [2, 3, 0, 1]

# Relative swap-symmetry residual below which an orbit counts as symmetric
SYMMETRY_TOL = 1e-6

# Largest grid a sweep accepts
MAX_CELLS = 10000


# ---------------------------------------------------------------------------
# Configuration records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegratorConfig:
    """ODE integrator settings: "adaptive" (scipy RK45/DOP853) or fixed-step "rk4"."""

    method: str = "adaptive"
    solver: str = "DOP853"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    max_time: float = 1e6
    rk4_step: float = 1e-2

    def __post_init__(self):
        if self.method not in ("adaptive", "rk4"):
            raise DomainError(f"integrator method must be 'adaptive' or 'rk4', got {self.method!r}")
        if self.solver not in ("RK45", "DOP853"):
            raise DomainError(f"adaptive solver must be 'RK45' or 'DOP853', got {self.solver!r}")
        for name in ("rel_tol", "abs_tol", "max_step", "max_time", "rk4_step"):
            value = getattr(self, name)
            if not value > 0:
                raise DomainError(f"{name} must be positive, got {value!r}")

    def scaled(self, factor: float) -> "IntegratorConfig":
        """Same settings with tolerances multiplied by `factor`."""
        return replace(self, rel_tol=self.rel_tol * factor, abs_tol=self.abs_tol * factor)


@dataclass(frozen=True)
class ClassifyConfig:
    """Attractor classification settings; times are in units of the system's reference period."""

    transient_periods: float = 200.0
    window_periods: float = 50.0
    samples_per_period: int = 64
    fp_floor: float = 1e-5
    phase_tol: float = 0.1
    drift_tol: float = 0.05
    closure_tol: float = 1e-3
    ha_threshold: float = 0.5
    integrator: IntegratorConfig = field(default_factory=lambda: IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10))

    def __post_init__(self):
        for name in ("transient_periods", "window_periods", "fp_floor", "phase_tol", "drift_tol", "closure_tol"):
            value = getattr(self, name)
            if not value > 0:
                raise DomainError(f"{name} must be positive, got {value!r}")
        if self.samples_per_period < 8:
            raise DomainError("samples_per_period must be at least 8")


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DynamicalSystem:
    system_id: str
    rhs: Callable[[float, np.ndarray], np.ndarray]
    jacobian: Callable[[float, np.ndarray], np.ndarray]
    dimension: int
    autonomous: bool
    period_hint: float
    forcing_period: Optional[float] = None
    input_period: Optional[float] = None
    symmetry_shift: Optional[float] = None

    @property
    def is_normal_form(self) -> bool:
        return self.system_id.startswith("nf-")

    def swap(self, y: np.ndarray) -> np.ndarray:
        """Exchange the two oscillators (last axis)."""
        if self.system_id == "nf-reduced":
            y = np.asarray(y)
            return np.stack([y[..., 0], -y[..., 1], wrap_angle(-y[..., 2])], axis=-1)
        return np.asarray(y)[..., SWAP_INDEX]

    def observables(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Scalar signals (oscillator 1, oscillator 2): E-activities or Re z."""
        y = np.atleast_2d(y)
        if self.system_id == "nf-reduced":
            raise NotApplicableError("the reduced chart has no per-oscillator signal")
        return y[:, 0], y[:, 2]


def _fd_jacobian(rhs: Callable[[float, np.ndarray], np.ndarray], step: float = 1e-7):
    def jacobian(t: float, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        cols = []
        for i in range(y.size):
            h = step * max(1.0, abs(y[i]))
            e = np.zeros_like(y)
            e[i] = h
            cols.append((rhs(t, y + e) - rhs(t, y - e)) / (2 * h))
        return np.column_stack(cols)

    return jacobian


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one system; `with_values` routes parameter names to the right record."""

    system_id: str
    params: Union[UnfoldingParams, WilsonCowanParams]
    coefficients: Optional[NormalFormCoefficients] = None
    forcing: Optional[ForcingParams] = None

    def __post_init__(self):
        if self.system_id not in SYSTEM_IDS:
            raise DomainError(f"unknown system '{self.system_id}' (known: {', '.join(SYSTEM_IDS)})")
        if self.system_id.startswith("nf-"):
            if not isinstance(self.params, UnfoldingParams) or self.coefficients is None:
                raise DomainError(f"{self.system_id} needs UnfoldingParams and normal-form coefficients")
        elif not isinstance(self.params, WilsonCowanParams):
            raise DomainError(f"{self.system_id} needs WilsonCowanParams")
        if self.system_id == "wc-forced" and self.forcing is None:
            raise DomainError("wc-forced needs forcing parameters")

    def parameter_names(self) -> Tuple[str, ...]:
        names = tuple(f.name for f in fields(self.params))
        if self.forcing is not None:
            names += tuple(f.name for f in fields(self.forcing))
        return names

    def value(self, name: str) -> float:
        if name in {f.name for f in fields(self.params)}:
            return float(getattr(self.params, name))
        if self.forcing is not None and name in {f.name for f in fields(self.forcing)}:
            return float(getattr(self.forcing, name))
        raise DomainError(f"{self.system_id} has no parameter '{name}'")

    def with_values(self, **values: float) -> "ModelSpec":
        param_names = {f.name for f in fields(self.params)}
        forcing_names = {f.name for f in fields(self.forcing)} if self.forcing is not None else set()
        p_changes = {k: v for k, v in values.items() if k in param_names}
        f_changes = {k: v for k, v in values.items() if k in forcing_names and k not in param_names}
        unknown = set(values) - set(p_changes) - set(f_changes)
        if unknown:
            raise DomainError(f"{self.system_id} has no parameter(s) {', '.join(sorted(unknown))}")
        params = replace(self.params, **p_changes) if p_changes else self.params
        forcing = replace(self.forcing, **f_changes) if f_changes else self.forcing
        return replace(self, params=params, forcing=forcing)

    def system(self) -> DynamicalSystem:
        return make_system(self.system_id, self.params, self.coefficients, self.forcing)


def _nf_period_hint(c: NormalFormCoefficients) -> float:
    return 2 * math.pi / abs(c.omega) if c.omega else 2 * math.pi


def make_system(
    system_id: str,
    params: Union[UnfoldingParams, WilsonCowanParams],
    coefficients: Optional[NormalFormCoefficients] = None,
    forcing: Optional[ForcingParams] = None,
) -> DynamicalSystem:
    if system_id == "nf-cartesian":
        c = coefficients
        return DynamicalSystem(
            system_id,
            rhs=lambda t, y: nf_real_rhs(t, y, params, c),
            jacobian=lambda t, y: nf_real_jacobian(t, y, params, c),
            dimension=4,
            autonomous=True,
            period_hint=_nf_period_hint(c),
        )
    if system_id == "nf-reduced":
        c = coefficients

        def reduced(t, y):
            return nf_reduced_rhs(t, y, params, c)

        return DynamicalSystem(
            system_id,
            rhs=reduced,
            jacobian=_fd_jacobian(reduced),
            dimension=3,
            autonomous=True,
            period_hint=_nf_period_hint(c),
        )
    if system_id == "wc":
        try:
            hint = wc_period(params.lambda_slope, params)
        except NotApplicableError:
            hint = 2 * math.pi * params.tau
        return DynamicalSystem(
            system_id,
            rhs=lambda t, y: wc_rhs(t, y, params),
            jacobian=lambda t, y: wc_jacobian(t, y, params),
            dimension=4,
            autonomous=True,
            period_hint=hint,
        )
    if system_id == "wc-forced":
        if forcing is None:
            raise DomainError("wc-forced needs forcing parameters")
        fp = forcing
        base = 1.0 / (2.0 * fp.f)
        return DynamicalSystem(
            system_id,
            rhs=lambda t, y: wc_forced_rhs(t, y, params, fp),
            jacobian=lambda t, y: wc_forced_jacobian(t, y, params, fp),
            dimension=4,
            autonomous=False,
            period_hint=base,
            forcing_period=base,
            input_period=fp.input_period,
            symmetry_shift=1.0 / (4.0 * fp.f),
        )
    raise DomainError(f"unknown system '{system_id}' (known: {', '.join(SYSTEM_IDS)})")


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    system_id: str
    t: np.ndarray
    y: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]


def rk4_step(rhs, t: float, h: float, y: np.ndarray) -> np.ndarray:
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4(rhs, tspan, y0, step, t_eval):
    t0, t1 = tspan
    steps = max(1, int(math.ceil(abs(t1 - t0) / step)))
    h = (t1 - t0) / steps
    ts = t0 + h * np.arange(steps + 1)
    ys = np.empty((steps + 1, y0.size))
    ys[0] = y0
    for i in range(steps):
        ys[i + 1] = rk4_step(rhs, ts[i], h, ys[i])
        if not np.all(np.isfinite(ys[i + 1])):
            raise IntegrationError(f"non-finite state at t={ts[i + 1]:.6g}")
    if t_eval is None:
        return ts, ys
    t_eval = np.asarray(t_eval, dtype=float)
    return t_eval, np.column_stack([np.interp(t_eval, ts, ys[:, k]) for k in range(y0.size)])


def integrate_rhs(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    tspan: Tuple[float, float],
    cfg: IntegratorConfig,
    t_eval: Optional[Sequence[float]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Integrate an arbitrary right-hand side; returns (t, y) with y of shape (n, dim)."""
    y0 = np.asarray(y0, dtype=float)
    t0, t1 = float(tspan[0]), float(tspan[1])
    if abs(t1 - t0) > cfg.max_time:
        raise IntegrationError(f"requested span {abs(t1 - t0):.6g} exceeds max_time {cfg.max_time:.6g}")
    if cfg.method == "rk4":
        return _rk4(rhs, (t0, t1), y0, cfg.rk4_step, t_eval)
    try:
        sol = solve_ivp(
            rhs,
            (t0, t1),
            y0,
            method=cfg.solver,
            rtol=cfg.rel_tol,
            atol=cfg.abs_tol,
            max_step=cfg.max_step,
            t_eval=t_eval,
        )
    except HopfDuetError as exc:
        raise IntegrationError(f"integration left the chart: {exc}") from exc
    if not sol.success:
        raise IntegrationError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise IntegrationError("integration produced non-finite states")
    return sol.t, sol.y.T


def integrate(
    system: DynamicalSystem,
    state0: Sequence[float],
    tspan: Tuple[float, float],
    cfg: Optional[IntegratorConfig] = None,
    t_eval: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Trajectory of `system` from state0 over tspan."""
    cfg = cfg or IntegratorConfig()
    state0 = np.asarray(state0, dtype=float)
    if state0.shape != (system.dimension,):
        raise DomainError(f"{system.system_id} expects a state of length {system.dimension}, got {state0.shape}")
    t, y = integrate_rhs(system.rhs, state0, tspan, cfg, t_eval)
    return Trajectory(system.system_id, t, y)


# ---------------------------------------------------------------------------
# Monodromy and Floquet multipliers
# ---------------------------------------------------------------------------


def flow_with_monodromy(
    system: DynamicalSystem, state0: np.ndarray, t0: float, duration: float, cfg: IntegratorConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """End state and state-transition matrix over [t0, t0 + duration] from the variational equations."""
    n = system.dimension

    def augmented(t, w):
        y = w[:n]
        phi = w[n:].reshape(n, n)
        return np.concatenate([system.rhs(t, y), (system.jacobian(t, y) @ phi).ravel()])

    w0 = np.concatenate([np.asarray(state0, dtype=float), np.eye(n).ravel()])
    _, w = integrate_rhs(augmented, w0, (t0, t0 + duration), cfg)
    end = w[-1]
    return end[:n], end[n:].reshape(n, n)


def fd_monodromy(
    system: DynamicalSystem,
    state0: np.ndarray,
    period: float,
    cfg: Optional[IntegratorConfig] = None,
    step: float = 1e-6,
    t0: float = 0.0,
) -> np.ndarray:
    """Monodromy matrix by central differences of the flow map."""
    cfg = cfg or IntegratorConfig()
    state0 = np.asarray(state0, dtype=float)
    cols = []
    for i in range(system.dimension):
        e = np.zeros(system.dimension)
        e[i] = step
        plus = integrate(system, state0 + e, (t0, t0 + period), cfg).final
        minus = integrate(system, state0 - e, (t0, t0 + period), cfg).final
        cols.append((plus - minus) / (2 * step))
    return np.column_stack(cols)


def sorted_multipliers(matrix: np.ndarray) -> np.ndarray:
    values = np.linalg.eigvals(matrix)
    order = sorted(range(values.size), key=lambda k: (-abs(values[k]), -values[k].real, -values[k].imag))
    return values[order]


def floquet(system: DynamicalSystem, orbit: "OrbitRecord", cfg: Optional[IntegratorConfig] = None) -> np.ndarray:
    """Floquet multipliers of a converged orbit, sorted by modulus (descending)."""
    cfg = cfg or IntegratorConfig()
    _, monodromy = flow_with_monodromy(system, orbit.state0, orbit.t0, orbit.period, cfg)
    return sorted_multipliers(monodromy)


def nontrivial_multipliers(multipliers: Sequence[complex], autonomous: bool) -> np.ndarray:
    """Drop the multiplier closest to 1 for autonomous systems."""
    values = np.asarray(multipliers, dtype=complex)
    if not autonomous or values.size == 0:
        return values
    k = int(np.argmin(np.abs(values - 1.0)))
    return np.delete(values, k)


# ---------------------------------------------------------------------------
# Phase difference and symmetry
# ---------------------------------------------------------------------------


def _refined_peaks(t: np.ndarray, x: np.ndarray, prominence: float) -> np.ndarray:
    idx, _ = find_peaks(x, prominence=prominence)
    idx = idx[(idx > 0) & (idx < x.size - 1)]
    if idx.size == 0:
        return np.array([])
    left, mid, right = x[idx - 1], x[idx], x[idx + 1]
    denom = left - 2 * mid + right
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = np.where(denom != 0, 0.5 * (left - right) / denom, 0.0)
    dt = np.gradient(t)[idx]
    return t[idx] + offset * dt


def phase_series(t: np.ndarray, x1: np.ndarray, x2: np.ndarray, floor: float = 1e-6) -> Tuple[np.ndarray, float]:
    """Per-cycle phase differences 2 pi (t_peak1 - t_peak2)/T and the mean period T."""
    amp = min(np.ptp(x1), np.ptp(x2))
    if amp < floor:
        raise NoOscillationError(f"oscillation amplitude {amp:.3g} below floor {floor:.3g}")
    p1 = _refined_peaks(t, x1, 0.25 * np.ptp(x1))
    p2 = _refined_peaks(t, x2, 0.25 * np.ptp(x2))
    if p1.size < 2 or p2.size < 1:
        raise NoOscillationError("fewer than two peaks detected")
    period = float(np.mean(np.diff(p1)))
    phases = []
    for t1 in p1:
        earlier = p2[p2 <= t1]
        if earlier.size == 0:
            continue
        phases.append(2 * math.pi * (((t1 - earlier[-1]) / period) % 1.0))
    if not phases:
        raise NoOscillationError("no matching peaks between the oscillators")
    return np.array(phases), period


def circular_mean(angles: Iterable[float]) -> float:
    values = np.asarray(list(angles), dtype=float)
    return float(wrap_angle(math.atan2(np.mean(np.sin(values)), np.mean(np.cos(values)))))


def circular_spread(angles: Iterable[float]) -> float:
    """Largest angular distance of the samples from their circular mean."""
    values = np.asarray(list(angles), dtype=float)
    mean = circular_mean(values)
    return float(np.max(np.abs(np.angle(np.exp(1j * (values - mean)))))) if values.size else 0.0


def phase_difference_from_signals(t, x1, x2, cycles: int = 10, floor: float = 1e-6) -> float:
    """Peak-based phase difference averaged over the last `cycles` cycles, in [0, 2 pi)."""
    phases, _ = phase_series(np.asarray(t, dtype=float), np.asarray(x1, dtype=float), np.asarray(x2, dtype=float), floor)
    return circular_mean(phases[-cycles:])


def _complex_phases(y: np.ndarray, floor: float) -> np.ndarray:
    z1 = y[:, 0] + 1j * y[:, 1]
    z2 = y[:, 2] + 1j * y[:, 3]
    if min(np.abs(z1).min(), np.abs(z2).min()) < floor:
        raise NoOscillationError("an oscillator amplitude is below the floor")
    return np.angle(z2 * np.conj(z1))


def measure_phase_difference(trajectory: Trajectory, cycles: int = 10, floor: float = 1e-6) -> float:
    """Phase difference of a trajectory, wrapped to [0, 2 pi).

    Normal-form trajectories use arg(z2 conj z1) over the final tenth of the
    samples; Wilson-Cowan trajectories use E-activity peaks.
    """
    if trajectory.system_id == "nf-cartesian":
        tail = trajectory.y[-max(1, len(trajectory.t) // 10):]
        return circular_mean(_complex_phases(tail, floor))
    if trajectory.system_id == "nf-reduced":
        return float(wrap_angle(trajectory.y[-1, 2]))
    return phase_difference_from_signals(trajectory.t, trajectory.y[:, 0], trajectory.y[:, 2], cycles, floor)


def _periodic_shift(samples: np.ndarray, fraction: float) -> np.ndarray:
    """Values at t + fraction*T of uniformly sampled periodic data (spectral interpolation)."""
    n = samples.shape[0]
    spectrum = np.fft.rfft(samples, axis=0)
    k = np.arange(spectrum.shape[0])
    phase = np.exp(2j * math.pi * k * fraction)
    if n % 2 == 0:
        # Nyquist term must stay real
        phase[-1] = math.cos(math.pi * n * fraction)
    return np.fft.irfft(spectrum * phase[:, None], n=n, axis=0)


def symmetry_residuals(system: DynamicalSystem, samples: np.ndarray, period: float) -> Dict[str, float]:
    """Relative residuals of swap(x(t + s)) = x(t) for the candidate shifts."""
    scale = max(float(np.abs(samples).max()), 1e-12)
    shifts = {"IP": 0.0, "AP": 0.5}
    if system.symmetry_shift is not None:
        shifts["symmetric-fixed-pattern"] = (system.symmetry_shift / period) % 1.0
    out = {}
    for label, fraction in shifts.items():
        shifted = _periodic_shift(samples, fraction) if fraction else samples
        out[label] = float(np.abs(system.swap(shifted) - samples).max() / scale)
    return out


def symmetry_class(system: DynamicalSystem, samples: np.ndarray, period: float, tol: float = SYMMETRY_TOL) -> Tuple[str, float]:
    """Symmetry type of a sampled periodic orbit and its residual."""
    if system.system_id == "nf-reduced":
        return "asym", math.inf
    residuals = symmetry_residuals(system, samples, period)
    label, value = min(residuals.items(), key=lambda item: item[1])
    if value <= tol:
        return label, value
    return "asym", value


def orbit_phase_difference(system: DynamicalSystem, samples: np.ndarray) -> float:
    """Phase difference of one sampled period from the first Fourier harmonics."""
    if system.system_id == "nf-cartesian":
        return circular_mean(_complex_phases(samples, 0.0))
    x1, x2 = system.observables(samples)
    c1 = np.fft.rfft(x1)[1]
    c2 = np.fft.rfft(x2)[1]
    if abs(c1) == 0 or abs(c2) == 0:
        return 0.0
    return float(wrap_angle(np.angle(c2 * np.conj(c1))))


# ---------------------------------------------------------------------------
# Periodic orbits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitRecord:
    system_id: str
    period: float
    state0: np.ndarray
    times: np.ndarray
    samples: np.ndarray
    floquet: Tuple[complex, ...]
    dphi: float
    symmetry: str
    symmetry_residual: float
    stable: bool
    amplitude: float
    residual: float
    iterations: int
    t0: float = 0.0

    @property
    def unstable_count(self) -> int:
        return int(sum(1 for m in self.nontrivial if abs(m) > 1.0))

    @property
    def nontrivial(self) -> np.ndarray:
        return nontrivial_multipliers(self.floquet, self.system_id != "wc-forced")


def _orbit_record(
    system: DynamicalSystem,
    state0: np.ndarray,
    period: float,
    monodromy: np.ndarray,
    cfg: IntegratorConfig,
    residual: float,
    iterations: int,
    samples_per_orbit: int = 256,
    stability_margin: float = 1e-6,
) -> OrbitRecord:
    times = np.linspace(0.0, period, samples_per_orbit, endpoint=False)
    traj = integrate(system, state0, (0.0, period), cfg, t_eval=times)
    multipliers = sorted_multipliers(monodromy)
    if system.autonomous:
        trivial = multipliers[int(np.argmin(np.abs(multipliers - 1.0)))]
        if abs(trivial - 1.0) > 1e-4:
            logger.warning("trivial multiplier off unity: %s", trivial)
    rest = nontrivial_multipliers(multipliers, system.autonomous)
    stable = bool(np.all(np.abs(rest) < 1.0 - stability_margin))
    symmetry, sym_residual = symmetry_class(system, traj.y, period)
    x1, x2 = system.observables(traj.y)
    return OrbitRecord(
        system_id=system.system_id,
        period=period,
        state0=np.asarray(state0, dtype=float),
        times=traj.t,
        samples=traj.y,
        floquet=tuple(complex(m) for m in multipliers),
        dphi=orbit_phase_difference(system, traj.y),
        symmetry=symmetry,
        symmetry_residual=sym_residual,
        stable=stable,
        amplitude=float(max(np.ptp(x1), np.ptp(x2))),
        residual=residual,
        iterations=iterations,
    )


def find_periodic_orbit(
    system: DynamicalSystem,
    guess_state: Sequence[float],
    guess_period: float,
    cfg: Optional[IntegratorConfig] = None,
    tol: float = 1e-9,
    max_iter: int = 50,
) -> OrbitRecord:
    """Newton shooting for a periodic orbit.

    Autonomous systems: unknowns (x0, T) with the phase condition
    n . (x0 - guess) = 0, n the flow direction at the guess. Forced systems:
    the stroboscopic map over the fixed period `guess_period` (a multiple of
    the forcing base period). Linear steps use least squares.
    """
    if system.system_id == "nf-reduced":
        raise NotApplicableError("periodic orbits are located in the Cartesian chart")
    cfg = cfg or IntegratorConfig()
    x = np.asarray(guess_state, dtype=float).copy()
    period = float(guess_period)
    if not period > 0:
        raise DomainError("guess period must be positive")
    if not system.autonomous:
        ratio = period / system.forcing_period
        if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-6 * ratio:
            raise DomainError(
                f"forced orbits need a period k/(2f) with integer k >= 1; got {period:.9g} "
                f"= {ratio:.6g} forcing base periods"
            )
    n = system.dimension
    anchor = x.copy()
    normal = system.rhs(0.0, anchor)
    norm = float(np.linalg.norm(normal))
    if system.autonomous:
        if norm <= 1e-14:
            raise ConvergenceError("section degeneracy: flow vanishes at the guess state")
        normal = normal / norm
    scale = max(1.0, float(np.linalg.norm(x)))

    for iteration in range(1, max_iter + 1):
        end, monodromy = flow_with_monodromy(system, x, 0.0, period, cfg)
        gap = end - x
        residual = float(np.linalg.norm(gap))
        logger.debug("shooting iteration %d: residual %.3e, period %.9g", iteration, residual, period)
        if residual <= tol:
            return _orbit_record(system, x, period, monodromy, cfg, residual, iteration)
        if system.autonomous:
            jac = np.zeros((n + 1, n + 1))
            jac[:n, :n] = monodromy - np.eye(n)
            jac[:n, n] = system.rhs(period, end)
            jac[n, :n] = normal
            rhs = -np.concatenate([gap, [normal @ (x - anchor)]])
            delta = lstsq(jac, rhs)[0]
            step = delta[:n]
            dperiod = float(delta[n])
        else:
            step = lstsq(monodromy - np.eye(n), -gap)[0]
            dperiod = 0.0
        size = float(np.linalg.norm(step))
        if size > 0.5 * scale:
            factor = 0.5 * scale / size
            step, dperiod = step * factor, dperiod * factor
        x = x + step
        period += dperiod
        if not period > 0:
            raise ConvergenceError("period became non-positive during Newton iteration")
    raise ConvergenceError(f"no convergence in {max_iter} Newton iterations (residual {residual:.3e})")


def nf_orbit_guess(p: UnfoldingParams, branch: str, c: NormalFormCoefficients) -> Tuple[np.ndarray, float]:
    """Rotating-wave state (z1 = r, z2 = +-r) and period of the normal-form branch."""
    r = s_osc(p, branch, c).s_osc / 2.0
    state = np.array([r, 0.0, branch_sign(branch) * r, 0.0])
    return state, 2 * math.pi / abs(osc_frequency(p, branch, c))


# ---------------------------------------------------------------------------
# Attractor classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ICOutcome:
    ic: str
    label: str
    dphi: Optional[float]
    amplitude: float


@dataclass(frozen=True)
class Classification:
    labels: FrozenSet[str]
    outcomes: Tuple[ICOutcome, ...]

    @property
    def key(self) -> str:
        return "+".join(sorted(self.labels))


def default_ics(system: DynamicalSystem) -> List[Tuple[str, np.ndarray]]:
    """Fixed initial-condition policy."""
    if system.system_id == "nf-reduced":
        return [("symmetric", np.array([0.2, 0.0, 0.0])), ("antisymmetric", np.array([0.2, 0.0, math.pi]))]
    if system.is_normal_form:
        return [
            ("symmetric", np.array([0.1, 0.0, 0.1, 0.0])),
            ("antisymmetric", np.array([0.1, 0.0, -0.1, 0.0])),
            ("near-origin", np.full(4, 1e-3)),
            ("high-amplitude", np.full(4, 0.8)),
            ("quarter", np.array([0.1, 0.0, 0.0, 0.1])),
        ]
    return [
        ("symmetric", np.array([0.1, 0.05, 0.1, 0.05])),
        ("antisymmetric", np.array([0.1, 0.05, -0.1, 0.05])),
        ("near-origin", np.full(4, 1e-3)),
        ("high-amplitude", np.full(4, 0.8)),
        ("negated", np.array([0.1, 0.05, -0.1, -0.05])),
    ]


def _closure_period(system: DynamicalSystem, y: np.ndarray, dt: float, amplitude: float, tol: float) -> Optional[float]:
    base = system.forcing_period
    candidates = [system.input_period] + [k * base for k in (1, 2, 4)]
    for period in sorted(set(round(c / dt) for c in candidates)):
        if period <= 0 or period >= y.shape[0]:
            continue
        gap = float(np.abs(y[period:] - y[:-period]).max())
        if gap <= tol * max(amplitude, 1e-12):
            return period * dt
    return None


def _label_from_phase(phases: np.ndarray, cfg: ClassifyConfig) -> Tuple[str, float]:
    dphi = circular_mean(phases)
    if circular_spread(phases) > cfg.drift_tol:
        return "OTHER", dphi
    if abs(math.remainder(dphi, 2 * math.pi)) <= cfg.phase_tol:
        return "IP", dphi
    if abs(math.remainder(dphi - math.pi, 2 * math.pi)) <= cfg.phase_tol:
        return "AP", dphi
    return "OTHER", dphi


def _classify_one(system: DynamicalSystem, label: str, state0: np.ndarray, cfg: ClassifyConfig) -> ICOutcome:
    period = system.period_hint
    t_trans = cfg.transient_periods * period
    t_end = t_trans + cfg.window_periods * period
    if system.forcing_period is not None:
        dt = system.input_period / cfg.samples_per_period
        steps = int(round((t_end - t_trans) / dt))
        t_eval = t_trans + dt * np.arange(steps + 1)
    else:
        dt = period / cfg.samples_per_period
        t_eval = np.arange(t_trans, t_end, dt)
    try:
        start = integrate(system, state0, (0.0, t_trans), cfg.integrator).final
        window = integrate(system, start, (t_trans, float(t_eval[-1])), cfg.integrator, t_eval=t_eval)
    except HopfDuetError as exc:
        logger.warning("classification of IC '%s' unresolved: %s", label, exc)
        return ICOutcome(label, "UNRESOLVED", None, math.nan)

    if system.is_normal_form:
        amplitude = float(np.abs(window.y).max())
    else:
        x1, x2 = system.observables(window.y)
        amplitude = float(max(np.ptp(x1), np.ptp(x2)))
    if amplitude < cfg.fp_floor:
        return ICOutcome(label, "FP", None, amplitude)

    if system.forcing_period is not None:
        closure = _closure_period(system, window.y, dt, amplitude, cfg.closure_tol)
        if closure is None:
            return ICOutcome(label, "OTHER", None, amplitude)
        if math.isclose(closure, system.input_period, rel_tol=1e-6):
            high = float(window.y[:, 0].max()) >= cfg.ha_threshold
            return ICOutcome(label, "HA" if high else "LA", 0.0, amplitude)

    try:
        if system.is_normal_form:
            phases = _complex_phases(window.y, cfg.fp_floor)
        else:
            phases, _ = phase_series(window.t, window.y[:, 0], window.y[:, 2], cfg.fp_floor)
    except NoOscillationError:
        # one oscillator at rest, the other oscillating
        return ICOutcome(label, "OTHER", None, amplitude)
    verdict, dphi = _label_from_phase(phases, cfg)
    return ICOutcome(label, verdict, dphi, amplitude)


def classify_attractor(
    system: DynamicalSystem,
    ic_set: Optional[Sequence[Tuple[str, Sequence[float]]]] = None,
    config: Optional[ClassifyConfig] = None,
) -> Classification:
    """Union of attractor labels reached from the IC set after the transient."""
    if system.system_id == "nf-reduced":
        raise NotApplicableError("classify in the Cartesian chart")
    cfg = config or ClassifyConfig()
    ics = default_ics(system) if ic_set is None else [(name, np.asarray(s, dtype=float)) for name, s in ic_set]
    outcomes = tuple(_classify_one(system, name, state, cfg) for name, state in ics)
    labels = frozenset(o.label for o in outcomes)
    logger.debug("classification: %s", "+".join(sorted(labels)))
    return Classification(labels, outcomes)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"axis '{self.name}' needs at least one point")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise DomainError(f"axis '{self.name}' range must be finite")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n)


@dataclass(frozen=True)
class Event:
    type: str
    p1: float
    p2: Optional[float] = None
    branch: str = ""
    bracket: Tuple[float, float] = (math.nan, math.nan)
    multipliers_before: Tuple[complex, ...] = ()
    multipliers_after: Tuple[complex, ...] = ()
    criticality: str = ""


@dataclass(frozen=True)
class BifurcationDiagram:
    axes: Tuple[Axis, ...]
    cells: Dict[Tuple[int, ...], FrozenSet[str]]
    events: Tuple[Event, ...]

    def key(self, index: Tuple[int, ...]) -> str:
        return "+".join(sorted(self.cells[index]))

    def rows(self) -> List[Tuple[float, Optional[float], str, str]]:
        """(p1, p2, classes, events) per cell in grid order; events are those on edges leaving the cell."""
        by_cell: Dict[Tuple[int, ...], List[str]] = {}
        for event, index in zip(self.events, self._event_cells()):
            by_cell.setdefault(index, []).append(event.type)
        out = []
        for index in sorted(self.cells):
            p1 = float(self.axes[0].values[index[0]])
            p2 = float(self.axes[1].values[index[1]]) if len(self.axes) > 1 else None
            out.append((p1, p2, self.key(index), "+".join(sorted(set(by_cell.get(index, []))))))
        return out

    def _event_cells(self) -> List[Tuple[int, ...]]:
        cells = []
        for event in self.events:
            i = int(np.searchsorted(self.axes[0].values, event.p1, side="right")) - 1
            i = min(max(i, 0), self.axes[0].n - 1)
            if len(self.axes) > 1:
                j = int(np.searchsorted(self.axes[1].values, event.p2, side="right")) - 1
                cells.append((i, min(max(j, 0), self.axes[1].n - 1)))
            else:
                cells.append((i,))
        return cells

    def regimes(self) -> List[str]:
        """Distinct consecutive label sets along the first axis (1D sweeps)."""
        out: List[str] = []
        for index in sorted(self.cells):
            key = self.key(index)
            if not out or out[-1] != key:
                out.append(key)
        return out


def _transition_type(left: FrozenSet[str], right: FrozenSet[str]) -> Tuple[str, str]:
    """Event type of a label change between neighbouring cells, and the labels involved."""
    changed = left ^ right
    branch = "+".join(sorted(changed))
    if left == {"FP"} or right == {"FP"}:
        return "HB", branch
    if "OTHER" in changed:
        return "TR", branch
    if changed & {"LA", "HA"}:
        return "FOLD", branch
    return "PF", branch


def _cell_task(task):
    model, point, ics, cfg = task
    system = model.with_values(**point).system()
    return classify_attractor(system, ics, cfg).labels


def _map(fn, tasks: List, jobs: int) -> List:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _bisect_edge(task):
    model, name, lo, hi, other, left, right, ics, cfg, tol, max_steps = task
    for _ in range(max_steps):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        labels = _cell_task((model, {name: mid, **other}, ics, cfg))
        if labels == left:
            lo = mid
        elif labels == right:
            hi = mid
        else:
            break
    return lo, hi


def sweep(
    model: ModelSpec,
    p1: Axis,
    p2: Optional[Axis] = None,
    config: Optional[ClassifyConfig] = None,
    ic_set: Optional[Sequence[Tuple[str, Sequence[float]]]] = None,
    jobs: int = 1,
    bisect_tol: Optional[float] = 1e-3,
    max_bisect: int = 30,
) -> BifurcationDiagram:
    """Classify every grid cell, then locate label changes between neighbours by bisection."""
    cfg = config or ClassifyConfig()
    axes = (p1,) if p2 is None else (p1, p2)
    for axis in axes:
        model.value(axis.name)
    total = int(np.prod([a.n for a in axes]))
    if total > MAX_CELLS:
        raise DomainError(f"grid of {total} cells exceeds the limit of {MAX_CELLS}")
    indices = [tuple(int(k) for k in idx) for idx in np.ndindex(*[a.n for a in axes])]
    points = [{a.name: float(a.values[k]) for a, k in zip(axes, idx)} for idx in indices]
    logger.info("sweep over %d cells (%s)", total, ", ".join(a.name for a in axes))
    results = _map(_cell_task, [(model, pt, ic_set, cfg) for pt in points], jobs)
    cells = dict(zip(indices, results))
    unresolved = sum(1 for labels in results if "UNRESOLVED" in labels)
    if unresolved:
        logger.warning("%d of %d cells contain UNRESOLVED outcomes", unresolved, total)

    edges = []
    for idx in indices:
        for dim, axis in enumerate(axes):
            nxt = idx[:dim] + (idx[dim] + 1,) + idx[dim + 1:]
            if nxt not in cells or cells[idx] == cells[nxt]:
                continue
            other = {a.name: float(a.values[idx[d]]) for d, a in enumerate(axes) if d != dim}
            edges.append((idx, dim, other, float(axis.values[idx[dim]]), float(axis.values[idx[dim] + 1]), cells[nxt]))

    events: List[Event] = []
    if edges:
        if bisect_tol is not None:
            tasks = [
                (model, axes[dim].name, lo, hi, other, cells[idx], right, ic_set, cfg, bisect_tol, max_bisect)
                for idx, dim, other, lo, hi, right in edges
            ]
            brackets = _map(_bisect_edge, tasks, jobs)
        else:
            brackets = [(lo, hi) for _, _, _, lo, hi, _ in edges]
        for (idx, dim, other, _, _, right), (lo, hi) in zip(edges, brackets):
            kind, branch = _transition_type(cells[idx], right)
            where = 0.5 * (lo + hi)
            coords = [other.get(a.name, where) if d != dim else where for d, a in enumerate(axes)]
            events.append(
                Event(kind, coords[0], coords[1] if len(coords) > 1 else None, branch=branch, bracket=(lo, hi))
            )
    events.sort(key=lambda e: (e.type, e.p1, e.p2 if e.p2 is not None else 0.0, e.branch))
    return BifurcationDiagram(axes, cells, tuple(events))


# ---------------------------------------------------------------------------
# Branch following
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepPolicy:
    initial_step: float = 1e-3
    min_step: float = 1e-6
    max_step: float = 1e-2
    grow: float = 1.5
    bisect_tol: float = 1e-4
    max_points: int = 2000
    tag_torus: bool = True

    def __post_init__(self):
        if not (0 < self.min_step <= self.initial_step <= self.max_step):
            raise DomainError("step policy needs 0 < min_step <= initial_step <= max_step")
        if self.grow < 1 or self.bisect_tol <= 0:
            raise DomainError("grow must be >= 1 and bisect_tol positive")


@dataclass(frozen=True)
class BranchPoint:
    value: float
    orbit: OrbitRecord


@dataclass(frozen=True)
class Branch:
    param: str
    points: Tuple[BranchPoint, ...]
    events: Tuple[Event, ...]
    stop_reason: str


def _solve_at(model: ModelSpec, param: str, value: float, state: np.ndarray, period: float, cfg: IntegratorConfig):
    system = model.with_values(**{param: value}).system()
    if not system.autonomous:
        # the base period moves with f; keep the same multiple of it
        period = max(1, round(period / system.forcing_period)) * system.forcing_period
    return find_periodic_orbit(system, state, period, cfg)


def _crossing_type(model: ModelSpec, param: str, orbit: OrbitRecord, value: float, cfg: IntegratorConfig) -> str:
    rest = orbit.nontrivial
    m = rest[int(np.argmin(np.abs(np.abs(rest) - 1.0)))]
    if abs(m.imag) > 1e-3 * max(abs(m), 1e-12):
        return "TR"
    if m.real < 0:
        return "PD"
    if orbit.symmetry == "asym":
        return "FOLD"
    system = model.with_values(**{param: value}).system()
    shift = {"IP": orbit.period, "AP": 0.5 * orbit.period}.get(orbit.symmetry, system.symmetry_shift)
    _, half = flow_with_monodromy(system, orbit.state0, 0.0, shift, cfg)
    perm = np.eye(system.dimension)[SWAP_INDEX]
    values = np.linalg.eigvals(perm @ half)
    return "PF" if np.min(np.abs(values + 1.0)) < 0.1 else "FOLD"


def _torus_criticality(model: ModelSpec, param: str, value: float, orbit: OrbitRecord, cfg: IntegratorConfig) -> str:
    """'super' when a trajectory started next to the unstable orbit stays near it, 'sub' when it leaves."""
    system = model.with_values(**{param: value}).system()
    perturbed = orbit.state0 + 1e-3 * max(orbit.amplitude, 1e-6) * np.array([1.0, -0.5, -1.0, 0.5])
    try:
        span = 100 * orbit.period
        traj = integrate(system, perturbed, (0.0, span), cfg, t_eval=np.linspace(0.8 * span, span, 400))
    except HopfDuetError:
        return "unknown"
    dist = np.min(np.linalg.norm(traj.y[:, None, :] - orbit.samples[None, :, :], axis=2), axis=1).max()
    return "super" if dist < 0.2 * max(orbit.amplitude, 1e-12) else "sub"


def _locate_event(model, param, left: BranchPoint, right: BranchPoint, cfg, policy: StepPolicy) -> Event:
    lo, hi = left, right
    while abs(hi.value - lo.value) > policy.bisect_tol:
        mid = 0.5 * (lo.value + hi.value)
        try:
            orbit = _solve_at(model, param, mid, lo.orbit.state0, lo.orbit.period, cfg)
        except HopfDuetError:
            break
        point = BranchPoint(mid, orbit)
        if orbit.unstable_count == lo.orbit.unstable_count:
            lo = point
        else:
            hi = point
    near = lo if abs(abs(lo.orbit.nontrivial).max() - 1) < abs(abs(hi.orbit.nontrivial).max() - 1) else hi
    kind = _crossing_type(model, param, near.orbit, near.value, cfg)
    criticality = ""
    if kind == "TR":
        criticality = "unknown"
        if policy.tag_torus:
            unstable = lo if lo.orbit.unstable_count > hi.orbit.unstable_count else hi
            criticality = _torus_criticality(model, param, unstable.value, unstable.orbit, cfg)
    return Event(
        kind,
        0.5 * (lo.value + hi.value),
        branch=left.orbit.symmetry,
        bracket=(min(lo.value, hi.value), max(lo.value, hi.value)),
        multipliers_before=tuple(lo.orbit.nontrivial),
        multipliers_after=tuple(hi.orbit.nontrivial),
        criticality=criticality,
    )


def follow_branch(
    model: ModelSpec,
    orbit0: OrbitRecord,
    param: str,
    stop: float,
    policy: Optional[StepPolicy] = None,
    cfg: Optional[IntegratorConfig] = None,
) -> Branch:
    """Natural-parameter continuation of a periodic orbit from model's value of `param` to `stop`.

    Events are emitted when the number of multipliers outside the unit circle
    changes; each is bracketed by bisection to `policy.bisect_tol`. Failure to
    converge below `policy.min_step` ends the branch with a FOLD event.
    """
    policy = policy or StepPolicy()
    cfg = cfg or IntegratorConfig()
    start = model.value(param)
    direction = 1.0 if stop >= start else -1.0
    try:
        first = _solve_at(model, param, start, orbit0.state0, orbit0.period, cfg)
    except HopfDuetError as exc:
        raise ConvergenceError(f"initial orbit does not converge at {param}={start}: {exc}") from exc
    points = [BranchPoint(start, first)]
    events: List[Event] = []
    step = policy.initial_step
    stop_reason = "range exhausted"

    while direction * (stop - points[-1].value) > 1e-12:
        if len(points) >= policy.max_points:
            stop_reason = "max points"
            break
        last = points[-1]
        value = last.value + direction * min(step, abs(stop - last.value))
        state, period = last.orbit.state0, last.orbit.period
        if len(points) >= 2:
            prev = points[-2]
            ratio = (value - last.value) / (last.value - prev.value)
            state = last.orbit.state0 + ratio * (last.orbit.state0 - prev.orbit.state0)
            period = last.orbit.period + ratio * (last.orbit.period - prev.orbit.period)
        try:
            orbit = _solve_at(model, param, value, state, period, cfg)
        except HopfDuetError as exc:
            step *= 0.5
            logger.debug("step failed at %s=%.8g (%s); step -> %.3g", param, value, exc, step)
            if step < policy.min_step:
                events.append(Event("FOLD", last.value, branch=last.orbit.symmetry, bracket=(last.value, value)))
                stop_reason = "no convergence"
                break
            continue
        point = BranchPoint(value, orbit)
        if orbit.unstable_count != last.orbit.unstable_count:
            event = _locate_event(model, param, last, point, cfg, policy)
            logger.info("%s event at %s=%.6g", event.type, param, event.p1)
            events.append(event)
        points.append(point)
        if orbit.iterations <= 3:
            step = min(step * policy.grow, policy.max_step)
    return Branch(param, tuple(points), tuple(events), stop_reason)


def origin_hopf_events(model: ModelSpec, param: str, lo: float, hi: float, samples: int = 200) -> List[Event]:
    """Hopf points of the origin along `param`, labelled IP (in-phase block) or AP (anti-phase block)."""
    if model.system_id == "wc-forced":
        return []

    def growth(value: float, sign: int) -> float:
        m = model.with_values(**{param: value})
        if m.system_id.startswith("nf-"):
            c, p = m.coefficients, m.params
            return p.lam + p.eps * (c.alpha_eps0.real + sign * c.beta_eps0.real)
        linear = real_taylor_tensors(m.params)[0]
        block = linear[:2, :2] + sign * linear[:2, 2:]
        return float(np.max(np.linalg.eigvals(block).real))

    grid = np.linspace(lo, hi, samples)
    events = []
    for sign, label in ((1, "IP"), (-1, "AP")):
        values = [growth(v, sign) for v in grid]
        for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
            if fa == 0 or fa * fb < 0:
                root = a if fa == 0 else brentq(growth, a, b, args=(sign,), xtol=1e-12)
                events.append(Event("HB", float(root), branch=label, bracket=(float(a), float(b))))
    return sorted(events, key=lambda e: e.p1)
