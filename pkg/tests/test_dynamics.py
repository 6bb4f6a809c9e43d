"""Tests for integration, periodic orbits, phase measurement, classification and sweeps."""

import math

import numpy as np
import pytest

from hopfduet.dynamics import (
    MAX_CELLS,
    Axis,
    ClassifyConfig,
    IntegratorConfig,
    ModelSpec,
    StepPolicy,
    Trajectory,
    circular_mean,
    circular_spread,
    classify_attractor,
    fd_monodromy,
    find_periodic_orbit,
    floquet,
    flow_with_monodromy,
    follow_branch,
    integrate,
    integrate_rhs,
    make_system,
    measure_phase_difference,
    nf_orbit_guess,
    nontrivial_multipliers,
    origin_hopf_events,
    phase_difference_from_signals,
    phase_series,
    rk4_step,
    sweep,
    symmetry_class,
)
from hopfduet.errors import DomainError, IntegrationError, NoOscillationError, NotApplicableError
from hopfduet.nf_analysis import region_boundaries, uncoupled_catalogue, uncoupled_orbit_frequency
from hopfduet.nf_core import NormalFormCoefficients, UnfoldingParams
from hopfduet.nf_extract import extract_coefficients, orbit_guess
from hopfduet.presets import params_p
from hopfduet.wc_model import ForcingParams


@pytest.fixture
def locking():
    """Real linear coupling only: in-phase locking, anti-phase repelling."""
    return NormalFormCoefficients(omega=1.0, alpha01=-1.0, beta_eps0=0.2)


@pytest.fixture
def nf_model(locking):
    return ModelSpec("nf-cartesian", UnfoldingParams(0.1, 0.05), locking)


class TestIntegration:
    """Fixed-step and adaptive integration."""

    def test_rk4_step(self):
        y = rk4_step(lambda t, y: y, 0.0, 0.1, np.array([1.0]))
        assert y[0] == pytest.approx(math.exp(0.1), rel=1e-6)

    def test_rk4_integrator(self):
        cfg = IntegratorConfig(method="rk4", rk4_step=0.01)
        t, y = integrate_rhs(lambda t, y: -y, np.array([1.0, 2.0]), (0.0, 1.0), cfg)
        assert t[-1] == pytest.approx(1.0)
        np.testing.assert_allclose(y[-1], [math.exp(-1.0), 2 * math.exp(-1.0)], rtol=1e-8)

    def test_uncoupled_limit_cycle_radius(self, locking):
        """Each uncoupled oscillator settles on |z| = sqrt(-lambda / Re alpha01)."""
        system = make_system("nf-cartesian", UnfoldingParams(0.1, 0.0), locking)
        traj = integrate(system, [0.1, 0.0, 0.05, 0.1], (0.0, 200.0))
        z1 = complex(traj.final[0], traj.final[1])
        z2 = complex(traj.final[2], traj.final[3])
        assert abs(z1) == pytest.approx(math.sqrt(0.1), abs=1e-6)
        assert abs(z2) == pytest.approx(math.sqrt(0.1), abs=1e-6)

    def test_state_length_checked(self, nf_model):
        with pytest.raises(DomainError):
            integrate(nf_model.system(), [0.1, 0.0, 0.1], (0.0, 1.0))

    def test_max_time(self, nf_model):
        with pytest.raises(IntegrationError, match="max_time"):
            integrate(nf_model.system(), [0.1, 0.0, 0.1, 0.0], (0.0, 10.0), IntegratorConfig(max_time=1.0))

    def test_config_validation(self):
        with pytest.raises(DomainError):
            IntegratorConfig(method="euler")
        with pytest.raises(DomainError):
            IntegratorConfig(solver="LSODA")
        with pytest.raises(DomainError):
            IntegratorConfig(rel_tol=0.0)

    def test_monodromy_matches_finite_differences(self):
        system = make_system("wc", params_p(3.1, eps=0.3, b_sp=-0.03))
        state = np.array([0.05, -0.02, -0.03, 0.04])
        _, variational = flow_with_monodromy(system, state, 0.0, 1.0, IntegratorConfig())
        np.testing.assert_allclose(variational, fd_monodromy(system, state, 1.0), atol=1e-5)


class TestSystems:
    """Model records and system construction."""

    def test_validation(self, locking):
        with pytest.raises(DomainError):
            ModelSpec("nf-cartesian", params_p())
        with pytest.raises(DomainError):
            ModelSpec("nf-polar", UnfoldingParams(0.1, 0.05), locking)
        with pytest.raises(DomainError):
            ModelSpec("wc", UnfoldingParams(0.1, 0.05))
        with pytest.raises(DomainError, match="forcing"):
            ModelSpec("wc-forced", params_p())

    def test_with_values_routes_names(self):
        model = ModelSpec("wc-forced", params_p(), forcing=ForcingParams(A=1.0))
        changed = model.with_values(A=2.0, eps=0.3)
        assert changed.forcing.A == 2.0
        assert changed.params.eps == 0.3
        assert model.forcing.A == 1.0
        assert changed.value("eps") == 0.3
        assert "f" in changed.parameter_names()

    def test_with_values_unknown(self, nf_model):
        with pytest.raises(DomainError, match="omega"):
            nf_model.with_values(omega=2.0)
        with pytest.raises(DomainError):
            nf_model.value("A")

    def test_forced_periods(self):
        system = make_system("wc-forced", params_p(), forcing=ForcingParams(A=1.0, f=2.5))
        assert not system.autonomous
        assert system.forcing_period == pytest.approx(0.2)
        assert system.input_period == pytest.approx(0.1)
        assert system.symmetry_shift == pytest.approx(0.1)

    def test_reduced_swap(self, locking):
        system = make_system("nf-reduced", UnfoldingParams(0.1, 0.05), locking)
        swapped = system.swap(np.array([0.5, 0.1, 0.4]))
        assert swapped == pytest.approx([0.5, -0.1, 2 * math.pi - 0.4])
        with pytest.raises(NotApplicableError):
            system.observables(np.array([0.5, 0.1, 0.4]))


class TestPhaseMeasurement:
    """Phase difference from signals and amplitudes."""

    def test_peak_phase(self):
        t = np.linspace(0.0, 100.0, 20001)
        phase = phase_difference_from_signals(t, np.cos(1.3 * t), np.cos(1.3 * t + 0.7))
        assert phase == pytest.approx(0.7, abs=1e-3)

    def test_wc_trajectory(self):
        t = np.linspace(0.0, 100.0, 20001)
        y = np.column_stack([np.cos(t), np.sin(t), np.cos(t + 0.7), np.sin(t + 0.7)])
        assert measure_phase_difference(Trajectory("wc", t, y)) == pytest.approx(0.7, abs=1e-3)

    def test_nf_trajectory(self):
        t = np.linspace(0.0, 50.0, 2001)
        z1 = np.exp(1j * t)
        z2 = np.exp(1j * (t + 0.7))
        y = np.column_stack([z1.real, z1.imag, z2.real, z2.imag])
        assert measure_phase_difference(Trajectory("nf-cartesian", t, y)) == pytest.approx(0.7, abs=1e-12)

    def test_reduced_trajectory(self):
        y = np.array([[0.5, 0.0, 0.3], [0.5, 0.0, 2 * math.pi + 0.2]])
        assert measure_phase_difference(Trajectory("nf-reduced", np.array([0.0, 1.0]), y)) == pytest.approx(0.2)

    def test_no_oscillation(self):
        t = np.linspace(0.0, 10.0, 1001)
        with pytest.raises(NoOscillationError):
            phase_series(t, np.zeros_like(t), np.cos(t))

    def test_circular_statistics(self):
        assert circular_mean([0.2, 0.4]) == pytest.approx(0.3)
        assert circular_mean([math.pi - 0.1, math.pi + 0.1]) == pytest.approx(math.pi)
        assert circular_spread([0.2, 0.4]) == pytest.approx(0.1)

    def test_nontrivial_multipliers(self):
        assert list(nontrivial_multipliers([1.0, 0.5, 0.2], autonomous=True)) == [0.5, 0.2]
        assert len(nontrivial_multipliers([1.0, 0.5, 0.2], autonomous=False)) == 3


class TestPeriodicOrbits:
    """Shooting on the normal-form rotating waves."""

    def test_in_phase_orbit(self, nf_model, locking):
        state, period = nf_orbit_guess(nf_model.params, "plus", locking)
        orbit = find_periodic_orbit(nf_model.system(), state, period)
        assert orbit.period == pytest.approx(2 * math.pi, rel=1e-8)
        assert orbit.symmetry == "IP"
        assert orbit.stable
        assert orbit.dphi == pytest.approx(0.0, abs=1e-6)
        assert abs(abs(orbit.floquet[0]) - 1.0) < 1e-4

    def test_anti_phase_orbit(self, nf_model, locking):
        state, period = nf_orbit_guess(nf_model.params, "minus", locking)
        orbit = find_periodic_orbit(nf_model.system(), state, period)
        assert orbit.symmetry == "AP"
        assert not orbit.stable
        assert orbit.unstable_count >= 1
        assert orbit.dphi == pytest.approx(math.pi, abs=1e-6)

    def test_floquet_recomputed(self, nf_model, locking):
        state, period = nf_orbit_guess(nf_model.params, "plus", locking)
        system = nf_model.system()
        orbit = find_periodic_orbit(system, state, period)
        np.testing.assert_allclose(np.sort(np.abs(floquet(system, orbit))), np.sort(np.abs(orbit.floquet)), atol=1e-6)

    @pytest.mark.parametrize("shift,label", [(0.0, "IP"), (math.pi, "AP"), (0.7, "asym")])
    def test_symmetry_class_synthetic(self, shift, label):
        t = np.linspace(0.0, 2 * math.pi, 256, endpoint=False)
        samples = np.column_stack([np.cos(t), np.sin(t), np.cos(t + shift), np.sin(t + shift)])
        found, residual = symmetry_class(make_system("wc", params_p()), samples, 2 * math.pi)
        assert found == label
        if label != "asym":
            assert residual < 1e-10

    def test_reduced_chart_rejected(self, locking):
        system = make_system("nf-reduced", UnfoldingParams(0.1, 0.05), locking)
        with pytest.raises(NotApplicableError):
            find_periodic_orbit(system, [0.5, 0.0, 0.0], 2 * math.pi)

    def test_bad_period(self, nf_model):
        with pytest.raises(DomainError):
            find_periodic_orbit(nf_model.system(), [0.3, 0.0, 0.3, 0.0], 0.0)

    @pytest.mark.parametrize("period", [0.05, 0.3, 0.5])
    def test_forced_period_must_be_base_multiple(self, period):
        """Forced orbits are shot over k/(2f); f = 2.5 gives a base period of 0.2."""
        system = make_system("wc-forced", params_p(), forcing=ForcingParams(A=1.0, f=2.5))
        with pytest.raises(DomainError, match="forcing base periods"):
            find_periodic_orbit(system, [0.1, 0.05, -0.1, 0.05], period)

    @pytest.mark.slow
    def test_follow_in_phase_branch(self, nf_model, locking):
        state, period = nf_orbit_guess(nf_model.params, "plus", locking)
        orbit = find_periodic_orbit(nf_model.system(), state, period)
        branch = follow_branch(nf_model, orbit, "lam", 0.12, StepPolicy(initial_step=5e-3, max_step=1e-2))
        assert branch.stop_reason == "range exhausted"
        assert branch.points[-1].value == pytest.approx(0.12)
        assert branch.events == ()
        assert all(point.orbit.stable for point in branch.points)


class TestOriginHopf:
    """Hopf points of the origin from its linearization."""

    def test_normal_form(self):
        c = NormalFormCoefficients(omega=1.0, alpha01=-1.0, beta_eps0=0.1)
        model = ModelSpec("nf-cartesian", UnfoldingParams(0.0, 0.1), c)
        events = origin_hopf_events(model, "lam", -0.05, 0.05)
        assert [e.branch for e in events] == ["IP", "AP"]
        assert events[0].p1 == pytest.approx(-0.01, abs=1e-9)
        assert events[1].p1 == pytest.approx(0.01, abs=1e-9)
        assert all(e.type == "HB" for e in events)

    def test_wilson_cowan_uncoupled(self):
        events = origin_hopf_events(ModelSpec("wc", params_p(3.0)), "lambda_slope", 2.9, 3.1)
        assert {e.branch for e in events} == {"IP", "AP"}
        assert all(e.p1 == pytest.approx(3.0236, abs=2e-3) for e in events)

    def test_forced_has_none(self):
        model = ModelSpec("wc-forced", params_p(), forcing=ForcingParams(A=1.0))
        assert origin_hopf_events(model, "A", 0.0, 1.0) == []


class TestClassification:
    """Attractor labels and parameter sweeps."""

    def test_classify_config_validation(self):
        with pytest.raises(DomainError):
            ClassifyConfig(samples_per_period=4)
        with pytest.raises(DomainError):
            ClassifyConfig(phase_tol=0.0)

    def test_axis(self):
        assert list(Axis("lam", 0.0, 1.0, 3).values) == [0.0, 0.5, 1.0]
        with pytest.raises(DomainError):
            Axis("lam", 0.0, 1.0, 0)

    def test_sweep_cell_limit(self, nf_model):
        with pytest.raises(DomainError, match=str(MAX_CELLS)):
            sweep(nf_model, Axis("lam", 0.0, 0.1, 101), Axis("eps", 0.0, 0.1, 100))

    def test_sweep_unknown_parameter(self, nf_model):
        with pytest.raises(DomainError):
            sweep(nf_model, Axis("A", 0.0, 1.0, 2))

    @pytest.mark.slow
    def test_locks_in_phase(self, nf_model):
        ics = [("symmetric", [0.1, 0.0, 0.1, 0.0]), ("quarter", [0.1, 0.0, 0.0, 0.1])]
        result = classify_attractor(nf_model.system(), ics)
        assert result.key == "IP"
        assert all(abs(math.remainder(o.dphi, 2 * math.pi)) < 0.05 for o in result.outcomes)

    @pytest.mark.slow
    def test_decays_below_threshold(self, nf_model):
        system = nf_model.with_values(lam=-0.1).system()
        assert classify_attractor(system, [("symmetric", [0.1, 0.0, 0.1, 0.0])]).key == "FP"

    @pytest.mark.slow
    def test_one_dimensional_sweep(self, nf_model):
        diagram = sweep(
            nf_model, Axis("lam", -0.1, 0.1, 3), ic_set=[("symmetric", [0.1, 0.0, 0.1, 0.0])], bisect_tol=None
        )
        assert diagram.regimes() == ["FP", "IP"]
        assert [e.type for e in diagram.events] == ["HB"]
        rows = diagram.rows()
        assert rows[0][2] == "FP"
        assert rows[0][3] == "HB"


@pytest.mark.slow
class TestReferenceBehaviour:
    """Simulation against closed forms, the analytic boundaries and the Wilson-Cowan reference runs."""

    def test_radial_closed_form(self):
        """Uncoupled |z1| follows r^2 = lam r0^2 e^(2 lam t) / (lam + r0^2 (e^(2 lam t) - 1))."""
        c = NormalFormCoefficients(omega=1.0, alpha01=-1.0 - 1.0j)
        system = make_system("nf-cartesian", UnfoldingParams(1.0, 0.0), c)
        t = np.linspace(0.0, 10.0, 201)
        traj = integrate(system, [0.1, 0.0, 0.0, 0.0], (0.0, 10.0), t_eval=t)
        growth = np.exp(2.0 * t)
        expected = np.sqrt(0.01 * growth / (1.0 + 0.01 * (growth - 1.0)))
        radius = np.hypot(traj.y[:, 0], traj.y[:, 1])
        assert np.abs(radius - expected).max() <= 1e-6

    def test_symmetric_states_stay_symmetric(self, locking):
        systems = [
            (make_system("nf-cartesian", UnfoldingParams(0.1, 0.05), locking), [0.2, 0.1, 0.2, 0.1]),
            (make_system("wc", params_p(3.05, eps=0.05, b_sp=-0.03)), [0.1, 0.05, 0.1, 0.05]),
        ]
        for system, state0 in systems:
            traj = integrate(system, state0, (0.0, 100 * system.period_hint))
            assert np.abs(traj.y[:, :2] - traj.y[:, 2:]).max() <= 1e-10

    def test_uncoupled_multipliers(self):
        """Floquet multipliers of T0 and S2 are exp(exponent * T) of the uncoupled catalogue."""
        lam = 0.1
        c = NormalFormCoefficients(omega=1.0, alpha01=-1.0 + 0.5j)
        system = make_system("nf-cartesian", UnfoldingParams(lam, 0.0), c)
        catalogue = {obj.name: obj for obj in uncoupled_catalogue(lam, c)}
        r = math.sqrt(lam)
        period = 2 * math.pi / uncoupled_orbit_frequency(lam, c)
        for name, state in (("T0", [r, 0.0, r, 0.0]), ("S2", [r, 0.0, 0.0, 0.0])):
            orbit = find_periodic_orbit(system, state, period)
            assert orbit.period == pytest.approx(period, rel=1e-8)
            found = np.asarray(orbit.floquet)
            expected = np.exp(np.asarray(catalogue[name].full_exponents, dtype=complex) * orbit.period)
            for value in expected:
                assert np.abs(found - value).min() <= 1e-5, name

    def test_normal_form_boundaries_match_exact_curves(self, coeffs_0):
        """Floquet events along both locked branches sit on the exact TR0/DET0 roots."""
        lo, hi, eps = 0.004, 0.04, 0.05
        exact = region_boundaries([eps], "both", coeffs_0, "exact", lam_span=0.05)
        for branch in ("plus", "minus"):
            p = UnfoldingParams(lo, eps)
            model = ModelSpec("nf-cartesian", p, coeffs_0)
            state, period = nf_orbit_guess(p, branch, coeffs_0)
            orbit0 = find_periodic_orbit(model.system(), state, period)
            found = sorted(e.p1 for e in follow_branch(model, orbit0, "lam", hi).events)
            expected = sorted(
                pt.lam
                for pt in exact
                if pt.branch == branch and pt.curve in ("TR0", "DET0") and lo < pt.lam < hi
            )
            if branch == "minus":
                assert expected
            assert len(found) == len(expected), branch
            for got, want in zip(found, expected):
                assert got == pytest.approx(want, abs=1e-3)

    def test_in_phase_and_anti_phase_coexist(self):
        system = make_system("wc", params_p(3.05, eps=0.05, b_sp=-0.03))
        result = classify_attractor(system)
        assert result.key == "AP+IP"
        for outcome in result.outcomes:
            target = 0.0 if outcome.label == "IP" else math.pi
            assert abs(math.remainder(outcome.dphi - target, 2 * math.pi)) <= 0.05

    def test_anti_phase_event_order(self):
        """AP is born at HB, loses stability at a supercritical TR, then meets a PF."""
        p = params_p(3.0248, eps=0.05, b_sp=-0.03)
        model = ModelSpec("wc", p)
        state, period = orbit_guess(p, "minus", extract_coefficients(p))
        orbit0 = find_periodic_orbit(model.system(), state, period)
        assert orbit0.symmetry == "AP"
        events = follow_branch(model, orbit0, "lambda_slope", 3.07).events
        births = [e for e in origin_hopf_events(model, "lambda_slope", 3.0, 3.07) if e.branch == "AP"]
        assert [e.type for e in events[:2]] == ["TR", "PF"]
        assert births and births[0].p1 < events[0].p1 < events[1].p1

    def test_sweep_is_deterministic(self, nf_model):
        cfg = ClassifyConfig(transient_periods=50.0, window_periods=10.0)
        axes = (Axis("lam", -0.05, 0.1, 3), Axis("eps", 0.0, 0.1, 2))
        first = sweep(nf_model, *axes, config=cfg, bisect_tol=1e-2)
        second = sweep(nf_model, *axes, config=cfg, jobs=2, bisect_tol=1e-2)
        assert first.cells == second.cells
        assert [(e.type, e.p1, e.p2) for e in first.events] == [(e.type, e.p1, e.p2) for e in second.events]
