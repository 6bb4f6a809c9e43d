"""Tests for the closed-form bifurcation analysis of the normal form."""

import math

import numpy as np
import pytest

from hopfduet.errors import (
    DomainError,
    NotAdmissibleError,
    NotApplicableError,
    SingularChartError,
    SupercriticalityLostError,
)
from hopfduet.nf_analysis import (
    BRANCHES,
    CURVES,
    alpha_bar,
    bautin_estimate,
    bistable,
    cdet,
    classify_case,
    degenerate_trace,
    hopf_criticality,
    hopf_curve_lambda,
    hopf_curve_point,
    jacobian_at_osc,
    k_stb,
    node_type,
    origin_eigenvalues,
    origin_jacobian,
    osc_frequency,
    region_boundaries,
    s_osc,
    second_order,
    summary,
    tr_det_disc,
    uncoupled_catalogue,
    uncoupled_orbit_frequency,
    uncoupled_sd_jacobian,
)
from hopfduet.nf_core import NormalFormCoefficients, UnfoldingParams, nf_reduced_rhs


@pytest.fixture
def bare():
    """No coupling coefficients at all."""
    return NormalFormCoefficients(omega=1.0, alpha01=-1.0 + 0.5j)


class TestReferenceCases:
    """Classification of the reference coefficient sets."""

    def test_m003_case1(self, coeffs_m003):
        case = classify_case(coeffs_m003)
        assert case.case_label == "case1"
        assert case.beta_eps0R_sign == "+"
        assert case.cdet_plus_beta_sign == "+"
        assert case.hopf_subcase == "hopf-possible"
        assert case.trace_branch == "minus"
        assert case.det_branch == "minus"
        assert not case.mirrored
        assert case.cdet == pytest.approx(0.2405, abs=5e-4)

    def test_p003_case2(self, coeffs_p003):
        case = classify_case(coeffs_p003)
        assert case.case_label == "case2"
        assert case.beta_eps0R_sign == "-"
        assert case.trace_branch == "plus"
        assert case.cdet == pytest.approx(0.2300, abs=5e-4)

    def test_bsp0_case3(self, coeffs_0):
        case = classify_case(coeffs_0)
        assert case.case_label == "case3"
        assert case.beta_eps0R_sign == "0"
        assert case.hopf_subcase == "not-applicable"
        assert case.trace_branch is None
        assert case.det_branch == "minus"

    def test_mirrored_case(self):
        """beta_eps0R < 0 with C_det + beta_eps0R < 0 is the mirror image of case 1."""
        c = NormalFormCoefficients(omega=1.0, alpha01=-1.0 + 1.0j, beta_eps0=-0.1 + 0.5j)
        case = classify_case(c)
        assert case.cdet == pytest.approx(-0.5)
        assert case.case_label == "case1m"
        assert case.mirrored
        assert case.trace_branch == "plus"
        assert case.det_branch == "plus"

    def test_hopf_impossible(self):
        """Large beta_eps0R violates the Hopf inequality."""
        c = NormalFormCoefficients(omega=1.0, alpha01=-1.0 - 1.0j, beta_eps0=0.5 + 0.1j)
        case = classify_case(c)
        assert case.case_label == "case1"
        assert case.hopf_subcase == "hopf-impossible"

    @pytest.mark.parametrize(
        "fixture,expected",
        [("coeffs_m003", 0.4182), ("coeffs_p003", 0.4271), ("coeffs_0", 0.4198)],
    )
    def test_bautin_estimates(self, request, fixture, expected):
        c = request.getfixturevalue(fixture)
        assert bautin_estimate(c) == pytest.approx(expected, abs=1e-3)

    def test_k_stb_values(self, coeffs_m003):
        assert k_stb("minus", coeffs_m003) == pytest.approx(52.46, abs=1e-9)
        assert k_stb("plus", coeffs_m003) == pytest.approx(-7.08, abs=1e-9)

    def test_bautin_not_applicable(self):
        c = NormalFormCoefficients(omega=1.0, alpha01=-1.0, alpha_eps2=-1.0)
        with pytest.raises(NotApplicableError):
            bautin_estimate(c)

    def test_summary_keys(self, coeffs_m003):
        info = summary(coeffs_m003)
        assert info["case_label"] == "case1"
        assert info["eps_bautin"] == pytest.approx(0.4182, abs=1e-3)
        assert set(info) == {
            "case_label",
            "hopf_subcase",
            "beta_eps0R_sign",
            "cdet",
            "cdet_plus_beta_sign",
            "trace_branch",
            "det_branch",
            "K_stb_plus",
            "K_stb_minus",
            "eps_bautin",
        }

    def test_cdet_formula(self, generic_coeffs):
        c = generic_coeffs
        assert cdet(c) == pytest.approx(c.beta_eps0.imag * c.alpha01.imag / c.alpha01.real)


class TestOrigin:
    """Linearization and Hopf curves of the origin."""

    def test_eigenvalues(self, generic_coeffs):
        p = UnfoldingParams(0.02, 0.1)
        mu_plus, mu_plus_bar, mu_minus, _ = origin_eigenvalues(p, generic_coeffs)
        c = generic_coeffs
        assert mu_plus == pytest.approx(p.lam + 1j * c.omega + p.eps * (c.alpha_eps0 + c.beta_eps0))
        assert mu_minus == pytest.approx(p.lam + 1j * c.omega + p.eps * (c.alpha_eps0 - c.beta_eps0))
        assert mu_plus_bar == pytest.approx(mu_plus.conjugate())

    def test_jacobian_spectrum(self, generic_coeffs):
        """The explicit origin matrix carries the closed-form eigenvalues."""
        p = UnfoldingParams(0.02, 0.1)
        spectrum = sorted(np.linalg.eigvals(origin_jacobian(p, generic_coeffs)), key=lambda z: z.imag)
        expected = sorted(origin_eigenvalues(p, generic_coeffs), key=lambda z: z.imag)
        np.testing.assert_allclose(spectrum, expected, atol=1e-14)

    def test_degenerate_trace(self, coeffs_0):
        """With Re beta_eps0 = 0 both second-order traces reduce to -2(lambda + eps alpha_eps0R)."""
        p = UnfoldingParams(0.01, 0.02)
        for branch in BRANCHES:
            assert second_order(p, branch, coeffs_0).tr == pytest.approx(degenerate_trace(p, coeffs_0))

    def test_hopf_curve_zero_coupling(self, bare):
        """Without linear coupling both Hopf curves sit at lambda = 0."""
        for branch in BRANCHES:
            assert hopf_curve_lambda(0.3, branch, bare) == 0.0

    def test_alpha_bar_vanishes_on_hopf_curve(self, generic_coeffs):
        for branch in BRANCHES:
            lam = hopf_curve_lambda(0.2, branch, generic_coeffs)
            assert alpha_bar(UnfoldingParams(lam, 0.2), branch, generic_coeffs) == pytest.approx(0.0, abs=1e-15)

    def test_hopf_curve_point(self, generic_coeffs):
        for branch in BRANCHES:
            point = hopf_curve_point(0.2, branch, generic_coeffs)
            assert point.branch == branch
            assert point.eps == 0.2
            assert point.lam == hopf_curve_lambda(0.2, branch, generic_coeffs)
            assert abs(point.alpha_bar) <= 1e-12

    def test_criticality(self, coeffs_m003):
        assert hopf_criticality(0.0, "minus", coeffs_m003) == "supercritical"
        assert hopf_criticality(1.0, "minus", coeffs_m003) == "subcritical"
        assert hopf_criticality(1.0, "plus", coeffs_m003) == "supercritical"

    def test_invalid_branch(self, bare):
        with pytest.raises(DomainError):
            hopf_curve_lambda(0.1, "sideways", bare)


class TestOscillatingBranches:
    """Amplitude, frequency and Jacobian of the phase-locked solutions."""

    def test_uncoupled_amplitude(self, bare):
        point = s_osc(UnfoldingParams(0.1, 0.0), "plus", bare)
        assert point.s_osc == pytest.approx(math.sqrt(0.4))

    def test_on_hopf_curve(self, bare):
        assert s_osc(UnfoldingParams(0.0, 0.0), "minus", bare).s_osc == 0.0

    def test_not_admissible(self, bare):
        with pytest.raises(NotAdmissibleError):
            s_osc(UnfoldingParams(-0.1, 0.0), "plus", bare)

    def test_supercriticality_lost(self):
        c = NormalFormCoefficients(omega=1.0, alpha01=-1.0, alpha_eps2=10.0)
        with pytest.raises(SupercriticalityLostError):
            s_osc(UnfoldingParams(0.1, 0.2), "plus", c)

    def test_uncoupled_frequency(self, bare):
        p = UnfoldingParams(0.1, 0.0)
        assert osc_frequency(p, "plus", bare) == pytest.approx(uncoupled_orbit_frequency(0.1, bare))
        assert uncoupled_orbit_frequency(0.1, bare) == pytest.approx(1.0 + 0.1 * 0.5)

    def test_branch_is_equilibrium(self, generic_coeffs):
        """(s_osc, 0, 0 or pi) is an equilibrium of the reduced field."""
        p = UnfoldingParams(0.1, 0.02)
        for branch, dphi in (("plus", 0.0), ("minus", math.pi)):
            s = s_osc(p, branch, generic_coeffs).s_osc
            rates = nf_reduced_rhs(0.0, np.array([s, 0.0, dphi]), p, generic_coeffs)
            np.testing.assert_allclose(rates, 0.0, atol=1e-14)

    @pytest.mark.parametrize("branch", BRANCHES)
    def test_jacobian_against_finite_differences(self, generic_coeffs, branch):
        p = UnfoldingParams(0.1, 0.02)
        s = s_osc(p, branch, generic_coeffs).s_osc
        y0 = np.array([s, 0.0, 0.0 if branch == "plus" else math.pi])
        h = 1e-6
        fd = np.column_stack(
            [
                (nf_reduced_rhs(0.0, y0 + h * e, p, generic_coeffs) - nf_reduced_rhs(0.0, y0 - h * e, p, generic_coeffs))
                / (2 * h)
                for e in np.eye(3)
            ]
        )
        np.testing.assert_allclose(jacobian_at_osc(p, branch, generic_coeffs), fd, atol=1e-7)

    def test_jacobian_singular_on_curve(self, bare):
        with pytest.raises(SingularChartError):
            jacobian_at_osc(UnfoldingParams(0.0, 0.0), "plus", bare)


class TestStability:
    """Trace, determinant and discriminant of the (d, dphi) block."""

    @pytest.mark.parametrize("branch", BRANCHES)
    def test_second_order_accuracy(self, generic_coeffs, branch):
        """Closed forms approach the exact block as (lambda, eps) -> 0 along a ray."""

        def errors(t):
            report = tr_det_disc(UnfoldingParams(t, t), branch, generic_coeffs)
            return (
                abs(report.tr - report.tr2),
                abs(report.det - report.det2),
                abs(report.disc / 4 - report.xi2),
            )

        full = errors(1e-3)
        half = errors(5e-4)
        assert half[0] <= 0.3 * full[0] + 1e-15
        assert half[1] <= 0.16 * full[1] + 1e-15
        assert half[2] <= 0.16 * full[2] + 1e-15

    def test_second_order_trace_formula(self, generic_coeffs):
        p = UnfoldingParams(0.01, 0.02)
        c = generic_coeffs
        approx = second_order(p, "minus", c)
        assert approx.tr == pytest.approx(-2 * (p.lam + p.eps * (c.alpha_eps0.real - 3 * c.beta_eps0.real)))
        assert approx.mu2 + approx.mu3 == pytest.approx(approx.tr)

    def test_uncoupled_block_degenerate(self, bare):
        """At eps = 0 the phase difference is neutral."""
        report = tr_det_disc(UnfoldingParams(0.1, 0.0), "plus", bare)
        assert report.node_type == "degenerate"
        assert report.tr == pytest.approx(-0.2)
        assert report.mu1.real == pytest.approx(-0.2)

    def test_node_types(self):
        assert node_type(-1.0, -0.5, 3.0) == "saddle-1u"
        assert node_type(-1.0, 0.2, 0.2) == "stable-node"
        assert node_type(-1.0, 0.5, -1.0) == "stable-focus"
        assert node_type(1.0, 0.2, 0.2) == "saddle-2u"
        assert node_type(1.0, 0.5, -1.0) == "saddle-focus"
        assert node_type(0.0, 0.0, 0.0) == "degenerate"

    def test_in_phase_locking(self):
        """Positive real linear coupling stabilises in-phase and destabilises anti-phase."""
        c = NormalFormCoefficients(omega=1.0, alpha01=-1.0, beta_eps0=0.2)
        p = UnfoldingParams(0.1, 0.05)
        assert tr_det_disc(p, "plus", c).stable
        assert tr_det_disc(p, "minus", c).node_type == "saddle-1u"


class TestBistability:
    """Bistable window of the case-1 reference set."""

    def test_inside_window(self, coeffs_m003):
        assert bistable(UnfoldingParams(0.008, 0.05), coeffs_m003)

    def test_outside_window(self, coeffs_m003):
        assert not bistable(UnfoldingParams(0.05, 0.05), coeffs_m003)
        assert not bistable(UnfoldingParams(-0.01, 0.05), coeffs_m003)

    def test_on_hopf_point(self, coeffs_m003):
        assert not bistable(UnfoldingParams(0.0, 0.0), coeffs_m003)


class TestRegionBoundaries:
    """Sampled boundary curves in the (lambda, eps) plane."""

    def test_ordering(self, coeffs_m003):
        points = region_boundaries(np.linspace(0.1, 0.0, 6), "both", coeffs_m003)
        keys = [(BRANCHES.index(p.branch), CURVES.index(p.curve), p.eps, p.lam) for p in points]
        assert keys == sorted(keys)
        assert {p.curve for p in points} >= {"HB", "TR0"}

    def test_hopf_curves(self, coeffs_m003):
        points = region_boundaries([0.1], "minus", coeffs_m003)
        hb = [p for p in points if p.curve == "HB"]
        assert len(hb) == 1
        assert hb[0].lam == pytest.approx(0.1 * 0.0047)
        assert hb[0].admissible

    def test_zero_coupling_hopf_at_origin(self, bare):
        points = region_boundaries([0.0, 0.05], "both", bare)
        assert all(p.lam == 0.0 for p in points if p.curve == "HB")

    def test_det_zero_on_second_order_det(self, coeffs_m003):
        for point in region_boundaries([0.05], "minus", coeffs_m003):
            if point.curve == "DET0":
                assert second_order(UnfoldingParams(point.lam, point.eps), "minus", coeffs_m003).det == pytest.approx(
                    0.0, abs=1e-12
                )

    def test_invalid_arguments(self, coeffs_m003):
        with pytest.raises(DomainError):
            region_boundaries([0.1], "both", coeffs_m003, method="guess")
        with pytest.raises(DomainError):
            region_boundaries([-0.1], "both", coeffs_m003)

    def test_exact_hopf_matches_second_order(self, coeffs_m003):
        exact = [p for p in region_boundaries([0.05], "plus", coeffs_m003, "exact") if p.curve == "HB"]
        approx = [p for p in region_boundaries([0.05], "plus", coeffs_m003) if p.curve == "HB"]
        assert exact[0].lam == pytest.approx(approx[0].lam)


class TestUncoupled:
    """Invariant objects of the eps = 0 system."""

    def test_below_hopf(self, bare):
        objects = uncoupled_catalogue(-0.1, bare)
        assert [o.name for o in objects] == ["S0"]
        assert objects[0].stable

    def test_above_hopf(self, bare):
        objects = {o.name: o for o in uncoupled_catalogue(0.1, bare)}
        assert set(objects) == {"S0", "T0", "S2", "S3"}
        assert objects["T0"].s == pytest.approx(math.sqrt(0.4))
        assert objects["S2"].s == pytest.approx(math.sqrt(0.1))
        assert objects["S2"].d == pytest.approx(math.sqrt(0.1))
        assert objects["S3"].d == pytest.approx(-math.sqrt(0.1))
        assert [name for name, o in objects.items() if o.stable] == ["T0"]

    def test_sd_jacobian_matches_exponents(self, bare):
        """Eigenvalues of the (s, d) Jacobian are the catalogued amplitude exponents."""
        lam = 0.1
        for obj in uncoupled_catalogue(lam, bare):
            jac = uncoupled_sd_jacobian(obj.s, obj.d, lam, bare)
            found = np.sort(np.linalg.eigvals(jac).real)
            expected = np.sort([e.real for e in obj.exponents])
            np.testing.assert_allclose(found, expected, atol=1e-12)
