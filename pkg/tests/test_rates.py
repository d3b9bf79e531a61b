"""Holevo bounds, trust-level orderings, and asymptotic rates."""

import math

import numpy as np
import pytest

from cvqkd.gaussian import CovarianceMatrix, entropic_h, two_mode_blocks
from cvqkd.noise import hybrid_trust_split
from cvqkd.rates import (
    ChannelPoint,
    SecurityType,
    TrustLevel,
    asymptotic_rate,
    bob_variance,
    eve_joint_cm,
    holevo,
    holevo_los,
    holevo_los_from_coefficients,
    holevo_standard,
    holevo_untrusted_closed_form,
    los_coefficients,
    microwave_los_cm,
    mutual_information,
    plob_thermal_bound,
)


def point(tau=0.25, eta_eff=1.0, n_b=0.0, n_ex=0.01, nu_det=2, mu=10.0) -> ChannelPoint:
    return ChannelPoint(eta_ch=tau / eta_eff, eta_eff=eta_eff, n_b=n_b, n_ex=n_ex,
                        nu_det=nu_det, mu=mu)


class TestChannelPoint:
    def test_derived_quantities(self):
        ch = ChannelPoint(eta_ch=0.5, eta_eff=0.7, n_b=0.02, n_ex=0.003, nu_det=2, mu=10.0)
        assert ch.tau == pytest.approx(0.35)
        assert ch.nbar == pytest.approx(0.7 * 0.02 + 0.003)
        assert ch.sigma_x2 == pytest.approx(9.0)

    def test_bob_variance_anchor(self):
        ch = point(tau=0.25, n_ex=0.01, mu=10.0)
        assert bob_variance(ch) == pytest.approx(0.25 * 9.0 + 0.02 + 1.0)
        assert bob_variance(ch) == pytest.approx(3.27)

    def test_from_estimates_round_trip(self):
        ch = ChannelPoint.from_estimates(tau=0.35, eta_eff=0.7, nbar=0.0173,
                                         n_b=0.02, nu_det=2, mu=10.0)
        assert ch.tau == pytest.approx(0.35)
        assert ch.nbar == pytest.approx(0.0173)
        assert ch.n_ex == pytest.approx(0.0173 - 0.014)

    def test_from_estimates_validation(self):
        with pytest.raises(ValueError):
            ChannelPoint.from_estimates(tau=0.8, eta_eff=0.7, nbar=0.1, n_b=0.0,
                                        nu_det=2, mu=10.0)
        with pytest.raises(ValueError):
            ChannelPoint.from_estimates(tau=0.3, eta_eff=0.7, nbar=0.001, n_b=0.1,
                                        nu_det=2, mu=10.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            ChannelPoint(eta_ch=0.0, eta_eff=1.0, n_b=0.0, n_ex=0.0, nu_det=2, mu=10.0)
        with pytest.raises(ValueError):
            ChannelPoint(eta_ch=0.5, eta_eff=1.0, n_b=-0.1, n_ex=0.0, nu_det=2, mu=10.0)
        with pytest.raises(ValueError):
            ChannelPoint(eta_ch=0.5, eta_eff=1.0, n_b=0.0, n_ex=0.0, nu_det=3, mu=10.0)
        with pytest.raises(ValueError):
            ChannelPoint(eta_ch=0.5, eta_eff=1.0, n_b=0.0, n_ex=0.0, nu_det=2, mu=0.5)


class TestMutualInformation:
    def test_closed_form(self):
        ch = point(tau=0.25, n_ex=0.01, nu_det=2, mu=10.0)
        chi_n = (2.0 * 0.01 + 2.0) / 0.25
        assert mutual_information(ch) == pytest.approx(math.log2(1.0 + 9.0 / chi_n))

    def test_monotonicities(self):
        base = mutual_information(point())
        assert mutual_information(point(mu=20.0)) > base
        assert mutual_information(point(n_ex=0.1)) < base
        assert mutual_information(point(tau=0.5)) > base


class TestDualDerivation:
    def test_closed_form_matches_conditioning_path(self):
        taus = np.linspace(0.05, 0.95, 13)
        nbars = (0.0, 0.05, 0.2)
        mus = (2.0, 10.0, 50.0)
        for nu_det in (1, 2):
            for tau in taus:
                for nbar in nbars:
                    for mu in mus:
                        ch = point(tau=float(tau), n_ex=nbar, nu_det=nu_det, mu=mu)
                        chi_cm = holevo_standard(ch, TrustLevel.UNTRUSTED)
                        chi_cf = holevo_untrusted_closed_form(ch)
                        assert abs(chi_cm - chi_cf) <= 1e-9

    def test_eve_dilation_is_bona_fide_across_grid(self):
        for trust in TrustLevel:
            for tau in np.linspace(0.05, 0.95, 7):
                ch = ChannelPoint(eta_ch=float(tau), eta_eff=0.7, n_b=0.02,
                                  n_ex=0.003, nu_det=2, mu=10.0)
                state = eve_joint_cm(ch, trust)
                CovarianceMatrix(state.joint).require_physical()


class TestTrustAndSecurityOrdering:
    GRID = [
        dict(eta_ch=e, eta_eff=0.7, n_b=0.019, n_ex=0.003, nu_det=nu, mu=10.0)
        for e in (0.1, 0.3, 0.6, 0.9)
        for nu in (1, 2)
    ]

    def test_holevo_grows_with_distrust(self):
        for kw in self.GRID:
            ch = ChannelPoint(**kw)
            chi1 = holevo_standard(ch, TrustLevel.PASSIVE)
            chi2 = holevo_standard(ch, TrustLevel.TRUSTED_NOISE)
            chi3 = holevo_standard(ch, TrustLevel.UNTRUSTED)
            assert chi1 <= chi2 + 1e-12
            assert chi2 <= chi3 + 1e-12

    def test_los_never_exceeds_standard(self):
        for kw in self.GRID:
            ch = ChannelPoint(**kw)
            for trust in (TrustLevel.PASSIVE, TrustLevel.TRUSTED_NOISE):
                assert holevo_los(ch, trust) <= holevo_standard(ch, trust) + 1e-12

    def test_rate_ordering_follows(self):
        for kw in self.GRID:
            ch = ChannelPoint(**kw)
            r1, r2, r3 = (
                asymptotic_rate(ch, t, SecurityType.STANDARD, 0.95).rate
                for t in TrustLevel
            )
            assert r3 <= r2 + 1e-12 and r2 <= r1 + 1e-12

    def test_untrusted_is_max_of_all_securities(self):
        # the untrusted Holevo dominates even the LoS-trusted variants
        for kw in self.GRID:
            ch = ChannelPoint(**kw)
            chi3 = holevo_standard(ch, TrustLevel.UNTRUSTED)
            for trust in (TrustLevel.PASSIVE, TrustLevel.TRUSTED_NOISE):
                assert holevo_los(ch, trust) <= chi3 + 1e-12


class TestHybridTrustEquivalence:
    def test_trusted_noise_with_folded_setup_equals_untrusted(self):
        # Crediting Eve with the setup photons via an adjusted background
        # makes the trusted-noise dilation coincide with the untrusted one.
        for tau in (0.2, 0.45, 0.65):
            for nu_det in (1, 2):
                ch3 = ChannelPoint(eta_ch=tau / 0.7, eta_eff=0.7, n_b=0.019,
                                   n_ex=0.003, nu_det=nu_det, mu=10.0)
                n_b_adj = hybrid_trust_split(0.019, 0.003, 0.7)
                ch2 = ChannelPoint(eta_ch=tau / 0.7, eta_eff=0.7, n_b=n_b_adj,
                                   n_ex=0.0, nu_det=nu_det, mu=10.0)
                assert holevo_standard(ch2, TrustLevel.TRUSTED_NOISE) == pytest.approx(
                    holevo_standard(ch3, TrustLevel.UNTRUSTED), abs=1e-12
                )


class TestIdentityChannel:
    def test_holevo_vanishes(self):
        ch = ChannelPoint(eta_ch=1.0, eta_eff=1.0, n_b=0.0, n_ex=0.01, nu_det=2, mu=10.0)
        for trust in TrustLevel:
            assert holevo_standard(ch, trust) == 0.0
        for trust in (TrustLevel.PASSIVE, TrustLevel.TRUSTED_NOISE):
            assert holevo_los(ch, trust) == 0.0

    def test_dilation_constructor_raises(self):
        ch = ChannelPoint(eta_ch=1.0, eta_eff=1.0, n_b=0.0, n_ex=0.01, nu_det=2, mu=10.0)
        with pytest.raises(ValueError):
            eve_joint_cm(ch, TrustLevel.PASSIVE)
        with pytest.raises(ValueError):
            eve_joint_cm(ch, TrustLevel.UNTRUSTED)
        with pytest.raises(ValueError):
            los_coefficients(ch, TrustLevel.PASSIVE)

    def test_passive_guard_keys_on_external_channel(self):
        # eta_ch = 1 with lossy detection: passive Eve sees nothing, the
        # untrusted level still holds the eta_eff loss.
        ch = ChannelPoint(eta_ch=1.0, eta_eff=0.7, n_b=0.019, n_ex=0.003,
                          nu_det=2, mu=10.0)
        assert holevo_standard(ch, TrustLevel.PASSIVE) == 0.0
        assert holevo_standard(ch, TrustLevel.UNTRUSTED) > 0.0


class TestLineOfSight:
    def test_rejects_untrusted(self):
        ch = point(n_b=0.01, n_ex=0.001, eta_eff=0.7)
        with pytest.raises(ValueError):
            holevo_los(ch, TrustLevel.UNTRUSTED)
        with pytest.raises(ValueError):
            los_coefficients(ch, TrustLevel.UNTRUSTED)

    def test_noiseless_background_leaks_nothing(self):
        # with n_b = 0 the leakage mode is vacuum-correlated only through
        # the modulation; chi stays finite and small
        ch = ChannelPoint(eta_ch=0.5, eta_eff=0.7, n_b=0.0, n_ex=0.003,
                          nu_det=2, mu=10.0)
        chi = holevo_los(ch, TrustLevel.TRUSTED_NOISE)
        assert chi >= 0.0

    def test_coefficients_build_physical_state(self):
        ch = ChannelPoint(eta_ch=0.5, eta_eff=0.7, n_b=0.019, n_ex=0.003,
                          nu_det=2, mu=10.0)
        for trust in (TrustLevel.PASSIVE, TrustLevel.TRUSTED_NOISE):
            b, theta, phi = los_coefficients(ch, trust)
            v = two_mode_blocks(b * np.eye(2), phi * np.eye(2), theta * np.eye(2))
            CovarianceMatrix(v).require_physical()


class TestMicrowaveLoS:
    def test_coefficient_anchor(self):
        b, theta, phi = microwave_los_cm(tau=0.5, sigma_x2=20.0, n_th=0.1)
        assert b == pytest.approx(11.2)
        assert theta == pytest.approx(-10.0)
        assert phi == pytest.approx(11.2)

    def test_state_physical_and_chi_positive(self):
        for tau in np.linspace(0.05, 0.95, 10):
            b, theta, phi = microwave_los_cm(float(tau), 20.0, 0.1024)
            v = two_mode_blocks(b * np.eye(2), phi * np.eye(2), theta * np.eye(2))
            CovarianceMatrix(v).require_physical()
            chi = holevo_los_from_coefficients(b, theta, phi, nu_det=2)
            assert chi >= 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            microwave_los_cm(1.0, 20.0, 0.1)
        with pytest.raises(ValueError):
            microwave_los_cm(0.5, -1.0, 0.1)


class TestAsymptoticRate:
    def test_report_composition(self):
        ch = point(n_ex=0.01)
        rep = asymptotic_rate(ch, TrustLevel.UNTRUSTED, SecurityType.STANDARD, 0.95)
        assert rep.rate == pytest.approx(0.95 * rep.mutual_information - rep.holevo)
        assert rep.holevo == pytest.approx(holevo(ch, TrustLevel.UNTRUSTED,
                                                  SecurityType.STANDARD))

    def test_rate_can_be_negative(self):
        ch = point(tau=0.05, n_ex=0.5)
        assert asymptotic_rate(ch, TrustLevel.UNTRUSTED, SecurityType.STANDARD,
                               0.95).rate < 0.0

    def test_beta_validation(self):
        with pytest.raises(ValueError):
            asymptotic_rate(point(), TrustLevel.UNTRUSTED, SecurityType.STANDARD, 0.0)


class TestPlobBound:
    def test_pure_loss_limit(self):
        for tau in (0.2, 0.5, 0.9):
            assert plob_thermal_bound(tau, 0.0) == pytest.approx(-math.log2(1.0 - tau))

    def test_entanglement_breaking_cutoff(self):
        assert plob_thermal_bound(0.3, 0.3) == 0.0
        assert plob_thermal_bound(0.3, 0.5) == 0.0

    def test_decreasing_in_thermal_photons(self):
        vals = [plob_thermal_bound(0.9, n) for n in (0.0, 0.05, 0.2, 0.5)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_closed_form(self):
        tau, n_th = 0.8, 0.1
        expo = n_th / (1.0 - tau)
        expect = -math.log2((1.0 - tau) * tau**expo) - entropic_h(2.0 * expo + 1.0)
        assert plob_thermal_bound(tau, n_th) == pytest.approx(expect, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            plob_thermal_bound(1.0, 0.1)
        with pytest.raises(ValueError):
            plob_thermal_bound(0.5, -0.1)
