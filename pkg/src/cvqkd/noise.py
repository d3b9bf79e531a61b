"""Receiver setup-noise and background-photon budgets.

All photon numbers are mean photon counts referred to Bob's detection
input; excess-noise figures are in shot-noise units with the convention
xi = 2*nbar/tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK
from scipy.constants import k as BOLTZMANN

LO_KINDS = ("tlo", "llo")


@dataclass(frozen=True)
class SetupConfig:
    """Detection-chain parameters for an optical receiver.

    Parameters
    ----------
    wavelength : float
        Carrier wavelength in metres.
    detector_bandwidth : float
        Detector electronic bandwidth W in Hz.
    nep : float
        Noise-equivalent power in W / sqrt(Hz).
    lo_power : float
        Local-oscillator power in W.
    lo_pulse_duration : float
        LO integration window per pulse, in seconds.
    linewidth : float
        Combined laser linewidth l_W in Hz (LLO phase-noise source).
    clock : float
        System clock C in Hz.
    nu_det : int
        Quadrature duty: 1 for homodyne, 2 for heterodyne.
    sigma_x2 : float
        Modulation variance sigma_x^2 = mu - 1 in shot-noise units.
    lo_kind : str
        "tlo" (transmitted LO) or "llo" (local LO regenerated at Bob).
    n_other : float
        Additional untrusted setup photons, default 0.
    tlo_phase_photons : float
        Residual TLO phase-noise photons, default 0.
    """

    wavelength: float
    detector_bandwidth: float
    nep: float
    lo_power: float
    lo_pulse_duration: float
    linewidth: float
    clock: float
    nu_det: int
    sigma_x2: float
    lo_kind: str = "llo"
    n_other: float = 0.0
    tlo_phase_photons: float = 0.0

    def __post_init__(self):
        for name in ("wavelength", "detector_bandwidth", "nep", "lo_power",
                     "lo_pulse_duration", "clock"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.linewidth < 0.0:
            raise ValueError("linewidth must be non-negative")
        if self.nu_det not in (1, 2):
            raise ValueError("nu_det must be 1 (homodyne) or 2 (heterodyne)")
        if self.sigma_x2 < 0.0:
            raise ValueError("sigma_x2 must be non-negative")
        if self.lo_kind not in LO_KINDS:
            raise ValueError(f"lo_kind must be one of {LO_KINDS}")
        if self.n_other < 0.0 or self.tlo_phase_photons < 0.0:
            raise ValueError("photon offsets must be non-negative")

    @property
    def carrier_frequency(self) -> float:
        return SPEED_OF_LIGHT / self.wavelength


@dataclass(frozen=True)
class ReceiverOptics:
    """Collection optics of the receiver telescope."""

    aperture_radius: float
    fov: float
    spectral_filter: float
    eta_eff: float = 1.0

    def __post_init__(self):
        if self.aperture_radius <= 0.0 or self.fov <= 0.0 or self.spectral_filter <= 0.0:
            raise ValueError("aperture, field of view and filter width must be positive")
        if not 0.0 < self.eta_eff <= 1.0:
            raise ValueError("eta_eff must lie in (0, 1]")


def theta_el(cfg: SetupConfig) -> float:
    """Electronic setup-noise coefficient Theta_el (photons).

    Theta_el = nu_det * NEP^2 * W * Dt_LO / (2 h nu P_LO); referred to one
    pulse at the detection input.
    """
    return (cfg.nu_det * cfg.nep ** 2 * cfg.detector_bandwidth * cfg.lo_pulse_duration
            / (2.0 * PLANCK * cfg.carrier_frequency * cfg.lo_power))


def theta_ph(cfg: SetupConfig) -> float:
    """LLO phase-noise coefficient Theta_ph = pi * sigma_x^2 * l_W / C (photons)."""
    return math.pi * cfg.sigma_x2 * cfg.linewidth / cfg.clock


def setup_noise_from_thetas(th_el: float, th_ph: float, lo_kind: str, tau: float,
                            n_other: float = 0.0, tlo_phase_photons: float = 0.0) -> float:
    """Setup photons n_ex at channel transmissivity tau.

    TLO: the electronic contribution is referred back through the channel,
    n_ex = Theta_el / tau (+ residual phase photons). LLO: the LO never
    crosses the channel but the regenerated phase reference adds photons
    proportionally to tau, n_ex = Theta_el + Theta_ph * tau.
    """
    if lo_kind not in LO_KINDS:
        raise ValueError(f"lo_kind must be one of {LO_KINDS}")
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    if lo_kind == "tlo":
        return th_el / tau + tlo_phase_photons + n_other
    return th_el + th_ph * tau + n_other


def setup_noise(cfg: SetupConfig, tau: float) -> float:
    """Setup photons n_ex for a configured receiver at transmissivity tau."""
    return setup_noise_from_thetas(theta_el(cfg), theta_ph(cfg), cfg.lo_kind, tau,
                                   cfg.n_other, cfg.tlo_phase_photons)


def xi_from_photons(nbar: float, tau: float) -> float:
    """Excess noise xi = 2*nbar/tau (shot-noise units, at Alice's output)."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if nbar < 0.0:
        raise ValueError("nbar must be non-negative")
    return 2.0 * nbar / tau

def photons_from_xi(xi: float, tau: float) -> float:
    """Inverse of :func:`xi_from_photons`: nbar = xi*tau/2."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if xi < 0.0:
        raise ValueError("xi must be non-negative")
    return xi * tau / 2.0


def noise_budget(n_b: float, n_ex: float, eta_eff: float, tau: float) -> dict:
    """Split the total noise into channel and setup excess-noise shares.

    Returns nbar (total photons), xi_tot, xi_ch = 2*eta_eff*n_b/tau and
    xi_ex = 2*n_ex/tau, with xi_tot = xi_ch + xi_ex.
    """
    nbar = eta_eff * n_b + n_ex
    return {
        "nbar": nbar,
        "xi_tot": xi_from_photons(nbar, tau),
        "xi_ch": xi_from_photons(eta_eff * n_b, tau),
        "xi_ex": xi_from_photons(n_ex, tau),
    }


def hybrid_trust_split(n_b: float, n_ex_untrusted: float, eta_eff: float) -> float:
    """Move untrusted setup photons into the channel-background slot.

    Returns the adjusted background n_b + n_ex_untrusted / eta_eff, so that
    eta_eff * n_b_adj reproduces the photons Eve is credited with.
    """
    if not 0.0 < eta_eff <= 1.0:
        raise ValueError("eta_eff must lie in (0, 1]")
    if n_b < 0.0 or n_ex_untrusted < 0.0:
        raise ValueError("photon numbers must be non-negative")
    return n_b + n_ex_untrusted / eta_eff


def fov_from_sensor(sensor_size: float, focal_length: float) -> float:
    """Solid-angle field of view Omega = (2*arctan(l_D / (2 f_D)))^2 in sr."""
    if sensor_size <= 0.0 or focal_length <= 0.0:
        raise ValueError("sensor size and focal length must be positive")
    return (2.0 * math.atan(sensor_size / (2.0 * focal_length))) ** 2


def interferometric_filter(wavelength: float, bandwidth: float) -> float:
    """Wavelength acceptance Delta_lambda = lambda^2 * Delta_nu / c in metres."""
    if wavelength <= 0.0 or bandwidth <= 0.0:
        raise ValueError("wavelength and bandwidth must be positive")
    return wavelength ** 2 * bandwidth / SPEED_OF_LIGHT


def optical_etendue(optics: ReceiverOptics, detector_bandwidth: float) -> float:
    """Receiver acceptance Gamma_R = Delta_lambda * W^-1 * Omega_fov * a_R^2."""
    if detector_bandwidth <= 0.0:
        raise ValueError("detector bandwidth must be positive")
    return (optics.spectral_filter / detector_bandwidth
            * optics.fov * optics.aperture_radius ** 2)


def sky_background_photons(optics: ReceiverOptics, wavelength: float,
                           detector_bandwidth: float, sky_brightness: float) -> float:
    """Background photons per pulse from diffuse sky radiance.

    `sky_brightness` is the spectral radiance B in W m^-2 nm^-1 sr^-1
    (converted internally to per-metre). n_B = pi * lambda * Gamma_R / (h c) * B.
    """
    if sky_brightness < 0.0:
        raise ValueError("sky brightness must be non-negative")
    gamma_r = optical_etendue(optics, detector_bandwidth)
    radiance_si = sky_brightness * 1e9  # per nm -> per m
    return math.pi * wavelength * gamma_r / (PLANCK * SPEED_OF_LIGHT) * radiance_si


def microwave_etendue(wavelength: float, fov: float, aperture_radius: float) -> float:
    """Microwave acceptance Gamma_R ~ (lambda^2 / c) * Omega_fov * a_R^2."""
    if wavelength <= 0.0 or fov <= 0.0 or aperture_radius <= 0.0:
        raise ValueError("wavelength, fov and aperture must be positive")
    return wavelength ** 2 / SPEED_OF_LIGHT * fov * aperture_radius ** 2


def blackbody_mode_photons(wavelength: float, temperature: float) -> float:
    """Planck occupation scaled to the collected mode density.

    n_body = (2c / lambda^4) / (exp(h c / (lambda k_B T)) - 1), in photons
    per unit etendue; multiply by Gamma_R for the per-pulse count.
    """
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    x = PLANCK * SPEED_OF_LIGHT / (wavelength * BOLTZMANN * temperature)
    return 2.0 * SPEED_OF_LIGHT / wavelength ** 4 / math.expm1(x)


def microwave_thermal_photons(wavelength: float, temperature: float,
                              fov: float, aperture_radius: float) -> float:
    """Thermal background photons n_th = Gamma_R * n_body at the receiver."""
    gamma_r = microwave_etendue(wavelength, fov, aperture_radius)
    return gamma_r * blackbody_mode_photons(wavelength, temperature)
