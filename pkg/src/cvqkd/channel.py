"""Free-space channel models: Gaussian-beam diffraction, pointing fading,
and short-range microwave broadcast.

Transmissivities are pure numbers in [0, 1]. The fading model folds the
receiver efficiency eta_eff into the instantaneous transmissivity tau(r),
matching the convention tau(0) = eta = eta_d * eta_atm * eta_eff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import i0e, ive


@dataclass(frozen=True)
class BeamConfig:
    """Gaussian beam leaving Alice's telescope.

    curvature is the initial phase-front radius R0 in metres; math.inf means
    a collimated launch. focused=True pins R0 = z at the evaluation distance
    (beam focused on the receiver plane).
    """

    wavelength: float
    waist: float
    curvature: float = math.inf
    focused: bool = False

    def __post_init__(self):
        if self.wavelength <= 0.0 or self.waist <= 0.0:
            raise ValueError("wavelength and waist must be positive")
        if not self.focused and self.curvature == 0.0:
            raise ValueError("curvature must be nonzero (use focused=True for R0 = z)")

    @property
    def rayleigh_range(self) -> float:
        return math.pi * self.waist ** 2 / self.wavelength


def spot_size(beam: BeamConfig, z: float) -> float:
    """Beam-spot radius w_z at distance z.

    w_z^2 = w0^2 [(1 - z/R0)^2 + (z/z_R)^2]; the collimated case drops the
    curvature term and the focused case keeps only the diffraction term
    (lambda z / pi w0)^2.
    """
    if z < 0.0:
        raise ValueError("distance must be non-negative")
    zr = beam.rayleigh_range
    if beam.focused:
        return beam.waist * (z / zr)
    if math.isinf(beam.curvature):
        geometric = 1.0
    else:
        geometric = (1.0 - z / beam.curvature) ** 2
    return beam.waist * math.sqrt(geometric + (z / zr) ** 2)


def diffraction_transmissivity(beam: BeamConfig, z: float, aperture_radius: float,
                               eta_atm: float = 1.0) -> float:
    """Aperture-clipped channel transmissivity eta_ch = eta_d * eta_atm.

    eta_d = 1 - exp(-2 a_R^2 / w_z^2) for a centred circular aperture.
    """
    if aperture_radius <= 0.0:
        raise ValueError("aperture radius must be positive")
    if not 0.0 <= eta_atm <= 1.0:
        raise ValueError("eta_atm must lie in [0, 1]")
    wz = spot_size(beam, z)
    if wz == 0.0:
        return eta_atm
    eta_d = -math.expm1(-2.0 * aperture_radius ** 2 / wz ** 2)
    return eta_d * eta_atm


def far_field_transmissivity(beam: BeamConfig, z: float, aperture_radius: float) -> float:
    """Far-field approximation eta_d ~ 2 a_R^2 / w_z^2 (exceeds 1 near field)."""
    if aperture_radius <= 0.0:
        raise ValueError("aperture radius must be positive")
    wz = spot_size(beam, z)
    return 2.0 * aperture_radius ** 2 / wz ** 2


def microwave_transmissivity(gain: float, aperture_radius: float, z: float) -> float:
    """Broadcast link transmissivity eta_ch = min{g a_R^2 / (4 pi z^2), 1}."""
    if gain <= 0.0 or aperture_radius <= 0.0:
        raise ValueError("gain and aperture radius must be positive")
    if z < 0.0:
        raise ValueError("distance must be non-negative")
    if z == 0.0:
        return 1.0
    return min(gain * aperture_radius ** 2 / (4.0 * math.pi * z * z), 1.0)


def microwave_best_range(gain: float, aperture_radius: float) -> float:
    """Largest z with eta_ch = 1: z_best = sqrt(g / pi) * a_R / 2."""
    if gain <= 0.0 or aperture_radius <= 0.0:
        raise ValueError("gain and aperture radius must be positive")
    return math.sqrt(gain / math.pi) * aperture_radius / 2.0


# --- pointing-error fading -------------------------------------------------

def weibull_deflection_pdf(r, sigma_p: float):
    """Beam-deflection radius density P(r) = (r / sigma_p^2) exp(-r^2 / 2 sigma_p^2)."""
    if sigma_p <= 0.0:
        raise ValueError("sigma_p must be positive")
    arr = np.asarray(r, dtype=float)
    out = arr / sigma_p ** 2 * np.exp(-arr * arr / (2.0 * sigma_p ** 2))
    return float(out) if arr.ndim == 0 else out


def sample_deflections(sigma_p: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws r = sigma_p * sqrt(-2 ln u) of the deflection radius."""
    if sigma_p <= 0.0:
        raise ValueError("sigma_p must be positive")
    u = rng.random(size)
    u = np.clip(u, np.finfo(float).tiny, 1.0)
    return sigma_p * np.sqrt(-2.0 * np.log(u))


def pointing_tau_exact(r: float, w_z: float, aperture_radius: float, eta: float) -> float:
    """Instantaneous transmissivity of a beam deflected by r, by quadrature.

    Integrates the Gaussian intensity profile over the displaced circular
    aperture (polar coordinates about the aperture centre; the angular
    integral is 2*pi*I0(4 rho r / w_z^2)), then rescales so tau(0) = eta.
    """
    if w_z <= 0.0 or aperture_radius <= 0.0:
        raise ValueError("spot size and aperture radius must be positive")
    if r < 0.0:
        raise ValueError("deflection must be non-negative")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")

    def overlap(displacement: float) -> float:
        def integrand(rho: float) -> float:
            # exp(-2(rho - d)^2 / w^2) * i0e(4 rho d / w^2) stays bounded.
            expo = -2.0 * (rho - displacement) ** 2 / w_z ** 2
            return rho * math.exp(expo) * i0e(4.0 * rho * displacement / w_z ** 2)

        val, _ = quad(integrand, 0.0, aperture_radius, limit=200)
        return 4.0 / w_z ** 2 * val

    reference = -math.expm1(-2.0 * aperture_radius ** 2 / w_z ** 2)
    return eta * overlap(r) / reference


@dataclass(frozen=True)
class FadingModel:
    """Weibull-shaped fading of a wandering Gaussian beam on an aperture.

    The instantaneous transmissivity is approximated by
    tau(r) = eta * exp[-(r / r0)^gamma], with shape gamma and scale r0 from
    the far-field parameter of the beam/aperture pair, and the deflection
    radius r Weibull-distributed with scale sigma_p.
    """

    sigma_p: float
    w_z: float
    aperture_radius: float
    eta: float        # tau at r = 0, receiver efficiency included
    eta_d: float      # diffraction-only part, tau(0) = eta_d * eta_atm * eta_eff
    gamma: float
    r0: float

    @classmethod
    def from_geometry(cls, beam: BeamConfig, z: float, aperture_radius: float,
                      pointing_error: float, eta_eff: float,
                      eta_atm: float = 1.0) -> "FadingModel":
        """Build the model at distance z with angular jitter sigma~_P (rad).

        sigma_p = pointing_error * z; gamma and r0 follow the log-Bessel
        fit of the aperture-overlap integral.
        """
        if pointing_error <= 0.0:
            raise ValueError("pointing error must be positive")
        if z <= 0.0:
            raise ValueError("distance must be positive")
        if not 0.0 < eta_eff <= 1.0:
            raise ValueError("eta_eff must lie in (0, 1]")
        wz = spot_size(beam, z)
        eta_d = -math.expm1(-2.0 * aperture_radius ** 2 / wz ** 2)
        eta_far = 2.0 * aperture_radius ** 2 / wz ** 2
        lam0 = float(ive(0, 2.0 * eta_far))  # Lambda_n(x) = exp(-2x) I_n(2x)
        lam1 = float(ive(1, 2.0 * eta_far))
        log_term = math.log(2.0 * eta_d / (1.0 - lam0))
        if log_term <= 0.0:
            raise ValueError("fading fit undefined: ln(2 eta_d / (1 - Lambda_0)) <= 0")
        gamma = 4.0 * eta_far * lam1 / (1.0 - lam0) / log_term
        r0 = aperture_radius * log_term ** (-1.0 / gamma)
        return cls(sigma_p=pointing_error * z, w_z=wz, aperture_radius=aperture_radius,
                   eta=eta_d * eta_atm * eta_eff, eta_d=eta_d, gamma=gamma, r0=r0)


def pointing_tau_approx(r, fading: FadingModel):
    """Approximate instantaneous transmissivity tau(r) = eta exp[-(r/r0)^gamma]."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("deflection must be non-negative")
    out = fading.eta * np.exp(-((arr / fading.r0) ** fading.gamma))
    return float(out) if arr.ndim == 0 else out


def deflection_for_tau(tau, fading: FadingModel):
    """Inverse of the tau(r) approximation: r = r0 * ln(eta/tau)^(1/gamma)."""
    arr = np.asarray(tau, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr > fading.eta * (1.0 + 1e-12)):
        raise ValueError("tau must lie in (0, eta]")
    ratio = np.clip(fading.eta / arr, 1.0, None)
    out = fading.r0 * np.log(ratio) ** (1.0 / fading.gamma)
    return float(out) if arr.ndim == 0 else out


def fading_pdf(tau, fading: FadingModel):
    """Density of the instantaneous transmissivity under beam wandering.

    P(tau) = r0^2 / (gamma sigma_p^2 tau) * ln(eta/tau)^(2/gamma - 1)
             * exp[-(r0^2 / 2 sigma_p^2) ln(eta/tau)^(2/gamma)] on (0, eta).
    """
    arr = np.asarray(tau, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= fading.eta):
        raise ValueError("fading pdf is supported on (0, eta)")
    log_ratio = np.log(fading.eta / arr)
    power = 2.0 / fading.gamma
    out = (fading.r0 ** 2 / (fading.gamma * fading.sigma_p ** 2 * arr)
           * log_ratio ** (power - 1.0)
           * np.exp(-fading.r0 ** 2 / (2.0 * fading.sigma_p ** 2) * log_ratio ** power))
    return float(out) if arr.ndim == 0 else out


def fading_probability(tau_lo: float, tau_hi: float, fading: FadingModel) -> float:
    """P(tau_lo <= tau <= tau_hi), exact in deflection space.

    tau(r) decreases with r, so the event maps to r(tau_hi) <= r <= r(tau_lo)
    and the Weibull CDF gives exp(-r(tau_hi)^2/2sp^2) - exp(-r(tau_lo)^2/2sp^2).
    """
    if not 0.0 < tau_lo <= tau_hi <= fading.eta * (1.0 + 1e-12):
        raise ValueError("need 0 < tau_lo <= tau_hi <= eta")
    two_sp2 = 2.0 * fading.sigma_p ** 2
    r_hi = deflection_for_tau(min(tau_hi, fading.eta), fading)
    r_lo = deflection_for_tau(tau_lo, fading)
    return math.exp(-r_hi ** 2 / two_sp2) - math.exp(-r_lo ** 2 / two_sp2)


def fading_probability_quadrature(tau_lo: float, tau_hi: float,
                                  fading: FadingModel) -> float:
    """Consistency path for :func:`fading_probability`: integrate the pdf.

    Integrates in s = ln(eta/tau); the substitution spreads the mass that
    piles up against tau = eta over a well-conditioned interval.
    """
    if not 0.0 < tau_lo <= tau_hi <= fading.eta * (1.0 + 1e-12):
        raise ValueError("need 0 < tau_lo <= tau_hi <= eta")
    s_lo = math.log(fading.eta / min(tau_hi, fading.eta))
    s_hi = math.log(fading.eta / tau_lo)

    def integrand(s: float) -> float:
        tau = fading.eta * math.exp(-s)
        return fading_pdf(tau, fading) * tau

    val, _ = quad(integrand, s_lo, s_hi, limit=400)
    return val
