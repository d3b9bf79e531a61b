"""Asymptotic secret-key rates for Gaussian-modulated coherent-state QKD
with reverse reconciliation.

Trust levels grade how much of the loss/noise budget is conceded to the
eavesdropper:

* ``PASSIVE`` - channel loss and background are genuine; Eve only collects
  the light that misses the receiver.
* ``TRUSTED_NOISE`` - Eve supplies the loss (beamsplitter attack) but the
  thermal background is genuine.
* ``UNTRUSTED`` - every photon of loss and noise is Eve's.

Line-of-sight security additionally restricts Eve to the leakage modes,
never the direct link.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .gaussian import (
    I2,
    Z2,
    CovarianceMatrix,
    condition_on_heterodyne,
    condition_on_homodyne,
    entropic_h,
    symplectic_spectrum,
    two_mode_blocks,
    two_mode_symplectic_spectrum,
)

IDENTITY_GUARD = 1e-12


class TrustLevel(enum.IntEnum):
    PASSIVE = 1
    TRUSTED_NOISE = 2
    UNTRUSTED = 3


class SecurityType(enum.Enum):
    STANDARD = "standard"
    LOS = "los"


@dataclass(frozen=True)
class ChannelPoint:
    """One operating point of the link.

    eta_ch is the external channel transmissivity, eta_eff the receiver
    efficiency, tau = eta_ch * eta_eff the total transmissivity. n_b are
    background photons injected by the channel (eta_eff * n_b reach the
    detector), n_ex setup photons added after the channel; the total noise
    photon number is nbar = eta_eff * n_b + n_ex. mu = sigma_x^2 + 1 is the
    modulation variance, nu_det the quadrature duty (1 hom / 2 het).
    """

    eta_ch: float
    eta_eff: float
    n_b: float
    n_ex: float
    nu_det: int
    mu: float

    def __post_init__(self):
        if not 0.0 < self.eta_ch <= 1.0:
            raise ValueError("eta_ch must lie in (0, 1]")
        if not 0.0 < self.eta_eff <= 1.0:
            raise ValueError("eta_eff must lie in (0, 1]")
        if self.n_b < 0.0 or self.n_ex < 0.0:
            raise ValueError("photon numbers must be non-negative")
        if self.nu_det not in (1, 2):
            raise ValueError("nu_det must be 1 (homodyne) or 2 (heterodyne)")
        if self.mu < 1.0:
            raise ValueError("mu must be >= 1")

    @property
    def tau(self) -> float:
        return self.eta_ch * self.eta_eff

    @property
    def nbar(self) -> float:
        return self.eta_eff * self.n_b + self.n_ex

    @property
    def sigma_x2(self) -> float:
        return self.mu - 1.0

    @classmethod
    def from_estimates(cls, tau: float, eta_eff: float, nbar: float, n_b: float,
                       nu_det: int, mu: float) -> "ChannelPoint":
        """Build a point from (tau, nbar, n_b) worst-case estimates.

        The setup share is the remainder n_ex = nbar - eta_eff * n_b, which
        must be non-negative; eta_ch = tau / eta_eff.
        """
        n_ex = nbar - eta_eff * n_b
        if n_ex < -1e-12:
            raise ValueError("nbar smaller than the channel share eta_eff * n_b")
        eta_ch = tau / eta_eff
        if eta_ch > 1.0 + 1e-12:
            raise ValueError("tau exceeds eta_eff: channel transmissivity above 1")
        return cls(eta_ch=min(eta_ch, 1.0), eta_eff=eta_eff, n_b=n_b,
                   n_ex=max(n_ex, 0.0), nu_det=nu_det, mu=mu)


def mutual_information(ch: ChannelPoint) -> float:
    """Alice-Bob mutual information I = (nu_det/2) log2(1 + sigma_x^2/chi_n),
    with equivalent noise chi_n = (2 nbar + nu_det) / tau."""
    chi_noise = (2.0 * ch.nbar + ch.nu_det) / ch.tau
    return ch.nu_det / 2.0 * math.log2(1.0 + ch.sigma_x2 / chi_noise)


@dataclass(frozen=True)
class EveState:
    """Eve's two output modes and their coupling to Bob's mode."""

    b: float
    omega: float
    gamma: float
    theta: float
    psi: float
    phi: float

    @property
    def v_eve(self) -> np.ndarray:
        return two_mode_blocks(self.phi * I2, self.omega * I2, self.psi * Z2)

    @property
    def cross(self) -> np.ndarray:
        return np.hstack([self.theta * I2, self.gamma * Z2])

    @property
    def joint(self) -> np.ndarray:
        top = np.hstack([self.b * I2, self.cross])
        bottom = np.hstack([self.cross.T, self.v_eve])
        return np.vstack([top, bottom])


def bob_variance(ch: ChannelPoint) -> float:
    """Bob's quadrature variance b = tau (mu - 1) + 2 nbar + 1."""
    return ch.tau * (ch.mu - 1.0) + 2.0 * ch.nbar + 1.0


def eve_joint_cm(ch: ChannelPoint, trust: TrustLevel) -> EveState:
    """Assemble Eve's dilation for the requested trust level.

    The result is checked to be a bona fide state. Raises for an identity
    channel (eta_ch = 1 for the passive level, tau = 1 otherwise), where the
    dilation degenerates; callers report the zero-Holevo limit instead.
    """
    trust = TrustLevel(trust)
    tau = ch.tau
    mu = ch.mu
    b = bob_variance(ch)
    if trust is TrustLevel.PASSIVE:
        if ch.eta_ch >= 1.0 - IDENTITY_GUARD:
            raise ValueError("identity channel: passive-Eve dilation undefined at eta_ch = 1")
        omega = 2.0 * ch.n_b / (1.0 - ch.eta_ch) + 1.0
        gamma = math.sqrt(ch.eta_eff * (1.0 - ch.eta_ch) * (omega ** 2 - 1.0))
        theta = math.sqrt(tau * (1.0 - ch.eta_ch)) * (omega - mu)
        psi = math.sqrt(ch.eta_ch * (omega ** 2 - 1.0))
        phi = ch.eta_ch * omega + (1.0 - ch.eta_ch) * mu
    else:
        if tau >= 1.0 - IDENTITY_GUARD:
            raise ValueError("identity channel: Eve dilation undefined at tau = 1")
        if trust is TrustLevel.TRUSTED_NOISE:
            omega = 2.0 * ch.eta_eff * ch.n_b / (1.0 - tau) + 1.0
        else:
            omega = 2.0 * ch.nbar / (1.0 - tau) + 1.0
        gamma = math.sqrt((1.0 - tau) * (omega ** 2 - 1.0))
        theta = math.sqrt(tau * (1.0 - tau)) * (omega - mu)
        psi = math.sqrt(tau * (omega ** 2 - 1.0))
        phi = tau * omega + (1.0 - tau) * mu
    state = EveState(b=b, omega=omega, gamma=gamma, theta=theta, psi=psi, phi=phi)
    CovarianceMatrix(state.joint).require_physical()
    return state


def _chi_from_conditioning(v_eve: np.ndarray, cross: np.ndarray, b: float,
                           nu_det: int) -> float:
    nu = symplectic_spectrum(v_eve)
    if nu_det == 1:
        cond = condition_on_homodyne(v_eve, cross, b)
    else:
        cond = condition_on_heterodyne(v_eve, cross, b)
    nu_cond = symplectic_spectrum(cond)
    return float(np.sum(entropic_h(nu)) - np.sum(entropic_h(nu_cond)))


def holevo_standard(ch: ChannelPoint, trust: TrustLevel) -> float:
    """Holevo bound chi(E:y) from Eve's dilation, any trust level.

    Returns the identity-channel limit 0 when the dilation degenerates.
    """
    trust = TrustLevel(trust)
    if trust is TrustLevel.PASSIVE and ch.eta_ch >= 1.0 - IDENTITY_GUARD:
        return 0.0
    if trust is not TrustLevel.PASSIVE and ch.tau >= 1.0 - IDENTITY_GUARD:
        return 0.0
    state = eve_joint_cm(ch, trust)
    return _chi_from_conditioning(state.v_eve, state.cross, state.b, ch.nu_det)


def holevo_untrusted_closed_form(ch: ChannelPoint) -> float:
    """chi(E:y) for the fully untrusted level from the purified Alice-Bob state.

    Independent of the dilation path: uses the two-mode spectrum of
    V_AB = [[mu I, c Z], [c Z, b I]] with c = sqrt(tau (mu^2 - 1)) and the
    post-measurement entropy in closed form.
    """
    tau = ch.tau
    if tau >= 1.0 - IDENTITY_GUARD:
        return 0.0
    mu = ch.mu
    b = bob_variance(ch)
    c2 = tau * (mu * mu - 1.0)
    v_ab = two_mode_blocks(mu * I2, b * I2, math.sqrt(c2) * Z2)
    nu = two_mode_symplectic_spectrum(v_ab)
    total = float(np.sum(entropic_h(nu)))
    if ch.nu_det == 1:
        cond_arg = math.sqrt(mu * (mu - c2 / b))
    else:
        cond_arg = mu - c2 / (b + 1.0)
    return total - entropic_h(cond_arg)


def los_coefficients(ch: ChannelPoint, trust: TrustLevel) -> tuple:
    """(b, theta, phi) of the restricted Bob-Eve state for line-of-sight security."""
    trust = TrustLevel(trust)
    if trust is TrustLevel.UNTRUSTED:
        raise ValueError("line-of-sight security requires a trusted noise source")
    tau = ch.tau
    mu = ch.mu
    b = bob_variance(ch)
    if trust is TrustLevel.PASSIVE:
        if ch.eta_ch >= 1.0 - IDENTITY_GUARD:
            raise ValueError("identity channel: no leakage mode at eta_ch = 1")
        omega = 2.0 * ch.n_b / (1.0 - ch.eta_ch) + 1.0
        theta = math.sqrt(tau * (1.0 - ch.eta_ch)) * (omega - mu)
        phi = ch.eta_ch * omega + (1.0 - ch.eta_ch) * mu
    else:
        if tau >= 1.0 - IDENTITY_GUARD:
            raise ValueError("identity channel: no leakage mode at tau = 1")
        omega = 2.0 * ch.eta_eff * ch.n_b / (1.0 - tau) + 1.0
        theta = math.sqrt(tau * (1.0 - tau)) * (omega - mu)
        phi = tau * omega + (1.0 - tau) * mu
    return b, theta, phi


def holevo_los_from_coefficients(b: float, theta: float, phi: float,
                                 nu_det: int) -> float:
    """chi(E:y) for a single leakage mode with V_BE = [[b I, theta I], [theta I, phi I]]."""
    if nu_det == 1:
        cond_arg = math.sqrt(phi * (phi - theta * theta / b))
    elif nu_det == 2:
        cond_arg = phi - theta * theta / (b + 1.0)
    else:
        raise ValueError("nu_det must be 1 or 2")
    return entropic_h(phi) - entropic_h(cond_arg)


def holevo_los(ch: ChannelPoint, trust: TrustLevel) -> float:
    """Line-of-sight Holevo bound; zero in the identity-channel limit."""
    trust = TrustLevel(trust)
    if trust is TrustLevel.UNTRUSTED:
        raise ValueError("line-of-sight security requires a trusted noise source")
    if trust is TrustLevel.PASSIVE and ch.eta_ch >= 1.0 - IDENTITY_GUARD:
        return 0.0
    if ch.tau >= 1.0 - IDENTITY_GUARD:
        return 0.0
    b, theta, phi = los_coefficients(ch, trust)
    return holevo_los_from_coefficients(b, theta, phi, ch.nu_det)


def microwave_los_cm(tau: float, sigma_x2: float, n_th: float) -> tuple:
    """(b, theta, phi) for a thermal-modulated microwave link under
    line-of-sight security.

    Bob holds n_R = tau * sigma_x^2 / 2 + n_th photons, Eve's leakage mode
    carries the reflected modulation: theta = -sqrt(tau (1 - tau)) sigma_x^2,
    phi = (1 - tau) sigma_x^2 + 2 n_th + 1.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1) for a leakage mode to exist")
    if sigma_x2 < 0.0 or n_th < 0.0:
        raise ValueError("sigma_x2 and n_th must be non-negative")
    b = tau * sigma_x2 + 2.0 * n_th + 1.0
    theta = -math.sqrt(tau * (1.0 - tau)) * sigma_x2
    phi = (1.0 - tau) * sigma_x2 + 2.0 * n_th + 1.0
    return b, theta, phi


def holevo(ch: ChannelPoint, trust: TrustLevel, security: SecurityType) -> float:
    security = SecurityType(security)
    if security is SecurityType.LOS:
        return holevo_los(ch, trust)
    return holevo_standard(ch, trust)


@dataclass(frozen=True)
class RateReport:
    rate: float
    mutual_information: float
    holevo: float
    trust: TrustLevel
    security: SecurityType
    beta: float
    channel: ChannelPoint


def asymptotic_rate(ch: ChannelPoint, trust: TrustLevel, security: SecurityType,
                    beta: float) -> RateReport:
    """R = beta * I(x:y) - chi(E:y), not clamped at zero."""
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    mi = mutual_information(ch)
    chi = holevo(ch, trust, security)
    return RateReport(rate=beta * mi - chi, mutual_information=mi, holevo=chi,
                      trust=TrustLevel(trust), security=SecurityType(security),
                      beta=beta, channel=ch)


def plob_thermal_bound(tau: float, n_th: float) -> float:
    """Repeaterless key-capacity ceiling of the thermal-loss channel.

    -log2[(1 - tau) tau^(n_th/(1-tau))] - h(n_th/(1-tau)) for n_th < tau,
    zero otherwise; h(x) = entropic_h(2x + 1).
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    if n_th < 0.0:
        raise ValueError("n_th must be non-negative")
    if n_th >= tau:
        return 0.0
    expo = n_th / (1.0 - tau)
    return -math.log2((1.0 - tau) * tau ** expo) - entropic_h(2.0 * expo + 1.0)
