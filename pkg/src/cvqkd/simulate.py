"""Monte Carlo simulation of the Gaussian pulse-by-pulse channel model.

Randomness uses the counter-based Philox generator keyed by (seed, stream)
so that independent streams are reproducible and order-stable: blocks are
generated in fixed-size chunks keyed by their pulse-index range, which
keeps the output bit-identical however the chunks are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import FadingModel, pointing_tau_approx, sample_deflections
from .finite_size import (
    EstimatorSnapshot,
    FadingLattice,
    confidence_w,
    empirical_estimators,
)

_CHUNK = 1 << 18
_MASK64 = (1 << 64) - 1


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator for an explicitly keyed stream."""
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _chunked_normals(seed: int, stream_base: int, scale, count: int) -> np.ndarray:
    """Standard normals times scale, generated in pulse-index-keyed chunks."""
    out = np.empty(count)
    for start in range(0, count, _CHUNK):
        stop = min(start + _CHUNK, count)
        rng = stream_rng(seed, stream_base + start)
        out[start:stop] = rng.standard_normal(stop - start)
    return out * scale


@dataclass(frozen=True)
class SimBlock:
    """Disclosed-variable view of one simulated block.

    x holds Alice's quadrature amplitudes and y Bob's outcomes, one row per
    disclosed pair (nu_det pairs per pulse). tau_samples / bins are per-pair
    fading metadata when applicable; pilot_mask marks pilot pairs.
    """

    x: np.ndarray
    y: np.ndarray
    nu_det: int
    sigma_x2: float
    seed: int
    tau_samples: np.ndarray = None
    bins: np.ndarray = None
    pilot_mask: np.ndarray = None

    @property
    def pairs(self) -> int:
        return self.x.size

    def estimators(self) -> EstimatorSnapshot:
        keep = slice(None) if self.pilot_mask is None else ~self.pilot_mask
        return empirical_estimators(self.x[keep], self.y[keep], self.nu_det)


def simulate_block(tau: float, nbar: float, nu_det: int, sigma_x2: float,
                   pulses: int, seed: int) -> SimBlock:
    """Simulate y = sqrt(tau) x + z with var x = sigma_x2, var z = 2 nbar + nu_det.

    Produces nu_det disclosed pairs per pulse (heterodyne reveals both
    quadratures of each pulse).
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    if nbar < 0.0 or sigma_x2 <= 0.0 or pulses < 1:
        raise ValueError("nbar must be >= 0, sigma_x2 > 0, pulses >= 1")
    if nu_det not in (1, 2):
        raise ValueError("nu_det must be 1 or 2")
    pairs = nu_det * pulses
    x = _chunked_normals(seed, 0, math.sqrt(sigma_x2), pairs)
    z = _chunked_normals(seed, 1 << 40, math.sqrt(2.0 * nbar + nu_det), pairs)
    return SimBlock(x=x, y=np.sqrt(tau) * x + z, nu_det=nu_det,
                    sigma_x2=sigma_x2, seed=seed)


def simulate_fading_block(fading: FadingModel, n_of_tau, nu_det: int,
                          sigma_x2: float, pulses: int, seed: int,
                          pilot_rate: float = 0.0) -> SimBlock:
    """Simulate a beam-wandering block with per-pulse transmissivity.

    The deflection radius is drawn from the Weibull law, mapped through the
    tau(r) approximation, and the noise photons follow the per-tau model
    n_of_tau (e.g. a local-LO setup-noise curve plus background).
    """
    if nu_det not in (1, 2):
        raise ValueError("nu_det must be 1 or 2")
    if sigma_x2 <= 0.0 or pulses < 1:
        raise ValueError("sigma_x2 must be positive and pulses >= 1")
    if not 0.0 <= pilot_rate < 1.0:
        raise ValueError("pilot_rate must lie in [0, 1)")
    rng = stream_rng(seed, 2 << 40)
    r = sample_deflections(fading.sigma_p, pulses, rng)
    tau_pulse = pointing_tau_approx(r, fading)
    n_pulse = np.asarray(n_of_tau(tau_pulse), dtype=float)
    if n_pulse.shape != tau_pulse.shape or np.any(n_pulse < 0.0):
        raise ValueError("n_of_tau must map tau samples to non-negative photons")

    tau_pair = np.repeat(tau_pulse, nu_det)
    sigma_z = np.sqrt(2.0 * np.repeat(n_pulse, nu_det) + nu_det)
    pairs = nu_det * pulses
    x = _chunked_normals(seed, 0, math.sqrt(sigma_x2), pairs)
    z = _chunked_normals(seed, 1 << 40, 1.0, pairs) * sigma_z
    y = np.sqrt(tau_pair) * x + z
    pilot_mask = None
    if pilot_rate > 0.0:
        pilot_pulse = stream_rng(seed, 3 << 40).random(pulses) < pilot_rate
        pilot_mask = np.repeat(pilot_pulse, nu_det)
    return SimBlock(x=x, y=y, nu_det=nu_det, sigma_x2=sigma_x2, seed=seed,
                    tau_samples=tau_pair, pilot_mask=pilot_mask)


def defade_block(block: SimBlock, lattice: FadingLattice, seed: int,
                 pilot_noise: float = 0.0) -> SimBlock:
    """Map a fading block onto the constant-transmissivity tau_min channel.

    Pairs outside [tau_min, tau_max] are post-selected away. Each kept pair
    in bin k (nominal transmissivity tau_k, the bin lower edge) becomes
    y~ = sqrt(tau_min / tau_k) y + sqrt(1 - tau_min / tau_k) xi with
    xi ~ N(0, nu_det), so every surviving pair looks like a tau_min pulse.

    By default bins are assigned from the true sampled tau (ideal bright
    pilots); pilot_noise > 0 adds a per-pulse Gaussian error to the pilot
    estimate before binning.
    """
    if block.tau_samples is None:
        raise ValueError("block carries no fading metadata")
    if pilot_noise < 0.0:
        raise ValueError("pilot_noise must be >= 0")
    tau_est = block.tau_samples
    if pilot_noise > 0.0:
        pulses = block.pairs // block.nu_det
        err = _chunked_normals(seed, 5 << 40, pilot_noise, pulses)
        tau_est = tau_est + np.repeat(err, block.nu_det)
    bins = lattice.assign(tau_est)
    keep = bins >= 0
    if not np.any(keep):
        raise ValueError("post-selection removed every pair")
    tau_k = lattice.lower_edges[bins[keep]]
    scale = np.sqrt(lattice.tau_min / tau_k)
    xi = _chunked_normals(seed, 4 << 40, math.sqrt(block.nu_det), int(keep.sum()))
    y_tilde = scale * block.y[keep] + np.sqrt(1.0 - lattice.tau_min / tau_k) * xi
    pilot = None if block.pilot_mask is None else block.pilot_mask[keep]
    return SimBlock(x=block.x[keep], y=y_tilde, nu_det=block.nu_det,
                    sigma_x2=block.sigma_x2, seed=block.seed,
                    tau_samples=np.full(int(keep.sum()), lattice.tau_min),
                    bins=bins[keep], pilot_mask=pilot)


@dataclass(frozen=True)
class CoverageReport:
    """Observed failure rates of the worst-case estimator bounds."""

    rounds: int
    eps_pe: float
    w: float
    tau_low_failures: int
    tau_high_failures: int
    n_failures: int

    @property
    def tau_low_rate(self) -> float:
        return self.tau_low_failures / self.rounds

    @property
    def tau_high_rate(self) -> float:
        return self.tau_high_failures / self.rounds

    @property
    def n_rate(self) -> float:
        return self.n_failures / self.rounds


def estimator_coverage_experiment(tau: float, nbar: float, nu_det: int,
                                  sigma_x2: float, pulses: int, rounds: int,
                                  eps_pe: float, seed: int) -> CoverageReport:
    """Count how often the worst-case bounds exclude the true channel.

    Each round simulates a fresh block, forms the empirical estimators and
    the confidence bounds at eps_pe, and records one-sided failures
    tau' > tau, tau'' < tau and nbar' < nbar.
    """
    from .finite_size import worst_case_estimators

    if rounds < 1:
        raise ValueError("at least one round required")
    w = confidence_w(eps_pe)
    tau_low_fail = tau_high_fail = n_fail = 0
    for k in range(rounds):
        block = simulate_block(tau, nbar, nu_det, sigma_x2, pulses,
                               seed=(seed + 977 * k) & _MASK64)
        snap = block.estimators()
        est = worst_case_estimators(snap.tau_hat, max(snap.n_hat, 0.0), sigma_x2,
                                    snap.sigma_z2_hat, snap.m_p, w)
        if est.tau_lo > tau:
            tau_low_fail += 1
        if est.tau_hi < tau:
            tau_high_fail += 1
        if est.n_hi < nbar:
            n_fail += 1
    return CoverageReport(rounds=rounds, eps_pe=eps_pe, w=w,
                          tau_low_failures=tau_low_fail,
                          tau_high_failures=tau_high_fail, n_failures=n_fail)
