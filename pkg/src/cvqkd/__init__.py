"""Composable finite-size secret-key rates for Gaussian-modulated
coherent-state quantum key distribution."""

from .gaussian import (
    CovarianceMatrix,
    condition_on_heterodyne,
    condition_on_homodyne,
    entropic_h,
    symplectic_form,
    symplectic_spectrum,
    two_mode_symplectic_spectrum,
)
from .noise import (
    ReceiverOptics,
    SetupConfig,
    hybrid_trust_split,
    fov_from_sensor,
    interferometric_filter,
    microwave_thermal_photons,
    setup_noise,
    sky_background_photons,
    theta_el,
    theta_ph,
)
from .channel import (
    BeamConfig,
    FadingModel,
    diffraction_transmissivity,
    fading_pdf,
    fading_probability,
    microwave_best_range,
    microwave_transmissivity,
    pointing_tau_approx,
    pointing_tau_exact,
    spot_size,
)
from .rates import (
    ChannelPoint,
    RateReport,
    SecurityType,
    TrustLevel,
    asymptotic_rate,
    holevo,
    holevo_los,
    holevo_standard,
    holevo_untrusted_closed_form,
    microwave_los_cm,
    mutual_information,
    plob_thermal_bound,
)
from .finite_size import (
    EstimatorSet,
    FadingLattice,
    GeneralAttackTerms,
    ProtocolParams,
    composable_rate,
    composable_rate_general,
    confidence_w,
    delta_aep,
    empirical_estimators,
    general_attack_extension,
    microwave_estimators,
    mobile_worst_case,
    setup_and_background_bounds,
    theta_term,
    total_epsilon,
    worst_case_estimators,
)
from .simulate import (
    CoverageReport,
    SimBlock,
    defade_block,
    estimator_coverage_experiment,
    simulate_block,
    simulate_fading_block,
    stream_rng,
)

__version__ = "0.1.0"
