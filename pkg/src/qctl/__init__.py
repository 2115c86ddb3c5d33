"""qctl: chirped-pulse control of driven two-level systems.

Library layers: small dense complex linear algebra (`smallmat`), oscillatory
unitary propagation (`schrodinger`), pulse and frame construction
(`controls`), spectral paths and adiabatic reference flows (`adiabatic`),
averaging certificates and slope fits (`averaging`), and the experiment
runner behind the ``qctl`` command line (`experiments`).
"""

__version__ = "0.1.0"

from .adiabatic import (
    AdiabaticReference,
    GapViolationError,
    SpectralPath,
    adiabatic_reference_flow,
    diagonal_drift,
    spectral_path,
    uniform_gap_check,
)
from .averaging import (
    FitError,
    ScalingReport,
    averaged_flow_check,
    conjugated_perturbation,
    fit_slope,
    flow_deviation_from_identity,
    osc_integral,
)
from .controls import (
    ControlProfile,
    PerturbationSpec,
    PerturbationTerm,
    PulseParams,
    TrigPoly,
    carrier_phase,
    carrier_rate,
    complex_generator,
    gap_premise,
    get_profile,
    is_transfer_profile,
    lab_generator,
    perturbation_from_spec,
    profile_catalog,
    real_pulse,
    rotated_generator,
    rotating_frame,
    rwa_generator,
    rwa_residual,
)
from .schrodinger import (
    Generator,
    IntegratorError,
    StepLimitError,
    StepPolicy,
    Trajectory,
    flow,
    flow_path,
    propagate,
    variation_check,
)
from .smallmat import (
    ContractViolationError,
    SpectralDecomposition,
    basis_state,
    dist_up_to_phase,
    eig_hermitian,
    expm_skew,
    fidelity,
    operator_norm,
)
