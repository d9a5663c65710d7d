"""Superdirective beamforming for coupled antenna arrays."""
from .beamforming import (
    BeamformResult,
    directivity_quotient,
    eepb_solve,
    iep_solve,
    mrt,
    normalize_excitation,
)
from .coupling import (
    ETA0,
    CouplingMatrix,
    NetworkData,
    bcf_from_generalized_s,
    bcf_from_s,
    bcf_from_z,
    bcf_integrate,
    coupling_from_patterns,
    generalized_s,
    isotropic_coupling,
    steering_at,
)
from .errors import SuperdirError
from .patterns import (
    ENDFIRE,
    ArrayGeometry,
    Direction,
    ElementPattern,
    SphereGrid,
    array_pattern,
    directivity_from_pattern,
    hertzian_dipole_eep,
    iep_array_pattern,
    isotropic_eep,
    make_sphere_grid,
    planar_directivity,
)
from .robust import RobustSolution, det_w_polynomial, ocrb_solve, tradeoff_sweep
from .sensitivity import (
    ErrorModel,
    MonteCarloReport,
    min_variance_excitation,
    monte_carlo,
    normalized_variance,
)

__version__ = "0.1.0"

__all__ = [
    "ENDFIRE",
    "ETA0",
    "array_pattern",
    "ArrayGeometry",
    "bcf_from_generalized_s",
    "bcf_from_s",
    "bcf_from_z",
    "bcf_integrate",
    "BeamformResult",
    "coupling_from_patterns",
    "CouplingMatrix",
    "det_w_polynomial",
    "Direction",
    "directivity_from_pattern",
    "directivity_quotient",
    "eepb_solve",
    "ElementPattern",
    "ErrorModel",
    "generalized_s",
    "hertzian_dipole_eep",
    "iep_array_pattern",
    "iep_solve",
    "isotropic_coupling",
    "isotropic_eep",
    "make_sphere_grid",
    "min_variance_excitation",
    "monte_carlo",
    "MonteCarloReport",
    "mrt",
    "NetworkData",
    "normalize_excitation",
    "normalized_variance",
    "ocrb_solve",
    "planar_directivity",
    "RobustSolution",
    "SphereGrid",
    "steering_at",
    "SuperdirError",
    "tradeoff_sweep",
]

