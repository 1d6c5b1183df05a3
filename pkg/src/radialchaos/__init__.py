"""Spherical harmonic analysis and multiplier dynamics on radial models of harmonic manifolds."""

from .chaos import (
    ChaosCertificate,
    OrbitRecord,
    PeriodicPoint,
    build_periodic_point,
    certify_mixing,
    chaos_threshold,
    find_unimodular_roots,
    simulate_orbit,
    solve_strip_parameter,
    verify_periodic,
)
from .convolution import (
    RadialMeasure,
    convolve_direct,
    convolve_measure,
    convolve_radial,
    normalized_bump,
    young_bound_check,
)
from .eigen import c_function, calibrate_inversion, radial_eigenfunction
from .errors import InputError, NumericalError, RadialChaosError
from .model import ManifoldModel, RadialFunction, build_model, lp_norm_radial
from .multiplier import (
    Multiplier,
    apply_multiplier,
    extract_symbol,
    heat_kernel_profile,
    nonconstancy_check,
    symbol_eval,
)
from .transform import inverse_transform, spherical_transform, translate_radial

__version__ = "0.1.0"
