"""Compacton traveling waves of degenerate KdV/NLS equations.

Subpackages: profiles (traveling-wave construction and classification),
functionals (conserved quantities, identities, family minimization),
spectral (the degenerate linearized operator for p = 4), evolution
(nonlinear time stepping), cli (command-line toolkit).
"""

from .profiles import (  # noqa: F401
    CompactonProfile,
    ModelParams,
    MultiCompacton,
    NlsProfile,
    PeriodicProfile,
    ProfileError,
    SolutionClass,
    build_compacton,
    build_nls_compacton,
    build_periodic,
    classify,
    first_integral,
    support_half_width,
)

__version__ = "0.1.0"
