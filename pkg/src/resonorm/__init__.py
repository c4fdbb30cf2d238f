"""Normal forms of contracting germ cocycles and cycle estimates of Lyapunov exponents."""
from .jets import PolyMapJet, compose, formal_inverse, evaluate, homogeneous_norm, lipschitz_bound_on_ball
from .spectrum import ContractionSpectrum, ResonanceClass, Part, build_table, classify_degree, zeta_margin, project
from .cocycle import PeriodicGermCocycle, PeriodicLinearCocycle, oseledec_reduce, regular_contracting_check
from .normalform import (
    solve_homological,
    normalize_step,
    normalize,
    renormalize_limit,
    full_normal_form,
    iterate_resonant,
    resonant_norm_growth,
    resonant_derivative_growth,
)

__version__ = "0.1.0"
