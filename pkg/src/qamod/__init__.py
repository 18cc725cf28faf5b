"""Conformal moduli of planar domains with islands via discrete harmonic measure."""

from .circuit_laws import arithmetic_bound, fuzz, geometric_extremal_chain, harmonic_sum, random_chain, validate_chain
from .covering import (
    CoveringMap,
    covering_lemma_experiment,
    preimage_components,
    verify_exact_transform,
    verify_lower_bound,
    verify_transform_bounds,
)
from .errors import ConvergenceError, CoveringError, InputError, QamodError, ResolutionError, SceneError
from .experiments import (
    HalfplaneFamily,
    convergence_study,
    default_sweep_families,
    halfplane_measured,
    halfplane_predicted,
    qa_ratio_sweep,
)
from .geometry import Disk, HalfplaneBox, Polygon, Rect, SceneSpec, Segment, build_scene, make_scene, rasterize, topological_complexity
from .laplace import dirichlet_energy, extremal_width, solve_potential
from .moduli import (
    collar_check,
    comparable_terms_check,
    compute_X,
    compute_Y,
    compute_Z,
    groetzsch_check,
    modulus,
    qa_report,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
