"""Spectral workbench for forced internal waves with small viscosity on the 2-torus."""

__version__ = "0.1.0"

from . import dynamics, evolution, harness, quantize, resolvent, symbols, util
from .dynamics import (
    EscapeFunction,
    InvariantSet,
    Trajectory,
    build_escape_function,
    detect_invariant_sets,
    integrate_flow,
    verify_simple_structure,
)
from .evolution import (
    DecompositionResult,
    Decomposer,
    contraction_check,
    decompose,
    propagate,
    semigroup_contour,
    timescale_scan,
)
from .quantize import (
    SpectralField,
    TruncatedOperator,
    assemble_P,
    assemble_Q,
    field_from_function,
    random_smooth_field,
    sobolev_norm,
    spectral_cutoff,
    spectral_function,
    viscous_operator,
)
from .resolvent import (
    Resolvent,
    check_la1,
    limiting_resolvent,
    operator_norm,
    resolvent_scaling_scan,
    solve_resolvent,
    spectrum_Pnu,
)
from .symbols import (
    FlowPoint,
    HomogeneousSymbol,
    ViscositySymbol,
    builtin_library,
    eval_symbol,
    get_symbol,
    rescaled_field,
)

__all__ = [
    "__version__",
    # symbols
    "FlowPoint", "HomogeneousSymbol", "ViscositySymbol", "builtin_library",
    "eval_symbol", "get_symbol", "rescaled_field",
    # dynamics
    "Trajectory", "InvariantSet", "EscapeFunction", "integrate_flow",
    "detect_invariant_sets", "build_escape_function", "verify_simple_structure",
    # quantize
    "SpectralField", "TruncatedOperator", "assemble_P", "assemble_Q",
    "field_from_function", "random_smooth_field", "sobolev_norm",
    "spectral_function", "spectral_cutoff", "viscous_operator",
    # resolvent
    "Resolvent", "solve_resolvent", "operator_norm", "check_la1",
    "spectrum_Pnu", "resolvent_scaling_scan", "limiting_resolvent",
    # evolution
    "DecompositionResult", "Decomposer", "propagate", "semigroup_contour",
    "decompose", "timescale_scan", "contraction_check",
    # modules
    "symbols", "dynamics", "quantize", "resolvent", "evolution", "harness",
    "util",
]
