"""Mean-field and refined mean-field analysis of two-timescale population models."""

from ._core import (
    CsmaSpec,
    Error,
    Model,
    NumericalError,
    Observable,
    RefinementTerms,
    SimulationError,
    ToyParameters,
    ValidationError,
    analyze,
    average_drift,
    build_csma,
    csma_five_node,
    csma_product_form_pi,
    csma_three_node,
    deviation_matrix,
    drift_matrix,
    estimate_steady_state,
    estimate_transient_means,
    exact_expectation,
    fixed_point,
    integrate,
    kernel,
    parse_csma_json,
    refined_estimate,
    refinement_terms,
    solve_lyapunov,
    solve_sylvester,
    stationary_distribution,
    toy_model,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
