"""Spectral relaxation hierarchies for polynomial optimization over varieties."""

from .eig import EigResult, NotPositiveDefinite, lambda_min_generalized
from .gram import GramPair, NotPositiveDefiniteError, lift, method1_init, method2_init, min_norm_gram, noniterative
from .hierarchy import (
    BoundReport,
    ContextMismatchError,
    LevelRecord,
    PrecomputedContext,
    ProblemSpec,
    load_context,
    precompute,
    save_context,
    solve,
    solve_with_context,
)
from .ideal import GroebnerContext, IdealPresentation, buchberger, groebner_context
from .polyring import MonomialOrder, ParseError, Polynomial, parse
from .subspace import (
    NotRepresentableError,
    NotSphericalError,
    SphericalSystem,
    augment_with_constant,
    build_basis,
    find_kappa,
    verify_spherical,
)

__all__ = [
    "BoundReport", "ContextMismatchError", "EigResult", "GramPair", "GroebnerContext",
    "IdealPresentation", "LevelRecord", "MonomialOrder", "NotPositiveDefinite",
    "NotPositiveDefiniteError", "NotRepresentableError", "NotSphericalError", "ParseError",
    "Polynomial", "PrecomputedContext", "ProblemSpec", "SphericalSystem", "augment_with_constant",
    "buchberger", "build_basis", "find_kappa", "groebner_context", "lambda_min_generalized", "lift",
    "load_context", "method1_init", "method2_init", "min_norm_gram", "noniterative", "parse",
    "precompute", "save_context", "solve", "solve_with_context", "verify_spherical",
]
