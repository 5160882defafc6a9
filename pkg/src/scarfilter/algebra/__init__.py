"""Exact polynomial algebra: arithmetic, elimination and real solving."""

from .elimination import (AlgebraError, Binding, Budget, BudgetExceeded, ComplexPolyPair,
                          dimension, groebner_basis, groebner_elimination, reduce_polynomial,
                          resultant, substitute, sylvester_matrix)
from .factor import distinct_factors, factor, squarefree_part
from .poly import ExactPoly, ExactScalar, poly_vars, to_exact, union_variables
from .realsolve import (Component, Interval, RealPoint, count_real_roots,
                        decompose_zero_dimensional, real_roots_univariate, real_solve)

EliminationBudgetExceeded = BudgetExceeded

__all__ = [
    "AlgebraError", "Binding", "Budget", "BudgetExceeded", "ComplexPolyPair", "Component",
    "EliminationBudgetExceeded", "ExactPoly", "ExactScalar", "Interval", "RealPoint",
    "count_real_roots", "decompose_zero_dimensional", "dimension", "distinct_factors", "factor",
    "groebner_basis", "groebner_elimination", "poly_vars", "real_roots_univariate", "real_solve",
    "reduce_polynomial", "resultant", "squarefree_part", "substitute", "sylvester_matrix",
    "to_exact", "union_variables",
]
