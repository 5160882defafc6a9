"""Irreducible factorization over Q, delegated to sympy."""

from __future__ import annotations

from fractions import Fraction

import sympy

from .poly import ExactPoly


def to_sympy(p: ExactPoly) -> sympy.Poly:
    gens = sympy.symbols(p.variables) if p.variables else (sympy.Symbol("_z"),)
    if p.variables and len(p.variables) == 1:
        gens = (gens,) if not isinstance(gens, tuple) else gens
    terms = {m if p.variables else (0,): sympy.Rational(c.numerator, c.denominator)
             for m, c in p.terms.items()}
    return sympy.Poly.from_dict(terms or {(0,) * len(gens): 0}, *gens, domain="QQ")


def from_sympy(poly: sympy.Poly, variables) -> ExactPoly:
    variables = tuple(variables)
    terms = {}
    for m, c in poly.terms():
        c = sympy.Rational(c)
        terms[tuple(m)[:len(variables)] if variables else ()] = Fraction(int(c.p), int(c.q))
    return ExactPoly(terms, variables)


def factor(p: ExactPoly) -> tuple:
    """Return ``(content, [(factor, multiplicity), ...])`` with primitive factors."""
    if p.is_zero():
        raise ValueError("cannot factor the zero polynomial")
    if p.is_constant():
        return p.constant_value(), []
    content, pieces = to_sympy(p).factor_list()
    out = [(from_sympy(f, p.variables).primitive(), k) for f, k in pieces]
    out.sort(key=lambda fk: (fk[0].degree(), fk[0].to_text()))
    c = sympy.Rational(content)
    return Fraction(int(c.p), int(c.q)), out


def squarefree_part(p: ExactPoly) -> ExactPoly:
    """Product of the distinct irreducible factors of ``p``, made primitive."""
    _, pieces = factor(p)
    out = ExactPoly.constant(1, p.variables)
    for f, _ in pieces:
        out = out * f
    return out.primitive()


def distinct_factors(p: ExactPoly) -> list:
    return [f for f, _ in factor(p)[1]]


def is_monomial(p: ExactPoly) -> bool:
    return len(p.terms) == 1
