"""Sparse multivariate polynomials with exact rational coefficients.

Terms are stored as a mapping from exponent tuples to :class:`fractions.Fraction`,
indexed by an ordered tuple of variable names.  The monomial order used by
:meth:`ExactPoly.leading_monomial` is lexicographic in the order of
``variables`` (first variable is the most significant).
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import reduce
from math import gcd, lcm
from typing import Iterable, Mapping, Sequence

ExactScalar = Fraction

Monomial = tuple


def to_exact(value, max_denominator: int | None = None) -> Fraction:
    """Convert an int, float, str or Fraction to an exact rational.

    Floats are converted through their shortest decimal repr so that ``0.1``
    becomes ``1/10`` rather than the binary expansion.  If ``max_denominator``
    is given the result is the closest rational with a bounded denominator.
    """
    if isinstance(value, Fraction):
        out = value
    elif isinstance(value, int):
        out = Fraction(value)
    elif isinstance(value, float):
        out = Fraction(repr(value))
    else:
        out = Fraction(str(value))
    if max_denominator is not None:
        out = out.limit_denominator(max_denominator)
    return out


class ExactPoly:
    """Immutable sparse polynomial over the rationals."""

    __slots__ = ("variables", "terms", "_hash")

    def __init__(self, terms: Mapping[tuple, object] | None = None,
                 variables: Sequence[str] = ()):
        variables = tuple(variables)
        if len(set(variables)) != len(variables):
            raise ValueError(f"duplicate variable names in {variables}")
        clean = {}
        n = len(variables)
        for mono, c in (terms or {}).items():
            mono = tuple(mono)
            if len(mono) != n:
                raise ValueError(f"monomial {mono} does not match variables {variables}")
            c = c if isinstance(c, Fraction) else to_exact(c)
            if c:
                clean[mono] = clean.get(mono, 0) + c
                if not clean[mono]:
                    del clean[mono]
        self.variables = variables
        self.terms = clean
        self._hash = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, c, variables: Sequence[str] = ()) -> "ExactPoly":
        return cls({(0,) * len(variables): c}, variables)

    @classmethod
    def var(cls, name: str, variables: Sequence[str] | None = None) -> "ExactPoly":
        variables = tuple(variables) if variables is not None else (name,)
        mono = tuple(1 if v == name else 0 for v in variables)
        if name not in variables:
            raise ValueError(f"unknown variable {name!r}")
        return cls({mono: 1}, variables)

    @classmethod
    def _raw(cls, terms: dict, variables: tuple) -> "ExactPoly":
        # trusted constructor: terms already clean
        obj = cls.__new__(cls)
        obj.variables = variables
        obj.terms = terms
        obj._hash = None
        return obj

    # -- variable bookkeeping ---------------------------------------------
    def with_variables(self, variables: Sequence[str]) -> "ExactPoly":
        """Re-index onto ``variables``, which must contain every used variable."""
        variables = tuple(variables)
        if variables == self.variables:
            return self
        idx = [variables.index(v) if v in variables else -1 for v in self.variables]
        n = len(variables)
        out = {}
        for mono, c in self.terms.items():
            new = [0] * n
            for k, (e, j) in enumerate(zip(mono, idx)):
                if e:
                    if j < 0:
                        raise ValueError(f"variable {self.variables[k]!r} "
                                         f"is used but not in {variables}")
                    new[j] = e
            out[tuple(new)] = c
        return ExactPoly._raw(out, variables)

    def free_variables(self) -> tuple:
        used = [False] * len(self.variables)
        for mono in self.terms:
            for i, e in enumerate(mono):
                if e:
                    used[i] = True
        return tuple(v for v, u in zip(self.variables, used) if u)

    def _align(self, other):
        if not isinstance(other, ExactPoly):
            other = ExactPoly.constant(to_exact(other), self.variables)
        if other.variables == self.variables:
            return self, other
        merged = self.variables + tuple(v for v in other.variables if v not in self.variables)
        return self.with_variables(merged), other.with_variables(merged)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        a, b = self._align(other)
        out = dict(a.terms)
        for mono, c in b.terms.items():
            s = out.get(mono, 0) + c
            if s:
                out[mono] = s
            else:
                out.pop(mono, None)
        return ExactPoly._raw(out, a.variables)

    __radd__ = __add__

    def __neg__(self):
        return ExactPoly._raw({m: -c for m, c in self.terms.items()}, self.variables)

    def __sub__(self, other):
        return self + (-other if isinstance(other, ExactPoly) else -to_exact(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, ExactPoly):
            c = to_exact(other)
            if not c:
                return ExactPoly._raw({}, self.variables)
            return ExactPoly._raw({m: v * c for m, v in self.terms.items()}, self.variables)
        a, b = self._align(other)
        out: dict = {}
        for m1, c1 in a.terms.items():
            for m2, c2 in b.terms.items():
                m = tuple(x + y for x, y in zip(m1, m2))
                out[m] = out.get(m, 0) + c1 * c2
        return ExactPoly._raw({m: c for m, c in out.items() if c}, a.variables)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        result = ExactPoly.constant(1, self.variables)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __truediv__(self, other):
        c = to_exact(other)
        return self * (1 / c)

    def __eq__(self, other):
        if not isinstance(other, ExactPoly):
            try:
                other = ExactPoly.constant(to_exact(other), self.variables)
            except (TypeError, ValueError):
                return NotImplemented
        a, b = self._align(other)
        return a.terms == b.terms

    def __hash__(self):
        if self._hash is None:
            fv = self.free_variables()
            p = self.with_variables(tuple(sorted(fv)))
            self._hash = hash(frozenset(p.terms.items()) | {p.variables})
        return self._hash

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"ExactPoly({self.to_text()!r}, variables={self.variables})"

    def __str__(self):
        return self.to_text()

    # -- inspection -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(m) for m in self.terms)

    def constant_value(self) -> Fraction:
        return self.terms.get((0,) * len(self.variables), Fraction(0))

    def degree(self, var: str | None = None) -> int:
        """Degree in ``var``, or total degree; ``-1`` for the zero polynomial."""
        if not self.terms:
            return -1
        if var is None:
            return max(sum(m) for m in self.terms)
        if var not in self.variables:
            return 0
        i = self.variables.index(var)
        return max(m[i] for m in self.terms)

    def leading_monomial(self) -> tuple:
        return max(self.terms)

    def leading_coefficient(self) -> Fraction:
        return self.terms[max(self.terms)]

    def coefficients(self, var: str) -> list:
        """Coefficients in ``var`` as a list indexed by power (same variable list)."""
        d = self.degree(var)
        out = [dict() for _ in range(max(d, 0) + 1)]
        if var not in self.variables:
            return [self]
        i = self.variables.index(var)
        for m, c in self.terms.items():
            out[m[i]][m[:i] + (0,) + m[i + 1:]] = c
        return [ExactPoly._raw(t, self.variables) for t in out]

    def diff(self, var: str) -> "ExactPoly":
        if var not in self.variables:
            return ExactPoly._raw({}, self.variables)
        i = self.variables.index(var)
        out = {}
        for m, c in self.terms.items():
            if m[i]:
                out[m[:i] + (m[i] - 1,) + m[i + 1:]] = c * m[i]
        return ExactPoly._raw(out, self.variables)

    # -- evaluation and substitution --------------------------------------
    def evaluate(self, point: Mapping[str, object]):
        """Evaluate at a full assignment; the value type follows the inputs.

        Works with Fractions (exact), floats, complex numbers, mpmath numbers
        and mpmath intervals.
        """
        vals = []
        for v in self.variables:
            if v in point:
                vals.append(point[v])
            elif any(m[self.variables.index(v)] for m in self.terms):
                raise KeyError(f"no value for variable {v!r}")
            else:
                vals.append(0)
        total = 0
        for m, c in self.terms.items():
            term = _as_number(c, vals)
            for x, e in zip(vals, m):
                if e:
                    term = term * x ** e
            total = total + term
        return total

    def partial(self, point: Mapping[str, object]) -> "ExactPoly":
        """Substitute exact rational values for some variables; they stay in the list."""
        idx = {self.variables.index(v): to_exact(x) for v, x in point.items()
               if v in self.variables}
        out: dict = {}
        for m, c in self.terms.items():
            val = c
            new = list(m)
            for i, x in idx.items():
                if m[i]:
                    val = val * x ** m[i]
                    new[i] = 0
            new = tuple(new)
            out[new] = out.get(new, 0) + val
        return ExactPoly._raw({m: c for m, c in out.items() if c}, self.variables)

    def compose(self, bindings: Mapping[str, "ExactPoly"]) -> "ExactPoly":
        """Replace variables by polynomials (polynomial substitution)."""
        keep = tuple(v for v in self.variables if v not in bindings)
        target = keep
        for b in bindings.values():
            target = target + tuple(v for v in b.variables if v not in target)
        result = ExactPoly._raw({}, target)
        cache: dict = {}
        for m, c in self.terms.items():
            term = ExactPoly.constant(c, target)
            base_mono = [0] * len(target)
            for v, e in zip(self.variables, m):
                if not e:
                    continue
                if v in bindings:
                    key = (v, e)
                    if key not in cache:
                        cache[key] = bindings[v].with_variables(target) ** e
                    term = term * cache[key]
                else:
                    base_mono[target.index(v)] += e
            if any(base_mono):
                term = term * ExactPoly({tuple(base_mono): 1}, target)
            result = result + term
        return result

    # -- normalisation ----------------------------------------------------
    def denominator_lcm(self) -> int:
        return reduce(lcm, (c.denominator for c in self.terms.values()), 1)

    def integer_content(self) -> Fraction:
        """Rational content: gcd of numerators over lcm of denominators."""
        if not self.terms:
            return Fraction(0)
        den = self.denominator_lcm()
        g = reduce(gcd, (int(c * den) for c in self.terms.values()), 0)
        return Fraction(g, den)

    def primitive(self) -> "ExactPoly":
        """Integer-coefficient primitive part with positive leading coefficient."""
        if not self.terms:
            return self
        c = self.integer_content()
        if self.leading_coefficient() < 0:
            c = -c
        return self * (1 / c)

    def monic(self) -> "ExactPoly":
        return self * (1 / self.leading_coefficient())

    def drop_variables(self) -> "ExactPoly":
        """Restrict the variable list to variables that actually occur."""
        return self.with_variables(self.free_variables())

    # -- text form --------------------------------------------------------
    def to_text(self) -> str:
        """Canonical text ``coeff*v1^e1*v2^e2 + ...`` (lex-descending terms)."""
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, reverse=True):
            c = self.terms[m]
            factors = [str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"]
            for v, e in zip(self.variables, m):
                if e == 1:
                    factors.append(v)
                elif e > 1:
                    factors.append(f"{v}^{e}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    @classmethod
    def from_text(cls, text: str, variables: Sequence[str] | None = None) -> "ExactPoly":
        """Parse the canonical text form written by :meth:`to_text`."""
        text = text.strip()
        if text == "0":
            return cls({}, tuple(variables or ()))
        raw_terms = []
        names: list = list(variables or [])
        for chunk in text.split(" + "):
            factors = chunk.strip().split("*")
            coeff = Fraction(factors[0])
            powers = {}
            for f in factors[1:]:
                m = _FACTOR_RE.fullmatch(f)
                if m is None:
                    raise ValueError(f"malformed factor {f!r} in {chunk!r}")
                name, exp = m.group(1), int(m.group(2) or 1)
                powers[name] = powers.get(name, 0) + exp
                if name not in names:
                    if variables is not None:
                        raise ValueError(f"unknown variable {name!r}")
                    names.append(name)
            raw_terms.append((coeff, powers))
        names = tuple(names)
        terms: dict = {}
        for coeff, powers in raw_terms:
            mono = tuple(powers.get(v, 0) for v in names)
            terms[mono] = terms.get(mono, 0) + coeff
        return cls(terms, names)


_FACTOR_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\^(\d+))?")


def _as_number(c: Fraction, vals):
    # pick a numeric representation of c compatible with the evaluation point
    for x in vals:
        mod = type(x).__module__
        if mod.startswith("mpmath"):
            import mpmath
            if type(x).__name__ == "ivmpf":
                return mpmath.iv.mpf(c.numerator) / c.denominator
            return mpmath.mpf(c.numerator) / c.denominator
        if isinstance(x, (float, complex)):
            return c.numerator / c.denominator
    return c


def poly_vars(*names: str):
    """Return ``ExactPoly`` generators sharing one variable list."""
    return tuple(ExactPoly.var(n, names) for n in names)


def union_variables(polys: Iterable[ExactPoly]) -> tuple:
    out: tuple = ()
    for p in polys:
        out = out + tuple(v for v in p.variables if v not in out)
    return out
