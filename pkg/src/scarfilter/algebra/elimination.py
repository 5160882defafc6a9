"""Complex substitution, resultants and Groebner-basis elimination."""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Mapping, Sequence

from .poly import ExactPoly, to_exact, union_variables


class AlgebraError(ValueError):
    """Raised for invalid algebraic input."""


class BudgetExceeded(RuntimeError):
    """A symbolic computation ran past its term or time budget."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class Budget:
    """Limits for symbolic work; ``seconds=None`` disables the clock check."""

    max_reductions: int = 20000
    max_basis: int = 200
    max_terms: int = 50000
    seconds: float | None = None

    def deadline(self):
        return None if self.seconds is None else time.monotonic() + self.seconds


# ---------------------------------------------------------------------------
# complex polynomials as (Re, Im) pairs

@dataclass(frozen=True)
class ComplexPolyPair:
    """A polynomial with Gaussian-rational coefficients over real variables."""

    re: ExactPoly
    im: ExactPoly

    def __post_init__(self):
        if self.re.variables != self.im.variables:
            variables = union_variables([self.re, self.im])
            object.__setattr__(self, "re", self.re.with_variables(variables))
            object.__setattr__(self, "im", self.im.with_variables(variables))

    @classmethod
    def real(cls, p: ExactPoly) -> "ComplexPolyPair":
        return cls(p, ExactPoly({}, p.variables))

    @classmethod
    def constant(cls, value, variables: Sequence[str] = ()) -> "ComplexPolyPair":
        re, im = _complex_parts(value)
        return cls(ExactPoly.constant(re, variables), ExactPoly.constant(im, variables))

    @property
    def variables(self):
        return self.re.variables

    def _lift(self, other):
        if isinstance(other, ComplexPolyPair):
            return other
        if isinstance(other, ExactPoly):
            return ComplexPolyPair.real(other)
        return ComplexPolyPair.constant(other, self.variables)

    def __add__(self, other):
        o = self._lift(other)
        return ComplexPolyPair(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return ComplexPolyPair(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        return ComplexPolyPair(self.re * o.re - self.im * o.im,
                               self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = ComplexPolyPair.constant(1, self.variables)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conjugate(self):
        return ComplexPolyPair(self.re, -self.im)

    def degree(self, var: str) -> int:
        return max(self.re.degree(var), self.im.degree(var))

    def evaluate(self, point: Mapping[str, object]):
        return self.re.evaluate(point) + 1j * self.im.evaluate(point)


def _complex_parts(value):
    if isinstance(value, complex):
        return to_exact(value.real), to_exact(value.imag)
    if isinstance(value, tuple):
        return to_exact(value[0]), to_exact(value[1])
    return to_exact(value), Fraction(0)


@dataclass(frozen=True)
class Binding:
    """A rational function ``(re + i*im) / den`` of new real variables."""

    numerator: ComplexPolyPair
    denominator: ExactPoly

    @classmethod
    def of(cls, re: ExactPoly, im: ExactPoly | None = None,
           den: ExactPoly | None = None) -> "Binding":
        im = im if im is not None else ExactPoly({}, re.variables)
        den = den if den is not None else ExactPoly.constant(1, re.variables)
        return cls(ComplexPolyPair(re, im), den)


def substitute(p, bindings: Mapping[str, Binding]):
    """Substitute rational complex expressions for the variables of ``p``.

    ``p`` is an :class:`ExactPoly` or :class:`ComplexPolyPair`.  Every variable
    of ``p`` that is not bound stays as a (real) variable.  Returns the pair
    ``(numerator, denominator)`` after clearing the common denominator
    ``prod(den_v ** deg_v(p))``.
    """
    if isinstance(p, ExactPoly):
        p = ComplexPolyPair.real(p)
    for v in bindings:
        if v not in p.variables:
            raise AlgebraError(f"unknown variable {v!r}")
    for v, b in bindings.items():
        if b.denominator.is_zero():
            raise AlgebraError(f"binding for {v!r} has a zero denominator")
    kept = tuple(v for v in p.variables if v not in bindings)
    new_vars = kept
    for b in bindings.values():
        new_vars = new_vars + tuple(x for x in union_variables(
            [b.numerator.re, b.denominator]) if x not in new_vars)

    degs = {v: p.degree(v) for v in bindings}
    num_pows: dict = {}
    den_pows: dict = {}

    def num_pow(v, e):
        key = (v, e)
        if key not in num_pows:
            b = bindings[v]
            base = ComplexPolyPair(b.numerator.re.with_variables(new_vars),
                                   b.numerator.im.with_variables(new_vars))
            num_pows[key] = base ** e
        return num_pows[key]

    def den_pow(v, e):
        key = (v, e)
        if key not in den_pows:
            den_pows[key] = bindings[v].denominator.with_variables(new_vars) ** e
        return den_pows[key]

    zero = ExactPoly({}, new_vars)
    total = ComplexPolyPair(zero, zero)
    idx = {v: p.variables.index(v) for v in p.variables}
    monos = set(p.re.terms) | set(p.im.terms)
    for m in sorted(monos):
        c = ComplexPolyPair(
            ExactPoly.constant(p.re.terms.get(m, 0), new_vars),
            ExactPoly.constant(p.im.terms.get(m, 0), new_vars))
        free = [0] * len(new_vars)
        for v in p.variables:
            e = m[idx[v]]
            if v in bindings:
                if e:
                    c = c * num_pow(v, e)
                if degs[v] - e:
                    c = c * den_pow(v, degs[v] - e)
            elif e:
                free[new_vars.index(v)] = e
        if any(free):
            c = c * ExactPoly({tuple(free): 1}, new_vars)
        total = total + c
    den = ExactPoly.constant(1, new_vars)
    for v, d in degs.items():
        if d > 0:
            den = den * den_pow(v, d)
    return total, den


# ---------------------------------------------------------------------------
# resultants

def _int_bareiss_det(matrix: list) -> int:
    """Fraction-free determinant of an integer matrix."""
    m = [row[:] for row in matrix]
    n = len(m)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        pivot = m[k][k]
        rk = m[k]
        for i in range(k + 1, n):
            ri = m[i]
            lead = ri[k]
            for j in range(k + 1, n):
                ri[j] = (pivot * ri[j] - lead * rk[j]) // prev
            ri[k] = 0
        prev = pivot
    return sign * m[n - 1][n - 1]


def sylvester_matrix(f_coeffs: list, g_coeffs: list) -> list:
    """Sylvester matrix from coefficient lists ordered by increasing power."""
    df, dg = len(f_coeffs) - 1, len(g_coeffs) - 1
    n = df + dg
    zero = f_coeffs[0] * 0
    rows = []
    fr = list(reversed(f_coeffs))
    gr = list(reversed(g_coeffs))
    for i in range(dg):
        rows.append([zero] * i + fr + [zero] * (n - df - 1 - i))
    for i in range(df):
        rows.append([zero] * i + gr + [zero] * (n - dg - 1 - i))
    return rows


def _ipoly(p: ExactPoly, scale: int) -> dict:
    out = {}
    for m, c in p.terms.items():
        v = c * scale
        if v.denominator != 1:
            raise AlgebraError("scaling did not clear denominators")
        out[m] = int(v)
    return out


def _spec(poly: dict, k: int, value: int) -> dict:
    # substitute variable position k by an integer
    out: dict = {}
    for m, c in poly.items():
        key = m[:k] + (0,) + m[k + 1:]
        out[key] = out.get(key, 0) + c * value ** m[k]
    return {m: c for m, c in out.items() if c}


def _interp(points: list, values: list) -> list:
    """Newton interpolation on integer nodes; returns monomial coefficients."""
    n = len(points)
    coef = [Fraction(v) for v in values]
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (points[i] - points[i - j])
    poly = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        # poly = poly * (x - points[i]) + coef[i]
        new = [Fraction(0)] * n
        for d in range(n - 1):
            new[d + 1] += poly[d]
            new[d] -= poly[d] * points[i]
        new[0] += coef[i]
        poly = new
    return poly


def _resultant_int(fc: list, gc: list, free: list, nvars: int, deadline) -> dict:
    """Resultant of integer-coefficient polys via evaluation/interpolation.

    ``fc`` and ``gc`` are coefficient lists (increasing power) of dict-polys
    over ``nvars`` variables; ``free`` lists the positions still symbolic.
    """
    if deadline is not None and time.monotonic() > deadline:
        raise BudgetExceeded("resultant time budget exceeded")
    if not free:
        zero = (0,) * nvars
        fm = [c.get(zero, 0) for c in fc]
        gm = [c.get(zero, 0) for c in gc]
        det = _int_bareiss_det(sylvester_matrix(fm, gm))
        return {zero: det} if det else {}
    k = free[0]
    dg, df = len(gc) - 1, len(fc) - 1
    bf = max((m[k] for c in fc for m in c), default=0)
    bg = max((m[k] for c in gc for m in c), default=0)
    bound = dg * bf + df * bg
    nodes = list(range(bound + 1))
    samples = []
    for x in nodes:
        fs = [_spec(c, k, x) for c in fc]
        gs = [_spec(c, k, x) for c in gc]
        samples.append(_resultant_int(fs, gs, free[1:], nvars, deadline))
    monos = set()
    for s in samples:
        monos.update(s)
    out: dict = {}
    for m in monos:
        coeffs = _interp(nodes, [s.get(m, 0) for s in samples])
        for e, c in enumerate(coeffs):
            if c:
                if c.denominator != 1:
                    raise AlgebraError("non-integral interpolant")
                out[m[:k] + (e,) + m[k + 1:]] = int(c)
    return out


def resultant(f: ExactPoly, g: ExactPoly, var: str, budget: Budget | None = None) -> ExactPoly:
    """Sylvester resultant of ``f`` and ``g`` with respect to ``var``.

    The determinant is evaluated at integer points of the remaining variables
    by fraction-free elimination and recovered by exact interpolation.
    """
    f, g = f._align(g)
    if var not in f.variables or f.degree(var) <= 0 or g.degree(var) <= 0:
        raise AlgebraError("nothing to eliminate")
    sf, sg = f.denominator_lcm(), g.denominator_lcm()
    df, dg = f.degree(var), g.degree(var)
    k = f.variables.index(var)
    fc = [_ipoly(c, sf) for c in f.coefficients(var)]
    gc = [_ipoly(c, sg) for c in g.coefficients(var)]
    free = [i for i, v in enumerate(f.variables) if i != k and
            any(m[i] for c in fc + gc for m in c)]
    deadline = budget.deadline() if budget else None
    res = _resultant_int(fc, gc, free, len(f.variables), deadline)
    scale = Fraction(1, sf ** dg * sg ** df)
    return ExactPoly({m: c * scale for m, c in res.items()}, f.variables)


# ---------------------------------------------------------------------------
# Groebner bases (Buchberger, lex order)

def _lm(p: dict):
    return max(p)


def _divides(a, b):
    return all(x <= y for x, y in zip(a, b))


def _reduce(p: dict, basis: list, counter: list, budget: Budget, deadline) -> dict:
    """Full reduction of ``p`` against ``basis`` (list of (lm, lc, terms))."""
    p = dict(p)
    rem: dict = {}
    while p:
        counter[0] += 1
        if counter[0] > budget.max_reductions:
            raise BudgetExceeded("elimination budget exceeded")
        if deadline is not None and counter[0] % 256 == 0 and time.monotonic() > deadline:
            raise BudgetExceeded("elimination budget exceeded")
        m = max(p)
        c = p[m]
        for lm, lc, terms in basis:
            if _divides(lm, m):
                shift = tuple(x - y for x, y in zip(m, lm))
                q = c / lc
                for tm, tc in terms.items():
                    key = tuple(x + y for x, y in zip(tm, shift))
                    v = p.get(key, 0) - q * tc
                    if v:
                        p[key] = v
                    else:
                        p.pop(key, None)
                if len(p) > budget.max_terms:
                    raise BudgetExceeded("elimination budget exceeded")
                break
        else:
            rem[m] = c
            del p[m]
    return rem


def groebner_basis(polys: Sequence[ExactPoly], order: Sequence[str],
                   budget: Budget | None = None) -> list:
    """Reduced lex Groebner basis with ``order[0]`` the largest variable."""
    budget = budget or Budget()
    deadline = budget.deadline()
    order = tuple(order)
    gens = [p.with_variables(order) for p in polys]
    gens = [dict(p.terms) for p in gens if p.terms]
    if not gens:
        return []
    basis: list = []
    counter = [0]

    def entry(terms):
        lm = max(terms)
        return (lm, terms[lm], terms)

    try:
        for g in gens:
            r = _reduce(g, basis, counter, budget, deadline)
            if r:
                basis.append(entry(r))
        pairs = [(i, j) for j in range(len(basis)) for i in range(j)]
        while pairs:
            # normal strategy: smallest lcm first
            pairs.sort(key=lambda ij: tuple(max(a, b) for a, b in zip(basis[ij[0]][0], basis[ij[1]][0])),
                       reverse=True)
            i, j = pairs.pop()
            lmi, lci, ti = basis[i]
            lmj, lcj, tj = basis[j]
            lcm_m = tuple(max(a, b) for a, b in zip(lmi, lmj))
            if all(a == 0 or b == 0 for a, b in zip(lmi, lmj)):
                continue  # coprime leading monomials
            if any(k not in (i, j) and _divides(basis[k][0], lcm_m)
                   and (min(i, k), max(i, k)) not in pairs and (min(j, k), max(j, k)) not in pairs
                   for k in range(len(basis))):
                continue  # chain criterion
            s: dict = {}
            si = tuple(a - b for a, b in zip(lcm_m, lmi))
            sj = tuple(a - b for a, b in zip(lcm_m, lmj))
            for m, c in ti.items():
                key = tuple(a + b for a, b in zip(m, si))
                s[key] = s.get(key, 0) + c / lci
            for m, c in tj.items():
                key = tuple(a + b for a, b in zip(m, sj))
                s[key] = s.get(key, 0) - c / lcj
            s = {m: c for m, c in s.items() if c}
            r = _reduce(s, basis, counter, budget, deadline)
            if r:
                basis.append(entry(r))
                if len(basis) > budget.max_basis:
                    raise BudgetExceeded("elimination budget exceeded",
                                         partial=[ExactPoly(b[2], order) for b in basis])
                n = len(basis) - 1
                pairs.extend((k, n) for k in range(n))
    except BudgetExceeded as exc:
        if exc.partial is None:
            raise BudgetExceeded(str(exc), partial=[ExactPoly(b[2], order) for b in basis]) from None
        raise
    # minimalise and inter-reduce
    basis = [b for b in basis]
    minimal = []
    for k, b in enumerate(basis):
        if any(_divides(o[0], b[0]) and (o[0] != b[0] or idx < k)
               for idx, o in enumerate(basis) if idx != k):
            continue
        minimal.append(b)
    reduced = []
    for k, b in enumerate(minimal):
        others = [o for idx, o in enumerate(minimal) if idx != k]
        r = _reduce(b[2], others, counter, budget, deadline)
        lc = r[max(r)]
        reduced.append(ExactPoly({m: c / lc for m, c in r.items()}, order))
    reduced.sort(key=lambda p: p.leading_monomial())
    return reduced


def groebner_elimination(generators: Sequence[ExactPoly], eliminate,
                         budget: Budget | None = None) -> list:
    """Generators of the elimination ideal ``<generators> ∩ k[remaining vars]``.

    Uses a lex Groebner basis with the eliminated variables ranked highest.
    Raises :class:`BudgetExceeded` (carrying the partial basis) when the
    budget runs out.
    """
    generators = [g for g in generators]
    if not generators:
        raise AlgebraError("no generators")
    eliminate = set(eliminate)
    variables = union_variables(generators)
    missing = eliminate - set(variables)
    if missing:
        raise AlgebraError(f"unknown variable(s) {sorted(missing)}")
    order = tuple(v for v in variables if v in eliminate) + \
        tuple(v for v in variables if v not in eliminate)
    gb = groebner_basis(generators, order, budget)
    idx = [order.index(v) for v in eliminate]
    kept = tuple(v for v in order if v not in eliminate)
    out = []
    for p in gb:
        if all(m[i] == 0 for m in p.terms for i in idx):
            out.append(p.with_variables(kept).primitive())
    return out


def reduce_polynomial(p: ExactPoly, basis: Sequence[ExactPoly], order: Sequence[str]) -> ExactPoly:
    """Remainder of ``p`` on division by a Groebner ``basis`` (lex, ``order``)."""
    order = tuple(order)
    entries = []
    for b in basis:
        t = b.with_variables(order).terms
        lm = max(t)
        entries.append((lm, t[lm], t))
    r = _reduce(dict(p.with_variables(order).terms), entries, [0],
                Budget(max_reductions=10 ** 9, max_terms=10 ** 9), None)
    return ExactPoly(r, order)


def dimension(basis: Sequence[ExactPoly], order: Sequence[str]) -> int:
    """Krull dimension of the ideal with Groebner ``basis`` (``-1`` if trivial).

    Leading-monomial analysis: the dimension is the size of the largest set of
    variables none of whose monomials appear among the leading monomials.
    """
    order = tuple(order)
    if any(p.is_constant() and not p.is_zero() for p in basis):
        return -1
    lms = [p.with_variables(order).leading_monomial() for p in basis if not p.is_zero()]
    from itertools import combinations
    n = len(order)
    for size in range(n, -1, -1):
        for subset in combinations(range(n), size):
            s = set(subset)
            # some leading monomial supported inside s means s is not independent
            if not any(all((e == 0) or (i in s) for i, e in enumerate(lm)) for lm in lms):
                return size
    return 0


def lcm_int(values) -> int:
    out = 1
    for v in values:
        out = lcm(out, v)
    return out
