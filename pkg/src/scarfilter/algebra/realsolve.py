"""Certified real roots of univariate polynomials and of 2-variable systems.

Univariate isolation uses Descartes' rule of signs on Bernstein-type
transforms (the Vincent-Collins-Akritas bisection) over the integers, then
refines each isolating interval by exact bisection.  Bivariate systems are
reduced to one variable with a resultant and lifted numerically; every
returned box is checked by interval evaluation.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterable, Mapping, Sequence

import mpmath

from .elimination import AlgebraError, Budget, BudgetExceeded, groebner_basis, dimension, resultant
from .factor import distinct_factors
from .poly import ExactPoly, to_exact, union_variables

DEFAULT_WIDTH = 1e-10


# ---------------------------------------------------------------------------
# intervals and points

@dataclass(frozen=True)
class Interval:
    """Closed rational interval ``[lo, hi]``; ``lo == hi`` for exact roots."""

    lo: Fraction
    hi: Fraction

    @classmethod
    def around(cls, mid, radius) -> "Interval":
        mid, radius = _frac(mid), _frac(radius)
        return cls(mid - radius, mid + radius)

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    @property
    def radius(self) -> Fraction:
        return (self.hi - self.lo) / 2

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def __float__(self):
        return float(self.mid)

    def contains(self, x) -> bool:
        x = _frac(x)
        return self.lo <= x <= self.hi

    def to_iv(self):
        return mpmath.iv.mpf([mpmath.mpf(self.lo.numerator) / self.lo.denominator,
                              mpmath.mpf(self.hi.numerator) / self.hi.denominator])


def mpf_to_fraction(x) -> Fraction:
    """Exact value of a finite mpmath float."""
    sign, man, exp, _ = x._mpf_
    v = Fraction(int(man)) * Fraction(2) ** int(exp)
    return -v if sign else v


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, mpmath.mpf):
        return mpf_to_fraction(x)
    return to_exact(x)


@dataclass(frozen=True)
class RealPoint:
    """A certified real point: one interval per variable name."""

    coordinates: tuple  # ((name, Interval), ...)

    @classmethod
    def of(cls, mapping: Mapping[str, Interval]) -> "RealPoint":
        return cls(tuple(mapping.items()))

    def __getitem__(self, name: str) -> Interval:
        for n, iv in self.coordinates:
            if n == name:
                return iv
        raise KeyError(name)

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.coordinates)

    def midpoint(self) -> dict:
        return {n: float(iv) for n, iv in self.coordinates}

    def exact_midpoint(self) -> dict:
        return {n: iv.mid for n, iv in self.coordinates}

    def evaluate_interval(self, poly: ExactPoly, dps: int = 60):
        saved = mpmath.iv.dps
        mpmath.iv.dps = dps
        try:
            return poly.evaluate({n: iv.to_iv() for n, iv in self.coordinates})
        finally:
            mpmath.iv.dps = saved

    def contains_zero(self, poly: ExactPoly, dps: int = 60) -> bool:
        v = self.evaluate_interval(poly, dps)
        return v.a <= 0 <= v.b


# ---------------------------------------------------------------------------
# univariate integer polynomials (ascending coefficient lists)

def _int_coeffs(p: ExactPoly) -> tuple:
    free = p.free_variables()
    if len(free) > 1:
        raise AlgebraError("expected a univariate polynomial")
    if p.is_zero():
        raise AlgebraError("degenerate polynomial")
    var = free[0] if free else (p.variables[0] if p.variables else "x")
    q = p.primitive()
    if not free:
        return var, [int(q.constant_value())]
    return var, [int(c.constant_value()) for c in q.coefficients(var)]


def _trim(a: list) -> list:
    while len(a) > 1 and a[-1] == 0:
        a.pop()
    return a


def _content(a: Iterable[int]) -> int:
    g = 0
    for c in a:
        g = gcd(g, c)
        if g == 1:
            return 1
    return g


def _prim(a: list) -> list:
    g = _content(a)
    if g == 0:
        return a
    a = [c // g for c in a]
    return [-c for c in a] if a[-1] < 0 else a


def _prem(a: list, b: list) -> list:
    """Pseudo-remainder of ``a`` by ``b`` (integer coefficients)."""
    a = a[:]
    db, lb = len(b) - 1, b[-1]
    while len(a) - 1 >= db and any(a):
        da = len(a) - 1
        lead = a[-1]
        shift = da - db
        a = [c * lb for c in a]
        for i, c in enumerate(b):
            a[i + shift] -= lead * c
        a.pop()
        _trim(a)
        if len(a) == 1 and a[0] == 0:
            break
    return a


def _gcd_poly(a: list, b: list) -> list:
    a, b = _prim(a), _prim(b)
    if len(a) < len(b):
        a, b = b, a
    while len(b) > 1 or b[0] != 0:
        if len(b) == 1:
            return [1]
        r = _trim(_prem(a, b))
        a, b = b, (_prim(r) if any(r) else [0])
    return _prim(a)


def _exact_div(a: list, b: list) -> list:
    a = a[:]
    db = len(b) - 1
    q = [0] * (len(a) - db)
    for k in range(len(q) - 1, -1, -1):
        c = a[k + db]
        if c % b[-1]:
            raise AlgebraError("inexact polynomial division")
        c //= b[-1]
        q[k] = c
        for i, bc in enumerate(b):
            a[k + i] -= c * bc
    return q


def squarefree_int(a: list) -> list:
    """Squarefree part of an integer polynomial (ascending coefficients)."""
    a = _prim(_trim(a[:]))
    if len(a) <= 2:
        return a
    da = [i * c for i, c in enumerate(a)][1:]
    g = _gcd_poly(a, da)
    if len(g) == 1:
        return a
    return _prim(_exact_div(a, g))


def _taylor_shift(a: list, c: int = 1) -> list:
    """Coefficients of p(x + c)."""
    a = a[:]
    n = len(a) - 1
    for i in range(n):
        for j in range(n - 1, i - 1, -1):
            a[j] += c * a[j + 1]
    return a


def _variations(a: Sequence[int]) -> int:
    v, prev = 0, 0
    for c in a:
        if c:
            if prev and (c > 0) != (prev > 0):
                v += 1
            prev = c
    return v


def _descartes01(a: list) -> int:
    # sign variations of (x+1)^n p(1/(x+1)): bounds roots in (0, 1)
    return _variations(_taylor_shift(a[::-1]))


def _sign_at(a: Sequence[int], x: Fraction) -> int:
    # sign of p(n/d) via Horner on the homogenised form sum a_k n^k d^(deg-k)
    n, d = x.numerator, x.denominator
    acc, dpow = a[-1], d
    for c in reversed(a[:-1]):
        acc = acc * n + c * dpow
        dpow *= d
    return (acc > 0) - (acc < 0)


def _root_bound(a: Sequence[int]) -> int:
    """Power of two strictly above every |root| (Cauchy bound)."""
    lead = abs(a[-1])
    m = max((abs(c) for c in a[:-1]), default=0)
    bound = 1 + (m + lead - 1) // lead
    b = 1
    while b <= bound:
        b *= 2
    return b


def _isolate_01(a: list) -> list:
    """Isolate the roots of ``a`` in (0, 1) as ((c, k) | exact Fraction)."""
    out = []
    stack = [(a, 0, 0)]
    while stack:
        p, c, k = stack.pop()
        if p[0] == 0:
            # root at the left end point of this sub-interval
            out.append(Fraction(c, 2 ** k))
            p = p[1:]
        v = _descartes01(p)
        if v == 0:
            continue
        if v == 1:
            out.append((c, k))
            continue
        n = len(p) - 1
        left = [coef * 2 ** (n - i) for i, coef in enumerate(p)]
        right = _taylor_shift(left)
        stack.append((right, 2 * c + 1, k + 1))
        stack.append((_prim(left), 2 * c, k + 1))
    return out


def _isolate_all(a: list) -> list:
    """Isolating intervals (Interval objects) for all real roots of squarefree ``a``."""
    if len(a) == 1:
        return []
    B = _root_bound(a)
    # q(y) = p(-B + 2B y), y in (0, 1)
    shifted = _taylor_shift(a, -B)
    q = _prim([c * (2 * B) ** i for i, c in enumerate(shifted)])
    out = []
    for item in _isolate_01(q):
        if isinstance(item, Fraction):
            x = -B + 2 * B * item
            out.append(Interval(x, x))
        else:
            c, k = item
            lo = -B + Fraction(2 * B * c, 2 ** k)
            hi = -B + Fraction(2 * B * (c + 1), 2 ** k)
            out.append(Interval(lo, hi))
    out.sort(key=lambda iv: iv.lo)
    return out


def _refine(a: list, iv: Interval, width: Fraction) -> Interval:
    if iv.lo == iv.hi:
        return iv
    lo, hi = iv.lo, iv.hi
    if _sign_at(a, lo) == 0 or _sign_at(a, hi) == 0:
        shrunk = _shrink(a, lo, hi)
        if shrunk.lo == shrunk.hi:
            return shrunk
        lo, hi = shrunk.lo, shrunk.hi
    slo = _sign_at(a, lo)
    while hi - lo > width:
        m = (lo + hi) / 2
        sm = _sign_at(a, m)
        if sm == 0:
            return Interval(m, m)
        if sm == slo:
            lo = m
        else:
            hi = m
    return Interval(lo, hi)


def _shrink(a: list, lo: Fraction, hi: Fraction) -> Interval:
    """Isolate the single interior root when an end point is itself a root."""
    for k in range(1, 64):
        n = 2 ** k
        xs = [lo + (hi - lo) * j / n for j in range(1, n)]
        signs = [_sign_at(a, x) for x in xs]
        for x, sx in zip(xs, signs):
            if sx == 0:
                return Interval(x, x)
        for j in range(len(xs) - 1):
            if signs[j] != signs[j + 1]:
                return Interval(xs[j], xs[j + 1])
    raise AlgebraError("could not separate root from interval end point")


def _split_at(a: list, iv: Interval, x: Fraction):
    """Shrink ``iv`` so that it lies on one side of ``x`` (``None`` if root is ``x``)."""
    if not (iv.lo < x < iv.hi):
        return iv
    sx = _sign_at(a, x)
    if sx == 0:
        return None
    if _sign_at(a, iv.lo) != sx:
        return Interval(iv.lo, x)
    return Interval(x, iv.hi)


def real_roots_univariate(p: ExactPoly, domain=(None, None), width: float = DEFAULT_WIDTH) -> list:
    """All real roots of ``p`` in the open interval ``domain``, sorted ascending.

    ``domain`` is a pair of bounds, ``None`` meaning infinite.  Each root is an
    :class:`Interval` of width at most ``width`` with a sign change (or an
    exact rational root with zero width).
    """
    if p.is_zero():
        raise AlgebraError("degenerate polynomial")
    _, coeffs = _int_coeffs(p)
    a = squarefree_int(coeffs)
    w = to_exact(width)
    lo = None if domain[0] is None or domain[0] == float("-inf") else to_exact(domain[0])
    hi = None if domain[1] is None or domain[1] == float("inf") else to_exact(domain[1])
    out = []
    for iv in _isolate_all(a):
        for bound in (lo, hi):
            if iv is not None and bound is not None:
                iv = _split_at(a, iv, bound)
        if iv is None:
            continue
        if lo is not None and iv.hi <= lo:
            continue
        if hi is not None and iv.lo >= hi:
            continue
        if iv.lo == iv.hi and ((lo is not None and iv.lo == lo) or (hi is not None and iv.lo == hi)):
            continue
        out.append(_refine(a, iv, w))
    return out


def count_real_roots(p: ExactPoly) -> int:
    _, coeffs = _int_coeffs(p)
    return len(_isolate_all(squarefree_int(coeffs)))


# ---------------------------------------------------------------------------
# zero-dimensional systems in two variables

@dataclass(frozen=True)
class Component:
    """A piece of a variety: generators plus its dimension (0 = finitely many points)."""

    generators: tuple
    dimension: int
    variables: tuple = field(default=())


def _key(p: ExactPoly) -> str:
    return p.drop_variables().primitive().to_text()


def decompose_zero_dimensional(generators: Sequence[ExactPoly], budget: Budget | None = None) -> list:
    """Split ``V(generators)`` into curve components and finite point sets.

    Each generator is factored into irreducibles over Q.  A factor shared by
    every generator is a curve (dimension 1).  Otherwise each choice of one
    factor per generator spans an ideal of coprime irreducibles; its dimension
    is read from a lex Groebner basis when that fits the budget, and is 0 by
    coprimality otherwise.  Embedded points on curves are kept.
    """
    gens = [g for g in generators if not g.is_zero()]
    variables = union_variables(gens) if gens else ()
    free = tuple(v for v in variables if any(g.degree(v) > 0 for g in gens))
    if len(free) > 2:
        raise AlgebraError("decomposition supports at most two variables")
    if not gens:
        raise AlgebraError("no generators")
    if any(g.is_constant() for g in gens):
        return []
    budget = budget or Budget(max_reductions=2000, max_basis=40, max_terms=4000, seconds=0.25)
    gens = [g.with_variables(free) for g in gens]
    factor_lists = []
    for g in gens:
        fs = {}
        for f in distinct_factors(g):
            fs.setdefault(_key(f), f.with_variables(free))
        factor_lists.append(fs)
    common = set(factor_lists[0])
    for fs in factor_lists[1:]:
        common &= set(fs)
    out = []
    for k in sorted(common):
        f = factor_lists[0][k]
        dim = len(f.free_variables()) if len(free) == 2 else 0
        dim = 1 if len(free) == 2 else 0
        out.append(Component((f,), dim, free))
    seen = set()
    for combo in itertools.product(*[sorted(fs) for fs in factor_lists]):
        keys = frozenset(combo)
        if len(keys) == 1 or keys in seen:
            continue
        seen.add(keys)
        polys = tuple(next(fs[k] for fs in factor_lists if k in fs) for k in sorted(keys))
        dim = 0
        try:
            gb = groebner_basis(polys, free, budget)
            dim = dimension(gb, free)
            if dim < 0:
                continue
        except BudgetExceeded:
            dim = 0
        out.append(Component(polys, dim, free))
    return out


def _scale_abs(p: ExactPoly, point: Mapping[str, object]):
    # sum |c| |monomial| at the point: a natural scale for residuals
    return ExactPoly({m: abs(c) for m, c in p.terms.items()}, p.variables).evaluate(
        {k: abs(v) for k, v in point.items()})


def _relative_residual(p: ExactPoly, point: Mapping[str, object]):
    s = _scale_abs(p, point)
    if s == 0:
        return mpmath.mpf(0)
    return abs(p.evaluate(point)) / s


def _numeric_roots(coeffs_desc: list, dps: int):
    with mpmath.workdps(dps):
        cs = list(coeffs_desc)
        big = max(abs(c) for c in cs)
        while cs and abs(cs[0]) <= big * mpmath.mpf(10) ** (-dps // 2):
            cs.pop(0)
        if len(cs) <= 1:
            return []
        if len(cs) == 2:
            return [-cs[1] / cs[0]]
        try:
            return list(mpmath.polyroots(cs, maxsteps=400, extraprec=4 * dps))
        except mpmath.libmp.NoConvergence:
            # clustered roots: eigenvalues of the companion matrix instead
            n = len(cs) - 1
            C = mpmath.matrix(n, n)
            for i in range(1, n):
                C[i, i - 1] = 1
            for i in range(n):
                C[i, n - 1] = -cs[n - i] / cs[0]
            return list(mpmath.eig(C, left=False, right=False))


def real_solve(component: Component | Sequence[ExactPoly], width: float = 1e-12,
               dps: int = 60, tol: float = 1e-15) -> list:
    """Real points of a zero-dimensional system in at most two variables."""
    if isinstance(component, Component):
        if component.dimension != 0:
            raise AlgebraError("component is not zero-dimensional")
        polys = list(component.generators)
    else:
        polys = list(component)
    polys = [p for p in polys if not p.is_zero()]
    if not polys:
        raise AlgebraError("no generators")
    if any(p.is_constant() for p in polys):
        return []
    names = union_variables(polys)
    free = tuple(v for v in names if any(p.degree(v) > 0 for p in polys))
    polys = [p.with_variables(free) for p in polys]
    if len(free) == 1:
        (x,) = free
        g = polys[0]
        for p in polys[1:]:
            g = _gcd_exact(g, p, x)
        return [RealPoint.of({x: iv}) for iv in real_roots_univariate(g, width=width)]
    if len(free) != 2:
        raise AlgebraError("real_solve supports at most two variables")
    # solve the cheapest pair, then keep the points where every generator vanishes
    ranked = sorted(itertools.combinations(polys, 2), key=lambda fg: fg[0].degree() * fg[1].degree())
    for f, g in ranked:
        try:
            base = _solve_pair(f, g, free, to_exact(width), dps, tol)
        except AlgebraError:
            continue
        break
    else:
        raise AlgebraError("system is not zero-dimensional")
    points = []
    for pt in base:
        mid = pt.exact_midpoint()
        with mpmath.workdps(dps):
            num = {k: mpmath.mpf(v.numerator) / v.denominator for k, v in mid.items()}
            if all(_relative_residual(p, num) <= tol for p in polys):
                points.append(pt)
    return points


@lru_cache(maxsize=512)
def _solve_pair(f: ExactPoly, g: ExactPoly, free: tuple, width: Fraction, dps: int, tol: float) -> tuple:
    polys = [f, g]
    x, y = free
    univ = _eliminate_pair(polys, x, y)
    if univ is None or univ.is_zero():
        x, y = y, x
        univ = _eliminate_pair(polys, x, y)
        if univ is None or univ.is_zero():
            raise AlgebraError("system is not zero-dimensional")
    if univ.is_constant():
        return ()
    points = []
    lifters = sorted((p for p in polys if p.degree(y) > 0), key=lambda p: p.degree(y))
    lift_width = Fraction(1, 2 ** (3 * dps))
    for xi in real_roots_univariate(univ, width=min(width, lift_width)):
        points.extend(_lift_root(polys, lifters, x, y, xi, dps, tol))
    points.sort(key=lambda pt: (pt[free[0]].mid, pt[free[1]].mid))
    return tuple(points)


def _gcd_exact(f: ExactPoly, g: ExactPoly, var: str) -> ExactPoly:
    _, a = _int_coeffs(f)
    _, b = _int_coeffs(g)
    c = _gcd_poly(a, b)
    return ExactPoly({(i,): ci for i, ci in enumerate(c) if ci}, (var,))


def _eliminate_pair(polys, x, y):
    """A nonzero univariate polynomial in ``x`` vanishing on the system's points."""
    univ_x = [p for p in polys if p.degree(y) == 0]
    if univ_x:
        g = univ_x[0]
        for p in univ_x[1:]:
            g = _gcd_exact(g.drop_variables(), p.drop_variables(), x).with_variables((x, y))
        return g if not g.is_constant() else ExactPoly.constant(1, (x, y))
    best = None
    with_y = [p for p in polys if p.degree(y) > 0]
    pairs = sorted(itertools.combinations(range(len(with_y)), 2),
                   key=lambda ij: with_y[ij[0]].degree() * with_y[ij[1]].degree())
    for i, j in pairs:
        r = resultant(with_y[i], with_y[j], y)
        if not r.is_zero():
            best = r
            break
    return best


def _lift_root(polys, lifters, x, y, xi: Interval, dps: int, tol: float) -> list:
    out = []
    with mpmath.workdps(dps):
        xm = mpmath.mpf(xi.mid.numerator) / xi.mid.denominator
        h = lifters[0]
        coeffs = [c.evaluate({x: xm, y: mpmath.mpf(0)}) for c in h.coefficients(y)]
        roots = _numeric_roots(coeffs[::-1], dps)
        cands = []
        for z in roots:
            if abs(mpmath.im(z)) > mpmath.mpf(10) ** (-dps // 4) * max(1, abs(z)):
                continue
            ym = mpmath.re(z)
            pt = {x: xm, y: ym}
            if all(_relative_residual(p, pt) <= tol for p in polys):
                cands.append(ym)
        cands.sort()
        unique = []
        for ym in cands:
            if not unique or abs(ym - unique[-1]) > mpmath.mpf(10) ** (-dps // 4) * max(1, abs(ym)):
                unique.append(ym)
        for ym in unique:
            out.append(_certify_box(polys, x, y, xi, ym, h, dps))
    return out


def _certify_box(polys, x, y, xi: Interval, ym, h: ExactPoly, dps: int) -> RealPoint:
    with mpmath.workdps(dps):
        xm = mpmath.mpf(xi.mid.numerator) / xi.mid.denominator
        hx = abs(h.diff(x).evaluate({x: xm, y: ym}))
        hy = abs(h.diff(y).evaluate({x: xm, y: ym}))
        rx = mpmath.mpf(xi.radius.numerator) / xi.radius.denominator
        ratio = hx / hy if hy else mpmath.mpf(1)
        rho = max(10 * ratio * rx, mpmath.mpf(10) ** (-(dps * 2) // 3))
    ymid = _frac(ym)
    point = None
    for _ in range(40):
        point = RealPoint.of({x: xi, y: Interval.around(ymid, _frac(rho))})
        if all(point.contains_zero(p, dps) for p in polys):
            return point
        rho *= 8
    return point
