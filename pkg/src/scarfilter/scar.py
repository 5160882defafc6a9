"""Stable and consistent AR-3 models from a decay rate alone.

Pipeline:

1. the consistent family ``a1 = (s-3/2) L``, ``a2 = -(2s-5/2) L``, ``a3 = s L``
   with ``L = lambda*dt`` and free complex ``s = alpha + i*beta``;
2. the boundary surface ``r(alpha, beta, dt) = 0`` on which the
   characteristic polynomial has a root on the unit circle;
3. singular points of that surface, projected to the ``(alpha, beta)`` plane;
4. the candidate whose first boundary crossing in ``dt`` comes latest.

The result is packaged in a :class:`SCARCertificate` and checked by an
independent root-modulus oracle.
"""

from __future__ import annotations

import itertools
import json
import logging
import os
import time
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import mpmath
import numpy as np
from scipy.optimize import least_squares

from . import __version__
from .algebra import (AlgebraError, Binding, Budget, BudgetExceeded, ComplexPolyPair, ExactPoly,
                      Interval, RealPoint, decompose_zero_dimensional, factor, groebner_elimination,
                      real_roots_univariate, real_solve, resultant, substitute)
from .algebra.realsolve import _relative_residual, mpf_to_fraction
from .armodel import ARModel

log = logging.getLogger(__name__)

VARS = ("alpha", "beta", "dt")
LAMBDA_MAX_DENOMINATOR = 10 ** 6
DEFAULT_BUDGET_SECS = 240.0
HESSIAN_RANK_TOL = 1e-9
TIE_TOL = 1e-9
GENERATOR_RESIDUAL_TOL = 1e-20


class SCARError(ValueError):
    """The construction cannot proceed for this input."""


class CertificateRefuted(RuntimeError):
    def __init__(self, message: str, dt: float):
        super().__init__(f"{message} (dt = {dt!r})")
        self.dt = dt


def _check_lambda(lam) -> complex:
    lam = complex(lam)
    if not lam.real < 0:
        raise SCARError("unstable continuous dynamics")
    return lam


def rationalize(lam: complex) -> tuple:
    lam = complex(lam)
    return (Fraction(repr(lam.real)).limit_denominator(LAMBDA_MAX_DENOMINATOR),
            Fraction(repr(lam.imag)).limit_denominator(LAMBDA_MAX_DENOMINATOR))


def budget_seconds() -> float:
    raw = os.environ.get("SCAR_BUDGET_SECS")
    if raw is None or raw == "":
        return DEFAULT_BUDGET_SECS
    return float(raw)


# ---------------------------------------------------------------------------
# consistent family

@dataclass(frozen=True)
class ConsistentFamily:
    lam: complex

    def coefficients(self, s: complex, dt: float) -> tuple:
        L = self.lam * dt
        return ((s - 1.5) * L, -(2 * s - 2.5) * L, s * L)

    def coefficient_polys(self) -> tuple:
        """``a1, a2, a3`` as exact complex polynomials in ``(alpha, beta, dt)``."""
        lr, li = rationalize(self.lam)
        a, b, t = (ExactPoly.var(v, VARS) for v in VARS)
        lam_dt = ComplexPolyPair(t * lr, t * li)
        s = ComplexPolyPair(a, b)
        return ((s - Fraction(3, 2)) * lam_dt, -((s * 2) - Fraction(5, 2)) * lam_dt, s * lam_dt)

    def model(self, s: complex, dt: float, sigma: float = 0.0) -> ARModel:
        return ARModel(self.coefficients(s, dt), 0j, sigma ** 2 * dt, dt, 0j, "SCAR")


def consistency_family(lam) -> ConsistentFamily:
    return ConsistentFamily(_check_lambda(lam))


def char_poly_roots(lam: complex, s: complex, dt: float) -> np.ndarray:
    a1, a2, a3 = ConsistentFamily(lam).coefficients(s, dt)
    # Pi(x) = -x^3 + (1 + a3) x^2 + a2 x + a1
    return np.roots([-1.0, 1.0 + a3, a2, a1])


def max_root_modulus(lam: complex, s: complex, dt: float) -> float:
    return float(np.max(np.abs(char_poly_roots(lam, s, dt))))


# ---------------------------------------------------------------------------
# boundary surface

def _dt_content(p: ExactPoly) -> ExactPoly:
    """Divide out the largest power of ``dt`` dividing ``p``."""
    i = p.variables.index("dt")
    k = min(m[i] for m in p.terms)
    if k == 0:
        return p
    return ExactPoly({m[:i] + (m[i] - k,) + m[i + 1:]: c for m, c in p.terms.items()}, p.variables)


def characteristic_pair(lam: complex) -> ComplexPolyPair:
    """``Pi(s, dt, x)`` with complex coefficients over variables ``(s, dt, x)``."""
    lr, li = rationalize(lam)
    names = ("s", "dt", "x")
    s, t, x = (ExactPoly.var(v, names) for v in names)
    lam_dt = ComplexPolyPair(t * lr, t * li)
    S = ComplexPolyPair.real(s)
    a1 = (S - Fraction(3, 2)) * lam_dt
    a2 = -(S * 2 - Fraction(5, 2)) * lam_dt
    a3 = S * lam_dt
    X = ComplexPolyPair.real(x)
    return a1 + a2 * X + a3 * X * X + X * X - X * X * X


def boundary_numerator(lam: complex) -> ComplexPolyPair:
    """``(Re g, Im g)`` after substituting ``s = alpha + i beta`` and the circle."""
    a, b, q = (ExactPoly.var(v, ("alpha", "beta", "q")) for v in ("alpha", "beta", "q"))
    one = ExactPoly.constant(1, ("alpha", "beta", "q"))
    bindings = {
        "s": Binding.of(a, b, one),
        "x": Binding.of(1 - q * q, q * 2, 1 + q * q),
    }
    num, _ = substitute(characteristic_pair(lam), bindings)
    order = ("alpha", "beta", "dt", "q")
    return ComplexPolyPair(num.re.with_variables(order), num.im.with_variables(order))


@lru_cache(maxsize=16)
def _boundary_surface(lr: Fraction, li: Fraction) -> ExactPoly:
    lam = complex(float(lr), float(li))
    g = boundary_numerator(lam)
    res = resultant(g.re, g.im, "q").with_variables(VARS)
    if res.is_zero():
        raise SCARError("boundary resultant vanished identically")
    _, pieces = factor(res)
    keep = ExactPoly.constant(1, VARS)
    for f, _ in pieces:
        f = f.with_variables(VARS)
        if f.degree("dt") <= 0 or len(f.terms) == 1:
            continue
        keep = keep * f
    if keep.is_constant():
        raise SCARError("boundary surface has no dt-dependent factor")
    return keep.primitive()


def boundary_surface(lam) -> ExactPoly:
    """Squarefree ``r(alpha, beta, dt)`` whose zero set holds the stability boundary."""
    lam = _check_lambda(lam)
    return _boundary_surface(*rationalize(lam))


# ---------------------------------------------------------------------------
# singular points

@dataclass(frozen=True)
class SingularCandidate:
    point: RealPoint
    lift_dt: float
    hessian_rank: int
    source: str


def _gradient(r: ExactPoly) -> list:
    return [r.diff(v) for v in VARS]


def _ideal_generators(r: ExactPoly, deadline: float | None) -> tuple:
    """Generators of the ``dt``-elimination ideal of ``r`` and its gradient."""
    grads = [_dt_content(g) for g in _gradient(r)]
    system = [r] + grads
    remaining = None if deadline is None else max(deadline - time.monotonic(), 0.0)
    try:
        quick = Budget(max_reductions=3000, max_basis=60, max_terms=20000,
                       seconds=None if remaining is None else min(remaining, 20.0))
        gens = groebner_elimination(system, {"dt"}, quick)
        gens = [g for g in gens if not g.is_zero()]
        if gens:
            return gens, "groebner"
    except BudgetExceeded:
        log.info("groebner elimination over budget; using pairwise resultants")
    ra, rb, rt = grads
    out = []
    for f, g in ((r, rt), (ra, rt), (rb, rt), (ra, rb)):
        if deadline is not None and time.monotonic() > deadline:
            raise BudgetExceeded("elimination budget exceeded")
        if f.degree("dt") <= 0 or g.degree("dt") <= 0:
            continue
        res = resultant(f, g, "dt", Budget(seconds=None if deadline is None
                                           else max(deadline - time.monotonic(), 0.0)))
        if not res.is_zero():
            out.append(res.with_variables(("alpha", "beta")).primitive())
    if not out:
        raise SCARError("no singular candidates")
    return out, "resultants"


def _hessian_rank(r: ExactPoly, pt: dict) -> int:
    with mpmath.workdps(50):
        big = max(abs(c) for c in r.terms.values())
        rr = r * (1 / big)
        H = mpmath.matrix(3, 3)
        for i, u in enumerate(VARS):
            for j, v in enumerate(VARS):
                H[i, j] = rr.diff(u).diff(v).evaluate(pt)
        sv = mpmath.svd_r(H, compute_uv=False)
        sv = sorted((abs(x) for x in sv), reverse=True)
        if sv[0] == 0:
            return 0
        return sum(1 for x in sv if x > sv[0] * HESSIAN_RANK_TOL)


def _lift(r: ExactPoly, point: RealPoint, grads: list) -> list:
    """Positive ``dt`` with ``r = grad r = 0`` above an ``(alpha, beta)`` point."""
    ab = point.exact_midpoint()
    with mpmath.workdps(60):
        a = mpmath.mpf(ab["alpha"].numerator) / ab["alpha"].denominator
        b = mpmath.mpf(ab["beta"].numerator) / ab["beta"].denominator
        coeffs = [c.evaluate({"alpha": a, "beta": b, "dt": mpmath.mpf(0)})
                  for c in r.coefficients("dt")]
        cs = coeffs[::-1]
        while cs and cs[0] == 0:
            cs.pop(0)
        if len(cs) < 2:
            return []
        roots = mpmath.polyroots(cs, maxsteps=500, extraprec=400)
        out = []
        for z in roots:
            if abs(mpmath.im(z)) > mpmath.mpf(10) ** -12 * max(1, abs(z)) or mpmath.re(z) <= 0:
                continue
            t = mpmath.re(z)
            pt = {"alpha": a, "beta": b, "dt": t}
            ok = True
            for g in grads:
                scale = ExactPoly({m: abs(c) for m, c in g.terms.items()}, g.variables).evaluate(
                    {"alpha": abs(a), "beta": abs(b), "dt": t})
                if scale and abs(g.evaluate(pt)) / scale > mpmath.mpf(10) ** -10:
                    ok = False
                    break
            if ok and not any(abs(t - u) < mpmath.mpf(10) ** -8 * t for u in out):
                out.append(t)
        return sorted(out)


def singular_candidates(r: ExactPoly, budget_secs: float | None = None,
                        lam_scale: float = 1.0) -> tuple:
    """Isolated real singular points of ``r = 0`` with a positive ``dt`` lift.

    Returns ``(candidates, path)`` where ``path`` is ``"exact"`` or
    ``"numeric"``.  Points where the Hessian has rank 2 lie on a double curve
    and are dropped; rank 3 (isolated) and rank <= 1 (pinch) points remain.
    """
    budget_secs = budget_seconds() if budget_secs is None else budget_secs
    deadline = time.monotonic() + budget_secs if budget_secs > 0 else None
    try:
        if budget_secs <= 0:
            raise BudgetExceeded("no time budget for the exact path")
        cands = _exact_candidates(r, deadline)
        path = "exact"
    except (BudgetExceeded, AlgebraError) as exc:
        log.info("exact singular-point path failed (%s); numeric fallback", exc)
        cands = numeric_singular_candidates(r, lam_scale)
        path = "numeric"
    if not cands:
        raise SCARError("no singular candidates")
    return cands, path


def _exact_candidates(r: ExactPoly, deadline) -> list:
    gens, how = _ideal_generators(r, deadline)
    grads = _gradient(r)
    comps = decompose_zero_dimensional(gens)
    points = []
    seen = []
    for comp in comps:
        if deadline is not None and time.monotonic() > deadline:
            raise BudgetExceeded("elimination budget exceeded")
        if comp.dimension != 0:
            continue
        for pt in real_solve(comp, width=1e-12):
            with mpmath.workdps(60):
                mid = {k: mpmath.mpf(v.numerator) / v.denominator for k, v in pt.exact_midpoint().items()}
                if any(_relative_residual(g, mid) > GENERATOR_RESIDUAL_TOL for g in gens):
                    continue
            key = (pt["alpha"].mid, pt["beta"].mid)
            if any(abs(key[0] - k0) < 1e-12 and abs(key[1] - k1) < 1e-12 for k0, k1 in seen):
                continue
            seen.append(key)
            points.append(pt)
    out = []
    for pt in points:
        for t in _lift(r, pt, grads):
            ab = pt.exact_midpoint()
            with mpmath.workdps(50):
                rank = _hessian_rank(r, {"alpha": mpmath.mpf(ab["alpha"].numerator) / ab["alpha"].denominator,
                                         "beta": mpmath.mpf(ab["beta"].numerator) / ab["beta"].denominator,
                                         "dt": t})
            if rank == 2:
                continue
            out.append(SingularCandidate(pt, float(t), rank, how))
            break
    out.sort(key=lambda c: (float(c.point["alpha"]), float(c.point["beta"])))
    return out


# -- numeric fallback -------------------------------------------------------

class _NumericSurface:
    """Float evaluation of a normalised ``r`` with exact-derived derivatives."""

    def __init__(self, r: ExactPoly):
        big = max(abs(c) for c in r.terms.values())
        self.r = r * (1 / big)
        self.grad = [self.r.diff(v) for v in VARS]
        self.hess = [[g.diff(v) for v in VARS] for g in self.grad]
        self._fast = {}

    def _compile(self, p: ExactPoly):
        key = id(p)
        if key not in self._fast:
            exps = np.array(list(p.terms), dtype=float).reshape(len(p.terms), 3)
            coef = np.array([float(c) for c in p.terms.values()])
            self._fast[key] = (exps, coef)
        return self._fast[key]

    def _terms(self, p: ExactPoly, x: np.ndarray):
        exps, coef = self._compile(p)
        mono = np.prod(np.atleast_2d(x)[:, None, :] ** exps[None, :, :], axis=2)
        return mono @ coef, np.abs(mono) @ np.abs(coef)

    def value(self, p: ExactPoly, x: np.ndarray, relative: bool = False) -> np.ndarray:
        val, scale = self._terms(p, x)
        if relative:
            val = val / np.where(scale > 0, scale, 1.0)
        return val

    def residuals(self, x, with_minors: bool) -> np.ndarray:
        """Scale-free residuals of ``r = grad r = 0`` and optionally the Hessian 2x2 minors.

        Every monomial is tiny at small ``dt``, so raw values would pull the
        solver there; each residual is divided by its monomial magnitude.  The
        Hessian uses one common scale so its minors keep their zero set.
        """
        xx = x[None, :]
        out = [self.value(self.r, xx, True)[0]] + [self.value(g, xx, True)[0] for g in self.grad]
        if with_minors:
            pairs = [[self._terms(h, xx) for h in row] for row in self.hess]
            scale = max(sc[0] for row in pairs for _, sc in row) or 1.0
            H = np.array([[v[0] for v, _ in row] for row in pairs]) / scale
            for i1, i2 in itertools.combinations(range(3), 2):
                for j1, j2 in itertools.combinations(range(3), 2):
                    out.append(H[i1, j1] * H[i2, j2] - H[i1, j2] * H[i2, j1])
        return np.array(out)


def _lm_solutions(surf: _NumericSurface, seeds, with_minors: bool) -> list:
    found = []
    for x0 in seeds:
        sol = least_squares(surf.residuals, x0, args=(with_minors,), method="lm",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400)
        x = sol.x
        if not np.all(np.isfinite(x)) or x[2] <= 0:
            continue
        if np.max(np.abs(surf.residuals(x, with_minors))) > 1e-9:
            continue
        if any(np.max(np.abs(x - y)) < 1e-5 for y in found):
            continue
        found.append(x)
    return found


def numeric_singular_candidates(r: ExactPoly, lam_scale: float = 1.0, grid: int = 9,
                                box: float = 4.0) -> list:
    """Grid-seeded damped least squares for the singular set of ``r = 0``.

    A first pass from an ``(alpha, beta, dt)`` grid lands on the singular
    set, mostly on the double curve.  Pinch points lie on that curve, so a
    second pass restarts from every curve point with the rank-one Hessian
    minors added.  Survivors are refined at high precision and classified by
    Hessian rank as in the exact path.  Points outside twice the seed box are
    discarded.
    """
    surf = _NumericSurface(r)
    ab = np.linspace(-box, box, grid)
    ts = np.geomspace(0.02, 3.0, 6) / lam_scale
    seeds = np.array([(a, b, t) for a in ab for b in ab for t in ts])
    curve = _lm_solutions(surf, seeds, False)
    found = curve + _lm_solutions(surf, curve, True)
    out = []
    for x in found:
        if max(abs(x[0]), abs(x[1])) > 2 * box:
            continue
        xr = _refine_singular(surf, x)
        if xr is None:
            continue
        rank = _hessian_rank(r, dict(zip(VARS, xr)))
        if rank == 2:
            continue
        a, b = xr[0], xr[1]
        if any(abs(float(c.point["alpha"]) - float(a)) < 1e-8 and
               abs(float(c.point["beta"]) - float(b)) < 1e-8 for c in out):
            continue
        rad = Fraction(1, 10 ** 12)
        point = RealPoint.of({"alpha": Interval.around(_to_frac(a), rad),
                              "beta": Interval.around(_to_frac(b), rad)})
        out.append(SingularCandidate(point, float(xr[2]), rank, "numeric"))
    out.sort(key=lambda c: (float(c.point["alpha"]), float(c.point["beta"])))
    return out


def _to_frac(x) -> Fraction:
    if isinstance(x, mpmath.mpf):
        return mpf_to_fraction(x)
    return Fraction(x)


def _refine_singular(surf: _NumericSurface, x0) -> list | None:
    """Gauss-Newton in mpmath on ``grad r = 0`` (pseudo-inverse of the Hessian)."""
    with mpmath.workdps(50):
        x = mpmath.matrix([mpmath.mpf(float(v)) for v in x0])
        for _ in range(60):
            pt = dict(zip(VARS, x))
            g = mpmath.matrix([gi.evaluate(pt) for gi in surf.grad])
            H = mpmath.matrix([[h.evaluate(pt) for h in row] for row in surf.hess])
            U, S, V = mpmath.svd_r(H)
            step = mpmath.matrix(3, 1)
            for k in range(3):
                if S[k] > S[0] * mpmath.mpf(10) ** -20:
                    coef = (U[:, k].T * g)[0] / S[k]
                    step += coef * V[k, :].T
            x = x - step
            if mpmath.norm(step) < mpmath.mpf(10) ** -40:
                break
        pt = dict(zip(VARS, x))
        if abs(surf.r.evaluate(pt)) > mpmath.mpf(10) ** -20:
            return None
        if any(abs(gi.evaluate(pt)) > mpmath.mpf(10) ** -20 for gi in surf.grad):
            return None
        return [x[0], x[1], x[2]]


def singular_points(r: ExactPoly, budget_secs: float | None = None, lam_scale: float = 1.0) -> list:
    """The set ``W`` as certified ``(alpha, beta)`` points."""
    cands, _ = singular_candidates(r, budget_secs, lam_scale)
    return [c.point for c in cands]


# ---------------------------------------------------------------------------
# selection

def smallest_positive_dt(r: ExactPoly, point: RealPoint, width: float = 1e-12):
    """Smallest positive real root of ``r(alpha, beta, .)`` at the point's midpoint."""
    ab = point.exact_midpoint()
    rt = r.partial({"alpha": ab["alpha"], "beta": ab["beta"]}).drop_variables()
    if rt.is_zero() or rt.is_constant():
        return None
    roots = real_roots_univariate(rt, (0, None), width=width)
    return roots[0] if roots else None


def select_parameters(r: ExactPoly, W) -> tuple:
    """Maximin choice: the candidate whose first boundary crossing is latest.

    Returns ``(s_hat, dt_hat, table)`` where ``table`` lists
    ``(point, dt_bar or None)`` for every candidate.
    """
    W = list(W)
    if not W:
        raise SCARError("no singular candidates")
    table = []
    for pt in W:
        root = smallest_positive_dt(r, pt)
        table.append((pt, None if root is None else root))
    admissible = [(pt, root) for pt, root in table if root is not None]
    if not admissible:
        raise SCARError("no admissible candidate")

    def key(item):
        pt, root = item
        a, b = float(pt["alpha"]), float(pt["beta"])
        return (-float(root.mid), abs(complex(a, b)), b, a)

    best_val = max(float(root.mid) for _, root in admissible)
    tied = [it for it in admissible if best_val - float(it[1].mid) <= TIE_TOL]
    pt, root = min(tied, key=lambda it: key(it)[1:])
    s_hat = complex(float(pt["alpha"]), float(pt["beta"]))
    return s_hat, root, table


# ---------------------------------------------------------------------------
# certificate

@dataclass(frozen=True)
class StabilityReport:
    sampled_dts: tuple
    max_root_moduli: tuple
    boundary_modulus_at_dt_hat: float

    def to_dict(self) -> dict:
        return {"sampled_dts": list(self.sampled_dts), "max_root_moduli": list(self.max_root_moduli),
                "boundary_modulus_at_dt_hat": self.boundary_modulus_at_dt_hat}

    @classmethod
    def from_dict(cls, d) -> "StabilityReport":
        return cls(tuple(d["sampled_dts"]), tuple(d["max_root_moduli"]), d["boundary_modulus_at_dt_hat"])


def _interval_to_json(iv: Interval) -> list:
    return [f"{iv.lo.numerator}/{iv.lo.denominator}", f"{iv.hi.numerator}/{iv.hi.denominator}"]


def _interval_from_json(x) -> Interval:
    return Interval(Fraction(x[0]), Fraction(x[1]))


@dataclass(frozen=True)
class SCARCertificate:
    lam: complex
    s_hat: complex
    dt_hat: float
    r_surface: ExactPoly
    candidates: tuple  # ((RealPoint, dt_bar | None, lift_dt, hessian_rank), ...)
    oracle_report: StabilityReport | None = None
    path: str = "exact"
    budget_secs: float = DEFAULT_BUDGET_SECS
    tool_version: str = __version__

    def family(self) -> ConsistentFamily:
        return ConsistentFamily(self.lam)

    def coefficients(self, dt: float) -> tuple:
        return self.family().coefficients(self.s_hat, dt)

    def per_dt_coefficients(self) -> tuple:
        """``a_j / dt``, which do not depend on ``dt``."""
        return self.coefficients(1.0)

    def to_dict(self) -> dict:
        cands = []
        for pt, dt_bar, lift, rank in self.candidates:
            cands.append({
                "alpha": _interval_to_json(pt["alpha"]),
                "beta": _interval_to_json(pt["beta"]),
                "dt_bar": None if dt_bar is None else _interval_to_json(dt_bar),
                "lift_dt": lift,
                "hessian_rank": rank,
            })
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "s_hat": [self.s_hat.real, self.s_hat.imag],
            "dt_hat": self.dt_hat,
            "r_surface": {"variables": list(self.r_surface.variables), "text": self.r_surface.to_text()},
            "candidates": cands,
            "oracle_report": None if self.oracle_report is None else self.oracle_report.to_dict(),
            "tool_version": self.tool_version,
            "budgets": {"seconds": self.budget_secs, "path": self.path},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SCARCertificate":
        r = ExactPoly.from_text(d["r_surface"]["text"], d["r_surface"]["variables"])
        cands = []
        for c in d["candidates"]:
            pt = RealPoint.of({"alpha": _interval_from_json(c["alpha"]),
                               "beta": _interval_from_json(c["beta"])})
            dt_bar = None if c["dt_bar"] is None else _interval_from_json(c["dt_bar"])
            cands.append((pt, dt_bar, c["lift_dt"], c["hessian_rank"]))
        rep = d.get("oracle_report")
        return cls(complex(*d["lambda"]), complex(*d["s_hat"]), d["dt_hat"], r, tuple(cands),
                   None if rep is None else StabilityReport.from_dict(rep),
                   d["budgets"]["path"], d["budgets"]["seconds"], d["tool_version"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SCARCertificate":
        return cls.from_dict(json.loads(text))

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "SCARCertificate":
        return cls.from_json(Path(path).read_text())


def verify_stability_margin(cert: SCARCertificate, n_samples: int = 99,
                            boundary_tol: float = 1e-6) -> StabilityReport:
    """Root-modulus oracle on ``dt_hat * k / (n+1)``, ``k = 1..n``, and at ``dt_hat``."""
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    dts = [cert.dt_hat * k / (n_samples + 1) for k in range(1, n_samples + 1)]
    mods = []
    for dt in dts:
        m = max_root_modulus(cert.lam, cert.s_hat, dt)
        mods.append(m)
        if not m < 1.0:
            raise CertificateRefuted("certificate refuted: unstable interior step", dt)
    edge = max_root_modulus(cert.lam, cert.s_hat, cert.dt_hat)
    if abs(edge - 1.0) > boundary_tol:
        raise CertificateRefuted(
            f"certificate refuted: max modulus {edge:.9f} at dt_hat is not on the unit circle",
            cert.dt_hat)
    return StabilityReport(tuple(dts), tuple(mods), edge)


@lru_cache(maxsize=16)
def _certificate(lr: Fraction, li: Fraction, lam: complex, budget_secs: float) -> SCARCertificate:
    r = _boundary_surface(lr, li)
    cands, path = singular_candidates(r, budget_secs, abs(lam))
    W = [c.point for c in cands]
    s_hat, root, table = select_parameters(r, W)
    rows = tuple((pt, dt_bar, c.lift_dt, c.hessian_rank) for (pt, dt_bar), c in zip(table, cands))
    cert = SCARCertificate(lam, s_hat, float(root.mid), r, rows, None, path, budget_secs)
    report = verify_stability_margin(cert, 99)
    return replace(cert, oracle_report=report)


def scar_certificate(lam, budget_secs: float | None = None) -> SCARCertificate:
    """Run the full construction for ``lam`` (cached per rationalised value)."""
    lam = _check_lambda(lam)
    budget_secs = budget_seconds() if budget_secs is None else float(budget_secs)
    return _certificate(*rationalize(lam), lam, budget_secs)


def construct_scar3(lam, sigma: float, dt: float | None = None,
                    certificate: SCARCertificate | None = None,
                    budget_secs: float | None = None) -> tuple:
    """SCAR-3 model at step ``dt`` (default ``dt_hat / 2``) and its certificate."""
    lam = _check_lambda(lam)
    cert = certificate if certificate is not None else scar_certificate(lam, budget_secs)
    if dt is None:
        dt = cert.dt_hat / 2
    if not 0 < dt < cert.dt_hat:
        raise SCARError(f"requested step outside stable-consistent interval (0, {cert.dt_hat:.6g})")
    model = ConsistentFamily(lam).model(cert.s_hat, dt, sigma)
    return model, cert
