import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scarfilter.algebra.poly import ExactPoly
from scarfilter.armodel import consistency_residuals, is_consistent, is_stable
from scarfilter.scar import (VARS, CertificateRefuted, SCARCertificate, SCARError, _hessian_rank,
                             boundary_surface, char_poly_roots, consistency_family, construct_scar3,
                             max_root_modulus, numeric_singular_candidates, select_parameters,
                             singular_candidates, verify_stability_margin)

from conftest import LAM_MODE1, LAM_MODE8, LAM_RMM

a, b, t = (ExactPoly.var(v, VARS) for v in VARS)
CONE = (a - 1) ** 2 + (b + Fraction(1, 2)) ** 2 - (t - Fraction(3, 10)) ** 2
CONE_2 = (a + 1) ** 2 + (b - 1) ** 2 - (t - Fraction(1, 2)) ** 2

lams = st.complex_numbers(min_magnitude=0.1, max_magnitude=20, allow_nan=False,
                          allow_infinity=False).filter(lambda z: z.real < -0.05)
s_values = st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)
steps = st.floats(min_value=1e-3, max_value=2.0)


# -- consistent family ---------------------------------------------------------

@settings(max_examples=200)
@given(lams, s_values, steps)
def test_family_satisfies_both_consistency_sums(lam, s, dt):
    coeffs = consistency_family(lam).coefficients(s, dt)
    res = consistency_residuals(coeffs, lam, dt)
    assert max(res) <= 1e-9 * max(1.0, abs(lam * dt) * (1 + abs(s)))


@settings(max_examples=100)
@given(lams, s_values, steps)
def test_char_poly_roots_match_companion_eigenvalues(lam, s, dt):
    model = consistency_family(lam).model(s, dt)
    eig = list(np.linalg.eigvals(model.companion()))
    roots = char_poly_roots(lam, s, dt)
    tol = 1e-6 * max(1.0, np.max(np.abs(roots)))
    for z in roots:
        k = int(np.argmin([abs(z - e) for e in eig]))
        assert abs(z - eig.pop(k)) < tol


def test_unstable_lambda_rejected():
    with pytest.raises(SCARError):
        consistency_family(0.5 + 1j)
    with pytest.raises(SCARError):
        boundary_surface(0.0 - 1j)


# -- boundary surface ----------------------------------------------------------

def _boundary_dt(lam, s, hi=5.0):
    """Bisection oracle: first dt where the max root modulus reaches one."""
    lo = 1e-9
    if max_root_modulus(lam, s, hi) < 1:
        return None
    grid = np.linspace(lo, hi, 400)
    mods = [max_root_modulus(lam, s, x) for x in grid]
    k = next(i for i, m in enumerate(mods) if m >= 1)
    lo, hi = grid[k - 1], grid[k]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if max_root_modulus(lam, s, mid) < 1 else (lo, mid)
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("s", [1.3 - 0.2j, 0.7 + 0.4j, 2.0 + 0.0j, -0.5 + 1.0j])
def test_surface_vanishes_where_a_root_touches_the_circle(s):
    lam = LAM_MODE1
    r = boundary_surface(lam)
    dt = _boundary_dt(lam, s)
    assert dt is not None
    at = {"alpha": s.real, "beta": s.imag, "dt": dt}
    scale = ExactPoly({m: abs(c) for m, c in r.terms.items()}, r.variables).evaluate(
        {"alpha": abs(s.real), "beta": abs(s.imag), "dt": dt})
    assert abs(r.evaluate(at)) / scale < 1e-9
    off = {"alpha": s.real, "beta": s.imag, "dt": 0.5 * dt}
    assert abs(r.evaluate(off)) / scale > 1e-6


def test_surface_is_squarefree_and_depends_on_dt():
    r = boundary_surface(LAM_MODE1)
    assert r.degree("dt") >= 1
    assert r == r.primitive()


# -- singular points -----------------------------------------------------------

@pytest.mark.parametrize("budget", [60.0, 0.0], ids=["exact", "numeric"])
def test_planted_cone_apex_is_found(budget):
    cands, path = singular_candidates(CONE, budget)
    assert path == ("exact" if budget else "numeric")
    (c,) = cands
    mid = c.point.midpoint()
    assert mid["alpha"] == pytest.approx(1.0, abs=1e-9)
    assert mid["beta"] == pytest.approx(-0.5, abs=1e-9)
    assert c.lift_dt == pytest.approx(0.3, abs=1e-9)
    assert c.hessian_rank == 3


@pytest.mark.parametrize("budget", [60.0, 0.0], ids=["exact", "numeric"])
def test_maximin_prefers_the_later_crossing(budget):
    r = CONE * CONE_2
    cands, _ = singular_candidates(r, budget)
    # the two cones also meet along a double curve, which must not show up
    assert len(cands) == 2
    s_hat, dt_hat, table = select_parameters(r, [c.point for c in cands])
    assert s_hat == pytest.approx(-1 + 1j, abs=1e-9)
    assert float(dt_hat.mid) == pytest.approx(0.5, abs=1e-9)
    assert len(table) == 2


def test_hessian_rank_separates_pinch_from_double_curve():
    umbrella = (a - 1) ** 2 - (b + Fraction(1, 2)) ** 2 * (t - Fraction(3, 10))
    assert _hessian_rank(umbrella, {"alpha": 1, "beta": -0.5, "dt": 0.3}) == 1
    assert _hessian_rank(umbrella, {"alpha": 1, "beta": -0.5, "dt": 0.8}) == 2
    assert _hessian_rank(CONE, {"alpha": 1, "beta": -0.5, "dt": 0.3}) == 3


def test_no_candidates_is_an_error():
    with pytest.raises(SCARError):
        select_parameters(CONE, [])


@pytest.mark.slow
def test_numeric_route_agrees_with_exact_route(cert_mode1):
    r = cert_mode1.r_surface
    numeric = numeric_singular_candidates(r, abs(LAM_MODE1))
    s_num, dt_num, _ = select_parameters(r, [c.point for c in numeric])
    assert s_num == pytest.approx(cert_mode1.s_hat, abs=1e-7)
    assert float(dt_num.mid) == pytest.approx(cert_mode1.dt_hat, rel=1e-9)


# -- certificates --------------------------------------------------------------

@pytest.mark.slow
def test_certificate_roundtrip(cert_mode1, tmp_path):
    path = tmp_path / "cert.json"
    cert_mode1.save(path)
    back = SCARCertificate.load(path)
    assert back.s_hat == cert_mode1.s_hat
    assert back.dt_hat == cert_mode1.dt_hat
    assert back.r_surface == cert_mode1.r_surface
    assert len(back.candidates) == len(cert_mode1.candidates)
    assert back.to_dict() == cert_mode1.to_dict()


@pytest.mark.slow
def test_oracle_report_is_attached(cert_mode8):
    rep = cert_mode8.oracle_report
    assert len(rep.sampled_dts) == 99
    assert max(rep.max_root_moduli) < 1.0
    assert abs(rep.boundary_modulus_at_dt_hat - 1.0) < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("shift", [0.05, -0.05j, 0.2 + 0.1j])
def test_corrupted_s_hat_is_refuted(cert_mode8, shift):
    bad = replace(cert_mode8, s_hat=cert_mode8.s_hat + shift)
    with pytest.raises(CertificateRefuted):
        verify_stability_margin(bad)


@pytest.mark.slow
def test_stretched_dt_hat_is_refuted(cert_mode8):
    with pytest.raises(CertificateRefuted):
        verify_stability_margin(replace(cert_mode8, dt_hat=cert_mode8.dt_hat * 1.05))


@pytest.mark.slow
def test_constructed_model_is_stable_and_consistent(cert_mode8):
    for frac in (0.1, 0.5, 0.9):
        dt = frac * cert_mode8.dt_hat
        model, _ = construct_scar3(LAM_MODE8, 1.3, dt, certificate=cert_mode8)
        assert is_stable(model)[0]
        assert is_consistent(model, LAM_MODE8)[0]
        assert model.noise_variance == pytest.approx(1.3 ** 2 * dt)
        assert model.provenance == "SCAR"


@pytest.mark.slow
def test_step_outside_interval_rejected(cert_mode8):
    for dt in (0.0, cert_mode8.dt_hat, 2 * cert_mode8.dt_hat, -0.01):
        with pytest.raises(SCARError):
            construct_scar3(LAM_MODE8, 1.0, dt, certificate=cert_mode8)


@pytest.mark.slow
def test_forecast_table_row():
    # reference RMM coefficient row, lambda fitted to the index, dt = 12/365
    lam = LAM_RMM
    model, _ = construct_scar3(lam, math.sqrt(2 * abs(lam.real)), 12 / 365)
    reference = (-0.0381 + 0.0083j, 0.0836 - 0.0777j, -0.0601 + 0.1916j)
    for got, want in zip(model.coeffs, reference):
        assert abs(got.real - want.real) <= 6e-5 and abs(got.imag - want.imag) <= 6e-5
    assert model.noise_variance == pytest.approx(0.0292, abs=2e-4)
