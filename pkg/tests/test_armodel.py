import json

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from scarfilter.armodel import (ARModel, ConstrainedYuleWalkerAR, ModelError, TimeSeries,
                                YuleWalkerAR, aic_select, characteristic_roots,
                                constrained_yule_walker_fit, consistency_residuals, is_consistent,
                                is_stable, msm_parameters, simulate, yule_walker_fit)
from scarfilter.scar import consistency_family


def zero_mean_trajectory(model: ARModel, M: int) -> TimeSeries:
    """Noise-free path whose temporal mean over ``M`` samples is exactly zero.

    The mean is linear in the initial lag vector, so any initial state in the
    kernel of that functional gives a trajectory the centred regression fits
    exactly.
    """
    F = model.companion()
    p = model.p
    rows = np.empty((M, p), dtype=complex)
    P = np.eye(p, dtype=complex)
    for m in range(M):
        rows[m] = P[-1]
        P = F @ P
    mean_row = rows.mean(axis=0)
    null = scipy.linalg.null_space(mean_row[None, :])
    u0 = null @ np.array([1.0, 0.5 - 0.3j][: null.shape[1]])
    return TimeSeries(rows @ u0, model.dt)


def test_zero_noise_refit_is_exact():
    lam, s, dt = -0.3 + 2.0j, 1.2 - 0.1j, 0.05
    model = consistency_family(lam).model(s, dt)
    assert is_stable(model)[0]
    series = zero_mean_trajectory(model, 400)
    assert abs(series.values.mean()) < 1e-12
    fit, diag = yule_walker_fit(series, 3)
    assert np.max(np.abs(np.array(fit.coeffs) - np.array(model.coeffs))) < 1e-8
    assert diag.residual_variance <= 1e-12
    assert fit.provenance == "YW"
    assert fit.forcing == 0


def test_constant_series_is_degenerate():
    with pytest.raises(ModelError, match="degenerate"):
        yule_walker_fit(TimeSeries(np.full(100, 2.0 + 1j), 0.1), 2)


def test_non_finite_series_rejected():
    with pytest.raises(ModelError, match="non-finite"):
        yule_walker_fit(TimeSeries(np.array([1.0, np.inf, 2.0, 0.5, 0.1, 0.3, 0.2]), 0.1), 2)


def test_short_series_rejected():
    with pytest.raises(ModelError):
        yule_walker_fit(TimeSeries(np.arange(6.0), 0.1), 3)


@pytest.mark.slow
def test_noisy_ar1_within_three_bootstrap_errors():
    true = ARModel((-0.3 + 0.1j,), 0j, 0.01, 1.0)
    M = 10 ** 5
    series = simulate(true, M, seed=7)
    fit, _ = yule_walker_fit(series, 1)
    # parametric bootstrap around the fitted model
    boots = np.array([yule_walker_fit(simulate(fit, M, seed=100 + k), 1)[0].coeffs[0]
                      for k in range(40)])
    se = np.sqrt(np.var(boots.real, ddof=1) + np.var(boots.imag, ddof=1))
    # asymptotic theory: var(b_hat) = (1 - |b|^2) / M for b = 1 + a
    b = 1 + true.coeffs[0]
    assert se == pytest.approx(np.sqrt((1 - abs(b) ** 2) / M), rel=0.3)
    assert abs(fit.coeffs[0] - true.coeffs[0]) < 3 * se
    assert fit.noise_variance == pytest.approx(0.01, rel=0.03)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-2.0, -0.2), st.floats(-4.0, 4.0), st.integers(3, 6))
def test_constrained_residual_not_below_unconstrained(seed, lr, li, p):
    lam = complex(lr, li)
    true = ARModel((0.1, -0.4 + 0.2j), 0j, 0.05, 0.1)
    series = simulate(true, 2000, seed=seed)
    free, dfree = yule_walker_fit(series, p)
    con, dcon = constrained_yule_walker_fit(series, p, lam)
    assert dcon.residual_variance >= dfree.residual_variance - 1e-12
    assert is_consistent(con, lam)[0]
    assert dcon.constrained and not dfree.constrained


def test_constrained_ar3_lies_in_the_consistent_family():
    lam, dt = -1.246 - 1.214j, 0.2
    series = simulate(ARModel((0.05, -0.1, -0.3 + 0.1j), 0j, 0.1, dt), 3000, seed=3)
    con, _ = constrained_yule_walker_fit(series, 3, lam)
    a1, a2, a3 = con.coeffs
    s = a3 / (lam * dt)
    fam = consistency_family(lam).coefficients(s, dt)
    assert abs(fam[0] - a1) < 1e-9 and abs(fam[1] - a2) < 1e-9


def test_constrained_refit_of_consistent_data():
    lam, s, dt = -1.246 - 1.214j, 1.3195 - 0.1918j, 0.4
    true = consistency_family(lam).model(s, dt, sigma=1.0)
    series = simulate(true, 50000, seed=11)
    con, _ = constrained_yule_walker_fit(series, 3, lam)
    assert max(consistency_residuals(con.coeffs, lam, dt)) < 1e-9
    assert np.max(np.abs(np.array(con.coeffs) - np.array(true.coeffs))) < 0.05


def test_constrained_needs_order_three():
    with pytest.raises(ModelError):
        constrained_yule_walker_fit(TimeSeries(np.random.default_rng(0).standard_normal(100), 1.0), 2, -1.0)


# -- order selection ---------------------------------------------------------

def test_aic_picks_low_order_for_ar2():
    true = ARModel((0.4, -0.9 + 0.2j), 0j, 0.1, 1.0)
    assert is_stable(true)[0]
    p, table = aic_select(simulate(true, 10 ** 5, seed=5), 6)
    assert p in (2, 3)
    assert set(table) == set(range(1, 7))


def test_aic_white_noise_prefers_small_order(rng):
    noise = rng.standard_normal(20000) + 1j * rng.standard_normal(20000)
    p, table = aic_select(TimeSeries(noise, 1.0), 8)
    assert p <= 2


def test_aic_formula():
    series = simulate(ARModel((-0.5,), 0j, 1.0, 1.0), 500, seed=1)
    _, table = aic_select(series, 3)
    for p, val in table.items():
        q = yule_walker_fit(series, p)[1].residual_variance
        assert val == pytest.approx(q * (500 + p) / (500 - p))


def test_aic_rejects_large_pmax():
    with pytest.raises(ModelError, match="p_max"):
        aic_select(TimeSeries(np.arange(20.0), 1.0), 5)


# -- mean stochastic model ---------------------------------------------------

@settings(max_examples=100)
@given(st.floats(-10, -0.01), st.floats(-10, 10), st.floats(0.01, 100))
def test_msm_inverts_exponential_acf(lr, li, energy):
    lam = complex(lr, li)
    got, sigma = msm_parameters(energy, -1 / lam)
    assert got == pytest.approx(lam, rel=1e-12)
    assert sigma == pytest.approx(np.sqrt(2 * abs(lr) * energy))


def test_msm_rejects_growth():
    with pytest.raises(ModelError):
        msm_parameters(1.0, -1.0 + 0.5j)
    with pytest.raises(ModelError):
        msm_parameters(0.0, 1.0)


# -- simulation and bookkeeping ----------------------------------------------

def test_simulated_variance_matches_lyapunov():
    model = ARModel((0.1 - 0.05j, -0.3 + 0.2j, -0.2), 0j, 0.2, 1.0)
    assert is_stable(model)[0]
    F = model.companion()
    Q = np.zeros((3, 3), dtype=complex)
    Q[-1, -1] = model.noise_variance
    stationary = scipy.linalg.solve_discrete_lyapunov(F, Q)[-1, -1].real
    u = simulate(model, 200000, seed=2).values
    assert np.mean(np.abs(u) ** 2) == pytest.approx(stationary, rel=0.05)


def test_simulate_adds_mean_offset():
    model = ARModel((-0.5,), 0j, 0.01, 1.0, mean_offset=3 - 2j)
    u = simulate(model, 20000, seed=0).values
    assert u.mean() == pytest.approx(3 - 2j, abs=0.02)


def test_unstable_model_warns():
    with pytest.warns(RuntimeWarning):
        simulate(ARModel((0.5,), 0j, 0.1, 1.0), 10, seed=0)


@settings(max_examples=50)
@given(st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
                min_size=2, max_size=6))
def test_characteristic_roots_are_companion_eigenvalues(coeffs):
    model = ARModel(tuple(coeffs))
    eig = list(np.linalg.eigvals(model.companion()))
    for z in characteristic_roots(model):
        k = int(np.argmin([abs(z - e) for e in eig]))
        assert abs(z - eig.pop(k)) < 1e-6 * max(1.0, abs(z))


def test_model_json_roundtrip(tmp_path):
    m = ARModel((0.1 + 0.2j, -0.3j), 0.5 - 1j, 0.04, 0.25, 1 + 1j, "CYW")
    path = tmp_path / "m.json"
    m.save(path)
    assert ARModel.load(path) == m
    d = json.loads(path.read_text())
    assert d["provenance"] == "CYW" and d["p"] == 2


def test_model_validation():
    with pytest.raises(ModelError):
        ARModel(())
    with pytest.raises(ModelError):
        ARModel((0.1,), noise_variance=-1)
    with pytest.raises(ModelError):
        ARModel((0.1,), dt=0)
    with pytest.raises(ModelError):
        ARModel((0.1,), provenance="XYZ")
    with pytest.raises(ModelError):
        ARModel.from_dict({"p": 2, "coeffs": [[0, 0]], "dt": 1})


# -- estimator API -------------------------------------------------------------

def test_estimator_protocol():
    est = YuleWalkerAR(p=2, dt=0.5)
    assert est.get_params() == {"p": 2, "dt": 0.5}
    twin = clone(est).set_params(p=3)
    assert twin.p == 3 and est.p == 2
    series = simulate(ARModel((0.2, -0.6 + 0.1j), 0j, 0.05, 0.5, 1j), 5000, seed=4)
    est.fit(series)
    assert est.model_.p == 2
    u = series.values
    pred = est.predict(u[:-1])
    m = est.model_
    manual = (u[1:-1] - m.mean_offset) * (1 + m.coeffs[1]) + (u[:-2] - m.mean_offset) * m.coeffs[0] + m.mean_offset
    assert np.allclose(pred, manual)
    assert est.score(u) == pytest.approx(-np.sqrt(np.mean(np.abs(u[2:] - pred) ** 2)))


def test_constrained_estimator_matches_function():
    series = simulate(ARModel((0.05, -0.1, -0.3 + 0.1j), 0j, 0.1, 0.2), 3000, seed=9)
    est = ConstrainedYuleWalkerAR(p=3, dt=0.2, lam=-1 + 1j).fit(series.values)
    ref, _ = constrained_yule_walker_fit(series, 3, -1 + 1j)
    assert np.allclose(est.model_.coeffs, ref.coeffs)
