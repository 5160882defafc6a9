"""Univariate complex AR(p) models: representation, fitting and simulation.

The state of an order-p model is the lag vector ``(u_{m-p+1}, ..., u_m)``.
One step is ``u_{m+1} = sum_j a_j u_{m-p+j} + u_m + f + eta``, i.e. the
companion matrix has last row ``(a_1, ..., a_{p-1}, 1 + a_p)``.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.signal
from sklearn.base import BaseEstimator, RegressorMixin

STABILITY_TOL = 1e-12
CONSISTENCY_TOL = 1e-9
PROVENANCES = ("YW", "CYW", "SCAR", "MSM", "USER")


class ModelError(ValueError):
    """Invalid model or failed fit."""


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled complex signal."""

    values: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1 or v.size < 1:
            raise ModelError("a time series needs at least one sample")
        if not self.dt > 0:
            raise ModelError("dt must be positive")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)


@dataclass(frozen=True)
class ARModel:
    coeffs: tuple
    forcing: complex = 0j
    noise_variance: float = 0.0
    dt: float = 1.0
    mean_offset: complex = 0j
    provenance: str = "USER"

    def __post_init__(self):
        c = tuple(complex(a) for a in np.atleast_1d(self.coeffs))
        if len(c) < 1:
            raise ModelError("order p must be at least 1")
        if self.noise_variance < 0:
            raise ModelError("noise variance must be nonnegative")
        if not self.dt > 0:
            raise ModelError("dt must be positive")
        if self.provenance not in PROVENANCES:
            raise ModelError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "forcing", complex(self.forcing))
        object.__setattr__(self, "mean_offset", complex(self.mean_offset))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def p(self) -> int:
        return len(self.coeffs)

    def companion(self) -> np.ndarray:
        p = self.p
        F = np.zeros((p, p), dtype=complex)
        F[:-1, 1:] = np.eye(p - 1)
        F[-1, :] = self.coeffs
        F[-1, -1] += 1.0
        return F

    def char_poly(self) -> np.ndarray:
        """Coefficients of the characteristic polynomial, highest power first."""
        p = self.p
        # Pi(x) = sum a_j x^(j-1) + x^(p-1) - x^p
        c = np.zeros(p + 1, dtype=complex)
        c[0] = -1.0
        c[1] += 1.0
        for j, a in enumerate(self.coeffs, start=1):
            c[p - (j - 1)] += a
        return c

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "coeffs": [[a.real, a.imag] for a in self.coeffs],
            "f": [self.forcing.real, self.forcing.imag],
            "Q": self.noise_variance,
            "dt": self.dt,
            "mean_offset": [self.mean_offset.real, self.mean_offset.imag],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ARModel":
        coeffs = tuple(complex(re, im) for re, im in d["coeffs"])
        if len(coeffs) != d.get("p", len(coeffs)):
            raise ModelError("model file: p does not match the number of coefficients")
        return cls(coeffs, complex(*d.get("f", (0, 0))), d.get("Q", 0.0), d["dt"],
                   complex(*d.get("mean_offset", (0, 0))), d.get("provenance", "USER"))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ARModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class FitDiagnostics:
    residual_variance: float
    aic_value: float
    constrained: bool
    condition_estimate: float
    n_samples: int = 0

    def to_dict(self) -> dict:
        return {"Q_hat": self.residual_variance, "aic": self.aic_value,
                "constrained": self.constrained, "condition": self.condition_estimate,
                "M": self.n_samples}


def characteristic_roots(model: ARModel) -> np.ndarray:
    p = model.p
    if p == 1:
        return np.array([1.0 + model.coeffs[0]])
    return np.roots(model.char_poly())


def is_stable(model: ARModel) -> tuple:
    """``(stable, max modulus)``; stable means max modulus < 1 - 1e-12."""
    rmax = float(np.max(np.abs(characteristic_roots(model))))
    return rmax < 1.0 - STABILITY_TOL, rmax


def consistency_residuals(coeffs, lam: complex, dt: float, q: int = 2) -> list:
    p = len(coeffs)
    out = []
    for ell in range(1, q + 1):
        s = ell * sum((j - p) ** (ell - 1) * a for j, a in enumerate(coeffs, start=1))
        out.append(abs(s - lam * dt))
    return out


def is_consistent(model: ARModel, lam: complex, q: int = 2, tol: float = CONSISTENCY_TOL) -> tuple:
    if q not in (1, 2):
        raise ModelError("consistency order must be 1 or 2")
    res = consistency_residuals(model.coeffs, lam, model.dt, q)
    return all(r <= tol for r in res), res


# ---------------------------------------------------------------------------
# Yule-Walker fitting

def _centre(u: np.ndarray, p: int) -> complex:
    """Validate the series for an order-``p`` fit and return its mean."""
    M = u.size
    if M <= 2 * p:
        raise ModelError(f"series too short for p={p}: need M > {2 * p}, got {M}")
    if not np.all(np.isfinite(u)):
        raise ModelError("series contains non-finite samples")
    return complex(np.mean(u))


def _design(u: np.ndarray, p: int, center: complex):
    x = u - center
    X = np.lib.stride_tricks.sliding_window_view(x[:-1], p)
    y = x[p:]
    return X, y


def _lstsq(X, y):
    s = np.linalg.svd(X, compute_uv=False)
    if s[0] == 0 or s[-1] <= s[0] * 1e-13:
        raise ModelError("degenerate design matrix")
    b, *_ = np.linalg.lstsq(X, y, rcond=None)
    return b, float(s[0] / s[-1])


def _aic(q_hat: float, M: int, p: int) -> float:
    return q_hat * (M + p) / (M - p)


def yule_walker_fit(series: TimeSeries, p: int) -> tuple:
    """Least-squares AR(p) fit on mean-removed data."""
    u = series.values
    ubar = _centre(u, p)
    X, y = _design(u, p, ubar)
    b, cond = _lstsq(X, y)
    a = b.copy()
    a[-1] -= 1.0
    resid = y - X @ b
    M = u.size
    q_hat = float(np.vdot(resid, resid).real / (M - p))
    model = ARModel(tuple(a), 0j, q_hat, series.dt, ubar, "YW")
    return model, FitDiagnostics(q_hat, _aic(q_hat, M, p), False, cond, M)


def constrained_yule_walker_fit(series: TimeSeries, p: int, lam: complex) -> tuple:
    """Least squares subject to both order-2 consistency equalities.

    The constraints ``C a = d`` are eliminated by writing
    ``a = a0 + N z`` with ``N`` a basis of the null space of ``C``.
    """
    if p < 3:
        raise ModelError("constrained fit needs p >= 3")
    u = series.values
    ubar = _centre(u, p)
    X, y = _design(u, p, ubar)
    j = np.arange(1, p + 1)
    C = np.vstack([np.ones(p), 2.0 * (j - p)]).astype(complex)
    d = np.full(2, lam * series.dt, dtype=complex)
    if np.linalg.matrix_rank(C) < 2:
        raise ModelError("constraint degeneracy")
    a0 = np.linalg.lstsq(C, d, rcond=None)[0]
    N = scipy.linalg.null_space(C)
    # y - X(a + e_p) = (y - X(a0 + e_p)) - X N z
    ep = np.zeros(p)
    ep[-1] = 1.0
    rhs = y - X @ (a0 + ep)
    A = X @ N
    z, cond = _lstsq(A, rhs)
    a = a0 + N @ z
    resid = rhs - A @ z
    M = u.size
    q_hat = float(np.vdot(resid, resid).real / (M - p))
    model = ARModel(tuple(a), 0j, q_hat, series.dt, ubar, "CYW")
    return model, FitDiagnostics(q_hat, _aic(q_hat, M, p), True, cond, M)


def aic_select(series: TimeSeries, p_max: int, jobs: int = 1) -> tuple:
    """Order minimising F(p) = Q(M+p)/(M-p); returns ``(p, {p: F(p)})``."""
    M = len(series)
    if p_max < 1:
        raise ModelError("p_max must be at least 1")
    if 4 * p_max >= M:
        raise ModelError(f"p_max too large for M={M}: need M > 4*p_max")

    def one(p):
        try:
            return p, yule_walker_fit(series, p)[1].aic_value
        except ModelError:
            return p, None

    ps = range(1, p_max + 1)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            results = list(ex.map(one, ps))
    else:
        results = [one(p) for p in ps]
    table = {p: v for p, v in results if v is not None}
    if not table:
        raise ModelError("every candidate order failed to fit")
    best = min(table, key=lambda p: (table[p], p))
    return best, table


def msm_parameters(energy: float, correlation_time: complex) -> tuple:
    """Mean stochastic model: ``lambda = -1/T``, ``sigma = sqrt(2 |Re lambda| E)``.

    ``T`` is the integral of the normalised autocorrelation
    ``E[u(t+tau) conj(u(t))] / E``.  For ``acf = exp(lambda tau)`` that
    integral is ``-1/lambda``, hence the sign.
    """
    if not energy > 0:
        raise ModelError("energy must be positive")
    T = complex(correlation_time)
    if T == 0:
        raise ModelError("correlation time must be nonzero")
    lam = -1.0 / T
    if lam.real >= 0:
        raise ModelError("correlation time gives no decay")
    sigma = float(np.sqrt(2.0 * abs(lam.real) * energy))
    return lam, sigma


def complex_noise(rng: np.random.Generator, size, variance: float) -> np.ndarray:
    """Circular complex Gaussian samples with ``E|eta|^2 = variance``."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def simulate(model: ARModel, steps: int, seed=None, burn_in: int | None = None,
             initial=None) -> TimeSeries:
    """Sample path of the model with circular complex noise of variance Q."""
    if steps < 1:
        raise ModelError("steps must be at least 1")
    stable, _ = is_stable(model)
    if not stable:
        warnings.warn("simulating an unstable AR model", RuntimeWarning, stacklevel=2)
    p = model.p
    burn = 10 * p if burn_in is None else burn_in
    rng = np.random.default_rng(seed)
    n = steps + burn
    eta = complex_noise(rng, n, model.noise_variance)
    drive = eta + model.forcing
    # u_{m+1} - (1+a_p) u_m - a_{p-1} u_{m-1} - ... - a_1 u_{m-p+1} = drive
    den = np.concatenate([[1.0], -np.array(model.coeffs[::-1], dtype=complex)])
    den[1] -= 1.0
    if initial is None:
        u0 = np.zeros(p, dtype=complex)
    else:
        u0 = np.asarray(initial, dtype=complex)
    # past outputs in lfilter's state convention (most recent first)
    zi = scipy.signal.lfiltic([1.0], den, u0[::-1])
    out, _ = scipy.signal.lfilter([1.0], den, drive, zi=zi)
    values = out[burn:] + model.mean_offset
    return TimeSeries(values, model.dt)


# ---------------------------------------------------------------------------
# scikit-learn style estimators

class _ARBase(BaseEstimator, RegressorMixin):
    def _series(self, X):
        if isinstance(X, TimeSeries):
            return X
        return TimeSeries(np.asarray(X).ravel(), self.dt)

    def predict(self, X, horizon: int = 1):
        """Deterministic ``horizon``-step forecast from each lag window of ``X``."""
        model = self.model_
        u = self._series(X).values - model.mean_offset
        p = model.p
        F = model.companion()
        Fn = np.linalg.matrix_power(F, horizon)
        windows = np.lib.stride_tricks.sliding_window_view(u, p)
        return windows @ Fn[-1] + model.mean_offset

    def score(self, X, y=None, sample_weight=None):
        u = self._series(X).values
        pred = self.predict(u[:-1])
        err = u[self.model_.p:] - pred
        return -float(np.sqrt(np.mean(np.abs(err) ** 2)))


class YuleWalkerAR(_ARBase):
    def __init__(self, p: int = 3, dt: float = 1.0):
        self.p = p
        self.dt = dt

    def fit(self, X, y=None):
        self.model_, self.diagnostics_ = yule_walker_fit(self._series(X), self.p)
        return self


class ConstrainedYuleWalkerAR(_ARBase):
    def __init__(self, p: int = 3, dt: float = 1.0, lam: complex = -1.0):
        self.p = p
        self.dt = dt
        self.lam = lam

    def fit(self, X, y=None):
        self.model_, self.diagnostics_ = constrained_yule_walker_fit(self._series(X), self.p, self.lam)
        return self


class SCAR3(_ARBase):
    """Stable consistent AR-3 built from (lambda, sigma); ``fit`` only stores the mean."""

    def __init__(self, lam: complex = -1.0, sigma: float = 1.0, dt: float | None = None):
        self.lam = lam
        self.sigma = sigma
        self.dt = dt

    def fit(self, X=None, y=None):
        from .scar import construct_scar3
        model, cert = construct_scar3(self.lam, self.sigma, self.dt)
        if X is not None:
            series = X if isinstance(X, TimeSeries) else TimeSeries(np.asarray(X).ravel(), model.dt)
            model = replace(model, mean_offset=complex(np.mean(series.values)))
        self.model_, self.certificate_ = model, cert
        return self
