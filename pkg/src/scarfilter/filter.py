"""Kalman and ensemble Kalman filtering with temporally augmented AR models.

The filter state is the lag vector of an AR(p) model, observed through its
last component only (``G = e_p``), so every update needs a scalar inversion.
All state lives in anomaly space: the model's ``mean_offset`` is removed from
observations on the way in and added back to reported estimates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .armodel import ARModel, TimeSeries, complex_noise

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
R_FLOOR = 1e-8
MIN_INNOVATIONS = 30
DEFAULT_FORGETTING = 0.99
SPREAD_TOL = 1e-12


class FilterError(RuntimeError):
    """Filtering failed: diverged state, degenerate ensemble or bad inputs."""


def _hermitize(C: np.ndarray) -> np.ndarray:
    return 0.5 * (C + C.conj().T)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class FilterState:
    """Augmented mean ``(u_{m-p+1}, ..., u_m)`` and its covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=complex).ravel()
        C = np.asarray(self.covariance, dtype=complex)
        if C.shape != (m.size, m.size):
            raise FilterError(f"covariance shape {C.shape} does not match mean length {m.size}")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", C)

    @classmethod
    def initial(cls, p: int, energy: float, mean=None) -> "FilterState":
        m = np.zeros(p, dtype=complex) if mean is None else mean
        return cls(m, energy * np.eye(p, dtype=complex))

    @property
    def p(self) -> int:
        return self.mean.size

    @property
    def observed_variance(self) -> float:
        return float(self.covariance[-1, -1].real)

    def check(self, tol: float = PSD_TOL) -> None:
        """Raise unless the covariance is Hermitian and PSD up to roundoff."""
        C = self.covariance
        scale = max(1.0, float(np.max(np.abs(C))))
        if np.max(np.abs(C - C.conj().T)) > HERMITIAN_TOL * scale:
            raise FilterError("covariance is not Hermitian")
        if np.linalg.eigvalsh(_hermitize(C)).min() < -tol * scale:
            raise FilterError("covariance is not positive semidefinite")


@dataclass(frozen=True)
class ObservationStream:
    values: np.ndarray
    obs_interval: int
    noise_variance: float

    def __post_init__(self):
        if self.obs_interval < 1:
            raise FilterError("observation interval n must be at least 1")
        if not self.noise_variance > 0:
            raise FilterError("observation noise variance must be positive")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex).ravel())


@dataclass(frozen=True)
class Ensemble:
    """Ensemble members stored as rows of an ``(size, p)`` array."""

    members: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.members, dtype=complex))
        if X.shape[0] < 2:
            raise FilterError("an ensemble needs at least two members")
        object.__setattr__(self, "members", X)

    @classmethod
    def from_state(cls, state: FilterState, size: int, seed=None) -> "Ensemble":
        rng = _rng(seed)
        w, V = np.linalg.eigh(_hermitize(state.covariance))
        L = V * np.sqrt(np.clip(w, 0.0, None))
        z = complex_noise(rng, (size, state.p), 1.0)
        return cls(state.mean + z @ L.T)

    @property
    def size(self) -> int:
        return self.members.shape[0]

    @property
    def p(self) -> int:
        return self.members.shape[1]

    def mean(self) -> np.ndarray:
        return self.members.mean(axis=0)

    def perturbations(self) -> np.ndarray:
        return self.members - self.mean()

    def covariance(self) -> np.ndarray:
        A = self.perturbations()
        return _hermitize(A.T @ A.conj()) / (self.size - 1)

    def state(self) -> FilterState:
        return FilterState(self.mean(), self.covariance())


@dataclass(frozen=True)
class SkillReport:
    prior_rmse: float
    posterior_rmse: float
    pattern_correlation_curve: tuple = ()
    diverged: bool = False
    cycles: int = 0

    def to_dict(self) -> dict:
        return {"prior_rmse": self.prior_rmse, "posterior_rmse": self.posterior_rmse,
                "pattern_correlation": [list(pc) for pc in self.pattern_correlation_curve],
                "diverged": self.diverged, "cycles": self.cycles}


@dataclass(frozen=True)
class Track:
    """Per-cycle record of a filter run, in the original (non-anomaly) units."""

    times: np.ndarray
    truth: np.ndarray
    mean: np.ndarray
    prior_mean: np.ndarray
    prior_var: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "truth_re", "truth_im", "mean_re", "mean_im", "prior_var"])
            for t, u, m, v in zip(self.times, self.truth, self.mean, self.prior_var):
                w.writerow([repr(float(x)) for x in (t, u.real, u.imag, m.real, m.imag, v)])


# ---------------------------------------------------------------------------
# Kalman filter

@lru_cache(maxsize=256)
def _propagators(model: ARModel, n: int) -> tuple:
    """``F^n``, the accumulated forcing and the accumulated noise covariance."""
    p = model.p
    F = model.companion()
    Fn = np.eye(p, dtype=complex)
    fsum = np.zeros(p, dtype=complex)
    Qsum = np.zeros((p, p), dtype=complex)
    fvec = np.zeros(p, dtype=complex)
    fvec[-1] = model.forcing
    with np.errstate(all="ignore"):
        for _ in range(n):
            Fn = F @ Fn
            fsum = F @ fsum + fvec
            Qsum = F @ Qsum @ F.conj().T
            Qsum[-1, -1] += model.noise_variance
    for a in (Fn, fsum, Qsum):
        a.setflags(write=False)
    return Fn, fsum, _hermitize(Qsum)


def kalman_forecast(state: FilterState, model: ARModel, n: int = 1) -> FilterState:
    """Prior after ``n`` model steps: ``F^n m + sum F^j f`` and ``F^n C F^nH + sum F^j Q F^jH``."""
    if n < 1:
        raise FilterError("forecast needs n >= 1 steps")
    if state.p != model.p:
        raise FilterError(f"state length {state.p} does not match model order {model.p}")
    Fn, fsum, Qsum = _propagators(model, n)
    with np.errstate(all="ignore"):
        mean = Fn @ state.mean + fsum
        cov = _hermitize(Fn @ state.covariance @ Fn.conj().T + Qsum)
    return FilterState(mean, cov)


def kalman_update(prior: FilterState, obs: complex, R: float) -> tuple:
    """Scalar-observation update of the last component; returns ``(posterior, gain)``."""
    if not R > 0:
        raise FilterError("observation noise variance must be positive")
    C = prior.covariance
    innov = complex(obs) - prior.mean[-1]
    S = C[-1, -1].real + R
    if not (np.isfinite(innov) and np.isfinite(S)):
        raise FilterError("diverged state")
    K = C[:, -1] / S
    mean = prior.mean + K * innov
    # Joseph form keeps the update PSD under roundoff; equal to (I - KG) C in exact arithmetic
    IKG = np.eye(prior.p, dtype=complex)
    IKG[:, -1] -= K
    cov = IKG @ C @ IKG.conj().T + R * np.outer(K, K.conj())
    return FilterState(mean, _hermitize(cov)), K


def run_kalman(model: ARModel, truth: TimeSeries, n: int, R: float, seed=None,
               energy: float | None = None, spin_up: int = 10,
               min_cycles: int = 100) -> tuple:
    """Twin experiment: observe ``truth`` every ``n`` steps with noise ``R`` and filter.

    Returns ``(SkillReport, Track)``.  A run whose estimate stops being finite
    is reported with infinite RMSE and ``diverged=True`` rather than raising.
    """
    if n < 1:
        raise FilterError("observation interval n must be at least 1")
    if not R > 0:
        raise FilterError("observation noise variance must be positive")
    if not math.isclose(model.dt, truth.dt, rel_tol=1e-9):
        raise FilterError(f"dt mismatch: model {model.dt} vs truth {truth.dt}")
    u = truth.values - model.mean_offset
    idx = np.arange(n, u.size, n)
    cycles = idx.size
    if cycles < max(min_cycles, spin_up + 1):
        raise FilterError(f"truth too short: {cycles} analysis cycles, need {max(min_cycles, spin_up + 1)}")
    rng = _rng(seed)
    obs = u[idx] + complex_noise(rng, cycles, R)
    if energy is None:
        energy = float(np.var(u))
    energy = energy if energy > 0 else 1.0

    p = model.p
    Fn, fsum, Qsum = _propagators(model, n)
    FnH = Fn.conj().T
    m = np.zeros(p, dtype=complex)
    C = energy * np.eye(p, dtype=complex)
    prior_mean = np.full(cycles, np.nan, dtype=complex)
    post_mean = np.full(cycles, np.nan, dtype=complex)
    prior_var = np.full(cycles, np.nan)
    K = None
    steady = False
    diverged = False
    with np.errstate(all="ignore"):
        for k in range(cycles):
            if not steady:
                Cp = _hermitize(Fn @ C @ FnH + Qsum)
                S = Cp[-1, -1].real + R
                K_new = Cp[:, -1] / S
                C_new = _hermitize(Cp - np.outer(K_new, Cp[-1, :]))
                # the covariance recursion does not see the data; once it settles, freeze it
                if K is not None and np.allclose(K_new, K, rtol=1e-14, atol=0.0) \
                        and np.allclose(C_new, C, rtol=1e-13, atol=0.0):
                    steady = True
                K, C, pv = K_new, C_new, Cp[-1, -1].real
            mp = Fn @ m + fsum
            m = mp + K * (obs[k] - mp[-1])
            if not (np.all(np.isfinite(m)) and np.isfinite(pv)):
                diverged = True
                break
            prior_mean[k], post_mean[k], prior_var[k] = mp[-1], m[-1], pv
    ref = u[idx]
    if diverged:
        report = SkillReport(math.inf, math.inf, (), True, cycles)
    else:
        s = slice(spin_up, None)
        report = SkillReport(rmse(prior_mean[s], ref[s]), rmse(post_mean[s], ref[s]), (), False, cycles)
    track = Track(truth.times[idx], truth.values[idx], post_mean + model.mean_offset,
                  prior_mean + model.mean_offset, prior_var)
    return report, track


# ---------------------------------------------------------------------------
# ensemble Kalman filter

def enkf_step(ensemble: Ensemble, model: ARModel, obs: complex, R_estimate: float,
              n: int = 1, seed=None, inflation: float = 1.0) -> tuple:
    """One ETKF cycle: stochastic forecast of every member, then a transform update.

    Returns ``(analysis ensemble, innovation, prior variance of the observed
    component)``.  ``inflation`` multiplies the prior covariance.
    """
    if ensemble.p != model.p:
        raise FilterError(f"ensemble width {ensemble.p} does not match model order {model.p}")
    if not R_estimate > 0:
        raise FilterError("observation noise variance must be positive")
    rng = _rng(seed)
    F = model.companion()
    X = ensemble.members
    N = ensemble.size
    with np.errstate(all="ignore"):
        for _ in range(n):
            X = X @ F.T
            X[:, -1] += model.forcing + complex_noise(rng, N, model.noise_variance)
    xb = X.mean(axis=0)
    A = (X - xb) * np.sqrt(inflation)
    if not np.all(np.isfinite(X)):
        raise FilterError("diverged state")
    if np.max(np.abs(A)) < SPREAD_TOL:
        raise FilterError("ensemble degenerate")
    y = A[:, -1]
    innov = complex(obs) - xb[-1]
    prior_var = float(np.sum(np.abs(y) ** 2).real / (N - 1))
    # ensemble-space analysis covariance [(N-1) I + Y^H R^-1 Y]^-1 with Y the 1 x N obs perturbations
    M = (N - 1) * np.eye(N) + np.outer(y.conj(), y) / R_estimate
    w, V = np.linalg.eigh(_hermitize(M))
    Pa = (V / w) @ V.conj().T
    wa = Pa @ y.conj() * (innov / R_estimate)
    Wa = (V * np.sqrt((N - 1) / w)) @ V.conj().T
    xa = xb + A.T @ wa
    Xa = xa + Wa.T @ A
    return Ensemble(Xa), innov, prior_var


class AdaptiveNoise:
    """Running innovation-based estimate of the observation noise variance.

    ``forgetting=1`` weights every innovation equally (batch mode).  Until
    ``min_samples`` innovations have arrived the ``initial`` value is returned.
    """

    def __init__(self, initial: float, forgetting: float = DEFAULT_FORGETTING,
                 floor: float = R_FLOOR, min_samples: int = MIN_INNOVATIONS):
        if not 0 < forgetting <= 1:
            raise FilterError("forgetting factor must lie in (0, 1]")
        self.initial = float(initial)
        self.forgetting = forgetting
        self.floor = floor
        self.min_samples = min_samples
        self.count = 0
        self._s_innov = 0.0
        self._s_prior = 0.0
        self._weight = 0.0

    def update(self, innovation: complex, prior_var: float) -> float:
        lam = self.forgetting
        self._s_innov = lam * self._s_innov + abs(innovation) ** 2
        self._s_prior = lam * self._s_prior + prior_var
        self._weight = lam * self._weight + 1.0
        self.count += 1
        return self.estimate

    @property
    def estimate(self) -> float:
        if self.count < self.min_samples:
            return self.initial
        return max((self._s_innov - self._s_prior) / self._weight, self.floor)


def adaptive_noise_estimate(innovations, prior_vars, forgetting: float | None = None,
                            floor: float = R_FLOOR) -> float:
    """``max(mean |eps|^2 - mean(G C G^H), floor)``; exponentially weighted if ``forgetting`` is set."""
    eps = np.asarray(innovations, dtype=complex).ravel()
    pv = np.asarray(prior_vars, dtype=float).ravel()
    if eps.size != pv.size:
        raise FilterError("innovations and prior variances differ in length")
    if eps.size < MIN_INNOVATIONS:
        raise FilterError(f"need at least {MIN_INNOVATIONS} innovations, got {eps.size}")
    if forgetting is None:
        weights = np.ones(eps.size)
    else:
        if not 0 < forgetting <= 1:
            raise FilterError("forgetting factor must lie in (0, 1]")
        weights = forgetting ** np.arange(eps.size - 1, -1, -1, dtype=float)
    est = np.sum(weights * (np.abs(eps) ** 2 - pv)) / np.sum(weights)
    return float(max(est, floor))


# ---------------------------------------------------------------------------
# metrics

def _values(x) -> np.ndarray:
    return x.values if isinstance(x, TimeSeries) else np.asarray(x, dtype=complex)


def rmse(estimates, truth) -> float:
    """``sqrt(mean |est - truth|^2)`` over all samples."""
    e, t = _values(estimates), _values(truth)
    if e.shape != t.shape:
        raise FilterError(f"length mismatch: {e.shape} vs {t.shape}")
    if e.size == 0:
        raise FilterError("rmse of an empty series")
    return float(np.sqrt(np.mean(np.abs(e - t) ** 2)))


def pattern_correlation(forecast, verification, leads=None) -> tuple:
    """Bivariate pattern correlation per lead.

    ``forecast[k, l]`` is the forecast issued at time ``k`` for lead ``l``
    and ``verification[k, l]`` the matching verifying value.  Complex values
    are the (RMM1, RMM2) pairs, so the dot product is ``Re(conj(f) v)``.
    Returns ``((lead, PC), ...)``.
    """
    f = np.atleast_2d(_values(forecast))
    v = np.atleast_2d(_values(verification))
    if f.shape != v.shape:
        raise FilterError(f"shape mismatch: {f.shape} vs {v.shape}")
    if f.ndim == 2 and f.shape[0] == 1 and np.ndim(_values(forecast)) == 1:
        f, v = f.T, v.T
    leads = range(f.shape[1]) if leads is None else leads
    out = []
    for j, lead in enumerate(leads):
        nf = np.linalg.norm(f[:, j])
        nv = np.linalg.norm(v[:, j])
        if nf == 0 or nv == 0:
            raise FilterError(f"zero-norm window at lead {lead}")
        pc = float(np.sum((f[:, j].conj() * v[:, j]).real) / (nf * nv))
        out.append((lead, min(1.0, max(-1.0, pc))))
    return tuple(out)


# ---------------------------------------------------------------------------
# assimilate-then-forecast workflow

@dataclass(frozen=True)
class ForecastRun:
    report: SkillReport
    R_history: np.ndarray
    track: Track
    lead_forecasts: np.ndarray = field(repr=False)
    lead_verification: np.ndarray = field(repr=False)

    @property
    def R_final(self) -> float:
        return float(self.R_history[-1])


def ensemble_forecast(model: ARModel, series: TimeSeries, train: int, max_lead: int,
                      size: int = 50, R0: float | None = None, adaptive: bool = True,
                      mode: str = "continuous", forgetting: float = DEFAULT_FORGETTING,
                      seed=None, inflation: float = 1.0) -> ForecastRun:
    """ETKF assimilation of ``series`` followed by lead-time forecasts.

    Every sample is assimilated (one model step per observation).  From
    index ``train`` on, the analysis mean is propagated deterministically
    ``0..max_lead`` steps and compared with the data.  With ``mode="once"``
    the noise estimate is frozen at the end of the training window.
    """
    if mode not in ("continuous", "once"):
        raise FilterError(f"unknown adaptive mode {mode!r}")
    if not math.isclose(model.dt, series.dt, rel_tol=1e-9):
        raise FilterError(f"dt mismatch: model {model.dt} vs series {series.dt}")
    v = series.values - model.mean_offset
    M = v.size
    if train < 1 or train + max_lead >= M:
        raise FilterError(f"window exceeds data: train={train}, max_lead={max_lead}, length={M}")
    rng = _rng(seed)
    energy = float(np.var(v)) or 1.0
    R0 = 0.25 * energy if R0 is None else R0
    noise = AdaptiveNoise(R0, forgetting=forgetting)
    ens = Ensemble.from_state(FilterState.initial(model.p, energy), size, rng)
    F = model.companion()
    _, fsum_1, _ = _propagators(model, 1)

    R_hist = np.empty(M)
    prior_mean = np.empty(M, dtype=complex)
    post_mean = np.empty(M, dtype=complex)
    prior_var = np.empty(M)
    issues = M - max_lead - train
    fc = np.empty((issues, max_lead + 1), dtype=complex)
    for k in range(M):
        R = noise.estimate if adaptive else R0
        ens, innov, pv = enkf_step(ens, model, v[k], R, 1, rng, inflation)
        if adaptive and (mode == "continuous" or k < train):
            noise.update(innov, pv)
        R_hist[k] = R
        prior_mean[k] = v[k] - innov
        post_mean[k] = ens.mean()[-1]
        prior_var[k] = pv
        if train <= k < train + issues:
            x = ens.mean()
            row = fc[k - train]
            row[0] = x[-1]
            for lead in range(1, max_lead + 1):
                x = F @ x + fsum_1
                row[lead] = x[-1]
    ver = np.array([v[k:k + max_lead + 1] for k in range(train, train + issues)])
    pc = pattern_correlation(fc, ver)
    s = slice(train, None)
    report = SkillReport(rmse(prior_mean[s], v[s]), rmse(post_mean[s], v[s]), pc, False, M)
    off = model.mean_offset
    track = Track(series.times, series.values, post_mean + off, prior_mean + off, prior_var)
    return ForecastRun(report, R_hist, track, fc + off, ver + off)


def write_results_csv(rows, path) -> None:
    """Experiment rows ``{model_tag, dt, n, R_fraction, prior_rmse, posterior_rmse, diverged, seed}``."""
    cols = ["model_tag", "dt", "n", "R_fraction", "prior_rmse", "posterior_rmse", "diverged", "seed"]
    with open(Path(path), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in rows:
            w.writerow({c: (repr(float(row[c])) if isinstance(row[c], (float, np.floating)) else row[c]) for c in cols})
