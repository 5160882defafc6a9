"""Truth signals, equilibrium statistics and time-series files.

Lorenz-96 reads ``dx_j/dt = (x_{j+1} - x_{j-2}) x_{j-1} - x_j + F`` with
cyclic indices.  Fourier modes use ``u_k = (1/J) sum_j x_j exp(-2 pi i k j / J)``
with ``j = 0..J-1``.
"""

from __future__ import annotations

import csv
import datetime as _dt
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.integrate
import scipy.signal

from .armodel import ModelError, TimeSeries, complex_noise, msm_parameters

RMM_DT = 12.0 / 365.0
ACF_CUTOFF = 0.01
UNIFORM_RTOL = 1e-9


class SignalError(ValueError):
    """Bad signal configuration, blow-up, or malformed file."""


@dataclass(frozen=True)
class Lorenz96Config:
    J: int = 40
    F: float = 6.0
    dt: float = 1.0 / 64.0
    h: float | None = None
    spin_up: float = 100.0
    duration: float = 100.0
    seed: int | None = 0
    initial: tuple | None = None

    def __post_init__(self):
        if self.J < 4:
            raise SignalError("Lorenz-96 needs J >= 4")
        if not self.dt > 0:
            raise SignalError("sampling step dt must be positive")
        if self.h is not None and not self.h > 0:
            raise SignalError("integrator step h must be positive")
        if self.spin_up < 0 or not self.duration > 0:
            raise SignalError("spin_up must be >= 0 and duration > 0")
        if self.initial is not None and len(self.initial) != self.J:
            raise SignalError(f"initial state has {len(self.initial)} entries, expected {self.J}")

    @property
    def step(self) -> float:
        return self.dt / 4.0 if self.h is None else self.h

    @classmethod
    def from_dict(cls, d: dict) -> "Lorenz96Config":
        d = dict(d)
        if d.get("initial") is not None:
            d["initial"] = tuple(float(x) for x in d["initial"])
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise SignalError(f"unknown Lorenz-96 settings: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class FieldSeries:
    """Real multivariate series, one row per time sample."""

    values: np.ndarray
    dt: float
    t0: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.shape[0])

    def __len__(self):
        return self.values.shape[0]


def lorenz96_rhs(x: np.ndarray, F: float) -> np.ndarray:
    return (np.roll(x, -1) - np.roll(x, 2)) * np.roll(x, 1) - x + F


class _RK4:
    """Classical RK4 for Lorenz-96 with the cyclic neighbours precomputed."""

    def __init__(self, J: int, F: float, h: float):
        j = np.arange(J)
        self.ip1, self.im1, self.im2 = (j + 1) % J, (j - 1) % J, (j - 2) % J
        self.F, self.h = F, h

    def rhs(self, x):
        return (x[self.ip1] - x[self.im2]) * x[self.im1] - x + self.F

    def step(self, x):
        h = self.h
        k1 = self.rhs(x)
        k2 = self.rhs(x + 0.5 * h * k1)
        k3 = self.rhs(x + 0.5 * h * k2)
        k4 = self.rhs(x + h * k3)
        return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_lorenz96(config: Lorenz96Config) -> FieldSeries:
    """RK4 trajectory sampled every ``dt``, with the spin-up discarded."""
    h = config.step
    sub = config.dt / h
    nsub = int(round(sub))
    if nsub < 1 or abs(sub - nsub) > 1e-9 * sub:
        raise SignalError(f"dt={config.dt} is not an integer multiple of h={h}")
    if config.initial is None:
        rng = np.random.default_rng(config.seed)
        x = config.F + 0.01 * rng.standard_normal(config.J)
    else:
        x = np.array(config.initial, dtype=float)
    n_spin = int(round(config.spin_up / config.dt))
    n_out = int(round(config.duration / config.dt))
    out = np.empty((n_out, config.J))
    rk = _RK4(config.J, config.F, h)
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(n_spin + n_out):
            for _ in range(nsub):
                x = rk.step(x)
            if not np.all(np.isfinite(x)):
                raise SignalError(f"integration blow-up at t={(m + 1) * config.dt:g} (step too large?)")
            if m >= n_spin:
                out[m - n_spin] = x
    return FieldSeries(out, config.dt, 0.0)


def fourier_mode(series: FieldSeries, k: int) -> TimeSeries:
    J = series.values.shape[1]
    if not 0 <= k <= J // 2:
        raise SignalError(f"wavenumber {k} outside 0..{J // 2}")
    u = np.fft.fft(series.values, axis=1)[:, k] / J
    return TimeSeries(u, series.dt, series.t0)


def simulate_ou(lam: complex, sigma: float, dt: float, steps: int, seed=None) -> TimeSeries:
    """Exact discretisation of ``du = lam u dt + sigma dW`` started from equilibrium."""
    lam = complex(lam)
    if lam.real >= 0:
        raise SignalError("OU process needs Re(lam) < 0")
    rng = np.random.default_rng(seed)
    decay = np.exp(lam * dt)
    var_step = sigma ** 2 * (1.0 - math.exp(2.0 * lam.real * dt)) / (2.0 * abs(lam.real))
    u0 = complex_noise(rng, 1, sigma ** 2 / (2.0 * abs(lam.real)))[0]
    eta = complex_noise(rng, steps, var_step)
    zi = scipy.signal.lfiltic([1.0], [1.0, -decay], [u0])
    u, _ = scipy.signal.lfilter([1.0], [1.0, -decay], eta, zi=zi)
    return TimeSeries(u, dt)


# ---------------------------------------------------------------------------
# equilibrium statistics

@dataclass(frozen=True)
class EquilibriumStats:
    energy: float
    correlation_time: complex
    acf: np.ndarray
    dt: float
    mean: complex = 0j

    @property
    def max_lag(self) -> float:
        return (self.acf.size - 1) * self.dt

    def msm(self) -> tuple:
        """``(lambda, sigma)`` of the matching mean stochastic model."""
        return msm_parameters(self.energy, self.correlation_time)

    def to_dict(self) -> dict:
        """JSON view; ``lambda`` and ``sigma`` are null when the ACF integral shows no decay."""
        T = self.correlation_time
        try:
            lam, sigma = self.msm()
            lam = [lam.real, lam.imag]
        except ModelError:
            lam = sigma = None
        return {"energy": self.energy, "correlation_time": [T.real, T.imag],
                "lambda": lam, "sigma": sigma, "dt": self.dt,
                "max_lag": self.max_lag, "mean": [self.mean.real, self.mean.imag]}


def autocorrelation(u: np.ndarray, nlags: int) -> np.ndarray:
    """Unbiased ``E[u(t + tau) conj(u(t))]`` for ``tau = 0..nlags`` of a mean-removed series."""
    n = u.size
    size = 1 << int(2 * n - 1).bit_length()
    U = np.fft.fft(u, size)
    full = np.fft.ifft(U * U.conj())[: nlags + 1]
    return full / (n - np.arange(nlags + 1))


def equilibrium_stats(series: TimeSeries, max_lag: float | None = None) -> EquilibriumStats:
    """Energy, normalised ACF and the trapezoidal correlation time ``T = int acf``."""
    u = series.values - series.values.mean()
    n = u.size
    energy = float(np.mean(np.abs(u) ** 2))
    if not energy > 0:
        raise SignalError("zero energy")
    if max_lag is None:
        c = autocorrelation(u, n // 2) / energy
        below = np.nonzero(np.abs(c) < ACF_CUTOFF)[0]
        if below.size == 0:
            raise SignalError("ACF never drops below the cutoff; pass max_lag explicitly")
        L = int(below[0])
    else:
        L = int(round(max_lag / series.dt))
        if not 1 <= L < n:
            raise SignalError(f"max_lag={max_lag} gives {L} lags for a series of {n} samples")
    if n < 20 * L:
        warnings.warn(f"series of {n} samples is short for {L} ACF lags", RuntimeWarning, stacklevel=2)
    acf = autocorrelation(u, L) / energy
    acf[0] = 1.0
    T = complex(scipy.integrate.trapezoid(acf, dx=series.dt))
    return EquilibriumStats(energy, T, acf, series.dt, complex(series.values.mean()))


# ---------------------------------------------------------------------------
# files

def save_timeseries(series: TimeSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "re", "im"])
        for t, v in zip(series.times, series.values):
            w.writerow([repr(float(t)), repr(float(v.real)), repr(float(v.imag))])


def _check_uniform(times: np.ndarray, first_line: int) -> float:
    if times.size < 2:
        return 1.0
    dt = (times[-1] - times[0]) / (times.size - 1)
    if not dt > 0:
        raise SignalError("time column is not increasing")
    steps = np.diff(times)
    bad = np.nonzero(np.abs(steps - dt) > UNIFORM_RTOL * max(abs(dt), np.max(np.abs(times))))[0]
    if bad.size:
        i = int(bad[0]) + 1
        raise SignalError(f"nonuniform sampling at line {first_line + i}: step {float(steps[i - 1]):.6g}, expected {float(dt):.6g}")
    return float(dt)


def load_timeseries(path, format: str = "auto") -> TimeSeries:
    """Read ``t,re,im`` or ``date,rmm1,rmm2`` CSV (daily rows map to ``dt = 12/365``)."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SignalError(f"{path}: empty file")
    header = [h.strip().lower() for h in rows[0]]
    if format == "auto":
        if header[:3] == ["t", "re", "im"]:
            format = "complex"
        elif header[:3] == ["date", "rmm1", "rmm2"]:
            format = "rmm"
        else:
            raise SignalError(f"{path}: unrecognised header {rows[0]}")
    body = [(i + 2, r) for i, r in enumerate(rows[1:]) if r and any(c.strip() for c in r)]
    if not body:
        raise SignalError(f"{path}: no samples")
    if format == "complex":
        return _load_complex(path, body)
    if format == "rmm":
        return _load_rmm(path, body)
    raise SignalError(f"unknown format {format!r}")


def _load_complex(path, body) -> TimeSeries:
    t = np.empty(len(body))
    v = np.empty(len(body), dtype=complex)
    for k, (line, row) in enumerate(body):
        try:
            if len(row) != 3:
                raise ValueError(f"expected 3 fields, got {len(row)}")
            t[k] = float(row[0])
            v[k] = complex(float(row[1]), float(row[2]))
        except ValueError as exc:
            raise SignalError(f"{path}: malformed row at line {line}: {exc}") from None
    dt = _check_uniform(t, body[0][0])
    return TimeSeries(v, dt, float(t[0]))


def _load_rmm(path, body) -> TimeSeries:
    v = np.empty(len(body), dtype=complex)
    prev = None
    for k, (line, row) in enumerate(body):
        try:
            if len(row) < 3:
                raise ValueError(f"expected 3 fields, got {len(row)}")
            day = _dt.date.fromisoformat(row[0].strip())
            v[k] = complex(float(row[1]), float(row[2]))
        except ValueError as exc:
            raise SignalError(f"{path}: malformed row at line {line}: {exc}") from None
        if prev is not None and (day - prev).days != 1:
            raise SignalError(f"{path}: date gap at line {line}: {prev.isoformat()} -> {day.isoformat()}")
        prev = day
    return TimeSeries(v, RMM_DT, 0.0)


def save_field(series: FieldSeries, path) -> None:
    J = series.values.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{j + 1}" for j in range(J)])
        for t, row in zip(series.times, series.values):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in row])


def load_field(path) -> FieldSeries:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0].strip().lower() != "t":
        raise SignalError(f"{path}: expected a 't,x1,...,xJ' header")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise SignalError(f"{path}: malformed row: {exc}") from None
    dt = _check_uniform(data[:, 0], 2)
    return FieldSeries(data[:, 1:], dt, float(data[0, 0]))


__all__ = ["RMM_DT", "SignalError", "Lorenz96Config", "FieldSeries", "EquilibriumStats",
           "lorenz96_rhs", "integrate_lorenz96", "fourier_mode", "simulate_ou",
           "autocorrelation", "equilibrium_stats", "save_timeseries", "load_timeseries",
           "save_field", "load_field", "ModelError"]
