"""Shared numerical plumbing: constants, RNG streams, resampling helpers, fits."""

from __future__ import annotations

import numpy as np

# Critical coupling of the square-lattice Ising model, evaluated once from the
# exact expression (1/2)·log(1 + sqrt(2)) in extended precision.
try:  # pragma: no cover - mpmath is available in practice
    import mpmath as _mp

    _mp.mp.dps = 50
    BETA_C = float(_mp.log(1 + _mp.sqrt(2)) / 2)
except Exception:  # pragma: no cover
    BETA_C = 0.5 * float(np.log1p(np.sqrt(2.0)))

# Bond weight of the matching random-cluster model: p = 1 - exp(-2 beta).
P_C = float(1.0 - np.exp(-2.0 * BETA_C))  # = 2 - sqrt(2)

# Interface field renormalization exponent (one-point magnetization scaling).
FIELD_EXPONENT = 15.0 / 8.0
ONE_POINT_EXPONENT = 1.0 / 8.0


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; distinct (seed, stream) pairs are independent.

    Philox keys are 128-bit, so we pack the user seed in the low 64 bits and
    the stream index above it.  Chains in a parallel run each get their own
    stream id.
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    if not 0 <= stream < 2**63:
        raise ValueError("stream out of range")
    key = (int(seed) & (2**64 - 1)) + (int(stream) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def jackknife(values, statistic=np.mean):
    """Leave-one-out jackknife estimate and standard error of `statistic`."""
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n < 2:
        return float(statistic(arr)), float("inf")
    full = float(statistic(arr))
    idx = np.arange(n)
    loo = np.array([statistic(arr[idx != i]) for i in range(n)], dtype=float)
    var = (n - 1) / n * np.sum((loo - loo.mean()) ** 2)
    return full, float(np.sqrt(var))


def jackknife_mean(values):
    """Fast jackknife for the plain mean (equals the usual stderr)."""
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n < 2:
        return float(arr.mean()) if n else float("nan"), float("inf")
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(n))


def jackknife_ratio(num, den):
    """Jackknife for mean(num)/mean(den) over paired samples."""
    a = np.asarray(num, dtype=float)
    b = np.asarray(den, dtype=float)
    n = a.size
    full = a.mean() / b.mean()
    if n < 2:
        return float(full), float("inf")
    sa, sb = a.sum(), b.sum()
    loo = (sa - a) / (sb - b)
    var = (n - 1) / n * np.sum((loo - loo.mean()) ** 2)
    return float(full), float(np.sqrt(var))


def batch_means_autocorr(series, n_batches: int = 20) -> float:
    """Integrated autocorrelation time estimated by batch means.

    tau ≈ (batch_size · var(batch means)) / var(series); clipped to >= 0.5.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 2 * n_batches:
        return 1.0
    bs = n // n_batches
    trimmed = x[: bs * n_batches].reshape(n_batches, bs)
    vb = trimmed.mean(axis=1).var(ddof=1)
    v = x.var(ddof=1)
    if v <= 0:
        return 0.5
    return float(max(0.5, bs * vb / v))


def wilson_interval(successes: int, trials: int, z: float = 1.0):
    """Wilson score interval for a binomial proportion (z standard errors)."""
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z**2 / trials
    center = (p + z**2 / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2)) / denom
    return float(center - half), float(center + half)


def loglog_fit(x, y, y_err=None):
    """Least-squares line through (log x, log y); returns slope, intercept, slope_err.

    When y_err is given the fit is weighted and the slope error is propagated
    from those errors; otherwise the residual-based OLS error is reported.
    """
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if y_err is not None:
        w = (np.asarray(y, dtype=float) / np.asarray(y_err, dtype=float)) ** 2
    else:
        w = np.ones_like(lx)
    W = w.sum()
    mx = (w * lx).sum() / W
    my = (w * ly).sum() / W
    sxx = (w * (lx - mx) ** 2).sum()
    slope = (w * (lx - mx) * (ly - my)).sum() / sxx
    intercept = my - slope * mx
    if y_err is not None:
        slope_err = np.sqrt(1.0 / sxx)
    else:
        resid = ly - (intercept + slope * lx)
        dof = max(1, lx.size - 2)
        slope_err = np.sqrt((resid**2).sum() / dof / ((lx - mx) ** 2).sum())
    return float(slope), float(intercept), float(slope_err)


def pack_ij(ij: np.ndarray) -> np.ndarray:
    """Encode integer vertex pairs as sortable int64 keys."""
    ij = np.asarray(ij, dtype=np.int64)
    return ((ij[..., 0] + 2**20) << 21) | (ij[..., 1] + 2**20)


def unpack_ij(keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    i = (keys >> 21) - 2**20
    j = (keys & ((1 << 21) - 1)) - 2**20
    return np.stack([i, j], axis=-1)
