"""Poisson threshold statistics: regularized incomplete Gamma, CDFs with the
discrete/non-integer threshold rule, and exceedance probabilities for the
maximum and the sum of independent Poisson observations.

Counts are integers, but decision-feedback receivers shift thresholds by
real-valued expected-interference terms, so every routine here distinguishes
integer thresholds (``P{X < a} = P{X <= a - 1}``) from non-integer ones
(``P{X < a} = P{X <= floor(a)}``).  A threshold counts as an integer when it
is within ``INTEGER_TOL`` of one, which guards against float round-off in
accumulated interference sums.
"""

import numpy as np
from scipy.special import gammaincc, gammaln

__all__ = [
    "INTEGER_TOL",
    "regularized_upper_gamma",
    "poisson_cdf",
    "poisson_prob_below",
    "max_exceed_prob",
    "sum_exceed_prob",
    "poisson_cdf_table",
    "max_below_grid",
    "sum_below_grid",
]

INTEGER_TOL = 1e-9


def regularized_upper_gamma(s, x):
    """Regularized upper incomplete Gamma ``Q(s, x) = Gamma(s, x) / Gamma(s)``.

    For integer ``s >= 1`` this equals ``exp(-x) * sum_{i<s} x^i / i!``, the
    survival-side tail used by all Poisson CDFs in this package.  Rejects
    ``s <= 0`` and ``x < 0``.
    """
    s_arr = np.asarray(s, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if np.any(s_arr <= 0):
        raise ValueError("order s must be strictly positive")
    if np.any(x_arr < 0):
        raise ValueError("argument x must be nonnegative")
    out = gammaincc(s_arr, x_arr)
    if np.isscalar(s) and np.isscalar(x):
        return float(out)
    return out


def _is_near_integer(a):
    return np.abs(a - np.rint(a)) < INTEGER_TOL


def poisson_cdf(threshold, mean):
    """``P{X <= threshold}`` for ``X ~ Poisson(mean)``.

    Non-integer thresholds follow the floor rule (``P{X <= 2.5} = P{X <= 2}``)
    and negative thresholds give 0.  Accepts scalars or broadcastable arrays;
    rejects negative means.
    """
    a = np.asarray(threshold, dtype=float)
    mu = np.asarray(mean, dtype=float)
    if np.any(mu < 0):
        raise ValueError("mean must be nonnegative")
    a, mu = np.broadcast_arrays(a, mu)
    order = np.where(_is_near_integer(a), np.rint(a), np.floor(a)) + 1.0
    out = np.zeros(a.shape)
    valid = order >= 1.0
    if np.any(valid):
        out[valid] = gammaincc(order[valid], mu[valid])
    if np.isscalar(threshold) and np.isscalar(mean):
        return float(out)
    return out


def poisson_prob_below(threshold, mean):
    """``P{X < threshold}`` for ``X ~ Poisson(mean)``.

    Applies the discrete/non-integer rule: strict inequality drops one count
    only when the threshold is (numerically) an integer.
    """
    a = np.asarray(threshold, dtype=float)
    mu = np.asarray(mean, dtype=float)
    if np.any(mu < 0):
        raise ValueError("mean must be nonnegative")
    a, mu = np.broadcast_arrays(a, mu)
    near = _is_near_integer(a)
    order = np.where(near, np.rint(a), np.floor(a) + 1.0)
    out = np.zeros(a.shape)
    valid = order >= 1.0
    if np.any(valid):
        out[valid] = gammaincc(order[valid], mu[valid])
    if np.isscalar(threshold) and np.isscalar(mean):
        return float(out)
    return out


def _check_means_shifts(means, isi_shifts):
    means = np.asarray(means, dtype=float)
    shifts = np.asarray(isi_shifts, dtype=float)
    if means.ndim != 1 or shifts.ndim != 1 or means.size != shifts.size:
        raise ValueError("means and isi_shifts must be 1-D and equally long")
    if means.size < 1:
        raise ValueError("at least one observation is required")
    if np.any(means < 0) or np.any(shifts < 0):
        raise ValueError("means and isi_shifts must be nonnegative")
    return means, shifts


def max_exceed_prob(means, isi_shifts, tau):
    """``P{max_j (y_j - isi_j) >= tau}`` for independent ``y_j ~ Poisson``.

    Equals ``1 - prod_j P{y_j < tau + isi_shifts[j]}`` with the per-factor
    discrete/non-integer rule.  With all shifts zero this is the plain
    peak-detector exceedance ``1 - P{max y_j <= tau - 1}`` for integer
    ``tau``.  ``tau`` may be a scalar or a 1-D grid (vectorized).
    """
    means, shifts = _check_means_shifts(means, isi_shifts)
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    factors = poisson_prob_below(tau_arr[:, None] + shifts[None, :], means[None, :])
    out = 1.0 - np.prod(factors, axis=1)
    if np.isscalar(tau):
        return float(out[0])
    return out


def sum_exceed_prob(means, total_isi, tau):
    """``P{sum_j y_j - total_isi >= tau}`` for independent ``y_j ~ Poisson``.

    The sum pools into a single Poisson with mean ``sum(means)``; the
    threshold shifts to ``tau + total_isi`` and follows the same
    discrete/non-integer rule.
    """
    means = np.asarray(means, dtype=float)
    if means.ndim != 1 or means.size < 1:
        raise ValueError("means must be a nonempty 1-D sequence")
    if np.any(means < 0):
        raise ValueError("means must be nonnegative")
    if total_isi < 0:
        raise ValueError("total_isi must be nonnegative")
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    out = 1.0 - poisson_prob_below(tau_arr + total_isi, float(means.sum()))
    if np.isscalar(tau):
        return float(out[0])
    return out


def poisson_cdf_table(means, length: int) -> np.ndarray:
    """Tabulate ``P{X <= t}`` for ``t = 0..length-1`` for each mean in ``means``.

    Returns an array of shape ``(len(means), length)``.  Built from the
    cumulative pmf ``exp(-mu + t*log(mu) - log(t!))``, which stays exact in
    double precision for the desk-scale means used here.
    """
    mu = np.asarray(means, dtype=float).reshape(-1)
    if np.any(mu < 0):
        raise ValueError("mean must be nonnegative")
    t = np.arange(length, dtype=float)
    log_fact = gammaln(t + 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pmf = -mu[:, None] + t[None, :] * np.log(mu[:, None]) - log_fact[None, :]
    pmf = np.exp(log_pmf)
    pmf[mu == 0, :] = 0.0
    pmf[mu == 0, 0] = 1.0
    table = np.cumsum(pmf, axis=1)
    np.minimum(table, 1.0, out=table)
    return table


def _shift_offsets(shifts: np.ndarray) -> np.ndarray:
    """Integer column offsets realising the threshold rule on an integer grid.

    For integer grid point ``tau`` and shift ``s``, ``P{y < tau + s}`` equals
    the CDF table entry at ``tau + off`` where ``off = s - 1`` when ``s`` is
    (numerically) an integer and ``floor(s)`` otherwise.
    """
    near = _is_near_integer(shifts)
    return np.where(near, np.rint(shifts) - 1, np.floor(shifts)).astype(np.int64)


def max_below_grid(means: np.ndarray, shifts: np.ndarray, n_thresholds: int,
                   chunk_cells: int = 4_000_000) -> np.ndarray:
    """``P{max_j (y_j - shifts[., j]) < tau}`` on the grid ``tau = 0..n-1``.

    ``means`` and ``shifts`` have shape ``(rows, samples)``; one row is one
    decision window.  Returns ``(rows, n_thresholds)``.  This is the batched
    integer-grid counterpart of :func:`max_exceed_prob` (below-probability,
    not exceedance), evaluated through shared CDF tables for speed.
    """
    means = np.asarray(means, dtype=float)
    shifts = np.asarray(shifts, dtype=float)
    if means.shape != shifts.shape or means.ndim != 2:
        raise ValueError("means and shifts must share a 2-D shape")
    rows, m = means.shape
    offsets = _shift_offsets(shifts)
    table_len = n_thresholds + int(offsets.max(initial=0)) + 1
    out = np.ones((rows, n_thresholds))
    tau_idx = np.arange(n_thresholds)
    row_chunk = max(1, chunk_cells // max(1, m * table_len))
    for start in range(0, rows, row_chunk):
        stop = min(rows, start + row_chunk)
        block = slice(start, stop)
        tables = poisson_cdf_table(means[block].reshape(-1), table_len)
        tables = tables.reshape(stop - start, m, table_len)
        idx = tau_idx[None, None, :] + offsets[block][:, :, None]
        factors = np.where(
            idx >= 0,
            np.take_along_axis(tables, np.maximum(idx, 0), axis=2),
            0.0,
        )
        out[block] = np.prod(factors, axis=1)
    return out


def sum_below_grid(pooled_means: np.ndarray, pooled_shifts: np.ndarray,
                   n_thresholds: int) -> np.ndarray:
    """``P{sum_j y_j - pooled_shift < tau}`` on the grid ``tau = 0..n-1``.

    ``pooled_means`` and ``pooled_shifts`` are 1-D (one entry per decision
    window); returns ``(rows, n_thresholds)``.
    """
    pooled_means = np.asarray(pooled_means, dtype=float).reshape(-1, 1)
    pooled_shifts = np.asarray(pooled_shifts, dtype=float).reshape(-1, 1)
    return max_below_grid(pooled_means, pooled_shifts, n_thresholds)
