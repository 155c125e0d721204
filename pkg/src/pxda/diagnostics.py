"""Trace-based estimators: batch means, autocovariance, and comparison tables.

These observe from simulation output what the spectra module certifies
exactly, so the two routes can cross-validate.  Estimates never prove an
ordering; the comparison table flags a difference only when it clears three
combined standard errors, and says nothing stronger than the data supports.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "Trace",
    "VarianceEstimate",
    "ComparisonTable",
    "batch_means_variance",
    "autocovariance",
    "lag_one_autocorrelation",
    "compare_traces",
    "write_trace",
    "read_trace",
]


@dataclass(frozen=True)
class Trace:
    """A stored chain run with the metadata needed to interpret it.

    ``values`` has one row per kept iterate (thinning already applied) and
    one column per state coordinate.  ``burn_in`` counts leading rows that
    estimators drop; it is kept as data so the same trace object can be
    re-analyzed with a different cutoff.
    """

    values: np.ndarray
    seed: int
    kernel_id: str
    burn_in: int = 0
    thin: int = 1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] == 0:
            raise ValueError("trace values must be a nonempty (n, d) array")
        if not (0 <= self.burn_in < v.shape[0]):
            raise ValueError("burn_in must be smaller than the trace length")
        if self.thin < 1:
            raise ValueError("thin must be at least one")
        object.__setattr__(self, "values", v)

    @property
    def kept(self) -> np.ndarray:
        """Post-burn-in rows."""
        return self.values[self.burn_in :]

    def __len__(self) -> int:
        return self.values.shape[0]


def _h_series(trace: Trace, h: Callable[[np.ndarray], np.ndarray] | None) -> np.ndarray:
    rows = trace.kept
    if h is None:
        return rows[:, 0].astype(float)
    out = np.asarray(h(rows), dtype=float)
    if out.shape != (rows.shape[0],):
        raise ValueError("h must map the (n, d) state block to an (n,) series")
    if not np.all(np.isfinite(out)):
        raise DomainError("h produced non-finite values")
    return out


@dataclass(frozen=True)
class VarianceEstimate:
    """Batch-means estimate of the asymptotic variance of a chain average.

    ``point`` is batch_size times the sample variance of the batch means;
    ``standard_error_of_mean`` is the implied standard error of the overall
    average, sqrt(point / n); ``variance_se`` is a jackknife-over-batches
    standard error of ``point`` itself.
    """

    point: float
    batches: int
    batch_size: int
    standard_error_of_mean: float
    variance_se: float
    mean: float

    def to_json_dict(self) -> dict:
        return {
            "point": self.point,
            "batches": self.batches,
            "batch_size": self.batch_size,
            "standard_error_of_mean": self.standard_error_of_mean,
            "variance_se": self.variance_se,
            "mean": self.mean,
        }


def _batch_means(series: np.ndarray) -> tuple[np.ndarray, int]:
    n = series.shape[0]
    nb = int(math.isqrt(n))
    if nb < 10:
        raise DomainError(f"need at least 10 batches, got {nb}; run the chain longer")
    size = n // nb
    used = series[: nb * size].reshape(nb, size)
    return used.mean(axis=1), size


def _estimate_from_series(series: np.ndarray) -> VarianceEstimate:
    if series.shape[0] < 100:
        raise DomainError("need at least 100 post-burn-in iterates")
    means, size = _batch_means(series)
    nb = means.shape[0]
    point = float(size * means.var(ddof=1))

    # jackknife over batches for the variance estimate's own spread
    tot = means.sum()
    totsq = float(means @ means)
    loo = np.empty(nb)
    for b in range(nb):
        s1 = tot - means[b]
        s2 = totsq - means[b] ** 2
        mloo = s1 / (nb - 1)
        varloo = (s2 - (nb - 1) * mloo**2) / (nb - 2)
        loo[b] = size * varloo
    jse = float(math.sqrt(max((nb - 1) / nb * np.sum((loo - loo.mean()) ** 2), 0.0)))

    n_used = nb * size
    return VarianceEstimate(
        point=point,
        batches=nb,
        batch_size=size,
        standard_error_of_mean=float(math.sqrt(max(point, 0.0) / n_used)),
        variance_se=jse,
        mean=float(series.mean()),
    )


def batch_means_variance(trace: Trace, h: Callable | None = None) -> VarianceEstimate:
    """Batch-means asymptotic variance of the h-averages of a trace.

    Splits the post-burn-in series into floor(sqrt(n)) equal batches,
    discarding the remainder tail, and returns batch_size times the sample
    variance of the batch means.  Needs at least 100 post-burn-in iterates
    and at least 10 batches.  ``h`` maps the (n, d) kept block to an (n,)
    series; None means the first coordinate.
    """
    return _estimate_from_series(_h_series(trace, h))


def autocovariance(trace: Trace, h: Callable | None = None, max_lag: int = 50) -> np.ndarray:
    """Biased autocovariance estimates of the h-series at lags 0..max_lag.

    Uses the divide-by-n convention on the centered series, which keeps the
    estimated autocovariance sequence positive semidefinite.  Requires
    max_lag below a tenth of the post-burn-in length so the high-lag
    estimates rest on enough pairs.
    """
    s = _h_series(trace, h)
    n = s.shape[0]
    if max_lag < 0:
        raise ValueError("max_lag must be nonnegative")
    if max_lag >= n / 10:
        raise DomainError("max_lag must be below a tenth of the post-burn-in length")
    a = s - s.mean()
    out = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        out[k] = a[: n - k] @ a[k:] / n
    return out


def lag_one_autocorrelation(trace: Trace, h: Callable | None = None) -> tuple[float, float]:
    """Lag-1 autocorrelation of the h-series with a batch-means standard error.

    Returns (estimate, standard error).  The error comes from treating the
    centered lag-1 products, scaled by the sample variance, as a series whose
    mean is the autocorrelation, and applying batch means to it.
    """
    s = _h_series(trace, h)
    if s.shape[0] < 101:
        raise DomainError("need at least 101 post-burn-in iterates")
    a = s - s.mean()
    var = float(a @ a / a.shape[0])
    # constant up to rounding: centering leaves only float noise
    tiny = (np.finfo(float).eps * (1.0 + abs(float(s.mean())))) ** 2
    if var <= 16 * tiny:
        raise DomainError("constant series has no autocorrelation")
    prods = a[:-1] * a[1:] / var
    est = _estimate_from_series(prods)
    return float(prods.mean()), est.standard_error_of_mean


@dataclass(frozen=True)
class ComparisonTable:
    """Per-trace estimates plus pairwise ordering calls at three combined SEs.

    ``rows`` holds one summary per trace in input order.  ``pairs`` holds one
    record per ordered pair (i, j) with i < j; its verdict is
    ``"first_smaller"`` or ``"second_smaller"`` only when the variance
    difference clears three combined jackknife standard errors, else
    ``"indistinguishable"``.  Noise alone therefore never reads as an
    ordering violation.
    """

    rows: list[dict]
    pairs: list[dict]

    def to_json_dict(self) -> dict:
        return {"traces": self.rows, "pairs": self.pairs}

    def to_text(self) -> str:
        lines = []
        hdr = f"{'kernel':<14} {'n_kept':>8} {'mean':>12} {'mean_se':>10} {'variance':>12} {'var_se':>10} {'batches':>7}"
        lines.append(hdr)
        lines.append("-" * len(hdr))
        for r in self.rows:
            lines.append(
                f"{r['kernel_id']:<14} {r['n_kept']:>8d} {r['mean']:>12.5f} "
                f"{r['mean_se']:>10.2e} {r['variance']:>12.5f} {r['variance_se']:>10.2e} "
                f"{r['batches']:>7d}"
            )
        lines.append("")
        for p in self.pairs:
            lines.append(
                f"{p['first']} vs {p['second']}: variance diff {p['variance_diff']:+.5f} "
                f"(3 x combined se = {3 * p['combined_se']:.5f}) -> {p['verdict']}"
            )
        return "\n".join(lines)


def compare_traces(traces: Sequence[Trace], h: Callable | None = None) -> ComparisonTable:
    """Batch-means comparison of several traces under one test function.

    Produces per-trace means and variances with their standard errors and a
    conservative pairwise comparison: a variance ordering is asserted only
    when it clears three combined jackknife standard errors.
    """
    if len(traces) < 2:
        raise ValueError("need at least two traces to compare")
    ests = [batch_means_variance(t, h) for t in traces]
    rows = []
    for t, e in zip(traces, ests):
        rows.append(
            {
                "kernel_id": t.kernel_id,
                "seed": t.seed,
                "n_kept": e.batches * e.batch_size,
                "mean": e.mean,
                "mean_se": e.standard_error_of_mean,
                "variance": e.point,
                "variance_se": e.variance_se,
                "batches": e.batches,
            }
        )
    pairs = []
    for i in range(len(traces)):
        for j in range(i + 1, len(traces)):
            diff = ests[i].point - ests[j].point
            comb = math.hypot(ests[i].variance_se, ests[j].variance_se)
            if diff < -3 * comb:
                verdict = "first_smaller"
            elif diff > 3 * comb:
                verdict = "second_smaller"
            else:
                verdict = "indistinguishable"
            pairs.append(
                {
                    "first": traces[i].kernel_id,
                    "second": traces[j].kernel_id,
                    "variance_diff": diff,
                    "combined_se": comb,
                    "verdict": verdict,
                }
            )
    return ComparisonTable(rows=rows, pairs=pairs)


def write_trace(trace: Trace, path, coord_names: Sequence[str] | None = None) -> None:
    """Write a trace as CSV with header ``iter,<coordinates>``.

    The iter column is the absolute iteration index of each kept row, that
    is the row index times the thinning step.  Burn-in rows are written too;
    the burn-in cutoff is an analysis choice, not a property of the file.
    """
    d = trace.values.shape[1]
    if coord_names is None:
        coord_names = [f"x{i}" for i in range(d)]
    if len(coord_names) != d:
        raise ValueError("need one coordinate name per column")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", *coord_names])
        for i, row in enumerate(trace.values):
            w.writerow([i * trace.thin, *(repr(float(v)) for v in row)])


def read_trace(path, kernel_id: str = "", seed: int = 0, burn_in: int = 0) -> Trace:
    """Read a trace written by ``write_trace``.

    The thinning step is recovered from the iter column; kernel identity,
    seed, and burn-in are not stored in the file and come from the caller.
    """
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if not header or header[0] != "iter":
            raise ValueError("not a trace file: first header field must be 'iter'")
        iters = []
        rows = []
        for rec in r:
            iters.append(int(rec[0]))
            rows.append([float(v) for v in rec[1:]])
    if not rows:
        raise ValueError("trace file has no data rows")
    thin = iters[1] - iters[0] if len(iters) > 1 else 1
    return Trace(
        values=np.asarray(rows, dtype=float),
        seed=seed,
        kernel_id=kernel_id or str(path),
        burn_in=burn_in,
        thin=max(thin, 1),
    )
