"""Augmented models: a joint density f(x, y) with both conditionals samplable.

Two concrete models ship with the package.  ``LaplaceToyModel`` pairs a
standard Laplace marginal on y with a unit-variance normal conditional for x;
everything about it is computable in closed form, which makes it the test bed
for the kernel certificates.  ``ProbitModel`` is the latent-variable probit
regression sampler: x is the coefficient vector, y the latent truncated
normals, and the flat-prior conditionals are the classic two-block pair.

Models may additionally report how their y-marginal responds to scaling,
via ``fy_scale_decay``; the group-move kernels use that structure for exact
gamma draws instead of generic grid inversion.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from .errors import DesignError, DomainError

__all__ = [
    "AugmentedModel",
    "LaplaceToyModel",
    "ProbitModel",
    "ScaleDecay",
    "load_probit_data",
    "save_probit_data",
    "truncated_normal_positive",
]

_LOG2 = math.log(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Standardized truncation points beyond this use the exponential-proposal
# rejection sampler; below it the inverse CDF is accurate and cheaper.
_TAIL_THRESHOLD = 5.0


def truncated_normal_positive(mu, rng, size=None):
    """Draw from N(mu, 1) conditioned on being positive.

    Exact in both regimes: inverse-CDF sampling through the complementary
    normal CDF while the standardized truncation point ``-mu`` is moderate,
    and an exponential-proposal rejection sampler once the truncation point
    exceeds the mean by more than 5 standard deviations, where the inverse
    CDF would be evaluated deep in a saturated tail.

    Parameters
    ----------
    mu : float or array_like
        Mean(s) of the underlying normal.
    rng : numpy.random.Generator
    size : int, optional
        Number of draws per entry of ``mu`` when ``mu`` is scalar.  With
        array ``mu`` leave it unset; one draw per entry is returned.

    Returns
    -------
    float or numpy.ndarray
    """
    scalar_in = np.isscalar(mu) or np.ndim(mu) == 0
    if size is not None:
        if not scalar_in:
            raise ValueError("size is only meaningful with scalar mu")
        mu_arr = np.full(int(size), float(mu))
        scalar_out = False
    else:
        mu_arr = np.atleast_1d(np.asarray(mu, dtype=float)).astype(float)
        scalar_out = scalar_in

    alpha = -mu_arr  # draw Z ~ N(0,1) | Z > alpha, return mu + Z
    z = np.empty_like(alpha)

    bulk = alpha <= _TAIL_THRESHOLD
    if np.any(bulk):
        a = alpha[bulk]
        u = rng.random(a.shape)
        z[bulk] = -ndtri(u * ndtr(-a))

    tail = ~bulk
    if np.any(tail):
        a = alpha[tail]
        lam = 0.5 * (a + np.sqrt(a * a + 4.0))
        out = np.empty_like(a)
        todo = np.ones(a.shape, dtype=bool)
        while np.any(todo):
            k = int(todo.sum())
            prop = a[todo] + rng.exponential(1.0, size=k) / lam[todo]
            accept = rng.random(k) < np.exp(-0.5 * (prop - lam[todo]) ** 2)
            hit = np.flatnonzero(todo)[accept]
            out[hit] = prop[accept]
            todo[hit] = False
        z[tail] = out

    result = mu_arr + z
    return float(result[0]) if scalar_out else result


@dataclass(frozen=True)
class ScaleDecay:
    """How the y-marginal decays along scaling orbits.

    Declares that f_Y(g*y) is proportional (within the orbit of y) to
    exp(-rate * g**power) for g > 0.  ``power`` is 1 for exponential-tailed
    marginals and 2 for Gaussian-tailed ones; ``rate`` depends on y.
    """

    power: int
    rate: float

    def __post_init__(self):
        if self.power not in (1, 2):
            raise ValueError("power must be 1 or 2")
        if not (math.isfinite(self.rate) and self.rate >= 0.0):
            raise DomainError(f"scale-decay rate must be finite and nonnegative, got {self.rate!r}")


class AugmentedModel(ABC):
    """Joint density f(x, y) with samplable conditionals in both directions."""

    dim_x: int
    dim_y: int

    @abstractmethod
    def log_joint(self, x, y) -> float:
        """Log of f(x, y), up to an additive constant."""

    @abstractmethod
    def sample_y_given_x(self, x, rng):
        """One draw from the conditional of y given x."""

    @abstractmethod
    def sample_x_given_y(self, y, rng):
        """One draw from the conditional of x given y."""

    @abstractmethod
    def log_fy_unnorm(self, y) -> float:
        """Log of the y-marginal, up to an additive constant."""

    def sample_fy(self, rng):
        """Exact draw from the y-marginal, where the model admits one."""
        raise NotImplementedError(f"{type(self).__name__} has no exact y-marginal sampler")

    def fy_scale_decay(self, y) -> ScaleDecay | None:
        """Scaling profile of the y-marginal, or None if not available."""
        return None


class LaplaceToyModel(AugmentedModel):
    """Standard Laplace y-marginal with x | y ~ N(y, 1).

    The joint is f(x, y) = (1/2) exp(-|y|) * phi(x - y), fully normalized.
    The reverse conditional y | x is a two-component mixture of truncated
    normals: N(x - 1, 1) restricted to the positive half-line and
    N(x + 1, 1) restricted to the negative one, with weights proportional
    to exp(-x) Phi(x - 1) and exp(x) Phi(-x - 1).
    """

    dim_x = 1
    dim_y = 1

    def log_joint(self, x, y) -> float:
        x, y = float(x), float(y)
        return -abs(y) - _LOG2 - 0.5 * (x - y) ** 2 - _LOG_SQRT_2PI

    def log_fy_unnorm(self, y) -> float:
        return -abs(float(y)) - _LOG2

    def _log_side_weights(self, x: float):
        # log masses of the positive and negative mixture components
        return -x + log_ndtr(x - 1.0), x + log_ndtr(-x - 1.0)

    def prob_y_positive(self, x: float) -> float:
        """Probability that y > 0 under the conditional at x."""
        lp, ln = self._log_side_weights(float(x))
        return float(1.0 / (1.0 + math.exp(ln - lp)))

    def sample_y_given_x(self, x, rng) -> float:
        x = float(x)
        if rng.random() < self.prob_y_positive(x):
            return truncated_normal_positive(x - 1.0, rng)
        return -truncated_normal_positive(-(x + 1.0), rng)

    def sample_y_given_x_batch(self, x, size: int, rng) -> np.ndarray:
        """Vectorized i.i.d. draws from the conditional at a fixed x."""
        x = float(x)
        pos = rng.random(size) < self.prob_y_positive(x)
        out = np.empty(size)
        out[pos] = truncated_normal_positive(np.full(int(pos.sum()), x - 1.0), rng)
        out[~pos] = -truncated_normal_positive(np.full(int((~pos).sum()), -(x + 1.0)), rng)
        return out

    def sample_x_given_y(self, y, rng) -> float:
        return float(rng.normal(float(y), 1.0))

    def sample_fy(self, rng) -> float:
        return float(rng.laplace(0.0, 1.0))

    def fy_scale_decay(self, y) -> ScaleDecay:
        return ScaleDecay(power=1, rate=abs(float(y)))


class ProbitModel(AugmentedModel):
    """Flat-prior probit regression as a two-block augmented model.

    x is the coefficient vector beta (length p); y is the vector of n latent
    variables, one per observation, constrained in sign by the response:
    y_i > 0 where v_i = 1 and y_i <= 0 where v_i = 0.  The conditionals are

        y_i | beta, v  ~  N(z_i' beta, 1) restricted to its half-line,
        beta | y       ~  N((Z'Z)^{-1} Z'y, (Z'Z)^{-1}),

    and the y-marginal is proportional to exp(-y'My/2) on the sign region,
    where M = I - Z (Z'Z)^{-1} Z' is the residual projector of the design.

    Parameters
    ----------
    Z : (n, p) array_like
        Design matrix, full column rank.
    v : (n,) array_like
        Binary responses, entries in {0, 1}.
    """

    def __init__(self, Z, v):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        v = np.asarray(v)
        n, p = Z.shape
        if v.shape != (n,):
            raise DesignError(f"response length {v.shape} does not match {n} design rows")
        if not np.isin(v, (0, 1)).all():
            raise DesignError("responses must be coded 0/1")
        if not np.all(np.isfinite(Z)):
            raise DesignError("design matrix contains non-finite entries")
        if n < p:
            raise DesignError(f"need at least as many observations as coefficients, got n={n} < p={p}")
        sv = np.linalg.svd(Z, compute_uv=False)
        if sv[-1] <= 1e-10 * sv[0]:
            raise DesignError("design matrix is rank deficient")

        self.Z = Z
        self.v = v.astype(int)
        self.dim_x = p
        self.dim_y = n
        self._signs = 2.0 * self.v - 1.0
        ztz = Z.T @ Z
        self._coef_cov = np.linalg.inv(ztz)
        self._coef_chol = np.linalg.cholesky(self._coef_cov)
        self._proj = np.eye(n) - Z @ self._coef_cov @ Z.T

    @property
    def residual_projector(self) -> np.ndarray:
        """M = I - Z (Z'Z)^{-1} Z'; symmetric, idempotent, annihilates the design."""
        return self._proj

    def _in_region(self, y: np.ndarray) -> bool:
        return bool(np.all(self._signs * y >= 0.0))

    def log_joint(self, x, y) -> float:
        x = np.asarray(x, dtype=float).reshape(self.dim_x)
        y = np.asarray(y, dtype=float).reshape(self.dim_y)
        if not self._in_region(y):
            return -math.inf
        r = y - self.Z @ x
        return -0.5 * float(r @ r)

    def log_fy_unnorm(self, y) -> float:
        y = np.asarray(y, dtype=float).reshape(self.dim_y)
        if not self._in_region(y):
            return -math.inf
        return -0.5 * float(y @ self._proj @ y)

    def sample_y_given_x(self, x, rng) -> np.ndarray:
        mu = self.Z @ np.asarray(x, dtype=float).reshape(self.dim_x)
        # y_i = s_i * t_i with t_i ~ N(s_i mu_i, 1) | t_i > 0 lands in the sign region
        return self._signs * truncated_normal_positive(self._signs * mu, rng)

    def sample_x_given_y(self, y, rng) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(self.dim_y)
        mean = self._coef_cov @ (self.Z.T @ y)
        return mean + self._coef_chol @ rng.standard_normal(self.dim_x)

    def fy_scale_decay(self, y) -> ScaleDecay:
        y = np.asarray(y, dtype=float).reshape(self.dim_y)
        rate = 0.5 * float(y @ self._proj @ y)
        return ScaleDecay(power=2, rate=max(rate, 0.0))

    @classmethod
    def from_csv(cls, path) -> "ProbitModel":
        """Build the model from a data file written by ``save_probit_data``."""
        Z, v = load_probit_data(path)
        return cls(Z, v)


def save_probit_data(path, Z, v) -> None:
    """Write a probit dataset as CSV with header ``v,z0,z1,...``.

    One row per observation, the binary response first and the covariates
    after it.  ``load_probit_data`` reads the same format back.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    v = np.asarray(v, dtype=int).reshape(Z.shape[0])
    header = ",".join(["v", *(f"z{j}" for j in range(Z.shape[1]))])
    body = np.column_stack([v.astype(float), Z])
    fmt = ["%d"] + ["%.17g"] * Z.shape[1]
    np.savetxt(path, body, fmt=fmt, delimiter=",", header=header, comments="")


def load_probit_data(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``v,z0,z1,...`` CSV back into a (design, response) pair."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "v":
            raise DesignError("probit data file must start with a 'v,z0,...' header row")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    if body.shape[1] != len(header):
        raise DesignError("probit data row width does not match the header")
    return body[:, 1:], body[:, 0].astype(int)
