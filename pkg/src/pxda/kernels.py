"""Transition kernels: the two-block sampler and its group-move variants.

The basic kernel alternates the two conditional draws of an augmented model:

    da_step:       y ~ f(y | x'),  then  x ~ f(x | y).

A sandwich kernel inserts an extra y-move between those draws, taken from a
rule that leaves the y-marginal invariant:

    sandwich_step: y ~ f(y | x'),  y' = rule(y),  x ~ f(x | y').

Two rule families are built in, both driven by a group acting on the
augmentation space.  ``QrRule`` draws a group element from a fixed probability
measure r, moves to the scaled-down point, and climbs back with an element
drawn from the weight density w(g; z) proportional to r(g) j(g, z) f_Y(g z).
``HaarRule`` draws the climbing element against the group's left-invariant
measure instead, with weight f_Y(g y) j(g, y); its normalizer m(y) can
diverge on a null set of y, where the rule falls back to an exact y-marginal
draw when the model provides one.

Reproducibility: every step consumes the supplied generator in a fixed,
documented order (version 1 of the draw order).  ``da_step`` draws y then x;
``sandwich_step`` draws y, then whatever the rule consumes, then x; the group
rules consume (r-draw, weight-draw) and (weight-draw) respectively; the joint
chain consumes (y-draw, weight-draw, x-draw).  The identity rule consumes
nothing, so a sandwich with the identity rule reproduces ``da_step`` draw for
draw under a shared seed.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import DomainError, NullSetError
from .group_action import GroupAction, IdentityAction, MultiplicativeAction
from .models import AugmentedModel

__all__ = [
    "RMeasure",
    "ExponentialRMeasure",
    "GammaRootRMeasure",
    "PowerForm",
    "YUpdateRule",
    "IdentityRule",
    "QrRule",
    "HaarRule",
    "ComposedRule",
    "compose_rule",
    "da_step",
    "sandwich_step",
    "qr_ystep",
    "haar_ystep",
    "joint_xg_step",
    "sample_group_weight",
    "sample_haar_weight",
    "group_weight_mass",
    "haar_weight_mass",
    "run_sandwich_chain",
    "run_joint_chain",
]

# Resolution of the generic grid inverse-CDF sampler.
_GRID_CELLS = 4096
# Log-density drop that counts as a negligible tail when bracketing support.
_LOG_DROP = 46.0  # exp(-46) ~ 1e-20


@dataclass(frozen=True)
class PowerForm:
    """Density shape g**(a-1) * exp(-b * g**power) on the positive half-line."""

    shape_exponent: float
    decay_rate: float
    power: int

    def __post_init__(self):
        if self.shape_exponent <= 0 or self.decay_rate <= 0 or self.power not in (1, 2):
            raise ValueError("need shape_exponent > 0, decay_rate > 0, power in {1, 2}")


class RMeasure(ABC):
    """A probability measure on the multiplicative group's coordinate (0, inf)."""

    @abstractmethod
    def sample(self, rng) -> float:
        """One draw from the measure."""

    @abstractmethod
    def log_density(self, g: float) -> float:
        """Log density w.r.t. Lebesgue measure on (0, inf)."""

    def power_form(self) -> PowerForm | None:
        """Structural form enabling conjugate weight draws, if any."""
        return None


class ExponentialRMeasure(RMeasure):
    """Exponential measure with the given rate on the group coordinate."""

    def __init__(self, rate: float = 1.0):
        if not (math.isfinite(rate) and rate > 0):
            raise ValueError("rate must be finite and positive")
        self.rate = float(rate)

    def sample(self, rng) -> float:
        return float(rng.exponential(1.0 / self.rate))

    def log_density(self, g: float) -> float:
        g = float(g)
        if g <= 0:
            return -math.inf
        return math.log(self.rate) - self.rate * g

    def power_form(self) -> PowerForm:
        return PowerForm(shape_exponent=1.0, decay_rate=self.rate, power=1)

    def __repr__(self):
        return f"ExponentialRMeasure(rate={self.rate})"


class GammaRootRMeasure(RMeasure):
    """Measure with density proportional to g**(a-1) * exp(-b * g**2).

    Equivalently the law of sqrt(S) with S ~ Gamma(a/2, rate=b); the natural
    conjugate family for models whose y-marginal has Gaussian scale decay.
    """

    def __init__(self, a: float = 1.0, b: float = 0.5):
        if not (math.isfinite(a) and a > 0 and math.isfinite(b) and b > 0):
            raise ValueError("shape a and rate b must be finite and positive")
        self.a = float(a)
        self.b = float(b)
        self._log_norm = math.log(2.0) + 0.5 * a * math.log(b) - gammaln(0.5 * a)

    def sample(self, rng) -> float:
        return float(math.sqrt(rng.gamma(0.5 * self.a, 1.0 / self.b)))

    def log_density(self, g: float) -> float:
        g = float(g)
        if g <= 0:
            return -math.inf
        return self._log_norm + (self.a - 1.0) * math.log(g) - self.b * g * g

    def power_form(self) -> PowerForm:
        return PowerForm(shape_exponent=self.a, decay_rate=self.b, power=2)

    def __repr__(self):
        return f"GammaRootRMeasure(a={self.a}, b={self.b})"


# ---------------------------------------------------------------------------
# group-element draws from the weight densities


def _conjugate_draw(shape: float, rate: float, power: int, rng) -> float:
    s = rng.gamma(shape, 1.0 / rate)
    return float(s ** (1.0 / power))


def _grid_draw_log_coordinate(log_target, rng) -> float:
    """Inverse-CDF draw from exp(log_target(g)) dg via a bracketed log-space grid.

    Scans the group coordinate in log space, brackets the region where the
    integrand is within exp(-_LOG_DROP) of its peak, then inverts the CDF of
    a fixed-resolution grid.  Raises ``NullSetError`` when no integrable
    bracket exists (mass diverging toward either end of the coordinate).
    """

    def lp(u: np.ndarray) -> np.ndarray:
        out = np.array([log_target(math.exp(t)) + t for t in np.atleast_1d(u)])
        return out

    coarse = np.linspace(-40.0, 40.0, 161)
    vals = lp(coarse)
    if not np.any(np.isfinite(vals)):
        raise DomainError("weight density vanished everywhere on the scan window")
    peak = float(np.max(vals[np.isfinite(vals)]))

    lo = float(coarse[int(np.argmax(vals))])
    hi = lo
    step = 0.5
    while lp(np.array([lo]))[0] > peak - _LOG_DROP:
        lo -= step
        step *= 1.5
        if lo < -700.0:
            raise NullSetError("weight mass does not decay toward zero scale")
    step = 0.5
    while lp(np.array([hi]))[0] > peak - _LOG_DROP:
        hi += step
        step *= 1.5
        if hi > 700.0:
            raise NullSetError("weight mass does not decay toward infinite scale")

    edges = np.linspace(lo, hi, _GRID_CELLS + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    w = np.exp(lp(mid) - peak)
    total = float(w.sum())
    if not (math.isfinite(total) and total > 0):
        raise DomainError("weight density is not normalizable on the bracket")
    cdf = np.cumsum(w) / total
    u = rng.random()
    k = int(np.searchsorted(cdf, u))
    # uniform placement within the selected cell
    left = cdf[k - 1] if k > 0 else 0.0
    frac = (u - left) / max(cdf[k] - left, 1e-300)
    return float(math.exp(edges[k] + frac * (edges[k + 1] - edges[k])))


def sample_group_weight(model: AugmentedModel, action: GroupAction, r: RMeasure, z, rng) -> float:
    """Draw g from the weight density proportional to r(g) j(g, z) f_Y(g z).

    Uses an exact gamma draw when the model's scale decay and the measure's
    power form share the same power; otherwise falls back to grid inversion
    on the log coordinate.  Raises ``DomainError`` if the weight cannot be
    normalized.
    """
    if isinstance(action, IdentityAction):
        return action.identity
    if not isinstance(action, MultiplicativeAction):
        raise NotImplementedError("weight draws are implemented for the built-in actions")

    profile = model.fy_scale_decay(z)
    form = r.power_form()
    if profile is not None and form is not None and form.power == profile.power:
        shape = (model.dim_y + form.shape_exponent) / profile.power
        rate = form.decay_rate + profile.rate
        return _conjugate_draw(shape, rate, profile.power, rng)

    n = model.dim_y

    def log_target(g: float) -> float:
        return r.log_density(g) + n * math.log(g) + model.log_fy_unnorm(action.act(g, z))

    return _grid_draw_log_coordinate(log_target, rng)


def sample_haar_weight(model: AugmentedModel, action: GroupAction, y, rng) -> float:
    """Draw g from the density proportional to f_Y(g y) j(g, y) against the left-invariant measure.

    Raises ``NullSetError`` where the normalizer m(y) diverges (for the
    multiplicative action with scale decay, exactly where the decay rate
    vanishes).
    """
    if isinstance(action, IdentityAction):
        return action.identity
    if not isinstance(action, MultiplicativeAction):
        raise NotImplementedError("weight draws are implemented for the built-in actions")

    profile = model.fy_scale_decay(y)
    if profile is not None:
        if profile.rate <= 0.0:
            raise NullSetError("haar weight mass diverges: scale decay rate is zero")
        shape = model.dim_y / profile.power
        return _conjugate_draw(shape, profile.rate, profile.power, rng)

    n = model.dim_y

    def log_target(g: float) -> float:
        return (
            model.log_fy_unnorm(action.act(g, y))
            + n * math.log(g)
            + action.haar_log_density(g)
        )

    return _grid_draw_log_coordinate(log_target, rng)


# ---------------------------------------------------------------------------
# y-update rules


class YUpdateRule(ABC):
    """A Markov move on the augmentation space that preserves the y-marginal."""

    label: str

    @abstractmethod
    def step(self, model: AugmentedModel, y, rng):
        """One move from y."""


class IdentityRule(YUpdateRule):
    """The point-mass rule: returns y unchanged and consumes no randomness."""

    label = "identity"

    def step(self, model, y, rng):
        return y


class QrRule(YUpdateRule):
    """Group move driven by a fixed probability measure r on the group.

    One step scales down by a draw from r, then climbs back with a draw from
    the weight density; see ``qr_ystep``.
    """

    label = "qr"

    def __init__(self, action: GroupAction, r: RMeasure):
        self.action = action
        self.r = r

    def step(self, model, y, rng):
        return qr_ystep(model, self.action, self.r, y, rng)


class HaarRule(YUpdateRule):
    """Group move driven by the left-invariant measure; see ``haar_ystep``."""

    label = "haar"

    def __init__(self, action: GroupAction):
        self.action = action

    def step(self, model, y, rng):
        return haar_ystep(model, self.action, y, rng)


class ComposedRule(YUpdateRule):
    """Two consecutive applications of the same half-rule."""

    def __init__(self, half: YUpdateRule):
        self.half = half
        self.label = f"{half.label}.{half.label}"

    def step(self, model, y, rng):
        return self.half.step(model, self.half.step(model, y, rng), rng)


def compose_rule(half: YUpdateRule) -> YUpdateRule:
    """Rule applying ``half`` twice; composing the identity is the identity."""
    if isinstance(half, IdentityRule):
        return half
    return ComposedRule(half)


# ---------------------------------------------------------------------------
# kernel steps


def da_step(model: AugmentedModel, x, rng):
    """One two-block update from x: refresh y from its conditional, then x.

    Draw order: y-draw, then x-draw.
    """
    y = model.sample_y_given_x(x, rng)
    return model.sample_x_given_y(y, rng)


def sandwich_step(model: AugmentedModel, rule: YUpdateRule, x, rng):
    """One sandwich update from x: y-draw, rule move on y, x-draw."""
    y = model.sample_y_given_x(x, rng)
    y = rule.step(model, y, rng)
    return model.sample_x_given_y(y, rng)


def qr_ystep(model: AugmentedModel, action: GroupAction, r: RMeasure, y, rng):
    """One r-driven group move on the augmentation space.

    Draw order: g ~ r, then g' from the weight density at the scaled-down
    point z = g^{-1} y; the move returns g' z.  Leaves the y-marginal
    invariant for any probability measure r on the group.
    """
    g = r.sample(rng)
    z = action.act(action.inverse(g), y)
    g2 = sample_group_weight(model, action, r, z, rng)
    return action.act(g2, z)


def haar_ystep(model: AugmentedModel, action: GroupAction, y, rng):
    """One left-invariant-measure group move on the augmentation space.

    Draws g from the weight density f_Y(g y) j(g, y) against the group's
    left-invariant measure and returns g y.  On the null set where that
    density has infinite mass the rule falls back to an exact y-marginal
    draw when the model provides one, else raises ``DomainError``.
    """
    try:
        g = sample_haar_weight(model, action, y, rng)
    except NullSetError:
        try:
            return model.sample_fy(rng)
        except NotImplementedError:
            raise DomainError(
                "haar move hit the divergent-mass null set and the model has no exact y-marginal sampler"
            ) from None
    return action.act(g, y)


def joint_xg_step(model: AugmentedModel, action: GroupAction, state, rng):
    """One update of the joint chain on (x, g).

    From (x', g'): draw w from the y-conditional at x', read off
    y = g'^{-1} w (a draw from the tilted y-conditional), then draw the new
    g from the haar weight density at y and the new x from the x-conditional
    at g y.  Draw order: y-draw, weight-draw, x-draw.  The x-marginal of this
    chain moves exactly like the haar sandwich kernel.
    """
    x_prev, g_prev = state
    w = model.sample_y_given_x(x_prev, rng)
    y = action.act(action.inverse(g_prev), w)
    g = sample_haar_weight(model, action, y, rng)
    x = model.sample_x_given_y(action.act(g, y), rng)
    return x, g


# ---------------------------------------------------------------------------
# weight-mass quadratures


def _mass_quadrature(log_integrand, lo_hint: float = -40.0, hi_hint: float = 40.0) -> float:
    """Integrate exp(log_integrand(g)) dg over (0, inf) through the log coordinate."""

    def lp(u: float) -> float:
        return log_integrand(math.exp(u)) + u

    coarse = np.linspace(lo_hint, hi_hint, 161)
    vals = np.array([lp(u) for u in coarse])
    finite = np.isfinite(vals)
    if not finite.any():
        return 0.0
    peak = float(vals[finite].max())

    lo = float(coarse[int(np.nanargmax(np.where(finite, vals, -np.inf)))])
    hi = lo
    step = 0.5
    while lp(lo) > peak - _LOG_DROP:
        lo -= step
        step *= 1.5
        if lo < -700.0:
            return math.inf
    step = 0.5
    while lp(hi) > peak - _LOG_DROP:
        hi += step
        step *= 1.5
        if hi > 700.0:
            return math.inf

    val, _ = integrate.quad(
        lambda u: math.exp(lp(u) - peak), lo, hi, limit=400, epsabs=1e-14, epsrel=1e-12
    )
    return float(val * math.exp(peak))


def group_weight_mass(model: AugmentedModel, action: GroupAction, r: RMeasure, y) -> float:
    """Normalizer m_r(y) of the r-driven weight density, by quadrature.

    Computes the integral of f_Y(g y) j(g, y) r(dg) over the group, against
    the y-marginal normalization reported by ``model.log_fy_unnorm``.
    """
    if not isinstance(action, MultiplicativeAction):
        raise NotImplementedError("mass quadrature is implemented for the multiplicative action")
    n = model.dim_y

    def log_integrand(g: float) -> float:
        return r.log_density(g) + n * math.log(g) + model.log_fy_unnorm(action.act(g, y))

    return _mass_quadrature(log_integrand)


def haar_weight_mass(model: AugmentedModel, action: GroupAction, y) -> float:
    """Normalizer m(y) of the haar weight density, by quadrature.

    Computes the integral of f_Y(g y) j(g, y) against the left-invariant
    measure; returns ``inf`` on the divergent null set.
    """
    if not isinstance(action, MultiplicativeAction):
        raise NotImplementedError("mass quadrature is implemented for the multiplicative action")
    n = model.dim_y

    def log_integrand(g: float) -> float:
        return (
            model.log_fy_unnorm(action.act(g, y))
            + n * math.log(g)
            + action.haar_log_density(g)
        )

    return _mass_quadrature(log_integrand)


# ---------------------------------------------------------------------------
# chain drivers


def run_sandwich_chain(
    model: AugmentedModel,
    rule: YUpdateRule | None,
    x0,
    n_iters: int,
    rng,
) -> np.ndarray:
    """Run ``n_iters`` sandwich updates from x0; rule None means the plain two-block kernel.

    Returns an (n_iters, dim_x) array of states, one row per iteration.
    """
    out = np.empty((n_iters, model.dim_x))
    x = x0
    if rule is None or isinstance(rule, IdentityRule):
        for i in range(n_iters):
            x = da_step(model, x, rng)
            out[i] = x
    else:
        for i in range(n_iters):
            x = sandwich_step(model, rule, x, rng)
            out[i] = x
    return out


def run_joint_chain(
    model: AugmentedModel,
    action: GroupAction,
    x0,
    g0,
    n_iters: int,
    rng,
) -> np.ndarray:
    """Run the joint (x, g) chain; returns (n_iters, dim_x + 1) with g in the last column.

    The x-coordinates are the quantity of interest; their path never depends
    on the group coordinate.  The group coordinate itself has no proper
    stationary law (its invariant measure is the improper left-invariant
    measure) and performs a null-recurrent multiplicative walk, so on very
    long runs it can wander outside floating-point range.  Use the haar
    sandwich chain when only the x-marginal is wanted.
    """
    out = np.empty((n_iters, model.dim_x + 1))
    state = (x0, g0)
    for i in range(n_iters):
        state = joint_xg_step(model, action, state, rng)
        out[i, : model.dim_x] = state[0]
        out[i, -1] = state[1]
    return out
