"""Group-move laws, conjugate weight draws, and the chain drivers."""

import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtr

from pxda import (
    ComposedRule,
    ExponentialRMeasure,
    GammaRootRMeasure,
    HaarRule,
    IdentityAction,
    IdentityRule,
    LaplaceToyModel,
    MultiplicativeAction,
    NullSetError,
    QrRule,
    compose_rule,
    da_step,
    group_weight_mass,
    haar_weight_mass,
    haar_ystep,
    joint_xg_step,
    qr_ystep,
    run_joint_chain,
    run_sandwich_chain,
    sample_group_weight,
    sample_haar_weight,
    sandwich_step,
)

TOY = LaplaceToyModel()
ACT = MultiplicativeAction(1)


# --- measures on the group -------------------------------------------------


def test_exponential_measure_law_and_density():
    r = ExponentialRMeasure(rate=2.0)
    rng = np.random.default_rng(0)
    draws = np.array([r.sample(rng) for _ in range(50_000)])
    assert stats.kstest(draws, stats.expon(scale=0.5).cdf).statistic < 0.01
    grid = np.linspace(0.01, 5, 50)
    np.testing.assert_allclose(
        [math.exp(r.log_density(g)) for g in grid], 2.0 * np.exp(-2.0 * grid), rtol=1e-12
    )
    form = r.power_form()
    assert (form.shape_exponent, form.decay_rate, form.power) == (1.0, 2.0, 1)


def test_gamma_root_measure_law():
    r = GammaRootRMeasure(a=3.0, b=0.5)
    rng = np.random.default_rng(1)
    draws = np.array([r.sample(rng) for _ in range(50_000)])
    assert stats.kstest(draws**2, stats.gamma(a=1.5, scale=2.0).cdf).statistic < 0.01
    form = r.power_form()
    assert (form.shape_exponent, form.decay_rate, form.power) == (3.0, 0.5, 2)


# --- weight masses by quadrature -------------------------------------------


def test_toy_group_weight_mass_closed_form():
    r = ExponentialRMeasure(1.0)
    for y in (0.5, -1.0, 3.0):
        want = 0.5 * (1.0 + abs(y)) ** -2
        assert group_weight_mass(TOY, ACT, r, y) == pytest.approx(want, rel=1e-9)


def test_toy_haar_weight_mass_closed_form():
    for y in (0.5, -1.0, 3.0):
        assert haar_weight_mass(TOY, ACT, y) == pytest.approx(1.0 / (2.0 * abs(y)), rel=1e-9)


def test_probit_haar_weight_mass_closed_form(probit_model):
    act = MultiplicativeAction(probit_model.dim_y)
    y = (2.0 * probit_model.v - 1.0) * np.linspace(0.4, 1.4, probit_model.dim_y)
    rho = 0.5 * float(y @ probit_model.residual_projector @ y)
    n = probit_model.dim_y
    want = 0.5 * math.gamma(n / 2.0) / rho ** (n / 2.0)
    assert haar_weight_mass(probit_model, act, y) == pytest.approx(want, rel=1e-8)


def test_mass_quadrature_needs_multiplicative_action():
    with pytest.raises(NotImplementedError):
        haar_weight_mass(TOY, IdentityAction(1), 1.0)


# --- conjugate weight draws -------------------------------------------------


def test_toy_group_weight_is_gamma():
    r = ExponentialRMeasure(1.0)
    rng = np.random.default_rng(2)
    z = 0.7
    draws = np.array([sample_group_weight(TOY, ACT, r, z, rng) for _ in range(50_000)])
    assert stats.kstest(draws, stats.gamma(a=2.0, scale=1.0 / (1.0 + z)).cdf).statistic < 0.01


def test_toy_haar_weight_is_exponential():
    rng = np.random.default_rng(3)
    for y in (0.25, -2.0):
        draws = np.array([sample_haar_weight(TOY, ACT, y, rng) for _ in range(50_000)])
        assert stats.kstest(draws, stats.expon(scale=1.0 / abs(y)).cdf).statistic < 0.01


def test_probit_haar_weight_is_root_gamma(probit_model):
    act = MultiplicativeAction(probit_model.dim_y)
    rng = np.random.default_rng(4)
    y = (2.0 * probit_model.v - 1.0) * np.linspace(0.4, 1.4, probit_model.dim_y)
    rho = 0.5 * float(y @ probit_model.residual_projector @ y)
    draws = np.array([sample_haar_weight(probit_model, act, y, rng) for _ in range(50_000)])
    want = stats.gamma(a=probit_model.dim_y / 2.0, scale=1.0 / rho)
    assert stats.kstest(draws**2, want.cdf).statistic < 0.01


def test_probit_group_weight_is_root_gamma(probit_model):
    act = MultiplicativeAction(probit_model.dim_y)
    r = GammaRootRMeasure(a=1.0, b=0.5)
    rng = np.random.default_rng(5)
    z = (2.0 * probit_model.v - 1.0) * np.linspace(0.3, 1.0, probit_model.dim_y)
    rho = 0.5 * float(z @ probit_model.residual_projector @ z)
    draws = np.array([sample_group_weight(probit_model, act, r, z, rng) for _ in range(50_000)])
    want = stats.gamma(a=(probit_model.dim_y + 1.0) / 2.0, scale=1.0 / (0.5 + rho))
    assert stats.kstest(draws**2, want.cdf).statistic < 0.01


def test_haar_weight_null_set_raises():
    with pytest.raises(NullSetError):
        sample_haar_weight(TOY, ACT, 0.0, np.random.default_rng(6))


# --- y-space moves ----------------------------------------------------------


def test_group_moves_stay_on_the_sign_orbit():
    rng = np.random.default_rng(7)
    r = ExponentialRMeasure(1.0)
    y_pos, y_neg = 1.3, -0.4
    for _ in range(200):
        assert qr_ystep(TOY, ACT, r, y_pos, rng) > 0
        assert qr_ystep(TOY, ACT, r, y_neg, rng) < 0
        assert haar_ystep(TOY, ACT, y_pos, rng) > 0
        assert haar_ystep(TOY, ACT, y_neg, rng) < 0


def test_qr_step_preserves_the_y_marginal():
    # start exactly stationary, apply one move, compare laws
    rng = np.random.default_rng(8)
    r = ExponentialRMeasure(1.0)
    start = np.array([TOY.sample_fy(rng) for _ in range(100_000)])
    moved = np.array([qr_ystep(TOY, ACT, r, y, rng) for y in start])
    assert stats.ks_2samp(start, moved).statistic < 0.01
    assert stats.kstest(moved, stats.laplace.cdf).statistic < 0.01


def test_haar_step_from_origin_falls_back_to_exact_marginal():
    rng = np.random.default_rng(9)
    draws = np.array([haar_ystep(TOY, ACT, 0.0, rng) for _ in range(50_000)])
    assert stats.kstest(draws, stats.laplace.cdf).statistic < 0.01


def test_identity_and_composed_rules():
    rng = np.random.default_rng(10)
    ident = IdentityRule()
    assert ident.step(TOY, 1.5, rng) == 1.5
    assert compose_rule(ident) is ident
    comp = compose_rule(HaarRule(ACT))
    assert isinstance(comp, ComposedRule)
    assert comp.label == "haar.haar"
    for _ in range(100):
        assert comp.step(TOY, 2.0, rng) > 0


def test_steps_are_deterministic_given_seed():
    r = ExponentialRMeasure(1.0)
    rule = QrRule(ACT, r)
    a = sandwich_step(TOY, rule, 0.5, np.random.default_rng(11))
    b = sandwich_step(TOY, rule, 0.5, np.random.default_rng(11))
    assert a == b
    c = da_step(TOY, 0.5, np.random.default_rng(12))
    d = da_step(TOY, 0.5, np.random.default_rng(12))
    assert c == d
    e = joint_xg_step(TOY, ACT, (0.5, 1.0), np.random.default_rng(13))
    f = joint_xg_step(TOY, ACT, (0.5, 1.0), np.random.default_rng(13))
    assert e == f


# --- chain drivers ----------------------------------------------------------


def _toy_x_cdf(grid):
    def fx(x):
        return 0.5 * math.exp(0.5) * (
            math.exp(-x) * ndtr(x - 1.0) + math.exp(x) * ndtr(-x - 1.0)
        )

    fine = np.linspace(-12, 12, 8001)
    dens = np.array([fx(t) for t in fine])
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5 * np.diff(fine))])
    cdf /= cdf[-1]
    return np.interp(grid, fine, cdf)


def test_chain_shapes_and_determinism():
    out = run_sandwich_chain(TOY, None, 0.0, 500, np.random.default_rng(14))
    assert out.shape == (500, 1)
    out2 = run_sandwich_chain(TOY, None, 0.0, 500, np.random.default_rng(14))
    np.testing.assert_array_equal(out, out2)
    outj = run_joint_chain(TOY, ACT, 0.0, 1.0, 500, np.random.default_rng(15))
    assert outj.shape == (500, 2)
    assert np.all(outj[:, 1] > 0)  # group coordinate stays in the group


@pytest.mark.parametrize(
    "rule",
    [None, QrRule(ACT, ExponentialRMeasure(1.0)), HaarRule(ACT)],
    ids=["plain", "group-measure", "haar"],
)
def test_sandwich_chains_share_the_x_marginal(rule):
    values = run_sandwich_chain(TOY, rule, 0.0, 100_000, np.random.default_rng(16))
    xs = np.sort(values[1000:, 0])
    grid = np.linspace(-6, 6, 61)
    emp = np.searchsorted(xs, grid) / xs.size
    assert np.max(np.abs(emp - _toy_x_cdf(grid))) < 0.02


def test_joint_chain_x_marginal_matches_too():
    # kept short: the group coordinate is a null-recurrent walk (see below)
    values = run_joint_chain(TOY, ACT, 0.0, 1.0, 20_000, np.random.default_rng(17))
    xs = np.sort(values[500:, 0])
    grid = np.linspace(-6, 6, 61)
    emp = np.searchsorted(xs, grid) / xs.size
    assert np.max(np.abs(emp - _toy_x_cdf(grid))) < 0.03


def test_joint_chain_group_coordinate_is_a_driftless_walk():
    # the group marginal is the improper invariant measure, so log g must
    # wander with zero drift rather than settle
    values = run_joint_chain(TOY, ACT, 0.0, 1.0, 20_000, np.random.default_rng(18))
    steps = np.diff(np.log(values[:, 1]))
    se = steps.std(ddof=1) / math.sqrt(steps.size)
    assert abs(steps.mean()) < 3 * se
    assert steps.std() > 1.0  # the walk really moves
