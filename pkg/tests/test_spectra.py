"""Exact discretized-kernel analysis: norms, variances, certificates."""

import math

import numpy as np
import pytest
from scipy import stats

from pxda import (
    DiscretizedKernel,
    DomainError,
    ExponentialRMeasure,
    GridSpec,
    HaarRule,
    LaplaceToyModel,
    QrRule,
    ReducibleKernelError,
    block_kernels,
    certify_orderings,
    detailed_balance_residual,
    discretize,
    discretize_joint,
    exact_asymptotic_variance,
    grid_convergence,
    maximal_correlation_sq,
    operator_norm,
    orbit_blocks,
    rule_matrix,
    stationary_weights,
)


# --- grids ------------------------------------------------------------------


def test_grid_geometry():
    g = GridSpec(-2.0, 2.0, 8)
    assert g.width == pytest.approx(0.5)
    assert g.centers[0] == pytest.approx(-1.75)
    assert g.centers[-1] == pytest.approx(1.75)
    assert len(g.edges) == 9
    d = g.doubled()
    assert d.n_cells == 16 and (d.lo, d.hi) == (-2.0, 2.0)


def test_gauss_nodes_integrate_cubics_exactly():
    g = GridSpec(0.0, 1.0, 4)
    nodes, weights = g.gauss_nodes(order=4)
    vals = (weights * nodes**3).sum(axis=1)
    edges = g.edges
    want = (edges[1:] ** 4 - edges[:-1] ** 4) / 4.0
    np.testing.assert_allclose(vals, want, rtol=1e-13)


# --- two-state and other tiny oracles ---------------------------------------


def _two_state(a=0.3, b=0.1):
    grid = np.array([0.0, 1.0])
    mat = np.array([[1 - a, a], [b, 1 - b]])
    w = np.array([b, a]) / (a + b)
    return DiscretizedKernel(grid, w, mat, label="two-state")


def test_two_state_operator_norm_is_second_eigenvalue():
    for a, b in [(0.3, 0.1), (0.9, 0.7), (0.05, 0.2)]:
        kern = _two_state(a, b)
        assert operator_norm(kern) == pytest.approx(abs(1 - a - b), abs=1e-12)


def test_operator_norm_iid_and_identity():
    grid = np.array([0.0, 1.0, 2.0])
    w = np.array([0.2, 0.3, 0.5])
    iid = DiscretizedKernel(grid, w, np.tile(w, (3, 1)))
    assert operator_norm(iid) == pytest.approx(0.0, abs=1e-12)
    ident = DiscretizedKernel(grid, w, np.eye(3))
    assert operator_norm(ident) == pytest.approx(1.0, abs=1e-12)


def test_two_state_variance_closed_form_and_power_sum():
    a, b = 0.3, 0.1
    kern = _two_state(a, b)
    h = np.array([0.0, 1.0])
    v = exact_asymptotic_variance(kern, h)
    pi1, pi2 = b / (a + b), a / (a + b)
    assert v == pytest.approx(pi1 * pi2 * (2 - a - b) / (a + b), rel=1e-12)

    # brute-force truncated autocovariance sum via matrix powers
    w = kern.weights
    hc = h - w @ h
    var = float(w @ hc**2)
    acc = var
    vec = hc.copy()
    for _ in range(10_000):
        vec = kern.matrix @ vec
        acc += 2.0 * float(w @ (hc * vec))
    assert v == pytest.approx(acc, rel=1e-10)


def test_iid_kernel_variance_is_plain_variance():
    grid = np.array([-1.0, 0.0, 2.0])
    w = np.array([0.25, 0.5, 0.25])
    iid = DiscretizedKernel(grid, w, np.tile(w, (3, 1)))
    h = np.array([3.0, -1.0, 4.0])
    hc = h - w @ h
    assert exact_asymptotic_variance(iid, h) == pytest.approx(float(w @ hc**2), rel=1e-12)


def test_rotation_kernel_balance_residual():
    # the 3-cycle moves 1/3 of mass one way across each pair and none back
    grid = np.array([0.0, 1.0, 2.0])
    rot = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    kern = DiscretizedKernel(grid, np.full(3, 1 / 3), rot)
    assert detailed_balance_residual(kern) == pytest.approx(1 / 3, rel=1e-12)
    with pytest.raises(DomainError):
        exact_asymptotic_variance(kern, np.array([1.0, 0.0, 0.0]))


def test_symmetric_matrix_uniform_weights_balances():
    grid = np.array([0.0, 1.0, 2.0])
    m = np.array([[0.5, 0.3, 0.2], [0.3, 0.4, 0.3], [0.2, 0.3, 0.5]])
    kern = DiscretizedKernel(grid, np.full(3, 1 / 3), m)
    assert detailed_balance_residual(kern) == 0.0


def test_stationary_weights_perron():
    mat = np.array([[0.7, 0.3], [0.1, 0.9]])
    np.testing.assert_allclose(stationary_weights(mat), [0.25, 0.75], atol=1e-14)


def test_kernel_validation_rejects_bad_input():
    grid = np.array([0.0, 1.0])
    with pytest.raises(DomainError):
        DiscretizedKernel(grid, np.array([0.5, 0.5]), np.array([[1.1, -0.1], [0.5, 0.5]]))
    with pytest.raises(DomainError):
        DiscretizedKernel(grid, np.array([0.5, 0.5]), np.array([[0.8, 0.1], [0.5, 0.5]]))
    with pytest.raises(DomainError):
        DiscretizedKernel(grid, np.array([0.9, 0.2]), np.eye(2))
    with pytest.raises(DomainError):
        # uniform weights are not stationary for this chain
        DiscretizedKernel(grid, np.array([0.5, 0.5]), np.array([[0.7, 0.3], [0.1, 0.9]]))


# --- discretize contract ----------------------------------------------------


def test_discretize_iid_density_gives_equal_rows():
    grid = GridSpec(-8.0, 8.0, 160)
    dens = lambda src, dest: np.exp(-0.5 * dest**2)
    kern = discretize(dens, grid, label="iid")
    np.testing.assert_allclose(kern.matrix, np.tile(kern.matrix[0], (160, 1)), atol=1e-15)
    assert operator_norm(kern) < 1e-12


def test_discretize_haar_move_rows_are_exponential():
    # on the positive half-line the group move forgets its start entirely
    grid = GridSpec(0.0, 25.0, 500)
    dens = lambda src, dest: np.exp(-np.abs(dest))
    kern = discretize(dens, grid, label="haar-half")
    expected = np.exp(-grid.centers) * grid.width
    expected /= expected.sum()
    np.testing.assert_allclose(kern.matrix[17], expected, rtol=1e-12)
    np.testing.assert_allclose(kern.matrix, np.tile(expected, (500, 1)), atol=1e-15)


def test_discretize_toy_two_block_kernel_by_latent_quadrature():
    # transition density from x' to x by integrating over the latent draw
    model = LaplaceToyModel()
    ynodes = np.linspace(-20.0, 20.0, 4001)
    dy = ynodes[1] - ynodes[0]
    log_fy = -np.abs(ynodes)

    def dens(src, dest):
        fyx = np.exp(log_fy - 0.5 * (ynodes - src) ** 2)
        fyx /= fyx.sum() * dy
        gauss = np.exp(-0.5 * (dest[None, :] - ynodes[:, None]) ** 2) / math.sqrt(2 * math.pi)
        return (fyx[:, None] * gauss).sum(axis=0) * dy

    grid = GridSpec(-10.0, 10.0, 400)
    kern = discretize(dens, grid, label="da")
    np.testing.assert_allclose(kern.matrix.sum(axis=1), 1.0, atol=1e-10)
    assert kern.stationarity_residual < 1e-6
    assert detailed_balance_residual(kern) < 1e-7


def test_discretize_rejects_zero_rows():
    grid = GridSpec(0.0, 1.0, 4)
    dens = lambda src, dest: np.zeros_like(dest)
    with pytest.raises(DomainError):
        discretize(dens, grid)


def test_discretize_diagonal_remainder_keeps_flow_symmetry():
    # closed-form reversible move: symmetrized exponential jump density
    grid = GridSpec(0.0, 20.0, 300)

    def dens(src, dest):
        return 0.5 * np.exp(-np.abs(dest - src))

    kern = discretize(
        dens, grid, stationary_density=lambda c: np.ones_like(c), remainder="diagonal",
        stationarity_tol=1e-8,
    )
    assert detailed_balance_residual(kern) < 1e-15
    # normalizing instead distorts rows near the boundary and breaks symmetry
    kern_n = discretize(dens, grid, stationary_density=lambda c: np.ones_like(c),
                        stationarity_tol=1.0, remainder="normalize")
    assert detailed_balance_residual(kern_n) > 1e-6


# --- maximal correlation ----------------------------------------------------


def test_maximal_correlation_independent_and_deterministic():
    px = np.array([0.3, 0.7])
    py = np.array([0.6, 0.4])
    assert maximal_correlation_sq(np.outer(px, py)) == pytest.approx(0.0, abs=1e-12)
    diag = np.diag([0.25, 0.25, 0.5])
    assert maximal_correlation_sq(diag) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        maximal_correlation_sq(np.array([[0.5, 0.0], [0.5, 0.0]]))


# --- the discretized one-dimensional family ---------------------------------


def test_family_kernels_preserve_the_x_marginal(toy_family):
    _, joint, kernels = toy_family
    for name, kern in kernels.items():
        assert kern.stationarity_residual < 1e-6, name
        np.testing.assert_allclose(kern.matrix.sum(axis=1), 1.0, atol=1e-10)
        np.testing.assert_allclose(kern.weights, joint.px, atol=1e-15)


def test_family_kernels_are_reversible(toy_family):
    _, _, kernels = toy_family
    for name, kern in kernels.items():
        assert detailed_balance_residual(kern) < 1e-8, name


def test_da_norm_equals_squared_maximal_correlation(toy_family):
    _, joint, kernels = toy_family
    norm = operator_norm(kernels["da"])
    gamma_sq = maximal_correlation_sq(joint.joint)
    assert abs(norm - gamma_sq) < 1e-12


def test_certificate_orders_the_family(toy_family):
    _, _, kernels = toy_family
    tests = {
        "x": lambda x: x,
        "x_squared": lambda x: x**2,
        "sign": np.sign,
        "exp_neg_abs": lambda x: np.exp(-np.abs(x)),
    }
    cert = certify_orderings([kernels["haar_pxda"], kernels["pxda"], kernels["da"]], tests)
    assert cert.all_pass
    assert cert.norms[0] < cert.norms[1] < cert.norms[2]
    d = cert.to_json_dict()
    assert d["kernels"] == ["haar_pxda", "pxda", "da"]
    assert set(d["asymptotic_variances"]) == set(tests)


def test_certificate_duplicate_kernel_gives_equalities(toy_family):
    _, _, kernels = toy_family
    cert = certify_orderings([kernels["da"], kernels["da"]], [lambda x: x])
    assert cert.all_pass
    assert cert.norms[0] == cert.norms[1]


def test_certificate_refuses_mismatched_spaces(toy_family):
    _, _, kernels = toy_family
    other = _two_state()
    with pytest.raises(DomainError):
        certify_orderings([kernels["da"], other], [lambda x: x])


def test_certificate_accepts_function_pairs(toy_family):
    _, _, kernels = toy_family
    cert = certify_orderings([kernels["da"]], [("linear", lambda x: x)])
    assert list(cert.variances) == ["linear"]
    assert cert.all_pass  # single kernel: nothing to compare, flags empty
    assert cert.norm_ordering_ok == []


def test_variance_agrees_with_matrix_power_sum(toy_family):
    _, _, kernels = toy_family
    kern = kernels["da"]
    h = kern.grid.copy()
    v = exact_asymptotic_variance(kern, h)
    w = kern.weights
    hc = h - w @ h
    acc = float(w @ hc**2)
    vec = hc.copy()
    for _ in range(2000):
        vec = kern.matrix @ vec
        acc += 2.0 * float(w @ (hc * vec))
    assert v == pytest.approx(acc, abs=1e-6)


def test_norm_variance_spectral_bound_on_random_h(toy_family):
    _, _, kernels = toy_family
    kern = kernels["pxda"]
    nrm = operator_norm(kern)
    rng = np.random.default_rng(0)
    for _ in range(5):
        h = rng.standard_normal(kern.n_cells)
        hc = h - kern.weights @ h
        bound = float(kern.weights @ hc**2) * (1 + nrm) / (1 - nrm)
        assert exact_asymptotic_variance(kern, h) <= bound * (1 + 1e-10)


def test_theorem_identity_quadratic_form_transfers_to_y(toy_family, toy_model, toy_action):
    # <P_R h, h> against the y-space form <h*, R h*> with h*(y) = E[h(X)|y]
    grid, joint, kernels = toy_family
    for rule, kern in [
        (None, kernels["da"]),
        (HaarRule(toy_action), kernels["haar_pxda"]),
        (QrRule(toy_action, ExponentialRMeasure(1.0)), kernels["pxda"]),
    ]:
        R = rule_matrix(toy_model, toy_action, rule, grid, joint.py)
        for h in (joint.x_centers, np.sign(joint.x_centers)):
            lhs = float((joint.px * h) @ (kern.matrix @ h))
            hstar = joint.A @ h
            rhs = float((joint.py * hstar) @ (R @ hstar))
            assert abs(lhs - rhs) < 1e-6


def test_haar_rule_idempotent_and_reducible(toy_family, toy_model, toy_action):
    grid, joint, _ = toy_family
    R = rule_matrix(toy_model, toy_action, HaarRule(toy_action), grid, joint.py)
    labels = orbit_blocks(R)
    assert len(np.unique(labels)) == 2
    # blocks split exactly at the sign change
    assert len(np.unique(labels[joint.y_centers < 0])) == 1
    assert len(np.unique(labels[joint.y_centers > 0])) == 1

    kern = DiscretizedKernel(grid.centers, joint.py, R, label="haar-rule", stationarity_tol=1e-8)
    for blk in block_kernels(kern):
        assert np.max(np.abs(blk.matrix @ blk.matrix - blk.matrix)) < 1e-12
        assert abs(blk.weights.sum() - 1.0) < 1e-12
    with pytest.raises(ReducibleKernelError) as exc:
        exact_asymptotic_variance(kern, grid.centers)
    assert len(np.unique(exc.value.labels)) == 2


def test_fstar_route_reproduces_composed_kernel(toy_family, toy_model, toy_action):
    # tilting the joint by the rule and running the plain two-block kernel
    # equals sandwiching the squared rule into the original joint
    grid, joint, kernels = toy_family
    R = rule_matrix(toy_model, toy_action, HaarRule(toy_action), grid, joint.py)
    tilted = joint.tilted_by_rule(R)
    direct = kernels["haar_pxda"]
    assert np.max(np.abs(tilted.da_kernel().matrix - direct.matrix)) < 1e-12


def test_grid_convergence_of_the_default_window(toy_model):
    grid = GridSpec(-25.0, 25.0, 400)
    out = grid_convergence(lambda g: discretize_joint(toy_model, g, g).da_kernel(), grid)
    assert out["converged"]
    assert out["delta"] < 1e-5
    assert out["n_cells"] == 400


def test_qr_closed_form_detailed_balance_on_half_line():
    # group-measure move of the double-exponential marginal, positive orbit
    grid = GridSpec(0.0, 30.0, 1200)

    def q_r(src, dest):
        s = src + dest
        return np.exp(-dest) * (dest * src) * (2.0 / s**3 + 2.0 / s**2 + 1.0 / s)

    kern = discretize(
        q_r,
        grid,
        stationary_density=lambda c: np.exp(-c),
        label="qr-half",
        stationarity_tol=1e-8,
        remainder="diagonal",
    )
    assert detailed_balance_residual(kern) < 1e-8
