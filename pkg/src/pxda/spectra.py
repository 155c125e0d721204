"""Discretized transition kernels and the certificates computed from them.

Everything here works on finite surrogates: a kernel becomes a row-stochastic
matrix over grid cells together with its stationary weights.  The surrogate
family for a one-dimensional augmented model is assembled from a single
discretized joint, so the structural identities behind the efficiency
orderings (reversibility of every sandwich kernel, idempotence of the
haar-move projector, the two-sided conditional factorization) hold exactly in
floating point rather than up to discretization error.  Discretization then
only affects how closely the surrogate tracks the continuous kernel, never
whether the certified inequalities are real.

Conventions: ``weights`` is the stationary probability vector, ``matrix`` is
row stochastic with ``matrix[i, j]`` the probability of moving from cell i
to cell j, and norms are operator norms on the weighted L2 space with the
constant functions projected out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaln

from .errors import DomainError, ReducibleKernelError
from .group_action import GroupAction, MultiplicativeAction
from .kernels import ComposedRule, HaarRule, IdentityRule, QrRule, RMeasure, YUpdateRule
from .models import AugmentedModel

__all__ = [
    "GridSpec",
    "DiscretizedKernel",
    "DiscretizedJoint",
    "OrderingCertificate",
    "discretize",
    "discretize_joint",
    "discretized_family",
    "rule_matrix",
    "stationary_weights",
    "operator_norm",
    "exact_asymptotic_variance",
    "detailed_balance_residual",
    "maximal_correlation_sq",
    "orbit_blocks",
    "block_kernels",
    "certify_orderings",
    "grid_convergence",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell grid on [lo, hi] with n_cells cells."""

    lo: float
    hi: float
    n_cells: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.hi > self.lo):
            raise ValueError("need finite lo < hi")
        if self.n_cells < 2:
            raise ValueError("need at least two cells")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.n_cells

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    def doubled(self) -> "GridSpec":
        return GridSpec(self.lo, self.hi, 2 * self.n_cells)

    def gauss_nodes(self, order: int = 4):
        """Gauss-Legendre nodes and weights per cell, shapes (n_cells, order).

        Row k of the weights integrates a function over cell k exactly for
        polynomials up to degree 2*order - 1.
        """
        x, w = np.polynomial.legendre.leggauss(order)
        half = 0.5 * self.width
        nodes = self.centers[:, None] + half * x[None, :]
        wts = np.broadcast_to(half * w, (self.n_cells, order)).copy()
        return nodes, wts


class DiscretizedKernel:
    """Row-stochastic matrix over grid cells with its stationary weights.

    Parameters
    ----------
    grid : (n,) array_like
        Cell centers, strictly increasing.
    weights : (n,) array_like
        Stationary probabilities per cell; positive, summing to one.
    matrix : (n, n) array_like
        Row-stochastic transition matrix.
    label : str
        Name used in certificates and reports.
    stationarity_tol : float
        Largest allowed entry of |weights @ matrix - weights|.
    """

    def __init__(self, grid, weights, matrix, label="", stationarity_tol=1e-6):
        grid = np.asarray(grid, dtype=float)
        weights = np.asarray(weights, dtype=float)
        matrix = np.asarray(matrix, dtype=float)
        n = grid.shape[0]
        if grid.ndim != 1 or weights.shape != (n,) or matrix.shape != (n, n):
            raise ValueError("grid, weights, and matrix have inconsistent shapes")
        if not np.all(np.isfinite(matrix)) or np.any(matrix < -1e-12):
            raise DomainError("transition matrix must be finite and nonnegative")
        rowsum = matrix.sum(axis=1)
        if np.max(np.abs(rowsum - 1.0)) > 1e-10:
            raise DomainError("rows of the transition matrix must sum to one")
        if np.any(weights <= 0):
            raise DomainError("weights must be strictly positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise DomainError("weights must sum to one")
        resid = float(np.max(np.abs(weights @ matrix - weights)))
        if resid > stationarity_tol:
            raise DomainError(
                f"weights are not stationary: residual {resid:.3e} exceeds {stationarity_tol:g}"
            )
        self.grid = grid
        self.weights = weights
        self.matrix = np.maximum(matrix, 0.0)
        self.label = label
        self.stationarity_residual = resid

    @property
    def n_cells(self) -> int:
        return self.grid.shape[0]

    def same_space(self, other: "DiscretizedKernel", tol: float = 1e-12) -> bool:
        """Whether both kernels act on the same grid with the same weights."""
        return (
            self.n_cells == other.n_cells
            and float(np.max(np.abs(self.grid - other.grid))) <= tol
            and float(np.max(np.abs(self.weights - other.weights))) <= tol
        )

    def __repr__(self):
        return f"DiscretizedKernel(label={self.label!r}, n_cells={self.n_cells})"


def stationary_weights(matrix: np.ndarray) -> np.ndarray:
    """Stationary probability vector via the left Perron eigenvector."""
    matrix = np.asarray(matrix, dtype=float)
    vals, vecs = np.linalg.eig(matrix.T)
    k = int(np.argmin(np.abs(vals - 1.0)))
    if abs(vals[k] - 1.0) > 1e-8:
        raise DomainError("no eigenvalue near one; matrix is not row stochastic")
    w = np.real(vecs[:, k])
    w = w * np.sign(w.sum())
    if np.any(w < -1e-10):
        raise DomainError("Perron vector is not nonnegative; matrix may be reducible")
    w = np.maximum(w, 0.0)
    return w / w.sum()


def discretize(
    transition_density: Callable[[float, np.ndarray], np.ndarray],
    grid: GridSpec,
    stationary_density: Callable[[np.ndarray], np.ndarray] | None = None,
    label: str = "",
    stationarity_tol: float = 1e-6,
    remainder: str = "normalize",
) -> DiscretizedKernel:
    """Collocation discretization of a transition density on a uniform grid.

    Entry (i, j) is proportional to the density from cell center i to cell
    center j times the cell width.  The off-grid remainder of each row is
    handled per the ``remainder`` convention:

    - ``"normalize"``: rescale each row to sum to one.  Preserves the
      conditional structure; the default.
    - ``"diagonal"``: keep the off-diagonal entries as evaluated and absorb
      the missing mass into a self loop (after a uniform downscale if any
      row overshoots one).  Preserves flow symmetry exactly: if the density
      satisfies detailed balance against the stationary density pointwise,
      the resulting kernel has detailed-balance residual at rounding level.

    Weights come from the cell-evaluated ``stationary_density`` when given,
    else from the matrix's own Perron vector, which is stationary to
    floating-point precision by construction.  The grid should cover all but
    about 1e-10 of the stationary mass, or the truncation will surface in
    the stationarity residual.
    """
    if remainder not in ("normalize", "diagonal"):
        raise ValueError("remainder must be 'normalize' or 'diagonal'")
    centers = grid.centers
    n = grid.n_cells
    mat = np.empty((n, n))
    for i, c in enumerate(centers):
        row = np.asarray(transition_density(float(c), centers), dtype=float)
        if row.shape != (n,) or not np.all(np.isfinite(row)) or np.any(row < 0):
            raise DomainError(f"transition density row {i} is not a finite nonnegative vector")
        mat[i] = row
    mat *= grid.width
    rowsum = mat.sum(axis=1)
    if np.any(rowsum <= 0) or not np.all(np.isfinite(rowsum)):
        raise DomainError("a transition row has zero or non-finite mass on the grid")
    if remainder == "normalize":
        mat /= rowsum[:, None]
    else:
        overshoot = float(rowsum.max())
        if overshoot > 1.0:
            mat /= overshoot
            rowsum = rowsum / overshoot
        np.fill_diagonal(mat, mat.diagonal() + (1.0 - rowsum))

    if stationary_density is None:
        w = stationary_weights(mat)
    else:
        w = np.asarray(stationary_density(centers), dtype=float)
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DomainError("stationary density must be finite and positive on every cell")
        w = w / w.sum()
    return DiscretizedKernel(centers, w, mat, label=label, stationarity_tol=stationarity_tol)


# ---------------------------------------------------------------------------
# spectral functionals


def _similarity(kern: DiscretizedKernel) -> tuple[np.ndarray, np.ndarray]:
    s = np.sqrt(kern.weights)
    return (s[:, None] * kern.matrix) / s[None, :], s


def operator_norm(kern: DiscretizedKernel) -> float:
    """Operator norm on the mean-zero subspace of the weighted L2 space.

    Similarity-transforms the matrix by the square-root weights, projects out
    the stationary direction explicitly, and returns the largest singular
    value.  For a reversible kernel this equals the largest absolute
    eigenvalue away from the constants; for a non-reversible one it is the
    singular-value surrogate of that quantity.
    """
    tilde, s = _similarity(kern)
    deflated = tilde - np.outer(s, s)
    return float(np.linalg.svd(deflated, compute_uv=False)[0])


def detailed_balance_residual(kern: DiscretizedKernel) -> float:
    """Largest asymmetry of stationary flow: max |w_i m_ij - w_j m_ji|."""
    flow = kern.weights[:, None] * kern.matrix
    return float(np.max(np.abs(flow - flow.T)))


def orbit_blocks(matrix: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Component label per state of the undirected support graph of the matrix."""
    matrix = np.asarray(matrix, dtype=float)
    support = csr_matrix((matrix > tol) | (matrix.T > tol))
    _, labels = connected_components(support, directed=False)
    return labels


def block_kernels(kern: DiscretizedKernel) -> list[DiscretizedKernel]:
    """Split a reducible kernel into its closed blocks, weights renormalized per block.

    Rows of a closed block sum to one already, because entries across blocks
    are exactly zero in the support graph.  Returns one kernel per block in
    label order; an irreducible kernel comes back as a one-element list.
    """
    labels = orbit_blocks(kern.matrix)
    out = []
    for lab in range(labels.max() + 1):
        idx = np.flatnonzero(labels == lab)
        sub = kern.matrix[np.ix_(idx, idx)]
        w = kern.weights[idx]
        out.append(
            DiscretizedKernel(
                kern.grid[idx],
                w / w.sum(),
                sub,
                label=f"{kern.label}[block{lab}]" if kern.label else f"block{lab}",
            )
        )
    return out


def exact_asymptotic_variance(kern: DiscretizedKernel, h) -> float:
    """Asymptotic variance of ergodic averages of h for a reversible kernel.

    Centers h under the weights and evaluates the quadratic form of
    (I + K)(I - K)^{-1} through the symmetric eigendecomposition of the
    similarity-transformed matrix, with the stationary direction deflated by
    an explicit rank-one projection.  Requires the detailed-balance residual
    to be below 1e-8.  A kernel whose support splits into several closed
    blocks raises ``ReducibleKernelError`` carrying the block labels, so the
    caller can analyze each block on its own.
    """
    resid = detailed_balance_residual(kern)
    if resid > 1e-8:
        raise DomainError(
            f"asymptotic variance needs a reversible kernel; detailed-balance residual {resid:.3e}"
        )
    labels = orbit_blocks(kern.matrix)
    if labels.max() > 0:
        raise ReducibleKernelError(
            f"kernel splits into {labels.max() + 1} closed blocks; analyze blocks separately",
            labels=labels,
        )
    hv = np.asarray(h(kern.grid) if callable(h) else h, dtype=float)
    if hv.shape != kern.weights.shape:
        raise ValueError("h must evaluate to one value per grid cell")

    tilde, s = _similarity(kern)
    sym = 0.5 * (tilde + tilde.T) - np.outer(s, s)
    lam, vec = np.linalg.eigh(sym)
    if lam[-1] >= 1.0 - 1e-12:
        raise ReducibleKernelError("unit eigenvalue persists after deflation", labels=labels)
    hbar = hv - float(kern.weights @ hv)
    coef = vec.T @ (s * hbar)
    return float(np.sum(coef * coef * (1.0 + lam) / (1.0 - lam)))


def maximal_correlation_sq(joint: np.ndarray) -> float:
    """Squared maximal correlation of the two coordinates of a discrete joint.

    ``joint[i, k]`` is the probability of the cell pair (i, k).  Returns the
    square of the second-largest singular value of the correlation kernel
    diag(px)^{-1/2} J diag(py)^{-1/2}; the largest singular value is always
    one.  Cells with zero marginal mass are rejected because the correlation
    kernel is undefined there.
    """
    J = np.asarray(joint, dtype=float)
    if np.any(J < 0) or not np.all(np.isfinite(J)) or J.sum() <= 0:
        raise DomainError("joint must be nonnegative, finite, and have positive mass")
    J = J / J.sum()
    px = J.sum(axis=1)
    py = J.sum(axis=0)
    if np.any(px <= 0) or np.any(py <= 0):
        raise DomainError("joint has cells with zero marginal mass")
    K = J / np.sqrt(px)[:, None] / np.sqrt(py)[None, :]
    sv = np.linalg.svd(K, compute_uv=False)
    return float(min(sv[1] ** 2, 1.0))


# ---------------------------------------------------------------------------
# the discretized family of a scalar augmented model


@dataclass
class DiscretizedJoint:
    """Cell-level joint law of (x, y) with its two conditional matrices.

    ``B[i, k]`` is the conditional probability of y-cell k from x-cell i,
    and ``A[k, j]`` the conditional probability of x-cell j from y-cell k.
    Any sandwich matrix B @ R @ A with R reversible for the y-weights is
    exactly reversible for the x-weights, which is what makes the ordering
    certificates exact statements about the surrogate rather than
    approximations.
    """

    x_centers: np.ndarray
    y_centers: np.ndarray
    joint: np.ndarray
    px: np.ndarray
    py: np.ndarray
    B: np.ndarray
    A: np.ndarray

    @classmethod
    def from_joint(cls, x_centers, y_centers, joint) -> "DiscretizedJoint":
        joint = np.asarray(joint, dtype=float)
        if np.any(joint < 0) or not np.all(np.isfinite(joint)):
            raise DomainError("joint must be finite and nonnegative")
        joint = joint / joint.sum()
        px = joint.sum(axis=1)
        py = joint.sum(axis=0)
        if np.any(px <= 0) or np.any(py <= 0):
            raise DomainError("joint mass vanishes on some cell; shrink the grid window")
        B = joint / px[:, None]
        A = (joint / py[None, :]).T
        return cls(
            x_centers=np.asarray(x_centers, dtype=float),
            y_centers=np.asarray(y_centers, dtype=float),
            joint=joint,
            px=px,
            py=py,
            B=B,
            A=A,
        )

    def da_kernel(self, label: str = "da") -> DiscretizedKernel:
        """Two-block kernel: down to y, back to x."""
        return self.sandwich_kernel(None, label=label)

    def sandwich_kernel(self, R: np.ndarray | None, label: str = "") -> DiscretizedKernel:
        """Kernel of the sandwich with the extra y-move R between the conditional draws."""
        mat = self.B @ self.A if R is None else self.B @ R @ self.A
        return DiscretizedKernel(self.x_centers, self.px, mat, label=label, stationarity_tol=1e-8)

    def tilted_by_rule(self, R: np.ndarray) -> "DiscretizedJoint":
        """Joint whose plain two-block kernel carries the rule baked in.

        The new joint keeps the y-marginal and tilts the conditional of x by
        one application of R; for a reversible idempotent R its plain
        two-block kernel coincides with the sandwich B @ R @ A exactly.
        """
        new_joint = (R @ self.A).T * self.py[None, :]
        return DiscretizedJoint.from_joint(self.x_centers, self.y_centers, new_joint)


def discretize_joint(model: AugmentedModel, x_grid: GridSpec, y_grid: GridSpec) -> DiscretizedJoint:
    """Cell-level joint of a model with scalar x and y, from the joint density at cell centers."""
    if model.dim_x != 1 or model.dim_y != 1:
        raise ValueError("joint discretization requires scalar x and y")
    xc = x_grid.centers
    yc = y_grid.centers
    lj = np.array([[model.log_joint(float(x), float(y)) for y in yc] for x in xc])
    if not np.all(lj < np.inf):
        raise DomainError("joint log density is unbounded on the grid")
    with np.errstate(under="ignore"):
        W = np.exp(lj - lj.max())
    return DiscretizedJoint.from_joint(xc, yc, W)


def _haar_rule_matrix(action: GroupAction, y_centers: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Redraw from the stationary weights restricted to the orbit block of the current cell.

    This is the exact conditional-probability projector, so idempotence and
    reversibility hold to machine precision rather than quadrature accuracy.
    """
    labels = np.array([action.orbit_index(float(t)) for t in y_centers])
    n = y_centers.shape[0]
    R = np.zeros((n, n))
    for lab in np.unique(labels):
        idx = labels == lab
        block = py[idx] / py[idx].sum()
        m = int(idx.sum())
        R[np.ix_(idx, idx)] = np.broadcast_to(block, (m, m))
    return R


def _qr_rule_matrix(
    model: AugmentedModel,
    action: MultiplicativeAction,
    r: RMeasure,
    y_grid: GridSpec,
    py: np.ndarray,
    dest_order: int = 4,
    log_g_window: tuple[float, float] = (-34.0, 6.0),
    g_nodes: int = 512,
) -> np.ndarray:
    """Rows of the r-driven group move on a scalar augmentation grid.

    The move from y factors through the scale ratio: draw the down-move g
    from r, then the up-move g' from the weight density at z = y/g, and land
    at y' = (g'/g) y.  Integrating g out,

        q(y' | y) = int r(g) w(g y'/y ; y/g) (g/|y|) dg  over g > 0,

    with w the weight density, a known gamma shape whenever the model's
    scale-decay profile matches the measure's power form.  The g-integral
    runs in log coordinates under a global Gauss rule, destinations are
    cell-integrated, and the rows are then flow-symmetrized against the given
    stationary weights with the deficit moved to the diagonal.  That last
    step makes reversibility exact; quadrature error only perturbs which
    reversible matrix is produced.
    """
    if model.dim_y != 1:
        raise ValueError("group-move rows need a scalar augmentation grid")
    probe = model.fy_scale_decay(float(y_grid.centers[-1]))
    form = r.power_form()
    if probe is None or form is None or form.power != probe.power:
        raise NotImplementedError(
            "group-move rows need a model scale-decay profile matching the measure's power form"
        )
    kappa = probe.power
    shape = (model.dim_y + form.shape_exponent) / kappa

    gl_x, gl_w = np.polynomial.legendre.leggauss(g_nodes)
    mid = 0.5 * (log_g_window[0] + log_g_window[1])
    half = 0.5 * (log_g_window[1] - log_g_window[0])
    u = mid + half * gl_x
    uw = half * gl_w
    g = np.exp(u)
    log_r = np.array([r.log_density(float(t)) for t in g])

    centers = y_grid.centers
    ncells = y_grid.n_cells
    dest_nodes, dest_wts = y_grid.gauss_nodes(dest_order)
    raw = np.zeros((ncells, ncells))

    with np.errstate(under="ignore"):
        for k, y in enumerate(centers):
            ay = abs(y)
            same = np.sign(centers) == np.sign(y)
            nodes = dest_nodes[same]
            wts = dest_wts[same]
            rate = form.decay_rate + np.array(
                [model.fy_scale_decay(y / float(t)).rate for t in g]
            )
            t = np.abs(nodes)[None, :, :] * (g / ay)[:, None, None]
            log_wdens = (
                shape * np.log(rate)[:, None, None]
                - gammaln(shape)
                + (kappa * shape - 1.0) * np.log(t)
                - rate[:, None, None] * t**kappa
                + math.log(kappa)
            )
            dens = np.einsum(
                "q,qco->co",
                uw,
                np.exp(log_r[:, None, None] + log_wdens + u[:, None, None])
                * (g / ay)[:, None, None],
            )
            raw[k, same] = (dens * wts).sum(axis=1)

    # cells much narrower than the move scale (|y| well below the cell width)
    # can overshoot under fixed-order cell integration; scale those rows down
    # before symmetrizing so they only lazify themselves
    rs = raw.sum(axis=1)
    raw *= np.where(rs > 1.0, 1.0 / rs, 1.0)[:, None]

    # flow symmetrization by pairwise minimum: detailed balance wrt py
    # becomes exact, every row keeps sum at most one (the minimum never
    # exceeds the row's own flow), and the deficit turns into a self loop.
    # Where the two directions already agree the minimum changes nothing;
    # where they disagree (boundary cells whose py is depressed by the
    # x-window truncation) it backs off instead of overshooting.
    flow = py[:, None] * raw
    flow = np.minimum(flow, flow.T)
    R = flow / py[:, None]
    np.fill_diagonal(R, R.diagonal() + (1.0 - R.sum(axis=1)))
    return R


def rule_matrix(
    model: AugmentedModel,
    action: GroupAction,
    rule: YUpdateRule | None,
    y_grid: GridSpec,
    py: np.ndarray,
) -> np.ndarray:
    """Transition matrix of a y-move rule on the grid, stationary for the given weights."""
    if rule is None or isinstance(rule, IdentityRule):
        return np.eye(y_grid.n_cells)
    if isinstance(rule, ComposedRule):
        half = rule_matrix(model, action, rule.half, y_grid, py)
        return half @ half
    if isinstance(rule, HaarRule):
        return _haar_rule_matrix(action, y_grid.centers, py)
    if isinstance(rule, QrRule):
        if not isinstance(action, MultiplicativeAction):
            raise NotImplementedError(
                "group-move rows are implemented for the multiplicative action"
            )
        return _qr_rule_matrix(model, action, rule.r, y_grid, py)
    raise NotImplementedError(f"no matrix construction for rule {type(rule).__name__}")


def discretized_family(
    model: AugmentedModel,
    action: GroupAction,
    rules: Mapping[str, YUpdateRule | None],
    x_grid: GridSpec,
    y_grid: GridSpec,
) -> tuple[DiscretizedJoint, dict[str, DiscretizedKernel]]:
    """Discretize a model once and assemble one sandwich kernel per rule.

    All kernels share the joint's x-marginal weights, so they are directly
    comparable by ``certify_orderings``.  A rule of None means the plain
    two-block kernel.
    """
    dj = discretize_joint(model, x_grid, y_grid)
    kerns = {}
    for name, rule in rules.items():
        R = rule_matrix(model, action, rule, y_grid, dj.py)
        kerns[name] = dj.sandwich_kernel(None if rule is None else R, label=name)
    return dj, kerns


# ---------------------------------------------------------------------------
# ordering certificates


@dataclass
class OrderingCertificate:
    """Norms and asymptotic variances of a kernel family, with ordering flags.

    Kernels are listed from the conjectured most efficient to the least; each
    flag records whether the corresponding consecutive inequality holds up to
    the slack.  Failed orderings are recorded, never raised: a violation is a
    result, not an error.
    """

    labels: list[str]
    norms: list[float]
    variances: dict[str, list[float]]
    norm_ordering_ok: list[bool]
    variance_ordering_ok: dict[str, list[bool]]
    slack: float
    n_cells: int
    grid_lo: float
    grid_hi: float

    @property
    def all_pass(self) -> bool:
        flags = list(self.norm_ordering_ok)
        for v in self.variance_ordering_ok.values():
            flags.extend(v)
        return all(flags)

    def to_json_dict(self) -> dict:
        return {
            "kernels": self.labels,
            "operator_norms": self.norms,
            "asymptotic_variances": self.variances,
            "norm_ordering_ok": self.norm_ordering_ok,
            "variance_ordering_ok": self.variance_ordering_ok,
            "slack": self.slack,
            "grid": {"n_cells": self.n_cells, "lo": self.grid_lo, "hi": self.grid_hi},
            "all_pass": self.all_pass,
        }


def _named_functions(test_functions) -> list[tuple[str, Callable]]:
    if isinstance(test_functions, Mapping):
        return list(test_functions.items())
    out = []
    for i, item in enumerate(test_functions):
        if isinstance(item, tuple):
            out.append(item)
        else:
            name = getattr(item, "__name__", "")
            out.append((name if name and name != "<lambda>" else f"h{i}", item))
    return out


def certify_orderings(
    kernels: Sequence[DiscretizedKernel],
    test_functions,
    slack: float = 1e-6,
) -> OrderingCertificate:
    """Certify the efficiency ordering of kernels sharing one discrete space.

    Kernels go best first.  Checks that operator norms and the asymptotic
    variances of every test function are nondecreasing along the list,
    allowing the stated slack for floating-point noise.  Refuses kernels that
    do not share grid and weights, since norms on different spaces are not
    comparable.  ``test_functions`` may be a name-to-function mapping, a
    sequence of (name, function) pairs, or a sequence of functions.
    """
    if len(kernels) == 0:
        raise ValueError("need at least one kernel")
    base = kernels[0]
    for k in kernels[1:]:
        if not base.same_space(k):
            raise DomainError("kernels do not share grid and weights; refusing to compare")

    named = _named_functions(test_functions)
    norms = [operator_norm(k) for k in kernels]
    variances = {name: [exact_asymptotic_variance(k, fn) for k in kernels] for name, fn in named}
    norm_ok = [norms[i] <= norms[i + 1] + slack for i in range(len(kernels) - 1)]
    var_ok = {
        name: [vals[i] <= vals[i + 1] + slack for i in range(len(kernels) - 1)]
        for name, vals in variances.items()
    }
    return OrderingCertificate(
        labels=[k.label or f"kernel{i}" for i, k in enumerate(kernels)],
        norms=norms,
        variances=variances,
        norm_ordering_ok=norm_ok,
        variance_ordering_ok=var_ok,
        slack=slack,
        n_cells=base.n_cells,
        grid_lo=float(base.grid[0]),
        grid_hi=float(base.grid[-1]),
    )


def grid_convergence(
    builder: Callable[[GridSpec], DiscretizedKernel],
    grid: GridSpec,
    tol: float = 1e-5,
) -> dict:
    """Check that the operator norm is stable under doubling the resolution.

    Builds the kernel at the given grid and at double the cell count and
    reports both norms, their difference, and whether it is within tol.
    """
    k1 = builder(grid)
    k2 = builder(grid.doubled())
    n1 = operator_norm(k1)
    n2 = operator_norm(k2)
    return {
        "n_cells": grid.n_cells,
        "norm": n1,
        "norm_doubled": n2,
        "delta": abs(n2 - n1),
        "tol": tol,
        "converged": abs(n2 - n1) <= tol,
    }
