"""Wasserstein barycenters.

Pairwise McCann interpolation, the iterated (left-fold) barycenter, the
explicit barycenter of admissibly warped copies of a template, the Gaussian
fixed point and an exact multi-marginal LP used as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .deformations import average_deformation, check_admissible_pair
from .errors import KindMismatch, NoConvergence, NotAdmissible, TooLarge, WeightError
from .measures import DiscreteMeasure, GaussianMeasure, Measure1D, check_spd, push_forward, to_measure1d
from .transport import gaussian_ot_map, quantile_pairs, solve_ot_lp, sqrtm_spd, w2_1d, w2_gaussian

MULTIMARGINAL_CAP = 10**5
SIMPLEX_TOL = 1e-12


def _kind(mu):
    if isinstance(mu, Measure1D):
        return "1d"
    if isinstance(mu, DiscreteMeasure):
        return "discrete"
    if isinstance(mu, GaussianMeasure):
        return "gaussian"
    raise KindMismatch(f"unsupported measure type {type(mu).__name__}")


@dataclass(frozen=True, eq=False)
class BarycenterProblem:
    measures: tuple
    weights: np.ndarray

    def __post_init__(self):
        measures = tuple(self.measures)
        if not measures:
            raise WeightError("need at least one measure")
        kinds = {_kind(mu) for mu in measures}
        if len(kinds) != 1:
            raise KindMismatch(f"mixed measure kinds {sorted(kinds)}")
        lam = np.asarray(self.weights, dtype=float).reshape(-1)
        if lam.shape[0] != len(measures):
            raise WeightError(f"expected {len(measures)} weights, got {lam.shape[0]}")
        if np.any(lam <= 0) or abs(lam.sum() - 1.0) > SIMPLEX_TOL:
            raise WeightError("weights must be positive and sum to 1")
        lam.setflags(write=False)
        object.__setattr__(self, "measures", measures)
        object.__setattr__(self, "weights", lam)

    @classmethod
    def uniform(cls, measures):
        measures = tuple(measures)
        return cls(measures, np.full(len(measures), 1.0 / len(measures)))

    @property
    def kind(self):
        return _kind(self.measures[0])


def _problem(measures, weights):
    if isinstance(measures, BarycenterProblem):
        return measures
    measures = tuple(measures)
    if weights is None:
        return BarycenterProblem.uniform(measures)
    return BarycenterProblem(measures, weights)


# ---------------------------------------------------------------------------
# two measures


def gaussian_interpolant_cov(S, T, lam):
    """Covariance of ``(lam Id + (1 - lam) A)_# N(0, S)`` with ``A`` the map S -> T."""
    A = gaussian_ot_map(S, T)
    B = lam * np.eye(A.shape[0]) + (1.0 - lam) * A
    C = B @ S @ B
    return 0.5 * (C + C.T)


def pair_barycenter(mu, nu, lam):
    """Barycenter of ``(mu, lam)`` and ``(nu, 1 - lam)``: McCann's interpolant.

    Every unit of optimally coupled mass at ``(x, y)`` is moved to
    ``lam x + (1 - lam) y``.  Discrete measures in d >= 2 use the exact LP
    plan; 1D measures use the quantile coupling.
    """
    if not 0.0 <= lam <= 1.0:
        raise WeightError("interpolation weight must lie in [0, 1]")
    k1, k2 = _kind(mu), _kind(nu)
    if k1 != k2:
        raise KindMismatch(f"cannot interpolate {k1} with {k2}")
    if lam == 1.0:
        return mu
    if lam == 0.0:
        return nu
    if k1 == "gaussian":
        cov = gaussian_interpolant_cov(mu.cov, nu.cov, lam)
        return GaussianMeasure(lam * mu.mean + (1 - lam) * nu.mean, cov)
    if k1 == "1d":
        return _pair_1d(mu, nu, lam)
    if mu.dim != nu.dim:
        raise KindMismatch("measures live in different dimensions")
    if mu.dim == 1:
        out = _pair_1d(to_measure1d(mu), to_measure1d(nu), lam)
        return out.to_discrete()
    plan = solve_ot_lp(mu, nu)
    ii, jj, mass = plan.support(threshold=0.0)
    pts = lam * mu.points[ii] + (1 - lam) * nu.points[jj]
    return DiscreteMeasure(pts, mass / mass.sum())


def _pair_1d(mu, nu, lam):
    dt, qa, qb = quantile_pairs(mu, nu)
    vals = lam * qa + (1 - lam) * qb
    if mu.kind == "atomic" and nu.kind == "atomic":
        return Measure1D(vals, dt)
    return Measure1D.from_grid(np.maximum.accumulate(vals))


# ---------------------------------------------------------------------------
# iterated barycenter


def iterated_barycenter(measures, weights=None, requantize=None):
    """Left fold of pairwise barycenters with cumulative weights.

    ``IB_1 = mu_1`` and ``IB_k = Bar[(IB_{k-1}, L_{k-1}), (mu_k, lam_k)]``
    with ``L_k = lam_1 + ... + lam_k``, the pair weights normalized to sum
    to one.  ``requantize`` (1D only) replaces intermediate atomic results
    with more than that many atoms by their quantile grid of that size.
    """
    problem = _problem(measures, weights)
    it = iter(zip(problem.measures, problem.weights))
    bary, cum = next(it)
    for mu, lam in it:
        total = cum + lam
        bary = pair_barycenter(bary, mu, cum / total)
        cum = total
        if requantize and isinstance(bary, Measure1D) and bary.kind == "atomic" and bary.xs.size > requantize:
            bary = Measure1D(grid=bary.to_quantile_grid(requantize))
    return bary


def barycenter_objective(nu, measures, weights=None):
    """``sum_j lam_j W2^2(nu, mu_j)``."""
    problem = _problem(measures, weights)
    total = 0.0
    for mu, lam in zip(problem.measures, problem.weights):
        if isinstance(mu, GaussianMeasure):
            d = w2_gaussian(nu, mu)
        elif isinstance(mu, Measure1D) or mu.dim == 1:
            d = w2_1d(nu, mu)
        else:
            d = np.sqrt(solve_ot_lp(nu, mu).cost)
        total += lam * d**2
    return float(total)


# ---------------------------------------------------------------------------
# admissible warps


def admissible_barycenter(mu, maps, weights=None, probe=None):
    """Barycenter of ``(T_j)_# mu`` for admissible ``T_j``: ``(sum_j lam_j T_j)_# mu``.

    Admissibility of every pair is checked on ``probe`` (default: the
    support of ``mu``).
    """
    maps = list(maps)
    lam = np.full(len(maps), 1.0 / len(maps)) if weights is None else np.asarray(weights, dtype=float)
    if probe is None:
        probe = mu.atoms()[0][:, None] if isinstance(mu, Measure1D) else mu.points
    for i in range(len(maps)):
        for j in range(i + 1, len(maps)):
            if not check_admissible_pair(maps[i], maps[j], probe):
                raise NotAdmissible(f"maps {i} and {j} do not form an admissible pair")
    return push_forward(mu, average_deformation(maps, lam, grid=probe))


# ---------------------------------------------------------------------------
# Gaussian


def _gaussian_update(M, covs, lam):
    rM = sqrtm_spd(M)
    irM = np.linalg.inv(rM)
    inner = sum(l * sqrtm_spd(rM @ S @ rM) for l, S in zip(lam, covs))
    G = irM @ inner @ inner @ irM
    return 0.5 * (G + G.T)


def fixed_point_residual(M, covs, weights=None):
    """``|| M - sum_j lam_j (M^{1/2} S_j M^{1/2})^{1/2} ||_F``."""
    covs = [np.atleast_2d(np.asarray(S, dtype=float)) for S in covs]
    lam = np.full(len(covs), 1.0 / len(covs)) if weights is None else np.asarray(weights, dtype=float)
    rM = sqrtm_spd(M)
    return float(np.linalg.norm(M - sum(l * sqrtm_spd(rM @ S @ rM) for l, S in zip(lam, covs))))


def gaussian_barycenter_fixedpoint(covs, weights=None, tol=1e-10, max_iter=500):
    """Covariance of the Gaussian barycenter by Picard iteration.

    Iterates ``M <- M^{-1/2} (sum_j lam_j (M^{1/2} S_j M^{1/2})^{1/2})^2 M^{-1/2}``
    from ``M_0 = sum_j lam_j S_j`` until ``||M - G(M)||_F <= tol``.
    """
    covs = [check_spd(np.atleast_2d(np.asarray(S, dtype=float))) for S in covs]
    problem_weights = np.full(len(covs), 1.0 / len(covs)) if weights is None else weights
    lam = _problem([GaussianMeasure(None, S) for S in covs], problem_weights).weights
    M = sum(l * S for l, S in zip(lam, covs))
    M = 0.5 * (M + M.T)
    residual = np.inf
    for it in range(max_iter + 1):
        G = _gaussian_update(M, covs, lam)
        residual = float(np.linalg.norm(M - G))
        if residual <= tol:
            return M
        M = G
    raise NoConvergence(
        f"fixed point not reached in {max_iter} iterations (residual {residual:.3g})",
        residual=residual,
        iterations=max_iter,
    )


def gaussian_iterated_barycenter(covs, weights=None):
    """Iterated barycenter covariance from pairwise Gaussian interpolants."""
    covs = [check_spd(np.atleast_2d(np.asarray(S, dtype=float))) for S in covs]
    gauss = [GaussianMeasure(None, S) for S in covs]
    return iterated_barycenter(gauss, weights).cov


# ---------------------------------------------------------------------------
# multi-marginal oracle


@dataclass(frozen=True, eq=False)
class MultiMarginalSolution:
    support: np.ndarray
    mass: np.ndarray
    barycenter: DiscreteMeasure
    objective: float


def multimarginal_oracle(measures, weights=None, cap=MULTIMARGINAL_CAP):
    """Exact barycenter through the multi-marginal transport LP.

    Minimizes ``sum_j lam_j |x_j - T(x)|^2`` with ``T(x) = sum_j lam_j x_j``
    over couplings of all ``J`` marginals; the barycenter is the image of
    the optimal coupling under ``T``.  Solved with HiGHS dual simplex.
    """
    problem = _problem(measures, weights)
    mus = [mu.to_discrete() if isinstance(mu, Measure1D) else mu for mu in problem.measures]
    if not all(isinstance(mu, DiscreteMeasure) for mu in mus):
        raise KindMismatch("the multi-marginal oracle needs discrete measures")
    if len({mu.dim for mu in mus}) != 1:
        raise KindMismatch("measures live in different dimensions")
    lam = problem.weights
    sizes = [mu.n for mu in mus]
    total = int(np.prod(sizes, dtype=np.int64))
    if total > cap:
        raise TooLarge(f"product support has {total} tuples, cap is {cap}")

    tuples = np.indices(sizes).reshape(len(sizes), -1).T
    pts = np.stack([mu.points[tuples[:, j]] for j, mu in enumerate(mus)], axis=1)  # (K, J, d)
    center = np.einsum("j,kjd->kd", lam, pts)
    cost = np.einsum("j,kj->k", lam, np.sum((pts - center[:, None, :]) ** 2, axis=2))

    rows, offset = [], 0
    for j, n in enumerate(sizes):
        rows.append(offset + tuples[:, j])
        offset += n
    K = tuples.shape[0]
    A = sp.csr_matrix(
        (np.ones(K * len(sizes)), (np.concatenate(rows), np.tile(np.arange(K), len(sizes)))),
        shape=(offset, K),
    )
    b = np.concatenate([mu.weights for mu in mus])
    res = linprog(cost, A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds")
    assert res.status == 0, f"multi-marginal LP failed: {res.message}"
    x = np.maximum(res.x, 0.0)
    keep = x > 0
    mass = x[keep] / x[keep].sum()
    bary = DiscreteMeasure(center[keep], mass)
    return MultiMarginalSolution(tuples[keep], mass, bary, float(cost @ x))
