"""Statistics on a 1D barycenter: transport maps, discriminant features and
geodesic PCA of quantile residuals.

Everything is computed on the midpoint quantile grid ``t_k = (k - 1/2)/m``
with inner product ``<f, g> = (1/m) sum_k f(t_k) g(t_k)``.  With the
barycenter ``mu_B`` as base point, the residual of ``mu_j`` is
``r_j = F_j^{-1} - F_B^{-1}``. A geodesic ``t -> ((1-t) Id + t T)_# mu_B``
then becomes the line ``F_B^{-1} + t u`` with ``u = (T - Id) o F_B^{-1}``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BadK, DegenerateDirection
from .measures import Measure1D, to_measure1d
from .transport import MonotoneMap1D, brenier_map_1d, quantile_pairs

DEFAULT_GRID = 512
IDENTITY_TOL = 1e-12
DEGENERATE_TOL = 1e-12


class GeodesicRangeWarning(UserWarning):
    """The interpolating map stopped being monotone; the curve left its geodesic range."""


def _as_1d(mu):
    return mu if isinstance(mu, Measure1D) else to_measure1d(mu)


def _grid(mu, m):
    return _as_1d(mu).to_quantile_grid(m).values


def transport_to_barycenter(mu_B, mu_j):
    """Monotone map ``S_j`` with ``(S_j)_# mu_B = mu_j``."""
    return brenier_map_1d(mu_B, mu_j)


def discriminant_features(mu_B, measures, m=None):
    """Squared transport cost ``||S_j - Id||^2_{L2(mu_B)}`` for each measure.

    Evaluated as ``sum dt (F_j^{-1} - F_B^{-1})^2``, i.e. ``S_j o F_B^{-1}``
    is replaced by ``F_j^{-1}``; the two agree whenever ``mu_B`` has no
    atoms that must be split, and the quantile form is exact always.
    """
    out = np.empty(len(measures))
    for j, mu in enumerate(measures):
        dt, qa, qb = quantile_pairs(mu_B, mu, m)
        out[j] = dt @ (qb - qa) ** 2
    return out


# ---------------------------------------------------------------------------
# geodesics


@dataclass(frozen=True, eq=False)
class GeodesicCurve:
    """``t -> ((1 - t) Id + t T)_# base`` with ``T = direction``."""

    base: Measure1D
    direction: MonotoneMap1D
    m: int = DEFAULT_GRID

    def __post_init__(self):
        object.__setattr__(self, "base", _as_1d(self.base))
        if not isinstance(self.direction, MonotoneMap1D):
            raise TypeError("direction must be a MonotoneMap1D")
        if np.any(np.diff(self.direction.ys) < 0):
            raise ValueError("direction must be nondecreasing on its knots")
        if self.m < 2:
            raise ValueError("grid size must be at least 2")

    def base_quantiles(self):
        return _grid(self.base, self.m)

    def displacement(self):
        """``(T - Id) o F^{-1}`` on the grid."""
        q = self.base_quantiles()
        return self.direction(q) - q


def _slope_bounds(T):
    s = T.slopes()
    if T.extrapolation == "clamp":
        s = np.concatenate((s, [0.0]))
    return float(np.min(s)), float(np.max(s))


def _is_shift(T):
    if T.extrapolation == "clamp":
        return False
    return T.xs.size == 1 or bool(np.all(np.abs(T.slopes() - 1) <= IDENTITY_TOL))


def validity_range(curve):
    """Parameter interval ``(1/(a-1), 1/(b-1))`` where ``a <= T' <= b``.

    An end with no slope on the corresponding side of 1 is unbounded, so
    identities and pure shifts give the whole line.  This is the published
    formula; :func:`monotone_range` gives the exact interval on which the
    interpolating map stays nondecreasing.
    """
    T = curve.direction
    if T.is_identity(IDENTITY_TOL) or _is_shift(T):
        return -np.inf, np.inf
    a, b = _slope_bounds(T)
    lo = 1.0 / (a - 1.0) if a < 1 - IDENTITY_TOL else -np.inf
    hi = 1.0 / (b - 1.0) if b > 1 + IDENTITY_TOL else np.inf
    return lo, hi


def monotone_range(curve):
    """Exact ``t`` interval where ``(1 - t) Id + t T`` is nondecreasing."""
    T = curve.direction
    if T.is_identity(IDENTITY_TOL) or _is_shift(T):
        return -np.inf, np.inf
    a, b = _slope_bounds(T)
    lo = 1.0 / (1.0 - b) if b > 1 + IDENTITY_TOL else -np.inf
    hi = 1.0 / (1.0 - a) if a < 1 - IDENTITY_TOL else np.inf
    return lo, hi


def geodesic_point(curve, t):
    """The measure ``((1 - t) Id + t T)_# base`` on the curve's grid.

    Any real ``t`` is accepted.  Outside the monotone range the
    interpolating map folds over; a :class:`GeodesicRangeWarning` is issued
    and the pushed values are sorted into a valid quantile grid.
    """
    q = curve.base_quantiles()
    y = (1.0 - t) * q + t * curve.direction(q)
    lo, hi = monotone_range(curve)
    if not (lo <= t <= hi) or np.any(np.diff(y) < 0):
        warnings.warn(f"t={t!r} is outside the monotone range [{lo}, {hi}]", GeodesicRangeWarning, stacklevel=2)
        y = np.sort(y)
    return Measure1D.from_grid(y)


def dist_to_geodesic(mu_j, curve, mu_B=None):
    """``(d2, t_star)``: squared distance from ``mu_j`` to the line through ``mu_B``.

    ``t_star = <r, u> / ||u||^2`` and ``d2 = ||r||^2 - <r, u>^2 / ||u||^2``
    with ``r = F_j^{-1} - F_B^{-1}`` and ``u`` the curve's displacement.
    """
    m = curve.m
    qB = curve.base_quantiles() if mu_B is None else _grid(mu_B, m)
    u = curve.direction(qB) - qB
    r = _grid(mu_j, m) - qB
    uu = np.mean(u * u)
    if not np.sqrt(uu) > DEGENERATE_TOL:
        raise DegenerateDirection("direction is the identity on the base support")
    ru = np.mean(r * u)
    d2 = max(float(np.mean(r * r) - ru * ru / uu), 0.0)
    return d2, float(ru / uu)


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True, eq=False)
class PcaResult:
    """Geodesic PCA on the quantile grid.

    ``components[i]`` is a unit vector ``v_i``; the curve of component ``i``
    uses the direction map ``Id + c_i v_i o F_B`` where ``c_i =
    scales[i] <= 1`` keeps the map nondecreasing.  ``scores[j, i]`` is the
    projection parameter ``t*`` of measure ``j`` on that curve.
    """

    barycenter: object
    residuals: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    scores: np.ndarray
    distances: np.ndarray
    directions: list
    scales: np.ndarray
    validity_ranges: list
    monotone_ranges: list = field(default_factory=list)

    @property
    def k(self):
        return self.components.shape[0]

    def to_dict(self):
        def interval(r):
            return [None if not np.isfinite(v) else float(v) for v in r]

        return {
            "schema": 1,
            "grid": self.barycenter.values.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "components": self.components.tolist(),
            "scales": self.scales.tolist(),
            "scores": self.scores.tolist(),
            "distances": self.distances.tolist(),
            "validity_ranges": [interval(r) for r in self.validity_ranges],
            "monotone_ranges": [interval(r) for r in self.monotone_ranges],
        }


def _fill_basis(V, count, m):
    """Extend the rows of ``V`` by ``count`` grid-orthonormal vectors."""
    t = (np.arange(m) + 0.5) / m
    out = list(V)
    freq = 0
    while len(out) < len(V) + count:
        cand = np.cos(np.pi * freq * t) if freq else np.ones(m)
        freq += 1
        for v in out:
            cand = cand - np.mean(cand * v) * v
        nrm = np.sqrt(np.mean(cand * cand))
        if nrm > 1e-8:
            out.append(cand / nrm)
    return np.array(out[len(V):]).reshape(count, m)


def _fix_sign(v):
    return -v if v[np.argmax(np.abs(v))] < 0 else v


def _direction_map(qB, v):
    xs, idx = np.unique(qB, return_inverse=True)
    dv = np.bincount(idx, weights=v) / np.bincount(idx)
    if xs.size == 1:
        return MonotoneMap1D(xs, xs + dv), 1.0
    dx = np.diff(xs)
    dd = np.diff(dv)
    neg = dd < 0
    scale = 1.0
    if np.any(neg):
        scale = min(1.0, float(np.min(dx[neg] / -dd[neg])) * (1 - 1e-9))
    ys = np.maximum.accumulate(xs + scale * dv)
    return MonotoneMap1D(xs, ys), scale


def geodesic_pca(measures, mu_B, k=1, m=DEFAULT_GRID):
    """Functional PCA of quantile residuals around ``mu_B``.

    Solves the ``J x J`` Gram eigenproblem ``G = R R^T / m``; component
    ``v_i = R^T a_i / sqrt(lambda_i)`` has unit grid norm and eigenvalue
    ``(1/J) sum_j <r_j, v_i>^2 = lambda_i / J``.  Components beyond the rank
    of ``R`` are completed orthogonally and carry eigenvalue zero.
    """
    J = len(measures)
    if not isinstance(k, (int, np.integer)) or k < 1 or k > min(J, m):
        raise BadK(f"k must be an integer in [1, {min(J, m)}], got {k!r}")
    mu_B = _as_1d(mu_B)
    qB = _grid(mu_B, m)
    R = np.array([_grid(mu, m) - qB for mu in measures])
    G = R @ R.T / m
    lam, A = np.linalg.eigh(0.5 * (G + G.T))
    order = np.argsort(-lam, kind="stable")
    lam, A = lam[order], A[:, order]
    tol = max(float(lam[0]), 0.0) * 1e-12 + 1e-300
    comps = []
    for i in range(k):
        if lam[i] <= tol:
            break
        v = R.T @ A[:, i] / np.sqrt(lam[i])
        for w in comps:
            v = v - np.mean(v * w) * w
        v = v / np.sqrt(np.mean(v * v))
        comps.append(_fix_sign(v))
    if len(comps) < k:
        extra = _fill_basis(np.array(comps).reshape(len(comps), m), k - len(comps), m)
        comps.extend(_fix_sign(v) for v in extra)
    V = np.array(comps)
    proj = R @ V.T / m
    eigenvalues = np.mean(proj**2, axis=0)
    # floating noise can reorder numerically tied values
    eigenvalues = np.minimum.accumulate(eigenvalues)

    directions, scales, vranges, mranges = [], [], [], []
    scores = np.zeros((J, k))
    dists = np.zeros((J, k))
    for i in range(k):
        T, c = _direction_map(qB, V[i])
        curve = GeodesicCurve(mu_B, T, m)
        directions.append(T)
        scales.append(c)
        vranges.append(validity_range(curve))
        mranges.append(monotone_range(curve))
        for j, mu in enumerate(measures):
            dists[j, i], scores[j, i] = dist_to_geodesic(mu, curve, mu_B)
    return PcaResult(
        barycenter=mu_B.to_quantile_grid(m),
        residuals=R,
        components=V,
        eigenvalues=eigenvalues,
        scores=scores,
        distances=dists,
        directions=directions,
        scales=np.array(scales),
        validity_ranges=vranges,
        monotone_ranges=mranges,
    )
