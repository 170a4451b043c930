"""Probability measure representations.

Three flavours are used throughout the package:

* :class:`DiscreteMeasure` -- weighted point cloud in R^d.
* :class:`Measure1D` -- a measure on the line, either atomic (sorted merged
  atoms) or backed by a :class:`QuantileGrid`.
* :class:`GaussianMeasure` -- mean and SPD covariance.

All objects are immutable; arrays are copied and flagged read-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadWeights, DomainError, EmptyMeasure, NonFinite, NotSPD, OutOfRange

WEIGHT_TOL = 1e-12
RENORMALIZE_TOL = 1e-6
MERGE_TOL = 1e-12
SYM_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def grid_nodes(m):
    """Midpoint nodes ``(k - 1/2) / m`` for ``k = 1..m``."""
    return (np.arange(m) + 0.5) / m


def _check_weights(w, n):
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != n:
        raise BadWeights(f"expected {n} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)):
        raise NonFinite("weights contain NaN or infinity")
    if np.any(w < 0):
        raise BadWeights("negative weight")
    total = w.sum()
    if abs(total - 1.0) > RENORMALIZE_TOL:
        raise BadWeights(f"weights sum to {total!r}, not 1")
    return w / total


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted atoms ``points[i]`` with masses ``weights[i]``."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise EmptyMeasure("a measure needs at least one atom in d >= 1")
        if not np.all(np.isfinite(pts)):
            raise NonFinite("points contain NaN or infinity")
        w = _check_weights(self.weights, pts.shape[0])
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def mean(self):
        return self.weights @ self.points

    def second_moment(self):
        return float(self.weights @ np.sum(self.points**2, axis=1))

    def __repr__(self):
        return f"DiscreteMeasure(n={self.n}, d={self.dim})"


def make_discrete(points, weights=None):
    """Build a validated :class:`DiscreteMeasure`.

    Missing weights default to uniform ``1/n``.  Weights whose sum drifts
    from one by at most 1e-6 are renormalized; larger drift is an error.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise EmptyMeasure("no atoms")
    if pts.ndim == 1:
        pts = pts[:, None]
    if weights is None:
        weights = np.full(pts.shape[0], 1.0 / pts.shape[0])
    return DiscreteMeasure(pts, weights)


def second_moment(mu):
    """``sum_i w_i |x_i|^2``."""
    return mu.second_moment()


@dataclass(frozen=True, eq=False)
class QuantileGrid:
    """Quantile function sampled at the midpoint nodes ``(k - 1/2)/m``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.shape[0] < 2:
            raise OutOfRange("a quantile grid needs m >= 2")
        if not np.all(np.isfinite(v)):
            raise NonFinite("grid values contain NaN or infinity")
        if np.any(np.diff(v) < 0):
            raise BadWeights("quantile grid values must be nondecreasing")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def nodes(self):
        return grid_nodes(self.m)


class Measure1D:
    """A probability measure on the real line.

    ``kind == "atomic"``: strictly increasing ``xs`` with masses ``ws``.
    ``kind == "grid"``: a :class:`QuantileGrid`; as a measure it is the
    uniform distribution over the grid values, while :meth:`quantile`
    interpolates linearly between nodes (constant past the end nodes).
    """

    __slots__ = ("kind", "xs", "ws", "grid")

    def __init__(self, xs=None, ws=None, grid=None):
        if grid is not None:
            if not isinstance(grid, QuantileGrid):
                grid = QuantileGrid(grid)
            self.kind = "grid"
            self.grid = grid
            self.xs = None
            self.ws = None
            return
        xs = np.asarray(xs, dtype=float).reshape(-1)
        if xs.size == 0:
            raise EmptyMeasure("no atoms")
        if not np.all(np.isfinite(xs)):
            raise NonFinite("atoms contain NaN or infinity")
        if ws is None:
            ws = np.full(xs.shape[0], 1.0 / xs.shape[0])
        ws = _check_weights(ws, xs.shape[0])
        order = np.argsort(xs, kind="stable")
        xs, ws = xs[order], ws[order]
        # merge atoms closer than MERGE_TOL into the first of each run
        new_run = np.concatenate(([True], np.diff(xs) > MERGE_TOL))
        idx = np.cumsum(new_run) - 1
        merged_w = np.bincount(idx, weights=ws)
        keep = merged_w > 0
        merged_x = xs[new_run][keep]
        merged_w = merged_w[keep]
        self.kind = "atomic"
        self.xs = _frozen(merged_x)
        self.ws = _frozen(merged_w / merged_w.sum())
        self.grid = None

    @classmethod
    def from_grid(cls, values):
        return cls(grid=QuantileGrid(values))

    @classmethod
    def dirac(cls, x):
        return cls([x], [1.0])

    def __repr__(self):
        if self.kind == "grid":
            return f"Measure1D(grid, m={self.grid.m})"
        return f"Measure1D(atomic, n={self.xs.shape[0]})"

    # --- atom view -------------------------------------------------------
    def atoms(self):
        """``(x, w)`` arrays; grid measures expose their values as uniform atoms."""
        if self.kind == "atomic":
            return self.xs, self.ws
        v = self.grid.values
        return v, np.full(v.shape[0], 1.0 / v.shape[0])

    def cumulative(self):
        """Cumulative weights of the atomic view, last entry exactly 1."""
        _, w = self.atoms()
        c = np.cumsum(w)
        c[-1] = 1.0
        return c

    # --- distribution functions -------------------------------------------
    def cdf(self, x):
        xs, ws = self.atoms()
        c = np.concatenate(([0.0], self.cumulative()))
        return c[np.searchsorted(xs, np.asarray(x, dtype=float), side="right")]

    def quantile(self, t):
        """Left-continuous generalized inverse ``inf{x : F(x) >= t}``."""
        t_arr = np.asarray(t, dtype=float)
        if np.any((t_arr <= 0) | (t_arr >= 1)) or not np.all(np.isfinite(t_arr)):
            raise OutOfRange("quantile level must lie in the open interval (0, 1)")
        if self.kind == "grid":
            out = np.interp(t_arr, self.grid.nodes, self.grid.values)
        else:
            k = np.searchsorted(self.cumulative(), t_arr, side="left")
            out = self.xs[np.minimum(k, self.xs.shape[0] - 1)]
        return float(out) if np.ndim(out) == 0 else out

    def to_quantile_grid(self, m):
        if m < 2:
            raise OutOfRange("grid size must be at least 2")
        if self.kind == "grid" and self.grid.m == m:
            return self.grid
        # left-inverse evaluations are monotone; maximum.accumulate guards
        # against interpolation round-off
        return QuantileGrid(np.maximum.accumulate(self.quantile(grid_nodes(m))))

    # --- moments ------------------------------------------------------------
    def mean(self):
        x, w = self.atoms()
        return float(w @ x)

    def second_moment(self):
        x, w = self.atoms()
        return float(w @ x**2)

    def support(self):
        x, _ = self.atoms()
        return float(x[0]), float(x[-1])

    def to_discrete(self):
        x, w = self.atoms()
        return DiscreteMeasure(x[:, None], w)


def quantile(mu, t):
    return mu.quantile(t)


def to_quantile_grid(mu, m):
    return mu.to_quantile_grid(m)


def to_measure1d(mu):
    """Merge a one-dimensional :class:`DiscreteMeasure` into a :class:`Measure1D`."""
    if isinstance(mu, Measure1D):
        return mu
    if mu.dim != 1:
        raise OutOfRange(f"expected a 1D measure, got d={mu.dim}")
    return Measure1D(mu.points[:, 0], mu.weights)


def push_forward(mu, T):
    """Image measure ``T_# mu``.

    ``T`` is any callable on points: a :class:`~warpbary.deformations.Deformation`
    (acting on ``(n, d)`` arrays) or, for 1D measures, a scalar monotone map.
    Atom weights are carried over unchanged; coincident images merge.
    """
    if isinstance(mu, Measure1D):
        x, w = mu.atoms()
        y = _apply_1d(T, x)
        if not np.all(np.isfinite(y)):
            raise DomainError("map is undefined on part of the support")
        if mu.kind == "grid":
            return Measure1D.from_grid(np.sort(y))
        return Measure1D(y, w)
    y = np.asarray(T(mu.points), dtype=float)
    if y.shape != mu.points.shape or not np.all(np.isfinite(y)):
        raise DomainError("map is undefined on part of the support")
    return DiscreteMeasure(y, mu.weights)


def _apply_1d(T, x):
    if getattr(T, "scalar_map", False):
        return np.asarray(T(x), dtype=float)
    return np.asarray(T(x[:, None]), dtype=float)[:, 0]


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        d = cov.shape[0]
        mean = np.zeros(d) if self.mean is None else np.asarray(self.mean, dtype=float).reshape(-1)
        if cov.shape != (d, d) or mean.shape != (d,):
            raise NotSPD("mean/covariance shapes do not match")
        if not (np.all(np.isfinite(cov)) and np.all(np.isfinite(mean))):
            raise NonFinite("Gaussian parameters must be finite")
        check_spd(cov)
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(0.5 * (cov + cov.T)))

    @property
    def dim(self):
        return self.mean.shape[0]


def check_spd(S, floor=1e-14):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotSPD("matrix is not square")
    if np.max(np.abs(S - S.T), initial=0.0) > SYM_TOL * max(1.0, np.max(np.abs(S))):
        raise NotSPD("matrix is not symmetric")
    if np.linalg.eigvalsh(0.5 * (S + S.T))[0] <= floor:
        raise NotSPD("matrix is not positive definite")
    return S
