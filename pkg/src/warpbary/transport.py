"""Optimal transport solvers for quadratic cost.

* one dimension: quantile coupling, exact for atomic measures;
* Gaussian measures: closed-form linear maps;
* general discrete measures: an exact transportation simplex.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotInvertible, NotSPD, TooLarge
from .measures import DiscreteMeasure, Measure1D, grid_nodes, to_measure1d

EIG_FLOOR = 1e-14
LP_CAP = 10**6
CUT_TOL = 1e-14


class MonotoneMap1D:
    """Piecewise-linear nondecreasing map through ``knots``.

    Outside the knot range the map either continues with the boundary slope
    (``extrapolation="linear"``) or is held constant (``"clamp"``).  A single
    knot ``(x0, y0)`` defines the shift ``x + (y0 - x0)`` under linear
    extrapolation.
    """

    scalar_map = True

    def __init__(self, xs, ys, extrapolation="linear"):
        xs = np.asarray(xs, dtype=float).reshape(-1)
        ys = np.asarray(ys, dtype=float).reshape(-1)
        if xs.shape != ys.shape or xs.size == 0:
            raise ValueError("knot arrays must be nonempty and of equal length")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("knots must be finite")
        if np.any(np.diff(xs) <= 0):
            raise NotInvertible("knot abscissae must be strictly increasing")
        if np.any(np.diff(ys) < 0):
            raise NotInvertible("knot values must be nondecreasing")
        if extrapolation not in ("linear", "clamp"):
            raise ValueError(f"unknown extrapolation {extrapolation!r}")
        xs.setflags(write=False)
        ys.setflags(write=False)
        self.xs = xs
        self.ys = ys
        self.extrapolation = extrapolation

    @classmethod
    def identity(cls, lo=0.0, hi=1.0):
        return cls([lo, hi], [lo, hi])

    @classmethod
    def from_function(cls, f, xs, extrapolation="linear"):
        xs = np.asarray(xs, dtype=float)
        return cls(xs, f(xs), extrapolation)

    @property
    def knots(self):
        return list(zip(self.xs.tolist(), self.ys.tolist()))

    def end_slopes(self):
        if self.xs.size == 1:
            return 1.0, 1.0
        left = (self.ys[1] - self.ys[0]) / (self.xs[1] - self.xs[0])
        right = (self.ys[-1] - self.ys[-2]) / (self.xs[-1] - self.xs[-2])
        return left, right

    def slopes(self):
        """Difference quotients over adjacent knots."""
        if self.xs.size == 1:
            return np.ones(1)
        return np.diff(self.ys) / np.diff(self.xs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xs, ys = self.xs, self.ys
        if xs.size == 1:
            out = x + (ys[0] - xs[0]) if self.extrapolation == "linear" else np.full_like(x, ys[0])
            return out
        out = np.interp(x, xs, ys)
        if self.extrapolation == "linear":
            sl, sr = self.end_slopes()
            out = np.where(x < xs[0], ys[0] + sl * (x - xs[0]), out)
            out = np.where(x > xs[-1], ys[-1] + sr * (x - xs[-1]), out)
        return out

    def inverse(self):
        if np.any(np.diff(self.ys) <= 0):
            raise NotInvertible("map is not strictly increasing on its knots")
        if self.extrapolation == "clamp" and self.xs.size > 1:
            # a clamped map is constant past its knots
            raise NotInvertible("a clamped map has no inverse outside its knot range")
        return MonotoneMap1D(self.ys, self.xs, self.extrapolation)

    def is_identity(self, tol=1e-12):
        return bool(np.all(np.abs(self.ys - self.xs) <= tol)) and (
            self.xs.size == 1 or bool(np.all(np.abs(self.slopes() - 1) <= tol))
        )

    def __repr__(self):
        return f"MonotoneMap1D({self.xs.size} knots, {self.extrapolation})"


# ---------------------------------------------------------------------------
# one dimension


def _as_1d(mu):
    return mu if isinstance(mu, Measure1D) else to_measure1d(mu)


def quantile_pairs(mu, nu, m=None):
    """Common quantile partition of two 1D measures.

    Returns ``(dt, qa, qb)`` such that the quantile coupling cost of any
    function ``g`` is ``sum(dt * g(qa, qb))``.  Two atomic measures use the
    union of their cumulative-weight breakpoints (exact); otherwise the
    midpoint grid of size ``m`` (default: the largest grid involved).
    """
    mu, nu = _as_1d(mu), _as_1d(nu)
    if mu.kind == "atomic" and nu.kind == "atomic" and m is None:
        cuts = np.union1d(mu.cumulative(), nu.cumulative())
        # breakpoints that differ only by summation round-off are one cut
        cuts = cuts[np.concatenate((np.diff(cuts) > CUT_TOL, [True]))]
        dt = np.diff(np.concatenate(([0.0], cuts)))
        keep = dt > 0
        mids = (np.concatenate(([0.0], cuts[:-1])) + cuts)[keep] / 2
        dt = dt[keep]
        return dt, mu.quantile(mids), nu.quantile(mids)
    if m is None:
        m = max(g.grid.m for g in (mu, nu) if g.kind == "grid")
    qa = mu.to_quantile_grid(m).values
    qb = nu.to_quantile_grid(m).values
    return np.full(m, 1.0 / m), qa, qb


def w2_1d(mu, nu, m=None):
    """2-Wasserstein distance between two 1D measures via quantile coupling."""
    dt, qa, qb = quantile_pairs(mu, nu, m)
    return float(np.sqrt(max(dt @ (qa - qb) ** 2, 0.0)))


def quantile_integral(nu, s):
    """``int_0^s F^{-1}(u) du`` for the quantile function used by ``nu``."""
    s = np.asarray(s, dtype=float)
    if nu.kind == "atomic":
        c = nu.cumulative()
        lo = np.concatenate(([0.0], c[:-1]))
        overlap = np.clip(s[..., None] - lo, 0.0, None)
        overlap = np.minimum(overlap, c - lo)
        return overlap @ nu.xs
    t = nu.grid.nodes
    v = nu.grid.values
    # piecewise linear on [t_1, t_m], constant outside
    knots_t = np.concatenate(([0.0], t, [1.0]))
    knots_v = np.concatenate(([v[0]], v, [v[-1]]))
    seg = np.diff(knots_t) * (knots_v[1:] + knots_v[:-1]) / 2
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    k = np.clip(np.searchsorted(knots_t, s, side="right") - 1, 0, knots_t.size - 2)
    ds = s - knots_t[k]
    slope = np.diff(knots_v)[k] / np.diff(knots_t)[k]
    return cum[k] + ds * knots_v[k] + 0.5 * slope * ds**2


def brenier_map_1d(mu, nu):
    """Monotone map from ``mu`` to ``nu``.

    Grid-kind sources map node values to the target's quantiles at the same
    nodes.  Atomic sources map each atom to the target's mean over the
    atom's quantile interval (the barycentric projection), which is the
    quantile coupling whenever no atom of ``mu`` needs splitting.
    """
    mu, nu = _as_1d(mu), _as_1d(nu)
    if mu.kind == "grid":
        v = mu.grid.values
        targets = nu.quantile(mu.grid.nodes)
        xs, idx = np.unique(v, return_inverse=True)
        ys = np.bincount(idx, weights=targets) / np.bincount(idx)
    else:
        c = mu.cumulative()
        lo = np.concatenate(([0.0], c[:-1]))
        mass = quantile_integral(nu, c) - quantile_integral(nu, lo)
        xs = mu.xs
        ys = mass / (c - lo)
    ys = np.maximum.accumulate(ys)
    return MonotoneMap1D(xs, ys)


# ---------------------------------------------------------------------------
# discrete LP


@dataclass(frozen=True, eq=False)
class TransportPlan:
    source: DiscreteMeasure
    target: DiscreteMeasure
    coupling: np.ndarray
    cost: float
    row_potential: np.ndarray = None
    col_potential: np.ndarray = None

    @property
    def dual_value(self):
        return float(self.source.weights @ self.row_potential + self.target.weights @ self.col_potential)

    def support(self, threshold=0.0):
        """Cells ``(i, j, mass)`` carrying more than ``threshold`` mass."""
        ii, jj = np.nonzero(self.coupling > threshold)
        return ii, jj, self.coupling[ii, jj]


def sq_cost_matrix(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    # explicit differences; the |x|^2 + |y|^2 - 2xy expansion loses digits
    d = np.zeros((x.shape[0], y.shape[0]))
    for k in range(x.shape[1]):
        d += (x[:, k, None] - y[None, :, k]) ** 2
    return d


class _Basis:
    """Spanning-tree basis of the transportation simplex.

    Nodes ``0..n-1`` are rows, ``n..n+m-1`` are columns.
    """

    def __init__(self, n, m):
        self.n, self.m = n, m
        self.adj = [set() for _ in range(n + m)]

    def add(self, i, j):
        self.adj[i].add(self.n + j)
        self.adj[self.n + j].add(i)

    def remove(self, i, j):
        self.adj[i].discard(self.n + j)
        self.adj[self.n + j].discard(i)

    def potentials(self, C):
        n = self.n
        u = np.zeros(n)
        v = np.zeros(self.m)
        seen = np.zeros(n + self.m, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            node = queue.popleft()
            for other in sorted(self.adj[node]):
                if seen[other]:
                    continue
                seen[other] = True
                if node < n:
                    v[other - n] = C[node, other - n] - u[node]
                else:
                    u[other] = C[other, node - n] - v[node - n]
                queue.append(other)
        return u, v

    def path(self, i, j):
        """Tree path from row ``i`` to column ``j`` as a list of cells."""
        target = self.n + j
        parent = {i: None}
        queue = deque([i])
        while queue:
            node = queue.popleft()
            if node == target:
                break
            for other in sorted(self.adj[node]):
                if other not in parent:
                    parent[other] = node
                    queue.append(other)
        nodes = [target]
        while parent[nodes[-1]] is not None:
            nodes.append(parent[nodes[-1]])
        nodes.reverse()
        cells = []
        for a, b in zip(nodes[:-1], nodes[1:]):
            cells.append((a, b - self.n) if a < self.n else (b, a - self.n))
        return cells


def _northwest(a, b, basis):
    n, m = a.size, b.size
    ra, rb = a.copy(), b.copy()
    flow = np.zeros((n, m))
    i = j = 0
    while True:
        x = min(ra[i], rb[j])
        flow[i, j] = x
        basis.add(i, j)
        ra[i] -= x
        rb[j] -= x
        if i == n - 1 and j == m - 1:
            break
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1
    return flow


def solve_ot_lp(mu, nu, cap=LP_CAP, max_iter=None):
    """Exact discrete optimal transport for squared Euclidean cost.

    Transportation simplex on the spanning-tree basis: northwest-corner
    start, Dantzig entering rule (first minimum in row-major order), first
    blocking cell leaves.  Deterministic for a given input order.
    """
    n, m = mu.n, nu.n
    if n * m > cap:
        raise TooLarge(f"coupling has {n * m} entries, cap is {cap}")
    if mu.dim != nu.dim:
        raise DimensionMismatch("source and target live in different dimensions")
    C = sq_cost_matrix(mu.points, nu.points)
    a = np.asarray(mu.weights, dtype=float)
    b = np.asarray(nu.weights, dtype=float)
    basis = _Basis(n, m)
    flow = _northwest(a, b, basis)
    tol = 1e-13 * max(1.0, float(C.max()))
    if max_iter is None:
        max_iter = 50 * (n + m) ** 2 + 1000
    for _ in range(max_iter):
        u, v = basis.potentials(C)
        R = C - u[:, None] - v[None, :]
        k = int(np.argmin(R))
        i, j = divmod(k, m)
        if R[i, j] >= -tol:
            break
        cells = basis.path(i, j)
        minus = cells[0::2]
        plus = cells[1::2]
        theta = min(flow[c] for c in minus)
        leave = next(c for c in minus if flow[c] == theta)
        for c in plus:
            flow[c] += theta
        for c in minus:
            flow[c] -= theta
        flow[i, j] += theta
        flow[leave] = 0.0
        basis.remove(*leave)
        basis.add(i, j)
    else:
        raise NoConvergence("transportation simplex exceeded its pivot budget", iterations=max_iter)
    flow = np.maximum(flow, 0.0)
    cost = float(np.sum(flow * C))
    return TransportPlan(mu, nu, flow, cost, u, v)


# ---------------------------------------------------------------------------
# Gaussian


def _eigh_spd(S, floor=EIG_FLOOR):
    S = np.asarray(S, dtype=float)
    if S.ndim == 0:
        S = S.reshape(1, 1)
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    if w[0] <= floor:
        raise NotSPD(f"smallest eigenvalue {w[0]:.3g} is below the floor {floor:g}")
    return w, V


def sqrtm_spd(S, floor=EIG_FLOOR):
    """Symmetric square root through the eigendecomposition."""
    w, V = _eigh_spd(S, floor)
    return (V * np.sqrt(w)) @ V.T


def inv_sqrtm_spd(S, floor=EIG_FLOOR):
    w, V = _eigh_spd(S, floor)
    return (V / np.sqrt(w)) @ V.T


def gaussian_ot_map(S, T):
    """Linear optimal map ``A`` from N(0, S) to N(0, T).

    ``A = T^{1/2} (T^{1/2} S T^{1/2})^{-1/2} T^{1/2}``; it is SPD and
    satisfies ``A S A = T``.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float))
    _eigh_spd(S)
    rT = sqrtm_spd(T)
    A = rT @ inv_sqrtm_spd(rT @ S @ rT) @ rT
    return 0.5 * (A + A.T)


def w2_gaussian(mu, nu):
    """Closed-form W2 between two :class:`~warpbary.measures.GaussianMeasure`."""
    rT = sqrtm_spd(nu.cov)
    cross = sqrtm_spd(rT @ mu.cov @ rT)
    val = np.sum((mu.mean - nu.mean) ** 2) + np.trace(mu.cov + nu.cov - 2 * cross)
    return float(np.sqrt(max(val, 0.0)))


__all__ = [
    "MonotoneMap1D",
    "TransportPlan",
    "brenier_map_1d",
    "gaussian_ot_map",
    "grid_nodes",
    "inv_sqrtm_spd",
    "quantile_integral",
    "quantile_pairs",
    "solve_ot_lp",
    "sq_cost_matrix",
    "sqrtm_spd",
    "w2_1d",
    "w2_gaussian",
]
