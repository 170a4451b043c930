"""Template estimation from warped samples, and the simulation experiments
that exercise it.

Every random stream derives from one integer seed through
:class:`numpy.random.SeedSequence` children feeding Philox generators, so
reports are bit-reproducible.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .barycenter import admissible_barycenter, iterated_barycenter
from .deformations import average_deformation, sample_deformations
from .errors import BadBandwidth, EmptyGroup, WeightError
from .measures import DiscreteMeasure, Measure1D, grid_nodes, make_discrete, push_forward, to_measure1d
from .transport import quantile_pairs, w2_1d

DEFAULT_GRID = 512
QUANTILE_TOL = 1e-10
WINDOW = 9.0


def stream(seed, *key):
    """Independent Philox generator for ``(seed, key...)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


# ---------------------------------------------------------------------------
# smoothing


@dataclass(frozen=True, eq=False)
class SmoothedMeasure:
    """``base * N(0, bandwidth I)`` materialized as ``measure``.

    ``representation`` is ``"mixture_1d"`` (quantile grid of the exact
    mixture), ``"sampled"`` (perturbed copies of the atoms) or ``"none"``
    when the bandwidth is zero.
    """

    base: object
    bandwidth: float
    representation: str
    measure: object
    payload: dict = field(default_factory=dict)


def _mixture_cdf_pdf(x, xs, cw, ws, sd):
    """CDF and density of the mixture at ``x``; ``xs`` sorted, ``cw`` its cumulative weights.

    Atoms farther than ``WINDOW`` standard deviations contribute 0 or their
    full weight, so only a sliding window is evaluated.
    """
    lo = np.searchsorted(xs, x - WINDOW * sd, side="left")
    hi = np.searchsorted(xs, x + WINDOW * sd, side="right")
    width = max(int(np.max(hi - lo, initial=0)), 1)
    idx = lo[:, None] + np.arange(width)[None, :]
    inside = idx < hi[:, None]
    idx = np.minimum(idx, xs.size - 1)
    u = (x[:, None] - xs[idx]) / sd
    w = np.where(inside, ws[idx], 0.0)
    below = np.concatenate(([0.0], cw))[lo]
    F = below + np.sum(w * ndtr(u), axis=1)
    f = np.sum(w * np.exp(-0.5 * u**2), axis=1) / (sd * np.sqrt(2 * np.pi))
    return F, f


def mixture_quantiles(xs, ws, eps, t):
    """Quantiles of ``sum_i ws[i] N(xs[i], eps)`` at levels ``t``.

    Safeguarded Newton inside a shrinking bisection bracket, to ``1e-10``.
    """
    order = np.argsort(xs, kind="stable")
    xs = np.asarray(xs, dtype=float)[order]
    ws = np.asarray(ws, dtype=float)[order]
    cw = np.cumsum(ws)
    t = np.asarray(t, dtype=float)
    sd = np.sqrt(eps)
    z = ndtri(t)
    lo = xs[0] + sd * z
    hi = xs[-1] + sd * z
    x = 0.5 * (lo + hi)
    for _ in range(200):
        F, f = _mixture_cdf_pdf(x, xs, cw, ws, sd)
        below = F < t
        lo = np.where(below, x, lo)
        hi = np.where(below, hi, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = x - (F - t) / f
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        new = np.where(bad, 0.5 * (lo + hi), cand)
        done = (np.abs(new - x) < 0.1 * QUANTILE_TOL) | (hi - lo < QUANTILE_TOL)
        x = new
        if np.all(done):
            break
    return x


def smooth(mu, eps, m=DEFAULT_GRID, samples_per_atom=8, seed=0, moment_match=True):
    """Gaussian kernel smoothing of an empirical measure.

    1D inputs give the exact mixture's quantile grid of size ``m``.  In
    d >= 2 each atom is replaced by ``samples_per_atom`` copies perturbed
    by ``sqrt(eps) Z``; with ``moment_match`` the noise within each block is
    centered and rescaled to mean squared norm ``d``.
    """
    if eps < 0 or not np.isfinite(eps):
        raise BadBandwidth(f"bandwidth must be a finite nonnegative number, got {eps!r}")
    if eps == 0:
        return SmoothedMeasure(mu, 0.0, "none", mu)
    if isinstance(mu, Measure1D) or mu.dim == 1:
        m1 = mu if isinstance(mu, Measure1D) else to_measure1d(mu)
        xs, ws = m1.atoms()
        vals = mixture_quantiles(xs, ws, eps, grid_nodes(m))
        vals = np.maximum.accumulate(vals)
        return SmoothedMeasure(mu, float(eps), "mixture_1d", Measure1D.from_grid(vals), {"m": m})
    rng = stream(seed, 0)
    k = samples_per_atom
    n, d = mu.points.shape
    Z = rng.standard_normal((n, k, d))
    if moment_match:
        if k > 1:
            Z -= Z.mean(axis=1, keepdims=True)
        Z *= np.sqrt(d / np.mean(np.sum(Z**2, axis=2), axis=1))[:, None, None]
    pts = (mu.points[:, None, :] + np.sqrt(eps) * Z).reshape(n * k, d)
    w = np.repeat(mu.weights / k, k)
    out = DiscreteMeasure(pts, w)
    return SmoothedMeasure(mu, float(eps), "sampled", out, {"samples_per_atom": k, "seed": seed})


def resolve_bandwidth(bandwidth, n):
    if bandwidth is None or bandwidth == "1/n":
        return 1.0 / n
    try:
        value = float(bandwidth)
    except (TypeError, ValueError):
        raise BadBandwidth(f"bandwidth must be a number or '1/n', got {bandwidth!r}") from None
    if value < 0:
        raise BadBandwidth("bandwidth must be nonnegative")
    return value


def _group_seed(seed, j):
    return int(np.random.SeedSequence(seed, spawn_key=(j,)).generate_state(1)[0])


def template_estimate(groups, bandwidth="1/n", m=DEFAULT_GRID, weights=None, seed=0, samples_per_atom=8):
    """Iterated barycenter of the smoothed empirical measures of ``groups``.

    ``groups`` is a sequence of ``(n_j, d)`` (or ``(n_j,)``) sample arrays.
    The default bandwidth is ``1/n_j`` per group.
    """
    groups = [np.asarray(g, dtype=float) for g in groups]
    if not groups:
        raise EmptyGroup("no groups given")
    smoothed = []
    for j, g in enumerate(groups):
        if g.size == 0:
            raise EmptyGroup(f"group {j} is empty")
        mu = make_discrete(g)
        eps = resolve_bandwidth(bandwidth, mu.n)
        measure = smooth(mu, eps, m=m, samples_per_atom=samples_per_atom, seed=_group_seed(seed, j)).measure
        if isinstance(measure, DiscreteMeasure) and measure.dim == 1:
            measure = to_measure1d(measure)
        smoothed.append(measure)
    return iterated_barycenter(smoothed, weights)


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """Per-J replicate errors ``W2(estimate, template)``."""

    J_values: tuple
    errors: np.ndarray
    config: dict
    mode: str = "exact"

    def __post_init__(self):
        errs = np.asarray(self.errors, dtype=float)
        assert np.all(errs >= 0), "W2 errors are nonnegative"
        errs.setflags(write=False)
        object.__setattr__(self, "errors", errs)
        object.__setattr__(self, "J_values", tuple(int(j) for j in self.J_values))

    @property
    def mean_error(self):
        return self.errors.mean(axis=1)

    def quantiles(self, qs=(0.1, 0.5, 0.9)):
        return np.quantile(self.errors, qs, axis=1).T

    def exceedance(self, level):
        """Fraction of replicates with error at least ``level``, per J."""
        return np.mean(self.errors >= level, axis=1)

    def to_dict(self):
        q = self.quantiles()
        return {
            "schema": 1,
            "mode": self.mode,
            "config": self.config,
            "J": list(self.J_values),
            "mean_error": self.mean_error.tolist(),
            "quantiles": {"q10": q[:, 0].tolist(), "q50": q[:, 1].tolist(), "q90": q[:, 2].tolist()},
            "errors": self.errors.tolist(),
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "J", "replicate", "error"])
        for J, row in zip(self.J_values, self.errors):
            for r, e in enumerate(row):
                w.writerow([self.mode, J, r, format(float(e), ".17g")])
        return buf.getvalue()


def _sample_1d(template, n, rng):
    xs, ws = template.atoms()
    return xs[rng.choice(xs.size, size=n, p=ws)]


def consistency_experiment(template, proc, J_values, replicates, n=None, seed=0, m=DEFAULT_GRID):
    """Template recovery error as the number of warped copies grows.

    For each ``J`` and replicate, draws ``T_1..T_J`` from ``proc`` and forms
    the warped measures ``(T_j)_# template`` exactly (``n=None``) or as
    ``n``-point samples smoothed with bandwidth ``1/n``.  Records
    ``W2(iterated barycenter, template)``.
    """
    template = template if isinstance(template, Measure1D) else to_measure1d(template)
    if proc.dim != 1:
        raise WeightError("consistency experiments run on 1D templates")
    errors = np.zeros((len(J_values), replicates))
    for a, J in enumerate(J_values):
        for r in range(replicates):
            rng = stream(seed, a, r)
            maps = sample_deformations(proc, J, rng)
            if n is None:
                warped = [push_forward(template, T) for T in maps]
            else:
                warped = []
                for T in maps:
                    pts = T(_sample_1d(template, n, rng)[:, None])[:, 0]
                    mu = make_discrete(pts)
                    warped.append(smooth(mu, 1.0 / n, m=m).measure)
            est = iterated_barycenter(warped)
            errors[a, r] = w2_1d(est, template) if n is None else w2_1d(est, template, m)
    config = {
        "family": proc.family,
        "spread": proc.spread,
        "centered": proc.centered,
        "antithetic": proc.paired,
        "support": list(proc.support),
        "n": n,
        "replicates": replicates,
        "seed": seed,
        "grid": m,
    }
    return ExperimentReport(tuple(J_values), errors, config, "exact" if n is None else "sampled")


def control_bound_check(mu, maps, nu, m=None):
    """Both sides of ``W2(mu_B, nu) <= || mean_j T_j - T_nu ||_{L2(mu)}``.

    ``mu_B`` is the equal-weight barycenter of ``(T_j)_# mu`` and ``T_nu``
    the monotone map from ``mu`` to ``nu``.  The right side is integrated
    over the quantile variable, ``T_nu o F_mu^{-1} = F_nu^{-1}``, which keeps
    it meaningful when ``mu`` has atoms.
    """
    mu = mu if isinstance(mu, Measure1D) else to_measure1d(mu)
    nu = nu if isinstance(nu, Measure1D) else to_measure1d(nu)
    maps = list(maps)
    bary = admissible_barycenter(mu, maps)
    lhs = w2_1d(bary, nu, m)
    avg = average_deformation(maps)
    dt, q_mu, q_nu = quantile_pairs(mu, nu, m)
    moved = avg(q_mu[:, None])[:, 0]
    rhs = float(np.sqrt(dt @ (moved - q_nu) ** 2))
    return lhs, rhs
