"""Admissible deformation families and random centered warps.

Variants: :class:`Identity`, :class:`ScaleLocation`, :class:`ProductIncreasing`,
:class:`RadialDistortion` and :class:`OrthogonalConjugate`.  All deformations
act on point arrays of shape ``(n, d)`` (a single ``(d,)`` point is also
accepted) and are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadSpread, DimensionMismatch, NotInvertible, WeightError
from .transport import MonotoneMap1D

ORTHO_TOL = 1e-10
MONO_TOL = 1e-12


def _points(x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    return (x[None, :] if single else x), single


def _restore(y, single):
    return y[0] if single else y


class Deformation:
    """Base class; subclasses implement ``_apply`` on ``(n, d)`` arrays."""

    family = None
    dim = None

    def apply(self, x):
        pts, single = _points(x)
        if self.dim is not None and pts.shape[1] != self.dim:
            raise DimensionMismatch(f"map acts on R^{self.dim}, got points in R^{pts.shape[1]}")
        return _restore(self._apply(pts), single)

    __call__ = apply

    def inverse(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False, repr=False)
class Identity(Deformation):
    family = "identity"

    def _apply(self, x):
        return x.copy()

    def inverse(self):
        return self

    def __repr__(self):
        return "Identity()"


@dataclass(frozen=True, eq=False)
class ScaleLocation(Deformation):
    """``x -> a * x + b`` with ``a > 0`` (scalar or per axis)."""

    a: np.ndarray
    b: np.ndarray
    family = "product"

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        a = np.asarray(self.a, dtype=float)
        if a.ndim == 0:
            a = np.full(b.shape, float(a))
        if a.shape != b.shape:
            raise DimensionMismatch("scale and shift must have the same length")
        if np.any(a <= 0) or not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
            raise NotInvertible("scale-location maps need finite a > 0")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.b.shape[0]

    def _apply(self, x):
        return x * self.a + self.b

    def inverse(self):
        return ScaleLocation(1.0 / self.a, -self.b / self.a)

    def coordinate_maps(self):
        return tuple(MonotoneMap1D([0.0, 1.0], [bk, ak + bk]) for ak, bk in zip(self.a, self.b))


@dataclass(frozen=True, eq=False)
class ProductIncreasing(Deformation):
    """``x -> (F_1(x_1), ..., F_d(x_d))`` with strictly increasing ``F_k``."""

    maps: tuple
    family = "product"

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise DimensionMismatch("need at least one coordinate map")
        for f in maps:
            if f.xs.size > 1 and np.any(np.diff(f.ys) <= 0):
                raise NotInvertible("coordinate maps must be strictly increasing")
        object.__setattr__(self, "maps", maps)

    @property
    def dim(self):
        return len(self.maps)

    def _apply(self, x):
        return np.column_stack([f(x[:, k]) for k, f in enumerate(self.maps)])

    def inverse(self):
        return ProductIncreasing(tuple(f.inverse() for f in self.maps))

    def coordinate_maps(self):
        return self.maps


@dataclass(frozen=True, eq=False)
class RadialDistortion(Deformation):
    """``x -> f(|x|) x / |x|`` with ``f(0) = 0`` increasing; the origin is fixed."""

    f: MonotoneMap1D
    dim: int = None
    family = "radial"

    def __post_init__(self):
        f = self.f
        if abs(float(f(0.0))) > MONO_TOL:
            raise NotInvertible("radial profile must satisfy f(0) = 0")
        if f.xs.size > 1 and np.any(np.diff(f.ys) <= 0):
            raise NotInvertible("radial profile must be strictly increasing")

    def _apply(self, x):
        r = np.linalg.norm(x, axis=1)
        out = np.zeros_like(x)
        nz = r > 0
        out[nz] = x[nz] * (self.f(r[nz]) / r[nz])[:, None]
        return out

    def inverse(self):
        return RadialDistortion(self.f.inverse(), self.dim)


@dataclass(frozen=True, eq=False)
class OrthogonalConjugate(Deformation):
    """``x -> G^T inner(G x)`` for orthogonal ``G``."""

    G: np.ndarray
    inner: Deformation
    family = "conjugate"

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise DimensionMismatch("G must be square")
        if np.max(np.abs(G.T @ G - np.eye(G.shape[0]))) > ORTHO_TOL:
            raise NotInvertible("G is not orthogonal")
        if self.inner.dim is not None and self.inner.dim != G.shape[0]:
            raise DimensionMismatch("inner map and G disagree on dimension")
        G.setflags(write=False)
        object.__setattr__(self, "G", G)

    @property
    def dim(self):
        return self.G.shape[0]

    def _apply(self, x):
        return self.inner.apply(x @ self.G.T) @ self.G

    def inverse(self):
        return OrthogonalConjugate(self.G, self.inner.inverse())


class PointwiseMap(Deformation):
    """Callable wrapper for maps outside the tagged families (mixed averages, compositions)."""

    family = "other"

    def __init__(self, func, dim=None, inverse=None):
        self._func = func
        self.dim = dim
        self._inverse = inverse

    def _apply(self, x):
        return self._func(x)

    def inverse(self):
        if self._inverse is None:
            raise NotInvertible("no inverse available for this map")
        return PointwiseMap(self._inverse, self.dim, self._func)


def apply(T, x):
    return T.apply(x)


def inverse(T):
    return T.inverse()


# ---------------------------------------------------------------------------
# composition


def compose_1d(f, g):
    """Exact piecewise-linear ``f o g``."""
    xs = g.xs
    if g.xs.size > 1 and np.all(np.diff(g.ys) > 0):
        xs = np.union1d(xs, g.inverse()(f.xs))
    elif g.xs.size == 1:
        xs = np.union1d(xs, f.xs - (g.ys[0] - g.xs[0]))
    return MonotoneMap1D(xs, np.maximum.accumulate(f(g(xs))))


def _product_maps(T, d):
    if isinstance(T, Identity):
        return tuple(MonotoneMap1D([0.0, 1.0], [0.0, 1.0]) for _ in range(d))
    return T.coordinate_maps()


def _radial_profile(T):
    if isinstance(T, Identity):
        return MonotoneMap1D([0.0, 1.0], [0.0, 1.0])
    return T.f


def compose(S, T):
    """``S o T``, in closed form whenever both factors share a family."""
    if isinstance(T, Identity):
        return S
    if isinstance(S, Identity):
        return T
    if isinstance(S, ScaleLocation) and isinstance(T, ScaleLocation):
        return ScaleLocation(S.a * T.a, S.a * T.b + S.b)
    if S.family == "product" and T.family == "product":
        if S.dim != T.dim:
            raise DimensionMismatch("cannot compose maps of different dimensions")
        return ProductIncreasing(tuple(compose_1d(f, g) for f, g in zip(S.coordinate_maps(), T.coordinate_maps())))
    if S.family == "radial" and T.family == "radial":
        return RadialDistortion(compose_1d(S.f, T.f), S.dim or T.dim)
    if isinstance(S, OrthogonalConjugate) and isinstance(T, OrthogonalConjugate) and np.allclose(S.G, T.G, atol=ORTHO_TOL):
        return OrthogonalConjugate(S.G, compose(S.inner, T.inner))
    dim = S.dim or T.dim
    return PointwiseMap(lambda x: S.apply(T.apply(x)), dim)


def reflection(T):
    """``2 Id - T``, the antithetic partner of ``T``."""
    if isinstance(T, Identity):
        return T
    if isinstance(T, ScaleLocation):
        return ScaleLocation(2.0 - T.a, -T.b)
    if isinstance(T, ProductIncreasing):
        return ProductIncreasing(tuple(MonotoneMap1D(f.xs, 2 * f.xs - f.ys, f.extrapolation) for f in T.maps))
    if isinstance(T, RadialDistortion):
        f = T.f
        return RadialDistortion(MonotoneMap1D(f.xs, 2 * f.xs - f.ys, f.extrapolation), T.dim)
    if isinstance(T, OrthogonalConjugate):
        return OrthogonalConjugate(T.G, reflection(T.inner))
    return PointwiseMap(lambda x: 2 * x - T.apply(x), T.dim)


# ---------------------------------------------------------------------------
# admissibility


def _nondecreasing(values):
    return bool(np.all(np.diff(values) >= -MONO_TOL * max(1.0, np.max(np.abs(values), initial=0.0))))


def check_admissible_pair(Ti, Tj, probe):
    """Numerical test that ``Ti o Tj^{-1}`` is a gradient of a convex function.

    ``probe`` is an ``(p, d)`` array of probe points.  Product-family pairs
    must give nondecreasing coordinate maps over the probe coordinates,
    radial pairs a nondecreasing profile vanishing at 0 over the probe
    radii, conjugated pairs a matching ``G`` and an admissible inner pair.
    Pairs from different families are rejected.
    """
    probe = np.asarray(probe, dtype=float)
    if probe.ndim == 1:
        probe = probe[:, None]
    d = probe.shape[1]
    for T in (Ti, Tj):
        if T.dim is not None and T.dim != d:
            raise DimensionMismatch(f"map acts on R^{T.dim}, probe grid is in R^{d}")

    conj = [T for T in (Ti, Tj) if isinstance(T, OrthogonalConjugate)]
    if conj:
        G = conj[0].G
        inners = []
        for T in (Ti, Tj):
            if isinstance(T, Identity):
                inners.append(T)
            elif isinstance(T, OrthogonalConjugate) and np.allclose(T.G, G, atol=ORTHO_TOL):
                inners.append(T.inner)
            else:
                return False
        return check_admissible_pair(inners[0], inners[1], probe @ G.T)

    families = {T.family for T in (Ti, Tj)} - {"identity"}
    if not families:
        return True
    if len(families) > 1 or families & {"other"}:
        return False
    family = families.pop()
    try:
        if family == "product":
            composed = compose(_as_product(Ti, d), _as_product(Tj, d).inverse())
            for k, f in enumerate(composed.maps):
                xs = np.unique(probe[:, k])
                if not _nondecreasing(f(xs)):
                    return False
            return True
        f = compose_1d(_radial_profile(Ti), _radial_profile(Tj).inverse())
        radii = np.unique(np.concatenate(([0.0], np.linalg.norm(probe, axis=1))))
        vals = f(radii)
        return abs(float(vals[0])) <= MONO_TOL and bool(np.all(vals >= -MONO_TOL)) and _nondecreasing(vals)
    except NotInvertible:
        return False


def _as_product(T, d):
    if isinstance(T, ProductIncreasing):
        return T
    return ProductIncreasing(_product_maps(T, d))


# ---------------------------------------------------------------------------
# averaging


def _check_lambda(weights, J):
    lam = np.asarray(weights, dtype=float).reshape(-1)
    if lam.shape[0] != J:
        raise WeightError(f"expected {J} weights, got {lam.shape[0]}")
    if np.any(lam <= 0) or abs(lam.sum() - 1.0) > 1e-9:
        raise WeightError("weights must be positive and sum to 1")
    return lam


def average_deformation(maps, weights=None, grid=None):
    """Pointwise convex combination ``sum_j weights[j] * maps[j]``.

    Scale-location families average in closed form.  Product and radial
    families are rebuilt as piecewise-linear maps on the union of all knots
    and the optional ``grid`` (exact, since a sum of piecewise-linear maps
    only breaks at their knots).
    """
    maps = list(maps)
    if not maps:
        raise WeightError("need at least one map")
    lam = _check_lambda(np.full(len(maps), 1.0 / len(maps)) if weights is None else weights, len(maps))
    if len(maps) == 1:
        return maps[0]
    dims = {T.dim for T in maps} - {None}
    if len(dims) > 1:
        raise DimensionMismatch("maps act on different dimensions")
    d = dims.pop() if dims else None
    families = {T.family for T in maps} - {"identity"}
    if not families:
        return Identity()
    if all(isinstance(T, (Identity, ScaleLocation)) for T in maps):
        a = sum(l * (np.ones(d) if isinstance(T, Identity) else T.a) for l, T in zip(lam, maps))
        b = sum(l * (np.zeros(d) if isinstance(T, Identity) else T.b) for l, T in zip(lam, maps))
        return ScaleLocation(a, b)
    if families == {"product"}:
        coord = [_product_maps(T, d) for T in maps]
        out = []
        for k in range(d):
            xs = np.unique(np.concatenate([c[k].xs for c in coord]))
            if grid is not None:
                g = np.asarray(grid, dtype=float)
                xs = np.union1d(xs, g[:, k] if g.ndim == 2 else g)
            ys = sum(l * c[k](xs) for l, c in zip(lam, coord))
            out.append(MonotoneMap1D(xs, ys))
        return ProductIncreasing(tuple(out))
    if families == {"radial"}:
        profiles = [_radial_profile(T) for T in maps]
        xs = np.unique(np.concatenate([[0.0]] + [p.xs for p in profiles]))
        if grid is not None:
            g = np.asarray(grid, dtype=float)
            xs = np.union1d(xs, np.linalg.norm(g, axis=1) if g.ndim == 2 else np.abs(g))
        ys = sum(l * p(xs) for l, p in zip(lam, profiles))
        return RadialDistortion(MonotoneMap1D(xs, ys), d)
    if families == {"conjugate"}:
        G = next(T.G for T in maps if isinstance(T, OrthogonalConjugate))
        if all(isinstance(T, Identity) or np.allclose(T.G, G, atol=ORTHO_TOL) for T in maps):
            inners = [T if isinstance(T, Identity) else T.inner for T in maps]
            g = None if grid is None else np.asarray(grid, dtype=float) @ G.T
            return OrthogonalConjugate(G, average_deformation(inners, lam, g))
    return PointwiseMap(lambda x: sum(l * T.apply(x) for l, T in zip(lam, maps)), d)


# ---------------------------------------------------------------------------
# random deformations

FAMILIES = ("scale_location", "product_increasing", "radial")


@dataclass(frozen=True)
class DeformationProcess:
    """Law of a random admissible warp.

    ``spread`` must lie in ``[0, 1)``.  Scale-location draws use
    ``a = 1 + u``, ``b = v`` with ``u, v ~ U(-s, s)`` per axis.  Product and
    radial draws perturb the identity by ``s * g`` with ``|g'| <= 1`` and
    ``g`` vanishing at the ends of ``support`` (at 0 for radial profiles).
    With ``antithetic`` the draws come in pairs ``(T, 2 Id - T)``; it
    defaults to on for centered product/radial processes.
    """

    family: str
    spread: float
    seed: int = 0
    centered: bool = True
    dim: int = 1
    antithetic: bool = None
    support: tuple = (-1.0, 1.0)
    modes: int = 4
    knots: int = 65

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise BadSpread(f"unknown family {self.family!r}")
        if not (0.0 <= self.spread < 1.0):
            raise BadSpread(f"spread must lie in [0, 1), got {self.spread!r}")
        lo, hi = self.support
        if not lo < hi:
            raise BadSpread("support must be a nonempty interval")
        if self.family == "radial" and hi <= 0:
            raise BadSpread("radial support needs a positive upper end")

    @property
    def paired(self):
        if self.antithetic is None:
            return self.centered and self.family != "scale_location"
        return bool(self.antithetic)

    def bound(self):
        """Upper bound on ``sup |T(x) - x|`` over the support."""
        lo, hi = self.support
        s = self.spread
        if self.family == "scale_location":
            return s * (max(abs(lo), abs(hi)) + 1.0) * np.sqrt(self.dim)
        length = hi - lo if self.family == "product_increasing" else hi
        # |g| <= (L / pi) * sum_k |c_k| / k with |c_k| <= 1 / modes
        harmonic = sum(1.0 / k for k in range(1, self.modes + 1)) / self.modes
        scale = np.sqrt(self.dim) if self.family == "product_increasing" else 1.0
        return s * length / np.pi * harmonic * scale

    def rng(self):
        return np.random.Generator(np.random.Philox(self.seed))


def _bump(rng, lo, hi, s, modes, n_knots, centered):
    L = hi - lo
    k = np.arange(1, modes + 1)
    c = rng.uniform(-1.0, 1.0, modes) if centered else rng.uniform(0.0, 1.0, modes)
    c /= modes
    xs = np.linspace(lo, hi, n_knots)
    g = (L / np.pi) * (np.sin(np.outer(xs - lo, k) * np.pi / L) / k) @ c
    return MonotoneMap1D(xs, xs + s * g)


def random_deformation(proc, rng=None):
    """One draw from the process (no antithetic pairing)."""
    rng = proc.rng() if rng is None else rng
    s = proc.spread
    if s == 0:
        return Identity()
    d = proc.dim
    lo, hi = proc.support
    if proc.family == "scale_location":
        if proc.centered:
            u = rng.uniform(-s, s, d)
            v = rng.uniform(-s, s, d)
        else:
            u = rng.uniform(0.0, s, d)
            v = rng.uniform(0.0, s, d)
        return ScaleLocation(1.0 + u, v)
    if proc.family == "product_increasing":
        return ProductIncreasing(tuple(_bump(rng, lo, hi, s, proc.modes, proc.knots, proc.centered) for _ in range(d)))
    return RadialDistortion(_bump(rng, 0.0, hi, s, proc.modes, proc.knots, proc.centered), None if d == 1 else d)


def sample_deformations(proc, count, rng=None):
    """``count`` draws; paired processes emit ``T, 2 Id - T`` consecutively."""
    rng = proc.rng() if rng is None else rng
    out = []
    while len(out) < count:
        T = random_deformation(proc, rng)
        out.append(T)
        if proc.paired and len(out) < count:
            out.append(reflection(T))
    return out


# ---------------------------------------------------------------------------
# JSON form


def _map_to_dict(f):
    return {"knots": [[x, y] for x, y in zip(f.xs.tolist(), f.ys.tolist())], "extrapolation": f.extrapolation}


def _map_from_dict(obj):
    knots = np.asarray(obj["knots"], dtype=float).reshape(-1, 2)
    return MonotoneMap1D(knots[:, 0], knots[:, 1], obj.get("extrapolation", "linear"))


def deformation_to_dict(T):
    if isinstance(T, Identity):
        return {"variant": "identity"}
    if isinstance(T, ScaleLocation):
        return {"variant": "scale_location", "a": T.a.tolist(), "b": T.b.tolist()}
    if isinstance(T, ProductIncreasing):
        return {"variant": "product_increasing", "maps": [_map_to_dict(f) for f in T.maps]}
    if isinstance(T, RadialDistortion):
        return {"variant": "radial", "profile": _map_to_dict(T.f), "dim": T.dim}
    if isinstance(T, OrthogonalConjugate):
        return {"variant": "orthogonal_conjugate", "G": T.G.tolist(), "inner": deformation_to_dict(T.inner)}
    raise TypeError(f"{type(T).__name__} has no JSON form")


def deformation_from_dict(obj):
    variant = obj.get("variant")
    if variant == "identity":
        return Identity()
    if variant == "scale_location":
        return ScaleLocation(obj["a"], obj["b"])
    if variant == "product_increasing":
        return ProductIncreasing(tuple(_map_from_dict(f) for f in obj["maps"]))
    if variant == "radial":
        return RadialDistortion(_map_from_dict(obj["profile"]), obj.get("dim"))
    if variant == "orthogonal_conjugate":
        return OrthogonalConjugate(obj["G"], deformation_from_dict(obj["inner"]))
    raise ValueError(f"unknown deformation variant {variant!r}")
