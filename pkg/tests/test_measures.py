import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from warpbary import errors
from warpbary.deformations import RadialDistortion, ScaleLocation
from warpbary.measures import (
    GaussianMeasure,
    Measure1D,
    QuantileGrid,
    grid_nodes,
    make_discrete,
    push_forward,
    quantile,
    second_moment,
    to_measure1d,
    to_quantile_grid,
)
from warpbary.transport import MonotoneMap1D

from oracles import quantile_left

finite = st.floats(-50, 50, allow_nan=False)


@st.composite
def atomic(draw, max_atoms=12):
    xs = draw(st.lists(finite, min_size=1, max_size=max_atoms))
    raw = draw(st.lists(st.floats(0.01, 1.0), min_size=len(xs), max_size=len(xs)))
    w = np.array(raw) / np.sum(raw)
    return np.array(xs), w


def test_uniform_default():
    mu = make_discrete([[0.0], [1.0]])
    assert np.allclose(mu.weights, [0.5, 0.5])
    assert mu.n == 2 and mu.dim == 1


def test_merge_rule():
    m1 = to_measure1d(make_discrete([[0.0], [0.0], [1.0]]))
    assert m1.xs.tolist() == [0.0, 1.0]
    assert np.allclose(m1.ws, [2 / 3, 1 / 3])


def test_bad_weights():
    with pytest.raises(errors.BadWeights):
        make_discrete([[0.0], [1.0]], [0.5, 0.6])
    with pytest.raises(errors.BadWeights):
        make_discrete([[0.0], [1.0]], [-0.5, 1.5])


def test_small_drift_renormalized():
    mu = make_discrete([[0.0], [1.0]], [0.5, 0.5 + 5e-7])
    assert abs(mu.weights.sum() - 1) <= 1e-12


def test_nonfinite_and_empty():
    with pytest.raises(errors.NonFinite):
        make_discrete([[np.nan]])
    with pytest.raises(errors.EmptyMeasure):
        make_discrete(np.zeros((0, 1)))


def test_quantile_examples():
    mu = Measure1D([0.0, 1.0], [0.5, 0.5])
    assert quantile(mu, 0.25) == 0.0
    assert quantile(mu, 0.75) == 1.0
    # left inverse at the jump
    assert quantile(mu, 0.5) == 0.0
    g = Measure1D.from_grid(norm.ppf(grid_nodes(1000)))
    assert abs(quantile(g, 0.5)) <= 1e-3


@pytest.mark.parametrize("t", [0.0, 1.0, -0.1, 1.5, np.nan])
def test_quantile_out_of_range(t):
    with pytest.raises(errors.OutOfRange):
        quantile(Measure1D([0.0]), t)


def test_to_quantile_grid_examples():
    assert to_quantile_grid(Measure1D.dirac(3.0), 4).values.tolist() == [3, 3, 3, 3]
    assert to_quantile_grid(Measure1D([0.0, 1.0]), 4).values.tolist() == [0, 0, 1, 1]
    assert to_quantile_grid(Measure1D(np.arange(1.0, 11.0)), 10).values.tolist() == list(range(1, 11))
    with pytest.raises(errors.OutOfRange):
        to_quantile_grid(Measure1D([0.0]), 1)


def test_quantile_grid_validation():
    with pytest.raises(errors.OutOfRange):
        QuantileGrid([1.0])
    with pytest.raises(errors.BadWeights):
        QuantileGrid([2.0, 1.0])


def test_push_forward_examples():
    mu = make_discrete([[0.0]])
    out = push_forward(mu, ScaleLocation(2.0, 1.0))
    assert out.points.tolist() == [[1.0]]
    sym = make_discrete([[-1.0], [1.0]])
    rad = RadialDistortion(MonotoneMap1D.from_function(lambda r: r**2, np.linspace(0, 2, 201)))
    img = push_forward(sym, rad)
    assert np.allclose(np.sort(img.points[:, 0]), [-1, 1])
    assert np.allclose(img.weights, 0.5)


def test_push_forward_domain_error():
    mu = make_discrete([[1.0], [-1.0]])
    with pytest.raises(errors.DomainError):
        with np.errstate(invalid="ignore"):
            push_forward(mu, lambda p: np.log(p))


def test_push_forward_merges_preimages():
    mu = Measure1D([-1.0, 1.0, 2.0], [0.2, 0.3, 0.5])
    img = push_forward(mu, lambda p: p**2)
    assert img.xs.tolist() == [1.0, 4.0]
    assert np.allclose(img.ws, [0.5, 0.5])


def test_second_moment_examples():
    assert second_moment(make_discrete([[0.0]])) == 0
    assert second_moment(make_discrete([[-1.0], [1.0]])) == 1
    assert second_moment(make_discrete([[3.0, 4.0]])) == 25


def test_gaussian_measure():
    g = GaussianMeasure(None, [[2.0, 0.5], [0.5, 1.0]])
    assert g.dim == 2 and g.mean.tolist() == [0, 0]
    with pytest.raises(errors.NotSPD):
        GaussianMeasure(None, [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(errors.NotSPD):
        GaussianMeasure(None, [[1.0, 0.1], [0.0, 1.0]])


def test_arrays_are_immutable():
    mu = make_discrete([[0.0], [1.0]])
    with pytest.raises(ValueError):
        mu.points[0, 0] = 5


@given(atomic())
def test_quantile_matches_scan(m):
    xs, ws = m
    mu = Measure1D(xs, ws)
    t = np.linspace(0.001, 0.999, 97)
    # at a breakpoint both sides are valid up to summation round-off
    t = t[np.min(np.abs(t[:, None] - mu.cumulative()[None, :]), axis=1) > 1e-12]
    # the scan oracle does not merge near-duplicates; compare on merged atoms
    assert np.array_equal(mu.quantile(t), quantile_left(mu.xs, mu.ws, t))


@given(atomic())
def test_quantile_nondecreasing(m):
    mu = Measure1D(*m)
    q = mu.quantile(np.linspace(1e-4, 1 - 1e-4, 2001))
    assert np.all(np.diff(q) >= 0)
    g = Measure1D(grid=mu.to_quantile_grid(64))
    assert np.all(np.diff(g.quantile(np.linspace(1e-4, 1 - 1e-4, 2001))) >= 0)


@given(atomic(), st.floats(0.1, 5), st.floats(-5, 5))
def test_push_forward_mass_and_moments(m, a, b):
    xs, ws = m
    mu = make_discrete(xs[:, None], ws)
    img = push_forward(mu, ScaleLocation(a, b))
    assert abs(img.weights.sum() - mu.weights.sum()) <= 1e-14
    assert np.isclose(img.second_moment(), (a * xs) ** 2 @ ws + 2 * a * b * (ws @ xs) + b**2, rtol=1e-10, atol=1e-10)
    shifted = push_forward(mu, ScaleLocation(1.0, b))
    expect = mu.second_moment() + 2 * b * mu.mean()[0] + b**2
    assert abs(shifted.second_moment() - expect) <= 1e-10 * max(1.0, abs(expect))
    scaled = push_forward(mu, ScaleLocation(a, 0.0))
    assert np.isclose(scaled.second_moment(), a**2 * mu.second_moment(), rtol=1e-12, atol=1e-12)


@given(atomic())
def test_to_measure1d_idempotent(m):
    mu = to_measure1d(make_discrete(m[0][:, None], m[1]))
    again = to_measure1d(mu.to_discrete())
    assert np.array_equal(mu.xs, again.xs)
    assert np.allclose(mu.ws, again.ws, atol=1e-15)
    assert abs(mu.ws.sum() - 1) <= 1e-12 and np.all(np.diff(mu.xs) > 0)
