"""Independent reference computations used by the tests.

Each oracle avoids the code path it checks: general LPs go through HiGHS
rather than the package's transportation simplex, matrix functions through
scipy.linalg, and 1D distances through brute-force quantile evaluation.
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.optimize import linprog


def lp_w2_squared(x, a, y, b):
    """Exact discrete OT cost, squared Euclidean ground cost, via HiGHS."""
    x = np.asarray(x, dtype=float).reshape(len(a), -1)
    y = np.asarray(y, dtype=float).reshape(len(b), -1)
    n, m = len(a), len(b)
    C = ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2)
    rows = sp.kron(sp.eye(n), np.ones((1, m)))
    cols = sp.kron(np.ones((1, n)), sp.eye(m))
    A = sp.vstack([rows, cols]).tocsr()
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def quantile_left(xs, ws, t):
    """inf{x : F(x) >= t} by direct scan."""
    order = np.argsort(xs)
    xs, ws = np.asarray(xs)[order], np.asarray(ws)[order]
    c = np.cumsum(ws)
    out = []
    for tt in np.atleast_1d(t):
        k = 0
        while k < len(xs) - 1 and c[k] < tt - 1e-15:
            k += 1
        out.append(xs[k])
    return np.array(out)


def gaussian_w2_squared(m1, S1, m2, S2):
    r1 = sla.sqrtm(S1).real
    cross = sla.sqrtm(r1 @ S2 @ r1).real
    return float(np.sum((m1 - m2) ** 2) + np.trace(S1 + S2 - 2 * cross))


def random_atomic(rng, max_atoms=20, lo=-3.0, hi=3.0):
    n = int(rng.integers(1, max_atoms + 1))
    x = rng.uniform(lo, hi, n)
    w = rng.dirichlet(np.ones(n))
    return x, w


def random_spd(rng, d, lo=0.3):
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return Q @ np.diag(rng.uniform(lo, 3.0, d)) @ Q.T


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])
