"""Shared generators and independent oracles for the test suite.

Oracles here are deliberately naive (dense algebra, enumeration, recursive
updates) so they cannot share a failure mode with the operator/FFT code
paths they check.
"""

import itertools

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from bcopt.circulant import BlockCirculantOp
from bcopt.model import QuadraticModel
from bcopt.ops import MatrixOp


def rand_spd(rng, n, lo=0.5, hi=2.0):
    """SPD matrix with eigenvalues drawn uniformly from [lo, hi]."""
    q = np.linalg.qr(rng.standard_normal((n, n)))[0]
    return q @ np.diag(rng.uniform(lo, hi, n)) @ q.T


def random_bc(rng, n_b, s_in, s_out, density=0.5):
    """Block-circulant operator with random sparse blocks."""
    blocks = []
    for _ in range(n_b):
        mask = rng.random((s_out, s_in)) < density
        vals = rng.standard_normal((s_out, s_in)) * mask
        blocks.append(sp.csc_matrix(vals))
    return BlockCirculantOp(blocks)


def random_spd_bc(rng, n_b, s, scale_spread=2.0):
    """SPD block-circulant G'G + eps*I with per-coordinate scale disparity."""
    col_scale = np.exp(rng.uniform(-scale_spread, scale_spread, s))
    blocks = []
    for j in range(n_b):
        vals = rng.standard_normal((s, s)) * (0.6**j) * col_scale[None, :]
        blocks.append(sp.csc_matrix(vals))
    g = BlockCirculantOp(blocks)
    eye = [sp.identity(s, format="csc") * 1e-3] + [
        sp.csc_matrix((s, s)) for _ in range(n_b - 1)
    ]
    return g.T @ g + BlockCirculantOp(eye)


def enumerate_box_qp(B, c):
    """Global minimizer of 1/2 x'Bx + c'x over x >= 0 by trying all 2^n faces."""
    n = c.size
    best, best_f = None, np.inf
    for r in range(n + 1):
        for fixed in itertools.combinations(range(n), r):
            free = np.ones(n, dtype=bool)
            free[list(fixed)] = False
            x = np.zeros(n)
            if free.any():
                x[free] = np.linalg.solve(B[np.ix_(free, free)], -c[free])
            if (x >= -1e-11).all():
                x = np.maximum(x, 0.0)
                f = 0.5 * x @ B @ x + c @ x
                if f < best_f:
                    best_f, best = f, x
    return best


def make_box_quadratic(rng, n, lo=0.7, hi=3.0, grad_scale=1.5e-3):
    """Strictly convex bound-constrained quadratic with a known solution.

    The binding gradient components are kept small so the residual at the
    solution is tiny and linesearch f-comparisons stay well above the
    floating-point noise floor.
    """
    B = rand_spd(rng, n, lo, hi)
    x_star = np.maximum(rng.standard_normal(n), 0.0)
    active = x_star == 0.0
    v = np.zeros(n)
    v[active] = rng.uniform(0.5, 2.0, int(active.sum())) * grad_scale
    c = -B @ x_star + v
    a = scipy.linalg.sqrtm(B).real
    b = -np.linalg.solve(a, c)
    model = QuadraticModel(MatrixOp(a), b, MatrixOp(np.zeros((1, n))), lam=0.0)
    return model, B, c, x_star


def recursive_bfgs_dense(B0, pairs):
    """Dense BFGS matrix from B0 through the textbook rank-two updates."""
    B = B0.copy()
    for s, y in pairs:
        Bs = B @ s
        B = B - np.outer(Bs, Bs) / (s @ Bs) + np.outer(y, y) / (y @ s)
    return B


def central_diff_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g
