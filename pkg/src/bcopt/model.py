"""Objective models for the reconstruction problems.

Two convex objectives over x >= 0:

* quadratic:  f(x) = 1/2 ||A x - b||^2 + lambda/2 ||K x||^2
* weighted edge-preserving:
      f(x) = 1/2 ||A x - b||_V^2 + lambda * sum_i sqrt(delta^2 + (K x)_i^2)

with V = diag(exp(-b)). The second penalty is quadratic near zero and
linear in the tails, so edges in the image are not smoothed away. Models
are immutable and safe to evaluate concurrently.
"""

from __future__ import annotations

import numpy as np

from .circulant import BlockCirculantOp
from .ops import ConfigurationError, DiagonalOp, LinOp


class _HessOp(LinOp):
    """Hessian at a fixed point as a LinOp; the curvature diagonal is frozen."""

    def __init__(self, A, K, lam, v_diag, n_diag):
        super().__init__(A.ncols, A.ncols)
        self._A, self._K, self._lam = A, K, lam
        self._v_diag, self._n_diag = v_diag, n_diag

    def apply(self, v):
        v = self._check_input(v, self.ncols)
        av = self._A.apply(v)
        if self._v_diag is not None:
            av = self._v_diag * av
        kv = self._K.apply(v)
        if self._n_diag is not None:
            kv = self._n_diag * kv
        return self._A.adjoint_apply(av) + self._lam * self._K.adjoint_apply(kv)

    adjoint_apply = apply


class QuadraticModel:
    """Regularized linear least squares; the Hessian is constant."""

    def __init__(self, A: LinOp, b: np.ndarray, K: LinOp, lam: float = 1e-2):
        if A.ncols != K.ncols:
            raise ConfigurationError("A and K must act on the same space")
        self.A = A
        self.b = np.asarray(b, dtype=float)
        self.K = K
        self.lam = float(lam)
        self.n = A.ncols

    def eval_f(self, x) -> float:
        r = self.A.apply(x) - self.b
        q = self.K.apply(x)
        return 0.5 * float(r @ r) + 0.5 * self.lam * float(q @ q)

    def eval_grad(self, x) -> np.ndarray:
        r = self.A.apply(x) - self.b
        return self.A.adjoint_apply(r) + self.lam * self.K.adjoint_apply(self.K.apply(x))

    def eval_fg(self, x):
        r = self.A.apply(x) - self.b
        q = self.K.apply(x)
        f = 0.5 * float(r @ r) + 0.5 * self.lam * float(q @ q)
        g = self.A.adjoint_apply(r) + self.lam * self.K.adjoint_apply(q)
        return f, g

    def hess_vec(self, x, v) -> np.ndarray:
        del x  # constant Hessian
        return self.A.adjoint_apply(self.A.apply(v)) + self.lam * self.K.adjoint_apply(
            self.K.apply(v)
        )

    def hess_operator(self, x) -> LinOp:
        del x
        return _HessOp(self.A, self.K, self.lam, None, None)


class ReconModel:
    """Weighted data fit with the edge-preserving penalty.

    The weights V = diag(exp(-b)) downweight strongly attenuated rays; they
    are derived from the (noiseless) measurement vector at construction.
    """

    def __init__(
        self,
        A: LinOp,
        b: np.ndarray,
        K: LinOp,
        lam: float = 1e-4,
        delta: float = 1e-1,
        weights_from: np.ndarray | None = None,
    ):
        if A.ncols != K.ncols:
            raise ConfigurationError("A and K must act on the same space")
        if delta <= 0:
            raise ConfigurationError("delta must be positive")
        self.A = A
        self.b = np.asarray(b, dtype=float)
        self.K = K
        self.lam = float(lam)
        self.delta = float(delta)
        base = self.b if weights_from is None else np.asarray(weights_from, dtype=float)
        self.V = DiagonalOp(np.exp(-base), spd=True)
        self.n = A.ncols

    def _phi(self, q):
        return float(np.sum(np.sqrt(self.delta**2 + q**2)))

    def _psi(self, q):
        # derivative of sqrt(delta^2 + q^2); bounded in (-1, 1)
        return q / np.sqrt(self.delta**2 + q**2)

    def penalty_curvature(self, q) -> np.ndarray:
        """Diagonal of the penalty Hessian in the difference domain, in (0, 1/delta]."""
        return self.delta**2 / (self.delta**2 + q**2) ** 1.5

    def eval_f(self, x) -> float:
        r = self.A.apply(x) - self.b
        return 0.5 * float(r @ self.V.apply(r)) + self.lam * self._phi(self.K.apply(x))

    def eval_grad(self, x) -> np.ndarray:
        r = self.A.apply(x) - self.b
        q = self.K.apply(x)
        return self.A.adjoint_apply(self.V.apply(r)) + self.lam * self.K.adjoint_apply(
            self._psi(q)
        )

    def eval_fg(self, x):
        r = self.A.apply(x) - self.b
        q = self.K.apply(x)
        vr = self.V.apply(r)
        f = 0.5 * float(r @ vr) + self.lam * self._phi(q)
        g = self.A.adjoint_apply(vr) + self.lam * self.K.adjoint_apply(self._psi(q))
        return f, g

    def hess_vec(self, x, v) -> np.ndarray:
        q = self.K.apply(x)
        n_diag = self.penalty_curvature(q)
        return self.A.adjoint_apply(self.V.apply(self.A.apply(v))) + (
            self.lam * self.K.adjoint_apply(n_diag * self.K.apply(v))
        )

    def hess_operator(self, x) -> LinOp:
        n_diag = self.penalty_curvature(self.K.apply(x))
        return _HessOp(self.A, self.K, self.lam, self.V.d, n_diag)


def hessian_approx_bc(m) -> BlockCirculantOp:
    """Block-circulant Hessian (approximation) used to build the scaling.

    For the quadratic model this is the exact Hessian A'A + lambda K'K. For
    the weighted model, V is replaced by the view-average of its diagonal
    blocks and the penalty curvature by its value at zero differences,
    1/delta, restoring the circulant structure lost to the weights.
    """
    A, K = m.A, m.K
    if not isinstance(A, BlockCirculantOp) or not isinstance(K, BlockCirculantOp):
        raise ConfigurationError(
            "Hessian approximation requires block-circulant A and K"
        )
    if isinstance(m, QuadraticModel):
        return (A.T @ A) + (K.T @ K).scaled(m.lam)
    v_diag = m.V.d.reshape(A.n_b, A.s_out)
    d_hat = v_diag.mean(axis=0)
    data_term = A.T @ A.premultiply_diag(d_hat)
    penalty_term = (K.T @ K).scaled(m.lam / m.delta)
    return data_term + penalty_term
