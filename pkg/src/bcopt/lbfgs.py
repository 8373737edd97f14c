"""Compact-form limited-memory BFGS with a metric-shaped initial operator.

The operator is B = theta * Pinv - W M W' with W = [Y, theta * Pinv S] and
M the inverse of the 2k x 2k middle matrix assembled from the stored pairs.
Choosing B0 = theta * Pinv makes the operator behave like a standard L-BFGS
matrix (B0 = theta * I) in the space where the metric P is the identity, at
the cost of caching Pinv S alongside the pairs. With no scaling the classic
diagonal-B0 operator is recovered, including its Sherman-Morrison-Woodbury
subspace solve.

Updates mutate the operator and need exclusive access; applies are read-only.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .krylov import CGConfig, cg_face
from .ops import FaceMask
from .scaling import IdentityScaling

CURVATURE_SKIP = 1e-10


class OperatorStateError(RuntimeError):
    """The middle matrix became singular despite curvature screening."""


class CompactLBFGS:
    def __init__(self, n: int, memory: int = 5, scaling=None, theta=None):
        if memory < 1:
            raise ValueError("memory must be at least 1")
        self.n = int(n)
        self.nrows = self.ncols = self.n  # quacks like a LinOp
        self.memory = int(memory)
        self.scaling = scaling
        self._theta_fixed = theta
        self.theta = 1.0 if theta is None else float(theta)
        self.S = np.zeros((n, 0))
        self.Y = np.zeros((n, 0))
        self.pinv_S = np.zeros((n, 0))
        self.d = np.zeros(0)  # s_i' y_i
        self.L = np.zeros((0, 0))  # strictly lower: s_i' y_j, i > j
        self.s_pinv_s = np.zeros((0, 0))  # S' Pinv S
        self._mid_lu = None
        self.smw_fallbacks = 0

    @property
    def k(self) -> int:
        return self.S.shape[1]

    def _apply_P(self, v):
        return v.copy() if self.scaling is None else self.scaling.apply_P(v)

    def _apply_Pinv(self, v):
        return v.copy() if self.scaling is None else self.scaling.apply_Pinv(v)

    def _middle_matrix(self) -> np.ndarray:
        k = self.k
        mid = np.empty((2 * k, 2 * k))
        mid[:k, :k] = -np.diag(self.d)
        mid[:k, k:] = self.L.T
        mid[k:, :k] = self.L
        mid[k:, k:] = self.theta * self.s_pinv_s
        return mid

    def _refactor(self):
        if self.k == 0:
            self._mid_lu = None
            return
        self._mid_lu = scipy.linalg.lu_factor(self._middle_matrix())

    def lbfgs_update(self, s, y) -> bool:
        """Insert a pair; returns False when the curvature screen rejects it."""
        s = np.asarray(s, dtype=float)
        y = np.asarray(y, dtype=float)
        if s.shape != (self.n,) or y.shape != (self.n,):
            raise ValueError("pair dimension mismatch")
        sy = float(s @ y)
        if sy <= CURVATURE_SKIP * np.linalg.norm(s) * np.linalg.norm(y):
            return False
        if self._theta_fixed is None:
            self.theta = float(y @ self._apply_P(y)) / sy
        pinv_s = self._apply_Pinv(s)
        if self.k == self.memory:
            self.S = self.S[:, 1:]
            self.Y = self.Y[:, 1:]
            self.pinv_S = self.pinv_S[:, 1:]
            self.d = self.d[1:]
            self.L = self.L[1:, 1:]
            self.s_pinv_s = self.s_pinv_s[1:, 1:]
        k = self.k
        new_row = s @ self.Y  # s_new' y_j, all older j
        cross = self.S.T @ pinv_s
        self.S = np.column_stack([self.S, s])
        self.Y = np.column_stack([self.Y, y])
        self.pinv_S = np.column_stack([self.pinv_S, pinv_s])
        self.d = np.append(self.d, sy)
        L = np.zeros((k + 1, k + 1))
        L[:k, :k] = self.L
        L[k, :k] = new_row
        self.L = L
        sps = np.zeros((k + 1, k + 1))
        sps[:k, :k] = self.s_pinv_s
        sps[k, :k] = cross
        sps[:k, k] = cross
        sps[k, k] = float(s @ pinv_s)
        self.s_pinv_s = sps
        self._refactor()
        return True

    def _solve_mid(self, rhs):
        if self._mid_lu is None:
            raise OperatorStateError("no stored pairs")
        sol = scipy.linalg.lu_solve(self._mid_lu, rhs)
        if not np.all(np.isfinite(sol)):
            raise OperatorStateError("singular middle matrix in compact L-BFGS")
        return sol

    def apply(self, v) -> np.ndarray:
        """Product B v via the compact representation."""
        v = np.asarray(v, dtype=float)
        out = self.theta * self._apply_Pinv(v)
        k = self.k
        if k == 0:
            return out
        wv = np.concatenate([self.Y.T @ v, self.theta * (self.pinv_S.T @ v)])
        u = self._solve_mid(wv)
        out -= self.Y @ u[:k] + self.theta * (self.pinv_S @ u[k:])
        return out

    def smw_subspace_solve(self, g_f, mask: FaceMask) -> np.ndarray:
        """-B_FF^{-1} g_F through Sherman-Morrison-Woodbury; diagonal-B0 path only.

        Requires B0 = theta * I, i.e. no scaling (or the identity scaling).
        Falls back to CG on the face if the inner system is singular.
        """
        if self.scaling is not None and not isinstance(self.scaling, IdentityScaling):
            raise ValueError("SMW subspace solve requires a diagonal initial operator")
        g_f = np.asarray(g_f, dtype=float)
        if mask.n_free != g_f.size or mask.n_free == 0:
            raise ValueError("face/gradient size mismatch or empty face")
        k = self.k
        if k == 0:
            return -g_f / self.theta
        free = mask.free
        w_f = np.hstack([self.Y[free], self.theta * self.S[free]])
        inner = self._middle_matrix() - (w_f.T @ w_f) / self.theta
        rhs = w_f.T @ g_f
        try:
            if np.linalg.cond(inner) > 1e12:
                raise np.linalg.LinAlgError("ill-conditioned SMW inner matrix")
            u = scipy.linalg.solve(inner, rhs)
            if not np.all(np.isfinite(u)):
                raise np.linalg.LinAlgError("non-finite SMW solution")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
            self.smw_fallbacks += 1
            outcome = cg_face(
                self, mask.prolong(g_f), mask, precond=None,
                cfg=CGConfig(rtol=1e-12, maxiter=4 * mask.n_free),
            )
            return outcome.step
        # Woodbury inverse of theta*I - W mid^{-1} W' restricted to the face
        return -(g_f / self.theta + (w_f @ u) / self.theta**2)
