"""Matrix-free linear operators and face (active-set) restrictions.

Everything downstream (projection operators, scaling metrics, quasi-Newton
matrices) is expressed through :class:`LinOp`, a minimal real linear
operator with an apply and an adjoint-apply. Operators are immutable after
construction and every apply allocates its output, so instances can be
shared freely between threads.
"""

from __future__ import annotations

import numpy as np


class ConfigurationError(ValueError):
    """Raised when operators are combined with incompatible shapes/structure."""


class LinOp:
    """Real linear operator of shape (nrows, ncols).

    Subclasses implement :meth:`apply` (and :meth:`adjoint_apply` unless the
    operator is symmetric, in which case the default suffices).
    """

    def __init__(self, nrows: int, ncols: int):
        if nrows <= 0 or ncols <= 0:
            raise ConfigurationError(f"invalid operator shape ({nrows}, {ncols})")
        self.nrows = int(nrows)
        self.ncols = int(ncols)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint_apply(self, y: np.ndarray) -> np.ndarray:
        """Apply the transpose. Default assumes a symmetric operator."""
        if self.nrows != self.ncols:
            raise NotImplementedError
        return self.apply(y)

    @property
    def T(self) -> "LinOp":
        return AdjointOp(self)

    def dense(self) -> np.ndarray:
        """Materialize as a dense array (tests and desk-scale checks only)."""
        cols = [self.apply(e) for e in np.eye(self.ncols)]
        return np.column_stack(cols)

    def _check_input(self, x: np.ndarray, n: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (n,):
            raise ConfigurationError(
                f"operator of shape {self.shape} applied to vector of shape {x.shape}"
            )
        return x


class AdjointOp(LinOp):
    def __init__(self, base: LinOp):
        super().__init__(base.ncols, base.nrows)
        self.base = base

    def apply(self, x):
        return self.base.adjoint_apply(x)

    def adjoint_apply(self, y):
        return self.base.apply(y)


class IdentityOp(LinOp):
    def __init__(self, n: int):
        super().__init__(n, n)

    def apply(self, x):
        return self._check_input(x, self.ncols).copy()

    def adjoint_apply(self, y):
        return self._check_input(y, self.nrows).copy()


class DiagonalOp(LinOp):
    """Diagonal operator; `spd=True` asserts strictly positive entries."""

    def __init__(self, d, spd: bool = False):
        d = np.asarray(d, dtype=float)
        if d.ndim != 1:
            raise ConfigurationError("diagonal must be a vector")
        if spd and np.any(d <= 0):
            raise ConfigurationError("SPD diagonal requires all entries > 0")
        super().__init__(d.size, d.size)
        self.d = d

    def apply(self, x):
        return self.d * self._check_input(x, self.ncols)

    adjoint_apply = apply


class MatrixOp(LinOp):
    """Wrap a dense array or scipy sparse matrix as a LinOp."""

    def __init__(self, a):
        super().__init__(a.shape[0], a.shape[1])
        self.a = a

    def apply(self, x):
        x = self._check_input(x, self.ncols)
        return np.asarray(self.a @ x).ravel()

    def adjoint_apply(self, y):
        y = self._check_input(y, self.nrows)
        return np.asarray(self.a.T @ y).ravel()

    def dense(self):
        return np.asarray(self.a.todense() if hasattr(self.a, "todense") else self.a)


class ComposedOp(LinOp):
    def __init__(self, ops):
        ops = list(ops)
        if not ops:
            raise ConfigurationError("compose() requires at least one operator")
        for left, right in zip(ops, ops[1:]):
            if left.ncols != right.nrows:
                raise ConfigurationError(
                    f"cannot compose {left.shape} with {right.shape}"
                )
        super().__init__(ops[0].nrows, ops[-1].ncols)
        self.ops = ops

    def apply(self, x):
        for op in reversed(self.ops):
            x = op.apply(x)
        return x

    def adjoint_apply(self, y):
        for op in self.ops:
            y = op.adjoint_apply(y)
        return y


def compose(ops) -> LinOp:
    """Product of operators, applied right to left like matrix notation."""
    ops = list(ops)
    if len(ops) == 1:
        return ops[0]
    return ComposedOp(ops)


class FaceMask:
    """Boolean partition of coordinates into free (True) and fixed-at-bound."""

    def __init__(self, free):
        free = np.asarray(free, dtype=bool)
        if free.ndim != 1:
            raise ConfigurationError("mask must be a boolean vector")
        self.free = free
        self.n = free.size
        self.n_free = int(free.sum())

    @classmethod
    def all_free(cls, n: int) -> "FaceMask":
        return cls(np.ones(n, dtype=bool))

    @classmethod
    def from_fixed_indices(cls, n: int, fixed) -> "FaceMask":
        free = np.ones(n, dtype=bool)
        fixed = np.asarray(fixed, dtype=int)
        free[fixed] = False
        return cls(free)

    def restrict(self, v: np.ndarray) -> np.ndarray:
        """Gather the free entries of a full vector."""
        return np.asarray(v)[self.free]

    def prolong(self, v_free: np.ndarray) -> np.ndarray:
        """Scatter a free-space vector to full size, zeros on fixed entries."""
        out = np.zeros(self.n, dtype=float)
        out[self.free] = v_free
        return out


class RestrictedOp(LinOp):
    """Principal submatrix M_FF of a square operator, realized scatter/apply/gather.

    M is never materialized: P-like operators are only available through FFT
    applies, so the free-space product is prolong -> apply -> restrict.
    """

    def __init__(self, op: LinOp, mask: FaceMask):
        if op.nrows != op.ncols or op.nrows != mask.n:
            raise ConfigurationError(
                f"restrict needs a square operator matching the mask "
                f"(got {op.shape}, mask length {mask.n})"
            )
        super().__init__(mask.n_free, mask.n_free)
        self.op = op
        self.mask = mask

    def apply(self, x):
        x = self._check_input(x, self.ncols)
        return self.mask.restrict(self.op.apply(self.mask.prolong(x)))

    def adjoint_apply(self, y):
        y = self._check_input(y, self.nrows)
        return self.mask.restrict(self.op.adjoint_apply(self.mask.prolong(y)))


def restrict(op: LinOp, mask: FaceMask) -> LinOp:
    return RestrictedOp(op, mask)


def masked_scaled_direction(P: LinOp, g: np.ndarray, binding) -> np.ndarray:
    """Descent direction d with d_F = -P_FF g_F and d = 0 on binding indices.

    `binding` is an index array (or boolean mask) of coordinates whose rows
    and columns of P are zeroed before applying it to the gradient.
    """
    g = np.asarray(g, dtype=float)
    binding = np.asarray(binding)
    if binding.dtype == bool:
        fixed = binding
    else:
        fixed = np.zeros(g.size, dtype=bool)
        fixed[binding.astype(int)] = True
    gm = np.where(fixed, 0.0, g)
    d = -P.apply(gm)
    d[fixed] = 0.0
    return d
