"""Backend selection for the block-circulant product kernels.

The compiled extension is used when importable; otherwise the NumPy
fallback takes over. Set ``BCOPT_NO_EXT=1`` to force the fallback (used by
the benchmark to compare both backends on equal footing).
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

try:
    from . import _kernels_cy
except ImportError:
    _kernels_cy = None

if os.environ.get("BCOPT_NO_EXT"):
    _kernels_cy = None

BACKEND = "cython" if _kernels_cy is not None else "python"


class _CyKernel:
    def __init__(self, data, indices, indptr, n_b, s_in, s_out):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        counts = self.indptr[1:] - self.indptr[:-1]
        self.nzcols = np.ascontiguousarray(np.nonzero(counts)[0], dtype=np.int64)
        self.n_b, self.s_in, self.s_out = int(n_b), int(s_in), int(s_out)

    def matvec(self, x):
        return _kernels_cy.bc_matvec(
            self.data, self.indices, self.indptr, self.nzcols,
            self.n_b, self.s_in, self.s_out,
            np.ascontiguousarray(x, dtype=np.float64),
        )

    def rmatvec(self, y):
        return _kernels_cy.bc_rmatvec(
            self.data, self.indices, self.indptr, self.nzcols,
            self.n_b, self.s_in, self.s_out,
            np.ascontiguousarray(y, dtype=np.float64),
        )


def make_kernel(data, indices, indptr, n_b, s_in, s_out, backend=None):
    """Build a matvec/rmatvec kernel for the given first block-row CSC arrays."""
    choice = backend or BACKEND
    if choice == "cython":
        if _kernels_cy is None:
            raise RuntimeError("compiled kernels are not available")
        return _CyKernel(data, indices, indptr, n_b, s_in, s_out)
    if choice == "python":
        return _kernels_py.Kernel(data, indices, indptr, n_b, s_in, s_out)
    raise ValueError(f"unknown kernel backend {choice!r}")
