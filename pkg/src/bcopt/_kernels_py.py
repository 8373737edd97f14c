"""NumPy/SciPy fallback kernels for block-circulant operator products.

Same contract as the compiled module: products against the concatenated
first block-row stored in CSC form. Selected automatically when the
extension is unavailable (see :mod:`bcopt.kernels`).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class Kernel:
    """Matvec/rmatvec with a block-circulant matrix given its first block-row.

    The first block-row [R_0 R_1 ... R_{n_b-1}] is held as one CSC matrix of
    shape (s_out, n_b*s_in); block (i, j) of the full operator is
    R_{(j-i) mod n_b}, so row-block i sees the input rotated by i blocks.
    """

    def __init__(self, data, indices, indptr, n_b, s_in, s_out):
        self.n_b = int(n_b)
        self.s_in = int(s_in)
        self.s_out = int(s_out)
        n = self.n_b * self.s_in
        self.row = sp.csc_matrix(
            (data, indices, indptr), shape=(self.s_out, n)
        )
        self.row_t = self.row.T.tocsr()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        n_b, s_in, s_out = self.n_b, self.s_in, self.s_out
        n = n_b * s_in
        xx = np.concatenate([x, x])  # doubled so each rotation is a view
        out = np.empty(n_b * s_out)
        for i in range(n_b):
            out[i * s_out : (i + 1) * s_out] = self.row @ xx[i * s_in : i * s_in + n]
        return out

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        n_b, s_in, s_out = self.n_b, self.s_in, self.s_out
        n = n_b * s_in
        acc = np.zeros(2 * n)
        for i in range(n_b):
            acc[i * s_in : i * s_in + n] += self.row_t @ y[i * s_out : (i + 1) * s_out]
        return acc[:n] + acc[n:]
