# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for block-circulant operator products.

Both kernels walk the CSC arrays of the concatenated first block-row
directly, using modular index arithmetic instead of materializing rotated
copies of the input. Zero input entries are skipped, which pays off on the
sparse iterates produced by projected methods.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def bc_matvec(const double[::1] data, const long long[::1] indices,
              const long long[::1] indptr, const long long[::1] nzcols,
              Py_ssize_t n_b, Py_ssize_t s_in, Py_ssize_t s_out,
              const double[::1] x):
    cdef Py_ssize_t n = n_b * s_in
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(n_b * s_out)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, ci, c, p, src, base, ybase
    cdef double xv
    for i in range(n_b):
        base = i * s_in
        ybase = i * s_out
        for ci in range(nzcols.shape[0]):
            c = nzcols[ci]
            src = base + c
            if src >= n:
                src -= n
            xv = x[src]
            if xv != 0.0:
                for p in range(indptr[c], indptr[c + 1]):
                    ov[ybase + indices[p]] += data[p] * xv
    return out


def bc_rmatvec(const double[::1] data, const long long[::1] indices,
               const long long[::1] indptr, const long long[::1] nzcols,
               Py_ssize_t n_b, Py_ssize_t s_in, Py_ssize_t s_out,
               const double[::1] y):
    cdef Py_ssize_t n = n_b * s_in
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(n)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, ci, c, p, dst, base, ybase
    cdef double acc
    for i in range(n_b):
        base = i * s_in
        ybase = i * s_out
        for ci in range(nzcols.shape[0]):
            c = nzcols[ci]
            acc = 0.0
            for p in range(indptr[c], indptr[c + 1]):
                acc += data[p] * y[ybase + indices[p]]
            if acc != 0.0:
                dst = base + c
                if dst >= n:
                    dst -= n
                ov[dst] += acc
    return out
