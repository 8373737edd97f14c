"""Block-circulant scaling metric built from a Hessian's spectral diagonal.

The scaling pair is P = F* diag(t) F and C = P^(1/2) = F* diag(sqrt(t)) F,
where t is the reciprocal of the diagonal of the block-diagonalized Hessian
(or Hessian approximation). P approximates the inverse Hessian, so C' H C
is approximately the identity and descent directions -P g mimic Newton
steps at FFT cost. One scaling is built per problem and reused across all
solver iterations.
"""

from __future__ import annotations

import numpy as np

from .circulant import BlockCirculantOp, iter_spectral_blocks
from .ops import LinOp


class DegenerateScalingError(RuntimeError):
    """A spectral diagonal entry was too close to zero to invert."""


class ScalingConsistencyError(RuntimeError):
    """An FFT apply produced a non-negligible imaginary part."""


_IMAG_TOL = 1e-8


class _ScalingLinOp(LinOp):
    def __init__(self, fn, n):
        super().__init__(n, n)
        self._fn = fn

    def apply(self, x):
        return self._fn(self._check_input(x, self.ncols))

    adjoint_apply = apply  # all scaling maps are symmetric


class ScalingOp:
    """FFT-diagonal scaling with exponents carried by the vector t > 0.

    t is stored in DFT ordering, one entry per (frequency, within-block
    coordinate); entries at paired frequencies k and n_b - k are equal, which
    keeps every apply real.
    """

    def __init__(self, t: np.ndarray, n_b: int, s: int):
        t = np.asarray(t, dtype=float)
        if t.shape != (n_b * s,):
            raise ValueError(f"t must have length {n_b * s}")
        if np.any(t <= 0):
            raise DegenerateScalingError("scaling diagonal must be positive")
        self.n_b = int(n_b)
        self.s = int(s)
        self.n = self.n_b * self.s
        self.t = t

    def _fourier_diag_apply(self, x, exponent):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}")
        xh = np.fft.ifft(x.reshape(self.n_b, self.s), axis=0, norm="ortho")
        xh *= (self.t.reshape(self.n_b, self.s)) ** exponent
        y = np.fft.fft(xh, axis=0, norm="ortho").ravel()
        resid = np.abs(y.imag).max()
        if resid > _IMAG_TOL * max(np.linalg.norm(x), 1e-300):
            raise ScalingConsistencyError(
                f"imaginary residue {resid:.2e} exceeds tolerance; "
                "spectral diagonal lost conjugate symmetry"
            )
        return y.real

    def apply_P(self, x):
        return self._fourier_diag_apply(x, 1.0)

    def apply_Pinv(self, x):
        return self._fourier_diag_apply(x, -1.0)

    def apply_C(self, x):
        return self._fourier_diag_apply(x, 0.5)

    def apply_Cinv(self, x):
        return self._fourier_diag_apply(x, -0.5)

    def scaled_inner(self, x, z) -> float:
        """SPD bilinear form <x, P^{-1} z>, the scalar product of the scaled space."""
        return float(np.dot(np.asarray(x, dtype=float), self.apply_Pinv(z)))

    @property
    def P(self) -> LinOp:
        return _ScalingLinOp(self.apply_P, self.n)

    @property
    def Pinv(self) -> LinOp:
        return _ScalingLinOp(self.apply_Pinv, self.n)


def build_scaling(H_approx: BlockCirculantOp) -> ScalingOp:
    """Scaling from the inverse spectral diagonal of a block-circulant SPD operator.

    Walks the diagonal blocks of F H F* one at a time, keeps only their real
    diagonals, inverts them, and averages paired frequencies so the resulting
    operators are exactly real.
    """
    if H_approx.s_in != H_approx.s_out:
        raise ValueError("scaling requires a square block-circulant operator")
    n_b, s = H_approx.n_b, H_approx.s_in
    d = np.empty((n_b, s))
    for k, block in enumerate(iter_spectral_blocks(H_approx)):
        d[k] = np.diagonal(block).real
    floor = 1e-12 * d.max()
    if np.any(d <= floor):
        raise DegenerateScalingError(
            f"spectral diagonal entries at or below {floor:.3e}; "
            "Hessian approximation is numerically singular"
        )
    t = 1.0 / d
    t = 0.5 * (t + t[(-np.arange(n_b)) % n_b])  # pair k with n_b - k
    return ScalingOp(t.ravel(), n_b, s)


class IdentityScaling:
    """Trivial scaling; scaled solver paths reduce to their unscaled twins."""

    def __init__(self, n: int):
        self.n = int(n)

    def _copy(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}")
        return x.copy()

    apply_P = apply_Pinv = apply_C = apply_Cinv = _copy

    def scaled_inner(self, x, z) -> float:
        return float(np.dot(x, z))

    @property
    def P(self) -> LinOp:
        return _ScalingLinOp(self._copy, self.n)

    @property
    def Pinv(self) -> LinOp:
        return _ScalingLinOp(self._copy, self.n)


class DenseScaling:
    """Scaling from an explicit SPD matrix; for tests and small instances."""

    def __init__(self, P: np.ndarray):
        P = np.asarray(P, dtype=float)
        w, Q = np.linalg.eigh(0.5 * (P + P.T))
        if w.min() <= 0:
            raise DegenerateScalingError("dense scaling matrix must be SPD")
        self.n = P.shape[0]
        self._w = w
        self._Q = Q

    def _sym_apply(self, x, exponent):
        x = np.asarray(x, dtype=float)
        return self._Q @ ((self._w ** exponent) * (self._Q.T @ x))

    def apply_P(self, x):
        return self._sym_apply(x, 1.0)

    def apply_Pinv(self, x):
        return self._sym_apply(x, -1.0)

    def apply_C(self, x):
        return self._sym_apply(x, 0.5)

    def apply_Cinv(self, x):
        return self._sym_apply(x, -0.5)

    def scaled_inner(self, x, z) -> float:
        return float(np.dot(np.asarray(x, dtype=float), self.apply_Pinv(z)))

    @property
    def P(self) -> LinOp:
        return _ScalingLinOp(self.apply_P, self.n)

    @property
    def Pinv(self) -> LinOp:
        return _ScalingLinOp(self.apply_Pinv, self.n)
