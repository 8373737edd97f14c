"""Block-circulant operators and their blockwise DFT diagonalization.

A block-circulant matrix is stored by its first block-row only: block (i, j)
of the full matrix equals ``R[(j - i) mod n_b]``. The blockwise unitary DFT
F (positive-exponent convention, so F* is the plain FFT) conjugates such a
matrix to block-diagonal form, with diagonal blocks

    A_hat[k] = sum_j R[j] * exp(-2*pi*1j*k*j / n_b).

Products are evaluated in the spatial domain through the sparse blocks; the
spectral route exists for scaling construction and for cross-checks.
"""

from __future__ import annotations

import struct

import numpy as np
import scipy.sparse as sp

from .kernels import make_kernel
from .ops import ConfigurationError, LinOp


class BlockCirculantOp(LinOp):
    """Block-circulant operator defined by its first block-row.

    Parameters
    ----------
    blocks : sequence of (s_out, s_in) sparse or dense arrays, length n_b.
        ``blocks[j]`` is the (0, j) block of the full matrix.
    """

    def __init__(self, blocks, backend=None):
        blocks = [sp.csc_matrix(b) for b in blocks]
        if not blocks:
            raise ConfigurationError("need at least one block")
        s_out, s_in = blocks[0].shape
        for b in blocks:
            if b.shape != (s_out, s_in):
                raise ConfigurationError("all blocks must share one shape")
        self.n_b = len(blocks)
        self.s_in = s_in
        self.s_out = s_out
        self.blocks = blocks
        super().__init__(self.n_b * s_out, self.n_b * s_in)
        row = sp.hstack(blocks, format="csc") if self.n_b > 1 else blocks[0].tocsc()
        row.sort_indices()
        self._kernel = make_kernel(
            row.data, row.indices, row.indptr, self.n_b, s_in, s_out, backend=backend
        )
        # COO view of the first block-row, used by the spectral loop.
        coo = row.tocoo()
        self._coo_rows = coo.row.astype(np.intp)
        self._coo_cols = (coo.col % s_in).astype(np.intp)
        self._coo_block = (coo.col // s_in).astype(np.intp)
        self._coo_vals = coo.data.astype(float)

    def apply(self, x):
        x = self._check_input(x, self.ncols)
        return self._kernel.matvec(x)

    def adjoint_apply(self, y):
        y = self._check_input(y, self.nrows)
        return self._kernel.rmatvec(y)

    @property
    def T(self) -> "BlockCirculantOp":
        """Adjoint, itself block-circulant: blocks are transposed and index-reversed."""
        n_b = self.n_b
        return BlockCirculantOp(
            [self.blocks[(-v) % n_b].T for v in range(n_b)]
        )

    def dense(self):
        n_b, s_out, s_in = self.n_b, self.s_out, self.s_in
        out = np.zeros((n_b * s_out, n_b * s_in))
        for i in range(n_b):
            for j in range(n_b):
                out[i * s_out : (i + 1) * s_out, j * s_in : (j + 1) * s_in] = (
                    self.blocks[(j - i) % n_b].toarray()
                )
        return out

    def nnz(self) -> int:
        return sum(b.nnz for b in self.blocks)

    # -- block-circulant algebra (closed under these operations) --

    def __matmul__(self, other: "BlockCirculantOp") -> "BlockCirculantOp":
        if not isinstance(other, BlockCirculantOp):
            return NotImplemented
        if self.n_b != other.n_b or self.s_in != other.s_out:
            raise ConfigurationError(
                f"cannot multiply block structures {self.shape} @ {other.shape}"
            )
        n_b = self.n_b
        blocks = []
        for v in range(n_b):
            acc = None
            for u in range(n_b):
                term = self.blocks[u] @ other.blocks[(v - u) % n_b]
                acc = term if acc is None else acc + term
            blocks.append(acc)
        return BlockCirculantOp(blocks)

    def __add__(self, other: "BlockCirculantOp") -> "BlockCirculantOp":
        if not isinstance(other, BlockCirculantOp):
            return NotImplemented
        if (self.n_b, self.s_in, self.s_out) != (other.n_b, other.s_in, other.s_out):
            raise ConfigurationError("block structure mismatch in sum")
        return BlockCirculantOp(
            [a + b for a, b in zip(self.blocks, other.blocks)]
        )

    def scaled(self, alpha: float) -> "BlockCirculantOp":
        return BlockCirculantOp([alpha * b for b in self.blocks])

    def premultiply_diag(self, d: np.ndarray) -> "BlockCirculantOp":
        """diag(d, d, ..., d) @ A with one length-s_out diagonal repeated per block."""
        d = np.asarray(d, dtype=float)
        if d.shape != (self.s_out,):
            raise ConfigurationError("diagonal must have length s_out")
        D = sp.diags(d)
        return BlockCirculantOp([D @ b for b in self.blocks])


def bc_identity(n_b: int, s: int) -> BlockCirculantOp:
    blocks = [sp.identity(s, format="csc")]
    blocks += [sp.csc_matrix((s, s)) for _ in range(n_b - 1)]
    return BlockCirculantOp(blocks)


def bc_apply(A: BlockCirculantOp, x: np.ndarray) -> np.ndarray:
    """Spatial-domain product with a block-circulant operator."""
    return A.apply(x)


def blockwise_dft(x: np.ndarray, n_b: int, s: int) -> np.ndarray:
    """Unitary DFT across the block index, per within-block coordinate."""
    x = np.asarray(x)
    if x.shape != (n_b * s,):
        raise ConfigurationError(f"expected length {n_b * s}, got {x.shape}")
    return np.fft.ifft(x.reshape(n_b, s), axis=0, norm="ortho").ravel()


def blockwise_idft(xh: np.ndarray, n_b: int, s: int) -> np.ndarray:
    """Inverse of :func:`blockwise_dft` (the adjoint, since F is unitary)."""
    xh = np.asarray(xh)
    if xh.shape != (n_b * s,):
        raise ConfigurationError(f"expected length {n_b * s}, got {xh.shape}")
    return np.fft.fft(xh.reshape(n_b, s), axis=0, norm="ortho").ravel()


def dense_dft_matrix(n_b: int, s: int) -> np.ndarray:
    """Dense blockwise DFT matrix (kron of the unitary DFT with I_s); tests only."""
    k, j = np.meshgrid(np.arange(n_b), np.arange(n_b), indexing="ij")
    f = np.exp(2j * np.pi * k * j / n_b) / np.sqrt(n_b)
    return np.kron(f, np.eye(s))


def iter_spectral_blocks(A: BlockCirculantOp):
    """Yield the diagonal blocks of F A F* one at a time.

    Peak memory beyond the operator is one dense (s_out, s_in) complex block,
    which is what makes scaling construction affordable at full scale.
    """
    n_b = A.n_b
    for k in range(n_b):
        phase = np.exp(-2j * np.pi * k * A._coo_block / n_b)
        block = np.zeros((A.s_out, A.s_in), dtype=complex)
        np.add.at(block, (A._coo_rows, A._coo_cols), A._coo_vals * phase)
        yield block


class SpectralBlocks:
    """The n_b dense diagonal blocks of F A F* for a block-circulant A."""

    def __init__(self, blocks: np.ndarray):
        blocks = np.asarray(blocks, dtype=complex)
        if blocks.ndim != 3:
            raise ConfigurationError("expected an (n_b, s_out, s_in) array")
        self.blocks = blocks
        self.n_b, self.s_out, self.s_in = blocks.shape

    def is_conjugate_symmetric(self, tol: float = 1e-10) -> bool:
        shifted = np.conj(self.blocks[(-np.arange(self.n_b)) % self.n_b])
        scale = max(np.abs(self.blocks).max(), 1.0)
        return bool(np.abs(self.blocks - shifted).max() <= tol * scale)

    def first_block_row(self) -> np.ndarray:
        """Invert the blockwise DFT, recovering the spatial first block-row."""
        return np.fft.ifft(self.blocks, axis=0)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Spectral-domain product: y = F* (A_hat . (F x))."""
        xh = blockwise_dft(x, self.n_b, self.s_in).reshape(self.n_b, self.s_in)
        yh = np.einsum("kab,kb->ka", self.blocks, xh)
        return blockwise_idft(yh.ravel(), self.n_b, self.s_out).real


def block_diagonalize(A: BlockCirculantOp) -> SpectralBlocks:
    """All diagonal blocks of F A F*, assembled from :func:`iter_spectral_blocks`."""
    out = np.empty((A.n_b, A.s_out, A.s_in), dtype=complex)
    for k, block in enumerate(iter_spectral_blocks(A)):
        out[k] = block
    return SpectralBlocks(out)


# -- binary container for caching generated operators between CLI runs --

_MAGIC = b"BCOP"


def save_bcop(path, A: BlockCirculantOp) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<3Q", A.n_b, A.s_in, A.s_out))
        for b in A.blocks:
            b = b.tocsc()
            b.sort_indices()
            fh.write(np.asarray(b.indptr, dtype="<u8").tobytes())
            fh.write(np.asarray(b.indices, dtype="<u8").tobytes())
            fh.write(np.asarray(b.data, dtype="<f8").tobytes())


def load_bcop(path) -> BlockCirculantOp:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ConfigurationError(f"{path}: not a BCOP container")
        n_b, s_in, s_out = struct.unpack("<3Q", fh.read(24))
        blocks = []
        for _ in range(n_b):
            indptr = np.frombuffer(fh.read(8 * (s_in + 1)), dtype="<u8").astype(np.int64)
            nnz = int(indptr[-1])
            indices = np.frombuffer(fh.read(8 * nnz), dtype="<u8").astype(np.int64)
            data = np.frombuffer(fh.read(8 * nnz), dtype="<f8").astype(float)
            blocks.append(
                sp.csc_matrix((data, indices, indptr), shape=(s_out, s_in))
            )
    return BlockCirculantOp(blocks)
