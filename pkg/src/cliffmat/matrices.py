"""Cl(E)-symmetric matrices and their real block realization.

A Clifford matrix is a family of real ``n x n`` blocks ``M^A`` indexed by
subsets ``A``, with ``(M^A)^t = (A|A) M^A``.  Its realization ``phi(M)`` is
the real ``n 2^p`` square matrix whose ``(A, B)`` block is
``(A xor B|B) M^{A xor B}``, i.e. the matrix of left multiplication on
``R^n ⊗ Cl(E)``.  Under the constraint above it is symmetric.

Random blocks follow the Euclidean metric where every independent entry is
an independent Gaussian: diagonal entries of symmetric blocks have variance
``t``, off-diagonal entries variance ``t / 2`` (mirrored with the block's
transpose sign), and antisymmetric diagonals are identically zero.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .clifford import CliffordSignature, SignatureKind, build_signature, sign_table

PROCESSES = ("gaussian", "brownian", "ou", "sphere")


class StructureError(ValueError):
    """A block family violates the transpose constraint of its signature."""


def replica_rng(seed: int, replica: int = 0) -> np.random.Generator:
    """Independent generator for one replica, determined by ``(seed, replica)`` only."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replica,))))


@dataclass(frozen=True)
class EnsembleConfig:
    """Sampling parameters.

    ``t`` scales every coordinate variance; ``process`` records which
    process the samples stand for (``"gaussian"`` and stationary ``"ou"``
    both draw exact Gaussians).
    """

    n: int
    p: int
    process: str = "gaussian"
    t: float = 1.0
    seed: int = 0
    kind: str = "standard"
    sig: CliffordSignature | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.t < 0:
            raise ValueError("variance scale t must be non-negative")
        if self.process not in PROCESSES:
            raise ValueError(f"process must be one of {PROCESSES}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def signature(self) -> CliffordSignature:
        if self.sig is not None:
            return self.sig
        return build_signature(self.p, self.kind)


@dataclass(frozen=True)
class CliffordMatrix:
    n: int
    sig: CliffordSignature
    blocks: np.ndarray  # shape (2^p, n, n)

    def __post_init__(self):
        if self.blocks.shape != (self.sig.size, self.n, self.n):
            raise ValueError(f"blocks must have shape {(self.sig.size, self.n, self.n)}, got {self.blocks.shape}")

    @property
    def dim(self) -> int:
        return self.n * self.sig.size

    def __add__(self, other):
        return CliffordMatrix(self.n, self.sig, self.blocks + other.blocks)

    def __rmul__(self, scalar):
        return CliffordMatrix(self.n, self.sig, scalar * self.blocks)

    def __matmul__(self, other):
        return clifford_product(self, other)

    @classmethod
    def identity(cls, n, sig):
        blocks = np.zeros((sig.size, n, n))
        blocks[0] = np.eye(n)
        return cls(n, sig, blocks)

    @classmethod
    def zeros(cls, n, sig):
        return cls(n, sig, np.zeros((sig.size, n, n)))

    def check_structure(self, atol: float = 0.0) -> None:
        """Raise :class:`StructureError` naming the first block with ``(M^A)^t != (A|A) M^A``."""
        signs = np.diagonal(sign_table(self.sig)).astype(float)
        residual = self.blocks.transpose(0, 2, 1) - signs[:, None, None] * self.blocks
        bad = np.flatnonzero(np.abs(residual).reshape(self.sig.size, -1).max(axis=1, initial=0.0) > atol)
        if len(bad):
            A = int(bad[0])
            raise StructureError(f"block A={A:#b} violates (M^A)^t = (A|A) M^A with (A|A)={int(signs[A])}")


@dataclass(frozen=True)
class CoordinateLayout:
    """Independent coordinates of Cl-symmetric matrices and their footprint in ``phi``.

    Coordinate ``u`` is the entry ``(i, j)``, ``i <= j``, of block ``A``.
    ``metric[u]`` is its carré du champ ``Gamma(u, u)`` (1 on symmetric
    diagonals, 1/2 elsewhere).  ``rows``, ``cols``, ``vals`` list, padded
    with zero values, the entries of ``d phi(M) / du``.
    """

    n: int
    p: int
    block: np.ndarray
    i: np.ndarray
    j: np.ndarray
    transpose_sign: np.ndarray
    metric: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @property
    def count(self) -> int:
        return len(self.metric)

    def unpack(self, u: np.ndarray) -> np.ndarray:
        """Coordinates of shape ``(..., K)`` to blocks of shape ``(..., 2^p, n, n)``."""
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape[:-1] + (1 << self.p, self.n, self.n))
        out[..., self.block, self.j, self.i] = self.transpose_sign * u
        out[..., self.block, self.i, self.j] = u
        return out

    def pack(self, blocks: np.ndarray) -> np.ndarray:
        return np.asarray(blocks)[..., self.block, self.i, self.j]

    def derivative_matrix(self, u: int) -> np.ndarray:
        dim = self.n << self.p
        E = np.zeros((dim, dim))
        np.add.at(E, (self.rows[u], self.cols[u]), self.vals[u])
        return E


def coordinate_layout(sig: CliffordSignature, n: int) -> CoordinateLayout:
    return _layout(sig, n)


@lru_cache(maxsize=64)
def _layout(sig, n):
    S = sign_table(sig).astype(float)
    size = sig.size
    block, ii, jj, tsign, metric = [], [], [], [], []
    for A in range(size):
        s = S[A, A]
        for i in range(n):
            for j in range(i, n):
                if i == j and s < 0:
                    continue
                block.append(A)
                ii.append(i)
                jj.append(j)
                tsign.append(s)
                metric.append(1.0 if i == j else 0.5)
    block = np.array(block, dtype=np.int64)
    ii = np.array(ii, dtype=np.int64)
    jj = np.array(jj, dtype=np.int64)
    tsign = np.array(tsign)
    # block rows B' with B' xor B = A: entry of phi at (B' n + i, B n + j) is (A|B) M^A_ij
    Bs = np.arange(size)
    width = size if n == 1 else 2 * size
    K = len(block)
    rows = np.zeros((K, width), dtype=np.int64)
    cols = np.zeros((K, width), dtype=np.int64)
    vals = np.zeros((K, width))
    for u in range(K):
        A, i, j = block[u], ii[u], jj[u]
        rowblk = Bs ^ A
        sg = S[A, Bs]
        rows[u, :size] = rowblk * n + i
        cols[u, :size] = Bs * n + j
        vals[u, :size] = sg
        if i != j:
            rows[u, size:] = rowblk * n + j
            cols[u, size:] = Bs * n + i
            vals[u, size:] = sg * tsign[u]
    for arr in (block, ii, jj, tsign, rows, cols, vals):
        arr.setflags(write=False)
    return CoordinateLayout(n, sig.p, block, ii, jj, tsign, np.array(metric), rows, cols, vals)


def sample_coordinates(config: EnsembleConfig, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
    layout = coordinate_layout(config.signature, config.n)
    shape = (layout.count,) if count is None else (count, layout.count)
    return rng.standard_normal(shape) * np.sqrt(config.t * layout.metric)


def sample_blocks(config: EnsembleConfig, replica: int = 0) -> CliffordMatrix:
    """Draw one Gaussian Cl-symmetric matrix for ``replica`` of ``config.seed``."""
    sig = config.signature
    layout = coordinate_layout(sig, config.n)
    u = sample_coordinates(config, replica_rng(config.seed, replica))
    return CliffordMatrix(config.n, sig, layout.unpack(u))


def sample_batch(config: EnsembleConfig, count: int, start: int = 0) -> np.ndarray:
    """Blocks of replicas ``start, ..., start + count - 1``, shape ``(count, 2^p, n, n)``.

    Replica ``r`` always gets the same draw whatever ``start`` and ``count`` are.
    """
    sig = config.signature
    layout = coordinate_layout(sig, config.n)
    scale = np.sqrt(config.t * layout.metric)
    u = np.empty((count, layout.count))
    for k in range(count):
        u[k] = replica_rng(config.seed, start + k).standard_normal(layout.count) * scale
    return layout.unpack(u)


def realize_blocks(blocks: np.ndarray, sig: CliffordSignature) -> np.ndarray:
    """``phi`` applied to raw blocks of shape ``(..., 2^p, n, n)``; no symmetry check."""
    blocks = np.asarray(blocks, dtype=float)
    size = sig.size
    n = blocks.shape[-1]
    S = sign_table(sig).astype(float)
    idx = np.arange(size)
    C = idx[:, None] ^ idx[None, :]
    signs = S[C, idx[None, :]]
    big = blocks[..., C, :, :] * signs[:, :, None, None]
    lead = blocks.shape[:-3]
    return np.swapaxes(big, -3, -2).reshape(lead + (size * n, size * n))


def realize(M: CliffordMatrix) -> np.ndarray:
    """Real symmetric realization ``phi(M)``.

    Raises :class:`StructureError` if the blocks violate the transpose
    constraint, or if the result is not exactly symmetric (which happens
    only for inconsistent explicit sign tables).
    """
    M.check_structure()
    R = realize_blocks(M.blocks, M.sig)
    if not np.array_equal(R, R.T):
        raise StructureError("realized matrix is not symmetric; the sign table is inconsistent")
    return R


def clifford_product(M: CliffordMatrix, N: CliffordMatrix) -> CliffordMatrix:
    """Block-level product ``(MN)^C = sum_{A xor B = C} (A|B) M^A N^B``."""
    if M.n != N.n or M.sig != N.sig:
        raise ValueError("operands must share n and signature")
    S = sign_table(M.sig).astype(float)
    size = M.sig.size
    out = np.zeros_like(M.blocks)
    for A in range(size):
        for B in range(size):
            out[A ^ B] += S[A, B] * (M.blocks[A] @ N.blocks[B])
    return CliffordMatrix(M.n, M.sig, out)


def verify_homomorphism(M: CliffordMatrix, N: CliffordMatrix) -> float:
    """``max |phi(MN) - phi(M) phi(N)|``."""
    lhs = realize_blocks(clifford_product(M, N).blocks, M.sig)
    rhs = realize_blocks(M.blocks, M.sig) @ realize_blocks(N.blocks, N.sig)
    return float(np.max(np.abs(lhs - rhs)))


def _require_split(sig):
    if sig.kind is not SignatureKind.STANDARD or sig.p % 4 != 3:
        raise ValueError(f"ideal decomposition needs a standard signature with p ≡ 3 mod 4, got p={sig.p}")


def plus_ideal_project(M: CliffordMatrix) -> CliffordMatrix:
    """Average each pair ``(M^A, (A|E) M^{A xor E})`` so that ``M^{A xor E} = (A|E) M^A``.

    The result acts as zero on the ideal ``Cl(E)_-``.
    """
    sig = M.sig
    _require_split(sig)
    E = sig.full
    S = sign_table(sig).astype(float)
    idx = np.arange(sig.size)
    partner = M.blocks[idx ^ E] * S[idx, E][:, None, None]
    return CliffordMatrix(M.n, sig, 0.5 * (M.blocks + partner))


def ideal_bases(sig: CliffordSignature, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of ``R^n ⊗ Cl(E)_±`` as columns, from ``phi(w_E)``."""
    _require_split(sig)
    w = np.zeros((sig.size, n, n))
    w[sig.full] = np.eye(n)
    W = realize_blocks(w, sig)
    evals, vecs = np.linalg.eigh(W)
    return vecs[:, evals > 0], vecs[:, evals < 0]


def ideal_factors(M: CliffordMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Restrictions of ``phi(M)`` to the two ideals; their spectra partition that of ``phi(M)``."""
    plus, minus = ideal_bases(M.sig, M.n)
    R = realize(M)
    return plus.T @ R @ plus, minus.T @ R @ minus


def to_json(M: CliffordMatrix) -> str:
    """JSON layout: header ``{n, p, kind}`` then blocks in subset-id order, row-major."""
    doc = {"n": M.n, "p": M.sig.p, "kind": M.sig.kind.value, "blocks": M.blocks.reshape(M.sig.size, -1).tolist()}
    if M.sig.kind is SignatureKind.CUSTOM:
        doc["pair_table"] = [[i, j, s] for (i, j), s in sorted(M.sig.pair_table.items())]
    return json.dumps(doc)


def from_json(text: str) -> CliffordMatrix:
    doc = json.loads(text)
    sig = _sig_from_header(doc)
    blocks = np.asarray(doc["blocks"], dtype=float).reshape(sig.size, doc["n"], doc["n"])
    return CliffordMatrix(doc["n"], sig, blocks)


_MAGIC = b"CLFM"


def to_bytes(M: CliffordMatrix) -> bytes:
    """Flat binary layout: magic, a length-prefixed JSON header, then little-endian float64 blocks."""
    header = {"n": M.n, "p": M.sig.p, "kind": M.sig.kind.value}
    if M.sig.kind is SignatureKind.CUSTOM:
        header["pair_table"] = [[i, j, s] for (i, j), s in sorted(M.sig.pair_table.items())]
    head = json.dumps(header).encode()
    return _MAGIC + struct.pack("<I", len(head)) + head + M.blocks.astype("<f8").tobytes()


def from_bytes(data: bytes) -> CliffordMatrix:
    if data[:4] != _MAGIC:
        raise ValueError("not a Clifford matrix record")
    (size,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8:8 + size])
    sig = _sig_from_header(header)
    n = header["n"]
    blocks = np.frombuffer(data[8 + size:], dtype="<f8").reshape(sig.size, n, n).astype(float)
    return CliffordMatrix(n, sig, blocks)


def _sig_from_header(doc):
    if doc["kind"] == "custom":
        return build_signature(doc["p"], "custom", {(i, j): s for i, j, s in doc["pair_table"]})
    return build_signature(doc["p"])
