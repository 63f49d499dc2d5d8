"""Sign structures of Clifford-type algebras on subsets of {1, ..., p}.

A basis element of the algebra is indexed by a subset ``A`` of the
generators, stored as an integer bitmask (bit ``i - 1`` set when generator
``i`` belongs to ``A``).  Multiplication reads

    w_A w_B = (A|B) w_{A xor B},

with ``(A|B)`` in ``{-1, +1}``.  For algebras generated by ordered products
of generators, the whole table follows from the generator signs ``(i|i)``
and the commutation products ``(i|j)(j|i)``; the ordering convention fixes
``(i|j) = +1`` for ``i < j``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

MAX_P = 16
MAX_EXHAUSTIVE_P = 7


class SignatureKind(enum.Enum):
    STANDARD = "standard"
    CUSTOM = "custom"


class FieldCase(enum.Enum):
    REAL = "real"
    COMPLEX = "complex"
    QUATERNION = "quaternion"


_CASE_BY_EXPONENT = {1: FieldCase.REAL, 2: FieldCase.COMPLEX, 4: FieldCase.QUATERNION}


def popcount(x: int) -> int:
    return bin(x).count("1")


@dataclass(frozen=True, eq=False)
class CliffordSignature:
    """Multiplication signs of a general Clifford algebra.

    Attributes
    ----------
    p : int
        Number of generators.
    pair_table : dict
        Maps ``(i, j)`` with ``1 <= i <= j <= p`` to ``(i|i)`` when
        ``i == j`` and to the product ``(i|j)(j|i)`` otherwise.
    kind : SignatureKind
    explicit_table : ndarray or None
        Optional full ``2^p x 2^p`` tabulation of ``(A|B)``.  When given it
        overrides the multiplicative extension; this is how non-associative
        sign tables are represented.
    """

    p: int
    pair_table: dict
    kind: SignatureKind = SignatureKind.STANDARD
    explicit_table: np.ndarray | None = field(default=None, compare=False, repr=False)
    # per generator: bitmask of the earlier generators j < i with (i|j) = -1,
    # plus the generator itself when (i|i) = -1
    _neg_masks: tuple = field(default=(), compare=False, repr=False)

    @property
    def size(self) -> int:
        return 1 << self.p

    @property
    def full(self) -> int:
        """Bitmask of E = {1, ..., p}."""
        return self.size - 1

    @property
    def key(self) -> tuple:
        explicit = None if self.explicit_table is None else self.explicit_table.tobytes()
        return (self.p, self.kind.value, tuple(sorted(self.pair_table.items())), explicit)

    def __eq__(self, other):
        return isinstance(other, CliffordSignature) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def sign(self, A: int, B: int) -> int:
        return pair_sign(self, A, B)

    def table(self) -> np.ndarray:
        """Dense ``(A|B)`` table; only sensible for small p."""
        return sign_table(self)


def build_signature(p: int, kind: SignatureKind | str = SignatureKind.STANDARD,
                    custom_table: dict | None = None, max_p: int = MAX_P) -> CliffordSignature:
    """Build the sign structure of an algebra with ``p`` generators.

    Parameters
    ----------
    p : int
        Number of generators, ``0 <= p <= max_p``.
    kind : SignatureKind or str
        ``"standard"`` uses ``(i|i) = (i|j)(j|i) = -1`` for all ``i != j``.
        ``"custom"`` reads the signs from ``custom_table``.
    custom_table : dict, optional
        Keys ``(i, j)`` with ``1 <= i <= j <= p`` (generators are 1-based).
        Missing entries default to ``+1``.
    """
    kind = SignatureKind(kind)
    if p < 0:
        raise ValueError(f"p must be non-negative, got {p}")
    if p > max_p:
        raise ValueError(f"p={p} exceeds the configured maximum {max_p}")
    if kind is SignatureKind.STANDARD:
        if custom_table is not None:
            raise ValueError("custom_table is only accepted for kind='custom'")
        table = {(i, j): -1 for i in range(1, p + 1) for j in range(i, p + 1)}
    else:
        if custom_table is None:
            raise ValueError("kind='custom' requires custom_table")
        table = {(i, j): 1 for i in range(1, p + 1) for j in range(i, p + 1)}
        for key, value in custom_table.items():
            i, j = sorted(key)
            if not (1 <= i <= j <= p):
                raise ValueError(f"generator pair {key} outside 1..{p}")
            if value not in (-1, 1):
                raise ValueError(f"sign for {key} must be -1 or +1, got {value!r}")
            table[(i, j)] = int(value)
    return CliffordSignature(p, table, kind, None, _negative_masks(p, table))


def signature_from_table(table) -> CliffordSignature:
    """Wrap an explicit ``(A|B)`` tabulation as a custom signature.

    The table is trusted as given, so it may fail associativity; run
    :func:`verify_associativity` before relying on it.
    """
    table = np.asarray(table, dtype=np.int8)
    size = table.shape[0]
    p = size.bit_length() - 1
    if table.shape != (size, size) or (1 << p) != size:
        raise ValueError("explicit sign table must be 2^p x 2^p")
    if not np.all(np.abs(table) == 1):
        raise ValueError("explicit sign table entries must be -1 or +1")
    pairs = {}
    for i in range(1, p + 1):
        gi = 1 << (i - 1)
        pairs[(i, i)] = int(table[gi, gi])
        for j in range(i + 1, p + 1):
            gj = 1 << (j - 1)
            pairs[(i, j)] = int(table[gi, gj] * table[gj, gi])
    table = table.copy()
    table.setflags(write=False)
    return CliffordSignature(p, pairs, SignatureKind.CUSTOM, table, _negative_masks(p, pairs))


def _negative_masks(p, table):
    masks = []
    for i in range(1, p + 1):
        m = 0
        for j in range(1, i):
            if table[(j, i)] == -1:
                m |= 1 << (j - 1)
        if table[(i, i)] == -1:
            m |= 1 << (i - 1)
        masks.append(m)
    return tuple(masks)


def pair_sign(sig: CliffordSignature, A: int, B: int) -> int:
    """Return ``(A|B) = prod_{i in A, j in B} (i|j)``."""
    if sig.explicit_table is not None:
        return int(sig.explicit_table[A, B])
    parity = 0
    a, i = A, 0
    while a:
        if a & 1:
            parity ^= popcount(B & sig._neg_masks[i]) & 1
        a >>= 1
        i += 1
    return -1 if parity else 1


def sign_table(sig: CliffordSignature) -> np.ndarray:
    """All ``(A|B)`` as an int8 array of shape ``(2^p, 2^p)``."""
    if sig.explicit_table is not None:
        return np.array(sig.explicit_table)
    size = sig.size
    subsets = np.arange(size)
    parity = np.zeros((size, size), dtype=np.int64)
    for i, mask in enumerate(sig._neg_masks):
        in_a = (subsets >> i) & 1
        hits = _popcount_array(subsets & mask) & 1
        parity ^= np.outer(in_a, hits)
    return np.where(parity, -1, 1).astype(np.int8)


def _popcount_array(x):
    x = np.asarray(x, dtype=np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count


@dataclass
class AssociativityReport:
    passed: bool
    checked: int
    counterexample: tuple | None = None

    def __bool__(self):
        return self.passed


def verify_associativity(sig: CliffordSignature, mode: str = "exhaustive",
                         count: int = 10000, seed: int = 0) -> AssociativityReport:
    """Check ``(A|B xor C)(B|C) = (A|B)(A xor B|C)`` and the unit conditions.

    ``mode="exhaustive"`` runs over all ``8^p`` triples and is refused for
    ``p > 7``; ``mode="sampled"`` checks ``count`` random triples.
    """
    size = sig.size
    if mode == "exhaustive":
        if sig.p > MAX_EXHAUSTIVE_P:
            raise ValueError(f"exhaustive associativity check refused for p={sig.p} > {MAX_EXHAUSTIVE_P}")
        S = sign_table(sig).astype(np.int64)
        units = np.concatenate([S[:, 0], S[0, :]])
        if np.any(units != 1):
            bad = int(np.flatnonzero(S[:, 0] != 1)[0]) if np.any(S[:, 0] != 1) else int(np.flatnonzero(S[0] != 1)[0])
            return AssociativityReport(False, 0, (bad, 0, 0))
        idx = np.arange(size)
        A = idx[:, None, None]
        B = idx[None, :, None]
        C = idx[None, None, :]
        lhs = S[A, B ^ C] * S[B, C]
        rhs = S[A, B] * S[A ^ B, C]
        bad = np.argwhere(lhs != rhs)
        if len(bad):
            return AssociativityReport(False, size ** 3, tuple(int(v) for v in bad[0]))
        return AssociativityReport(True, size ** 3)
    if mode == "sampled":
        rng = np.random.default_rng(seed)
        triples = rng.integers(0, size, size=(count, 3))
        for A, B, C in triples:
            A, B, C = int(A), int(B), int(C)
            if pair_sign(sig, A, 0) != 1 or pair_sign(sig, 0, A) != 1:
                return AssociativityReport(False, count, (A, 0, 0))
            if pair_sign(sig, A, B ^ C) * pair_sign(sig, B, C) != pair_sign(sig, A, B) * pair_sign(sig, A ^ B, C):
                return AssociativityReport(False, count, (A, B, C))
        return AssociativityReport(True, count)
    raise ValueError(f"unknown mode {mode!r}")


def _require_standard(sig):
    if sig.kind is not SignatureKind.STANDARD:
        raise ValueError("this quantity is only defined here for standard signatures")


def self_sign_sum(sig: CliffordSignature) -> int:
    """Sum of ``(A|A)`` over all subsets ``A``."""
    _require_standard(sig)
    return sum(pair_sign(sig, A, A) for A in range(sig.size))


def self_sign_sum_closed(p: int) -> int:
    """Closed form of the self-sign sum for a standard algebra, by ``p mod 4``."""
    m, r = divmod(p, 4)
    if r == 0:
        return 2 ** (2 * m) * (-1) ** m
    if r == 1:
        return 0
    if r == 2:
        return 2 ** (2 * m + 1) * (-1) ** (m + 1)
    return 2 ** (2 * m + 2) * (-1) ** (m + 1)


def h_value(sig: CliffordSignature, C: int) -> int:
    """``H(C) = sum_A (A|C)(C|A)``."""
    _require_standard(sig)
    return sum(pair_sign(sig, A, C) * pair_sign(sig, C, A) for A in range(sig.size))


def _subsets_of(C):
    # standard submask enumeration, includes 0 and C
    A = C
    while True:
        yield A
        if A == 0:
            return
        A = (A - 1) & C


def s_even_odd(sig: CliffordSignature, B: int, C: int) -> tuple[int, int]:
    """Return ``(S^e(B, C), S^o(B, C))`` by direct summation over ``A ⊆ C``.

    ``S^e`` sums ``(A|B)(B|A)`` over even-sized ``A``, ``S^o`` over odd-sized.
    """
    _require_standard(sig)
    even = odd = 0
    for A in _subsets_of(C):
        v = pair_sign(sig, A, B) * pair_sign(sig, B, A)
        if popcount(A) % 2:
            odd += v
        else:
            even += v
    return even, odd


_M_PLUS = np.array([[1, 1], [-1, -1]], dtype=object)
_M_MINUS = np.array([[1, -1], [1, -1]], dtype=object)


def s_even_odd_recursive(B: int, C: int) -> tuple[int, int]:
    """Same quantity as :func:`s_even_odd` for a standard algebra, via the
    two-by-two transfer matrices.

    Removing one generator from ``B ⊆ C`` (and from ``C``) maps
    ``(S^e, S^o)`` through ``[[1, e], [-e, -1]]`` with ``e = (-1)^|B|``, so
    ``U(B, C) = M_{e_b} ... M_{e_1} U(∅, C \\ B)``.  Elements of ``B`` outside
    ``C`` only flip the sign of ``S^o``.
    """
    outside = popcount(B & ~C)
    b = popcount(B & C)
    k = popcount(C) - b
    vec = np.array([1, 0] if k == 0 else [2 ** (k - 1), 2 ** (k - 1)], dtype=object)
    for size in range(1, b + 1):
        vec = (_M_PLUS if size % 2 == 0 else _M_MINUS).dot(vec)
    return int(vec[0]), int(vec[1]) * (-1) ** outside


def s_even_odd_table(B: int, C: int) -> tuple[int, int]:
    """Case table for ``(S^e, S^o)`` after the reduction to ``B ⊆ C``."""
    outside = popcount(B & ~C)
    B &= C
    b, c = popcount(B), popcount(C)
    if B == 0:
        even, odd = (1, 0) if c == 0 else (2 ** (c - 1), 2 ** (c - 1))
    elif B != C:
        even, odd = 0, 0
    elif b % 2 == 0:
        even, odd = 2 ** (b - 1), -(2 ** (b - 1))
    else:
        even, odd = 2 ** (b - 1), 2 ** (b - 1)
    return even, odd * (-1) ** outside


@dataclass(frozen=True)
class MultiplicityPrediction:
    a: int
    case: FieldCase
    splits: bool
    repulsion: int

    def as_dict(self):
        return {"a": self.a, "case": self.case.value, "splits": self.splits, "repulsion": self.repulsion}


def predicted_multiplicity(p: int) -> MultiplicityPrediction:
    """Eigenvalue multiplicity of ``phi(M)`` for a standard algebra Cl(p).

    For ``p ≢ 3 (mod 4)`` the multiplicity ``a`` is the positive integer root
    of ``a^2 + S a - 2^(p+1) = 0`` with ``S`` the self-sign sum; the
    repulsion exponent of the distinct eigenvalues is ``a^2 / 2^p``.  For
    ``p ≡ 3 (mod 4)`` the algebra splits into two ideals, each a standard
    algebra on ``p - 1`` generators, and the values are those of ``p - 1``.
    """
    if p < 0:
        raise ValueError("p must be non-negative")
    splits = p % 4 == 3
    q = p - 1 if splits else p
    S = self_sign_sum_closed(q)
    disc = S * S + 2 ** (q + 3)
    root = math.isqrt(disc)
    if root * root != disc or (root - S) % 2:
        raise ArithmeticError(f"no integer multiplicity for p={p}")
    a = (root - S) // 2
    repulsion, rem = divmod(a * a, 2 ** q)
    if rem or repulsion not in _CASE_BY_EXPONENT:
        raise ArithmeticError(f"unexpected repulsion exponent a^2/2^p = {a * a / 2 ** q} for p={p}")
    return MultiplicityPrediction(a, _CASE_BY_EXPONENT[repulsion], splits, repulsion)
