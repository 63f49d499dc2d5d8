"""Monic polynomials, characteristic polynomials, resultants and root powers.

Sign convention: characteristic polynomials are the monic ``det(X I - M)``.
:func:`det_m_minus_x` converts to ``det(M - X I)`` and is the only place the
other convention appears.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.linalg import hessenberg


@dataclass(frozen=True)
class MonicPolynomial:
    """``X^d + a_{d-1} X^{d-1} + ... + a_0`` stored as ``coeffs = (a_0, ..., a_{d-1})``.

    When built with :meth:`from_roots` the roots are kept and used for
    evaluation, which is far better conditioned than Horner near clusters.
    """

    coeffs: np.ndarray
    roots: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1:
            raise ValueError("coefficients must be a vector")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_roots(cls, roots) -> "MonicPolynomial":
        r = np.sort(np.asarray(roots, dtype=float).ravel())
        return cls(exact_vieta(r)[:-1], r)

    @classmethod
    def from_full(cls, full) -> "MonicPolynomial":
        """From ``(a_0, ..., a_d)``; the leading coefficient is divided out."""
        full = np.asarray(full, dtype=float)
        if full[-1] == 0:
            raise ValueError("leading coefficient is zero")
        return cls(full[:-1] / full[-1])

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    @property
    def full(self) -> np.ndarray:
        """``(a_0, ..., a_{d-1}, 1)``."""
        return np.append(self.coeffs, 1.0)

    def __call__(self, X):
        return self.derivative_values(X, 0)

    def derivative_values(self, X, order: int = 0):
        """``P^{(order)}(X)``, computed from the roots when they are known."""
        X = np.asarray(X, dtype=float)
        if self.roots is None or order > 2:
            return npoly.polyval(X, npoly.polyder(self.full, order) if order else self.full)
        value, s1, s2 = self.log_derivatives(X)
        if order == 0:
            return value
        if order == 1:
            return value * s1
        return value * (s1 * s1 - s2)

    def log_derivatives(self, X):
        """``(P(X), sum 1/(X - r), sum 1/(X - r)^2)``; needs known roots."""
        if self.roots is None:
            raise ValueError("log derivatives need the roots")
        X = np.asarray(X, dtype=float)
        diff = X[..., None] - self.roots
        inv = 1.0 / diff
        return np.prod(diff, axis=-1), inv.sum(axis=-1), (inv * inv).sum(axis=-1)

    def __mul__(self, other: "MonicPolynomial") -> "MonicPolynomial":
        prod = npoly.polymul(self.full, other.full)
        roots = None
        if self.roots is not None and other.roots is not None:
            roots = np.sort(np.concatenate([self.roots, other.roots]))
        return MonicPolynomial(prod[:-1], roots)

    def __pow__(self, k: int) -> "MonicPolynomial":
        prod = npoly.polypow(self.full, k)
        roots = None if self.roots is None else np.sort(np.repeat(self.roots, k))
        return MonicPolynomial(prod[:-1], roots)

    def to_json(self) -> str:
        """Coefficient array, constant term first, leading 1 included."""
        return json.dumps(self.full.tolist())

    @classmethod
    def from_json(cls, text: str) -> "MonicPolynomial":
        return cls.from_full(json.loads(text))


def det_m_minus_x(P: MonicPolynomial) -> np.ndarray:
    """Coefficients (constant first) of ``det(M - X I) = (-1)^d det(X I - M)``."""
    return (-1.0) ** P.degree * P.full


@dataclass(frozen=True)
class SpectrumSummary:
    eigenvalues: np.ndarray
    distinct: np.ndarray
    multiplicities: np.ndarray
    tolerance: float

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def uniform_multiplicity(self) -> int | None:
        """The common cluster size, or ``None`` if clusters differ in size."""
        m = np.unique(self.multiplicities)
        return int(m[0]) if len(m) == 1 else None


def cluster_sorted(values: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Single-linkage clusters of sorted values; returns cluster means and sizes."""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return values, np.zeros(0, dtype=int)
    breaks = np.flatnonzero(np.diff(values) > threshold) + 1
    starts = np.concatenate([[0], breaks])
    sizes = np.diff(np.concatenate([starts, [len(values)]]))
    means = np.add.reduceat(values, starts) / sizes
    return means, sizes


def summarize_eigenvalues(evals: np.ndarray, tol: float = 1e-7) -> SpectrumSummary:
    """Cluster at ``tol * max(1, spectral radius)``."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    evals = np.sort(np.asarray(evals, dtype=float))
    radius = float(np.max(np.abs(evals), initial=0.0))
    threshold = tol * max(1.0, radius)
    means, sizes = cluster_sorted(evals, threshold)
    return SpectrumSummary(evals, means, sizes, threshold)


def eigen_spectrum(R: np.ndarray, tol: float = 1e-7) -> SpectrumSummary:
    """Eigenvalues of a symmetric matrix grouped into clusters.

    ``numpy.linalg.LinAlgError`` from the eigensolver propagates.
    """
    R = _check_finite(R)
    return summarize_eigenvalues(np.linalg.eigvalsh(R), tol)


def _check_finite(R):
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(R)):
        raise ValueError("matrix has non-finite entries")
    return R


RECURSION_CHECK_MAX_DIM = 64


def char_poly(R: np.ndarray, check: bool = True, rtol: float = 1e-6) -> MonicPolynomial:
    """Monic ``det(X I - R)`` of a symmetric matrix, from its eigenvalues.

    For ``dim <= 64`` the coefficients are recomputed by the three-term
    recursion on the Hessenberg (tridiagonal) form and compared; a mismatch
    beyond ``rtol`` times the natural coefficient scale raises
    ``ArithmeticError``.
    """
    R = _check_finite(R)
    evals = np.linalg.eigvalsh(R)
    P = MonicPolynomial.from_roots(evals)
    if check and R.shape[0] <= RECURSION_CHECK_MAX_DIM:
        other = hessenberg_char_poly(R)
        scale = np.abs(np.poly(-np.abs(evals))[::-1][:-1]) + 1.0
        err = np.abs(other - P.coeffs) / scale
        if np.max(err, initial=0.0) > rtol:
            raise ArithmeticError(f"characteristic polynomial cross-check failed (relative error {err.max():.2e})")
    return P


def hessenberg_char_poly(R: np.ndarray) -> np.ndarray:
    """``(a_0, ..., a_{d-1})`` of ``det(X I - R)`` via the Hessenberg determinant recursion."""
    H = hessenberg(np.asarray(R, dtype=float))
    d = H.shape[0]
    # polys[k]: char poly of the leading k x k block, constant term first
    polys = [np.array([1.0])]
    for k in range(1, d + 1):
        nxt = npoly.polymul([-H[k - 1, k - 1], 1.0], polys[k - 1])
        prod = 1.0
        for i in range(k - 1, 0, -1):
            prod *= H[i, i - 1]
            if prod == 0.0:
                break
            nxt = npoly.polysub(nxt, prod * H[i - 1, k - 1] * polys[i - 1])
        nxt = np.resize(nxt, k + 1) if len(nxt) < k + 1 else nxt
        polys.append(nxt)
    return np.asarray(polys[d][:d], dtype=float)


def _full_high_first(P):
    if isinstance(P, MonicPolynomial):
        return list(P.full[::-1])
    return list(P)


def sylvester_matrix(P, Q) -> list:
    """Sylvester matrix of two coefficient lists given highest degree first."""
    p = _strip(_full_high_first(P))
    q = _strip(_full_high_first(Q))
    m, n = len(p) - 1, len(q) - 1
    if m < 1 or n < 0:
        raise ValueError("resultant needs deg P >= 1 and a nonzero Q")
    size = m + n
    zero = 0 * p[0]
    rows = []
    for i in range(n):
        rows.append([zero] * i + p + [zero] * (size - m - 1 - i))
    for i in range(m):
        rows.append([zero] * i + q + [zero] * (size - n - 1 - i))
    return rows


def _strip(c):
    while len(c) > 1 and c[0] == 0:
        c = c[1:]
    return c


def resultant(P, Q, exact: bool = False):
    """Determinant of the Sylvester matrix of ``P`` and ``Q``.

    Inputs are :class:`MonicPolynomial` or coefficient lists, highest degree
    first.  With ``exact=True`` the coefficients are converted to
    ``Fraction`` and the determinant is computed without rounding.
    """
    if exact:
        P = [Fraction(c) for c in _full_high_first(P)]
        Q = [Fraction(c) for c in _full_high_first(Q)]
        return fraction_det(sylvester_matrix(P, Q))
    S = np.array(sylvester_matrix(P, Q), dtype=float)
    return float(np.linalg.det(S)) if S.size else 1.0


def fraction_det(rows) -> Fraction:
    """Exact determinant by fraction-valued Gaussian elimination."""
    A = [list(map(Fraction, r)) for r in rows]
    n = len(A)
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if A[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            A[col], A[pivot] = A[pivot], A[col]
            det = -det
        det *= A[col][col]
        for r in range(col + 1, n):
            f = A[r][col] / A[col][col]
            if f:
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return det


def discriminant(P, exact: bool = False):
    """``(-1)^{d(d-1)/2} Res(P, P')`` for monic ``P`` of degree ``d >= 2``."""
    high = _full_high_first(P)
    if exact:
        high = [Fraction(c) for c in high]
    d = len(high) - 1
    if d < 2:
        raise ValueError("discriminant needs degree >= 2")
    deriv = [c * (d - i) for i, c in enumerate(high[:-1])]
    return (-1) ** (d * (d - 1) // 2) * resultant(high, deriv, exact=exact)


def vieta(roots) -> MonicPolynomial:
    return MonicPolynomial.from_roots(roots)


def jacobian_factor(roots) -> float:
    """``|prod_{i<j} (x_i - x_j)|``, the Jacobian of the roots-to-coefficients map."""
    x = np.asarray(roots, dtype=float)
    i, j = np.triu_indices(len(x), 1)
    return float(np.abs(np.prod(x[i] - x[j])))


def _dyadic(values):
    """Integers ``N`` and exponent ``E`` with ``values == N / 2^E`` exactly."""
    ratios = [float(v).as_integer_ratio() for v in values]
    E = max(den.bit_length() - 1 for _, den in ratios)
    return [num << (E - den.bit_length() + 1) for num, den in ratios], E


def _int_convolve(p, q):
    out = [0] * (len(p) + len(q) - 1)
    for i, x in enumerate(p):
        if x:
            for j, y in enumerate(q):
                out[i + j] += x * y
    return out


def exact_vieta(roots) -> np.ndarray:
    """``(a_0, ..., a_d)`` of ``prod (X - r)``, each correctly rounded from exact arithmetic.

    Floating-point accumulation loses about eight digits at degree 128 when
    roots have mixed signs; the exact product costs little at these sizes.
    """
    roots = np.asarray(roots, dtype=float).ravel()
    d = len(roots)
    if d == 0:
        return np.ones(1)
    N, E = _dyadic(roots)
    c = np.array([1], dtype=object)
    for x in N:
        c = np.concatenate([[0], c]) - x * np.concatenate([c, [0]])
    return np.array([float(Fraction(int(c[k]), 1 << (E * (d - k)))) for k in range(d + 1)])


def power_residual(P: MonicPolynomial, Q: MonicPolynomial, a: int) -> np.ndarray:
    """Coefficients of ``P - Q^a`` computed exactly, then rounded."""
    Pn, EP = _dyadic(P.full)
    Qn, EQ = _dyadic(Q.full)
    Qa = [1]
    for _ in range(a):
        Qa = _int_convolve(Qa, Qn)
    E = max(EP, a * EQ)
    diff = [(x << (E - EP)) - (y << (E - a * EQ)) for x, y in zip(Pn, Qa)]
    return np.array([float(Fraction(v, 1 << E)) for v in diff])


def _series_root(P: MonicPolynomial, a: int) -> np.ndarray:
    d = P.degree
    m = d // a
    f = P.full[::-1]  # f_k = a_{d-k}
    ks = np.arange(1, d + 1)
    with np.errstate(divide="ignore"):
        bounds = np.abs(f[1:]) ** (1.0 / ks)
    s = max(1.0, float(bounds.max(initial=0.0)))
    fs = f[: m + 1] / s ** np.arange(m + 1)
    g = np.zeros(m + 1)
    g[0] = 1.0
    for k in range(1, m + 1):
        j = np.arange(1, k + 1)
        g[k] = np.sum((j / a - k + j) * fs[j] * g[k - j]) / k
    g *= s ** np.arange(m + 1)
    return g[::-1].copy()


def _polish(P, q, a, max_evals=80):
    """Levenberg-Marquardt on ``||Q^a - P||_2`` over the non-leading coefficients of ``Q``."""
    d, m = P.degree, len(q) - 1
    r = power_residual(P, MonicPolynomial(q[:-1]), a)
    cost = np.linalg.norm(r)
    target = 1e-15 * np.linalg.norm(P.full)
    mu, evals = 1e-3, 0
    while evals < max_evals and np.max(np.abs(r)) > target:
        base = a * npoly.polypow(q, a - 1)
        J = np.zeros((d + 1, m))
        for j in range(m):
            J[j:j + len(base), j] = base[: d + 1 - j]
        norms = np.linalg.norm(J, axis=0)
        norms[norms == 0] = 1.0
        A = J / norms
        while evals < max_evals:
            evals += 1
            lhs = np.vstack([A, np.sqrt(mu) * np.eye(m)])
            step = np.linalg.lstsq(lhs, np.concatenate([r, np.zeros(m)]), rcond=None)[0] / norms
            trial = q.copy()
            trial[:m] += step
            if not np.all(np.isfinite(trial)):
                mu *= 10
                continue
            r_new = power_residual(P, MonicPolynomial(trial[:-1]), a)
            cost_new = np.linalg.norm(r_new)
            if cost_new < cost:
                q, r, cost = trial, r_new, cost_new
                mu = max(mu / 10, 1e-12)
                break
            mu *= 10
            if mu > 1e8:
                return q, r
    return q, r


def poly_root_power(P: MonicPolynomial, a: int) -> tuple[MonicPolynomial, float]:
    """Monic ``Q`` of degree ``d/a`` with ``Q^a`` close to ``P``, and ``max |P - Q^a|``.

    ``P(X) = X^d f(1/X)`` with ``f(0) = 1``, so ``Q`` is the degree ``d/a``
    truncation of ``X^{d/a} f(1/X)^{1/a}``, obtained from the power
    recurrence for ``f^{1/a}`` on the top coefficients.  Matching only the
    top coefficients is badly conditioned once ``d`` reaches a few dozen, so
    the result is then polished by damped Gauss-Newton against all
    coefficients.  When ``P`` carries its roots, runs of ``a`` consecutive
    sorted roots give a second starting point.  The residual is always
    ``P - Q^a`` evaluated exactly on the returned coefficients, so it stays
    large whenever ``P`` is not an ``a``-th power.
    """
    if a < 1:
        raise ValueError("a must be >= 1")
    d = P.degree
    if d % a:
        raise ValueError(f"a={a} does not divide degree {d}")
    if a == 1:
        return MonicPolynomial(P.coeffs.copy(), P.roots), 0.0
    starts = [_series_root(P, a)]
    if P.roots is not None:
        starts.insert(0, exact_vieta(P.roots.reshape(-1, a).mean(axis=1)))
    scale = np.linalg.norm(P.full)
    best = None
    for q0 in starts:
        if not np.all(np.isfinite(q0)):
            continue
        q, r = _polish(P, q0, a)
        res = float(np.max(np.abs(r)))
        if best is None or res < best[1]:
            best = (q, res)
        if res <= 1e-14 * scale:
            break
    q, res = best
    return MonicPolynomial(q[:-1]), res


def gamma_coeff_entries(full) -> list:
    """``Gamma(a_k, a_p)`` for unit carré du champ on the roots, ``k, p < d``.

    ``full`` is ``(a_0, ..., a_d)``; the entries may be floats, fractions or
    symbolic expressions since only ring operations are used.  With
    ``alpha_{i,j} = (i+1) a_{i+1} a_j`` (``a_i = 0`` beyond ``d``):

        Gamma(a_k, a_p) = sum_{(p-k)_+ <= l <= p} alpha_{p-l, k+l+1}
                        - sum_{(k-p)_+ <= l <= k} alpha_{p+l+1, k-l}
    """
    d = len(full) - 1
    zero = full[0] * 0

    def coef(i):
        return full[i] if 0 <= i <= d else zero

    def alpha(i, j):
        return (i + 1) * coef(i + 1) * coef(j)

    G = [[zero] * d for _ in range(d)]
    for k in range(d):
        for p in range(d):
            plus = sum((alpha(p - l, k + l + 1) for l in range(max(p - k, 0), p + 1)), zero)
            minus = sum((alpha(p + l + 1, k - l) for l in range(max(k - p, 0), k + 1)), zero)
            G[k][p] = plus - minus
    return G


def gamma_coeff_matrix(P: MonicPolynomial) -> np.ndarray:
    """``d x d`` matrix ``Gamma(a_k, a_p)`` when the roots carry unit carré du champ.

    The Clifford case multiplies this by ``2^p``.
    """
    if P.degree < 1:
        raise ValueError("degree must be >= 1")
    return np.array(gamma_coeff_entries(list(P.full)), dtype=float)


def root_jacobian(roots) -> np.ndarray:
    """``J[k, i] = d a_k / d x_i``: minus the coefficients of ``prod_{j != i}(X - x_j)``."""
    x = np.asarray(roots, dtype=float)
    d = len(x)
    J = np.zeros((d, d))
    for i in range(d):
        J[:, i] = -np.poly(np.delete(x, i))[::-1]
    return J


def is_real_rooted(full, rtol: float = 1e-9) -> bool:
    """Whether the monic polynomial with coefficients ``(a_0, ..., a_d)`` has only real roots.

    Degree 2 uses the exact sign of the discriminant.  Higher degrees read
    the imaginary parts of the companion-matrix eigenvalues.
    """
    full = np.asarray(full, dtype=float)
    d = len(full) - 1
    if d <= 1:
        return True
    if d == 2:
        a0, a1 = full[0] / full[2], full[1] / full[2]
        return a1 * a1 - 4 * a0 >= 0
    roots = np.linalg.eigvals(npoly.polycompanion(full))
    scale = max(1.0, float(np.max(np.abs(roots))))
    return bool(np.all(np.abs(roots.imag) <= rtol * scale))


def real_rooted_batch(coeffs: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Vectorized :func:`is_real_rooted` for rows ``(a_0, ..., a_{d-1})`` of monic polynomials."""
    coeffs = np.asarray(coeffs, dtype=float)
    d = coeffs.shape[-1]
    if d <= 1:
        return np.ones(coeffs.shape[0], dtype=bool)
    if d == 2:
        return coeffs[:, 1] ** 2 - 4 * coeffs[:, 0] >= 0
    comp = np.zeros((coeffs.shape[0], d, d))
    comp[:, np.arange(1, d), np.arange(d - 1)] = 1.0
    comp[:, :, -1] = -coeffs
    roots = np.linalg.eigvals(comp)
    scale = np.maximum(1.0, np.abs(roots).max(axis=1))
    return np.all(np.abs(roots.imag) <= rtol * scale[:, None], axis=1)


def multiplicity_clusters_ok(evals: np.ndarray, a: int, tol: float = 1e-7) -> bool:
    """Whether every cluster of the sorted eigenvalues has exactly ``a`` members."""
    s = summarize_eigenvalues(evals, tol)
    return bool(np.all(s.multiplicities == a))


