"""Generator identities for characteristic polynomials of Cl-symmetric matrices.

For the Euclidean diffusion on Cl-symmetric matrices the characteristic
polynomial ``P`` satisfies

    Gamma(P(X), P(Y)) = gamma (P'(X) P(Y) - P'(Y) P(X)) / (Y - X)
    L(P)              = alpha P'' + beta P'^2 / P

This module assembles both sides numerically from derivatives with respect
to the independent matrix coordinates and compares them with the closed
forms, fits ``(alpha, beta, gamma)`` from data, and solves the resulting
multiplicity equation ``a^2 (alpha + beta) - a (alpha + gamma) + gamma = 0``.

Numeric assembly works with ``log P``: writing ``U = (phi(M) - X)^{-1}`` and
``E_u = d phi(M) / du``,

    d_u log P(X)       = tr(U E_u)
    d_u d_u log P(X)   = -tr(U E_u U E_u)

and the metric is diagonal in the coordinates, with weights ``g_u``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .clifford import SignatureKind, self_sign_sum_closed
from .matrices import CliffordMatrix, coordinate_layout, ideal_bases, realize
from .polynomials import MonicPolynomial


class CaseLabel(enum.Enum):
    REAL_SYM = "real"
    HERMITIAN = "hermitian"
    QUATERNION = "quaternion"
    CLIFFORD = "clifford"


class Drift(enum.Enum):
    NONE = "none"
    OU = "ou"
    SPHERE = "sphere"
    BALL = "ball"


def clifford_constant(p: int) -> Fraction:
    """``C_p = 2^p - S_p / 2`` with ``S_p`` the self-sign sum; ``alpha = -C_p``, ``beta = C_p - 1/2``."""
    return Fraction(2 ** p) - Fraction(self_sign_sum_closed(p), 2)


def sign_correction(p: int) -> Fraction:
    """``s_p`` in ``C_p = 2^p + s_p``."""
    return clifford_constant(p) - 2 ** p


@dataclass(frozen=True)
class GeneratorCase:
    """Constants of ``L(P) = alpha P'' + beta P'^2/P`` and ``Gamma``'s factor ``gamma``.

    For ``p ≡ 3 (mod 4)`` the constants refer to each ideal factor ``P_±``
    of the characteristic polynomial (``split=True``).
    """

    label: CaseLabel
    p: int
    alpha: Fraction
    beta: Fraction
    gamma: Fraction
    split: bool = False
    drift: Drift = Drift.NONE
    sphere_dim: float | None = None
    ball_param: float | None = None

    @property
    def constants(self) -> tuple[float, float, float]:
        return float(self.alpha), float(self.beta), float(self.gamma)

    @property
    def euler_scale(self) -> int:
        """Factor ``s`` in the Euler operator ``D(P) = s (d P - X P')``."""
        return 2 ** self.p

    def with_drift(self, drift, sphere_dim=None, ball_param=None) -> "GeneratorCase":
        return GeneratorCase(self.label, self.p, self.alpha, self.beta, self.gamma, self.split,
                             Drift(drift), sphere_dim, ball_param)


_LABEL_BY_P = {0: CaseLabel.REAL_SYM, 1: CaseLabel.HERMITIAN, 2: CaseLabel.QUATERNION}


def generator_case(p: int | str) -> GeneratorCase:
    """Constants for the standard algebra on ``p`` generators, or a named case."""
    if isinstance(p, str):
        names = {"real": 0, "hermitian": 1, "quaternion": 2}
        p = names[p] if p in names else int(p)
    if p < 0:
        raise ValueError("p must be non-negative")
    label = _LABEL_BY_P.get(p, CaseLabel.CLIFFORD)
    if p % 4 == 3:
        C = clifford_constant(p - 1)
        return GeneratorCase(label, p, -2 * C, 2 * C - 1, Fraction(2 ** p), split=True)
    C = clifford_constant(p)
    return GeneratorCase(label, p, -C, C - Fraction(1, 2), Fraction(2 ** p))


@dataclass(frozen=True)
class ReducedConstants:
    """Identities for ``Q`` with ``P = Q^a``: ``Gamma`` factor ``gamma/a`` and ``L(Q) = l_hat Q''``."""

    a: int
    gamma_hat: float
    l_hat: float

    @property
    def normalized(self) -> float:
        """``l_hat`` after rescaling time so the ``Gamma`` factor is 1: ``-1/2``, ``-1`` or ``-2``."""
        return self.l_hat / self.gamma_hat

    @property
    def repulsion(self) -> float:
        return -2.0 * self.normalized


def reduced_constants(case: GeneratorCase, a: int) -> ReducedConstants:
    al, ga = float(case.alpha), float(case.gamma)
    return ReducedConstants(a, ga / a, al + ga - ga / a)


# ----------------------------------------------------------------------------
# closed forms


def gamma_P_closed(case: GeneratorCase, P: MonicPolynomial, X, Y):
    """``gamma (P'(X) P(Y) - P'(Y) P(X)) / (Y - X)``, with the limit ``gamma (P'^2 - P P'')`` at ``X = Y``."""
    X, Y = np.broadcast_arrays(np.asarray(X, float), np.asarray(Y, float))
    g = float(case.gamma)
    px, py = P(X), P(Y)
    dx, dy = P.derivative_values(X, 1), P.derivative_values(Y, 1)
    same = X == Y
    with np.errstate(divide="ignore", invalid="ignore"):
        off = g * (dx * py - dy * px) / (Y - X)
    diag = g * (dx * dx - px * P.derivative_values(X, 2))
    out = np.where(same, diag, off)
    return float(out) if out.ndim == 0 else out


def gamma_logP_closed(case: GeneratorCase, P: MonicPolynomial, X, Y):
    """``Gamma(log P(X), log P(Y)) = gamma sum_i 1 / ((X - x_i)(Y - x_i))``."""
    roots = _roots_of(P)
    X, Y = np.broadcast_arrays(np.asarray(X, float), np.asarray(Y, float))
    _reject_roots(roots, X)
    _reject_roots(roots, Y)
    val = float(case.gamma) * np.sum(1.0 / ((X[..., None] - roots) * (Y[..., None] - roots)), axis=-1)
    return float(val) if val.ndim == 0 else val


def L_over_P_closed(case: GeneratorCase, P: MonicPolynomial, X):
    """``L(P)/P`` including the case's drift, as a function of ``sum 1/(X - x_i)`` and ``sum 1/(X - x_i)^2``."""
    roots = _roots_of(P)
    X = np.asarray(X, float)
    _reject_roots(roots, X)
    inv = 1.0 / (X[..., None] - roots)
    s1, s2 = inv.sum(-1), (inv * inv).sum(-1)
    al, be = float(case.alpha), float(case.beta)
    val = (al + be) * s1 * s1 - al * s2
    val = val + _drift_over_P(case, len(roots), X, s1, s2)
    return float(val) if np.ndim(val) == 0 else val


def _drift_over_P(case, d, X, s1, s2):
    """Drift part divided by ``P``, with ``P'/P = s1`` and ``P''/P = s1^2 - s2``."""
    s = case.euler_scale
    euler = s * (d - X * s1)
    if case.drift is Drift.NONE:
        return 0.0
    if case.drift is Drift.OU:
        return -euler
    if case.drift is Drift.SPHERE:
        N = sphere_dimension(case, d)
        euler2 = s * s * (d * d - (2 * d - 1) * X * s1 + X * X * (s1 * s1 - s2))
        return -euler2 - (N - 2) * euler
    raise ValueError(f"drift {case.drift} has no closed form for Cl-symmetric matrices")


def sphere_dimension(case: GeneratorCase, d: int) -> float:
    """``N = d (d + 1) / 2`` for ``d = n 2^p``, unless overridden on the case."""
    if case.sphere_dim is not None:
        return float(case.sphere_dim)
    return d * (d + 1) / 2


def _roots_of(P):
    if P.roots is None:
        raise ValueError("closed forms in log form need the roots of P")
    return P.roots


def _reject_roots(roots, X):
    if np.any(np.isclose(X[..., None], roots, rtol=0, atol=1e-300)):
        raise ValueError("evaluation point is a root of P")


# ----------------------------------------------------------------------------
# drift operators as polynomial expressions


class DriftKind(enum.Enum):
    EULER = "euler"
    EULER2 = "euler2"
    OU = "ou"
    SPHERE = "sphere"
    DIAG_OU = "diag_ou"
    DIAG_SPHERE = "diag_sphere"
    BALL = "ball"


@dataclass(frozen=True)
class DriftExpression:
    """``poly + ratio * P'^2 / P`` where ``poly`` has coefficients constant-first.

    ``ratio`` is zero for the purely polynomial operators.  The full
    expression is a polynomial only when ``P`` has the multiplicity
    structure the identity assumes.
    """

    poly: np.ndarray
    ratio: float
    P: MonicPolynomial

    def __call__(self, X):
        X = np.asarray(X, float)
        val = np.polynomial.polynomial.polyval(X, self.poly)
        if self.ratio:
            val = val + self.ratio * self.P.derivative_values(X, 1) ** 2 / self.P(X)
        return val

    def as_polynomial(self) -> np.ndarray:
        if self.ratio:
            raise ValueError("expression contains P'^2/P and is not a polynomial in general")
        return self.poly


def _terms(P, c0, c1, c2):
    """Coefficients of ``c0 P + c1 X P' + c2 X^2 P''`` (constant first)."""
    full = P.full
    k = np.arange(len(full), dtype=float)
    return full * (c0 + c1 * k + c2 * k * (k - 1))


def drift_operator(kind, case: GeneratorCase, P: MonicPolynomial, *, n: int | None = None,
                   sphere_dim: float | None = None, ball_param: float | None = None) -> DriftExpression:
    """Closed-form operators applied to ``P``.

    ``euler``        ``s (d P - X P')`` with ``s = 2^p`` and ``d = deg P``
    ``euler2``       ``s^2 (d - X d/dX)^2 P``
    ``ou``           ``alpha P'' + beta P'^2/P - euler``
    ``sphere``       ``alpha P'' + beta P'^2/P - euler2 - (N - 2) euler``
    ``diag_ou``      ``-n P + X P'`` (independent coordinates, ``n = deg P``)
    ``diag_sphere``  ``-2n(n-1) P + 3(n-1) X P' - X^2 P''``
    ``ball``         ``-n(q + n - 1) P + (q + 2(n - 1)) X P' - X^2 P''`` for ball parameter ``q``
    """
    kind = DriftKind(kind)
    d = P.degree
    s = case.euler_scale
    al, be = float(case.alpha), float(case.beta)
    second = np.zeros(d + 1)
    if d >= 2:
        second[: d - 1] = np.polynomial.polynomial.polyder(P.full, 2)
    if kind is DriftKind.EULER:
        return DriftExpression(s * _terms(P, d, -1, 0), 0.0, P)
    if kind is DriftKind.EULER2:
        return DriftExpression(s * s * _terms(P, d * d, -(2 * d - 1), 1), 0.0, P)
    if kind is DriftKind.OU:
        return DriftExpression(al * second - s * _terms(P, d, -1, 0), be, P)
    if kind is DriftKind.SPHERE:
        if sphere_dim is None:
            sphere_dim = sphere_dimension(case, d)
        poly = al * second - s * s * _terms(P, d * d, -(2 * d - 1), 1) - (sphere_dim - 2) * s * _terms(P, d, -1, 0)
        return DriftExpression(poly, be, P)
    m = d if n is None else n
    if kind is DriftKind.DIAG_OU:
        return DriftExpression(_terms(P, -m, 1, 0), 0.0, P)
    if kind is DriftKind.DIAG_SPHERE:
        return DriftExpression(_terms(P, -2 * m * (m - 1), 3 * (m - 1), -1), 0.0, P)
    if ball_param is None:
        raise ValueError("ball operator needs ball_param")
    q = ball_param
    return DriftExpression(_terms(P, -m * (q + m - 1), q + 2 * (m - 1), -1), 0.0, P)


def diagonal_generator_numeric(kind, x, X, ball_param: float | None = None) -> float:
    """Apply a generator on ``R^n`` (coordinates are the roots) to ``P(X) = prod (X - x_i)``.

    ``kind``: ``"diag_ou"`` (``Gamma = delta``, ``L x_i = -x_i``),
    ``"diag_sphere"`` (``Gamma = delta - x x^t``, ``L x_i = -(n-1) x_i``; needs ``|x| = 1``),
    ``"ball"`` (``Gamma = delta - x x^t``, ``L x_i = -q x_i``).
    """
    x = np.asarray(x, float)
    n = len(x)
    R = 1.0 / (X - x)
    P = np.prod(X - x)
    grad = -P * R
    hess = P * np.outer(R, R)
    np.fill_diagonal(hess, 0.0)
    if kind == "diag_ou":
        G, drift = np.eye(n), -x
    elif kind == "diag_sphere":
        G, drift = np.eye(n) - np.outer(x, x), -(n - 1) * x
    elif kind == "ball":
        G, drift = np.eye(n) - np.outer(x, x), -ball_param * x
    else:
        raise ValueError(f"unknown kind {kind}")
    return float(np.sum(G * hess) + drift @ grad)


# ----------------------------------------------------------------------------
# numeric assembly


class ResolventAssembler:
    """Derivatives of ``log P`` with respect to the independent coordinates of ``M``.

    ``factor`` selects ``"+"`` or ``"-"`` to work with the restriction of
    ``phi(M)`` to one ideal (``p ≡ 3 mod 4``); its characteristic polynomial
    is then the ideal factor ``P_±``.
    """

    def __init__(self, M: CliffordMatrix, factor: str | None = None):
        self.M = M
        self.layout = coordinate_layout(M.sig, M.n)
        R = realize(M)
        self.basis = None
        if factor is not None:
            if factor not in "+-" or len(factor) != 1:
                raise ValueError("factor must be '+' or '-'")
            plus, minus = ideal_bases(M.sig, M.n)
            self.basis = plus if factor == "+" else minus
            self.small = self.basis.T @ R @ self.basis
        else:
            self.small = R
        self.R = R
        self.eigenvalues = np.linalg.eigvalsh(self.small)
        self.P = MonicPolynomial.from_roots(self.eigenvalues)
        self._cache = {}

    @property
    def dim(self) -> int:
        return self.small.shape[0]

    def resolvent(self, X: float) -> np.ndarray:
        """``(phi(M) - X)^{-1}``, lifted back to full size when restricted to an ideal."""
        X = float(X)
        if X in self._cache:
            return self._cache[X]
        A = self.small - X * np.eye(self.dim)
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > 1e13:
            raise np.linalg.LinAlgError(f"phi(M) - X is singular at X={X}")
        U = np.linalg.inv(A)
        U = 0.5 * (U + U.T)
        if self.basis is not None:
            U = self.basis @ U @ self.basis.T
        self._cache[X] = U
        return U

    def first(self, X: float) -> np.ndarray:
        """``tr(U E_u)`` for every coordinate ``u``."""
        lay = self.layout
        U = self.resolvent(X)
        return np.sum(lay.vals * U[lay.cols, lay.rows], axis=1)

    def second_diag(self, X: float) -> np.ndarray:
        """``tr(U E_u U E_u)`` for every coordinate ``u``."""
        lay = self.layout
        U = self.resolvent(X)
        G = U[lay.cols[:, :, None], lay.rows[:, None, :]]
        vv = lay.vals[:, :, None] * lay.vals[:, None, :]
        return np.einsum("kef,kef,kfe->k", vv, G, G)

    def gamma_log(self, X: float, Y: float) -> float:
        """``Gamma(log P(X), log P(Y)) = sum_u g_u tr(U_X E_u) tr(U_Y E_u)``."""
        return float(np.sum(self.layout.metric * self.first(X) * self.first(Y)))

    def L_log(self, X: float) -> float:
        """``L(log P(X)) = -sum_u g_u tr(U E_u U E_u)`` (coordinates are harmonic)."""
        return float(-np.sum(self.layout.metric * self.second_diag(X)))

    def euler_log(self, X: float) -> tuple[float, float]:
        """``(E log P, E^2 log P)`` for the unscaled Euler field ``E = sum_u u d_u``."""
        U = self.resolvent(X)
        UR = U @ self.R
        t1 = float(np.trace(UR))
        t2 = float(np.sum(UR * UR.T))
        return t1, t1 - t2

    def L_over_P(self, X: float, case: GeneratorCase | None = None) -> float:
        """``L(P)/P`` assembled numerically, plus the drift of ``case`` if any."""
        g = self.gamma_log(X, X)
        val = self.L_log(X) + g
        if case is None or case.drift is Drift.NONE:
            return val
        s = case.euler_scale
        e1, e2 = self.euler_log(X)
        euler = s * e1
        if case.drift is Drift.OU:
            return val - euler
        if case.drift is Drift.SPHERE:
            euler2 = s * s * (e2 + e1 * e1)
            N = sphere_dimension(case, self.dim)
            return val - euler2 - (N - 2) * euler
        raise ValueError(f"drift {case.drift} is not assembled for matrices")

    # finite-difference cross-checks -----------------------------------------

    def _logdet_shifted(self, X, u, h):
        E = self.layout.derivative_matrix(u)
        A = self.R + h * E
        if self.basis is not None:
            A = self.basis.T @ A @ self.basis
        sign, val = np.linalg.slogdet(A - X * np.eye(A.shape[0]))
        return val

    def fd_first(self, X: float, h: float | None = None) -> np.ndarray:
        """Central differences of ``log |P(X)|`` in each coordinate, ``h = 1e-5 (1 + ||M||)``."""
        h = 1e-5 * (1 + np.linalg.norm(self.M.blocks)) if h is None else h
        K = self.layout.count
        return np.array([(self._logdet_shifted(X, u, h) - self._logdet_shifted(X, u, -h)) / (2 * h)
                         for u in range(K)])

    def fd_second_diag(self, X: float, h: float | None = None) -> np.ndarray:
        # a larger step than for first derivatives keeps rounding below truncation error
        h = 1e-3 * (1 + np.linalg.norm(self.M.blocks)) if h is None else h
        base = self._logdet_shifted(X, 0, 0.0)
        K = self.layout.count
        return np.array([-(self._logdet_shifted(X, u, h) - 2 * base + self._logdet_shifted(X, u, -h)) / (h * h)
                         for u in range(K)])


def gamma_P_numeric(M: CliffordMatrix, X: float, Y: float, *, factor: str | None = None) -> float:
    """``Gamma(P(X), P(Y))`` assembled from the coordinate metric."""
    asm = ResolventAssembler(M, factor)
    return float(asm.P(X) * asm.P(Y) * asm.gamma_log(X, Y))


def L_P_numeric(M: CliffordMatrix, X: float, *, case: GeneratorCase | None = None,
                factor: str | None = None) -> float:
    """``L(P)(X)`` assembled from second derivatives, with the drift of ``case`` if given."""
    asm = ResolventAssembler(M, factor)
    return float(asm.P(X) * asm.L_over_P(X, case))


# ----------------------------------------------------------------------------
# evaluation grids and reports


def evaluation_grid(eigenvalues, count: int = 5, rng: np.random.Generator | None = None,
                    guard_fraction: float = 0.5, max_tries: int = 1000) -> np.ndarray:
    """Points away from the spectrum by ``guard_fraction`` times the mean gap of distinct values.

    Candidates are midpoints of the gaps wide enough to host a point and
    two points outside the spectrum.  If fewer than ``max(3, count)``
    qualify, the rest are drawn uniformly around the spectrum.
    """
    lam = np.unique(np.round(np.sort(np.asarray(eigenvalues, float)), 9))
    spread = lam[-1] - lam[0] if len(lam) > 1 else 1.0
    spread = spread if spread > 0 else 1.0
    gap = spread / (len(lam) - 1) if len(lam) > 1 else 1.0
    guard = guard_fraction * gap
    cands = [lam[0] - 0.3 * spread - guard, lam[-1] + 0.3 * spread + guard]
    if len(lam) > 1:
        mids = 0.5 * (lam[1:] + lam[:-1])
        cands.extend(mids[np.diff(lam) > 2 * guard])
    cands = np.array(sorted(cands))
    if len(cands) >= count:
        idx = np.round(np.linspace(0, len(cands) - 1, count)).astype(int)
        return cands[idx]
    rng = rng if rng is not None else np.random.default_rng(0)
    pts = list(cands)
    for _ in range(max_tries):
        if len(pts) >= count:
            break
        x = rng.uniform(lam[0] - spread - 2 * guard, lam[-1] + spread + 2 * guard)
        if np.min(np.abs(x - lam)) > guard:
            pts.append(x)
    if len(pts) < count:
        raise RuntimeError("could not place evaluation points outside the guard band")
    return np.array(sorted(pts))


@dataclass
class IdentityReport:
    name: str
    points: list
    closed: list
    numeric: list
    max_rel_residual: float
    tolerance: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "identity": self.name,
            "points": [list(map(float, np.atleast_1d(p))) for p in self.points],
            "closed": [float(v) for v in self.closed],
            "numeric": [float(v) for v in self.numeric],
            "max_rel_residual": float(self.max_rel_residual),
            "tolerance": self.tolerance,
            "pass": bool(self.passed),
            **self.extra,
        }


def check_identities(M: CliffordMatrix, case: GeneratorCase | None = None, *, grid_size: int = 5,
                     tol: float = 1e-6, factor: str | None = None,
                     rng: np.random.Generator | None = None) -> list[IdentityReport]:
    """Compare numeric and closed ``Gamma(log P)`` on a grid and ``L(P)/P`` on its points.

    Residuals are relative to the natural size of each side:
    ``gamma sum |1/((X - x_i)(Y - x_i))|`` for ``Gamma`` and
    ``|alpha + beta| (sum |R_i|)^2 + (|alpha| + gamma) sum R_i^2`` with
    ``R_i = 1/(X - x_i)`` for ``L``.  These bound the rounding error of the
    numeric sums, unlike the closed value itself, which may cancel.
    """
    if case is None:
        case = generator_case(M.sig.p)
    if M.sig.kind is not SignatureKind.STANDARD:
        raise ValueError("closed forms are asserted for standard signatures only")
    if case.split and factor is None:
        return (check_identities(M, case, grid_size=grid_size, tol=tol, factor="+", rng=rng)
                + check_identities(M, case, grid_size=grid_size, tol=tol, factor="-", rng=rng))
    asm = ResolventAssembler(M, factor)
    roots = asm.eigenvalues
    xs = evaluation_grid(roots, grid_size, rng)
    P = asm.P
    g = float(case.gamma)
    al, be = float(case.alpha), float(case.beta)
    suffix = "" if factor is None else f"[{factor}]"

    firsts = {x: asm.first(x) for x in xs}
    pts, closed, numeric, rel = [], [], [], []
    for X in xs:
        for Y in xs:
            num = float(np.sum(asm.layout.metric * firsts[X] * firsts[Y]))
            cl = gamma_logP_closed(case, P, X, Y)
            scale = g * np.sum(np.abs(1.0 / ((X - roots) * (Y - roots))))
            pts.append((X, Y)), closed.append(cl), numeric.append(num)
            rel.append(abs(num - cl) / scale)
    worst = max(rel)
    reports = [IdentityReport(f"gamma_log{suffix}", pts, closed, numeric, worst, tol, worst <= tol,
                              {"p": M.sig.p, "n": M.n, "gamma": g})]

    pts, closed, numeric, rel = [], [], [], []
    for X in xs:
        num = asm.L_over_P(X, case)
        cl = L_over_P_closed(case, P, X)
        R = 1.0 / (X - roots)
        scale = abs(al + be) * np.sum(np.abs(R)) ** 2 + (abs(al) + g) * np.sum(R * R)
        if case.drift is not Drift.NONE:
            s = case.euler_scale
            d = len(roots)
            sx = s * (d + abs(X) * np.sum(np.abs(R)))
            scale += sx * sx + sphere_dimension(case, d) * sx
        pts.append(X), closed.append(cl), numeric.append(num)
        rel.append(abs(num - cl) / scale)
    worst = max(rel)
    name = "L_over_P" if case.drift is Drift.NONE else f"L_over_P_{case.drift.value}"
    reports.append(IdentityReport(f"{name}{suffix}", pts, closed, numeric, worst, tol, worst <= tol,
                                  {"p": M.sig.p, "n": M.n, "alpha": al, "beta": be}))
    return reports


def check_reduced_identities(M: CliffordMatrix, a: int, case: GeneratorCase | None = None, *,
                             grid_size: int = 5, tol: float = 1e-5, factor: str | None = None,
                             rng=None) -> IdentityReport:
    """``L(Q)/Q = l_hat Q''/Q`` for ``Q`` with ``P = Q^a``, assembled from the derivatives of ``log P``."""
    if case is None:
        case = generator_case(M.sig.p)
    asm = ResolventAssembler(M, factor)
    red = reduced_constants(case, a)
    distinct = asm.eigenvalues.reshape(-1, a).mean(axis=1)
    xs = evaluation_grid(distinct, grid_size, rng)
    closed, numeric, rel = [], [], []
    for X in xs:
        num = asm.L_log(X) / a + asm.gamma_log(X, X) / (a * a)
        R = 1.0 / (X - distinct)
        s1, s2 = R.sum(), (R * R).sum()
        cl = red.l_hat * (s1 * s1 - s2)
        scale = abs(red.l_hat) * (np.sum(np.abs(R)) ** 2 + s2) + abs(float(case.alpha)) * s2
        closed.append(cl), numeric.append(num), rel.append(abs(num - cl) / scale)
    worst = max(rel)
    return IdentityReport("reduced_L", list(xs), closed, numeric, worst, tol, worst <= tol,
                          {"a": a, "l_hat": red.l_hat, "gamma_hat": red.gamma_hat, "normalized": red.normalized})


# ----------------------------------------------------------------------------
# fitting and the multiplicity equation


@dataclass
class FitResult:
    alpha: float
    beta: float
    gamma: float
    residual: float
    condition: float
    well_conditioned: bool

    @property
    def triple(self) -> tuple[float, float, float]:
        return self.alpha, self.beta, self.gamma


@dataclass(frozen=True)
class IdentitySample:
    """One evaluation: roots of ``P``, the points, and numeric ``L(P)/P(X)`` and ``Gamma(log P(X), log P(Y))``."""

    roots: np.ndarray
    X: float
    Y: float
    L_over_P: float
    gamma_log: float


def collect_samples(M: CliffordMatrix, grid_size: int = 5, factor: str | None = None, rng=None) -> list:
    asm = ResolventAssembler(M, factor)
    xs = evaluation_grid(asm.eigenvalues, grid_size, rng)
    out = []
    for i, X in enumerate(xs):
        Y = xs[(i + 1) % len(xs)]
        out.append(IdentitySample(asm.eigenvalues, X, Y, asm.L_over_P(X), asm.gamma_log(X, Y)))
    return out


def fit_alpha_beta_gamma(samples: list[IdentitySample], cond_limit: float = 1e8) -> FitResult:
    """Least squares for ``L(P)/P = alpha P''/P + beta (P'/P)^2`` and ``Gamma = gamma * template``.

    Each row is divided by its natural scale so that points near the
    spectrum do not dominate.
    """
    rows, rhs, grow, grhs = [], [], [], []
    for s in samples:
        R = 1.0 / (s.X - s.roots)
        s1, s2 = R.sum(), (R * R).sum()
        w = 1.0 / (s1 * s1 + s2)
        rows.append([(s1 * s1 - s2) * w, s1 * s1 * w])
        rhs.append(s.L_over_P * w)
        Ry = 1.0 / (s.Y - s.roots)
        t = np.sum(R * Ry)
        wt = 1.0 / np.sum(np.abs(R * Ry))
        grow.append(t * wt)
        grhs.append(s.gamma_log * wt)
    if len(rows) < 3:
        raise ValueError("need at least three evaluation points")
    A, b = np.array(rows), np.array(rhs)
    cond = float(np.linalg.cond(A))
    (alpha, beta), *_ = np.linalg.lstsq(A, b, rcond=None)
    grow, grhs = np.array(grow), np.array(grhs)
    gamma = float(grow @ grhs / (grow @ grow))
    res = max(float(np.max(np.abs(A @ [alpha, beta] - b))), float(np.max(np.abs(grow * gamma - grhs))))
    return FitResult(float(alpha), float(beta), gamma, res, cond, cond < cond_limit)


def snap_rational(x: float, denominator: int = 2, tol: float = 1e-5) -> Fraction | None:
    """The nearest multiple of ``1/denominator`` if within ``tol``, else ``None``."""
    f = Fraction(round(x * denominator), denominator)
    return f if abs(float(f) - x) <= tol else None


@dataclass(frozen=True)
class MultiplicitySolution:
    roots: tuple
    integer_roots: tuple
    real: bool

    @property
    def positive_integer(self) -> int | None:
        pos = [r for r in self.integer_roots if r > 0]
        return max(pos) if pos else None


def solve_multiplicity(alpha, beta, gamma, int_tol: float = 1e-6) -> MultiplicitySolution:
    """Roots of ``a^2 (alpha + beta) - a (alpha + gamma) + gamma = 0``.

    With ``int``/``Fraction`` inputs the roots are exact and integers are
    detected exactly; with floats a root is integral when within
    ``int_tol`` of an integer.  A negative discriminant yields
    ``real=False`` and complex roots.
    """
    exact = all(isinstance(v, (int, Fraction)) for v in (alpha, beta, gamma))
    A = alpha + beta
    B = -(alpha + gamma)
    C = gamma
    if exact:
        A, B, C = Fraction(A), Fraction(B), Fraction(C)
        if A == 0:
            if B == 0:
                raise ValueError("degenerate multiplicity equation")
            r = -C / B
            roots = (r,)
        else:
            disc = B * B - 4 * A * C
            if disc < 0:
                re, im = -B / (2 * A), math.sqrt(-disc) / (2 * abs(float(A)))
                return MultiplicitySolution((complex(re, im), complex(re, -im)), (), False)
            sq = _fraction_sqrt(disc)
            if sq is None:
                sqf = math.sqrt(disc)
                roots = tuple(sorted(((-B - sqf) / (2 * A), (-B + sqf) / (2 * A)), key=float))
            else:
                roots = tuple(sorted({(-B - sq) / (2 * A), (-B + sq) / (2 * A)}))
        ints = tuple(int(r) for r in roots if isinstance(r, Fraction) and r.denominator == 1)
        return MultiplicitySolution(roots, ints, True)
    A, B, C = float(A), float(B), float(C)
    if abs(A) < 1e-14 * max(abs(B), abs(C), 1.0):
        if B == 0:
            raise ValueError("degenerate multiplicity equation")
        roots = (-C / B,)
    else:
        disc = B * B - 4 * A * C
        scale = max(B * B, abs(4 * A * C), 1.0)
        if disc < -int_tol * scale:
            z = np.roots([A, B, C])
            return MultiplicitySolution(tuple(complex(v) for v in z), (), False)
        disc = max(disc, 0.0)
        sq = math.sqrt(disc)
        roots = tuple(sorted({(-B - sq) / (2 * A), (-B + sq) / (2 * A)}))
    ints = tuple(int(round(r)) for r in roots if abs(r - round(r)) <= int_tol * max(1.0, abs(r)))
    return MultiplicitySolution(roots, tuple(sorted(set(ints))), True)


def _fraction_sqrt(q: Fraction) -> Fraction | None:
    n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None
