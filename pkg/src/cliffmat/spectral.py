"""Spectral laws of distinct eigenvalues, an MCMC oracle, two-sample tests and the Bott table.

With the Gaussian sampler at unit variance scale, the distinct eigenvalues
``lambda`` of ``phi(M)`` (each repeated ``alpha`` times) carry the weight
``exp(-alpha sum lambda^2 / 2^{p+1})``.  After rescaling by
``sqrt(alpha / 2^p)`` they follow

    prod_{i<j} |lambda_i - lambda_j|^a  exp(-sum lambda_i^2 / 2)

with ``a`` the repulsion exponent.  :func:`normalized_distinct` performs
this rescaling.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import ks_2samp

from .clifford import predicted_multiplicity
from .identities import collect_samples, fit_alpha_beta_gamma, snap_rational, solve_multiplicity
from .matrices import EnsembleConfig, coordinate_layout, ideal_bases, realize_blocks, replica_rng, sample_blocks
from .polynomials import summarize_eigenvalues


class Weight(enum.Enum):
    GAUSSIAN = "gaussian"
    SPHERE = "sphere"


@dataclass(frozen=True)
class SpectralLaw:
    n_distinct: int
    a: int
    weight: Weight = Weight.GAUSSIAN

    def __post_init__(self):
        if self.a not in (1, 2, 4):
            raise ValueError("repulsion exponent must be 1, 2 or 4")
        if self.n_distinct < 1:
            raise ValueError("n_distinct must be >= 1")


def target_log_density(law: SpectralLaw, lambdas) -> float | np.ndarray:
    """Unnormalized ``a sum_{i<j} log(lambda_j - lambda_i) - sum lambda_i^2 / 2``.

    Accepts one vector or a batch of rows.  Rows that are not strictly
    increasing get ``-inf``.  With ``Weight.SPHERE`` the Gaussian factor is
    dropped and points off the unit sphere get ``-inf``.
    """
    lam = np.atleast_2d(np.asarray(lambdas, float))
    i, j = np.triu_indices(lam.shape[1], 1)
    gaps = lam[:, j] - lam[:, i]
    inside = np.all(gaps > 0, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(inside, law.a * np.sum(np.log(np.where(inside[:, None], gaps, 1.0)), axis=1), -np.inf)
    sq = np.sum(lam * lam, axis=1)
    if law.weight is Weight.GAUSSIAN:
        out = logs - 0.5 * sq
    else:
        out = np.where(np.abs(sq - 1.0) < 1e-9, logs, -np.inf)
    return float(out[0]) if np.ndim(lambdas) == 1 else out


@dataclass
class MCMCResult:
    samples: np.ndarray
    ess: float
    acceptance: float
    step: float
    warnings: list = field(default_factory=list)


def mcmc_oracle(law: SpectralLaw, count: int, seed: int = 0, *, chains: int = 200, burn_in: int = 2000,
                thin: int | None = None) -> MCMCResult:
    """Random-walk Metropolis on the ordered eigenvalues.

    The proposal sorts ``lambda + step * xi``; because it is a symmetric
    function of the pre-image the proposal stays symmetric, so the plain
    Metropolis ratio applies.  The step size is tuned towards 30%
    acceptance during burn-in and then frozen.  ``count`` samples are
    taken from ``chains`` parallel chains after thinning (default thinning
    ``5 * n_distinct``).  The effective sample size is estimated per
    coordinate from within-chain autocorrelations and the minimum is
    reported; a value under ``count / 50`` adds a warning.
    """
    if law.weight is not Weight.GAUSSIAN:
        raise ValueError("the oracle samples the Gaussian-weighted law only")
    if count < 1:
        raise ValueError("count must be >= 1")
    k = law.n_distinct
    thin = thin or 5 * k
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0xC4A1,))))
    chains = min(chains, count)
    per_chain = -(-count // chains)
    x = np.sort(rng.standard_normal((chains, k)) * np.sqrt(k), axis=1)
    logp = target_log_density(law, x)
    step = 1.0 / np.sqrt(k)
    for it in range(burn_in):
        x, logp, acc = _mh_step(law, x, logp, step, rng)
        if it % 50 == 49:
            step *= np.exp(acc - 0.3)
    out = np.empty((chains, per_chain, k))
    accepted = 0.0
    for s in range(per_chain):
        for _ in range(thin):
            x, logp, acc = _mh_step(law, x, logp, step, rng)
            accepted += acc
        out[:, s] = x
    ess = effective_sample_size(out)
    samples = out.reshape(-1, k)[:count]
    result = MCMCResult(samples, ess, accepted / (per_chain * thin), step)
    if ess < count / 50:
        msg = f"effective sample size {ess:.0f} is below count/50 = {count / 50:.0f}"
        result.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return result


def _mh_step(law, x, logp, step, rng):
    prop = np.sort(x + step * rng.standard_normal(x.shape), axis=1)
    logq = target_log_density(law, prop)
    accept = np.log(rng.uniform(size=len(x))) < logq - logp
    x = np.where(accept[:, None], prop, x)
    logp = np.where(accept, logq, logp)
    return x, logp, float(accept.mean())


def effective_sample_size(chains: np.ndarray) -> float:
    """Minimum over coordinates of ``chains * length / tau`` with ``tau = 1 + 2 sum rho_k``.

    The autocorrelation sum stops at the first lag where the chain-averaged
    correlation drops below 0.05.
    """
    c, L, k = chains.shape
    if L < 4:
        return float(c * L)
    best = np.inf
    for j in range(k):
        y = chains[:, :, j] - chains[:, :, j].mean(axis=1, keepdims=True)
        var = np.mean(y * y)
        if var == 0:
            continue
        tau = 1.0
        for lag in range(1, L // 2):
            rho = np.mean(y[:, lag:] * y[:, :-lag]) / var
            if rho < 0.05:
                break
            tau += 2 * rho
        best = min(best, c * L / tau)
    return float(best if np.isfinite(best) else c * L)


@dataclass
class TwoSampleResult:
    ks_stats: list
    ks_pvalues: list
    ks_pvalue: float
    energy_stat: float
    energy_pvalue: float
    p_value: float

    @property
    def ks_stat(self) -> float:
        return max(self.ks_stats)

    def as_dict(self):
        return {"ks_stat": self.ks_stat, "ks_stats": self.ks_stats, "ks_pvalues": self.ks_pvalues, "ks_pvalue": self.ks_pvalue,
                "energy_stat": self.energy_stat, "energy_pvalue": self.energy_pvalue, "p_value": self.p_value}


def two_sample_test(A, B, *, permutations: int = 200, energy_max: int = 1000, seed: int = 0) -> TwoSampleResult:
    """Kolmogorov-Smirnov on each sorted coordinate (Bonferroni) and a permutation energy test.

    Rows of ``A`` and ``B`` are sorted vectors of equal length.  The energy
    statistic uses at most ``energy_max`` rows per side, chosen at random
    with ``seed``.  The combined p-value is ``min(1, 2 min(p_ks, p_energy))``.
    """
    A = np.atleast_2d(np.asarray(A, float))
    B = np.atleast_2d(np.asarray(B, float))
    if A.shape[1] != B.shape[1]:
        raise ValueError("samples must have the same dimension")
    if A.shape[0] < 100 or B.shape[0] < 100:
        raise ValueError("each side needs at least 100 samples")
    k = A.shape[1]
    stats, pvals = [], []
    for j in range(k):
        r = ks_2samp(A[:, j], B[:, j])
        stats.append(float(r.statistic))
        pvals.append(float(r.pvalue))
    p_ks = min(1.0, k * min(pvals))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0xE4E,))))
    a = A[rng.permutation(len(A))[:energy_max]]
    b = B[rng.permutation(len(B))[:energy_max]]
    pooled = np.vstack([a, b])
    D = cdist(pooled, pooled)
    na = len(a)
    labels = np.zeros(len(pooled), dtype=bool)
    labels[:na] = True
    e_obs = _energy(D, labels)
    hits = 0
    for _ in range(permutations):
        if _energy(D, rng.permutation(labels)) >= e_obs:
            hits += 1
    p_energy = (hits + 1) / (permutations + 1)
    return TwoSampleResult(stats, pvals, p_ks, e_obs, p_energy, min(1.0, 2 * min(p_ks, p_energy)))


def _energy(D, mask):
    na, nb = mask.sum(), (~mask).sum()
    za = mask.astype(float)
    zb = 1.0 - za
    Dz_a = D @ za
    ab = zb @ Dz_a / (na * nb)
    aa = za @ Dz_a / (na * na)
    bb = zb @ (D @ zb) / (nb * nb)
    return float(2 * ab - aa - bb)


# ----------------------------------------------------------------------------
# matrix-side samples


def sample_eigenvalues(config: EnsembleConfig, count: int, start: int = 0, factor: str | None = None,
                       batch: int = 512) -> np.ndarray:
    """Sorted eigenvalues of ``phi(M)`` (or of its restriction to one ideal) for ``count`` replicas."""
    sig = config.signature
    layout = coordinate_layout(sig, config.n)
    scale = np.sqrt(config.t * layout.metric)
    basis = None
    if factor is not None:
        plus, minus = ideal_bases(sig, config.n)
        basis = plus if factor == "+" else minus
    out = []
    for lo in range(start, start + count, batch):
        hi = min(lo + batch, start + count)
        u = np.stack([replica_rng(config.seed, r).standard_normal(layout.count) for r in range(lo, hi)]) * scale
        R = realize_blocks(layout.unpack(u), sig)
        if basis is not None:
            R = basis.T @ R @ basis
        out.append(np.linalg.eigvalsh(R))
    return np.concatenate(out)


def normalized_distinct(eigenvalues: np.ndarray, multiplicity: int, p: int) -> np.ndarray:
    """Means of consecutive runs of ``multiplicity`` sorted eigenvalues, scaled by ``sqrt(multiplicity / 2^p)``."""
    ev = np.asarray(eigenvalues, float)
    lead = ev.shape[:-1]
    means = ev.reshape(lead + (-1, multiplicity)).mean(axis=-1)
    return means * np.sqrt(multiplicity / 2 ** p)


# ----------------------------------------------------------------------------
# mean characteristic polynomial


@dataclass
class MeanCharpolyReport:
    mean: np.ndarray
    stderr: np.ndarray
    residual: np.ndarray
    residual_se: np.ndarray
    z: np.ndarray
    passed: bool
    kind: str

    def as_dict(self):
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}


def mean_charpoly_check(coeffs, kind: str = "hermite", sigmas: float = 3.0) -> MeanCharpolyReport:
    """Check the Monte-Carlo mean of monic characteristic polynomials.

    ``coeffs`` has rows ``(a_0, ..., a_{n-1})``.  ``kind="hermite"`` tests
    ``Q'' - 2 X Q' + 2 n Q = 0`` coefficient by coefficient; ``"monomial"``
    tests ``Q = X^n``.  Each residual coefficient is a linear function of
    the sample, so its standard error is that of its per-sample values.
    Coefficients whose residual vanishes identically are checked exactly.
    """
    c = np.asarray(coeffs, float)
    N, n = c.shape
    if N < 2:
        raise ValueError("need at least two samples")
    full = np.concatenate([c, np.ones((N, 1))], axis=1)
    if kind == "hermite":
        k = np.arange(n + 1)
        per = (2 * n - 2 * k) * full
        per[:, : n - 1] += (k[: n - 1] + 2) * (k[: n - 1] + 1) * full[:, 2:]
    elif kind == "monomial":
        per = full[:, :n]
    else:
        raise ValueError("kind must be 'hermite' or 'monomial'")
    res = per.mean(axis=0)
    se = per.std(axis=0, ddof=1) / np.sqrt(N)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(res) / se, np.where(np.abs(res) < 1e-12, 0.0, np.inf))
    return MeanCharpolyReport(full.mean(axis=0), full.std(axis=0, ddof=1) / np.sqrt(N), res, se, z,
                              bool(np.all(z <= sigmas)), kind)


# ----------------------------------------------------------------------------
# ball process near its sphere limit


@dataclass
class BallSurfaceMass:
    n: int
    q: float
    eps: float
    mass: float
    samples: int


def ball_surface_mass(n: int, q: float, samples: int = 20000, eps: float = 0.05, seed: int = 0) -> BallSurfaceMass:
    """Fraction of the ball process's reversible law with ``|1 + 2 a_{n-2} - a_{n-1}^2| < eps``.

    The process on the unit ball of ``R^n`` has ``Gamma(x_i, x_j) = delta_ij - x_i x_j``
    and ``L x_i = -q x_i``; its reversible density ``(1 - |x|^2)^{(q - n - 1)/2}``
    is integrable for ``q > n - 1``.  Draws are exact: ``|x|^2`` is
    ``Beta(n/2, (q - n + 1)/2)`` and the direction is uniform.  The roots
    are the coordinates, so ``1 + 2 a_{n-2} - a_{n-1}^2 = 1 - |x|^2``.  The
    mass tends to 1 as ``q`` decreases to ``n - 1``; no rate is claimed.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not q > n - 1:
        raise ValueError("q must exceed n - 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0xBA11,))))
    r2 = rng.beta(n / 2, (q - n + 1) / 2, samples)
    u = rng.standard_normal((samples, n))
    x = u / np.linalg.norm(u, axis=1, keepdims=True) * np.sqrt(r2)[:, None]
    a_top = -x.sum(axis=1)
    i, j = np.triu_indices(n, 1)
    a_next = np.sum(x[:, i] * x[:, j], axis=1)
    surface = 1 + 2 * a_next - a_top ** 2
    return BallSurfaceMass(n, q, eps, float(np.mean(np.abs(surface) < eps)), samples)


# ----------------------------------------------------------------------------
# Bott table

_STRUCTURES = {1: "C", 2: "H", 3: "H⊕H", 4: "H[2]", 5: "C[4]", 6: "R[8]", 7: "R[8]⊕R[8]", 8: "R[16]"}
_EMPIRICAL_MAX_P = 6


@dataclass
class BottRow:
    p: int
    structure: str
    d: int
    alpha: int
    a: int
    splits: bool
    empirical: dict | None = None

    def as_dict(self):
        out = {"p": self.p, "structure": self.structure, "d": self.d, "alpha": self.alpha, "a": self.a,
               "splits": self.splits}
        if self.empirical is not None:
            out["empirical"] = self.empirical
        return out

    @property
    def confirmed(self) -> bool:
        if self.empirical is None:
            return True
        e = self.empirical
        return bool(e.get("multiplicity_ok", True) and e.get("fit_ok", True) and e.get("law_ok", True) is not False)


def bott_row(p: int) -> BottRow:
    """Row of the periodicity table: structure label, irreducible dimension, multiplicity and exponent."""
    if p < 1:
        raise ValueError("rows start at p = 1")
    pred = predicted_multiplicity(p)
    q, base = divmod(p - 1, 8)
    label = _STRUCTURES[base + 1]
    if q:
        label = "R[16]⊗" * q + label
    return BottRow(p, label, pred.a, pred.a, pred.repulsion, pred.splits)


def bott_table(p_max: int, verify: bool = False, *, n: int = 2, samples: int = 200, law_samples: int = 2000,
               seed: int = 0) -> list[BottRow]:
    """Rows ``1..p_max``; with ``verify`` each row gets empirical confirmation.

    For ``p <= 6``, ``samples`` matrices with block size ``n`` are checked
    for cluster sizes.  The generator constants are then fitted to recover
    ``alpha`` and ``a``, and the law of the rescaled distinct eigenvalues is
    compared with the MCMC oracle; both use block size ``max(n, 2)`` so
    that at least two distinct eigenvalues exist.  For larger ``p``
    only the multiplicity and the split flag are confirmed, with ``n = 1``.
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    rows = [bott_row(p) for p in range(1, p_max + 1)]
    if verify:
        for row in rows:
            row.empirical = _verify_row(row, n, samples, law_samples, seed)
    return rows


def _verify_row(row: BottRow, n: int, samples: int, law_samples: int, seed: int) -> dict:
    p = row.p
    full = p <= _EMPIRICAL_MAX_P
    n_used = n if full else 1
    count = samples if full else min(samples, 20)
    cfg = EnsembleConfig(n_used, p, seed=seed)
    factor = "+" if row.splits else None
    ev = sample_eigenvalues(cfg, count)
    sizes = set()
    split_ok = True
    for e in ev:
        s = summarize_eigenvalues(e)
        sizes.update(int(m) for m in s.multiplicities)
    if row.splits:
        plus = sample_eigenvalues(cfg, min(count, 5), factor="+")
        minus = sample_eigenvalues(cfg, min(count, 5), factor="-")
        split_ok = plus.shape[1] == minus.shape[1] == ev.shape[1] // 2
    out = {"n": n_used, "samples": count, "cluster_sizes": sorted(sizes),
           "multiplicity_ok": sizes == {row.alpha} and split_ok}
    if row.splits:
        out["split_ok"] = split_ok
    if not full:
        return out
    # one block gives a single distinct eigenvalue for small p, where the
    # constants are not identifiable; fit and law use at least two blocks
    n_fit = max(n, 2)
    cfg = EnsembleConfig(n_fit, p, seed=seed)
    data = []
    for r in range(3):
        data += collect_samples(sample_blocks(cfg, r), factor=factor)
    fit = fit_alpha_beta_gamma(data)
    snapped = [snap_rational(v, 2, 1e-6) for v in fit.triple]
    a_fit = None
    rep = None
    if fit.well_conditioned and all(v is not None for v in snapped):
        a_fit = solve_multiplicity(*snapped).positive_integer
        q = p - 1 if row.splits else p
        if a_fit:
            rep = a_fit * a_fit / 2 ** q
    out.update({"fit_n": n_fit, "fitted": list(fit.triple), "fit_residual": fit.residual, "alpha_fit": a_fit, "a_fit": rep,
                "fit_ok": a_fit == row.alpha and rep == row.a})
    n_distinct = (n_fit << p) // (2 if row.splits else 1) // row.alpha
    if n_distinct >= 2:
        mats = sample_eigenvalues(cfg, law_samples, start=count, factor=factor)
        lam = normalized_distinct(mats, row.alpha, p)
        mc = mcmc_oracle(SpectralLaw(n_distinct, row.a), law_samples, seed=seed + p)
        test = two_sample_test(lam, mc.samples, seed=seed)
        out.update({"law_n_distinct": n_distinct, "law_p_value": test.p_value, "law_ok": test.p_value > 0.01,
                    "mcmc_ess": mc.ess})
    else:
        out.update({"law_n_distinct": n_distinct, "law_p_value": None, "law_ok": None})
    return out
