"""Euler-Maruyama simulation of matrix processes and of the coefficient process.

Time convention: the simulated process has generator ``L/2``, where ``L``
is the operator whose carré du champ on coordinates is the metric ``g``.
A Brownian coordinate then has variance ``g t`` at time ``t``, so the
matrix at time ``t`` has the same law as :func:`~cliffmat.matrices.sample_blocks`
with ``t``; the Ornstein-Uhlenbeck step uses drift ``-u/2`` and is
stationary at ``t = 1``.

Each path draws from its own stream ``SeedSequence(seed, spawn_key=(path,))``
in fixed-size chunks, so results do not depend on how paths are batched or
how many workers run them.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .identities import GeneratorCase, reduced_constants
from .matrices import EnsembleConfig, coordinate_layout, realize_blocks
from .polynomials import MonicPolynomial, gamma_coeff_entries, real_rooted_batch, summarize_eigenvalues

NOISE_CHUNK = 256
MAX_HALVINGS = 8


class Process(enum.Enum):
    BM = "bm"
    OU = "ou"
    SPHERE = "sphere"
    COEFF = "coeff"


@dataclass(frozen=True)
class SimConfig:
    dt: float
    steps: int
    process: Process | str = Process.BM
    seed: int = 0
    stride: int = 1
    paths: int = 1
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "process", Process(self.process))
        if not self.dt > 0 or not np.isfinite(self.dt):
            raise ValueError("dt must be positive and finite")
        if self.steps < 0 or self.stride < 1 or self.paths < 1:
            raise ValueError("steps >= 0, stride >= 1 and paths >= 1 are required")

    @property
    def horizon(self) -> float:
        return self.dt * self.steps

    @property
    def snapshot_steps(self) -> np.ndarray:
        return np.arange(0, self.steps + 1, self.stride)


@dataclass
class Trajectory:
    """Snapshots at ``times`` for every path.

    Matrix processes fill ``eigenvalues`` with shape ``(paths, snapshots, dim)``
    and ``coordinates`` with the final state.  The coefficient process fills
    ``coefficients`` with shape ``(paths, snapshots, d)``.
    """

    times: np.ndarray
    eigenvalues: np.ndarray | None = None
    coefficients: np.ndarray | None = None
    final_coordinates: np.ndarray | None = None
    rejections: int = 0
    meta: dict = field(default_factory=dict)

    def summary(self, path: int, snapshot: int, tol: float = 1e-7):
        return summarize_eigenvalues(self.eigenvalues[path, snapshot], tol)

    def polynomial(self, path: int, snapshot: int) -> MonicPolynomial:
        return MonicPolynomial(self.coefficients[path, snapshot])


class SimulationAbort(RuntimeError):
    """Raised when a path cannot take a step inside the admissible domain."""

    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class _NoiseStream:
    """Standard normals for one path, drawn ``NOISE_CHUNK`` steps at a time."""

    def __init__(self, seed, path, width, stream=0):
        ss = np.random.SeedSequence(seed, spawn_key=(path, stream))
        self.rng = np.random.Generator(np.random.PCG64(ss))
        self.width = width
        self.buf = np.empty((0, width))
        self.pos = 0

    def next(self):
        if self.pos == len(self.buf):
            self.buf = self.rng.standard_normal((NOISE_CHUNK, self.width))
            self.pos = 0
        out = self.buf[self.pos]
        self.pos += 1
        return out


def _noise_block(streams):
    return np.stack([s.next() for s in streams])


def ou_step(u: np.ndarray, dt: float, xi: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """One Euler step of ``du = -u/2 dt + sqrt(g) dW``."""
    return u - 0.5 * u * dt + np.sqrt(metric * dt) * xi


def bm_step(u, dt, xi, metric):
    return u + np.sqrt(metric * dt) * xi


def trace_norm_sq(u: np.ndarray, metric: np.ndarray, p: int) -> np.ndarray:
    """``||phi(M)||_F^2 = 2^p sum_A ||M^A||_F^2`` from coordinates."""
    return (2 ** p) * np.sum(u * u / metric, axis=-1)


def simulate_matrix(config: SimConfig, ensemble: EnsembleConfig, initial: str | np.ndarray = "zero") -> Trajectory:
    """Simulate ``config.paths`` independent matrix paths.

    ``initial`` is ``"zero"``, ``"stationary"`` (an exact Gaussian draw from
    the path's stream) or an array of coordinates.  The sphere process
    renormalizes to ``||phi(M)||_F = 1`` after every Brownian step and
    starts from a normalized Gaussian draw when ``initial`` is ``"zero"``.
    """
    if config.process is Process.COEFF:
        raise ValueError("use simulate_coefficients for the coefficient process")
    sig = ensemble.signature
    layout = coordinate_layout(sig, ensemble.n)
    workers = max(1, int(config.workers))
    bounds = np.linspace(0, config.paths, workers + 1).astype(int)
    chunks = [(bounds[i], bounds[i + 1]) for i in range(workers) if bounds[i + 1] > bounds[i]]

    def run(lo_hi):
        return _simulate_paths(config, ensemble, layout, initial, *lo_hi)

    if len(chunks) == 1:
        parts = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    evals = np.concatenate([p[0] for p in parts])
    final = np.concatenate([p[1] for p in parts])
    times = config.snapshot_steps * config.dt
    return Trajectory(times, eigenvalues=evals, final_coordinates=final,
                      meta={"process": config.process.value, "n": ensemble.n, "p": sig.p})


def _simulate_paths(config, ensemble, layout, initial, lo, hi):
    sig = ensemble.signature
    K = layout.count
    metric = layout.metric
    streams = [_NoiseStream(config.seed, path, K) for path in range(lo, hi)]
    count = hi - lo
    if isinstance(initial, str):
        if initial == "zero" and config.process is not Process.SPHERE:
            u = np.zeros((count, K))
        elif initial in ("zero", "stationary"):
            u = _noise_block(streams) * np.sqrt(metric)
        else:
            raise ValueError(f"unknown initial condition {initial!r}")
    else:
        u = np.array(np.broadcast_to(np.asarray(initial, float), (count, K)))
    if config.process is Process.SPHERE:
        u = _normalize(u, metric, sig.p)
    dim = ensemble.n * sig.size
    snaps = config.snapshot_steps
    evals = np.empty((count, len(snaps), dim))
    step = {Process.BM: bm_step, Process.OU: ou_step, Process.SPHERE: bm_step}[config.process]
    snap_idx = 0

    def record(k):
        evals[:, k] = np.linalg.eigvalsh(realize_blocks(layout.unpack(u), sig))

    record(0)
    snap_idx = 1
    for n in range(1, config.steps + 1):
        u = step(u, config.dt, _noise_block(streams), metric)
        if config.process is Process.SPHERE:
            u = _normalize(u, metric, sig.p)
        if snap_idx < len(snaps) and n == snaps[snap_idx]:
            record(snap_idx)
            snap_idx += 1
    return evals, u


def _normalize(u, metric, p):
    norm = np.sqrt(trace_norm_sq(u, metric, p))
    if np.any(norm == 0):
        raise ValueError("cannot project the zero matrix onto the sphere")
    return u / norm[:, None]


# ----------------------------------------------------------------------------
# coefficient process


@dataclass(frozen=True)
class CoefficientDynamics:
    """``dQ = (drift/2) Q'' dt + noise`` with covariance ``scale * G(Q) dt``.

    ``G`` is the matrix of :func:`~cliffmat.polynomials.gamma_coeff_matrix`.
    """

    scale: float
    drift: float

    @classmethod
    def diagonal(cls) -> "CoefficientDynamics":
        """Roots moving as independent Brownian motions."""
        return cls(1.0, 0.0)

    @classmethod
    def from_case(cls, case: GeneratorCase, a: int) -> "CoefficientDynamics":
        """Reduced polynomial ``Q`` (``P = Q^a``) of a Cl-symmetric Brownian matrix."""
        red = reduced_constants(case, a)
        return cls(red.gamma_hat, red.l_hat)


def _gamma_batch(coeffs):
    """``G(a)`` for each row of monic coefficients, shape ``(paths, d, d)``."""
    paths, d = coeffs.shape
    full = [coeffs[:, i] for i in range(d)] + [np.ones(paths)]
    G = gamma_coeff_entries(full)
    return np.stack([np.stack(row, axis=-1) for row in G], axis=-2)


def _drift_batch(coeffs, c):
    """Coefficients of ``c P''`` below the leading term."""
    paths, d = coeffs.shape
    full = np.concatenate([coeffs, np.ones((paths, 1))], axis=1)
    k = np.arange(2, d + 1)
    out = np.zeros((paths, d))
    out[:, : d - 1] = c * full[:, 2:] * (k * (k - 1))
    return out


def _psd_sqrt(G, rtol=1e-10):
    """Symmetric square roots; ``ok`` is False where ``G`` has a clearly negative eigenvalue."""
    w, V = np.linalg.eigh(G)
    scale = np.maximum(np.abs(w).max(axis=-1), 1e-300)
    ok = w.min(axis=-1) >= -rtol * scale
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)[:, None, :]) @ np.swapaxes(V, -1, -2), ok


def simulate_coefficients(config: SimConfig, P0: MonicPolynomial, dynamics: CoefficientDynamics | None = None) -> Trajectory:
    """Euler-Maruyama for the coefficients of a monic polynomial with only real roots.

    A proposal leaving the real-rooted domain, or met with an indefinite
    ``G``, is rejected and the step is retried as two half steps, recursively
    up to ``MAX_HALVINGS`` times, with noise from a separate per-path retry
    stream.  Exhausting the retries raises :class:`SimulationAbort`.
    """
    dynamics = dynamics or CoefficientDynamics.diagonal()
    d = P0.degree
    if d < 1:
        raise ValueError("degree must be >= 1")
    if not real_rooted_batch(P0.coeffs[None])[0]:
        raise ValueError("initial polynomial must have only real roots")
    paths = config.paths
    streams = [_NoiseStream(config.seed, path, d) for path in range(paths)]
    retry = [_NoiseStream(config.seed, path, d, stream=1) for path in range(paths)]
    a = np.tile(P0.coeffs, (paths, 1))
    snaps = config.snapshot_steps
    out = np.empty((paths, len(snaps), d))
    out[:, 0] = a
    snap_idx = 1
    rejections = 0
    for n in range(1, config.steps + 1):
        xi = _noise_block(streams)
        prop, ok = _propose(a, config.dt, xi, dynamics)
        bad = np.flatnonzero(~ok)
        a = np.where(ok[:, None], prop, a)
        for i in bad:
            rejections += 1
            a[i] = _substep(a[i], config.dt, retry[i], dynamics, 1, i, n * config.dt)
        if snap_idx < len(snaps) and n == snaps[snap_idx]:
            out[:, snap_idx] = a
            snap_idx += 1
    return Trajectory(snaps * config.dt, coefficients=out, rejections=rejections,
                      meta={"process": "coeff", "degree": d, "scale": dynamics.scale, "drift": dynamics.drift})


def _propose(a, h, xi, dyn):
    G = dyn.scale * _gamma_batch(a)
    S, ok = _psd_sqrt(G)
    prop = a + 0.5 * _drift_batch(a, dyn.drift) * h + np.sqrt(h) * np.einsum("pij,pj->pi", S, xi)
    ok &= real_rooted_batch(prop)
    ok &= np.all(np.isfinite(prop), axis=1)
    return prop, ok


def _substep(a, h, stream, dyn, depth, path, t):
    if depth > MAX_HALVINGS:
        raise SimulationAbort(
            f"path {path} could not stay real-rooted near t={t:.6g} after {MAX_HALVINGS} halvings",
            {"path": path, "time": t, "coefficients": a.tolist(), "step": h},
        )
    half = h / 2
    for _ in range(2):
        prop, ok = _propose(a[None], half, stream.next()[None], dyn)
        if ok[0]:
            a = prop[0]
        else:
            a = _substep(a, half, stream, dyn, depth + 1, path, t)
    return a


# ----------------------------------------------------------------------------
# weak-order check


@dataclass
class WeakOrderReport:
    dts: tuple
    estimates: tuple
    generator: float
    errors: tuple
    richardson: float
    richardson_error: float

    def as_dict(self):
        return dict(self.__dict__)


def weak_order_check(u: np.ndarray, metric: np.ndarray, H: np.ndarray | None = None,
                     dts=(1e-2, 1e-3)) -> WeakOrderReport:
    """Compare ``E[f(u_dt) - f(u)] / dt`` of one OU step with the generator on ``f(u) = u^T H u``.

    The expectation over the step noise is computed exactly with the
    ``2K``-point cubature ``xi = +-sqrt(K) e_k``, which matches the first two
    moments of a standard normal vector and is therefore exact for
    quadratic ``f``.  The Euler bias is ``O(dt)``, so the Richardson
    combination of the two step sizes removes the leading term.
    ``H`` defaults to the Frobenius norm of the realization.
    """
    u = np.asarray(u, float)
    metric = np.asarray(metric, float)
    K = len(u)
    if H is None:
        H = np.diag(1.0 / metric)
    H = np.asarray(H, float)
    f = lambda v: np.einsum("...i,ij,...j->...", v, H, v)
    nodes = np.sqrt(K) * np.concatenate([np.eye(K), -np.eye(K)])
    gen = float(np.sum(metric * np.diag(H)) - f(u))
    est = []
    for dt in dts:
        est.append(float((f(ou_step(u[None], dt, nodes, metric)).mean() - f(u)) / dt))
    h1, h2 = dts
    rich = (h1 * est[1] - h2 * est[0]) / (h1 - h2)
    return WeakOrderReport(tuple(dts), tuple(est), gen, tuple(abs(e - gen) for e in est), rich, abs(rich - gen))
