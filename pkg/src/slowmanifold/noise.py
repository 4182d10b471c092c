"""Reproducible Wiener paths and stationary noise functionals.

This module is the single source of randomness for the package.  It
provides

* two-sided discrete Wiener paths with bit-identical regeneration from
  ``(seed, grid, dim)``,
* the time-rescaling map between slow-time and fast-time noise samples,
  ``V_tau = W(tau * eps) / sqrt(eps)``,
* exact sampling of the stationary Ornstein-Uhlenbeck process driven by
  a path, and
* truncated stationary stochastic integrals ``int_{-T}^0 k(s) dW_s``
  together with their exponentially filtered sliding-window variants.

Gaussian generation convention: uniforms are drawn from a Philox
counter-based bit generator and mapped through the inverse normal CDF
(``scipy.special.ndtri``).  The two halves of a two-sided path come from
separate child streams; the negative half is drawn outward from zero so
that extending a grid further into the past appends draws instead of
shifting existing ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, solve_lyapunov
from scipy.signal import lfilter
from scipy.special import ndtri

from .errors import ConfigurationError, DomainError, HypothesisViolationError

#: default tail tolerance for truncating integrals over (-inf, 0]
TAIL_TOL = 1e-8

# spawn keys for the sub-streams derived from one path seed
_POSITIVE_HALF = 0
_NEGATIVE_HALF = 1
_STATIONARY_INIT = 2


def root_seed(seed) -> int:
    """Reduce an int or ``SeedSequence`` to the canonical 64-bit path seed."""
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1, np.uint64)[0])
    return int(seed) % (1 << 64)


def _gaussians(seed: int, spawn_key: tuple, shape) -> np.ndarray:
    """Standard normals via inverse CDF from a keyed Philox stream."""
    ss = np.random.SeedSequence(seed, spawn_key=spawn_key)
    gen = np.random.Generator(np.random.Philox(ss))
    return ndtri(gen.random(shape))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with nodes ``t_k = t_start + k * dt``."""

    t_start: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0.0):
            raise ConfigurationError(f"grid dt must be positive, got {self.dt}")
        if self.n_steps < 0 or int(self.n_steps) != self.n_steps:
            raise ConfigurationError(f"grid n_steps must be a count, got {self.n_steps}")
        if not np.isfinite(self.t_start):
            raise ConfigurationError(f"grid t_start must be finite, got {self.t_start}")

    @property
    def t_end(self) -> float:
        return self.t_start + self.dt * self.n_steps

    def nodes(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    def index_of(self, t: float, rtol: float = 1e-6) -> int:
        """Index of the node at time ``t``; raises if ``t`` is off-grid."""
        k = (t - self.t_start) / self.dt
        j = int(round(k))
        if abs(k - j) > rtol or not (0 <= j <= self.n_steps):
            raise ConfigurationError(
                f"time {t} is not a node of grid(start={self.t_start}, dt={self.dt})"
            )
        return j


def grid_from_horizon(t_start: float, t_end: float, dt: float) -> TimeGrid:
    """Grid covering ``[t_start, t_end]``; the span must be a multiple of dt."""
    span = t_end - t_start
    n = int(round(span / dt))
    if n <= 0 or abs(n * dt - span) > 1e-9 * max(abs(span), dt):
        raise ConfigurationError(
            f"horizon [{t_start}, {t_end}] is not an integer number of steps of {dt}"
        )
    return TimeGrid(t_start, dt, n)


@dataclass(frozen=True)
class NoisePath:
    """Discrete two-sided Wiener path: i.i.d. ``N(0, dt I)`` increments per step.

    Regeneration from ``(seed, grid, dim)`` through :func:`sample_wiener`
    is bit-identical.  Instances are immutable and safe to share.
    """

    grid: TimeGrid
    dim: int
    seed: int
    increments: np.ndarray  # (n_steps, dim)

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=np.float64)
        if inc.shape != (self.grid.n_steps, self.dim):
            raise ConfigurationError(
                f"increments shape {inc.shape} does not match "
                f"(n_steps={self.grid.n_steps}, dim={self.dim})"
            )
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    def cumulative(self) -> np.ndarray:
        """Path values ``W(t_k)`` with ``W(t_start) = 0``, shape (n+1, dim)."""
        w = np.zeros((self.grid.n_steps + 1, self.dim))
        np.cumsum(self.increments, axis=0, out=w[1:])
        return w


@dataclass(frozen=True)
class StationaryPath:
    """Nodewise values of a stationary process attached to a grid."""

    grid: TimeGrid
    values: np.ndarray  # (n_steps + 1, m)
    process_tag: str  # "eta_eps" or "eta_rescaled"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != self.grid.n_steps + 1:
            raise ConfigurationError(
                f"values length {vals.shape[0]} != n_steps+1 = {self.grid.n_steps + 1}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def sample_wiener(grid: TimeGrid, dim: int, seed) -> NoisePath:
    """Draw a seeded Wiener path on ``grid``.

    Steps whose left node lies at t >= 0 are drawn from the positive-half
    stream in increasing time order; steps left of zero come from an
    independent negative-half stream drawn outward (0 -> past).
    """
    if not isinstance(grid, TimeGrid):
        raise ConfigurationError("grid must be a TimeGrid")
    if dim < 1 or int(dim) != dim:
        raise ConfigurationError(f"dim must be a positive count, got {dim}")
    root = root_seed(seed)
    n = grid.n_steps
    left_nodes = grid.t_start + grid.dt * np.arange(n)
    n_neg = int(np.sum(left_nodes < -1e-9 * grid.dt))
    sqdt = math.sqrt(grid.dt)
    inc = np.empty((n, dim))
    if n - n_neg > 0:
        inc[n_neg:] = _gaussians(root, (_POSITIVE_HALF,), (n - n_neg, dim)) * sqdt
    if n_neg > 0:
        outward = _gaussians(root, (_NEGATIVE_HALF,), (n_neg, dim)) * sqdt
        inc[:n_neg] = outward[::-1]
    return NoisePath(grid=grid, dim=dim, seed=root, increments=inc)


def rescale_noise(path: NoisePath, eps: float, dt_out: float | None = None) -> NoisePath:
    """Map a slow-time path to fast time: ``V_tau = W(tau * eps) / sqrt(eps)``.

    By default every source step [t_k, t_k+dt] becomes one output step of
    size dt/eps, so no information is lost.  An explicit ``dt_out`` must be
    an integer multiple of dt/eps; consecutive source increments are then
    aggregated, anchored so the final node of the source path is kept.

    The result is again a standard Wiener path in distribution.
    """
    if not (eps > 0.0 and np.isfinite(eps)):
        raise ConfigurationError(f"eps must be positive, got {eps}")
    g = path.grid
    inv_sq = 1.0 / math.sqrt(eps)
    if dt_out is None:
        out_grid = TimeGrid(g.t_start / eps, g.dt / eps, g.n_steps)
        return NoisePath(out_grid, path.dim, path.seed, path.increments * inv_sq)
    natural = g.dt / eps
    ratio = dt_out / natural
    r = int(round(ratio))
    if r < 1 or abs(ratio - r) > 1e-9 * max(1.0, ratio):
        raise DomainError(
            f"dt_out={dt_out} is not an integer multiple of the natural "
            f"rescaled step {natural}"
        )
    n_out = g.n_steps // r
    if n_out == 0:
        raise DomainError("requested rescaled window exceeds source path support")
    used = path.increments[g.n_steps - n_out * r :]
    grouped = used.reshape(n_out, r, path.dim).sum(axis=1) * inv_sq
    out_grid = TimeGrid(g.t_end / eps - n_out * dt_out, dt_out, n_out)
    return NoisePath(out_grid, path.dim, path.seed, grouped)


def _spectral_decay(B: np.ndarray) -> float:
    """Decay rate beta of the fast matrix; positive iff H1 holds for B."""
    eigs = np.linalg.eigvals(B)
    return float(-np.max(eigs.real))


def ou_stationary_path(B, eps: float, path: NoisePath) -> StationaryPath:
    """Stationary OU process ``eta(t) = (1/sqrt(eps)) int_-inf^t e^{B(t-s)/eps} dW_s``.

    Uses the exact one-step recursion ``eta_{k+1} = Phi eta_k + zeta_k``
    with ``Phi = e^{B dt / eps}`` and ``zeta_k`` Gaussian with the exact
    step covariance ``Sigma_dt = Sigma_inf - Phi Sigma_inf Phi^T``, where
    ``Sigma_inf`` solves ``B Sigma + Sigma B^T = -I``.  The innovations are
    derived deterministically from the path's increments (``zeta_k =
    L_dt dW_k / sqrt(dt)``), and the initial value is a stationary draw
    from the path's dedicated init stream.
    """
    if not (eps > 0.0 and np.isfinite(eps)):
        raise ConfigurationError(f"eps must be positive, got {eps}")
    m = path.dim
    B_mat = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if B_mat.shape != (m, m):
        raise ConfigurationError(f"B shape {B_mat.shape} does not match path dim {m}")
    beta = _spectral_decay(B_mat)
    if beta <= 0.0:
        raise HypothesisViolationError(
            "H1 violated: fast matrix B must have all eigenvalue real parts "
            f"<= -beta < 0 (found decay rate {beta})"
        )
    dt = path.grid.dt
    n = path.grid.n_steps
    z = path.increments / math.sqrt(dt)  # (n, m) standard normals
    z0 = _gaussians(path.seed, (_STATIONARY_INIT,), (m,))

    if m == 1:
        b = float(B_mat[0, 0])
        phi = math.exp(b * dt / eps)
        var_inf = -1.0 / (2.0 * b)
        var_dt = var_inf * (1.0 - phi * phi)
        eta0 = math.sqrt(var_inf) * z0[0]
        zeta = math.sqrt(var_dt) * z[:, 0]
        if n > 0:
            body, _ = lfilter([1.0], [1.0, -phi], zeta, zi=np.array([phi * eta0]))
            values = np.concatenate([[eta0], body])[:, None]
        else:
            values = np.array([[eta0]])
        return StationaryPath(path.grid, values, "eta_eps")

    phi_mat = expm(B_mat * dt / eps)
    sigma_inf = solve_lyapunov(B_mat, -np.eye(m))
    sigma_dt = sigma_inf - phi_mat @ sigma_inf @ phi_mat.T
    sigma_dt = 0.5 * (sigma_dt + sigma_dt.T)
    l_inf = np.linalg.cholesky(sigma_inf)
    l_dt = np.linalg.cholesky(sigma_dt)
    values = np.empty((n + 1, m))
    values[0] = l_inf @ z0
    zeta = z @ l_dt.T
    for k in range(n):
        values[k + 1] = phi_mat @ values[k] + zeta[k]
    return StationaryPath(path.grid, values, "eta_eps")


def truncation_horizon(beta_min: float, tol: float = TAIL_TOL) -> float:
    """Window length T with e^{-beta T} = tol, so kernel tails are below tol."""
    if beta_min <= 0.0:
        raise ConfigurationError("truncation needs a positive decay rate")
    return math.log(1.0 / tol) / beta_min


def stationary_integral(kernel, path: NoisePath, truncation_T: float) -> float:
    """Truncated stochastic integral ``int_{-T}^0 kernel(s) dW_s``.

    The kernel is deterministic and evaluated at step midpoints, which
    keeps the Ito-isometry bias of the discrete sum at O(dt^2).  The path
    must cover ``[-T, 0]``.
    """
    if path.dim != 1:
        raise DomainError("stationary_integral is defined for scalar paths")
    if not (truncation_T > 0.0):
        raise ConfigurationError("truncation_T must be positive")
    g = path.grid
    tiny = 1e-9 * g.dt
    if g.t_start > -truncation_T + tiny or g.t_end < -tiny:
        raise DomainError(
            f"path support [{g.t_start}, {g.t_end}] does not cover "
            f"[-{truncation_T}, 0]"
        )
    lefts = g.t_start + g.dt * np.arange(g.n_steps)
    keep = (lefts >= -truncation_T - tiny) & (lefts + g.dt <= tiny)
    mids = lefts[keep] + 0.5 * g.dt
    weights = np.asarray(kernel(mids), dtype=np.float64)
    return float(weights @ path.increments[keep, 0])


def filtered_integrals(increments: np.ndarray, dtau: float, decay: float = 1.0):
    """Sliding-window stationary integrals along a fast-time path.

    For a path with step ``dtau`` and per-step increments ``dV`` (shape
    (n,) or (n, P) for P independent columns), returns node-aligned arrays

    * ``j0[k] = int_{-inf}^{tau_k} e^{decay (s - tau_k)} dV_s``
    * ``j1[k] = int_{-inf}^{tau_k} (s - tau_k) e^{decay (s - tau_k)} dV_s``

    truncated at the first node (zero initial condition), using the same
    midpoint evaluation as :func:`stationary_integral`.  Both satisfy exact
    linear one-step recursions under the time shift, which is what makes a
    per-step update of the manifold's stochastic coefficients possible.
    """
    dv = np.asarray(increments, dtype=np.float64)
    squeeze = dv.ndim == 1
    if squeeze:
        dv = dv[:, None]
    n = dv.shape[0]
    alpha = math.exp(-decay * dtau)
    gam = math.exp(-decay * dtau / 2.0)
    j0 = np.zeros((n + 1, dv.shape[1]))
    j1 = np.zeros_like(j0)
    if n > 0:
        j0[1:] = lfilter([gam], [1.0, -alpha], dv, axis=0)
        drive = -dtau * (alpha * j0[:-1] + 0.5 * gam * dv)
        j1[1:] = lfilter([1.0], [1.0, -alpha], drive, axis=0)
    if squeeze:
        return j0[:, 0], j1[:, 0]
    return j0, j1
