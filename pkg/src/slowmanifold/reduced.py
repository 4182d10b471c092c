"""Slow system on the approximated random slow manifold.

The reduced dynamics integrated here is

    dx/dt = A x + f(x, hhat(x, theta_t omega) + sigma eta(psi_eps omega))

with explicit Euler steps.  The additive noise value eta(psi_eps omega)
is sampled once per realization and held fixed (a config switch enables
the time-shifted variant for sensitivity studies), while the stochastic
coefficient of hhat is advanced per step through the exact shift
recursions of the filtered integrals, so the fast drift g is never
evaluated at simulation time for the example system.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ConfigurationError, DivergenceError, DomainError
from .manifold import (
    ManifoldApprox,
    ManifoldNoise,
    h_hat_example,
    truncation_horizon,
)
from .model import DIVERGENCE_THRESHOLD, ExampleModel, Trajectory, _as_model
from .noise import NoisePath, TimeGrid, filtered_integrals, rescale_noise


@dataclass(frozen=True)
class SlowTrajectory:
    """Nodewise slow states of one reduced-system run."""

    grid: TimeGrid
    states: np.ndarray  # (n_steps + 1, 1)

    def __post_init__(self):
        if self.states.shape[0] != self.grid.n_steps + 1:
            raise ConfigurationError("slow trajectory length does not match grid")


@dataclass(frozen=True)
class SlowNoiseSeries:
    """Noise functionals of the manifold sampled along a slow grid.

    ``i_se`` and ``eta`` carry one row per slow node (columns are
    independent realizations for ensembles); ``eta0`` is the frozen value
    eta(psi_eps omega) used by the default reduced dynamics.
    """

    grid: TimeGrid  # slow-time grid
    eta0: np.ndarray  # () or (P,)
    i_se: np.ndarray  # (n_nodes,) or (n_nodes, P)
    eta: np.ndarray  # same shape as i_se


def slow_noise_from_path(example: ExampleModel, grid: TimeGrid, path: NoisePath,
                         tail_tol: float = 1e-8) -> SlowNoiseSeries:
    """Couple the reduced run to a slow-time Wiener path via psi_eps.

    The path must share its step with no coarser than the rescaled grid and
    reach back to ``-2 T eps`` (burn-in for the zero-initialized filters).
    """
    eps = example.eps
    fast = rescale_noise(path, eps)
    return _series_from_fast(example, grid, fast.grid, fast.increments[:, 0], tail_tol)


def slow_noise_direct(example: ExampleModel, grid: TimeGrid, seed,
                      dtau: float = 0.02, n_paths: int | None = None,
                      tail_tol: float = 1e-8) -> SlowNoiseSeries:
    """Draw fresh fast-time noise for the reduced run (no slow coupling).

    Used by the Monte-Carlo objectives, where each sample is an
    independent realization anyway.  ``seed`` may be an int or a
    SeedSequence; for ``n_paths`` the columns come from one generator.
    """
    eps = example.eps
    t_back = truncation_horizon(1.0, tail_tol)
    n_burn = 2 * int(math.ceil(t_back / dtau))
    n_fwd = int(round(grid.t_end / eps / dtau))
    if abs(n_fwd * dtau - grid.t_end / eps) > 1e-9:
        raise ConfigurationError(
            f"slow horizon {grid.t_end} is not resolvable with dtau={dtau}"
        )
    n_fast = n_burn + n_fwd
    fast_grid = TimeGrid(-n_burn * dtau, dtau, n_fast)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    gen = np.random.Generator(np.random.Philox(ss))
    shape = (n_fast,) if n_paths is None else (n_fast, n_paths)
    increments = ndtri(gen.random(shape)) * math.sqrt(dtau)
    return _series_from_fast(example, grid, fast_grid, increments, tail_tol)


def _series_from_fast(example, grid, fast_grid, increments, tail_tol):
    eps = example.eps
    if grid.t_start != 0.0:
        raise ConfigurationError("reduced runs start at t = 0")
    dtau = fast_grid.dt
    stride_f = grid.dt / eps / dtau
    stride = int(round(stride_f))
    if stride < 1 or abs(stride_f - stride) > 1e-9:
        raise ConfigurationError(
            f"slow step {grid.dt} must be an integer number of fast steps "
            f"(dt/eps/dtau = {stride_f})"
        )
    idx0 = fast_grid.index_of(0.0)
    t_back = truncation_horizon(1.0, tail_tol)
    if fast_grid.t_start > -t_back + 1e-9:
        raise DomainError(
            f"fast window starts at {fast_grid.t_start:.4g}; needs burn-in "
            f"back to {-t_back:.4g}"
        )
    if idx0 + stride * grid.n_steps > fast_grid.n_steps:
        raise DomainError("fast window too short for the slow horizon")
    j0, j1 = filtered_integrals(increments, dtau, decay=1.0)
    take = idx0 + stride * np.arange(grid.n_steps + 1)
    return SlowNoiseSeries(
        grid=grid, eta0=j0[idx0], i_se=j1[take], eta=j0[take]
    )


@dataclass(frozen=True)
class ExampleManifoldPath:
    """Closed-form manifold of the example, advanced along a slow grid."""

    example: ExampleModel
    series: SlowNoiseSeries
    time_shift_eta: bool = False  # non-default eta(theta_t psi_eps omega) variant

    def h_hat_at(self, k: int, x):
        e = self.example
        return h_hat_example(
            x, e.a, e.eps, e.sigma, self.series.i_se[k], e.slow_rate, e.coupling
        )

    def h_full_at(self, k: int, x):
        e = self.example
        eta = self.series.eta[k] if self.time_shift_eta else self.series.eta0
        return e.sigma * eta + self.h_hat_at(k, x)


@dataclass(frozen=True, eq=False)
class GenericManifoldPath:
    """Quadrature-backed manifold advanced along a slow grid.

    Re-evaluates the Lyapunov-Perron construction on a sliding fast-time
    window for every node; orders of magnitude slower than the closed
    form, intended for diagnostics on short horizons.
    """

    model: object
    fast_grid: TimeGrid
    j0: np.ndarray
    j1: np.ndarray
    stride: int
    idx0: int
    n_keep: int
    time_shift_eta: bool = False

    @classmethod
    def build(cls, model, grid: TimeGrid, path: NoisePath, tail_tol: float = 1e-8,
              time_shift_eta: bool = False):
        mdl = _as_model(model)
        fast = rescale_noise(path, mdl.eps)
        dtau = fast.grid.dt
        t_back = truncation_horizon(1.0, tail_tol)
        n_keep = int(round(t_back / dtau))
        idx0 = fast.grid.index_of(0.0)
        if idx0 < 2 * n_keep:
            raise DomainError("source path does not reach back far enough")
        stride_f = grid.dt / mdl.eps / dtau
        stride = int(round(stride_f))
        if stride < 1 or abs(stride_f - stride) > 1e-9:
            raise ConfigurationError("slow step is not a multiple of the fast step")
        j0, j1 = filtered_integrals(fast.increments[:, 0], dtau, decay=1.0)
        return cls(model=model, fast_grid=fast.grid, j0=j0, j1=j1,
                   stride=stride, idx0=idx0, n_keep=n_keep,
                   time_shift_eta=time_shift_eta)

    def _window(self, k: int) -> ManifoldNoise:
        idx = self.idx0 + k * self.stride
        dtau = self.fast_grid.dt
        window = TimeGrid(-self.n_keep * dtau, dtau, self.n_keep)
        return ManifoldNoise(
            grid=window,
            eta=self.j0[idx - self.n_keep : idx + 1],
            eta0=float(self.j0[idx]),
            i_se=float(self.j1[idx]),
        )

    def h_hat_at(self, k: int, x):
        return ManifoldApprox(self.model, self._window(k)).h_hat(x)

    def h_full_at(self, k: int, x):
        mdl = _as_model(self.model)
        eta = float(self.j0[self.idx0 + k * self.stride]) if self.time_shift_eta \
            else float(self.j0[self.idx0])
        return mdl.sigma * eta + self.h_hat_at(k, x)


def _slow_euler(model, manifold_path, x0, grid: TimeGrid, record_indices=None):
    mdl = _as_model(model)
    if mdl.n != 1:
        raise ConfigurationError("the reduced integrator expects a scalar slow state")
    a_lin = float(mdl.A[0, 0])
    dt = grid.dt
    x = np.asarray(x0, dtype=np.float64)
    if record_indices is None:
        record_indices = np.arange(grid.n_steps + 1)
    rec_pos = {int(k): i for i, k in enumerate(record_indices)}
    out = np.empty((len(record_indices),) + x.shape)
    if 0 in rec_pos:
        out[rec_pos[0]] = x
    for k in range(grid.n_steps):
        h_val = manifold_path.h_full_at(k, x)
        x = x + dt * (a_lin * x + mdl.f(x, h_val, mdl.params))
        if (k + 1) % 100 == 0 or k == grid.n_steps - 1:
            with np.errstate(invalid="ignore"):
                if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_THRESHOLD:
                    raise DivergenceError(
                        f"slow state diverged by step {k + 1}", step=k + 1
                    )
        if (k + 1) in rec_pos:
            out[rec_pos[k + 1]] = x
    return out


def simulate_slow(model, manifold_path, x0: float, grid: TimeGrid) -> SlowTrajectory:
    """Explicit Euler run of the reduced system along one noise realization."""
    if isinstance(manifold_path, ExampleManifoldPath):
        sg = manifold_path.series.grid
        if abs(sg.dt - grid.dt) > 1e-12 * grid.dt or sg.n_steps < grid.n_steps:
            raise DomainError(
                "manifold noise series does not cover the simulation grid"
            )
    states = _slow_euler(model, manifold_path, float(x0), grid)
    return SlowTrajectory(grid=grid, states=states.reshape(-1, 1))


def simulate_slow_ensemble(model, manifold_path, x0, grid: TimeGrid,
                           record_indices=None) -> np.ndarray:
    """Vectorized reduced-system run over realization columns."""
    return _slow_euler(model, manifold_path, x0, grid, record_indices)


def attraction_distance(full: Trajectory, approx):
    """Per-node distance d(t) = |y(t) - manifold(x(t))| for a shared realization."""
    x = full.slow[:, 0]
    y = full.fast[:, 0]
    h = np.asarray(approx.full_manifold(x), dtype=np.float64)
    return full.grid.nodes(), np.abs(y - h)
