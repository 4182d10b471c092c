"""Slow-fast system definition and full-system simulation.

The coupled system integrated here is

    dx = (A x + f(x, y)) dt
    dy = (1/eps) (B y + g(x, y)) dt + (sigma/sqrt(eps)) dW

with an explicit Euler-Maruyama step and a stiffness guard dt <= eps/50
so the fast linear rate dt/eps stays at or below 0.02.

The worked example is the scalar system

    dx = (0.001 x - a x y) dt
    dy = (1/eps) (-y + x^2/600) dt + (sigma/sqrt(eps)) dW

with ``a`` the unknown positive parameter targeted by the estimation
pipeline.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    DivergenceError,
    DomainError,
    HypothesisWarning,
    StiffnessError,
)
from .noise import NoisePath, StationaryPath, TimeGrid

#: states whose max-norm exceeds this abort the integration
DIVERGENCE_THRESHOLD = 1e8

#: explicit-step stability margin: dt must not exceed eps / STIFFNESS_FACTOR
STIFFNESS_FACTOR = 50.0


@dataclass(frozen=True, eq=False)
class SlowFastModel:
    """Full description of a slow-fast system.

    ``f`` and ``g`` are drift callables ``(x, y, params) -> array``; for
    scalar systems they must broadcast elementwise so ensembles can be
    stepped as columns.  ``g_x`` and ``g_y`` are the partial derivatives of
    ``g`` used by the first-order manifold construction.
    """

    n: int
    m: int
    A: np.ndarray
    B: np.ndarray
    f: callable
    g: callable
    g_x: callable
    g_y: callable
    eps: float
    sigma: float
    params: dict = field(default_factory=dict)
    lipschitz_bounds: tuple | None = None  # (L_f, L_g)
    spectral_bounds: tuple | None = None  # (alpha, beta, K)

    def __post_init__(self):
        if not (self.eps > 0.0 and np.isfinite(self.eps)):
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if self.sigma < 0.0 or not np.isfinite(self.sigma):
            raise ConfigurationError(f"sigma must be >= 0, got {self.sigma}")
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(self.B, dtype=np.float64))
        if A.shape != (self.n, self.n):
            raise ConfigurationError(f"A shape {A.shape} != ({self.n}, {self.n})")
        if B.shape != (self.m, self.m):
            raise ConfigurationError(f"B shape {B.shape} != ({self.m}, {self.m})")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if self.spectral_bounds is not None:
            self.check_h2()

    def spectral_summary(self):
        """(alpha, beta, K) estimated from eigen-decompositions of A and B.

        beta is the decay rate of B; alpha the slowest rate of A; K the
        worse eigenvector conditioning of the two, 1 for normal matrices.
        """
        if self.spectral_bounds is not None:
            return self.spectral_bounds
        eig_a, vec_a = np.linalg.eig(self.A)
        eig_b, vec_b = np.linalg.eig(self.B)
        alpha = float(np.min(eig_a.real))
        beta = float(-np.max(eig_b.real))
        K = max(np.linalg.cond(vec_a), np.linalg.cond(vec_b))
        return alpha, beta, float(K)

    def check_h2(self) -> bool:
        """Check the gap condition beta > K * L_g; soft-fails with a warning."""
        if self.lipschitz_bounds is None:
            return True
        _, beta, K = self.spectral_summary()
        _, L_g = self.lipschitz_bounds
        if beta <= K * L_g:
            warnings.warn(
                f"H2 fails: beta={beta} <= K*L_g={K * L_g}; the slow-manifold "
                "construction is not guaranteed to contract",
                HypothesisWarning,
                stacklevel=2,
            )
            return False
        return True

    def validate_derivatives(self, seed: int = 0, n_points: int = 100, rtol: float = 1e-5):
        """Check g_x, g_y against central finite differences at random points."""
        rng = np.random.default_rng(seed)
        h = 1e-6
        for _ in range(n_points):
            x = rng.uniform(-5.0, 5.0, size=self.n)
            y = rng.uniform(-5.0, 5.0, size=self.m)
            gx = np.atleast_2d(np.asarray(self.g_x(x, y, self.params), dtype=float))
            gy = np.atleast_2d(np.asarray(self.g_y(x, y, self.params), dtype=float))
            for j in range(self.n):
                dx = np.zeros(self.n)
                dx[j] = h
                fd = (np.asarray(self.g(x + dx, y, self.params), dtype=float)
                      - np.asarray(self.g(x - dx, y, self.params), dtype=float)) / (2 * h)
                _assert_close(gx[:, j], fd, rtol, f"g_x[:, {j}]")
            for j in range(self.m):
                dy = np.zeros(self.m)
                dy[j] = h
                fd = (np.asarray(self.g(x, y + dy, self.params), dtype=float)
                      - np.asarray(self.g(x, y - dy, self.params), dtype=float)) / (2 * h)
                _assert_close(gy[:, j], fd, rtol, f"g_y[:, {j}]")


def _assert_close(got, want, rtol, label):
    got = np.ravel(np.asarray(got, dtype=float))
    want = np.ravel(np.asarray(want, dtype=float))
    scale = np.maximum(np.abs(want), 1.0)
    if np.any(np.abs(got - want) > rtol * scale):
        raise ConfigurationError(
            f"derivative check failed for {label}: analytic {got} vs finite "
            f"difference {want}"
        )


@dataclass(frozen=True)
class ExampleModel:
    """The worked scalar example with unknown positive drift parameter ``a``."""

    a: float
    eps: float
    sigma: float
    slow_rate: float = 0.001
    coupling: float = 1.0 / 600.0

    def __post_init__(self):
        if not (self.a > 0.0 and np.isfinite(self.a)):
            raise ConfigurationError(f"a must be positive, got {self.a}")
        if not (self.eps > 0.0 and np.isfinite(self.eps)):
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if self.sigma < 0.0:
            raise ConfigurationError(f"sigma must be >= 0, got {self.sigma}")


@functools.lru_cache(maxsize=128)
def as_slowfast(example: ExampleModel) -> SlowFastModel:
    """Instantiate the generic model object for the worked example."""
    a = example.a
    c = example.coupling

    def f(x, y, params):
        return -params["a"] * x * y

    def g(x, y, params):
        return c * (x * x)

    def g_x(x, y, params):
        return 2.0 * c * x

    def g_y(x, y, params):
        return np.zeros_like(np.asarray(y, dtype=float))

    return SlowFastModel(
        n=1,
        m=1,
        A=np.array([[example.slow_rate]]),
        B=np.array([[-1.0]]),
        f=f,
        g=g,
        g_x=g_x,
        g_y=g_y,
        eps=example.eps,
        sigma=example.sigma,
        params={"a": a},
    )


def _as_model(model) -> SlowFastModel:
    if isinstance(model, ExampleModel):
        return as_slowfast(model)
    if isinstance(model, SlowFastModel):
        return model
    raise ConfigurationError(f"not a model: {model!r}")


@dataclass(frozen=True)
class Trajectory:
    """Nodewise states of one full-system run."""

    grid: TimeGrid
    slow: np.ndarray  # (n_steps + 1, n)
    fast: np.ndarray  # (n_steps + 1, m)

    def __post_init__(self):
        want = self.grid.n_steps + 1
        if self.slow.shape[0] != want or self.fast.shape[0] != want:
            raise ConfigurationError("trajectory length does not match grid")


def check_step_size(dt: float, eps: float):
    """Enforce the explicit-step guard dt <= eps/50."""
    limit = eps / STIFFNESS_FACTOR
    if dt > limit * (1.0 + 1e-12):
        raise StiffnessError(
            f"dt={dt} too large for eps={eps}: the fast scale needs "
            f"dt <= eps/{STIFFNESS_FACTOR:g} = {limit:.3g}"
        )


def _aligned_increments(path: NoisePath, grid: TimeGrid, m: int) -> np.ndarray:
    """Slice path increments covering ``grid`` (same dt, aligned nodes)."""
    if path.dim != m:
        raise DomainError(f"path dim {path.dim} != fast dimension {m}")
    pg = path.grid
    if abs(pg.dt - grid.dt) > 1e-12 * grid.dt:
        raise DomainError(f"path step {pg.dt} does not match grid step {grid.dt}")
    offset = (grid.t_start - pg.t_start) / grid.dt
    k0 = int(round(offset))
    if abs(offset - k0) > 1e-6 or k0 < 0 or k0 + grid.n_steps > pg.n_steps:
        raise DomainError(
            f"path support [{pg.t_start}, {pg.t_end}] does not cover grid "
            f"[{grid.t_start}, {grid.t_end}]"
        )
    return path.increments[k0 : k0 + grid.n_steps]


def simulate_full(model, x0, y0, grid: TimeGrid, path: NoisePath) -> Trajectory:
    """Euler-Maruyama integration of the coupled system on ``grid``.

    The path must cover the grid with the same step.  With sigma = 0 the
    result does not depend on the supplied path values.
    """
    mdl = _as_model(model)
    check_step_size(grid.dt, mdl.eps)
    dw = _aligned_increments(path, grid, mdl.m)
    x = np.array(np.broadcast_to(np.asarray(x0, dtype=np.float64), (mdl.n,)))
    y = np.array(np.broadcast_to(np.asarray(y0, dtype=np.float64), (mdl.m,)))
    dt = grid.dt
    dt_over_eps = dt / mdl.eps
    noise_coef = mdl.sigma / math.sqrt(mdl.eps)
    slow = np.empty((grid.n_steps + 1, mdl.n))
    fast = np.empty((grid.n_steps + 1, mdl.m))
    slow[0], fast[0] = x, y
    for k in range(grid.n_steps):
        drift_x = mdl.A @ x + mdl.f(x, y, mdl.params)
        drift_y = mdl.B @ y + mdl.g(x, y, mdl.params)
        x = x + dt * drift_x
        y = y + dt_over_eps * drift_y + noise_coef * dw[k]
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))) or (
            max(np.max(np.abs(x)), np.max(np.abs(y))) > DIVERGENCE_THRESHOLD
        ):
            t_bad = grid.t_start + (k + 1) * dt
            raise DivergenceError(
                f"state diverged at step {k + 1} (t={t_bad:.6g}): "
                f"|x|={np.max(np.abs(x)):.3g}, |y|={np.max(np.abs(y)):.3g}",
                step=k + 1,
                time=t_bad,
            )
        slow[k + 1], fast[k + 1] = x, y
    return Trajectory(grid=grid, slow=slow, fast=fast)


def _example_euler(a, eps, sigma, slow_rate, coupling, x0, y0, dt, n_steps,
                   increments, record_indices=None):
    """Columnwise Euler-Maruyama for the example dynamics.

    ``a`` may be a scalar or a per-column array, which lets one call step
    every Monte-Carlo sample of a whole simplex iteration at once.  The
    per-step arithmetic mirrors :func:`simulate_full` exactly so a single
    column reproduces the generic integrator bit for bit.
    """
    check_step_size(dt, eps)
    dw = np.asarray(increments, dtype=np.float64)
    if dw.ndim != 2 or dw.shape[0] != n_steps:
        raise DomainError(f"increments shape {dw.shape} != (n_steps={n_steps}, P)")
    n_paths = dw.shape[1]
    if record_indices is None:
        record_indices = np.arange(n_steps + 1)
    rec = np.asarray(record_indices, dtype=np.int64)
    rec_pos = {int(k): i for i, k in enumerate(rec)}
    a = np.asarray(a, dtype=np.float64)
    dt_over_eps = dt / eps
    noise_coef = sigma / math.sqrt(eps)
    x = np.full(n_paths, float(x0))
    y = np.full(n_paths, float(y0))
    xs = np.empty((rec.size, n_paths))
    ys = np.empty((rec.size, n_paths))
    if 0 in rec_pos:
        xs[rec_pos[0]] = x
        ys[rec_pos[0]] = y
    check_every = 250
    for k in range(n_steps):
        drift_x = slow_rate * x + -a * x * y
        drift_y = -y + coupling * (x * x)
        x = x + dt * drift_x
        y = y + dt_over_eps * drift_y + noise_coef * dw[k]
        if (k + 1) % check_every == 0 or k == n_steps - 1:
            with np.errstate(invalid="ignore"):
                bad = ~np.isfinite(x) | ~np.isfinite(y)
                bad |= (np.abs(x) > DIVERGENCE_THRESHOLD) | (np.abs(y) > DIVERGENCE_THRESHOLD)
            if np.any(bad):
                raise DivergenceError(
                    f"{int(np.sum(bad))} path(s) diverged by step {k + 1}",
                    step=k + 1,
                )
        if (k + 1) in rec_pos:
            i = rec_pos[k + 1]
            xs[i] = x
            ys[i] = y
    return xs, ys


def simulate_full_ensemble(
    example: ExampleModel,
    x0: float,
    y0: float,
    dt: float,
    n_steps: int,
    increments: np.ndarray,
    record_indices=None,
):
    """Vectorized Euler-Maruyama for the example system over path columns.

    ``increments`` has shape (n_steps, P).  Returns ``(xs, ys)`` with shape
    (len(record_indices), P); by default every node is recorded.
    """
    if not isinstance(example, ExampleModel):
        raise ConfigurationError("ensemble kernel is specific to the example model")
    return _example_euler(
        example.a, example.eps, example.sigma, example.slow_rate, example.coupling,
        x0, y0, dt, n_steps, increments, record_indices,
    )


def transform_random(traj: Trajectory, eta: StationaryPath, sigma: float) -> Trajectory:
    """Random transformation (x, y) -> (X, Y) = (x, y - sigma * eta(t)).

    Applying the transform with ``-sigma`` inverts it; the subtraction is
    done in extended precision so the round trip is bit-identical at the
    magnitudes produced by the simulations here.
    """
    if eta.grid != traj.grid:
        raise DomainError("trajectory and stationary path grids differ")
    shift = (np.asarray(sigma, dtype=np.longdouble)
             * eta.values.astype(np.longdouble))
    fast = (traj.fast.astype(np.longdouble) - shift).astype(np.float64)
    return Trajectory(grid=traj.grid, slow=traj.slow, fast=fast)


@dataclass(frozen=True)
class AbsorbingReport:
    """Result of the mean-square absorbing-set diagnostic."""

    times: np.ndarray
    lyapunov: np.ndarray  # ensemble mean of the quadratic functional V(t)
    bound: np.ndarray  # V(0) e^{-t/eps} + offset
    offset: float
    max_ratio: float
    n_violations: int

    def to_dict(self) -> dict:
        return {
            "offset": self.offset,
            "max_ratio": self.max_ratio,
            "n_violations": self.n_violations,
            "n_times": int(self.times.size),
        }


def absorbing_bound_offset(example: ExampleModel) -> float:
    """Constant part of the mean-square bound: 2/(a eps^2) + 2 a eps^2 sigma^2."""
    a, eps, sig = example.a, example.eps, example.sigma
    return 2.0 / (a * eps * eps) + 2.0 * a * eps * eps * sig * sig


def absorbing_diagnostic(example: ExampleModel, ensemble) -> AbsorbingReport:
    """Check the Gronwall mean-square bound along an ensemble.

    V(t) = mean over paths of (eps/300) x^2 + 2 a eps^2 (y - 1/(a eps^2))^2
    must satisfy V(t) <= V(0) e^{-t/eps} + offset at every node.
    """
    trajectories = list(ensemble)
    if not trajectories:
        raise DomainError("absorbing diagnostic needs a non-empty ensemble")
    grid = trajectories[0].grid
    for traj in trajectories[1:]:
        if traj.grid != grid:
            raise DomainError("ensemble trajectories must share one grid")
    a, eps = example.a, example.eps
    center = 1.0 / (a * eps * eps)
    v = np.zeros(grid.n_steps + 1)
    for traj in trajectories:
        x = traj.slow[:, 0]
        y = traj.fast[:, 0]
        v += (eps / 300.0) * x * x + 2.0 * a * eps * eps * (y - center) ** 2
    v /= len(trajectories)
    times = grid.nodes() - grid.t_start
    offset = absorbing_bound_offset(example)
    bound = v[0] * np.exp(-times / eps) + offset
    ratio = v / bound
    return AbsorbingReport(
        times=times,
        lyapunov=v,
        bound=bound,
        offset=offset,
        max_ratio=float(np.max(ratio)),
        n_violations=int(np.sum(v > bound)),
    )
