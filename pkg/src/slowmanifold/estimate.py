"""Monte-Carlo objectives and the stochastic Nelder-Mead estimation pipeline.

The unknown drift parameter ``a`` of the example system is recovered by
minimizing

    F(a)  = E sum_i sum_j [(x^i - xob^ij)^2 + (y^i - yob^ij)^2]   (full)
    FS(a) = E sum_i sum_j  (X^i - xob^ij)^2                       (slow)

where (x, y) solves the coupled system at candidate ``a``, X solves the
manifold-reduced slow system, and the expectation is approximated by the
mean over M fresh simulation paths (observations stay fixed).

Seed discipline: every random quantity derives from one master seed via
``numpy`` SeedSequence spawn keys, tagged by purpose:

* observation path j              -> (1, j)
* bare objective evaluation       -> (2,)
* SNM sample s of vertex v at k   -> (3, v, k, s)
* initial simplex vertices        -> (4,)
* global-search restart r         -> (5, r)

so reruns are bit-identical and independent of evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from .errors import ConfigurationError, DivergenceError
from .manifold import h_hat_example
from .model import DIVERGENCE_THRESHOLD, ExampleModel, _example_euler
from .noise import TimeGrid, root_seed, sample_wiener
from .reduced import slow_noise_direct

_OBS_TAG = 1
_MC_TAG = 2
_SNM_TAG = 3
_INIT_TAG = 4
_RESTART_TAG = 5


# ---------------------------------------------------------------------------
# observations


@dataclass(frozen=True)
class ObservationMeta:
    """Everything needed to regenerate an observation set bit for bit."""

    a_true: float
    eps: float
    sigma: float
    slow_rate: float
    coupling: float
    dt: float
    seed: int
    x0: float
    y0: float

    def example(self) -> ExampleModel:
        return ExampleModel(
            a=self.a_true, eps=self.eps, sigma=self.sigma,
            slow_rate=self.slow_rate, coupling=self.coupling,
        )


@dataclass(frozen=True)
class ObservationSet:
    """Slow (and optionally fast) observations at times t_i over J samples."""

    times: np.ndarray  # (I,)
    x_ob: np.ndarray  # (I, J)
    y_ob: np.ndarray | None  # (I, J) when fast states were recorded
    meta: ObservationMeta

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.ndim != 1 or t.size == 0 or np.any(np.diff(t) <= 0):
            raise ConfigurationError("observation times must be strictly increasing")
        if self.x_ob.shape[0] != t.size:
            raise ConfigurationError("x_ob row count must match times")
        if self.y_ob is not None and self.y_ob.shape != self.x_ob.shape:
            raise ConfigurationError("y_ob shape must match x_ob")
        object.__setattr__(self, "times", t)

    @property
    def n_times(self) -> int:
        return self.times.size

    @property
    def n_samples(self) -> int:
        return self.x_ob.shape[1]


def observation_indices(times, dt: float) -> np.ndarray:
    """Node indices of the t_i on a grid of step dt; all must land exactly."""
    times = np.asarray(times, dtype=np.float64)
    ratio = times / dt
    idx = np.round(ratio).astype(np.int64)
    bad = np.abs(ratio - idx) > 1e-6
    if np.any(bad):
        t_bad = times[bad][0]
        raise ConfigurationError(
            f"observation time {t_bad} is not a node of the dt={dt} grid; "
            f"pick dt so every t_i / dt is an integer (e.g. dt={t_bad / max(1, round(t_bad / dt)):.3g})"
        )
    return idx


def default_observation_times(horizon: float = 1.0, count: int = 50) -> np.ndarray:
    """I equispaced instants in (0, horizon]."""
    return horizon * np.arange(1, count + 1) / count


def generate_observations(example: ExampleModel, x0, y0, times, n_samples: int,
                          seed, dt: float | None = None,
                          include_fast: bool = True) -> ObservationSet:
    """Simulate J independent full-system paths and record them at the t_i.

    Path j uses the spawn key (1, j) of the master seed, so the set is
    reproducible bit for bit from its metadata.
    """
    if n_samples < 1:
        raise ConfigurationError("need at least one observation sample")
    dt = example.eps / 50.0 if dt is None else dt
    times = np.asarray(times, dtype=np.float64)
    if times.size == 0 or np.any(times < 0):
        raise ConfigurationError("observation times must be nonnegative")
    idx = observation_indices(times, dt)
    n_steps = int(idx[-1])
    grid = TimeGrid(0.0, dt, n_steps)
    master = root_seed(seed)
    cols = []
    for j in range(n_samples):
        ss = np.random.SeedSequence(master, spawn_key=(_OBS_TAG, j))
        cols.append(sample_wiener(grid, 1, ss).increments[:, 0])
    increments = np.column_stack(cols) if n_steps > 0 else np.zeros((0, n_samples))
    xs, ys = _example_euler(
        example.a, example.eps, example.sigma, example.slow_rate, example.coupling,
        x0, y0, dt, n_steps, increments, record_indices=idx,
    )
    meta = ObservationMeta(
        a_true=example.a, eps=example.eps, sigma=example.sigma,
        slow_rate=example.slow_rate, coupling=example.coupling,
        dt=dt, seed=master, x0=float(x0), y0=float(y0),
    )
    return ObservationSet(
        times=times, x_ob=xs, y_ob=ys if include_fast else None, meta=meta
    )


# ---------------------------------------------------------------------------
# objectives


@dataclass(frozen=True)
class ObjectiveSpec:
    """How to evaluate one of the fit objectives against an observation set."""

    system: str  # "full" or "slow"
    obs: ObservationSet
    m_paths: int = 30
    seed: int = 0
    common_random_numbers: bool = False
    dt_slow: float = 0.01
    dtau_fast: float = 0.02
    time_shift_eta: bool = False
    tail_tol: float = 1e-8

    def __post_init__(self):
        if self.system not in ("full", "slow"):
            raise ConfigurationError(f"unknown system {self.system!r}")
        if self.m_paths < 1:
            raise ConfigurationError("m_paths must be >= 1")


def _residual_sum(sim: np.ndarray, ob: np.ndarray) -> float:
    """sum_{i,j,p} (sim[i,p] - ob[i,j])^2 without forming the I*J*P tensor."""
    n_paths = sim.shape[1]
    n_obs = ob.shape[1]
    sim_sq = np.sum(sim * sim, axis=1)
    ob_sq = np.sum(ob * ob, axis=1)
    cross = np.sum(sim, axis=1) * np.sum(ob, axis=1)
    return float(np.sum(n_obs * sim_sq - 2.0 * cross + n_paths * ob_sq))


def _mc_seed(spec: ObjectiveSpec, sample_seed) -> np.random.SeedSequence:
    if sample_seed is None:
        return np.random.SeedSequence(root_seed(spec.seed), spawn_key=(_MC_TAG,))
    if isinstance(sample_seed, np.random.SeedSequence):
        return sample_seed
    return np.random.SeedSequence(root_seed(sample_seed))


def _full_values(a_cols: np.ndarray, spec: ObjectiveSpec, seeds) -> np.ndarray:
    """Full-system observation-time states for stacked samples.

    ``a_cols`` holds one candidate value per sample; each sample expands to
    ``m_paths`` columns driven by its own seed (or by the observation
    paths' seeds under common random numbers).
    """
    meta = spec.obs.meta
    m = spec.m_paths
    idx = observation_indices(spec.obs.times, meta.dt)
    n_steps = int(idx[-1])
    blocks = []
    for ss in seeds:
        if spec.common_random_numbers:
            n_obs = spec.obs.n_samples
            cols = []
            grid = TimeGrid(0.0, meta.dt, n_steps)
            for p in range(m):
                obs_ss = np.random.SeedSequence(
                    meta.seed, spawn_key=(_OBS_TAG, p % n_obs)
                )
                cols.append(sample_wiener(grid, 1, obs_ss).increments[:, 0])
            blocks.append(np.column_stack(cols))
        else:
            gen = np.random.Generator(np.random.Philox(ss))
            blocks.append(ndtri(gen.random((n_steps, m))) * math.sqrt(meta.dt))
    increments = np.concatenate(blocks, axis=1)
    a_row = np.repeat(np.asarray(a_cols, dtype=np.float64), m)
    return _example_euler(
        a_row, meta.eps, meta.sigma, meta.slow_rate, meta.coupling,
        meta.x0, meta.y0, meta.dt, n_steps, increments, record_indices=idx,
    )


def objective_full_batch(a_values, spec: ObjectiveSpec, seeds) -> np.ndarray:
    """F(a) for several candidates at once (one column block per sample)."""
    if spec.obs.y_ob is None:
        raise ConfigurationError(
            "the full-system objective needs fast observations"
        )
    a_values = np.atleast_1d(np.asarray(a_values, dtype=np.float64))
    m = spec.m_paths
    try:
        xs, ys = _full_values(a_values, spec, seeds)
    except DivergenceError:
        return _batch_with_fallback(a_values, spec, seeds, _single_full)
    out = np.empty(a_values.size)
    for i in range(a_values.size):
        sl = slice(i * m, (i + 1) * m)
        out[i] = (
            _residual_sum(xs[:, sl], spec.obs.x_ob)
            + _residual_sum(ys[:, sl], spec.obs.y_ob)
        ) / m
    return out


def _single_full(a, spec, ss):
    try:
        xs, ys = _full_values(np.array([a]), spec, [ss])
    except DivergenceError:
        return math.inf
    return (
        _residual_sum(xs, spec.obs.x_ob) + _residual_sum(ys, spec.obs.y_ob)
    ) / spec.m_paths


def _batch_with_fallback(a_values, spec, seeds, single) -> np.ndarray:
    # one diverging candidate must not poison the whole batch
    return np.array([single(float(a), spec, ss) for a, ss in zip(a_values, seeds)])


def objective_full(a: float, spec: ObjectiveSpec, sample_seed=None) -> float:
    """Monte-Carlo full-system objective F(a); divergence maps to +inf."""
    return float(_single_full(float(a), spec, _mc_seed(spec, sample_seed)))


def _slow_values(a_cols, spec: ObjectiveSpec, seeds) -> np.ndarray:
    """Reduced-system states at observation times for stacked samples.

    One column per (sample, Monte-Carlo path); the candidate value enters
    both the reduced drift and the manifold coefficients of its columns.
    """
    meta = spec.obs.meta
    m = spec.m_paths
    idx = observation_indices(spec.obs.times, spec.dt_slow)
    n_steps = int(idx[-1])
    grid = TimeGrid(0.0, spec.dt_slow, n_steps)
    example = meta.example()
    series_list = [
        slow_noise_direct(example, grid, ss, dtau=spec.dtau_fast,
                          n_paths=m, tail_tol=spec.tail_tol)
        for ss in seeds
    ]
    eta0 = np.concatenate([s.eta0 for s in series_list])
    i_se = np.concatenate([s.i_se for s in series_list], axis=1)
    eta = np.concatenate([s.eta for s in series_list], axis=1)
    a_row = np.repeat(np.atleast_1d(np.asarray(a_cols, dtype=np.float64)), m)
    eps, sigma = meta.eps, meta.sigma
    rate, coupling = meta.slow_rate, meta.coupling
    x = np.full(a_row.size, meta.x0)
    rec_pos = {int(k): i for i, k in enumerate(idx)}
    out = np.empty((idx.size, x.size))
    if 0 in rec_pos:
        out[rec_pos[0]] = x
    for k in range(n_steps):
        h_val = h_hat_example(x, a_row, eps, sigma, i_se[k], rate, coupling)
        eta_k = eta[k] if spec.time_shift_eta else eta0
        h_full = sigma * eta_k + h_val
        x = x + spec.dt_slow * (rate * x + -a_row * x * h_full)
        if (k + 1) % 10 == 0 or k == n_steps - 1:
            with np.errstate(invalid="ignore"):
                if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_THRESHOLD:
                    raise DivergenceError(
                        f"slow candidate run diverged by step {k + 1}", step=k + 1
                    )
        if (k + 1) in rec_pos:
            out[rec_pos[k + 1]] = x
    return out


def objective_slow_batch(a_values, spec: ObjectiveSpec, seeds) -> np.ndarray:
    """Reduced-system objective FS(a) for several candidates at once."""
    if spec.common_random_numbers:
        raise ConfigurationError(
            "common random numbers are only supported for the full objective"
        )
    a_values = np.atleast_1d(np.asarray(a_values, dtype=np.float64))
    m = spec.m_paths
    try:
        xs = _slow_values(a_values, spec, seeds)
    except DivergenceError:
        return _batch_with_fallback(a_values, spec, seeds, _single_slow)
    return np.array([
        _residual_sum(xs[:, i * m : (i + 1) * m], spec.obs.x_ob) / m
        for i in range(a_values.size)
    ])


def _single_slow(a, spec, ss):
    try:
        xs = _slow_values(np.array([a]), spec, [ss])
    except DivergenceError:
        return math.inf
    return _residual_sum(xs, spec.obs.x_ob) / spec.m_paths


def objective_slow(a: float, spec: ObjectiveSpec, sample_seed=None) -> float:
    """Monte-Carlo reduced-system objective FS(a); divergence maps to +inf."""
    if spec.common_random_numbers:
        raise ConfigurationError(
            "common random numbers are only supported for the full objective"
        )
    return float(_single_slow(float(a), spec, _mc_seed(spec, sample_seed)))


def objective_grid(spec: ObjectiveSpec, a_values) -> np.ndarray:
    """Plain grid evaluation of the selected objective (for landscape plots)."""
    a_values = np.asarray(a_values, dtype=np.float64)
    seeds = [
        np.random.SeedSequence(root_seed(spec.seed), spawn_key=(_MC_TAG, i))
        for i in range(a_values.size)
    ]
    if spec.system == "full":
        return objective_full_batch(a_values, spec, seeds)
    return objective_slow_batch(a_values, spec, seeds)


# ---------------------------------------------------------------------------
# Nelder-Mead machinery


def sample_schedule(k: int) -> int:
    """Per-iteration sample count N(k) = max(1, floor(sqrt(k)))."""
    if k < 1:
        raise ConfigurationError("iterations are counted from 1")
    return max(1, math.isqrt(k))


@dataclass
class _Vertex:
    point: np.ndarray
    vid: int
    mean: float = math.nan
    count: int = 0
    diverged: bool = False

    def add(self, value: float):
        if not math.isfinite(value):
            self.diverged = True
            self.count += 1
            return
        self.count += 1
        if self.count == 1:
            self.mean = value
        else:
            self.mean += (value - self.mean) / self.count

    @property
    def value(self) -> float:
        return math.inf if self.diverged else self.mean


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    best_point: tuple
    best_value: float
    simplex: tuple  # ((point, value), ...) sorted ascending


@dataclass
class EstimationResult:
    """Outcome of one simplex search."""

    estimator: float | tuple
    best_objective: float
    trace: list
    termination: str  # "tolerance", "max_iter", or "stall"
    n_evaluations: int
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.trace)


@dataclass(frozen=True)
class NelderMeadOptions:
    tol_x: float = 1e-4
    tol_f: float = 1e-6
    max_iter: int = 500


@dataclass(frozen=True)
class SnmOptions:
    max_iter: int = 200
    stall_window: int = 20
    tol: float = 1e-3  # relative incumbent-average change over the window
    param_box: tuple | None = None
    seed: int = 0


def _as_points(initial_vertices):
    pts = [np.atleast_1d(np.asarray(p, dtype=np.float64)) for p in initial_vertices]
    d = pts[0].size
    if len(pts) != d + 1:
        raise ConfigurationError(
            f"{d}-dimensional search needs {d + 1} vertices, got {len(pts)}"
        )
    spread = np.stack([p - pts[0] for p in pts[1:]])
    if np.linalg.matrix_rank(spread, tol=1e-12) < d:
        raise ConfigurationError("degenerate initial simplex")
    return pts, d


def _scalar_arg(point: np.ndarray, d: int):
    return float(point[0]) if d == 1 else point


def _nm_move(handles, make_candidate):
    """One simplex update on value-sorted handles.

    Returns the new handle list and the accepted move name (None on
    shrink, which does not count as an accepted move for stall purposes).
    """
    worst = handles[-1]
    centroid = np.mean([h.point for h in handles[:-1]], axis=0)
    direction = centroid - worst.point
    hr = make_candidate(centroid + direction)
    if handles[0].value <= hr.value < handles[-2].value:
        return handles[:-1] + [hr], "reflect"
    if hr.value < handles[0].value:
        he = make_candidate(centroid + 2.0 * direction)
        if he.value < hr.value:
            return handles[:-1] + [he], "expand"
        return handles[:-1] + [hr], "reflect"
    if hr.value < handles[-1].value:
        hoc = make_candidate(centroid + 0.5 * direction)
        if hoc.value <= hr.value:
            return handles[:-1] + [hoc], "contract_outside"
    else:
        hic = make_candidate(centroid - 0.5 * direction)
        if hic.value < handles[-1].value:
            return handles[:-1] + [hic], "contract_inside"
    best = handles[0]
    shrunk = [best] + [
        make_candidate(best.point + 0.5 * (h.point - best.point))
        for h in handles[1:]
    ]
    return shrunk, None


def _sorted_handles(handles):
    return sorted(handles, key=lambda h: (h.value, h.vid))


def _snapshot(handles, d):
    return tuple(
        (tuple(float(v) for v in h.point), float(h.value)) for h in handles
    )


def nelder_mead(objective, initial_vertices, opts: NelderMeadOptions | None = None
                ) -> EstimationResult:
    """Deterministic Nelder-Mead with the standard move coefficients.

    Moves: reflection (1), expansion (2), outside/inside contraction (0.5),
    shrink (0.5).  Terminates when both the vertex spread and the value
    spread fall below tolerance, or at the iteration cap.  The objective
    need not be differentiable.
    """
    opts = opts or NelderMeadOptions()
    pts, d = _as_points(initial_vertices)
    n_evals = 0

    def make_vertex(point):
        nonlocal n_evals
        v = _Vertex(point=np.asarray(point, dtype=np.float64), vid=make_vertex.next_id)
        make_vertex.next_id += 1
        n_evals += 1
        v.add(float(objective(_scalar_arg(v.point, d))))
        return v

    make_vertex.next_id = 0
    handles = [make_vertex(p) for p in pts]
    trace = []
    termination = "max_iter"
    for _ in range(1, opts.max_iter + 1):
        handles = _sorted_handles(handles)
        best = handles[0]
        trace.append(TraceEntry(
            iteration=len(trace) + 1,
            best_point=tuple(float(v) for v in best.point),
            best_value=best.value,
            simplex=_snapshot(handles, d),
        ))
        spread_x = max(np.max(np.abs(h.point - best.point)) for h in handles)
        spread_f = handles[-1].value - best.value
        if spread_x < opts.tol_x and spread_f < opts.tol_f:
            termination = "tolerance"
            break
        handles, _ = _nm_move(handles, make_vertex)
    handles = _sorted_handles(handles)
    best = handles[0]
    est = _scalar_arg(best.point, d) if d == 1 else tuple(best.point)
    return EstimationResult(
        estimator=est,
        best_objective=best.value,
        trace=trace,
        termination=termination,
        n_evaluations=n_evals,
    )


def stochastic_nelder_mead(objective_sampler, initial_vertices,
                           opts: SnmOptions | None = None,
                           batch_sampler=None) -> EstimationResult:
    """Simplex search for noisy objectives with an increasing sample schedule.

    At iteration k every vertex - incumbents and fresh candidates alike -
    receives N(k) = max(1, floor(sqrt(k))) new samples that are folded into
    its running average; the simplex moves act on those averages.  A local
    stall (no accepted move for ``stall_window`` iterations) triggers the
    global search: the worst vertex restarts uniformly in ``param_box``
    while the incumbent is kept.  The search stops at ``max_iter`` or when
    the incumbent average has changed by less than ``tol`` (relative) over
    one stall window.

    ``objective_sampler(point, seed_sequence)`` must return one fresh noisy
    evaluation; ``batch_sampler([(point, seed), ...])`` may be supplied to
    evaluate many samples in one vectorized pass with identical results.
    """
    opts = opts or SnmOptions()
    pts, d = _as_points(initial_vertices)
    master = root_seed(opts.seed)
    n_evals = 0

    def run_batch(requests):
        # requests: list of (point ndarray, vertex, k, s); fixed order
        nonlocal n_evals
        n_evals += len(requests)
        seeds = [
            np.random.SeedSequence(master, spawn_key=(_SNM_TAG, vid, k, s))
            for _, vid, k, s in requests
        ]
        args = [_scalar_arg(p, d) for p, _, _, _ in requests]
        if batch_sampler is not None:
            return batch_sampler(args, seeds)
        return [objective_sampler(arg, ss) for arg, ss in zip(args, seeds)]

    next_id = 0

    def new_vertex(point):
        nonlocal next_id
        v = _Vertex(point=np.asarray(point, dtype=np.float64), vid=next_id)
        next_id += 1
        return v

    handles = [new_vertex(p) for p in pts]
    trace = []
    best_history = []
    stall_counter = 0
    n_restarts = 0
    termination = "max_iter"

    for k in range(1, opts.max_iter + 1):
        n_k = sample_schedule(k)
        refresh = [
            (h.point, h.vid, k, s) for h in handles for s in range(n_k)
        ]
        values = run_batch(refresh)
        pos = 0
        for h in handles:
            for _ in range(n_k):
                h.add(float(values[pos]))
                pos += 1

        def make_candidate(point):
            v = new_vertex(point)
            vals = run_batch([(v.point, v.vid, k, s) for s in range(n_k)])
            for val in vals:
                v.add(float(val))
            return v

        handles = _sorted_handles(handles)
        best = handles[0]
        trace.append(TraceEntry(
            iteration=k,
            best_point=tuple(float(v) for v in best.point),
            best_value=best.value,
            simplex=_snapshot(handles, d),
        ))
        best_history.append(best.value)
        if k > opts.stall_window and math.isfinite(best.value):
            then = best_history[-1 - opts.stall_window]
            if math.isfinite(then) and (
                abs(best.value - then) <= opts.tol * (1.0 + abs(best.value))
            ):
                termination = "stall"
                break

        handles, accepted = _nm_move(handles, make_candidate)
        if accepted is None:
            stall_counter += 1
        else:
            stall_counter = 0
        if stall_counter >= opts.stall_window:
            if opts.param_box is None:
                raise ConfigurationError(
                    "global search triggered but no parameter box is configured"
                )
            lo, hi = opts.param_box
            rng = np.random.Generator(np.random.Philox(
                np.random.SeedSequence(master, spawn_key=(_RESTART_TAG, n_restarts))
            ))
            n_restarts += 1
            handles = _sorted_handles(handles)
            fresh = new_vertex(rng.uniform(lo, hi, size=d))
            vals = run_batch([(fresh.point, fresh.vid, k, s) for s in range(n_k)])
            for val in vals:
                fresh.add(float(val))
            handles = handles[:-1] + [fresh]
            stall_counter = 0

    handles = _sorted_handles(handles)
    best = handles[0]
    est = _scalar_arg(best.point, d) if d == 1 else tuple(best.point)
    return EstimationResult(
        estimator=est,
        best_objective=best.value,
        trace=trace,
        termination=termination,
        n_evaluations=n_evals,
        meta={"n_restarts": n_restarts},
    )


# ---------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class EstimationSettings:
    """Knobs of the end-to-end estimation run."""

    m_paths: int = 30
    init_box: tuple = (0.01, 2.0)
    seed: int = 0
    max_iter: int = 200
    stall_window: int = 20
    tol: float = 1e-3
    dt_slow: float = 0.01
    dtau_fast: float = 0.02
    common_random_numbers: bool = False
    time_shift_eta: bool = False


def estimate_parameter(system: str, obs: ObservationSet,
                       settings: EstimationSettings | None = None
                       ) -> EstimationResult:
    """Recover the drift parameter from observations via the SNM search.

    Two initial guesses are drawn uniformly from the configured box, then
    the stochastic Nelder-Mead minimizes the full-system objective (a_E)
    or the reduced-system objective (a_E^S).
    """
    settings = settings or EstimationSettings()
    if system == "full" and obs.y_ob is None:
        raise ConfigurationError("full-system estimation needs fast observations")
    spec = ObjectiveSpec(
        system=system,
        obs=obs,
        m_paths=settings.m_paths,
        seed=settings.seed,
        common_random_numbers=settings.common_random_numbers,
        dt_slow=settings.dt_slow,
        dtau_fast=settings.dtau_fast,
        time_shift_eta=settings.time_shift_eta,
    )
    master = root_seed(settings.seed)
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(master, spawn_key=(_INIT_TAG,))
    ))
    lo, hi = settings.init_box
    vertices = rng.uniform(lo, hi, size=2)

    if system == "full":
        def batch(args, seeds):
            return objective_full_batch(np.array(args), spec, seeds)
        sampler = lambda a, ss: objective_full(a, spec, ss)  # noqa: E731
    else:
        def batch(args, seeds):
            return objective_slow_batch(np.array(args), spec, seeds)
        sampler = lambda a, ss: objective_slow(a, spec, ss)  # noqa: E731

    opts = SnmOptions(
        max_iter=settings.max_iter,
        stall_window=settings.stall_window,
        tol=settings.tol,
        param_box=settings.init_box,
        seed=settings.seed,
    )
    result = stochastic_nelder_mead(sampler, list(vertices), opts,
                                    batch_sampler=batch)
    result.meta.update({
        "system": system,
        "seed": master,
        "initial_vertices": [float(v) for v in vertices],
        "m_paths": settings.m_paths,
        "a_true": obs.meta.a_true,
    })
    return result
