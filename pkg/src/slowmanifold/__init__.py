"""Parameter estimation for slow-fast stochastic systems on random slow manifolds."""

from .errors import (
    ConfigurationError,
    ConvergenceError,
    DivergenceError,
    DomainError,
    HypothesisViolationError,
    HypothesisWarning,
    SlowManifoldError,
    StiffnessError,
)
from .noise import (
    NoisePath,
    StationaryPath,
    TimeGrid,
    filtered_integrals,
    grid_from_horizon,
    ou_stationary_path,
    rescale_noise,
    sample_wiener,
    stationary_integral,
    truncation_horizon,
)
from .model import (
    ExampleModel,
    SlowFastModel,
    Trajectory,
    absorbing_diagnostic,
    simulate_full,
    simulate_full_ensemble,
    transform_random,
)
from .manifold import (
    AuxiliaryPath,
    ExampleManifold,
    ManifoldApprox,
    ManifoldNoise,
    full_manifold,
    h_1,
    h_d,
    h_hat,
    h_hat_example,
    quiet_window,
    sample_window,
    solve_y0,
    solve_y1,
    window_from_fast_path,
    window_from_slow_path,
)
from .reduced import (
    ExampleManifoldPath,
    GenericManifoldPath,
    SlowTrajectory,
    attraction_distance,
    simulate_slow,
    simulate_slow_ensemble,
    slow_noise_direct,
    slow_noise_from_path,
)
from .estimate import (
    EstimationResult,
    EstimationSettings,
    NelderMeadOptions,
    ObjectiveSpec,
    ObservationSet,
    SnmOptions,
    estimate_parameter,
    generate_observations,
    nelder_mead,
    objective_full,
    objective_grid,
    objective_slow,
    sample_schedule,
    stochastic_nelder_mead,
)

__version__ = "0.1.0"
