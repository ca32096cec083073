"""Physical-layer transmitter authentication from multipath channel responses."""

from .authenticator import (
    NoiseBudget,
    TestConfig,
    TestOutcome,
    analytic_rates,
    authenticate,
    decision_threshold,
    noise_variance,
    noncentrality,
    optimal_phase,
    simulate_measurement,
    test_statistic,
)
from .experiment import (
    PathCache,
    RoomGrid,
    SweepRow,
    SweepSpec,
    build_room_grid,
    evaluate_pair,
    monte_carlo_rates,
    room_sweep,
)
from .propagation import (
    FrequencyResponse,
    PathComponent,
    ProbeConfig,
    Scene,
    Surface,
    frequency_response,
    trace_paths,
)
from .scenario import Scenario, emit_results, load_scenario
from .special import chi2_cdf, chi2_quantile, noncentral_chi2_cdf, regularized_lower_gamma

__version__ = "0.1.0"
