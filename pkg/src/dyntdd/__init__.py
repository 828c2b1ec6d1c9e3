"""Monte Carlo and deterministic-equivalent analysis of dynamic-TDD massive MIMO."""

from .channel import (ChannelRealization, ChannelStatistics, ScenarioConfig, TrainingOutput,
                      build_scenario_statistics, conditional_ut_channel_moments,
                      exponential_correlation, los_matrix, sample_channels, simulate_training)
from .detequiv import (fixed_point_gamma, gamma_prime, prop1_bs2bs_approx, prop2_closed_form,
                       validate_assumptions)
from .errors import (DegenerateScenarioError, InvalidCellError, InvalidInputError,
                     InvalidRegularizerError, NonConvergenceError, NotPSDError)
from .harness import find_crossover, reproduce_figure, run_sweep
from .metrics import (bs2bs_interference_mc, dl_rate, dl_sinr_breakdown, ul_ergodic_rate,
                      ul_sinr_breakdown)
from .transceiver import estimate_power_normalization, mmse_detectors, rzf_precoder_unnormalized

__version__ = "0.1.0"
