"""Pilot design and two-stage hybrid-field XL-MIMO channel estimation."""

__version__ = "0.1.0"

from .config import SystemConfig, config_from_mapping, load_config_file
from .channel import (
    rayleigh_distance, far_steering, near_steering, element_distances,
    angular_dictionary, polar_dictionary, polar_grid, transform_dictionary,
    los_channel, los_template, synth_hybrid_channel, receive_pilots,
    HybridChannel,
)
from .pilot_design import (
    mutual_coherence, coherence_vector, CoherenceVector, prox_inf_norm,
    coherence_objective, coherence_objective_grad, tangent_project,
    riemannian_step, admm_pilot_design, AdmmSchedule, AdmmState,
    baseline_pilot, save_pilot, load_pilot,
)
from .los import (
    los_objective, coarse_grid_search, gradient_descent_los, estimate_los,
    LosSearchConfig, LosEstimate,
)
from .scattering import (
    SparsityPattern, BmpPriors, make_priors, pattern_log_posterior,
    bmp_with_prior, bmp_without_prior, mmse_given_pattern,
    exhaustive_map_pattern, hf_omp_baseline, genie_ls,
)
from .harness import (
    nmse, spectral_efficiency, run_point, run_sweep, write_results,
    SweepSpec, SweepResult, FrameSpec, make_workspace,
)
from .errors import ConfigError, NumericalError
