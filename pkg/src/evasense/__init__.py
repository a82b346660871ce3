"""Cooperative multi-AP OFDM sensing toolkit.

Simulate monostatic echo tensors for a set of sensing access points,
localize multiple targets without cross-AP data association by fusing
noise-subspace projections over equivalent virtual arrays, and compare
Monte Carlo RMSE against the closed-form position error bound.
"""

from .crlb import (CrlbReport, FimBlocks, assemble_fim, crlb_position,
                   fim_blocks_bruteforce, fim_blocks_closed_form,
                   position_jacobian)
from .echo import (ChannelGain, EchoTensor, doppler_shift, gain_amplitude,
                   noise_sigma_for_snr, path_loss_db, radial_velocity,
                   random_beamformer, steering_delay, steering_doppler,
                   steering_spatial, synthesize_all, synthesize_echo)
from .errors import (EvaSenseError, InsufficientPeaks, InvalidAngle,
                     LengthMismatch, NonPositiveInput, PlacementFailure,
                     RankDeficientWarning, ScenarioFormatError,
                     SingularGeometry, ZeroRange)
from .estimator import (EstimatorConfig, LocalizationResult, RefineDiagnostics,
                        delay_only_localize, find_peaks, localize, refine_peak)
from .experiments import (OUTLIER_RADIUS_M, PlacementRule, SweepResult,
                          TrialRecord, assign_estimates, emit_csv, load_csv,
                          rmse, run_snr_sweep, run_target_sweep, run_trial)
from .geometry import (SPEED_OF_LIGHT, ApGeometry, TargetTruth, angle_jacobian,
                       candidate_delay, candidate_virtual_angle, delay_jacobian,
                       global_virtual_angle, local_angle_jacobian,
                       local_unit_direction, rotation_matrix, to_local,
                       wrap_angle)
from .scenario import (OfdmParams, ScenarioConfig, five_ap_circle_scenario,
                       load_scenario, save_scenario, scenario_from_dict,
                       scenario_to_dict, with_subcarriers, with_targets)
from .subspace import (NoiseProjector, SpectrumGrid, UnfoldedData, delay_unfold,
                       eva_steering, fused_spectrum, fused_spectrum_batch,
                       mode2_unfold, noise_subspace, projector_from_tensor,
                       refold, sample_covariance, spectrum_grid)

__version__ = "0.1.0"
