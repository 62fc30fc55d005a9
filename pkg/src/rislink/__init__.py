"""Joint data detection and channel estimation for surface-assisted uplinks.

The package models a multi-user QPSK uplink through a reconfigurable
reflecting surface, estimates the direct and cascaded channels from an
encoded pilot plus the decoder's re-modulated output, tracks the estimates
across correlated fading blocks, and checks the Monte Carlo behaviour
against closed-form error expressions.
"""

from .analysis import (AnalyticInputs, RemodErrorModel, convergence_threshold,
                       effective_code_rate, flop_estimate, iterate_nmse,
                       nmse_coarse, nmse_recursion, nmse_refined_los,
                       nmse_refined_nlos, q_function, remod_error_stats,
                       tracking_gate, tracking_gate_rhs, tracking_nmse,
                       validate_appendix_traces)
from .channel import (CascadedChannel, ChannelRealization, cascade,
                      complex_gaussian, draw_channels, equivalent,
                      equivalent_sweep, evolve_markov, jakes_correlation)
from .detector import (DetectorOutput, IddResult, SoftStats, detect,
                       exact_extrinsic_llrs, idd_loop, sic_filter,
                       soft_symbols)
from .estimator import (EstimationState, EstimatorContext, PartitionedRx,
                        estimate_cascaded_coarse, estimate_direct, icce,
                        ict_step, lmmse_rowwise, refine_cascaded,
                        split_partitions)
from .geometry import (LinkBudget, SystemConfig, build_link_budget,
                       dbm_to_linear, noise_power_dbm, path_loss_db)
from .harness import (CSV_COLUMNS, EXPERIMENT_KINDS, ExperimentSpec,
                      ResultRow, ResultTable, inject_burst, run, run_tracking)
from .ldpc import DecodeResult, LdpcCode, build_code, decode, encode, syndrome
from .modem import (LambdaMatrix, Packet, PhaseSchedule, build_lambda,
                    build_packet, codeword_from_wire_bits, hadamard_order,
                    phase_schedule, pilot_symbol_matrix, qpsk_hard_demod,
                    qpsk_modulate, qpsk_soft_demod, wire_bit_order,
                    wire_from_codeword)
from .ris import ReflectionDesign, mmse_reflection, phase_project, reflection_mse

__version__ = "0.1.0"

__all__ = [
    "AnalyticInputs", "CSV_COLUMNS", "CascadedChannel", "ChannelRealization",
    "DecodeResult", "DetectorOutput", "EXPERIMENT_KINDS", "EstimationState",
    "EstimatorContext", "ExperimentSpec", "IddResult", "LambdaMatrix",
    "LdpcCode", "LinkBudget", "Packet", "PartitionedRx", "PhaseSchedule",
    "ReflectionDesign", "RemodErrorModel", "ResultRow", "ResultTable",
    "SoftStats", "SystemConfig", "build_code", "build_lambda",
    "build_link_budget", "build_packet", "cascade", "codeword_from_wire_bits",
    "complex_gaussian", "convergence_threshold", "dbm_to_linear", "decode",
    "detect", "draw_channels", "effective_code_rate", "encode", "equivalent",
    "equivalent_sweep", "estimate_cascaded_coarse", "estimate_direct",
    "evolve_markov", "exact_extrinsic_llrs", "flop_estimate",
    "hadamard_order", "icce", "ict_step", "idd_loop", "inject_burst",
    "iterate_nmse", "jakes_correlation", "lmmse_rowwise", "mmse_reflection",
    "nmse_coarse", "nmse_recursion", "nmse_refined_los", "nmse_refined_nlos",
    "noise_power_dbm", "path_loss_db", "phase_project", "phase_schedule",
    "pilot_symbol_matrix", "q_function", "qpsk_hard_demod", "qpsk_modulate",
    "qpsk_soft_demod", "reflection_mse", "refine_cascaded",
    "remod_error_stats", "run", "run_tracking", "sic_filter", "soft_symbols",
    "split_partitions", "syndrome", "tracking_gate", "tracking_gate_rhs",
    "tracking_nmse", "validate_appendix_traces", "wire_bit_order",
    "wire_from_codeword",
]
