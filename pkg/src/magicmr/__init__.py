"""Mediation analysis with Mendelian randomization from three GWAS summary
datasets: rerandomized instrument selection, winner's/loser's-curse and
measurement-error bias correction, joint direct/mediation effect estimation
with a valid covariance, comparator estimators, and a Monte Carlo harness.
"""

from .backend import active_backend
from .errors import (ConfigError, DegenerateDesignError, GwasParseError,
                     InsufficientInstrumentsError, MagicmrError,
                     NoCommonSnpsError, NumericalError, ValidationError)
from .estimators import (MediationEstimate, MvmrEstimate, DmvmrEstimate,
                         OracleEstimate, ReportRow, TwoStepEstimate, Z95,
                         apply_bh, bh_adjust, covariance_estimate,
                         dmvmr_estimate, magic_estimate, mvmr_estimate,
                         oracle_dmvmr, oracle_magic, plug_in_estimate,
                         report_rows, two_step_estimate)
from .gwas_io import GwasFile, HarmonizationLog, harmonize, read_gwas, write_gwas
from .normal import (MASS_FLOOR, TailPair, interval_mass, std_normal_cdf,
                     std_normal_pdf, std_normal_quantile)
from .panel import HarmonizedPanel, build_panel
from .selection import (BiasCorrectedPanel, SelectionConfig, SelectionOutcome,
                        bias_correct_exposure, bias_correct_mediator,
                        build_bc_panel, hard_threshold_sets, select_instruments)
from .simulation import (SimConfig, SimReport, TruthPanel, config_for_ratio,
                         generate_observed, generate_truth,
                         oracle_efficiency_bench, run_monte_carlo,
                         run_replicates, summarize)

__version__ = "0.1.0"

__all__ = [
    "__version__", "active_backend",
    # errors
    "MagicmrError", "ValidationError", "ConfigError", "GwasParseError",
    "NoCommonSnpsError", "NumericalError", "InsufficientInstrumentsError",
    "DegenerateDesignError",
    # normal primitives
    "std_normal_pdf", "std_normal_cdf", "std_normal_quantile", "TailPair",
    "interval_mass", "MASS_FLOOR",
    # panel / selection / bias correction
    "HarmonizedPanel", "build_panel", "SelectionConfig", "SelectionOutcome",
    "BiasCorrectedPanel", "select_instruments", "hard_threshold_sets",
    "bias_correct_exposure", "bias_correct_mediator", "build_bc_panel",
    # estimators
    "MediationEstimate", "MvmrEstimate", "DmvmrEstimate", "TwoStepEstimate",
    "OracleEstimate", "magic_estimate", "covariance_estimate",
    "plug_in_estimate", "mvmr_estimate", "dmvmr_estimate",
    "two_step_estimate", "oracle_magic", "oracle_dmvmr", "bh_adjust",
    "ReportRow", "report_rows", "apply_bh", "Z95",
    # simulation
    "SimConfig", "SimReport", "TruthPanel", "generate_truth",
    "generate_observed", "run_replicates", "run_monte_carlo", "summarize",
    "oracle_efficiency_bench", "config_for_ratio",
    # gwas io
    "GwasFile", "HarmonizationLog", "read_gwas", "write_gwas", "harmonize",
]
