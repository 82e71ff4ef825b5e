"""Antenna-layout-aware spatial covariance estimation for multi-cell massive MIMO."""

from .corrmodel import (CorrelationParams, build_q, exp_correlation_matrix,
                        kronecker_covariance, layout_covariance)
from .downlink import SinrReport, precoder, sinr_monte_carlo, spectral_efficiency
from .estimators import (EstimatorKind, ala, ala_generic, ala_ula, ala_upa, estimate_pair,
                         optimal_kappa, viaq)
from .geometry import (AntennaCoord, AntennaLayout, LayoutError, PairClass, coord_to_index,
                       equivalence_classes, index_to_coord)
from .mmse import SingularMatrixError, error_covariance, mmse_estimate, normalized_mse
from .sampling import (PilotObservation, draw_channel, observe_uplink, sample_q, sample_r,
                       wishart_sample)
from .scenario import NetworkScenario, ScenarioParams, build_seven_cell, draw_aoas

__version__ = "0.1.0"
