"""Numerical laboratory for compositions of standard-map-like torus maps
``F_n(x, y) = (f_n(x) - y, x)`` with growing coefficients."""

from .torus import CircleArc, DomainError, TorusPoint, arc_clip, circle_distance, torus_distance, wrap
from .family import (BadSet, CoefficientSchedule, Composition, ContractError, CriticalSet, MapFamily,
                     NumericError, ResolutionError, Stage, apply_forward, apply_inverse, bad_half_width,
                     bad_set, cocycle_norm_growth, critical_set, custom_family, in_bad_set, iterate,
                     jacobian, linear_test, stage_eval, trig_standard, validate_hypotheses)
from .curves import (CrossingDecomposition, HorizontalCurve, curve_equidistribution_error,
                     curve_integral, density_ratio, full_crossing_split, graph_transform_step,
                     horizontal_segment, iterate_crossing_split, seed_curve, tangent_distortion)
from .foliation import (Square, StatisticsError, StoppingRecords, compute_tau, compute_tau_bar,
                        proliferated_mass, survival_tail, track_sigma)
from .observables import Observable, TrigPolynomial, coboundary, custom, trig
from .stats import (QuadratureGrid, coboundary_identity_check, integrate, ks_statistic,
                    markov_apply_P, sigma_squared)
from .ensembles import (EnsembleSpec, birkhoff_ensemble, clt_ensemble, correlation,
                        finite_time_doc_scan, square_mixing)
from .results import ResultTable
from .runner import ConfigError, ExperimentConfig, emit_report, run

__version__ = "0.1.0"
