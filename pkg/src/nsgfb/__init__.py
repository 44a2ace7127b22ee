"""Nonsubsampled graph filter banks with distributed least-squares reconstruction."""

from .distributed import (IterationTrace, jacobi_reference, local_solve, patch,
                          run_distributed, verify_contraction)
from .estimators import GraphDenoiser, GraphFilterBank
from .exceptions import (BoundViolated, BudgetExceeded, CommonRoot, ConvergenceFailure,
                         Degenerate, DimensionMismatch, Diverged, InvariantViolation, KappaOne,
                         LocalSingular, MissingCoordinates, MissingLabels, NotPositiveDefinite,
                         NSGFBError, ParseError, RetriesExhausted, ZeroReference)
from .filterbank import (AnalysisBank, StabilityReport, SynthesisBank, bezout_polynomials,
                         bezout_synthesis_general, bezout_synthesis_spline, check_assumptions,
                         lift, polynomial_analysis, reconstruction_residual, spline_analysis,
                         spline_bezout_polynomials)
from .graph import (Graph, GrowthProfile, NeighborhoodIndex, estimate_growth, generate_rgg,
                    geodesic_ball, load_edge_list, load_graph)
from .pipelines import (DenoiseConfig, ExperimentConfig, NoiseModel, SignalSpec, denoise,
                        hard_threshold, make_signal, run_table_experiment, snr)
from .spectral import (GraphFilter, Spectrum, apply_polynomial, eigendecompose,
                       laplacian_sym, materialize_polynomial)
from .synthesis_ls import (DecayCertificate, LsSynthesis, contraction_factor,
                           decay_certificate, ls_synthesis_dense, spline_ls_synthesis)

__version__ = "0.1.0"
