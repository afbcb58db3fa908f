"""Stochastic neighbor embedding on well-separated clusters, with numeric
certificates for every analytic guarantee the package relies on."""

__version__ = "0.1.0"

from snesep.affinity import (AffinityMatrix, BoundCheck, BoundReport, Scales,
                             affinity_bounds_check, input_affinities,
                             row_softmax_excluding_diag, theorem_scales, uniform_scales)
from snesep.certify import (CertificateReport, ChainCertificate, GeneralKernelReport,
                            LatticeCertificate, TheoremCertificate, certify_chain,
                            certify_general_kernel, certify_lattice_loss,
                            certify_theorem, lattice_embedding, lattice_loss_bound,
                            relaxed_threshold, report_to_dict, run_certification)
from snesep.core import (Dataset, Embedding, PreconditionError, SeparationCertificate,
                         ValidationError, distance_matrix, load_dataset, load_embedding,
                         pairwise_sq_dists, save_dataset, save_embedding,
                         separation_threshold, validate_dataset)
from snesep.datagen import (GeneratorSpec, SweepCell, SweepReport, generate,
                            save_sweep, separation_sweep)
from snesep.kernels import (AdmissibilityEvidence, KernelSpec, admissibility,
                            cauchy_kernel, default_grid, evaluate,
                            evaluate_derivative, exponential_kernel, gaussian_kernel,
                            grad_weight, kernel_label, log_evaluate, parse_kernel)
from snesep.objective import (CheckReport, LossValue, inverse_q_ball_check, loss,
                              loss_and_gradient, loss_at, loss_gradient,
                              output_affinities)
from snesep.optimizer import (OptimizationTrace, OptimizerConfig, OptimizerDivergence,
                              default_config, init_embedding, minimize, save_trace)
from snesep.quality import (QualityReport, build_quality_report, contiguity_report,
                            improved_upper, lemma_bounds, perfect_embedding,
                            quality_exact, quality_exact_excl_center, quality_mc,
                            theorem_upper)

__all__ = [name for name in dir() if not name.startswith("_")]
