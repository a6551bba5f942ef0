"""Kernel history-matching workbench.

Calibrates simulators with high-dimensional output by comparing whole output
fields through a task-adapted kernel: experts label ensemble members
acceptable or not, a mixture kernel is fitted to respect those labels, kernel
PCA compresses the fields, Gaussian processes emulate the coefficients, and
implausibility cuts shrink the input space wave by wave.
"""

from .ensemble import (Design, Ensemble, Observation, OutputEnsemble,
                       center_outputs, load_design, load_ensemble,
                       load_ensemble_dir, load_observation, load_outputs,
                       save_design, save_ensemble, save_observation,
                       save_outputs, scale_inputs, unscale_inputs)
from .kernels import (CenteredKernelSystem, KernelSpec, WeightMatrix,
                      kernel_spec_from_text, kernel_spec_to_text,
                      mixture_from_sq_distance)
from .kpca import (KpcaBasis, basis_from_text, basis_to_text,
                   coefficients_from_text, coefficients_to_text, fit_kpca,
                   training_coefficients)
from .gp import (CoefficientEmulators, GpConfig, TrainedGp, coefficient_seed,
                 emulate_coefficients, emulators_from_text, emulators_to_text,
                 fit_gp, gp_from_text, gp_to_text, loo_predict)
from .implausibility import (ImplausibilityContext, build_context,
                             candidate_table_text, coefficient_implausibility,
                             derive_t2, derive_truncation_bound,
                             evaluate_candidates, implausibility_mean,
                             implausibility_scaled, standard_implausibility,
                             variable_threshold)
from .sampling import maximin_lhc
from .selection import (Classification, KernelFit, SearchSpace, cost,
                        kernel_fit_to_text, load_classification,
                        optimize_kernel, save_classification, save_i0_table,
                        t_star_star)
from .toysim import ToyConfig, auto_label, make_ensemble, make_observation
from .waves import (WaveConfig, WavePredicate, WaveRecord, WaveStageError,
                    load_wave, next_wave_design, nroy_fraction, run_wave,
                    save_wave, wave_report)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
