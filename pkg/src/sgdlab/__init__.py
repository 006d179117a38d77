"""sgdlab: step-size schedules, momentum variants, and a verification harness."""

__version__ = "0.1.0"

from .errors import ContractError, ParameterError, ValidationError
from .problems import (NoiseModel, Problem, make_convex_lipschitz,
                       make_finite_sum_quadratic, make_pl_nonconvex,
                       make_problem, make_quadratic, register_problem,
                       sample_gradient)
from .schedules import (Constant, Cosine, CosineRestart, DelayedAdaGradCoord,
                        DelayedAdaGradGlobal, Exponential, FTRLGammaAdaCoord,
                        FTRLGammaAdaGlobal, FTRLGammaConstT, FTRLGammaSqrtT,
                        PolyPL, PolySqrt, Schedule, cosine_restart_plan,
                        exponential_alpha_from_horizon, schedule_from_config)
from .optimizers import (MomentumRule, Trace, example_ninety_expectation,
                         ftrl_equivalence_gap, run_anytime_o2b_ftrl,
                         run_delayed_adagrad_momentum, run_ftrl_sgdm, run_sgd,
                         run_sgdm)
from .adversarial import (LowerBoundCertificate, LowerBoundInstance,
                          eval_f, exact_trajectory, make_instance,
                          run_lower_bound)
from .analysis import (RateFit, adaptivity_report, fit_loglog_slope,
                       fit_semilog_slope, geometric_fit, lemma_suite,
                       loglog_slope_positive, select_iterate)
from .harness import (ExperimentConfig, ExperimentResult, config_hash,
                      load_config, run_experiment, sweep)

__all__ = [name for name in dir() if not name.startswith("_")]
