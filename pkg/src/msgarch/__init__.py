"""Bayesian Markov-switching GARCH estimation with multi-move multipoint Gibbs."""

__version__ = "0.1.0"

from .auxiliary import AuxKind, AuxState, aux_init, aux_step, one_step_smoothed, \
    prob_prev_given_curr
from .chain import ChainState
from .diagnostics import ChainTrace, acf, classify_regimes, inefficiency_factor, kde, \
    mse, relative_inefficiency, summary_stats
from .ffbs import FilterOutput, UniformBlock, backward_antithetic_sample, \
    backward_sample, forward_filter, permuted_displacement, proposal_logdensity
from .model import (ModelParams, ObservationSeries, RegimeParams, StatePath,
                    TransitionMatrix, VarianceInit, exact_likelihood_enumerate,
                    make_params, path_conditional_logdensity, simulate_dgp,
                    stationary_distribution, transition_logprob, variance_path)
from .param_samplers import (PriorSpec, TransitionCounts, count_transitions,
                             mvn_box_prob, prior_logdensity, sample_transition,
                             truncated_mvn_gibbs, update_garch_block, update_mu)
from .run import (ConfigError, RunConfig, RunResult, SamplerSpec, emit_results,
                  gibbs_run, ingest_csv, load_config, parse_config, run_compare)
from .state_samplers import (StateUpdateReport, TrialSet, importance_log_weight,
                             mctm_update, mtm_update, mtmis_update, single_move_sweep)
from .stochastics import (RandomStream, draw_categorical, draw_dirichlet,
                          draw_std_normal, draw_trunc_normal, draw_uniform)

__all__ = [name for name in dir() if not name.startswith("_")]
