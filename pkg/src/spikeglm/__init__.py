"""Probabilistic spiking neural networks as discrete-time sigmoid GLMs.

Library layout:
  kernels            synaptic/feedback response kernels and basis banks
  network            topology, parameters, potentials, sampling, likelihood
  train_observed     maximum-likelihood learning, batch and streaming
  train_variational  hidden-neuron learning with a sampled lower bound
  coding             scalar/image/label spike encoders and decoders
  experiments        the two reference studies (classification, prediction)
  config, raster_io, figures, cli   plumbing around the above
"""

from .errors import (CapacityError, ConfigError, DataError, ParameterError,
                     SpikeGLMError, StructureError)
from .kernels import (BasisBank, Banks, Kernel, ar_exp_trace_step,
                      filter_traces, make_kernel, make_raised_cosine_bank,
                      make_stdp_bank, raised_cosine, raised_cosine_banks)
from .network import (NetworkParams, NetworkState, NeuronParams, Topology,
                      cond_log_prob, example_gradient, firing_prob,
                      flatten_params, free_raster, init_params,
                      log_likelihood, membrane_potential,
                      potentials_from_raster, roll_forward, rollout_from,
                      sample_spike, unflatten_params, zeros_like_params)
from .train_observed import (apply_step, batch_sgd_step, decay_into,
                             online_step, step_gradient, train_epochs)
from .train_variational import (LearningSignalState, StepRecord,
                                batch_doubly_sgd_step, elbo_exhaustive,
                                learning_signal, online_doubly_sgd_step,
                                posterior_sample, regularized_signal_summand,
                                sample_hidden_step, step_learning_signal,
                                update_baseline)
from .coding import (classify_decode, clipped_count, image_rate_encode,
                     label_rate_encode, level_value, make_receptive_fields,
                     quantize_level, rate_decode, rate_encode,
                     reset_clipped_count, time_decode, time_encode)
from .config import ExperimentConfig, build_config, default_config, load_config
from .experiments import (default_templates, gen_blocks, gen_sequence,
                          persistent_predict, run_batch_classify,
                          run_online_predict, synthetic_two_class_images,
                          tail_mae)
from .raster_io import (MetricSeries, load_checkpoint, load_image_dataset,
                        load_metrics, load_plan, load_raster, save_checkpoint,
                        save_image_dataset, save_raster)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
