"""Variational training with hidden neurons.

Hidden neurons are sampled on the fly from the model's own causally
conditioned firing law, the feedforward posterior whose parameters are the
hidden neurons' model parameters themselves. That tying has two pleasant
consequences used throughout this module:

* the learning signal log p(observed, hidden) - log q(hidden | observed)
  collapses exactly to the sum of observed-neuron log probabilities along
  the sampled raster (the hidden factors cancel), and
* the ELBO gradient for hidden parameters is the expected product of that
  signal with the posterior score, estimable from single samples.

Observed neurons always follow their own likelihood gradient; hidden
neurons follow their score weighted by the (optionally baseline-centered)
learning signal. Subtracting the slowly averaged baseline leaves the
estimator's mean untouched because the score itself has zero mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit, logsumexp

from .errors import CapacityError, ParameterError, StructureError
from .network import (NetworkParams, _potentials, _raster_gradient,
                      _raster_inputs, check_raster, cond_log_prob, free_raster,
                      log_likelihood, roll_forward, step_potentials)
from .train_observed import (_check_decay, _check_rate, apply_step, decay_into,
                             step_gradient)


@dataclass
class LearningSignalState:
    """Running learning signal, its slow baseline, and the signal options.

    reg_strength folds the rate-regularization penalty into the signal
    summand (0 disables it); target_rate is the rate the penalty pulls
    hidden neurons toward. use_baseline toggles the control variate;
    baseline_step is its moving-average constant.
    """

    signal: float = 0.0
    baseline: float = 0.0
    baseline_step: float = 0.01
    use_baseline: bool = True
    reg_strength: float = 0.0
    target_rate: float = 0.1

    def __post_init__(self):
        if not 0 < self.baseline_step <= 1:
            raise ParameterError("baseline step must lie in (0, 1]")
        if self.reg_strength < 0:
            raise ParameterError("regularization strength must be >= 0")
        if not 0 < self.target_rate < 1:
            raise ParameterError("target rate must lie strictly inside (0, 1)")


class StepRecord(NamedTuple):
    """Diagnostics from one online variational step."""

    signal: float            # learning signal after this step's update
    baseline: float          # baseline value used for centering (0 when disabled)
    hidden_spikes: np.ndarray
    observed_log_prob: float


def step_learning_signal(previous, summand, trace_decay) -> float:
    """Geometric running average decay * previous + (1 - decay) * summand."""
    _check_decay(trace_decay)
    return trace_decay * previous + (1.0 - trace_decay) * summand


def regularized_signal_summand(observed_log_probs, hidden_spikes, hidden_probs,
                               reg_strength, target_rate) -> float:
    """Observed log-prob sum minus the rate penalty on this step's hidden spikes.

    The penalty per hidden neuron is h*log(p/r) + (1-h)*log((1-p)/(1-r))
    with p its firing probability and r the target rate: the realized
    spike's log-odds against a target-rate coin, zero whenever p equals r.
    """
    if reg_strength < 0:
        raise ParameterError("regularization strength must be >= 0")
    if not 0 < target_rate < 1:
        raise ParameterError("target rate must lie strictly inside (0, 1)")
    observed = float(np.sum(observed_log_probs))
    hidden_spikes = np.asarray(hidden_spikes, dtype=float)
    if reg_strength == 0 or hidden_spikes.size == 0:
        return observed
    probs = np.asarray(hidden_probs, dtype=float)
    if probs.shape != hidden_spikes.shape:
        raise StructureError("hidden spike and probability vectors disagree")
    with np.errstate(divide="ignore"):
        fire = np.log(probs) - np.log(target_rate)
        rest = np.log1p(-probs) - np.log1p(-target_rate)
    penalty = float(np.sum(np.where(hidden_spikes > 0, fire, rest)))
    return observed - reg_strength * penalty


def update_baseline(baseline, signal, baseline_step=0.01) -> float:
    """Slow moving average (1 - c) * baseline + c * signal."""
    if not 0 < baseline_step <= 1:
        raise ParameterError("baseline step must lie in (0, 1]")
    return (1.0 - baseline_step) * baseline + baseline_step * signal


def sample_hidden_step(topology, params, state, rng) -> np.ndarray:
    """Sample this step's hidden spikes from the causal firing law.

    One uniform draw per hidden neuron in ascending index order; no rng
    use at all when the network has no hidden neurons.
    """
    if topology.hidden.size == 0:
        return np.zeros(0, dtype=np.int8)
    ff, fb = state.traces()
    u = step_potentials(topology, params, ff, fb)
    probs = expit(u[topology.hidden] / state.bandwidth)
    return (rng.random(topology.hidden.size) < probs).astype(np.int8)


def online_doubly_sgd_step(topology, params, eligibility, signal_state, observed_spikes,
                           state, rng, learning_rate, trace_decay,
                           apply_update=True) -> StepRecord:
    """One step of streaming variational learning (all neurons at once).

    Order per step: compute potentials with the pre-update parameters,
    sample hidden spikes, refresh the learning signal from the observed
    log probabilities (regularized if configured), fold each neuron's
    gradient of its own realized bit into its eligibility, step observed
    neurons by the plain eligibility and hidden neurons by the centered
    signal times theirs, update the baseline, advance the state with the
    joint spike vector. observed_spikes follows the order of
    topology.observed. With no hidden neurons this is step-for-step the
    fully observed online rule.
    """
    _check_rate(learning_rate)
    _check_decay(trace_decay)
    observed_idx = topology.observed
    hidden_idx = topology.hidden
    observed_spikes = np.asarray(observed_spikes)
    if observed_spikes.shape != (observed_idx.size,):
        raise StructureError("observed spike vector length does not match the partition")
    ff, fb = state.traces()
    u = step_potentials(topology, params, ff, fb)
    bandwidth = state.bandwidth
    if hidden_idx.size:
        hidden_probs = expit(u[hidden_idx] / bandwidth)
        hidden_spikes = (rng.random(hidden_idx.size) < hidden_probs).astype(np.int8)
    else:
        hidden_probs = np.zeros(0)
        hidden_spikes = np.zeros(0, dtype=np.int8)
    spikes = np.empty(topology.n, dtype=np.int8)
    spikes[observed_idx] = observed_spikes
    spikes[hidden_idx] = hidden_spikes
    observed_lp = cond_log_prob(observed_spikes, u[observed_idx], bandwidth)
    summand = regularized_signal_summand(observed_lp, hidden_spikes, hidden_probs,
                                         signal_state.reg_strength,
                                         signal_state.target_rate)
    signal_state.signal = step_learning_signal(signal_state.signal, summand, trace_decay)
    baseline_used = signal_state.baseline if signal_state.use_baseline else 0.0
    modulator = signal_state.signal - baseline_used
    grad = step_gradient(topology, spikes, u, ff, fb, bandwidth)
    decay_into(eligibility, grad, trace_decay)
    if apply_update:
        scale = np.ones(topology.n)
        scale[hidden_idx] = modulator
        apply_step(params, eligibility, learning_rate, scale)
    if signal_state.use_baseline:
        signal_state.baseline = update_baseline(signal_state.baseline,
                                                signal_state.signal,
                                                signal_state.baseline_step)
    state.advance(spikes)
    return StepRecord(signal_state.signal, baseline_used, hidden_spikes,
                      float(np.sum(observed_lp)))


def learning_signal(topology, params, banks, bits, bandwidth=1.0) -> float:
    """Sum over time of observed-neuron log probabilities along a raster.

    For rasters whose hidden rows were drawn from the causal firing law
    this equals log p(observed, hidden) - log q(hidden | observed) exactly:
    the hidden factors of the two terms coincide and cancel.
    """
    bits, ff_prev, fb_prev = _raster_inputs(topology, banks, bits)
    u = _potentials(params, topology, ff_prev, fb_prev)
    observed = topology.observed
    return float(np.sum(cond_log_prob(bits[observed], u[observed], bandwidth)))


def posterior_sample(topology, params, banks, observed_bits, rng, bandwidth=1.0):
    """Draw one full raster with observed rows clamped, hidden rows sampled
    causally, and return (raster, learning signal, joint log-prob gradient).

    The gradient's observed rows are the likelihood gradient of the
    observed bits given the realized history; its hidden rows are the
    posterior score. This is the single-sample estimator both batch
    variational training and the unbiasedness checks are built from.
    """
    observed_bits = check_raster(observed_bits, topology.observed.size,
                                 name="observed raster")
    plan = free_raster(topology.n, observed_bits.shape[1])
    plan[topology.observed] = observed_bits
    joint = roll_forward(topology, params, banks, rng, clamped=plan,
                         bandwidth=bandwidth)
    bits, ff_prev, fb_prev = _raster_inputs(topology, banks, joint)
    u = _potentials(params, topology, ff_prev, fb_prev)
    observed = topology.observed
    signal = float(np.sum(cond_log_prob(bits[observed], u[observed], bandwidth)))
    err = (bits - expit(u / bandwidth)) / bandwidth
    grad = _raster_gradient(topology, err, ff_prev, fb_prev)
    return joint, signal, grad


def batch_doubly_sgd_step(topology, params, banks, observed_bits, rng, learning_rate,
                          hidden_learning_rate=None, baseline=0.0, bandwidth=1.0,
                          num_samples=1):
    """One whole-example doubly stochastic ascent step.

    Samples num_samples hidden rasters from the causal posterior, averages
    the single-sample estimators, then steps observed neurons by the plain
    likelihood gradient and hidden neurons by the baseline-centered
    full-horizon learning signal times their score. Returns
    (params, mean learning signal); the caller owns the baseline average,
    typically via update_baseline on the returned signal.
    """
    _check_rate(learning_rate)
    if hidden_learning_rate is None:
        hidden_learning_rate = learning_rate
    _check_rate(hidden_learning_rate)
    if num_samples < 1:
        raise ParameterError("num_samples must be >= 1")
    hidden = topology.hidden
    mean_signal = 0.0
    total = None
    for _ in range(num_samples):
        _, signal, grad = posterior_sample(topology, params, banks, observed_bits,
                                           rng, bandwidth)
        mean_signal += signal / num_samples
        scale = np.full(topology.n, learning_rate / num_samples)
        scale[hidden] = (hidden_learning_rate / num_samples) * (signal - baseline)
        if total is None:
            total = NetworkParams(scale * grad.bias,
                                  scale[:, None, None] * grad.ff_weights,
                                  scale[:, None] * grad.fb_weights)
        else:
            total.bias += scale * grad.bias
            total.ff_weights += scale[:, None, None] * grad.ff_weights
            total.fb_weights += scale[:, None] * grad.fb_weights
    apply_step(params, total, 1.0)
    return params, mean_signal


def elbo_exhaustive(topology, params, banks, observed_bits, bandwidth=1.0,
                    max_bits=20):
    """Exact ELBO and log likelihood by enumerating every hidden raster.

    Returns (elbo, loglik). The gap is the KL divergence from the causal
    posterior to the exact one, so elbo <= loglik always, with equality
    when there are no hidden neurons. Enumeration covers
    2^(n_hidden * steps) configurations and refuses to start beyond
    max_bits of them (CapacityError).
    """
    observed_bits = check_raster(observed_bits, topology.observed.size,
                                 name="observed raster")
    steps = observed_bits.shape[1]
    n_hidden = topology.hidden.size
    bits_needed = n_hidden * steps
    if bits_needed > max_bits:
        raise CapacityError(
            f"enumeration needs 2^{bits_needed} hidden rasters, over the 2^{max_bits} budget")
    if n_hidden == 0:
        value = log_likelihood(topology, params, banks, observed_bits, bandwidth)
        return value, value
    count = 1 << bits_needed
    codes = np.arange(count, dtype=np.int64)
    log_joint = np.empty(count)
    log_posterior = np.empty(count)
    hidden = topology.hidden
    chunk = max(1, min(count, 4096))
    for start in range(0, count, chunk):
        block = codes[start: start + chunk]
        flat = (block[:, None] >> np.arange(bits_needed, dtype=np.int64)) & 1
        rasters = np.empty((block.size, topology.n, steps), dtype=np.int8)
        rasters[:, topology.observed, :] = observed_bits
        rasters[:, hidden, :] = flat.reshape(-1, n_hidden, steps)
        u = _batched_potentials(topology, params, banks, rasters)
        lp = cond_log_prob(rasters, u, bandwidth)
        log_joint[start: start + chunk] = lp.sum(axis=(1, 2))
        log_posterior[start: start + chunk] = lp[:, hidden, :].sum(axis=(1, 2))
    loglik = float(logsumexp(log_joint))
    posterior = np.exp(log_posterior)
    elbo = float(posterior @ (log_joint - log_posterior))
    return elbo, loglik


def _bank_previous_traces(bank, bits):
    # bits: (m, n, steps) floats; returns the (m, n, size, steps) traces at t-1
    m, n, steps = bits.shape
    traces = np.zeros((m, n, bank.size, steps))
    matrix = bank.matrix
    for lag in range(min(matrix.shape[1], steps)):
        traces[:, :, :, lag:] += (matrix[None, None, :, lag, None]
                                  * bits[:, :, None, : steps - lag])
    previous = np.zeros_like(traces)
    previous[..., 1:] = traces[..., :-1]
    return previous


def _batched_potentials(topology, params, banks, rasters):
    # rasters: (m, n, steps); returns (m, n, steps) potentials
    m, n, steps = rasters.shape
    bits = rasters.astype(float)
    u = np.broadcast_to(params.bias[None, :, None], (m, n, steps)).copy()
    ff_previous = _bank_previous_traces(banks.ff, bits)
    active = topology.active
    if active.size:
        u[:, active, :] += np.einsum("ijk,cjkt->cit", params.ff_weights[active],
                                     ff_previous)
    fb_previous = _bank_previous_traces(banks.fb, bits)
    u += np.einsum("ik,cikt->cit", params.fb_weights, fb_previous)
    return u
