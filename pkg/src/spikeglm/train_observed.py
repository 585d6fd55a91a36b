"""Maximum-likelihood training for fully observed rasters.

Both entry points climb the raster log likelihood. The batch step consumes
one whole example per update; the online step folds each step's gradient
into a per-parameter eligibility trace (a geometric average with constant
trace_decay) and nudges parameters as the data streams past, so learning
and simulation share one pass. With trace_decay 0 and updates deferred,
the summed online steps equal the batch gradient exactly.

Eligibility traces start at zero and are meant to be reset between
examples or passes; the drivers here do that for you.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import DataError, ParameterError
from .network import (NetworkParams, _potentials, _raster_gradient, _raster_inputs,
                      cond_log_prob, example_gradient, step_potentials)


def _check_rate(learning_rate):
    if learning_rate < 0 or not np.isfinite(learning_rate):
        raise ParameterError("learning rate must be finite and >= 0")


def _check_decay(trace_decay):
    if not 0 <= trace_decay < 1:
        raise ParameterError("trace decay must lie in [0, 1)")


def step_gradient(topology, spikes, potentials, ff_traces, fb_traces,
                  bandwidth=1.0) -> NetworkParams:
    """One step's log-probability gradient for every neuron at once.

    Mirrors local_gradient across the network: the (n,) error vector is the
    bias gradient, its outer products with the trace blocks (masked to the
    wiring) are the weight gradients.
    """
    err = (spikes - expit(potentials / bandwidth)) / bandwidth
    dff = (err[:, None] * topology.mask)[:, :, None] * ff_traces[None, :, :]
    dfb = err[:, None] * fb_traces
    return NetworkParams(err, dff, dfb)


def decay_into(eligibility: NetworkParams, gradient: NetworkParams, trace_decay):
    """In place: eligibility <- decay * eligibility + (1 - decay) * gradient."""
    fresh = 1.0 - trace_decay
    eligibility.bias *= trace_decay
    eligibility.bias += fresh * gradient.bias
    eligibility.ff_weights *= trace_decay
    eligibility.ff_weights += fresh * gradient.ff_weights
    eligibility.fb_weights *= trace_decay
    eligibility.fb_weights += fresh * gradient.fb_weights


def apply_step(params: NetworkParams, eligibility: NetworkParams, learning_rate,
               neuron_scale=None):
    """In place: params += learning_rate * (scale_i *) eligibility.

    neuron_scale, when given, multiplies neuron i's whole step by
    neuron_scale[i]; None means every neuron steps unscaled.
    """
    if neuron_scale is None:
        params.bias += learning_rate * eligibility.bias
        params.ff_weights += learning_rate * eligibility.ff_weights
        params.fb_weights += learning_rate * eligibility.fb_weights
    else:
        params.bias += learning_rate * (neuron_scale * eligibility.bias)
        params.ff_weights += learning_rate * (neuron_scale[:, None, None]
                                              * eligibility.ff_weights)
        params.fb_weights += learning_rate * (neuron_scale[:, None]
                                              * eligibility.fb_weights)


def batch_sgd_step(topology, params, banks, bits, learning_rate,
                   bandwidth=1.0) -> NetworkParams:
    """One ascent step on a complete example; mutates and returns params."""
    _check_rate(learning_rate)
    grad = example_gradient(topology, params, banks, bits, bandwidth)
    apply_step(params, grad, learning_rate)
    return params


def online_step(topology, params, eligibility, spikes, state, learning_rate,
                trace_decay, apply_update=True) -> np.ndarray:
    """One streaming maximum-likelihood step over every neuron.

    Computes this step's potentials from the state's history with the
    pre-update parameters, folds the instantaneous gradient into the
    eligibility, applies the parameter step (unless deferred by
    apply_update=False, the knob behind update periods > 1), then advances
    the state with the realized spikes. Returns the potentials so callers
    can log the step's log-probability without recomputing.
    """
    _check_rate(learning_rate)
    _check_decay(trace_decay)
    spikes = np.asarray(spikes)
    if spikes.shape != (topology.n,):
        raise ParameterError("spike vector length does not match the network")
    ff, fb = state.traces()
    u = step_potentials(topology, params, ff, fb)
    grad = step_gradient(topology, spikes, u, ff, fb, state.bandwidth)
    decay_into(eligibility, grad, trace_decay)
    if apply_update:
        apply_step(params, eligibility, learning_rate)
    state.advance(spikes)
    return u


def train_epochs(topology, params, banks, examples, epochs, learning_rate,
                 bandwidth=1.0) -> np.ndarray:
    """Per-example batch SGD over a dataset, repeated for `epochs` passes.

    Examples are visited in dataset order each pass. Returns the per-epoch
    mean log likelihood, each example measured just before its own update,
    so the series is exactly the quantity the optimizer is climbing.
    Mutates params.

    Trace features of each example never change (the rasters are fully
    clamped), so they are computed once up front and reused every epoch.
    """
    _check_rate(learning_rate)
    if len(examples) == 0:
        raise DataError("train_epochs needs a nonempty dataset")
    if epochs < 0:
        raise ParameterError("epochs must be >= 0")
    cached = [_raster_inputs(topology, banks, example) for example in examples]
    active = topology.active
    active_mask = topology.mask[active][:, :, None]
    series = np.zeros(epochs)
    for epoch in range(epochs):
        total = 0.0
        for bits, ff_prev, fb_prev in cached:
            u = _potentials(params, topology, ff_prev, fb_prev)
            total += float(np.sum(cond_log_prob(bits, u, bandwidth)))
            err = (bits - expit(u / bandwidth)) / bandwidth
            # same update batch_sgd_step applies, restricted to the rows
            # that can be nonzero so wide sparse layers stay cheap
            params.bias += learning_rate * err.sum(axis=1)
            if active.size:
                dff = np.einsum("it,jkt->ijk", err[active], ff_prev)
                dff *= active_mask
                params.ff_weights[active] += learning_rate * dff
            params.fb_weights += learning_rate * np.einsum("it,ikt->ik", err, fb_prev)
        series[epoch] = total / len(cached)
    return series
