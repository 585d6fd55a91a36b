"""The GLM spiking-network core: wiring, potentials, likelihood, simulation.

The network is a directed graph of binary neurons in discrete time. At
step t neuron i fires with probability sigmoid(u / bandwidth) where the
membrane potential u sums the neuron's bias, basis-filtered traces of its
presynaptic neurons' spikes, and a basis-filtered trace of its own spikes,
all evaluated on history up to step t-1 (step 0 sees no history, so its
potential is the bias alone). Conditioned on the past the neurons are
independent, which makes the joint log probability of a raster an exact
sum of per-neuron per-step Bernoulli terms and keeps every gradient local
to the neuron it updates.

Rasters are (n, steps) arrays of 0/1 bits, neuron-major. Parameters are
stored densely: feedforward weights occupy an (n, n, basis) cube whose
entries off the wiring mask stay exactly zero, which lets whole-network
potentials and gradients run as a couple of einsums instead of per-neuron
Python loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DataError, ParameterError, StructureError
from .kernels import Banks


class Topology:
    """Wiring plus the observed/hidden split.

    presyn[i] lists the neurons feeding synapses into neuron i, in the
    order their weight rows are reported; a neuron never feeds itself
    (self-influence flows through the feedback kernel). Hidden neurons
    are the latent part of the partition; everything else is observed.
    Directed cycles between distinct neurons are allowed.
    """

    def __init__(self, presyn, hidden=()):
        presyn = tuple(np.asarray(p, dtype=np.intp).reshape(-1) for p in presyn)
        n = len(presyn)
        if n < 1:
            raise StructureError("a network needs at least one neuron")
        for i, pre in enumerate(presyn):
            if pre.size and (pre.min() < 0 or pre.max() >= n):
                raise StructureError(f"presynaptic index out of range for neuron {i}")
            if np.any(pre == i):
                raise StructureError(
                    f"neuron {i} lists itself presynaptically; self-history is the feedback trace")
            if np.unique(pre).size != pre.size:
                raise StructureError(f"duplicate presynaptic entry for neuron {i}")
        hidden = np.asarray(sorted({int(h) for h in hidden}), dtype=np.intp)
        if hidden.size and (hidden.min() < 0 or hidden.max() >= n):
            raise StructureError("hidden index out of range")
        self.presyn = presyn
        self.n = n
        self.hidden = hidden
        self.observed = np.setdiff1d(np.arange(n, dtype=np.intp), hidden)
        mask = np.zeros((n, n))
        for i, pre in enumerate(presyn):
            mask[i, pre] = 1.0
        mask.setflags(write=False)
        self.mask = mask
        # rows with any incoming synapse; the only rows whose ff term is nonzero
        self.active = np.flatnonzero(mask.any(axis=1))

    @classmethod
    def two_layer(cls, n_in, n_out) -> "Topology":
        """Feedforward bipartite net: every input feeds every output."""
        if n_in < 1 or n_out < 1:
            raise StructureError("two_layer needs n_in >= 1 and n_out >= 1")
        inputs = np.arange(n_in, dtype=np.intp)
        presyn = [np.zeros(0, dtype=np.intp)] * n_in + [inputs] * n_out
        return cls(presyn)

    @classmethod
    def fully_connected(cls, n_observed, n_hidden=0) -> "Topology":
        """All-to-all wiring (no self loops); hidden neurons take the last indices."""
        n = n_observed + n_hidden
        if n_observed < 1 or n_hidden < 0:
            raise StructureError("fully_connected needs n_observed >= 1, n_hidden >= 0")
        everyone = np.arange(n, dtype=np.intp)
        presyn = [np.delete(everyone, i) for i in range(n)]
        return cls(presyn, hidden=everyone[n_observed:])


@dataclass
class NetworkParams:
    """Dense learnable parameters for a whole network.

    ff_weights[i, j, k] weighs basis member k on the synapse j -> i and is
    kept at exactly zero wherever the topology has no such synapse.
    """

    bias: np.ndarray          # (n,)
    ff_weights: np.ndarray    # (n, n, ka)
    fb_weights: np.ndarray    # (n, kb)

    def __post_init__(self):
        self.bias = np.asarray(self.bias, dtype=float)
        self.ff_weights = np.asarray(self.ff_weights, dtype=float)
        self.fb_weights = np.asarray(self.fb_weights, dtype=float)
        n = self.bias.shape[0] if self.bias.ndim == 1 else -1
        if (self.bias.ndim != 1 or self.ff_weights.ndim != 3 or self.fb_weights.ndim != 2
                or self.ff_weights.shape[:2] != (n, n) or self.fb_weights.shape[0] != n):
            raise StructureError("parameter arrays disagree on the neuron count")

    @property
    def n(self) -> int:
        return self.bias.shape[0]

    @property
    def ff_size(self) -> int:
        return self.ff_weights.shape[2]

    @property
    def fb_size(self) -> int:
        return self.fb_weights.shape[1]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.bias.copy(), self.ff_weights.copy(),
                             self.fb_weights.copy())

    def neuron(self, index, topology) -> "NeuronParams":
        """One neuron's view: bias, (n_presyn, ka) weights, (kb,) feedback."""
        pre = topology.presyn[index]
        return NeuronParams(float(self.bias[index]),
                            self.ff_weights[index, pre, :].copy(),
                            self.fb_weights[index].copy())


@dataclass
class NeuronParams:
    """Per-neuron parameter (or gradient) triple.

    ff_weights rows follow the neuron's presynaptic order in the topology.
    """

    bias: float
    ff_weights: np.ndarray    # (n_presyn, ka)
    fb_weights: np.ndarray    # (kb,)


def zeros_like_params(params: NetworkParams) -> NetworkParams:
    return NetworkParams(np.zeros_like(params.bias),
                         np.zeros_like(params.ff_weights),
                         np.zeros_like(params.fb_weights))


def init_params(topology, ff_size, fb_size, rng, scheme="normal", scale=0.1) -> NetworkParams:
    """Random initial parameters.

    "normal" draws N(0, scale^2), "uniform" draws U(-scale, scale). Draw
    order is bias, feedforward cube, feedback block (one rng call each),
    with off-topology feedforward entries zeroed afterwards.
    """
    if ff_size < 1 or fb_size < 1:
        raise StructureError("basis sizes must be >= 1")
    if scale < 0 or not np.isfinite(scale):
        raise ParameterError("init scale must be finite and nonnegative")
    n = topology.n
    if scheme == "normal":
        draw = lambda size: rng.normal(0.0, scale, size)
    elif scheme == "uniform":
        draw = lambda size: rng.uniform(-scale, scale, size)
    else:
        raise ParameterError(f"unknown init scheme {scheme!r}")
    bias = draw(n)
    ff = draw((n, n, ff_size)) * topology.mask[:, :, None]
    fb = draw((n, fb_size))
    return NetworkParams(bias, ff, fb)


def _check_bandwidth(bandwidth):
    if bandwidth <= 0 or not np.isfinite(bandwidth):
        raise ParameterError("bandwidth must be a positive finite number")


def check_raster(bits, n=None, name="raster") -> np.ndarray:
    """Validate an (n, steps) 0/1 array and return it as int8."""
    arr = np.asarray(bits)
    if arr.ndim != 2:
        raise StructureError(f"{name} must be 2-d (neurons, steps)")
    if n is not None and arr.shape[0] != n:
        raise StructureError(f"{name} has {arr.shape[0]} rows, expected {n}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise DataError(f"{name} cells must be 0 or 1")
    return arr.astype(np.int8, copy=False)


def membrane_potential(neuron: NeuronParams, ff_traces, fb_trace) -> float:
    """bias + sum(ff_weights * ff_traces) + fb_weights . fb_trace.

    ff_traces carries one row of basis responses per presynaptic neuron,
    aligned with neuron.ff_weights; fb_trace is the neuron's own feedback
    response vector. All-zero traces give back the bias.
    """
    ff_traces = np.asarray(ff_traces, dtype=float)
    fb_trace = np.asarray(fb_trace, dtype=float)
    if ff_traces.shape != np.shape(neuron.ff_weights):
        raise StructureError("feedforward trace shape does not match the weights")
    if fb_trace.shape != np.shape(neuron.fb_weights):
        raise StructureError("feedback trace shape does not match the weights")
    return float(neuron.bias + np.sum(neuron.ff_weights * ff_traces)
                 + np.dot(neuron.fb_weights, fb_trace))


def firing_prob(potential, bandwidth=1.0):
    """Spike probability sigmoid(potential / bandwidth); scalar or array."""
    _check_bandwidth(bandwidth)
    return expit(np.asarray(potential, dtype=float) / bandwidth)


def sample_spike(potential, bandwidth, rng) -> int:
    """One Bernoulli draw at the firing probability (exactly one variate)."""
    return int(rng.random() < firing_prob(potential, bandwidth))


def cond_log_prob(spike, potential, bandwidth=1.0):
    """log p(spike | potential), stable for any potential magnitude.

    Equals spike * log(sigmoid(v)) + (1 - spike) * log(1 - sigmoid(v)) with
    v = potential / bandwidth, computed as -log1p(exp(-(2s-1) v)) so large
    |v| never overflows. Accepts scalars or broadcastable arrays.
    """
    _check_bandwidth(bandwidth)
    spike = np.asarray(spike)
    if spike.size and not np.isin(spike, (0, 1)).all():
        raise DataError("spike values must be 0 or 1")
    v = np.asarray(potential, dtype=float) / bandwidth
    signed = (1.0 - 2.0 * spike) * v
    return -np.logaddexp(0.0, signed)


def raster_traces(bank, bits) -> np.ndarray:
    """Per-neuron bank responses at every step of a raster.

    Returns (n, bank.size, steps) with out[i, k, t] the causal convolution
    of kernel k with row i evaluated at t (the spike at t included).
    """
    bits = np.asarray(bits, dtype=float)
    n, steps = bits.shape
    matrix = bank.matrix
    out = np.zeros((n, matrix.shape[0], steps))
    for lag in range(min(matrix.shape[1], steps)):
        out[:, :, lag:] += matrix[None, :, lag, None] * bits[:, None, : steps - lag]
    return out


def _previous_step(traces) -> np.ndarray:
    # shift along time so column t holds the value at t-1 (column 0 zero)
    out = np.zeros_like(traces)
    out[..., 1:] = traces[..., :-1]
    return out


def _raster_inputs(topology, banks, bits):
    bits = check_raster(bits, topology.n)
    ff_prev = _previous_step(raster_traces(banks.ff, bits))
    fb_prev = _previous_step(raster_traces(banks.fb, bits))
    return bits, ff_prev, fb_prev


def _potentials(params, topology, ff_prev, fb_prev) -> np.ndarray:
    steps = ff_prev.shape[2]
    u = np.repeat(params.bias[:, None], steps, axis=1)
    active = topology.active
    if active.size:
        u[active] += np.einsum("ijk,jkt->it", params.ff_weights[active], ff_prev)
    u += np.einsum("ik,ikt->it", params.fb_weights, fb_prev)
    return u


def potentials_from_raster(topology, params, banks, bits, bandwidth=1.0) -> np.ndarray:
    """Membrane potentials (n, steps) realized by a complete raster.

    Column t is computed from spikes through t-1 only; column 0 is the
    bias. The bandwidth does not enter the potential itself, it is
    accepted (and checked) here for signature symmetry with the samplers.
    """
    _check_bandwidth(bandwidth)
    _, ff_prev, fb_prev = _raster_inputs(topology, banks, bits)
    return _potentials(params, topology, ff_prev, fb_prev)


def log_likelihood(topology, params, banks, bits, bandwidth=1.0) -> float:
    """Joint log probability of a fully observed raster."""
    bits, ff_prev, fb_prev = _raster_inputs(topology, banks, bits)
    u = _potentials(params, topology, ff_prev, fb_prev)
    return float(np.sum(cond_log_prob(bits, u, bandwidth)))


def local_gradient(neuron: NeuronParams, spike, potential, ff_traces, fb_trace,
                   bandwidth=1.0) -> NeuronParams:
    """Gradient of one step's log p(spike | potential) in one neuron's parameters.

    Everything factors through the scaled Bernoulli error
    (spike - sigmoid(u / bandwidth)) / bandwidth: the bias gradient is the
    error itself and each weight gradient is its trace times the error.
    """
    ff_traces = np.asarray(ff_traces, dtype=float)
    fb_trace = np.asarray(fb_trace, dtype=float)
    if ff_traces.shape != np.shape(neuron.ff_weights):
        raise StructureError("feedforward trace shape does not match the weights")
    if fb_trace.shape != np.shape(neuron.fb_weights):
        raise StructureError("feedback trace shape does not match the weights")
    err = (float(spike) - float(firing_prob(potential, bandwidth))) / bandwidth
    return NeuronParams(err, err * ff_traces, err * fb_trace)


def _raster_gradient(topology, err, ff_prev, fb_prev) -> NetworkParams:
    # err: (n, steps) scaled Bernoulli errors; traces already shifted to t-1
    dbias = err.sum(axis=1)
    dff = np.zeros((err.shape[0], err.shape[0], ff_prev.shape[1]))
    active = topology.active
    if active.size:
        dff[active] = np.einsum("it,jkt->ijk", err[active], ff_prev)
        dff[active] *= topology.mask[active][:, :, None]
    dfb = np.einsum("it,ikt->ik", err, fb_prev)
    return NetworkParams(dbias, dff, dfb)


def example_gradient(topology, params, banks, bits, bandwidth=1.0) -> NetworkParams:
    """Log-likelihood gradient of a whole raster, summed over steps."""
    _check_bandwidth(bandwidth)
    bits, ff_prev, fb_prev = _raster_inputs(topology, banks, bits)
    u = _potentials(params, topology, ff_prev, fb_prev)
    err = (bits - expit(u / bandwidth)) / bandwidth
    return _raster_gradient(topology, err, ff_prev, fb_prev)


class NetworkState:
    """Rolling spike window driving step-by-step simulation.

    The window keeps the last `duration` spike vectors (duration = the
    longer of the two banks); right after construction or reset it is all
    zero, so the first step's potentials reduce to the biases. Copies are
    cheap and independent, which is how free-running predictions branch
    off a live training state without disturbing it.
    """

    def __init__(self, topology, banks, bandwidth=1.0):
        if not isinstance(banks, Banks):
            raise StructureError("NetworkState wants a Banks pair")
        _check_bandwidth(bandwidth)
        self.topology = topology
        self.banks = banks
        self.bandwidth = float(bandwidth)
        duration = max(banks.ff.duration, banks.fb.duration)
        ffm = np.zeros((banks.ff.size, duration))
        ffm[:, : banks.ff.duration] = banks.ff.matrix
        fbm = np.zeros((banks.fb.size, duration))
        fbm[:, : banks.fb.duration] = banks.fb.matrix
        self._ff_matrix = ffm
        self._fb_matrix = fbm
        self.window = np.zeros((topology.n, duration))
        self.step = 0

    def traces(self):
        """Feedforward (n, ka) and feedback (n, kb) traces through step-1."""
        return self.window @ self._ff_matrix.T, self.window @ self._fb_matrix.T

    def advance(self, spikes):
        """Append one step's realized spike vector to the history."""
        spikes = np.asarray(spikes)
        if spikes.shape != (self.topology.n,):
            raise StructureError("spike vector length does not match the network")
        if np.any((spikes != 0) & (spikes != 1)):
            raise DataError("spike values must be 0 or 1")
        self.window[:, 1:] = self.window[:, :-1]
        self.window[:, 0] = spikes
        self.step += 1

    def copy(self) -> "NetworkState":
        dup = NetworkState.__new__(NetworkState)
        dup.topology = self.topology
        dup.banks = self.banks
        dup.bandwidth = self.bandwidth
        dup._ff_matrix = self._ff_matrix
        dup._fb_matrix = self._fb_matrix
        dup.window = self.window.copy()
        dup.step = self.step
        return dup

    def reset(self):
        self.window[:] = 0.0
        self.step = 0


def step_potentials(topology, params, ff_traces, fb_traces) -> np.ndarray:
    """Potentials (n,) for one step from already-computed trace blocks."""
    u = params.bias + np.sum(params.fb_weights * fb_traces, axis=1)
    active = topology.active
    if active.size:
        u[active] += np.einsum("ijk,jk->i", params.ff_weights[active], ff_traces)
    return u


def state_potentials(params, state) -> np.ndarray:
    """Potentials (n,) at the state's current step, pre-spike."""
    ff, fb = state.traces()
    return step_potentials(state.topology, params, ff, fb)


def free_raster(n, steps) -> np.ndarray:
    """An all-free clamp plan: -1 marks cells for the sampler to fill."""
    return np.full((n, steps), -1, dtype=np.int8)


def rollout_from(params, state, rng, steps=None, clamped=None) -> np.ndarray:
    """Continue a live state forward, sampling free cells.

    `clamped` is an (n, steps) plan over {-1, 0, 1}: -1 cells are sampled
    from the model, 0/1 cells are forced verbatim. Passing only `steps`
    means everything is free. Free cells consume one uniform draw per
    neuron per step, in ascending neuron order; fully clamped steps draw
    nothing. Mutates `state`; returns the realized (n, steps) raster.
    """
    topology = state.topology
    if clamped is None:
        if steps is None:
            raise StructureError("rollout needs steps when nothing is clamped")
        clamped = free_raster(topology.n, int(steps))
    else:
        clamped = np.asarray(clamped)
        if clamped.ndim != 2 or clamped.shape[0] != topology.n:
            raise StructureError("clamp plan must be (n, steps)")
        if clamped.size and not np.isin(clamped, (-1, 0, 1)).all():
            raise DataError("clamp plan cells must be -1 (free), 0, or 1")
        if steps is not None and int(steps) != clamped.shape[1]:
            raise StructureError("steps disagrees with the clamp plan width")
    total = clamped.shape[1]
    out = np.empty((topology.n, total), dtype=np.int8)
    bandwidth = state.bandwidth
    for t in range(total):
        column = clamped[:, t].astype(np.int8)
        free = np.flatnonzero(column < 0)
        if free.size:
            u = state_potentials(params, state)
            prob = expit(u[free] / bandwidth)
            column[free] = rng.random(free.size) < prob
        state.advance(column)
        out[:, t] = column
    return out


def roll_forward(topology, params, banks, rng, steps=None, clamped=None,
                 bandwidth=1.0) -> np.ndarray:
    """Simulate from an empty history; see rollout_from for the clamp plan."""
    state = NetworkState(topology, banks, bandwidth)
    return rollout_from(params, state, rng, steps=steps, clamped=clamped)


def flatten_params(topology, params) -> np.ndarray:
    """Serialize parameters to the documented checkpoint order.

    Per neuron: bias, then feedforward weights in presynaptic order with
    the basis index fastest, then feedback weights.
    """
    chunks = []
    for i in range(topology.n):
        chunks.append(np.array([params.bias[i]]))
        chunks.append(params.ff_weights[i, topology.presyn[i], :].ravel())
        chunks.append(params.fb_weights[i])
    return np.concatenate(chunks)


def unflatten_params(topology, vector, ff_size, fb_size) -> NetworkParams:
    """Rebuild parameters from a checkpoint vector (inverse of flatten_params)."""
    vector = np.asarray(vector, dtype=float).reshape(-1)
    n = topology.n
    expected = sum(1 + len(topology.presyn[i]) * ff_size + fb_size for i in range(n))
    if vector.size != expected:
        raise DataError(f"checkpoint holds {vector.size} values, expected {expected}")
    params = NetworkParams(np.zeros(n), np.zeros((n, n, ff_size)), np.zeros((n, fb_size)))
    cursor = 0
    for i in range(n):
        params.bias[i] = vector[cursor]
        cursor += 1
        pre = topology.presyn[i]
        block = vector[cursor: cursor + pre.size * ff_size]
        params.ff_weights[i, pre, :] = block.reshape(pre.size, ff_size)
        cursor += pre.size * ff_size
        params.fb_weights[i] = vector[cursor: cursor + fb_size]
        cursor += fb_size
    return params
