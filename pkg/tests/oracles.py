"""Slow reference implementations the tests check the library against.

Everything here favors obviousness over speed: plain Python loops, one
term at a time, no code shared with the library beyond its data
containers. A disagreement between these and the vectorized paths points
at a real bug, not at two copies of the same mistake.
"""

import math

import numpy as np
from scipy.special import expit, logsumexp


def naive_trace(kernel_samples, spikes):
    """Causal convolution sum(kernel[d] * spikes[t - d]) by direct loops."""
    kernel_samples = np.asarray(kernel_samples, dtype=float)
    spikes = np.asarray(spikes, dtype=float)
    out = np.zeros(spikes.size)
    for t in range(spikes.size):
        for d in range(kernel_samples.size):
            if t - d >= 0:
                out[t] += kernel_samples[d] * spikes[t - d]
    return out


def naive_prev_trace(kernel_samples, spikes, t):
    """The same convolution evaluated on history through t - 1 only."""
    kernel_samples = np.asarray(kernel_samples, dtype=float)
    total = 0.0
    for d in range(kernel_samples.size):
        s = (t - 1) - d
        if s >= 0:
            total += kernel_samples[d] * float(spikes[s])
    return total


def naive_potentials(topology, params, banks, bits):
    """Membrane potentials from first principles, term by term."""
    bits = np.asarray(bits)
    n, steps = bits.shape
    u = np.zeros((n, steps))
    for i in range(n):
        for t in range(steps):
            total = float(params.bias[i])
            for j in topology.presyn[i]:
                for k in range(banks.ff.size):
                    kern = banks.ff.kernels[k].samples
                    total += (params.ff_weights[i, j, k]
                              * naive_prev_trace(kern, bits[j], t))
            for k in range(banks.fb.size):
                kern = banks.fb.kernels[k].samples
                total += (params.fb_weights[i, k]
                          * naive_prev_trace(kern, bits[i], t))
            u[i, t] = total
    return u


def naive_log_likelihood(topology, params, banks, bits, bandwidth=1.0):
    """Joint log probability as a double loop over neurons and steps."""
    bits = np.asarray(bits)
    u = naive_potentials(topology, params, banks, bits)
    total = 0.0
    for i in range(bits.shape[0]):
        for t in range(bits.shape[1]):
            p = float(expit(u[i, t] / bandwidth))
            total += math.log(p) if bits[i, t] else math.log1p(-p)
    return total


def param_positions(topology, params):
    """Every real parameter as an (array, index) pair, in a fixed order.

    Feedforward entries off the wiring are structural zeros, not
    parameters, so they are skipped.
    """
    spots = []
    for i in range(topology.n):
        spots.append((params.bias, (i,)))
    for i in range(topology.n):
        for j in topology.presyn[i]:
            for k in range(params.ff_weights.shape[2]):
                spots.append((params.ff_weights, (i, int(j), k)))
    for i in range(topology.n):
        for k in range(params.fb_weights.shape[1]):
            spots.append((params.fb_weights, (i, k)))
    return spots


def fd_gradient(fun, positions, step=1e-5):
    """Central finite differences of fun() along each parameter position.

    Mutates each position by +-step around its current value and restores
    it exactly before moving on.
    """
    grad = np.zeros(len(positions))
    for spot, (arr, idx) in enumerate(positions):
        kept = arr[idx]
        arr[idx] = kept + step
        upper = fun()
        arr[idx] = kept - step
        lower = fun()
        arr[idx] = kept
        grad[spot] = (upper - lower) / (2.0 * step)
    return grad


def gather_positions(positions):
    """Current values at the positions, aligned with fd_gradient output."""
    return np.array([arr[idx] for arr, idx in positions])


def _hidden_configs(n_hidden, steps):
    for code in range(1 << (n_hidden * steps)):
        bits = np.zeros((n_hidden, steps), dtype=np.int8)
        for pos in range(n_hidden * steps):
            bits[pos // steps, pos % steps] = (code >> pos) & 1
        yield bits


def enumerate_elbo(topology, params, banks, observed_bits, bandwidth=1.0):
    """(elbo, loglik) by brute force over every hidden raster."""
    observed_bits = np.asarray(observed_bits)
    steps = observed_bits.shape[1]
    hidden = topology.hidden
    if hidden.size == 0:
        value = naive_log_likelihood(topology, params, banks, observed_bits, bandwidth)
        return value, value
    log_joint = []
    log_q = []
    for config in _hidden_configs(hidden.size, steps):
        raster = np.zeros((topology.n, steps), dtype=np.int8)
        raster[topology.observed] = observed_bits
        raster[hidden] = config
        u = naive_potentials(topology, params, banks, raster)
        joint = 0.0
        posterior = 0.0
        for i in range(topology.n):
            for t in range(steps):
                p = float(expit(u[i, t] / bandwidth))
                term = math.log(p) if raster[i, t] else math.log1p(-p)
                joint += term
                if i in hidden:
                    posterior += term
        log_joint.append(joint)
        log_q.append(posterior)
    log_joint = np.array(log_joint)
    log_q = np.array(log_q)
    loglik = float(logsumexp(log_joint))
    elbo = float(np.exp(log_q) @ (log_joint - log_q))
    return elbo, loglik


def enumerate_hidden_elbo_gradient(topology, params, banks, observed_bits,
                                   bandwidth=1.0):
    """Exact ELBO gradient in the hidden neurons' parameters, by enumeration.

    The bound is sum over hidden rasters of q * signal with the signal the
    observed-row log-probability sum, and only the sampling weights q
    depend on hidden parameters, so the gradient is the enumeration of
    q * signal * (d log q / d theta). Returns (dbias, dff, dfb) arrays
    shaped like the corresponding parameter blocks.
    """
    observed_bits = np.asarray(observed_bits)
    steps = observed_bits.shape[1]
    hidden = topology.hidden
    dbias = np.zeros(topology.n)
    dff = np.zeros_like(params.ff_weights)
    dfb = np.zeros_like(params.fb_weights)
    for config in _hidden_configs(hidden.size, steps):
        raster = np.zeros((topology.n, steps), dtype=np.int8)
        raster[topology.observed] = observed_bits
        raster[hidden] = config
        u = naive_potentials(topology, params, banks, raster)
        signal = 0.0
        log_q = 0.0
        for i in topology.observed:
            for t in range(steps):
                p = float(expit(u[i, t] / bandwidth))
                signal += math.log(p) if raster[i, t] else math.log1p(-p)
        for i in hidden:
            for t in range(steps):
                p = float(expit(u[i, t] / bandwidth))
                log_q += math.log(p) if raster[i, t] else math.log1p(-p)
        weight = math.exp(log_q) * signal
        for i in hidden:
            for t in range(steps):
                err = (float(raster[i, t])
                       - float(expit(u[i, t] / bandwidth))) / bandwidth
                dbias[i] += weight * err
                for j in topology.presyn[i]:
                    for k in range(params.ff_weights.shape[2]):
                        kern = banks.ff.kernels[k].samples
                        dff[i, j, k] += weight * err * naive_prev_trace(
                            kern, raster[j], t)
                for k in range(params.fb_weights.shape[1]):
                    kern = banks.fb.kernels[k].samples
                    dfb[i, k] += weight * err * naive_prev_trace(
                        kern, raster[i], t)
    return dbias, dff, dfb


def random_mixed_bank(rng, size, role, max_duration=4):
    """A bank mixing kernel families, for property tests."""
    from spikeglm.kernels import BasisBank, Kernel, make_kernel, raised_cosine

    kernels = []
    for _ in range(size):
        duration = int(rng.integers(1, max_duration + 1))
        family = rng.choice(["exponential", "refractory", "cosine", "custom", "diff"])
        if family == "exponential":
            kernels.append(make_kernel("exponential", duration,
                                       tau_decay=float(rng.uniform(0.5, 3.0))))
        elif family == "refractory":
            kernels.append(make_kernel("exponential", duration,
                                       tau_refractory=float(rng.uniform(0.5, 3.0))))
        elif family == "cosine":
            kernels.append(raised_cosine(duration))
        elif family == "diff":
            rise = float(rng.uniform(0.3, 1.0))
            kernels.append(make_kernel("diff-exponential", duration,
                                       tau_decay=rise + float(rng.uniform(0.5, 2.0)),
                                       tau_rise=rise))
        else:
            kernels.append(Kernel(rng.uniform(-1.0, 1.0, size=duration)))
    return BasisBank(tuple(kernels), role)


def random_topology(rng, max_neurons=4, with_hidden=False):
    """A random wiring (no self loops), optionally with a random hidden set."""
    from spikeglm.network import Topology

    n = int(rng.integers(1, max_neurons + 1))
    presyn = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        rng.shuffle(others)
        presyn.append(sorted(others[: int(rng.integers(0, len(others) + 1))]))
    hidden = ()
    if with_hidden and n > 1:
        count = int(rng.integers(0, n))    # always leaves one observed
        hidden = tuple(sorted(rng.choice(n, size=count, replace=False).tolist()))
    return Topology(presyn, hidden=hidden)


def random_params(topology, ff_size, fb_size, rng, scale=0.8):
    from spikeglm.network import NetworkParams

    n = topology.n
    ff = rng.uniform(-scale, scale, size=(n, n, ff_size)) * topology.mask[:, :, None]
    return NetworkParams(rng.uniform(-scale, scale, size=n), ff,
                         rng.uniform(-scale, scale, size=(n, fb_size)))
