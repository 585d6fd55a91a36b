"""Kernel waveforms, basis banks, and causal filtered spike traces.

A kernel is a finite causal waveform sampled at integer lags 0..duration-1.
A basis bank groups a fixed set of kernels under one shared duration
(shorter members are zero padded); the effective synaptic or feedback
filter of the network is a learned linear combination of the bank members,
so the bank itself never changes during training.

Filtering follows the causal convolution sum(kernel[d] * spikes[t - d])
with history before time 0 treated as silent. A spike landing at the
current step therefore contributes kernel[0] to the current trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

FAMILIES = ("exponential", "diff-exponential", "raised-cosine", "stdp", "custom")
ROLES = ("feedforward", "feedback")


@dataclass(frozen=True, eq=False)
class Kernel:
    """A causal waveform with a family tag.

    Attributes:
        samples: 1-d float array, entry d is the kernel value at lag d.
        family: one of FAMILIES; "custom" for caller-supplied shapes.
    """

    samples: np.ndarray
    family: str = "custom"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 1:
            raise ParameterError("kernel samples must be a 1-d vector of length >= 1")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("kernel samples must be finite")
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown kernel family {self.family!r}")
        samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> int:
        return self.samples.size


def make_kernel(family, duration, *, tau_decay=None, tau_rise=None,
                tau_refractory=None) -> Kernel:
    """Sample one of the closed-form kernel families at lags 0..duration-1.

    "exponential" with tau_decay gives exp(-t/tau_decay); passing
    tau_refractory instead gives the negated self-inhibiting variant
    -exp(-t/tau_refractory). "diff-exponential" gives
    exp(-t/tau_decay) - exp(-t/tau_rise) and needs tau_decay > tau_rise.

    Raises:
        ParameterError: bad duration, non-positive time constant, or
            tau_decay <= tau_rise for the difference family.
    """
    if int(duration) != duration or duration < 1:
        raise ParameterError(f"kernel duration must be a positive integer, got {duration}")
    lags = np.arange(int(duration), dtype=float)
    if family == "exponential":
        if tau_refractory is not None:
            if tau_decay is not None:
                raise ParameterError("give tau_decay or tau_refractory, not both")
            if tau_refractory <= 0:
                raise ParameterError("tau_refractory must be positive")
            return Kernel(-np.exp(-lags / tau_refractory), "exponential")
        if tau_decay is None or tau_decay <= 0:
            raise ParameterError("exponential kernel needs tau_decay > 0")
        return Kernel(np.exp(-lags / tau_decay), "exponential")
    if family == "diff-exponential":
        if tau_decay is None or tau_rise is None:
            raise ParameterError("diff-exponential kernel needs tau_decay and tau_rise")
        if tau_rise <= 0 or tau_decay <= tau_rise:
            raise ParameterError("diff-exponential needs tau_decay > tau_rise > 0")
        return Kernel(np.exp(-lags / tau_decay) - np.exp(-lags / tau_rise),
                      "diff-exponential")
    raise ParameterError(f"make_kernel cannot build family {family!r}")


def raised_cosine(duration) -> Kernel:
    """One raised-cosine bump on [0, duration), unit sampled peak.

    The analytic shape 0.5 * (1 + cos(pi * (2t/duration - 1))) is zero at
    both support endpoints and peaks at the midpoint; after sampling it is
    rescaled so the largest sample equals 1.0 exactly. A duration of 1
    degenerates to a unit impulse (the width-1 shape cannot hit both the
    zero-endpoint and unit-peak conditions, so the peak condition wins).
    """
    if int(duration) != duration or duration < 1:
        raise ParameterError(f"raised cosine duration must be a positive integer, got {duration}")
    duration = int(duration)
    if duration == 1:
        return Kernel(np.ones(1), "raised-cosine")
    lags = np.arange(duration, dtype=float)
    shape = 0.5 * (1.0 + np.cos(np.pi * (2.0 * lags / duration - 1.0)))
    return Kernel(shape / shape.max(), "raised-cosine")


@dataclass(frozen=True, eq=False)
class BasisBank:
    """A fixed ordered set of kernels acting as a filter basis.

    All members are zero padded to the duration of the longest one, so the
    bank exposes a single (size, duration) matrix. The role tag records
    whether the bank filters presynaptic spikes ("feedforward") or a
    neuron's own spikes ("feedback").
    """

    kernels: tuple
    role: str = "feedforward"

    def __post_init__(self):
        kernels = tuple(self.kernels)
        if len(kernels) < 1:
            raise ParameterError("a basis bank needs at least one kernel")
        if not all(isinstance(k, Kernel) for k in kernels):
            raise ParameterError("bank members must be Kernel values")
        if self.role not in ROLES:
            raise ParameterError(f"unknown bank role {self.role!r}")
        object.__setattr__(self, "kernels", kernels)
        duration = max(k.duration for k in kernels)
        matrix = np.zeros((len(kernels), duration))
        for row, kern in zip(matrix, kernels):
            row[: kern.duration] = kern.samples
        matrix.setflags(write=False)
        object.__setattr__(self, "_matrix", matrix)

    @property
    def size(self) -> int:
        return len(self.kernels)

    @property
    def duration(self) -> int:
        return self._matrix.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        """(size, duration) read-only array; row k is kernel k at lags 0.."""
        return self._matrix


@dataclass(frozen=True)
class Banks:
    """The feedforward/feedback bank pair every network carries."""

    ff: BasisBank
    fb: BasisBank

    def __post_init__(self):
        if self.ff.role != "feedforward" or self.fb.role != "feedback":
            raise ParameterError("Banks wants (feedforward, feedback) roles in that order")


def make_raised_cosine_bank(count, durations, role="feedforward") -> BasisBank:
    """Bank of raised cosines with the given per-member durations.

    Durations must be >= 1 and nondecreasing; fractional entries are
    rounded up to the next integer step.
    """
    durations = list(durations)
    if count < 1 or len(durations) != count:
        raise ParameterError("need count >= 1 durations, one per member")
    if any(d < 1 for d in durations):
        raise ParameterError("raised cosine durations must be >= 1")
    if any(b < a for a, b in zip(durations, durations[1:])):
        raise ParameterError("raised cosine durations must be nondecreasing")
    return BasisBank(tuple(raised_cosine(math.ceil(d)) for d in durations), role)


def raised_cosine_banks(count, durations, fb_durations=None) -> Banks:
    """Raised-cosine banks for both roles, feedback overridable separately."""
    if fb_durations is None:
        fb_durations = durations
    return Banks(make_raised_cosine_bank(count, durations, "feedforward"),
                 make_raised_cosine_bank(count, fb_durations, "feedback"))


def make_stdp_bank(delay, duration, role="feedforward") -> BasisBank:
    """Two-member plateau bank splitting lags at `delay`.

    Member 0 (potentiation) is 1 on lags delay..duration-1, member 1
    (depression) is 1 on lags 0..delay-1; their supports partition the
    window. delay 0 leaves the depression member identically zero. Signs
    and magnitudes live in the learned weights, not here.
    """
    if int(duration) != duration or duration < 1:
        raise ParameterError("stdp bank duration must be a positive integer")
    if int(delay) != delay or not 0 <= delay < duration:
        raise ParameterError("stdp delay must satisfy 0 <= delay < duration")
    duration, delay = int(duration), int(delay)
    ltp = np.zeros(duration)
    ltp[delay:] = 1.0
    ltd = np.zeros(duration)
    ltd[:delay] = 1.0
    return BasisBank((Kernel(ltp, "stdp"), Kernel(ltd, "stdp")), role)


def filter_traces(bank, spikes) -> np.ndarray:
    """Bank responses at the newest time of a spike history.

    `spikes` lists s_0..s_t in time order; entry k of the result is
    sum over d of kernel_k[d] * spikes[t - d], with history before time 0
    silent. An empty history yields all zeros.
    """
    spikes = np.asarray(spikes, dtype=float)
    if spikes.ndim != 1:
        raise ParameterError("spike history must be 1-d")
    window = spikes[::-1][: bank.duration]
    return bank.matrix[:, : window.size] @ window


def ar_exp_trace_step(state, spike, tau_decay) -> float:
    """Constant-memory exponential trace update exp(-1/tau) * (state + spike).

    The fresh spike enters already scaled by exp(-1/tau_decay), so iterating
    this from zero equals convolving with the shifted kernel
    exp(-(d+1)/tau_decay), not with exp(-d/tau_decay).
    """
    if tau_decay <= 0:
        raise ParameterError("tau_decay must be positive")
    return math.exp(-1.0 / tau_decay) * (state + spike)
