"""Convert scalar values and images to spike blocks and back.

Rate coding quantizes a unit-interval value to n_neurons + 1 levels
(level 0 is silence) and lets the level's neuron fire for a whole window;
time coding places at most one spike per neuron, its timing read off a
truncated Gaussian receptive field. Value blocks are time-major
(steps_per_value, n_neurons) so a block's rows drop straight into the
raster CSV layout; the image and label encoders for the classification
task instead extend the network raster convention, neuron-major over a
horizon of T+1 steps.

Out-of-range inputs to rate_encode are clipped and counted rather than
rejected; see clipped_count / reset_clipped_count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError, StructureError

_clip_events = 0


def clipped_count() -> int:
    """How many encoder inputs were clipped into [0, 1] so far."""
    return _clip_events


def reset_clipped_count():
    global _clip_events
    _clip_events = 0


def _clip_unit(value) -> float:
    global _clip_events
    value = float(value)
    if value < 0.0 or value > 1.0:
        _clip_events += 1
        return min(max(value, 0.0), 1.0)
    return value


def quantize_level(value, n_levels) -> int:
    """Largest level whose lower edge is <= value, in 0..n_levels-1.

    The epsilon absorbs binary representation error at exact level edges
    (0.3 * 10 evaluates just under 3), so edge values land on the level
    they name.
    """
    if n_levels < 1:
        raise ParameterError("need at least one quantization level")
    level = int(math.floor(value * n_levels + 1e-9))
    return min(max(level, 0), n_levels - 1)


def level_value(level, n_levels) -> float:
    """Representative (lower edge) of a quantization level."""
    return level / n_levels


def rate_encode(value, n_neurons, steps_per_value) -> np.ndarray:
    """Value -> (steps_per_value, n_neurons) block of consecutive spikes.

    Level 0 is silent; level i >= 1 makes neuron i-1 fire every step of
    the window. Inputs outside [0, 1] are clipped (and counted).
    """
    if n_neurons < 1 or steps_per_value < 1:
        raise ParameterError("need n_neurons >= 1 and steps_per_value >= 1")
    value = _clip_unit(value)
    block = np.zeros((steps_per_value, n_neurons), dtype=np.int8)
    level = quantize_level(value, n_neurons + 1)
    if level >= 1:
        block[:, level - 1] = 1
    return block


def rate_decode(block, n_neurons) -> float:
    """Winning neuron's level representative; all-silent -> 0, ties -> lowest."""
    block = np.asarray(block)
    if block.ndim != 2 or block.shape[1] != n_neurons:
        raise StructureError("rate block must be (steps, n_neurons)")
    counts = block.sum(axis=0)
    if counts.max(initial=0) == 0:
        return 0.0
    winner = int(np.argmax(counts))
    return level_value(winner + 1, n_neurons + 1)


@dataclass(frozen=True, eq=False)
class ReceptiveFieldBank:
    """Truncated Gaussian tuning curves shared by the time coder and decoder.

    Field i is exp(-(a - center_i)^2 / (2 * variance)) on the support,
    affinely rescaled so its peak (at its own center) maps to
    steps_per_value and its lower support edge response maps to 0. The
    variance of 1.0 on a width-0.9 domain leaves the raw Gaussians nearly
    flat; the rescaling restores the contrast the timings need.
    """

    centers: np.ndarray
    steps_per_value: int
    support: tuple = (0.1, 1.0)
    variance: float = 1.0

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float)
        lo, hi = self.support
        if centers.ndim != 1 or centers.size < 1:
            raise ParameterError("need a 1-d vector of field centers")
        if self.steps_per_value < 1:
            raise ParameterError("steps_per_value must be >= 1")
        if self.variance <= 0:
            raise ParameterError("field variance must be positive")
        if not lo < hi:
            raise ParameterError("support must be a nonempty interval")
        if centers.min() <= lo or centers.max() >= hi:
            raise ParameterError("field centers must lie strictly inside the support")
        centers = centers.copy()
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        edges = np.minimum(self._raw(lo), self._raw(hi))
        edges.setflags(write=False)
        object.__setattr__(self, "_floor", edges)

    @property
    def size(self) -> int:
        return self.centers.size

    def _raw(self, value):
        gap = np.subtract.outer(np.asarray(value, dtype=float), self.centers)
        return np.exp(-0.5 * gap * gap / self.variance)

    def values(self, value) -> np.ndarray:
        """Normalized field responses in [0, steps_per_value].

        A scalar maps to (size,), an (m,) vector to (m, size).
        """
        return (self.steps_per_value * (self._raw(value) - self._floor)
                / (1.0 - self._floor))

    def timings(self, value) -> np.ndarray:
        """Field responses rounded to spike steps; 0 means no spike."""
        steps = np.floor(self.values(value) + 0.5).astype(int)
        return np.clip(steps, 0, self.steps_per_value)


def make_receptive_fields(n_neurons, steps_per_value, support=(0.1, 1.0),
                          variance=1.0) -> ReceptiveFieldBank:
    """Fields centered at the midpoints of n_neurons equal slices of the support."""
    if n_neurons < 1:
        raise ParameterError("need at least one receptive field")
    lo, hi = support
    centers = lo + (hi - lo) * (np.arange(n_neurons) + 0.5) / n_neurons
    return ReceptiveFieldBank(centers, steps_per_value, support, variance)


def time_encode(value, bank) -> np.ndarray:
    """Value -> (steps_per_value, size) block with at most one spike per neuron.

    Values below the support are silent by convention, values beyond it
    fall outside every field; in both cases the block is empty. Otherwise
    each field with a nonzero rounded timing contributes one spike at that
    step.
    """
    value = float(value)
    block = np.zeros((bank.steps_per_value, bank.size), dtype=np.int8)
    lo, hi = bank.support
    if value < lo or value > hi:
        return block
    timings = bank.timings(value)
    for neuron, timing in enumerate(timings):
        if timing >= 1:
            block[timing - 1, neuron] = 1
    return block


def time_decode(block, bank, grid_points=512) -> float:
    """First-spike least squares against the field values on a candidate grid.

    For each candidate value the cost sums, over neurons that spiked,
    (observed timing - field value)^2 when the candidate predicts a spike
    for that neuron, or the miss penalty (steps_per_value + 1)^2 when it
    predicts silence. Neurons that stayed silent never charge anything:
    they are uninformative about how many fields a candidate would light
    up, and charging them would drown the timing evidence (a lone spiking
    neuron must still decode to its own field's center). All-silent blocks
    decode to 0; ties go to the lowest candidate.
    """
    block = np.asarray(block)
    if block.ndim != 2 or block.shape != (bank.steps_per_value, bank.size):
        raise StructureError("time block must be (steps_per_value, n_fields)")
    spiked = block.any(axis=0)
    if not spiked.any():
        return 0.0
    first = block.argmax(axis=0) + 1    # first spike step, 1-based
    grid = np.linspace(0.0, 1.0, grid_points)
    values = bank.values(grid)                       # (grid, fields)
    predicted = np.floor(values + 0.5) >= 1.0
    lo, hi = bank.support
    inside = (grid >= lo) & (grid <= hi)
    predicted &= inside[:, None]
    penalty = float((bank.steps_per_value + 1) ** 2)
    gaps = (first[None, :] - values) ** 2
    cost = np.where(predicted, gaps, penalty)[:, spiked].sum(axis=1)
    return float(grid[int(np.argmin(cost))])


def image_rate_encode(pixels, horizon, rng) -> np.ndarray:
    """Gray image -> (n_pixels, horizon + 1) i.i.d. Bernoulli raster.

    Each pixel drives its own neuron at probability 0.5 * intensity, so a
    full-white pixel spikes half the time and a black one never does.
    Intensities are expected in [0, 1].
    """
    pixels = np.asarray(pixels, dtype=float).reshape(-1)
    if horizon < 0:
        raise ParameterError("horizon must be >= 0")
    probs = 0.5 * pixels[:, None]
    return (rng.random((pixels.size, horizon + 1)) < probs).astype(np.int8)


def label_rate_encode(label, num_classes, horizon) -> np.ndarray:
    """Class label -> (num_classes, horizon + 1) raster, one spike every 3 steps.

    The labeled neuron fires at t = 0, 3, 6, ...; every other row is silent.
    """
    if not 0 <= label < num_classes:
        raise DataError(f"label {label} outside 0..{num_classes - 1}")
    if horizon < 0:
        raise ParameterError("horizon must be >= 0")
    block = np.zeros((num_classes, horizon + 1), dtype=np.int8)
    block[label, 0::3] = 1
    return block


def classify_decode(block) -> int:
    """Index of the output row with the most spikes; ties -> lowest index."""
    block = np.asarray(block)
    if block.ndim != 2:
        raise StructureError("classification block must be 2-d (neurons, steps)")
    return int(np.argmax(block.sum(axis=1)))
