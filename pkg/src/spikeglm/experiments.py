"""The two reference experiments: batch image classification and online
sequence prediction.

Both are deterministic functions of (config, seed): one Generator seeded
from the config drives data synthesis, initialization, training, and
evaluation in a fixed order, so a rerun reproduces every metric exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import coding
from .config import ExperimentConfig
from .errors import ConfigError, DataError
from .kernels import raised_cosine_banks
from .network import (NetworkState, Topology, init_params, rollout_from,
                      roll_forward, zeros_like_params)
from .raster_io import MetricSeries, load_image_dataset
from .train_observed import train_epochs
from .train_variational import LearningSignalState, online_doubly_sgd_step

BLOCK_LEN = 25
ZERO_BLOCK, BLOCK_A, BLOCK_B = 0, 1, 2


def default_templates():
    """The two built-in sequence motifs, each 25 values on exact rate levels.

    The first alternates between two distant levels, so copying the
    previous value is wrong at every step; the second sweeps a triangle
    through five levels, where the next value depends on the sweep
    direction and not just the current level. Their level sets are
    disjoint, letting a decoder tell the motifs apart from a single value.
    """
    zigzag = np.tile([0.2, 0.6], (BLOCK_LEN + 1) // 2)[:BLOCK_LEN]
    cycle = [0.1, 0.3, 0.5, 0.7, 0.9, 0.7, 0.5, 0.3]
    triangle = np.array([cycle[i % len(cycle)] for i in range(BLOCK_LEN)])
    return zigzag, triangle


def gen_blocks(templates, length, rng):
    """Sequence of block draws -> (values (length,), block kind per value).

    Each 25-value block is all-zero with probability 0.7, otherwise one of
    the two templates with probability 0.15 each (one uniform draw per
    block). length must be a multiple of 25.
    """
    first, second = (np.asarray(t, dtype=float) for t in templates)
    if first.shape != (BLOCK_LEN,) or second.shape != (BLOCK_LEN,):
        raise DataError(f"templates must hold exactly {BLOCK_LEN} values each")
    if length % BLOCK_LEN != 0:
        raise DataError(f"sequence length must be a multiple of {BLOCK_LEN}")
    values = np.zeros(length)
    kinds = np.zeros(length, dtype=np.int8)
    for start in range(0, length, BLOCK_LEN):
        draw = rng.random()
        if draw < 0.7:
            continue
        template, kind = (first, BLOCK_A) if draw < 0.85 else (second, BLOCK_B)
        values[start : start + BLOCK_LEN] = template
        kinds[start : start + BLOCK_LEN] = kind
    return values, kinds


def gen_sequence(templates, length, rng) -> np.ndarray:
    values, _ = gen_blocks(templates, length, rng)
    return values


def persistent_predict(prefix, n_visible) -> float:
    """Previous value snapped to its rate level representative; empty -> 0."""
    prefix = np.asarray(prefix, dtype=float).reshape(-1)
    if prefix.size == 0:
        return 0.0
    level = coding.quantize_level(prefix[-1], n_visible + 1)
    return coding.level_value(level, n_visible + 1)


def synthetic_two_class_images(count, rng, side=16):
    """Left-bright vs right-bright noise images -> (images (count, side*side), labels).

    Class 0 lights the left half around intensity 0.75, class 1 the right;
    the dim half sits near 0.12. Labels are drawn per image.
    """
    labels = (rng.random(count) < 0.5).astype(np.intp)
    images = np.empty((count, side * side))
    for row, label in enumerate(labels):
        image = rng.uniform(0.0, 0.25, size=(side, side))
        bright = rng.uniform(0.6, 0.9, size=(side, side // 2))
        if label == 0:
            image[:, : side // 2] = bright
        else:
            image[:, side // 2 :] = bright
        images[row] = image.reshape(-1)
    return images, labels


def _batch_dataset(cfg: ExperimentConfig, rng):
    if cfg.data_source == "synthetic":
        need = cfg.train_count + cfg.test_count
        images, labels = synthetic_two_class_images(need, rng)
    else:
        images, labels = load_image_dataset(cfg.data_source)
        if images.shape[0] < cfg.train_count + cfg.test_count:
            raise DataError(
                f"dataset {cfg.data_source} holds {images.shape[0]} rows, "
                f"need {cfg.train_count + cfg.test_count}")
        if labels.max(initial=0) > 1 or labels.min(initial=0) < 0:
            raise DataError("batch task expects binary labels 0/1")
    split = cfg.train_count
    return (images[:split], labels[:split],
            images[split : split + cfg.test_count],
            labels[split : split + cfg.test_count])


def _stack_example(pixels, label, horizon, rng):
    inputs = coding.image_rate_encode(pixels, horizon, rng)
    outputs = coding.label_rate_encode(int(label), 2, horizon)
    return np.vstack([inputs, outputs])


def classify_accuracy(topology, params, banks, images, labels, horizon, rng) -> float:
    """Clamp encoded inputs, free-run the outputs, score decoded labels."""
    n_in = images.shape[1]
    hits = 0
    for pixels, label in zip(images, labels):
        plan = np.full((topology.n, horizon + 1), -1, dtype=np.int8)
        plan[:n_in] = coding.image_rate_encode(pixels, horizon, rng)
        raster = roll_forward(topology, params, banks, rng, clamped=plan)
        hits += int(coding.classify_decode(raster[n_in:]) == int(label))
    return hits / len(labels)


@dataclass
class BatchResult:
    topology: Topology
    banks: object
    params: object
    training: MetricSeries       # epoch -> mean train log likelihood
    accuracy: MetricSeries       # evaluation horizon -> test accuracy


def run_batch_classify(cfg: ExperimentConfig) -> BatchResult:
    """Train the two-layer classifier and sweep test accuracy over horizons."""
    if cfg.task != "batch-classify":
        raise ConfigError(f"run_batch_classify got task {cfg.task!r}")
    rng = np.random.default_rng(cfg.seed)
    train_images, train_labels, test_images, test_labels = _batch_dataset(cfg, rng)
    n_in = train_images.shape[1]
    topology = Topology.two_layer(n_in, 2)
    banks = raised_cosine_banks(cfg.basis_count, cfg.durations(), cfg.fb_durations())
    params = init_params(topology, banks.ff.size, banks.fb.size, rng,
                         scheme=cfg.init_scheme, scale=cfg.init_scale)
    examples = [_stack_example(pixels, label, cfg.horizon, rng)
                for pixels, label in zip(train_images, train_labels)]
    loglik = train_epochs(topology, params, banks, examples, cfg.epochs, cfg.eta)
    training = MetricSeries("epoch", np.arange(1, cfg.epochs + 1),
                            {"loglik": loglik})
    scores = [classify_accuracy(topology, params, banks, test_images,
                                test_labels, horizon, rng)
              for horizon in cfg.eval_horizons]
    accuracy = MetricSeries("T", np.asarray(cfg.eval_horizons, dtype=float),
                            {"accuracy": np.asarray(scores)})
    return BatchResult(topology, banks, params, training, accuracy)


class _ValueCoder:
    """Rate or time coding between scalars and neuron-major value blocks."""

    def __init__(self, scheme, n_visible, steps_per_value):
        self.scheme = scheme
        self.n_visible = n_visible
        self.steps = steps_per_value
        if scheme == "time":
            self.fields = coding.make_receptive_fields(n_visible, steps_per_value)
        elif scheme != "rate":
            raise ConfigError(f"unknown coding scheme {scheme!r}")

    def encode(self, value) -> np.ndarray:
        if self.scheme == "rate":
            block = coding.rate_encode(value, self.n_visible, self.steps)
        else:
            block = coding.time_encode(value, self.fields)
        return block.T    # neuron-major for the network

    def decode(self, neuron_block) -> float:
        block = np.asarray(neuron_block).T
        if self.scheme == "rate":
            return coding.rate_decode(block, self.n_visible)
        return coding.time_decode(block, self.fields)


@dataclass
class OnlineResult:
    topology: Topology
    banks: object
    params: object
    samples: MetricSeries    # per scored sample; see run_online_predict
    steps: MetricSeries      # per training step: signal, baseline, hidden count


def run_online_predict(cfg: ExperimentConfig) -> OnlineResult:
    """Stream the generated sequence through one continual variational pass.

    Per sample: score the prediction made one sample ago, run one training
    step per coding step with the value clamped onto the visible neurons,
    then branch the live state and free-run one coding window to predict
    the next value. The samples series indexes scored samples (positions
    2..length) with columns:

      mae_snn, mae_persistent: running mean absolute error so far
      err_snn, err_persistent: this sample's absolute errors
      spikes: total spikes in this sample's training window
      hidden_spikes: hidden part of the same count
      kind: block type of the sample (0 zero, 1 first motif, 2 second)
    """
    if cfg.task != "online-predict":
        raise ConfigError(f"run_online_predict got task {cfg.task!r}")
    rng = np.random.default_rng(cfg.seed)
    values, kinds = gen_blocks(default_templates(), cfg.length, rng)
    coder = _ValueCoder(cfg.coding_scheme, cfg.n_visible, cfg.steps_per_value)
    topology = Topology.fully_connected(cfg.n_visible, cfg.n_hidden)
    banks = raised_cosine_banks(cfg.basis_count, cfg.durations(), cfg.fb_durations())
    params = init_params(topology, banks.ff.size, banks.fb.size, rng,
                         scheme=cfg.init_scheme, scale=cfg.init_scale)
    eligibility = zeros_like_params(params)
    signal_state = LearningSignalState(use_baseline=cfg.baseline,
                                       baseline_step=cfg.baseline_step,
                                       reg_strength=cfg.alpha,
                                       target_rate=cfg.target_rate)
    state = NetworkState(topology, banks)
    steps_per_value = cfg.steps_per_value
    total_steps = cfg.length * steps_per_value
    signal_log = np.empty(total_steps)
    baseline_log = np.empty(total_steps)
    hidden_log = np.empty(total_steps)
    scored = cfg.length - 1
    err_snn = np.empty(scored)
    err_persist = np.empty(scored)
    spikes_col = np.empty(scored)
    hidden_col = np.empty(scored)
    prediction = 0.0
    step = 0
    for index in range(cfg.length):
        value = values[index]
        if index >= 1:
            err_snn[index - 1] = abs(prediction - value)
            err_persist[index - 1] = abs(
                persistent_predict(values[:index], cfg.n_visible) - value)
        block = coder.encode(value)
        window_hidden = 0
        for col in range(steps_per_value):
            record = online_doubly_sgd_step(
                topology, params, eligibility, signal_state, block[:, col],
                state, rng, cfg.eta, cfg.kappa)
            signal_log[step] = record.signal
            baseline_log[step] = record.baseline
            hidden_count = int(np.sum(record.hidden_spikes))
            hidden_log[step] = hidden_count
            window_hidden += hidden_count
            step += 1
        if index >= 1:
            spikes_col[index - 1] = float(block.sum()) + window_hidden
            hidden_col[index - 1] = window_hidden
        if index < cfg.length - 1:
            guesses = []
            for _ in range(cfg.rollouts):
                branch = state.copy()
                raster = rollout_from(params, branch, rng, steps=steps_per_value)
                guesses.append(coder.decode(raster[: cfg.n_visible]))
            prediction = float(np.mean(guesses))
    counts = np.arange(1, scored + 1)
    samples = MetricSeries(
        "sample", np.arange(2, cfg.length + 1, dtype=float),
        {
            "mae_snn": np.cumsum(err_snn) / counts,
            "mae_persistent": np.cumsum(err_persist) / counts,
            "spikes": spikes_col,
            "err_snn": err_snn,
            "err_persistent": err_persist,
            "hidden_spikes": hidden_col,
            "kind": kinds[1:].astype(float),
        })
    steps_series = MetricSeries(
        "t", np.arange(total_steps, dtype=float),
        {
            "learning_signal": signal_log,
            "baseline": baseline_log,
            "hidden_spike_count": hidden_log,
        })
    return OnlineResult(topology, banks, params, samples, steps_series)


def tail_mae(result: OnlineResult, window) -> tuple:
    """Mean absolute error of both predictors over the last `window` samples."""
    err_snn = result.samples.column("err_snn")
    err_persist = result.samples.column("err_persistent")
    if window > err_snn.size:
        raise DataError("tail window longer than the scored sample count")
    return float(err_snn[-window:].mean()), float(err_persist[-window:].mean())
