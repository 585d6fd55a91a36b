"""Command line entry point.

Subcommands: train-batch, train-online, encode, decode, simulate,
oracle-elbo. Exit codes: 0 success, 1 configuration or usage problems,
2 data problems. Every run's randomness flows from one seed (config
`seed`, overridable with --seed).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import coding, figures
from .config import load_config
from .errors import ConfigError, DataError, SpikeGLMError
from .experiments import run_batch_classify, run_online_predict
from .kernels import raised_cosine_banks
from .network import Topology, init_params, roll_forward
from .raster_io import (load_checkpoint, load_plan, load_raster,
                        save_checkpoint, save_raster)
from .train_variational import elbo_exhaustive


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="experiment config file")
    shared.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    shared.add_argument("--out", default=".", help="output directory")

    parser = argparse.ArgumentParser(
        prog="spikeglm",
        description="Probabilistic spiking networks: train, simulate, code values.")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("train-batch", parents=[shared],
                        help="train the batch classifier and sweep accuracy")
    commands.add_parser("train-online", parents=[shared],
                        help="stream the prediction task with online learning")

    for name, extra in (("encode", "value -> raster CSV"),
                        ("decode", "raster CSV -> value")):
        cmd = commands.add_parser(name, parents=[shared], help=extra)
        cmd.add_argument("--scheme", choices=("rate", "time", "label"),
                         default="rate")
        cmd.add_argument("--neurons", type=int, default=9,
                         help="visible neurons (classes for --scheme label)")
        cmd.add_argument("--steps", type=int, default=5,
                         help="steps per value (horizon for --scheme label)")
        if name == "encode":
            cmd.add_argument("--value", type=float, required=True,
                             help="value in [0,1], or the label index")
        else:
            cmd.add_argument("--raster", required=True, help="raster CSV to decode")

    simulate = commands.add_parser("simulate", parents=[shared],
                                   help="roll the network forward, honoring clamps")
    simulate.add_argument("--steps", type=int, default=None)
    simulate.add_argument("--clamp", default=None,
                          help="clamp plan CSV (-1 free, 0/1 forced)")
    simulate.add_argument("--checkpoint", default=None,
                          help="parameter checkpoint; defaults to a fresh init")

    oracle = commands.add_parser("oracle-elbo", parents=[shared],
                                 help="exhaustive variational bound on a tiny network")
    oracle.add_argument("--raster", required=True, help="observed spikes CSV")
    oracle.add_argument("--checkpoint", default=None)
    return parser


def _require_config(args):
    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    return load_config(args.config, seed=args.seed)


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _path(args, name) -> str:
    return os.path.join(_outdir(args), name)


def _cmd_train_batch(args) -> int:
    cfg = _require_config(args)
    result = run_batch_classify(cfg)
    result.training.save(_path(args, "training.csv"), columns=["loglik"])
    result.accuracy.save(_path(args, "accuracy.csv"), columns=["accuracy"])
    save_checkpoint(_path(args, "checkpoint.csv"), result.topology, result.params)
    if cfg.figures:
        figures.save_lines(_path(args, "training.png"), result.training,
                           ylabel="mean log likelihood", title="training")
        figures.save_lines(_path(args, "accuracy.png"), result.accuracy,
                           ylabel="test accuracy", title="accuracy by horizon")
    for horizon, score in zip(result.accuracy.index, result.accuracy.column("accuracy")):
        print(f"T={int(horizon)} accuracy={score:.3f}")
    return 0


def _cmd_train_online(args) -> int:
    cfg = _require_config(args)
    result = run_online_predict(cfg)
    result.samples.save(_path(args, "prediction.csv"),
                        columns=["mae_snn", "mae_persistent", "spikes"])
    result.steps.save(_path(args, "signal.csv"),
                      columns=["learning_signal", "baseline", "hidden_spike_count"])
    save_checkpoint(_path(args, "checkpoint.csv"), result.topology, result.params)
    if cfg.figures:
        figures.save_lines(_path(args, "prediction.png"), result.samples,
                           columns=["mae_snn", "mae_persistent"],
                           ylabel="running MAE", title="online prediction")
        figures.save_lines(_path(args, "signal.png"), result.steps,
                           columns=["learning_signal", "baseline"],
                           ylabel="learning signal", title="learning signal")
    final_snn = result.samples.column("mae_snn")[-1]
    final_persist = result.samples.column("mae_persistent")[-1]
    print(f"final running MAE: model={final_snn:.4f} persistent={final_persist:.4f}")
    return 0


def _value_coder(args):
    if args.scheme == "time":
        return coding.make_receptive_fields(args.neurons, args.steps)
    return None


def _cmd_encode(args) -> int:
    if args.scheme == "label":
        block = coding.label_rate_encode(int(args.value), args.neurons, args.steps)
    elif args.scheme == "rate":
        block = coding.rate_encode(args.value, args.neurons, args.steps).T
    else:
        block = coding.time_encode(args.value, _value_coder(args)).T
    out = _path(args, "encoded.csv")
    save_raster(out, block)
    print(out)
    return 0


def _cmd_decode(args) -> int:
    raster = load_raster(args.raster)
    if args.scheme == "label":
        print(coding.classify_decode(raster))
        return 0
    if raster.shape != (args.neurons, args.steps):
        raise DataError(
            f"{args.raster}: raster is {raster.shape}, expected "
            f"({args.neurons}, {args.steps})")
    if args.scheme == "rate":
        value = coding.rate_decode(raster.T, args.neurons)
    else:
        value = coding.time_decode(raster.T, _value_coder(args))
    print(repr(value))
    return 0


def _online_network(cfg):
    topology = Topology.fully_connected(cfg.n_visible, cfg.n_hidden)
    banks = raised_cosine_banks(cfg.basis_count, cfg.durations(), cfg.fb_durations())
    return topology, banks


def _load_params(args, cfg, topology, banks, rng):
    if args.checkpoint:
        return load_checkpoint(args.checkpoint, topology, banks.ff.size,
                               banks.fb.size)
    return init_params(topology, banks.ff.size, banks.fb.size, rng,
                       scheme=cfg.init_scheme, scale=cfg.init_scale)


def _cmd_simulate(args) -> int:
    cfg = _require_config(args)
    topology, banks = _online_network(cfg)
    rng = np.random.default_rng(cfg.seed if args.seed is None else args.seed)
    params = _load_params(args, cfg, topology, banks, rng)
    plan = None
    if args.clamp is not None:
        plan = load_plan(args.clamp)
        if plan.shape[0] != topology.n:
            raise DataError(
                f"{args.clamp}: plan has {plan.shape[0]} rows, network has {topology.n}")
    elif args.steps is None:
        raise ConfigError("simulate needs --steps or --clamp")
    raster = roll_forward(topology, params, banks, rng,
                          steps=args.steps, clamped=plan)
    out = _path(args, "simulated.csv")
    save_raster(out, raster)
    if cfg.figures:
        figures.save_raster_plot(_path(args, "simulated.png"), raster,
                                 title="simulated raster")
    print(out)
    return 0


def _cmd_oracle_elbo(args) -> int:
    cfg = _require_config(args)
    topology, banks = _online_network(cfg)
    rng = np.random.default_rng(cfg.seed if args.seed is None else args.seed)
    params = _load_params(args, cfg, topology, banks, rng)
    observed = load_raster(args.raster)
    if observed.shape[0] != len(topology.observed):
        raise DataError(
            f"{args.raster}: raster has {observed.shape[0]} rows, network has "
            f"{len(topology.observed)} observed neurons")
    elbo, loglik = elbo_exhaustive(topology, params, banks, observed)
    print("elbo,loglik")
    print(f"{elbo!r},{loglik!r}")
    return 0


_COMMANDS = {
    "train-batch": _cmd_train_batch,
    "train-online": _cmd_train_online,
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "simulate": _cmd_simulate,
    "oracle-elbo": _cmd_oracle_elbo,
}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        # --help exits 0; argparse usage errors exit 2, which is reserved
        # for data problems here, so fold them into the config-error code
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except SpikeGLMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
