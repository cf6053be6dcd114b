"""Command-line surface: generate / train / eval / ablate.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import checkpoint as ckpt
from . import data as datamod
from . import numcore as nc
from . import rl
from .config import CsvSource, RunConfig
from .data import SyntheticSpec
from .errors import ConfigError, DataError
from .heads import PolicyValueNet
from .metrics import render_report
from .seeding import substream

log = logging.getLogger("tabppo")


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run configuration JSON")
    parser.add_argument("--data", help="CSV dataset path")
    parser.add_argument("--label-column", help="label column name")
    parser.add_argument("--trainer", choices=("ppo", "ce"))
    parser.add_argument("--encoder", choices=("transformer", "mlp"))
    parser.add_argument("--seed", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--out", help="output directory")


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file plus flag overrides; flags win."""
    base = RunConfig.from_file(args.config).to_dict() if args.config else {}
    if args.data:
        base["csv"] = {
            "path": args.data,
            "label_column": args.label_column
            or base.get("csv", {}).get("label_column", "label"),
        }
        base.pop("synthetic", None)
    elif args.label_column and "csv" in base:
        base["csv"]["label_column"] = args.label_column
    if "csv" not in base and "synthetic" not in base:
        # default desk-scale source so `tabppo train` works out of the box
        base["synthetic"] = dict(SyntheticSpec().__dict__)
    if args.trainer:
        base["trainer"] = args.trainer
    if args.encoder:
        enc = base.setdefault("encoder", {})
        enc["encoder_kind"] = args.encoder
    if args.seed is not None:
        base["seed"] = args.seed
        if "synthetic" in base:
            base["synthetic"]["seed"] = args.seed
    if args.epochs is not None:
        base["epochs"] = args.epochs
    if args.out:
        base["out"] = args.out
    return RunConfig.from_dict(base)


def _load_splits(cfg: RunConfig):
    split_seed = int(substream(cfg.seed, "split").integers(2 ** 31))
    if cfg.csv is not None:
        train, test, schema = datamod.load_csv_split(
            cfg.csv.path, cfg.csv.label_column, cfg.train_fraction, split_seed
        )
    else:
        ds, schema = datamod.generate_synthetic(cfg.synthetic)
        train, test = datamod.split(ds, cfg.train_fraction, split_seed)
        train, test = datamod.standardize(train, test)
        schema = train.schema
    return train, test, schema


def _train_run(cfg: RunConfig) -> dict:
    """Train per config; write resolved config, checkpoint, schema sidecar,
    per-epoch log and the final test report into cfg.out."""
    os.makedirs(cfg.out, exist_ok=True)
    cfg.save(os.path.join(cfg.out, "config.json"))
    train, test, schema = _load_splits(cfg)
    net = PolicyValueNet.create(schema, cfg.encoder, substream(cfg.seed, "init"))
    state = rl.TrainerState.create(net, cfg.reward.window_k, cfg.seed)
    with open(os.path.join(cfg.out, "metrics.jsonl"), "w", encoding="utf-8") as fh:
        if cfg.trainer == "ppo":
            rl.train_ppo(train, test, net, cfg.ppo, cfg.reward, cfg.epochs,
                         cfg.seed, log_file=fh, state=state)
        else:
            rl.train_cross_entropy(
                train, test, net, cfg.ppo.learning_rate, cfg.epochs, cfg.seed,
                batch_size=cfg.ppo.minibatch_size,
                max_grad_norm=cfg.ppo.max_grad_norm, log_file=fh, state=state)
    ckpt.save_checkpoint(cfg.out, state)
    rep = rl.evaluate(net, test if test.n else train)
    with open(os.path.join(cfg.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(render_report(rep) + "\n")
    with open(os.path.join(cfg.out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(rep.to_dict(), fh, indent=2)
        fh.write("\n")
    return rep.to_dict()


def cmd_generate(args) -> int:
    spec = SyntheticSpec(
        n_classes=args.classes,
        samples_per_class=[int(s) for s in args.samples_per_class.split(",")],
        n_categorical=args.categorical,
        vocab_size=args.vocab_size,
        n_numerical=args.numerical,
        class_separation=args.separation,
        seed=args.seed,
    )
    os.makedirs(args.out, exist_ok=True)
    ds, schema = datamod.generate_synthetic(spec)
    datamod.write_csv(ds, os.path.join(args.out, "data.csv"))
    ckpt.save_schema(schema, args.out)
    print(f"wrote {ds.n} rows to {os.path.join(args.out, 'data.csv')}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    result = _train_run(cfg)
    print(f"run complete: accuracy={result['accuracy']:.4f} "
          f"macro_f1={result['macro_f1']:.4f} (outputs in {cfg.out})")
    return 0


def cmd_eval(args) -> int:
    state = ckpt.load_checkpoint(args.checkpoint)
    net = state.net
    ds, _ = datamod.load_csv(args.data, args.label_column or "label",
                             schema=net.schema)
    rep = rl.evaluate(net, ds)
    print(render_report(rep))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(rep.to_dict(), fh, indent=2)
            fh.write("\n")
    return 0


VARIANTS = (
    ("tt_ppo", "transformer", "ppo"),
    ("tt_ce", "transformer", "ce"),
    ("mlp_ppo", "mlp", "ppo"),
)


def cmd_ablate(args) -> int:
    """Run the three encoder/trainer variants with a shared seed and data."""
    base = _resolve_config(args)
    rows = []
    for name, encoder_kind, trainer in VARIANTS:
        d = base.to_dict()
        d["encoder"]["encoder_kind"] = encoder_kind
        d["trainer"] = trainer
        d["out"] = os.path.join(base.out, name)
        cfg = RunConfig.from_dict(d)
        try:
            result = _train_run(cfg)
            rows.append((name, result["accuracy"], result["macro_f1"]))
        except (DataError, nc.NumericalError, ConfigError) as exc:
            log.error("variant %s failed: %s", name, exc)
            rows.append((name, None, None))
    print(f"Ablation (shared seed {base.seed}):")
    print(f"{'Variant':<10}  {'Accuracy':>9}  {'Macro F1':>9}")
    for name, acc, f1 in rows:
        if acc is None:
            print(f"{name:<10}  {'FAILED':>9}  {'FAILED':>9}")
        else:
            print(f"{name:<10}  {acc:>9.4f}  {f1:>9.4f}")
    with open(os.path.join(base.out, "ablation.json"), "w",
              encoding="utf-8") as fh:
        json.dump(
            {
                "seed": base.seed,
                "variants": {
                    name: None if acc is None
                    else {"accuracy": acc, "macro_f1": f1}
                    for name, acc, f1 in rows
                },
            },
            fh, indent=2,
        )
        fh.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabppo",
        description="PPO-trained tabular transformer for intrusion detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic CSV + schema")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--samples-per-class", default="200,200,200,200,200")
    p.add_argument("--categorical", type=int, default=8)
    p.add_argument("--vocab-size", type=int, default=12)
    p.add_argument("--numerical", type=int, default=6)
    p.add_argument("--separation", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one model per config")
    _add_override_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-column")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the three-variant comparison")
    _add_override_flags(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except DataError as exc:
        log.error("data error: %s", exc)
        return 3
    except nc.NumericalError as exc:
        log.error("numerical abort: %s", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
