"""Command-line entry point: ``pursuitgan {gen-data,train,eval,sweep,multirun}``."""

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .cgan import TrainConfig
from .config import ConfigError, config_digest, format_config, load_config
from .dataset import (
    ValidationError,
    attach_s2,
    fit_norm_stats,
    generate_dataset,
    load_csv,
    load_normstats,
    save_csv,
    save_normstats,
    split,
)
from .evaluation import (
    DEFAULT_SETTINGS,
    PipelineConfig,
    evaluate,
    multirun,
    sensitivity_sweep,
    write_deltas_csv,
    write_multirun_csv,
    write_report_json,
    write_sensitivity_csv,
)
from .game import GameConfig
from .pipeline import train_two_step
from .policy import TwoStepModel, fit_randomized, load_model, save_model, train_single_step
from .rng import derive_seed
from .scorer import save_alpha_csv

log = logging.getLogger("pursuitgan")

EXIT_CONFIG, EXIT_IO, EXIT_VALIDATION = 2, 3, 4
MANIFEST = "manifest.json"


def _sha(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _timestamp():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = float(epoch) if epoch else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def write_manifest(out, command, cfg, seeds, args, parents=()):
    """Record inputs, seeds and artifact hashes of one command's output directory."""
    artifacts = {}
    for root, _, files in os.walk(out):
        for name in files:
            path = os.path.join(root, name)
            rel = os.path.relpath(path, out)
            if rel != MANIFEST:
                artifacts[rel] = _sha(path)
    parent_digests = {}
    for p in parents:
        mp = os.path.join(p, MANIFEST)
        if os.path.exists(mp):
            parent_digests[os.path.abspath(p)] = _sha(mp)
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config_digest": config_digest(cfg),
        "config": format_config(cfg),
        "seeds": seeds,
        "args": args,
        "artifacts": dict(sorted(artifacts.items())),
        "parents": parent_digests,
        "created": _timestamp(),
    }
    with open(os.path.join(out, MANIFEST), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_game_config(path):
    if path is None:
        return GameConfig()
    return load_config(path)


def _load_data_dir(data):
    """Config, full dataset, norm stats, train ids and normstats digest of a gen-data output."""
    cfg = load_config(os.path.join(data, "config.txt"))
    ds = load_csv(os.path.join(data, "episodes.csv"), cfg)
    stats, split_info, digest = load_normstats(os.path.join(data, "normstats.json"))
    if split_info is None:
        raise ValidationError(f"{data}: normstats.json has no split record")
    return cfg, ds, stats, split_info["train_ids"], digest


def _split_from_ids(ds, train_ids):
    train_set = set(train_ids)
    test_ids = [i for i in ds.episode_ids if int(i) not in train_set]
    return ds.subset(train_ids), ds.subset(test_ids)


def _train_config(args):
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)


def cmd_gen_data(args):
    cfg = _load_game_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    ds = generate_dataset(cfg, args.n, args.seed, workers=args.threads)
    split_seed = derive_seed(args.seed, 1)
    train, _ = split(ds, args.train_frac, split_seed)
    stats = fit_norm_stats(train)
    ds = attach_s2(ds, stats)
    save_csv(ds, os.path.join(args.out, "episodes.csv"))
    split_info = {
        "train_frac": args.train_frac,
        "split_seed": split_seed,
        "train_ids": [int(i) for i in train.episode_ids],
    }
    save_normstats(stats, os.path.join(args.out, "normstats.json"), ds.provenance, split_info)
    with open(os.path.join(args.out, "config.txt"), "w") as fh:
        fh.write(format_config(cfg))
    success = float(np.mean(ds.column("d_rb") < cfg.catch_eps))
    log.info("generated %d episodes, success fraction %.4f", len(ds), success)
    write_manifest(
        args.out, "gen-data", cfg, {"master": args.seed, "split": split_seed},
        {"n": args.n, "train_frac": args.train_frac},
    )


def cmd_train(args):
    cfg, ds, stats, train_ids, digest = _load_data_dir(args.data)
    train, _ = _split_from_ids(ds, train_ids)
    os.makedirs(args.out, exist_ok=True)
    prov = {"normstats_digest": digest, "data": os.path.abspath(args.data), "seed": args.seed}
    tcfg = _train_config(args)
    if args.model == "two-step":
        model, table, scored = train_two_step(train, cfg, tcfg, stats, n_mc=args.n_mc)
        save_model(model, args.out, prov)
        s1 = np.full(len(ds), np.nan)
        pos = {int(e): i for i, e in enumerate(ds.episode_ids)}
        for eid, v in zip(table.episode_ids, table.s1):
            s1[pos[int(eid)]] = v
        save_csv(ds.with_scores(s1=s1), os.path.join(args.out, "episodes.csv"))
        save_alpha_csv(table, os.path.join(args.out, "scores_alpha.csv"))
    else:
        log.info("training single-step generator on %d rows", len(train))
        save_model(train_single_step(train, cfg, tcfg), args.out, prov)
    write_manifest(
        args.out, "train", cfg, {"master": args.seed},
        {"model": args.model, "epochs": args.epochs, "batch_size": args.batch_size, "n_mc": args.n_mc},
        parents=[args.data],
    )


def _load_checked(bundle, digest, kind):
    model, prov = load_model(bundle)
    if prov.get("normstats_digest") != digest:
        raise ValidationError(f"{bundle}: trained against different normalization statistics")
    if (kind == "two-step") != isinstance(model, TwoStepModel):
        raise ValidationError(f"{bundle}: expected a {kind} model bundle")
    return model


def cmd_eval(args):
    cfg, ds, stats, train_ids, digest = _load_data_dir(args.data)
    two = _load_checked(args.two_step, digest, "two-step")
    single = _load_checked(args.single_step, digest, "single-step")
    train, test = _split_from_ids(ds, train_ids)
    report = evaluate(two, single, fit_randomized(train), cfg, test, args.seed, dataset_digest=digest)
    os.makedirs(args.out, exist_ok=True)
    write_report_json(report, os.path.join(args.out, "report.json"))
    write_deltas_csv(report, os.path.join(args.out, "deltas.csv"))
    log.info("mean deltas %s  violations %s", report.mean_deltas, report.violations)
    write_manifest(
        args.out, "eval", cfg, {"master": args.seed}, {},
        parents=[args.data, args.two_step, args.single_step],
    )


def _parse_settings(items):
    out = []
    for item in items:
        try:
            a, b = (float(x) for x in item.split(","))
        except ValueError:
            raise ConfigError(f"bad score setting {item!r}; expected s1,s2") from None
        if not (0 <= a <= 1 and 0 <= b <= 1):
            raise ConfigError(f"score setting {item!r} outside [0, 1]")
        out.append((a, b))
    return out


def cmd_sweep(args):
    settings = _parse_settings(args.settings) if args.settings else list(DEFAULT_SETTINGS)
    cfg, ds, stats, train_ids, digest = _load_data_dir(args.data)
    two = _load_checked(args.two_step, digest, "two-step")
    _, test = _split_from_ids(ds, train_ids)
    sweep = sensitivity_sweep(two, cfg, test, settings, stats["d_rb"], args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_sensitivity_csv(sweep, os.path.join(args.out, "sensitivity.csv"))
    for s in sweep:
        log.info("setting (%.2f, %.2f): mean realized score %.4f", s["s1"], s["s2"], s["mean_score"])
    write_manifest(
        args.out, "sweep", cfg, {"master": args.seed}, {"settings": settings},
        parents=[args.data, args.two_step],
    )


def cmd_multirun(args):
    cfg = _load_game_config(args.config)
    pcfg = PipelineConfig(
        game=cfg,
        n_episodes=args.n,
        train_frac=args.train_frac,
        train=TrainConfig(epochs=args.epochs, batch_size=args.batch_size),
        n_mc=args.n_mc,
    )
    result = multirun(args.runs, args.seed, pcfg, workers=args.threads)
    os.makedirs(args.out, exist_ok=True)
    write_multirun_csv(result, os.path.join(args.out, "multirun.csv"))
    with open(os.path.join(args.out, "multirun.json"), "w") as fh:
        json.dump(result, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for k, box in result["summary"].items():
        log.info("%s  %s", k, box)
    write_manifest(
        args.out, "multirun", cfg, {"master": args.seed},
        {"runs": args.runs, "n": args.n, "train_frac": args.train_frac, "epochs": args.epochs,
         "pipeline": {k: v for k, v in asdict(pcfg).items() if k != "game"}},
    )


def build_parser():
    p = argparse.ArgumentParser(prog="pursuitgan", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, n_default=None, frac_default=None):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=True)
        sp.add_argument("--threads", type=int, default=1)
        if n_default is not None:
            sp.add_argument("--config")
            sp.add_argument("--n", type=int, default=n_default)
            sp.add_argument("--train-frac", type=float, default=frac_default)

    def training(sp):
        sp.add_argument("--epochs", type=int, default=300)
        sp.add_argument("--batch-size", type=int, default=128)
        sp.add_argument("--n-mc", type=int, default=30)

    sp = sub.add_parser("gen-data", help="simulate scripted episodes")
    common(sp, 15000, 0.75)
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("train", help="train a two-step or single-step model")
    common(sp)
    training(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--model", choices=("two-step", "single-step"), default="two-step")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="paired evaluation against the benchmarks")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--two-step", required=True)
    sp.add_argument("--single-step", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="query-score sensitivity histograms")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--two-step", required=True)
    sp.add_argument("--settings", nargs="+", metavar="S1,S2")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("multirun", help="repeat split/train/evaluate over derived seeds")
    common(sp, 3750, 0.8)
    training(sp)
    sp.add_argument("--runs", type=int, default=5)
    sp.set_defaults(func=cmd_multirun)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with threadpool_limits(limits=args.threads):
            args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, ValueError, KeyError) as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
