"""Command-line entry points: simulate, train, eval, explain, metrics.

Exit codes: 0 success, 1 usage error, 2 input/output error, 3 state mismatch
(for example a checkpoint trained for a different gaze mode).
"""
import argparse
import csv
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attribution import explain, summarize_context, write_attribution_csv, write_context_summary_csv
from .behavior import (FACTORS, compute_trial_metrics, dataset_thresholds, descriptive_table,
                       write_metrics_csv, write_table_csv)
from .dataset import build_samples, load_dataset, split_by_participant
from .errors import GazexError, IncompleteTrialError, ParseError
from .evalsuite import horizon_report, min_k_eval, write_reports_csv
from .features import GazeMode
from .neuralnet.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .neuralnet.train import TrainConfig, train
from .synthgen import generate_dataset

log = logging.getLogger("gazex")

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_STATE = 3
SPLIT = (6, 1, 3)


class UsageError(Exception):
    pass


class StateMismatch(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _gaze(text):
    try:
        return GazeMode.parse(text)
    except GazexError:
        choices = ", ".join(m.value for m in GazeMode)
        raise argparse.ArgumentTypeError(f"invalid gaze mode {text!r} (choose from {choices})") from None


def _onoff(text):
    t = str(text).strip().lower()
    if t in ("on", "1", "true", "yes"):
        return True
    if t in ("off", "0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on or off, got {text!r}")


def read_config_file(path):
    """``key = value`` lines; ``#`` starts a comment. Keys use flag names."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def build_parser():
    p = _Parser(prog="gazex", description="Gaze-aware pedestrian trajectory prediction pipeline.")
    p.add_argument("--version", action="version", version=f"gazex {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a synthetic dataset")
    s.add_argument("--participants", type=_positive, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output dataset directory")

    def common(q, checkpoint_required):
        q.add_argument("--config", help="key = value file; command-line flags take precedence")
        q.add_argument("--data", required=True, help="dataset directory")
        q.add_argument("--out", required=True, help="output directory")
        q.add_argument("--checkpoint", required=checkpoint_required,
                       help="checkpoint path" + ("" if checkpoint_required else " (default OUT/model.gzx)"))

    t = sub.add_parser("train", help="train a model")
    common(t, False)
    t.add_argument("--gaze", type=_gaze, default=GazeMode.NONE)
    t.add_argument("--context", type=_onoff, default=True)
    t.add_argument("--epochs", type=_positive, default=100)
    t.add_argument("--batch-size", type=_positive, default=64)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--hidden-motion", type=_positive, default=64)
    t.add_argument("--hidden-distance", type=_positive, default=32)
    t.add_argument("--hidden-gaze", type=_positive, default=32)
    t.add_argument("--hidden-dense", type=_positive, default=128)
    t.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--split-seed", type=int, default=0)

    e = sub.add_parser("eval", help="horizon tables on the test split")
    common(e, True)
    e.add_argument("--gaze", type=_gaze, help="expected gaze mode; must match the checkpoint")
    e.add_argument("--context", type=_onoff, help="expected context flag; must match the checkpoint")
    e.add_argument("--mode", choices=("mean", "min20", "both"), default="both")
    e.add_argument("--k", type=_positive, default=20)
    e.add_argument("--seed", type=int, default=0)

    x = sub.add_parser("explain", help="expected-gradients attribution")
    common(x, True)
    x.add_argument("--n-background", type=_positive, default=100)
    x.add_argument("--n-explain", type=_positive, default=50)
    x.add_argument("--n-alpha", type=_positive, default=1)
    x.add_argument("--seed", type=int, default=0)

    m = sub.add_parser("metrics", help="behavioural indicators grouped by scenario factor")
    m.add_argument("--config", help="key = value file; command-line flags take precedence")
    m.add_argument("--data", required=True)
    m.add_argument("--out", required=True)
    return p


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = read_config_file(args.config)
        except OSError as exc:
            raise FileNotFoundError(f"cannot read config {args.config}: {exc}") from exc
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            parser.error(f"unknown config key(s): {', '.join(unknown)}")
        # config values become defaults, so explicit flags still win
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
        for a in sub._actions:
            if a.dest in cfg and isinstance(getattr(args, a.dest), str) and a.type is not None:
                try:
                    setattr(args, a.dest, a.type(getattr(args, a.dest)))
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    parser.error(f"config key {a.dest}: {exc}")
    return args


def _versions():
    return {"gazex": __version__, "numpy": np.__version__, "python": platform.python_version()}


def _config_hash(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _write_manifest(out, command, cfg, extra=None):
    info = {"command": command, "config": cfg, "config_hash": _config_hash(cfg), "versions": _versions()}
    info.update(extra or {})
    with open(Path(out) / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _load(data):
    trials = load_dataset(data)
    if not trials:
        raise FileNotFoundError(f"dataset {data} contains no completed trials")
    return trials


def _splits(trials, mode, split_seed):
    parts = split_by_participant(trials, SPLIT, split_seed)
    return [build_samples(p, mode) for p in parts]


def cmd_simulate(args):
    out = _outdir(args.out)
    trials = generate_dataset(args.participants, args.seed, out_dir=out, include_incomplete=True)
    done = sum(t.completed for t in trials)
    cfg = {"participants": args.participants, "seed": args.seed}
    _write_manifest(out, "simulate", cfg, {"trials": len(trials), "completed": done})
    log.info("wrote %d trials (%d completed) to %s", len(trials), done, out)
    return 0


def cmd_train(args):
    out = _outdir(args.out)
    trials = _load(args.data)
    cfg = TrainConfig(hidden_motion=args.hidden_motion, hidden_distance=args.hidden_distance,
                      hidden_gaze=args.hidden_gaze, hidden_dense=args.hidden_dense, lr=args.lr,
                      batch_size=args.batch_size, epochs=args.epochs, seed=args.seed, dtype=args.dtype)
    tr, va, _ = _splits(trials, args.gaze, args.split_seed)
    model, history = train(cfg, tr, va, args.gaze, args.context)
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "model.gzx"
    meta = {"split_seed": args.split_seed, "train_seed": args.seed, "best_epoch": history.best_epoch,
            "train_samples": len(tr), "val_samples": len(va)}
    save_checkpoint(ckpt, model, meta)
    rows = history.to_rows()
    with open(out / "history.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "lr", "train_nll", "val_nll", "best"])
        for r in rows:
            w.writerow([r["epoch"], repr(r["lr"]), repr(r["train_nll"]), repr(r["val_nll"]), r["best"]])
    run = {"gaze": args.gaze.value, "context": args.context, "split_seed": args.split_seed,
           **{k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(cfg).items()}}
    _write_manifest(out, "train", run, {"best_epoch": history.best_epoch, "checkpoint": ckpt.name})
    return 0


def _checkpoint(args):
    path = Path(args.checkpoint)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint {path} not found")
    try:
        return load_checkpoint(path)
    except CheckpointError as exc:
        raise OSError(str(exc)) from exc


def cmd_eval(args):
    model, meta = _checkpoint(args)
    if args.gaze is not None and args.gaze is not model.gaze_mode:
        raise StateMismatch(f"checkpoint was trained with gaze mode {model.gaze_mode.value}, not {args.gaze.value}")
    if args.context is not None and args.context != model.config.include_context:
        raise StateMismatch(f"checkpoint context flag is {'on' if model.config.include_context else 'off'}")
    out = _outdir(args.out)
    _, _, test = _splits(_load(args.data), model.gaze_mode, meta.get("split_seed", 0))
    reports = {}
    if args.mode in ("mean", "both"):
        reports["mean"] = horizon_report(model, test)
    if args.mode in ("min20", "both"):
        reports[f"min{args.k}"] = min_k_eval(model, test, args.k, args.seed)
    write_reports_csv(reports, out / "horizons.csv")
    cfg = {"mode": args.mode, "k": args.k, "seed": args.seed, "gaze": model.gaze_mode.value,
           "context": model.config.include_context, "split_seed": meta.get("split_seed", 0)}
    _write_manifest(out, "eval", cfg, {"test_samples": len(test)})
    return 0


def cmd_explain(args):
    model, meta = _checkpoint(args)
    out = _outdir(args.out)
    tr, _, test = _splits(_load(args.data), model.gaze_mode, meta.get("split_seed", 0))
    chosen, attr = explain(model, test, tr, args.n_explain, args.n_background, args.n_alpha, args.seed)
    write_attribution_csv(chosen, attr, out / "attributions.csv")
    write_context_summary_csv(summarize_context(attr, "x") + summarize_context(attr, "y"),
                              out / "context_summary.csv")
    cfg = {"n_background": args.n_background, "n_explain": args.n_explain, "n_alpha": args.n_alpha,
           "seed": args.seed, "split_seed": meta.get("split_seed", 0)}
    _write_manifest(out, "explain", cfg, {"explained": len(chosen)})
    return 0


def cmd_metrics(args):
    out = _outdir(args.out)
    trials = _load(args.data)
    th = dataset_thresholds(trials)
    metrics = []
    for t in trials:
        try:
            metrics.append(compute_trial_metrics(t, th))
        except IncompleteTrialError as exc:
            log.warning("skipping %s", exc)
    if not metrics:
        raise FileNotFoundError("no trial yielded metrics")
    write_metrics_csv(metrics, out / "trial_metrics.csv")
    rows = [r for f in FACTORS for r in descriptive_table(metrics, f)]
    write_table_csv(rows, out / "descriptive.csv")
    cfg = {"initiation_threshold": th.initiation_threshold, "backward_threshold": th.backward_threshold}
    _write_manifest(out, "metrics", cfg, {"trials": len(metrics)})
    return 0


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "eval": cmd_eval, "explain": cmd_explain,
            "metrics": cmd_metrics}


def main(argv=None):
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return exc.code
    except UsageError as exc:
        print(f"gazex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gazex: error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except StateMismatch as exc:
        print(f"gazex: state mismatch: {exc}", file=sys.stderr)
        return EXIT_STATE
    except (OSError, ParseError) as exc:
        print(f"gazex: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GazexError as exc:
        print(f"gazex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
