"""``donut`` command line: synth / train / detect / evaluate / ablate / diagnose.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import model_io
from .detector import DetectConfig, detect, read_scores, write_scores
from .diagnostics import (export_latent, make_dataset, run_ablation, summarize_ablation,
                          write_ablation_csv, write_latent_csv)
from .metrics import GroundTruth, evaluate
from .series import (SeriesError, SplitSpec, downsample_labels, prepare, read_csv, restandardize,
                     split, write_csv)
from .synthetic import coerce, generate, load_config, parse_kv
from .training import TrainConfig, train

log = logging.getLogger("donut")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _train_config(args) -> TrainConfig:
    values = parse_kv(Path(args.config).read_text()) if args.config else {}
    cfg = coerce(TrainConfig, values)
    overrides = {k: getattr(args, k) for k in ("epochs", "W", "K", "seed")
                 if getattr(args, k, None) is not None}
    return dataclasses.replace(cfg, **overrides)


def cmd_synth(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    write_csv(args.output, generate(cfg).raw)


def cmd_train(args):
    cfg = _train_config(args)
    raw = read_csv(args.data)
    spec = SplitSpec(1.0 - args.valid_ratio, args.valid_ratio, 0.0)
    tr, va, _ = split(prepare(raw), spec)
    rng = np.random.default_rng(cfg.seed)
    tr = downsample_labels(tr, args.label_ratio, rng)
    va = downsample_labels(va, args.label_ratio, rng)
    tr = restandardize(tr)
    va = restandardize(va, (tr.mean, tr.std))
    params, trace = train(tr, va, cfg)
    if trace.rows and not np.isfinite(trace.rows[-1].train_m_elbo):
        raise FloatingPointError("training diverged (non-finite loss)")
    trace.retained_labels = int(tr.anomaly_mask.sum() + va.anomaly_mask.sum())
    model_io.save(args.model, params)
    trace_path = args.trace or str(Path(args.model).with_suffix(".trace.csv"))
    trace.write_csv(trace_path)
    print(f"retained_labels={trace.retained_labels} best_epoch={trace.best_epoch}")


def cmd_detect(args):
    params = model_io.load(args.model)
    raw = read_csv(args.data)
    series = prepare(raw, (params.mean, params.std))
    if len(series) < params.W:
        raise SeriesError(f"data has {len(series)} points but the model window is {params.W}")
    cfg = DetectConfig(mcmc_iters=args.mcmc_iters, mc_samples=args.samples, seed=args.seed,
                       use_mcmc=not args.no_mcmc, use_prior=args.prior)
    scores = detect(series, params, cfg)
    if not np.all(np.isfinite(scores[~np.isnan(scores)])):
        raise FloatingPointError("non-finite anomaly score")
    write_scores(args.output, series.timestamps, scores)


def cmd_evaluate(args):
    ts, scores = read_scores(args.scores)
    raw = read_csv(args.truth)
    pos = {int(t): i for i, t in enumerate(raw.timestamps)}
    aligned = np.full(len(raw.timestamps), np.nan)
    for t, s in zip(ts, scores):
        if int(t) not in pos:
            raise SeriesError(f"score timestamp {t} not present in truth file")
        aligned[pos[int(t)]] = s
    truth = GroundTruth(raw.labels.astype(bool), np.isnan(raw.values))
    report = evaluate(truth, aligned)
    text = report.summary()
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n")
    if args.thresholds:
        report.write_threshold_csv(args.thresholds)


def cmd_ablate(args):
    cfg = _train_config(args)
    data = make_dataset(read_csv(args.data), args.label_ratio, cfg.seed)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    rows = run_ablation(data, cfg, DetectConfig(mc_samples=args.samples), seeds=seeds)
    write_ablation_csv(args.output, rows)
    for name, (f, ap) in summarize_ablation(rows).items():
        print(f"{name}: best_f={f:.4f} auc={ap:.4f}")


def cmd_diagnose(args):
    params = model_io.load(args.model)
    series = prepare(read_csv(args.data), (params.mean, params.std))
    write_latent_csv(args.output, export_latent(series, params))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="donut", description="Donut anomaly detection for seasonal KPIs")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a labeled synthetic KPI CSV")
    s.add_argument("config")
    s.add_argument("output")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)

    def train_flags(sp):
        sp.add_argument("--config", help="flat key = value training config")
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--W", type=int)
        sp.add_argument("--K", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--label-ratio", type=float, default=0.0,
                        help="fraction of anomaly labels kept for training (0 = unsupervised)")

    t = sub.add_parser("train", help="train a model on a KPI CSV")
    t.add_argument("data")
    t.add_argument("--model", required=True)
    t.add_argument("--trace")
    t.add_argument("--valid-ratio", type=float, default=0.3)
    train_flags(t)
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("detect", help="score a KPI CSV")
    d.add_argument("data")
    d.add_argument("--model", required=True)
    d.add_argument("--output", required=True)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--samples", type=int, default=1024)
    d.add_argument("--mcmc-iters", type=int, default=10)
    d.add_argument("--no-mcmc", action="store_true")
    d.add_argument("--prior", action="store_true", help="score with z drawn from the prior")
    d.set_defaults(func=cmd_detect)

    e = sub.add_parser("evaluate", help="segment-adjusted metrics for a scores CSV")
    e.add_argument("scores")
    e.add_argument("truth")
    e.add_argument("--report")
    e.add_argument("--thresholds")
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("ablate", help="compare baseline VAE and technique combinations")
    a.add_argument("data")
    a.add_argument("--output", required=True)
    a.add_argument("--seeds", default="0")
    a.add_argument("--samples", type=int, default=1024)
    train_flags(a)
    a.set_defaults(func=cmd_ablate)

    g = sub.add_parser("diagnose", help="export per-window posterior means and stds")
    g.add_argument("data")
    g.add_argument("--model", required=True)
    g.add_argument("--output", required=True)
    g.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (FloatingPointError, OverflowError) as exc:
        print(f"donut: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, KeyError) as exc:
        print(f"donut: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
