"""Command-line entry point: synth, ingest, decimate, features, train, eval, sweep."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import synth
from .classify import fit_classifier, load_model, predict_scores, read_model_metadata, save_model
from .config import RunConfig, config_hash, load_config, override, save_config
from .dataio import ACTIVITIES, decimate_cohort, load_cohort, save_cohort, validate_cohort
from .evaluate import (AXES, MODES, FeatureCache, compute_metrics, mode_splits, report_document, run_sweep,
                       write_report)
from .pipeline import extract_cohort, read_feature_csv, read_feature_header, write_feature_csv

log = logging.getLogger("lfi_ident")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def effective_config(args) -> RunConfig:
    """Config file (or ``$LFI_IDENT_CONFIG``), then ``--set`` pairs, then dedicated flags."""
    cfg = load_config(args.config)
    changes = {}
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(f"--set expects key=value, got {item!r}")
        changes[key] = _parse_value(value)
    if getattr(args, "window_seconds", None) is not None:
        changes["features.window_seconds"] = args.window_seconds
    if getattr(args, "rate", None) is not None and args.command in ("features", "sweep"):
        changes["rate_hz"] = args.rate
    if getattr(args, "seed", None) is not None and args.command != "synth":
        changes.update({"seed": args.seed, "linear.seed": args.seed, "gbdt.seed": args.seed})
    try:
        return override(cfg, **changes) if changes else cfg
    except TypeError as exc:
        raise CliError(f"unknown config key: {exc}") from None


def _require(path: str | Path) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"missing file: {p}")
    return p


def _config_sidecar(out: Path) -> Path:
    return out.with_name(out.stem + ".config.json") if out.suffix else out / "config.json"


def _check_feature_hash(path: Path, cfg: RunConfig) -> None:
    stored = read_feature_header(path).get("config_hash")
    if stored is not None and stored != config_hash(cfg.features):
        raise CliError(f"config-hash mismatch: {path} was built with {stored}, "
                       f"current feature config is {config_hash(cfg.features)}")


# --- commands -------------------------------------------------------------

def cmd_synth(args, cfg: RunConfig) -> int:
    acts = tuple(args.activities.split(",")) if args.activities else ACTIVITIES
    shifted = tuple(a for a in (args.shift or "").split(",") if a)
    cohort = synth.generate_cohort(args.subjects, acts, args.duration, args.rate or 1000.0, args.seed or 0,
                                   args.separation, shifted_activities=shifted)
    manifest = save_cohort(cohort, args.out)
    params = {"n_subjects": args.subjects, "activities": list(acts), "duration_s": args.duration,
              "rate_hz": args.rate or 1000.0, "master_seed": args.seed or 0, "separation": args.separation,
              "shifted_activities": list(shifted)}
    (Path(args.out) / "synth.json").write_text(json.dumps(
        {"params": params, "config_hash": config_hash(params)}, indent=2, sort_keys=True) + "\n")
    log.info("wrote %d recordings to %s", len(cohort.recordings), args.out)
    print(manifest)
    return 0


def cmd_ingest(args, cfg: RunConfig) -> int:
    cohort = load_cohort(_require(args.manifest))
    report = validate_cohort(cohort)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if not report.ok:
        raise CliError(f"cohort invalid: {report.violations[0]}")
    return 0


def cmd_decimate(args, cfg: RunConfig) -> int:
    cohort = load_cohort(_require(args.manifest))
    out = decimate_cohort(cohort, args.rate)
    manifest = save_cohort(out, args.out)
    log.info("decimated %d recordings to %g Hz", len(out.recordings), args.rate)
    print(manifest)
    return 0


def cmd_features(args, cfg: RunConfig) -> int:
    cohort = load_cohort(_require(args.manifest))
    if cfg.rate_hz:
        cohort = decimate_cohort(cohort, cfg.rate_hz)
    m = extract_cohort(cohort, cfg.features, args.jobs)
    out = Path(args.out)
    write_feature_csv(m, out, cfg.features)
    save_config(cfg, _config_sidecar(out))
    log.info("%d windows x %d features -> %s", len(m), len(m.names), out)
    print(out)
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    path = _require(args.features)
    _check_feature_hash(path, cfg)
    m = read_feature_csv(path)
    train, val, _ = mode_splits(m, args.mode, args.activity, cfg)
    model = fit_classifier(args.classifier, train, val, cfg.linear, cfg.gbdt)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out, {"config_hash": config_hash(cfg), "mode": args.mode, "activity": args.activity})
    save_config(cfg, _config_sidecar(out))
    log.info("trained %s on %d windows -> %s", args.classifier, len(train), out)
    print(out)
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    path = _require(args.features)
    _check_feature_hash(path, cfg)
    m = read_feature_csv(path)
    train, val, test = mode_splits(m, args.mode, args.activity, cfg)
    if args.model:
        meta = read_model_metadata(_require(args.model))
        if meta.get("config_hash") not in (None, config_hash(cfg)):
            raise CliError(f"config-hash mismatch: model built with {meta['config_hash']}, "
                           f"current config is {config_hash(cfg)}")
        model = load_model(args.model, expected_registry_hash=m.registry_hash)
    else:
        model = fit_classifier(args.classifier, train, val, cfg.linear, cfg.gbdt)
    scores = predict_scores(model, test)
    report = compute_metrics(scores, test.subjects)
    doc = report_document(cfg, args.mode, {"activity": args.activity, "classifier": args.classifier,
                                           "features": str(path), "metrics": report.to_dict()})
    if args.out:
        out = Path(args.out)
        write_report(doc, out, args.run_log)
        save_config(cfg, _config_sidecar(out))
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def cmd_sweep(args, cfg: RunConfig) -> int:
    cohort = load_cohort(_require(args.manifest))
    values = [float(v) if args.axis != "vote" else int(v) for v in args.values.split(",")]
    result = run_sweep(FeatureCache(cohort, args.jobs), args.axis, values, args.classifier, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = report_document(cfg, "m3", {"classifier": args.classifier, "sweep": result.to_dict()})
    write_report(doc, out / f"sweep_{args.axis}.json", args.run_log)
    with (out / f"sweep_{args.axis}.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([result.axis, "accuracy_pct", "eer_pct", "far_pct", "frr_pct", "n_test"])
        for v, r in zip(result.values, result.reports):
            d = r.to_dict()
            w.writerow([v, d["accuracy_pct"], d["eer_pct"], d["far_pct"], d["frr_pct"], d["n_test"]])
    save_config(cfg, out / "config.json")
    for v, r in zip(result.values, result.reports):
        log.info("%s=%s accuracy %.2f%% eer %.2f%%", result.axis, v, 100 * r.accuracy, 100 * r.eer)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


COMMANDS = {"synth": cmd_synth, "ingest": cmd_ingest, "decimate": cmd_decimate, "features": cmd_features,
            "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run config (default: $LFI_IDENT_CONFIG, then built-in defaults)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field, dotted keys allowed (repeatable)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for feature extraction")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    p = _Parser(prog="lfi-ident", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic cohort")
    s.add_argument("--out", required=True)
    s.add_argument("--subjects", type=int, default=10)
    s.add_argument("--activities", help="comma-separated subset (default: all seven)")
    s.add_argument("--duration", type=float, default=120.0)
    s.add_argument("--rate", type=float, default=1000.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--separation", type=float, default=1.0)
    s.add_argument("--shift", help="comma-separated activities with unrelated subject signatures")

    s = sub.add_parser("ingest", parents=[common], help="validate a cohort manifest")
    s.add_argument("--manifest", required=True)

    s = sub.add_parser("decimate", parents=[common], help="resample a cohort to a lower rate")
    s.add_argument("--manifest", required=True)
    s.add_argument("--rate", type=float, required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("features", parents=[common], help="extract the window feature matrix")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--window-seconds", type=float)
    s.add_argument("--rate", type=float, help="decimate to this rate first")

    for name, verb in (("train", "train"), ("eval", "evaluate")):
        s = sub.add_parser(name, parents=[common], help=f"{verb} a classifier on a feature CSV")
        s.add_argument("--features", required=True)
        s.add_argument("--mode", choices=MODES, default="m3")
        s.add_argument("--activity")
        s.add_argument("--classifier", choices=("gbdt", "linear"), default="gbdt")
        s.add_argument("--seed", type=int)
        s.add_argument("--window-seconds", type=float)
        if name == "train":
            s.add_argument("--out", required=True)
        else:
            s.add_argument("--model", help="evaluate a saved model instead of training")
            s.add_argument("--out")
            s.add_argument("--run-log")

    s = sub.add_parser("sweep", parents=[common], help="Mode-3 sweep over rate, window or vote count")
    s.add_argument("--manifest", required=True)
    s.add_argument("--axis", choices=tuple(AXES), required=True)
    s.add_argument("--values", required=True, help="comma-separated axis values")
    s.add_argument("--classifier", choices=("gbdt", "linear"), default="gbdt")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--window-seconds", type=float)
    s.add_argument("--run-log")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = effective_config(args)
        return COMMANDS[args.command](args, cfg)
    except (CliError, ValueError, OSError, KeyError, AssertionError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"lfi-ident {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
