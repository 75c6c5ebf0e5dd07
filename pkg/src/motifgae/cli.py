"""Command-line entry point: ``motifgae <generate|train|evaluate|classify|ingest|replay>``.

Every option can also be set through an environment variable named
``MOTIFGAE_<DEST>`` (e.g. ``MOTIFGAE_THREADS=4``); explicit flags win.
Each run writes a ``manifest.json`` next to its outputs; ``replay`` re-runs it.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from motifgae import __version__
from motifgae.generators import GeneratorParams, generate_dataset, load_params, split_dataset
from motifgae.graph import PATTERNS, PatternLabel, load_dataset, save_dataset
from motifgae.ingest import (IngestStats, extract_ego_subgraphs, load_transactions, report_csv, scan)
from motifgae.nn import ENCODERS, check_encoder, load_model, save_model
from motifgae.training import (TrainConfig, calibrate_threshold, check_model_set, classify,
                               error_matrix, featurize, train_model)

ENV_PREFIX = "MOTIFGAE_"
log = logging.getLogger("motifgae")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _patterns(name: str) -> list[PatternLabel]:
    return list(PATTERNS) if name == "all" else [PatternLabel.parse(name)]


def _encoders(name: str) -> list[str]:
    return list(ENCODERS) if name == "all" else [check_encoder(name)]


def train_path(data: Path, label: PatternLabel) -> Path:
    return data / f"{label.value}.train.jsonl"


def validation_path(data: Path, label: PatternLabel) -> Path:
    return data / f"{label.value}.validation.jsonl"


def model_path(models: Path, label: PatternLabel) -> Path:
    return models / f"{label.value}.model.json"


def write_manifest(path: Path, args, argv, started: float, inputs=(), outputs=()) -> None:
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
              if k not in ("func",)}
    doc = {
        "subcommand": args.command,
        "argv": list(argv),
        "config": config,
        "seeds": {k: v for k, v in config.items() if "seed" in k},
        "cwd": os.getcwd(),
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
        "wall_time": round(time.perf_counter() - started, 3),
    }
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _generator_params(args) -> GeneratorParams:
    params = load_params(args.config) if args.config else GeneratorParams()
    overrides = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    return params.with_overrides(overrides) if overrides else params


# -- subcommands ----------------------------------------------------------------

def cmd_generate(args, argv, started):
    labels = _patterns(args.pattern)
    params = _generator_params(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for label in labels:
        # Disjoint seed blocks per pattern across the whole corpus.
        base = args.seed + PATTERNS.index(label) * args.count
        samples = generate_dataset(label, args.count, base, params)
        train, val = split_dataset(samples, args.train_fraction, seed=args.seed)
        for path, part in ((train_path(out, label), train), (validation_path(out, label), val)):
            save_dataset(part, path)
            written.append(path)
        log.info("%s: %d train / %d validation", label.value, len(train), len(val))
    (out / "generator_params.json").write_text(json.dumps(params.to_dict(), indent=1) + "\n")
    write_manifest(out / "manifest.json", args, argv, started, outputs=written)
    print(f"wrote {len(written)} dataset files to {out}")


def _load_split(path: Path):
    if not path.exists():
        raise CliError(f"missing dataset file {path}; run `motifgae generate` first")
    return load_dataset(path)


def cmd_train(args, argv, started):
    encoders = _encoders(args.encoder)
    labels = _patterns(args.pattern)
    data, out = Path(args.data), Path(args.out)
    config = TrainConfig(max_epochs=args.epochs, early_stop_patience=args.patience,
                         batch_size=args.batch_size, learning_rate=args.lr,
                         early_stop_fraction=args.early_stop_fraction, hidden_dim=args.hidden,
                         latent_dim=args.latent, seed=args.train_seed)
    sets = {label: _load_split(train_path(data, label)) for label in labels}
    inputs = {label: featurize(sets[label], threads=args.threads) for label in labels}
    written = []
    for kind in encoders:
        (out / kind).mkdir(parents=True, exist_ok=True)
        for label in labels:
            model, report = train_model(kind, label, sets[label], config, inputs=inputs[label])
            calibrate_threshold(model, inputs[label], args.percentile)
            mp = model_path(out / kind, label)
            save_model(model, mp)
            rp = out / kind / f"{label.value}.report.json"
            rp.write_text(json.dumps({"encoder": kind, "pattern": label.value,
                                      "stopped_epoch": report.stopped_epoch,
                                      "best_epoch": report.best_epoch,
                                      "wall_time": round(report.wall_time, 3),
                                      "threshold": model.threshold,
                                      "epochs": report.epoch_log()}, indent=1) + "\n")
            written += [mp, rp]
            log.info("%s/%s: best epoch %d of %d, threshold %.4f", kind, label.value,
                     report.best_epoch, report.stopped_epoch, model.threshold)
    write_manifest(out / "manifest.json", args, argv, started,
                   inputs=[train_path(data, l) for l in labels], outputs=written)
    print(f"wrote {len(written) // 2} model files to {out}")


def load_model_set(directory: Path, require_all: bool = True) -> dict:
    models = {}
    for label in PATTERNS:
        p = model_path(directory, label)
        if p.exists():
            models[label] = load_model(p)
    missing = [l.value for l in PATTERNS if l not in models]
    if require_all and missing:
        raise CliError(f"incomplete model set in {directory}: missing {', '.join(missing)}")
    return models


def _encoder_dirs(models: Path, encoder: str) -> list[tuple[str, Path]]:
    if model_path(models, PATTERNS[0]).exists() or encoder != "all" and not (models / encoder).is_dir():
        return [(encoder, models)]
    return [(kind, models / kind) for kind in _encoders(encoder) if (models / kind).is_dir()]


def cmd_evaluate(args, argv, started):
    data, out = Path(args.data), Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dirs = _encoder_dirs(Path(args.models), args.encoder)
    if not dirs:
        raise CliError(f"no model directories found under {args.models}")
    val = {label: featurize(_load_split(validation_path(data, label)), threads=args.threads)
           for label in PATTERNS}
    written = []
    for _, directory in dirs:
        models = load_model_set(directory)
        em = error_matrix(models, val, threads=args.threads)
        csv_path = out / f"{em.encoder_kind}_error_matrix.csv"
        svg_path = out / f"{em.encoder_kind}_error_matrix.svg"
        csv_path.write_text(em.to_csv())
        svg_path.write_text(em.to_svg())
        written += [csv_path, svg_path]
        print(f"{em.encoder_kind}: diagonal row-minimum in {em.diagonal_hits()}/7 rows -> {csv_path}")
    write_manifest(out / "manifest.json", args, argv, started, outputs=written)


def _manifest_for(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def cmd_classify(args, argv, started):
    models = load_model_set(Path(args.models))
    check_model_set(models)
    samples = load_dataset(args.input)
    lines = ["id,true_label,best_label," + ",".join(f"score_{l.value}" for l in PATTERNS)
             + "," + ",".join(f"flag_{l.value}" for l in PATTERNS)]
    for s in samples:
        c = classify(s, models)
        lines.append(",".join([s.id, s.label.value, c.argmin_label.value,
                               *(f"{c.scores[l]:.6f}" for l in PATTERNS),
                               *(str(int(c.flags[l])) for l in PATTERNS)]))
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        write_manifest(_manifest_for(out), args, argv, started, inputs=[args.input], outputs=[out])
    else:
        sys.stdout.write(text)


def cmd_ingest(args, argv, started):
    models = load_model_set(Path(args.models))
    check_model_set(models)
    stats = IngestStats()
    try:
        records = load_transactions(args.input, args.sender_col, args.receiver_col, stats)
    except ValueError as exc:
        raise CliError(f"{args.input}: {exc}") from None
    centers = None
    if args.centers:
        centers = [c.strip() for c in Path(args.centers).read_text().splitlines() if c.strip()]
    candidates = extract_ego_subgraphs(records, hops=args.hops, max_nodes=args.max_nodes,
                                       min_degree=args.min_degree, centers=centers, stats=stats)
    rows = scan(candidates, models)
    text = report_csv(rows)
    log.info("rows=%d self_loops=%d malformed=%d skipped_large=%d", stats.rows, stats.self_loops,
             stats.malformed, stats.skipped_large)
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        write_manifest(_manifest_for(out), args, argv, started, inputs=[args.input], outputs=[out])
        print(f"scanned {len(rows)} candidates ({stats.skipped_large} skipped as too large) -> {out}")
    else:
        sys.stdout.write(text)


def cmd_replay(args, argv, started):
    doc = json.loads(Path(args.manifest).read_text())
    recorded = doc["argv"]
    if recorded and recorded[0] == "replay":
        raise CliError("refusing to replay a replay manifest")
    here = os.getcwd()
    os.chdir(doc.get("cwd", here))
    try:
        return main(recorded)
    finally:
        os.chdir(here)


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="motifgae", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("--threads", type=int, default=1, help="worker processes; 1 gives reference runs")
    _apply_env_defaults(common)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="generate train/validation datasets")
    g.add_argument("--pattern", default="all")
    g.add_argument("--count", type=int, default=15_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--train-fraction", type=float, default=0.8)
    g.add_argument("--config", help="generator parameter file (JSON or key=value lines)")
    g.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one generator parameter")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", parents=[common], help="train one autoencoder per pattern")
    t.add_argument("--encoder", default="gcn", help="gcn|sage|gat|all")
    t.add_argument("--pattern", default="all")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--patience", type=int, default=3)
    t.add_argument("--batch-size", type=int, default=25)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--early-stop-fraction", type=float, default=0.1)
    t.add_argument("--hidden", type=int, default=32)
    t.add_argument("--latent", type=int, default=16)
    t.add_argument("--train-seed", type=int, default=0)
    t.add_argument("--percentile", type=float, default=95.0)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", parents=[common], help="cross-pattern reconstruction error matrices")
    e.add_argument("--models", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--encoder", default="all")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("classify", parents=[common], help="score JSONL graphs against one model set")
    c.add_argument("--models", required=True, help="directory holding the seven model files")
    c.add_argument("--input", required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    i = sub.add_parser("ingest", parents=[common], help="scan a CSV transaction log")
    i.add_argument("--models", required=True)
    i.add_argument("--input", required=True)
    i.add_argument("--out")
    i.add_argument("--sender-col", default="sender")
    i.add_argument("--receiver-col", default="receiver")
    i.add_argument("--hops", type=int, default=1, choices=(1, 2))
    i.add_argument("--max-nodes", type=int, default=200)
    i.add_argument("--min-degree", type=int, default=1)
    i.add_argument("--centers", help="file with one center account id per line")
    i.set_defaults(func=cmd_ingest)

    r = sub.add_parser("replay", parents=[common], help="re-run the command recorded in a manifest")
    r.add_argument("manifest")
    r.set_defaults(func=cmd_replay)

    for parser in [g, t, e, c, i, r]:
        _apply_env_defaults(parser)
    return p


def _apply_env_defaults(parser: argparse.ArgumentParser) -> None:
    for action in parser._actions:
        if not action.option_strings or action.dest in ("help", "version"):
            continue
        raw = os.environ.get(ENV_PREFIX + action.dest.upper())
        if raw is None:
            continue
        if action.type is not None:
            raw = action.type(raw)
        elif isinstance(action, argparse._StoreTrueAction):
            raw = raw.lower() in ("1", "true", "yes")
        action.default = raw
        action.required = False


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.threads < 1:
            raise CliError("--threads must be >= 1")
        result = args.func(args, argv, started)
        return int(result or 0)
    except (CliError, ValueError, KeyError, OSError) as exc:
        msg = " ".join(str(exc).split())
        print(f"motifgae: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
