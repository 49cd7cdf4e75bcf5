"""Command-line harness: train, ablate, report, synth, inspect.

Configuration comes from an optional YAML file plus command-line flags;
flags win over the file.  The output directory resolves in the order
flag > EMBEDCIL_OUTPUT_DIR environment variable > config file > default.

Exit codes: 0 success, 2 configuration error, 3 data-format error,
4 numerical error.  Errors are reported as a single line on stderr of the
form ``error: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np
import yaml

from .data import generate_synthetic, load_embeddings, save_embeddings
from .errors import DataFormatError, NotTrainedError, NumericalError
from .experiment import (
    RunConfig,
    SyntheticSpec,
    ablation_table,
    run_ablation,
    run_experiment,
)
from .metrics import decimal_mb

OUTPUT_DIR_ENV = "EMBEDCIL_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA_FORMAT = 3
EXIT_NUMERICAL = 4


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError as exc:
        raise ValueError(f"bad seed list {text!r}: {exc}") from exc


def _config_from_file(path) -> dict:
    with open(path, "r") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config file must be a mapping")
    return data


def _build_run_config(args: argparse.Namespace) -> RunConfig:
    file_data = _config_from_file(args.config) if args.config else {}

    scalar_names = {f.name for f in dataclass_fields(RunConfig)} - {
        "synthetic",
        "seeds",
        "train_path",
        "test_path",
        "data_format",
    }
    values: dict = {}
    for name in scalar_names:
        if name in file_data:
            values[name] = file_data[name]
    if "seeds" in file_data:
        values["seeds"] = tuple(int(s) for s in file_data["seeds"])
    dataset = file_data.get("dataset", {})
    if dataset:
        values["train_path"] = dataset.get("train")
        values["test_path"] = dataset.get("test")
        values["data_format"] = dataset.get("format", "binary")
    synth = file_data.get("synthetic", {})
    if synth:
        values["synthetic"] = SyntheticSpec(
            num_classes=int(synth["num_classes"]),
            dim=int(synth["dim"]),
            per_class=int(synth["per_class"]),
            separation=float(synth["separation"]),
        )

    # flags win over the file
    flag_map = {
        "increment": args.increment,
        "buffer_capacity": args.buffer_capacity,
        "regularization": args.regularization,
        "clamp_epsilon": args.clamp_epsilon,
        "disable_buffer": args.disable_buffer,
        "disable_oversampling": args.disable_oversampling,
    }
    for name, value in flag_map.items():
        if value is not None:
            values[name] = value
    if args.seeds is not None:
        values["seeds"] = _parse_seeds(args.seeds)
    if args.train is not None or args.test is not None:
        values["train_path"] = args.train
        values["test_path"] = args.test
        values.pop("synthetic", None)
    if args.format is not None:
        values["data_format"] = args.format
    if any(
        v is not None
        for v in (args.synth_classes, args.synth_dim, args.synth_per_class)
    ):
        values["synthetic"] = SyntheticSpec(
            num_classes=args.synth_classes,
            dim=args.synth_dim,
            per_class=args.synth_per_class,
            separation=(
                args.synth_separation if args.synth_separation is not None else 8.0
            ),
        )
        values.pop("train_path", None)
        values.pop("test_path", None)

    if args.output_dir is not None:
        values["output_dir"] = args.output_dir
    elif os.environ.get(OUTPUT_DIR_ENV):
        values["output_dir"] = os.environ[OUTPUT_DIR_ENV]

    if "increment" not in values:
        raise ValueError("increment is required (flag --increment or config file)")
    return RunConfig(**values).validate()


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--increment", type=int, help="new classes per task")
    parser.add_argument(
        "--buffer-capacity", type=int, help="stored vectors per class (m_b)"
    )
    parser.add_argument(
        "--regularization", type=float, help="ridge strength (default 0.01)"
    )
    parser.add_argument(
        "--clamp-epsilon", type=float, help="target clamping (default 0.05)"
    )
    parser.add_argument("--seeds", help="comma-separated seed list, e.g. 0,1,2")
    parser.add_argument("--output-dir", help="report directory")
    parser.add_argument(
        "--disable-buffer",
        action="store_const",
        const=True,
        default=None,
        help="run with an empty replay buffer",
    )
    parser.add_argument(
        "--disable-oversampling",
        action="store_const",
        const=True,
        default=None,
        help="replay stored vectors once, without replication",
    )
    parser.add_argument("--train", help="training embeddings file")
    parser.add_argument("--test", help="test embeddings file")
    parser.add_argument("--format", choices=("binary", "csv"), help="file format")
    parser.add_argument("--synth-classes", type=int, help="synthetic class count")
    parser.add_argument("--synth-dim", type=int, help="synthetic dimensionality")
    parser.add_argument(
        "--synth-per-class", type=int, help="synthetic samples per class"
    )
    parser.add_argument(
        "--synth-separation", type=float, help="synthetic mean separation (in sigma)"
    )


def _cmd_train(args: argparse.Namespace) -> int:
    config = _build_run_config(args)
    reports = run_experiment(config, save_models=args.save_models)
    out_dir = Path(config.output_dir)
    for report in reports:
        print(
            f"seed={report.seed} tasks={len(report.per_task_accuracy)} "
            f"average_accuracy={report.average_accuracy:.4f} "
            f"final_accuracy={report.final_accuracy:.4f} "
            f"buffer_mb={decimal_mb(report.buffer_bytes):.2f} "
            f"report={out_dir / f'run_seed{report.seed}.json'}"
        )
    if len(reports) > 1:
        mean_avg = sum(r.average_accuracy for r in reports) / len(reports)
        mean_final = sum(r.final_accuracy for r in reports) / len(reports)
        print(
            f"seed-mean average_accuracy={mean_avg:.4f} "
            f"final_accuracy={mean_final:.4f} over {len(reports)} seeds"
        )
    return EXIT_OK


def _cmd_ablate(args: argparse.Namespace) -> int:
    config = _build_run_config(args)
    results = run_ablation(config)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    detail_path = out_dir / "ablation.csv"
    with open(detail_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "seed", "average_accuracy", "final_accuracy"])
        for variant, reports in results.items():
            for report in reports:
                writer.writerow(
                    [
                        variant,
                        report.seed,
                        repr(report.average_accuracy),
                        repr(report.final_accuracy),
                    ]
                )
    print(f"{'variant':<18}{'avg_accuracy':>14}{'final_accuracy':>16}")
    for variant, avg, final in ablation_table(results):
        print(f"{variant:<18}{avg:>14.4f}{final:>16.4f}")
    print(f"detail={detail_path}")
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    train, test = generate_synthetic(
        args.classes, args.dim, args.per_class, args.separation, args.seed
    )
    save_embeddings(train, args.train_out)
    save_embeddings(test, args.test_out)
    print(
        f"wrote {len(train)} train records to {args.train_out} and "
        f"{len(test)} test records to {args.test_out} (dim={train.dim})"
    )
    return EXIT_OK


def _cmd_inspect(args: argparse.Namespace) -> int:
    path = Path(args.file)
    with open(path, "rb") as fh:
        raw = fh.read(24)
    if len(raw) < 24:
        raise DataFormatError(
            f"{path}: truncated header, expected 24 bytes, got {len(raw)}"
        )
    magic = raw[:4]
    version = int(np.frombuffer(raw, dtype="<u4", count=1, offset=4)[0])
    dim = int(np.frombuffer(raw, dtype="<u4", count=1, offset=8)[0])
    count = int(np.frombuffer(raw, dtype="<u8", count=1, offset=12)[0])
    label_width = int(np.frombuffer(raw, dtype="<u4", count=1, offset=20)[0])
    payload = path.stat().st_size - 24
    expected = count * (label_width + 4 * dim)
    print(f"magic={magic.decode('ascii', 'replace')}")
    print(f"version={version}")
    print(f"dim={dim}")
    print(f"count={count}")
    print(f"label_width={label_width}")
    print(f"payload_bytes={payload}")
    print(f"payload_expected={expected}")
    print(f"payload_ok={payload == expected}")
    # a full parse surfaces format errors with precise offsets
    load_embeddings(path, format="binary")
    return EXIT_OK


def _config_hash(config_echo: dict) -> str:
    canonical = json.dumps(config_echo, sort_keys=True).encode("utf-8")
    return hashlib.sha256(canonical).hexdigest()[:12]


def _read_wall_ms(csv_path: Path, n_tasks: int) -> list[int]:
    if not csv_path.exists():
        return [0] * n_tasks
    out = [0] * n_tasks
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            task = int(row["task"])
            if 1 <= task <= n_tasks:
                out[task - 1] = int(row["wall_ms"])
    return out


def _cmd_report(args: argparse.Namespace) -> int:
    from .metrics import load_report

    candidates: list[Path] = []
    for directory in args.run_dirs:
        candidates.extend(sorted(Path(directory).glob("*.json")))
    rows = []
    failures = 0
    for path in candidates:
        try:
            report = load_report(path)
        except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
            failures += 1
            continue
        wall = _read_wall_ms(path.with_suffix(".csv"), len(report.per_task_accuracy))
        chash = _config_hash(report.config_echo)
        for task_idx, acc in enumerate(report.per_task_accuracy, start=1):
            rows.append(
                {
                    "config_hash": chash,
                    "seed": report.seed,
                    "task": task_idx,
                    "accuracy": acc,
                    "wall_ms": wall[task_idx - 1],
                }
            )
    if not rows:
        raise DataFormatError(
            f"no readable reports among {len(candidates)} candidate files"
        )

    means: dict[tuple[str, int], float] = {}
    for key in {(r["config_hash"], r["task"]) for r in rows}:
        matching = [r["accuracy"] for r in rows if (r["config_hash"], r["task"]) == key]
        means[key] = sum(matching) / len(matching)
    rows.sort(key=lambda r: (r["config_hash"], r["seed"], r["task"]))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["config_hash", "seed", "task", "accuracy", "wall_ms", "mean_accuracy"]
        )
        for r in rows:
            writer.writerow(
                [
                    r["config_hash"],
                    r["seed"],
                    r["task"],
                    repr(r["accuracy"]),
                    r["wall_ms"],
                    repr(means[(r["config_hash"], r["task"])]),
                ]
            )
    print(f"wrote {len(rows)} rows to {args.out} ({failures} files skipped)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedcil",
        description="Class-incremental learning on fixed embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the incremental training loop")
    _add_run_flags(p_train)
    p_train.add_argument(
        "--save-models",
        action="store_true",
        help="also write a serialized classifier per seed",
    )
    p_train.set_defaults(func=_cmd_train)

    p_ablate = sub.add_parser(
        "ablate", help="compare full / no-oversampling / no-buffer variants"
    )
    _add_run_flags(p_ablate)
    p_ablate.set_defaults(func=_cmd_ablate)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--classes", type=int, required=True)
    p_synth.add_argument("--dim", type=int, required=True)
    p_synth.add_argument("--per-class", type=int, required=True)
    p_synth.add_argument("--separation", type=float, default=8.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--train-out", required=True)
    p_synth.add_argument("--test-out", required=True)
    p_synth.set_defaults(func=_cmd_synth)

    p_report = sub.add_parser("report", help="aggregate run reports into a CSV")
    p_report.add_argument("run_dirs", nargs="+", help="directories with run JSONs")
    p_report.add_argument("--out", required=True, help="aggregate CSV path")
    p_report.set_defaults(func=_cmd_report)

    p_inspect = sub.add_parser("inspect", help="dump an embedding file header")
    p_inspect.add_argument("file")
    p_inspect.set_defaults(func=_cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataFormatError as exc:
        print(f"error: data-format: {exc}", file=sys.stderr)
        return EXIT_DATA_FORMAT
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, TypeError, NotTrainedError, OSError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
