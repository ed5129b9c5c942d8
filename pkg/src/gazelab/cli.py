"""Command-line entry points.

Every run creates a timestamped directory under the output root, echoes
its effective configuration there, and writes all artifacts inside it.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np
from PIL import Image

from . import experiments
from .config import TrainConfig, format_config, load_train_config
from .dataio.manifest import EyeDataset, load_manifest
from .dataio.patches import to_unit_range
from .dataio.pipeline import prepare_dataset
from .dataio.synthetic import write_synthetic_dataset
from .errors import ConfigError, DataError, GazeLabError, NumericError
from .geometry import GazeDirection
from .metrics import (
    BinSpec,
    LpipsModel,
    estimator_from_checkpoint,
    evaluate_model,
    format_text_table,
    write_report,
)
from .training import Trainer, generate_batch, load_generator, redirect, redirect_grid

DATA_DIR_ENV = "GAZELAB_DATA_DIR"


def _data_root() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "."))


def _resolve(path: str) -> Path:
    p = Path(path)
    if not p.is_absolute() and not p.exists() and (_data_root() / p).exists():
        return _data_root() / p
    return p


def _run_dir(args) -> Path:
    root = Path(args.output_dir)
    name = args.run_name or f"{time.strftime('%Y%m%d-%H%M%S')}-{args.command}"
    run = root / name
    run.mkdir(parents=True, exist_ok=True)
    return run


def _echo_args(args, run_dir: Path) -> None:
    values = {
        k: str(v)
        for k, v in sorted(vars(args).items())
        if k not in ("func",) and v is not None
    }
    (run_dir / "cli_config.txt").write_text(format_config(values))


def _load_split(manifest_path: str, split: str | None) -> EyeDataset:
    manifest = load_manifest(_resolve(manifest_path))
    rows = manifest.split_rows(split) if split else manifest.rows
    if not rows:
        raise DataError(f"manifest has no rows in split {split!r}")
    return EyeDataset(manifest, rows=rows)


def _lpips_from_args(args) -> LpipsModel:
    if args.lpips == "toy":
        return LpipsModel.toy()
    return LpipsModel.alexnet(
        backbone_weights=_resolve(args.lpips_backbone_weights)
        if args.lpips_backbone_weights
        else None,
        linear_weights=_resolve(args.lpips_linear_weights)
        if args.lpips_linear_weights
        else None,
    )


def _train_config(args) -> TrainConfig:
    path = _resolve(args.config) if args.config else None
    return load_train_config(path, args.set or [])


# -- commands ---------------------------------------------------------------


def cmd_prepare_data(args) -> int:
    run_dir = _run_dir(args)
    _echo_args(args, run_dir)
    manifest = prepare_dataset(
        input_dir=_resolve(args.input_dir),
        manifest_out=Path(args.manifest_out),
        cache_dir=Path(args.cache_dir) if args.cache_dir else None,
        n_test=args.n_test,
        seed=args.seed,
        frontal_only=args.frontal_only,
    )
    train_subjects = {r.subject for r in manifest.rows if r.split == "train"}
    test_subjects = {r.subject for r in manifest.rows if r.split == "test"}
    print(
        f"manifest written to {args.manifest_out}: {len(manifest)} eye patches, "
        f"{len(train_subjects)} train / {len(test_subjects)} test subjects"
    )
    return 0


def cmd_train(args) -> int:
    run_dir = _run_dir(args)
    _echo_args(args, run_dir)
    if args.resume:
        manifest_path = args.manifest
        if not manifest_path:
            from .models import load_checkpoint

            payload = load_checkpoint(_resolve(args.resume))
            manifest_path = payload["extra"]["config"].get("manifest", "")
        if not manifest_path:
            raise ConfigError("--resume needs --manifest or a manifest path in the checkpoint")
        dataset = _load_split(manifest_path, "train")
        trainer = Trainer.resume(_resolve(args.resume), dataset, run_dir)
    else:
        config = _train_config(args)
        if args.manifest:
            config = TrainConfig.from_mapping(
                {**config.to_mapping(), "manifest": args.manifest}
            )
        if not config.manifest:
            raise ConfigError("train needs a manifest (config key or --manifest)")
        dataset = _load_split(config.manifest, "train")
        trainer = Trainer(config, dataset, run_dir)
    state = trainer.train(args.stop_after_epoch)
    print(
        f"trained to epoch {state.epoch}: {state.generator_updates} generator / "
        f"{state.critic_updates} critic updates; artifacts in {run_dir}"
    )
    return 0


def cmd_redirect(args) -> int:
    run_dir = _run_dir(args)
    _echo_args(args, run_dir)
    image = np.asarray(Image.open(_resolve(args.image)).convert("RGB"))
    if image.shape != (64, 64, 3):
        raise DataError(f"input patch must be 64x64x3, got {image.shape}")
    unit = to_unit_range(image)
    if args.grid:
        out = redirect_grid(_resolve(args.checkpoint), unit)
        out_path = run_dir / "redirect_grid.png"
    else:
        if args.yaw is None or args.pitch is None:
            raise ConfigError("redirect needs --yaw and --pitch (or --grid)")
        out = redirect(
            _resolve(args.checkpoint), unit, GazeDirection(args.yaw, args.pitch)
        )
        out_path = run_dir / "redirected.png"
    Image.fromarray(out).save(out_path)
    print(f"wrote {out_path}")
    return 0


def cmd_evaluate(args) -> int:
    run_dir = _run_dir(args)
    _echo_args(args, run_dir)
    dataset = _load_split(args.manifest, args.split)
    estimator = estimator_from_checkpoint(_resolve(args.estimator_checkpoint))
    lpips_model = _lpips_from_args(args)
    cuts = tuple(float(v) for v in args.bins.split(",")) if args.bins else (15.0, 25.0)
    generator, _ = load_generator(_resolve(args.checkpoint))
    report = evaluate_model(
        lambda x, d: generate_batch(generator, x, d),
        dataset,
        estimator,
        lpips_model,
        bins=BinSpec(cuts),
        laplacian_kernel=args.laplacian,
        config_echo={"checkpoint": str(args.checkpoint), "manifest": str(args.manifest)},
    )
    paths = write_report(report, run_dir)
    print(format_text_table(report))
    print(f"report files in {run_dir} ({len(paths)} artifacts)")
    return 0


def cmd_ablate(args) -> int:
    run_dir = _run_dir(args)
    _echo_args(args, run_dir)
    config = _train_config(args)
    if args.manifest:
        config = TrainConfig.from_mapping(
            {**config.to_mapping(), "manifest": args.manifest}
        )
    if not config.manifest:
        raise ConfigError("ablate needs a manifest (config key or --manifest)")
    train_ds = _load_split(config.manifest, "train")
    test_ds = _load_split(config.manifest, "test")
    estimator = estimator_from_checkpoint(_resolve(args.estimator_checkpoint))
    variants = (
        list(experiments.ABLATION_VARIANTS) if args.variant == "all" else [args.variant]
    )
    reports = experiments.run_ablation(
        config,
        train_ds,
        test_ds,
        estimator,
        _lpips_from_args(args),
        run_dir,
        variants=variants,
        epochs=args.stop_after_epoch,
    )
    for variant, report in reports.items():
        write_report(report, run_dir / variant / "evaluation")
        print(f"[{variant}] angular {report.overall_mean('angular_error'):.2f} deg")
    return 0


def cmd_augment(args) -> int:
    run_dir = _run_dir(args)
    _echo_args(args, run_dir)
    manifest = load_manifest(_resolve(args.manifest))
    spec = _augmentation_spec(args)
    if args.build_only:
        augmented = experiments.build_augmented_dataset(
            _resolve(args.checkpoint), manifest, spec, run_dir
        )
        n_synth = sum(r.synthetic for r in augmented.rows)
        print(f"augmented manifest: {len(augmented)} rows ({n_synth} synthetic)")
        return 0
    result = experiments.run_augmentation_study(
        _resolve(args.checkpoint), manifest, spec, run_dir
    )
    for dataset_name, row in result.errors.items():
        print(
            f"{dataset_name}: raw {row['raw']:.2f} deg -> "
            f"augmented {row['augmented']:.2f} deg"
        )
    return 0


def cmd_synth_data(args) -> int:
    out_dir = Path(args.out_dir)
    poses = tuple(float(v) for v in args.head_poses.split(","))
    written = write_synthetic_dataset(out_dir, n_subjects=args.subjects, head_poses=poses)
    print(f"wrote {len(written)} synthetic frames to {out_dir}")
    return 0


def _augmentation_spec(args) -> experiments.AugmentationSpec:
    values = {}
    if args.spec:
        from .config import load_config_file

        values = load_config_file(_resolve(args.spec))
    kwargs = {}
    casts = {
        "raw_pitch": float,
        "raw_epochs": int,
        "aug_epochs": int,
        "est_lr": float,
        "est_beta1": float,
        "est_beta2": float,
        "est_batch_size": int,
        "est_width": float,
        "seed": int,
    }
    for key, value in values.items():
        if key in casts:
            kwargs[key] = casts[key](value)
        elif key == "synth_pitches":
            kwargs["synth_pitches"] = tuple(float(v) for v in value.split(","))
        elif key == "synth_yaws":
            kwargs["synth_yaws"] = tuple(float(v) for v in value.split(","))
        elif key == "source_subjects":
            kwargs["source_subjects"] = tuple(v.strip() for v in value.split(","))
        else:
            raise ConfigError(f"unknown augmentation spec key {key!r}")
    return experiments.AugmentationSpec(**kwargs)


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazelab",
        description="Gaze redirection: data preparation, training, evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output-dir", default="runs", help="root for run directories")
        p.add_argument("--run-name", default=None, help="fixed run directory name")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("prepare-data", help="extract eye patches and write a manifest")
    common(p)
    p.add_argument("--input-dir", required=True)
    p.add_argument("--manifest-out", required=True)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--n-test", type=int, default=6)
    p.add_argument("--frontal-only", action="store_true")
    p.set_defaults(func=cmd_prepare_data)

    p = sub.add_parser("train", help="train the redirection model")
    common(p)
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--stop-after-epoch", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("redirect", help="redirect one eye patch")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True, help="64x64 eye patch PNG")
    p.add_argument("--yaw", type=float, default=None)
    p.add_argument("--pitch", type=float, default=None)
    p.add_argument("--grid", action="store_true", help="tile the full direction grid")
    p.set_defaults(func=cmd_redirect)

    p = sub.add_parser("evaluate", help="run the binned evaluation protocol")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--bins", default=None, help="comma-separated cut points, e.g. 15,25")
    p.add_argument("--estimator-checkpoint", required=True)
    p.add_argument("--lpips", choices=("toy", "alexnet"), default="toy")
    p.add_argument("--lpips-backbone-weights", default=None)
    p.add_argument("--lpips-linear-weights", default=None)
    p.add_argument("--laplacian", choices=("standard", "paper"), default="standard")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train and evaluate loss-ablation variants")
    common(p)
    p.add_argument("--variant", choices=experiments.ABLATION_VARIANTS + ("all",), default="all")
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--estimator-checkpoint", required=True)
    p.add_argument("--stop-after-epoch", type=int, default=None)
    p.add_argument("--lpips", choices=("toy", "alexnet"), default="toy")
    p.add_argument("--lpips-backbone-weights", default=None)
    p.add_argument("--lpips-linear-weights", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("augment", help="build augmented data / run the estimator study")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--spec", default=None, help="key=value augmentation spec file")
    p.add_argument("--build-only", action="store_true")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("synth-data", help="generate a synthetic demo dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--subjects", type=int, default=8)
    p.add_argument("--head-poses", default="0")
    p.set_defaults(func=cmd_synth_data)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except GazeLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
