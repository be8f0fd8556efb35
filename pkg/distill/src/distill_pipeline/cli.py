"""Command-line entry point for the training pipeline."""

from __future__ import annotations

import argparse
import json
import sys

from .kd import KDConfig
from .models import student_arch_descriptor
from .prune import PruneSchedule
from .train import RunConfig, train_and_export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distill-pipeline",
        description="Train the compressed feature extractor and export feature maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline: teacher, KD, pruning, QAT, export")
    p.add_argument("--dataset", choices=("synthetic", "cifar10"), default="synthetic")
    p.add_argument("--data-dir", default=None,
                   help="local CIFAR-10 directory or tarball (or $CIFAR_DIR)")
    p.add_argument("--train-per-class", type=int, default=200)
    p.add_argument("--test-per-class", type=int, default=50)
    p.add_argument("--teacher-epochs", type=int, default=3)
    p.add_argument("--teacher-blocks", type=int, default=1)
    p.add_argument("--student-epochs", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.5, help="distillation loss balance")
    p.add_argument("--temperature", type=float, default=4.0)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--prune-steps", type=int, default=4)
    p.add_argument("--fine-tune-epochs", type=int, default=1)
    p.add_argument("--qat-epochs", type=int, default=1)
    p.add_argument("--no-curriculum", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("arch", help="print the student architecture descriptor")
    p.set_defaults(func=_cmd_arch)
    return parser


def _cmd_run(args) -> int:
    cfg = RunConfig(
        dataset=args.dataset,
        data_dir=args.data_dir,
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        teacher_epochs=args.teacher_epochs,
        teacher_blocks=args.teacher_blocks,
        kd=KDConfig(
            alpha_kd=args.alpha,
            temperature=args.temperature,
            epochs=args.student_epochs,
            batch_size=args.batch_size,
            lr=args.lr,
            seed=args.seed,
        ),
        prune=PruneSchedule(
            n_steps=args.prune_steps,
            fine_tune_epochs_per_step=args.fine_tune_epochs,
        ),
        qat_epochs=args.qat_epochs,
        curriculum=not args.no_curriculum,
        seed=args.seed,
        out_dir=args.out_dir,
    )
    manifest = train_and_export(cfg)
    print(json.dumps(
        {
            "achieved_sparsity": manifest["achieved_sparsity"],
            "student_test_accuracy": manifest["student_test_accuracy"],
            "teacher_test_accuracy": manifest["teacher_test_accuracy"],
            "out_dir": cfg.out_dir,
        },
        indent=2,
    ))
    return 0


def _cmd_arch(args) -> int:
    print(json.dumps(student_arch_descriptor(), indent=2))
    return 0


def main() -> None:
    parser = build_parser()
    try:
        args = parser.parse_args()
    except SystemExit as exc:
        sys.exit(int(exc.code or 0))
    try:
        sys.exit(args.func(args))
    except (ValueError, RuntimeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(2)


if __name__ == "__main__":
    main()
