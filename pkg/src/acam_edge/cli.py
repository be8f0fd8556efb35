"""Command-line front door: one binary, batch-oriented subcommands.

Every subcommand validates its flags before writing anything, writes
through temp-file-plus-rename so failures leave no partial outputs, and
derives all randomness from ``--seed`` (or the ACAM_EDGE_SEED environment
variable when the flag is absent), so identical invocations produce
byte-identical payloads.

Exit codes: 0 success, 1 I/O failure, 2 validation/usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .acam import AcamBackend, AcamConfig, perturb_windows
from .binarize import column_thresholds
from .cost import ConvLayerSpec, EnergyConstants, energy_report, network_macs
from .evaluate import run_eval, sweep_templates
from .fmap import (
    ThresholdMethod,
    atomic_write_text,
    load_fmap,
    load_template_bank,
    save_fmap,
    save_template_bank,
    synth_bimodal_fixture,
    synth_fixture,
)
from .matcher import MatchMethod, MatchParams, classify_batch, prepare_queries
from .templates import AUTO_K, make_templates

ENV_SEED = "ACAM_EDGE_SEED"

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"{ENV_SEED} must be an integer, got {env!r}") from None
    return 0


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _write_json(path: str, payload: dict | list) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def _write_table(path: str, fmt: str, header: list[str], rows: list[list]) -> None:
    if fmt == "json":
        _write_json(path, [dict(zip(header, row)) for row in rows])
    else:
        _write_csv(path, header, rows)


def _parse_k(text: str):
    if text == "auto":
        return AUTO_K
    k = int(text)
    if k < 1:
        raise ValueError("--k must be 'auto' or a positive integer")
    return k


def _parse_sweep(text: str) -> list[float]:
    try:
        start, step, stop = (float(x) for x in text.split(":"))
    except ValueError:
        raise ValueError("--sigma-sweep expects start:step:stop") from None
    if step <= 0 or stop < start:
        raise ValueError("--sigma-sweep needs step > 0 and stop >= start")
    n = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def _parse_value_range(text: str, queries: np.ndarray, bank) -> tuple[float, float]:
    if text != "auto":
        lo, hi = (float(x) for x in text.split(":"))
        return lo, hi
    lowers, uppers, _, _ = bank.stacked_bounds()
    lo = min(float(queries.min()), float(lowers.min()))
    hi = max(float(queries.max()), float(uppers.max()))
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> int:
    seed = _resolve_seed(args.seed)
    maker = synth_bimodal_fixture if args.subclusters == 2 else synth_fixture
    fset = maker(args.classes, args.features, args.per_class, args.spread, seed)
    save_fmap(fset, args.out)
    return EXIT_OK


def _cmd_thresholds(args) -> int:
    train = load_fmap(args.input)
    mean = column_thresholds(train, ThresholdMethod.MEAN)
    median = column_thresholds(train, ThresholdMethod.MEDIAN)
    rows = [
        [i, mean.values[i], median.values[i]] for i in range(train.n_features)
    ]
    _write_table(args.out, args.format, ["feature_index", "mean", "median"], rows)
    return EXIT_OK


def _cmd_templates(args) -> int:
    train = load_fmap(args.input)
    bank = make_templates(
        train,
        k_per_class=args.k,
        mode=args.mode,
        threshold_method=args.threshold,
        gamma=args.gamma,
        seed=_resolve_seed(args.seed),
        window_bounds=args.window_bounds,
    )
    save_template_bank(bank, args.out)
    return EXIT_OK


def _decision_rows(decisions, labels) -> list[list]:
    rows = []
    for i, d in enumerate(decisions):
        rows.append(
            [i, int(labels[i]), d.predicted, int(d.tie)]
            + [v.item() for v in d.per_class_best]
        )
    return rows


def _cmd_classify(args) -> int:
    bank = load_template_bank(args.bank)
    queries = load_fmap(args.input)
    params = MatchParams(
        method=MatchMethod(args.method), epsilon=args.epsilon, alpha_sim=args.alpha
    )
    decisions = classify_batch(prepare_queries(queries, bank), bank, params, jobs=args.jobs)
    header = ["sample_index", "true_label", "predicted", "tie"] + [
        f"score_class_{c}" for c in range(bank.n_classes)
    ]
    _write_table(args.out, args.format, header, _decision_rows(decisions, queries.labels))
    return EXIT_OK


def _cmd_eval(args) -> int:
    methods = (
        (MatchMethod.FEATURE_COUNT, MatchMethod.SIMILARITY)
        if args.method == "both"
        else (MatchMethod(args.method),)
    )
    report = run_eval(
        args.train,
        args.test,
        k=args.k,
        mode=args.mode,
        threshold_method=args.threshold,
        gamma=args.gamma,
        epsilon=args.epsilon,
        alpha_sim=args.alpha,
        seed=_resolve_seed(args.seed),
        methods=methods,
        jobs=args.jobs,
    )
    _write_json(args.out, report)
    if args.confusion_csv:
        for name, entry in report["results"].items():
            cm = entry["confusion"]
            header = [str(c) for c in range(len(cm))]
            _write_csv(f"{args.confusion_csv}_{name}.csv", header, cm)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    ks = [int(k) for k in args.ks.split(",") if k]
    rows = sweep_templates(
        args.train,
        args.test,
        ks=tuple(ks),
        method=args.method,
        mode=args.mode,
        threshold_method=args.threshold,
        gamma=args.gamma,
        epsilon=args.epsilon,
        alpha_sim=args.alpha,
        seed=_resolve_seed(args.seed),
        jobs=args.jobs,
    )
    _write_table(
        args.out, args.format, ["k", "accuracy"], [[r["k"], r["accuracy"]] for r in rows]
    )
    return EXIT_OK


def _cmd_robustness(args) -> int:
    bank = load_template_bank(args.bank)
    fset = load_fmap(args.input)
    queries = prepare_queries(fset, bank)
    sigmas = _parse_sweep(args.sigma_sweep)
    base_seed = _resolve_seed(args.seed)
    value_range = _parse_value_range(args.value_range, queries, bank)
    cfg = AcamConfig(sense_theta=args.theta)
    backend = AcamBackend(bank, cfg, value_range)
    clean_vbank = backend.vbank
    rows = []
    for sigma in sigmas:
        for i in range(args.seeds):
            seed = base_seed + i
            backend.vbank = perturb_windows(clean_vbank, sigma, seed)
            preds = np.array(
                [d.predicted for d in backend.classify_batch(queries)], dtype=np.int64
            )
            accuracy = float((preds == fset.labels).mean())
            rows.append([sigma, seed, accuracy])
    _write_table(args.out, args.format, ["sigma", "seed", "accuracy"], rows)
    return EXIT_OK


def _load_arch(path: str) -> tuple[int, list[dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    layers = [ConvLayerSpec.from_dict(entry) for entry in doc.get("layers", [])]
    total = network_macs(layers)
    declared = doc.get("total_macs")
    if declared is not None:
        total = int(declared)
    return total, [vars(layer) for layer in layers]


def _cmd_energy(args) -> int:
    total = args.total_macs
    if args.arch:
        total, _ = _load_arch(args.arch)
    constants = EnergyConstants(e_mul=args.e_mul, e_add=args.e_add, e_mem=args.e_mem)
    report = energy_report(
        total_macs=total or 0,
        sparsity=args.sparsity,
        removed_ops=args.removed,
        constants=constants,
        n_templates=args.templates,
        n_features=args.features,
        e_cell_joules=args.ecell,
        reference_macs=args.reference_macs,
    )
    _write_json(args.out, report.as_dict())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, out_required: bool = True) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default: ${ENV_SEED} or 0)")
    p.add_argument("--out", required=out_required, help="output file path")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="tabular output format")
    p.add_argument("--jobs", type=int, default=os.cpu_count(),
                   help="worker threads for batch classification (results "
                        "do not depend on this)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acam-edge",
        description="Template-matching back-end classifier, device model, and cost accounting.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic fixture")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--features", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True, dest="per_class")
    p.add_argument("--spread", type=float, default=0.0)
    p.add_argument("--subclusters", type=int, choices=(1, 2), default=1,
                   help="sub-centers per class (2 = bimodal classes)")
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("thresholds", help="per-feature mean and median thresholds as CSV")
    p.add_argument("--input", required=True, help="training .fmap file")
    _add_common(p)
    p.set_defaults(func=_cmd_thresholds)

    p = sub.add_parser("templates", help="build and save a template bank")
    p.add_argument("--input", required=True, help="training .fmap file")
    p.add_argument("--k", type=_parse_k, default=AUTO_K, help="auto|1|2|3")
    p.add_argument("--mode", choices=("binary", "window"), default="binary")
    p.add_argument("--threshold", choices=("mean", "median"), default="mean")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--window-bounds", choices=("std", "minmax"), default="std",
                   dest="window_bounds")
    _add_common(p)
    p.set_defaults(func=_cmd_templates)

    p = sub.add_parser("classify", help="classify a query set against a bank")
    p.add_argument("--bank", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("fc", "sim"), default="fc")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("eval", help="end-to-end evaluation report")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--k", type=_parse_k, default=AUTO_K)
    p.add_argument("--mode", choices=("binary", "window"), default="binary")
    p.add_argument("--threshold", choices=("mean", "median"), default="mean")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--method", choices=("fc", "sim", "both"), default="both")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--confusion-csv", default=None, dest="confusion_csv",
                   help="prefix for per-method confusion matrix CSVs")
    _add_common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="accuracy vs templates-per-class table")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--ks", default="1,2,3", help="comma-separated template counts")
    p.add_argument("--method", choices=("fc", "sim"), default="fc")
    p.add_argument("--mode", choices=("binary", "window"), default="binary")
    p.add_argument("--threshold", choices=("mean", "median"), default="mean")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("robustness", help="accuracy under window perturbation sweeps")
    p.add_argument("--bank", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--sigma-sweep", default="0:0.05:0.3", dest="sigma_sweep",
                   help="start:step:stop in volts")
    p.add_argument("--seeds", type=int, default=20, help="Monte-Carlo draws per sigma")
    p.add_argument("--theta", type=float, default=0.0, help="sense threshold fraction")
    p.add_argument("--value-range", default="auto", dest="value_range",
                   help="lo:hi input value range, or 'auto'")
    _add_common(p)
    p.set_defaults(func=_cmd_robustness)

    p = sub.add_parser("energy", help="MAC/energy cost report")
    p.add_argument("--arch", default=None,
                   help="JSON arch descriptor (conv layer list or total_macs)")
    p.add_argument("--total-macs", type=int, default=None, dest="total_macs")
    p.add_argument("--sparsity", type=float, default=0.0)
    p.add_argument("--removed", type=int, default=0)
    p.add_argument("--templates", type=int, default=0)
    p.add_argument("--features", type=int, default=0)
    p.add_argument("--ecell", type=float, default=185e-15,
                   help="joules per cell per search")
    p.add_argument("--e-mul", type=float, default=0.2, dest="e_mul")
    p.add_argument("--e-add", type=float, default=0.03, dest="e_add")
    p.add_argument("--e-mem", type=float, default=20.0, dest="e_mem")
    p.add_argument("--reference-macs", type=int, default=None, dest="reference_macs")
    _add_common(p)
    p.set_defaults(func=_cmd_energy)

    return parser


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help/--version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
