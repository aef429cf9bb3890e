"""Command-line entry point: ``qkr {synth,train,predict,benchmark,kernel,verify}``.

Exit codes: 0 success, 1 input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, PipelineConfig
from .feature_map import benchmark_variants
from .harness import compare_feature_maps, metrics, run_benchmark, verify_holdout
from .pipeline import PipelineBundle, train_pipeline
from .preprocess import (
    Provenance,
    SchemaError,
    encode_records,
    pca_fit,
    pca_transform,
    read_csv,
    scale_fit,
    scale_transform,
    synth_dataset,
    write_csv,
)
from .qkernel import KernelMode, gram_matrix

log = logging.getLogger("qkr")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _experimental(records):
    return [r for r in records if r.provenance is Provenance.EXPERIMENTAL]


def cmd_synth(args) -> int:
    records = synth_dataset(args.n, seed=args.seed, noise=args.noise)
    write_csv(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = PipelineConfig.load(args.config)
    records = _experimental(read_csv(args.data))
    result = train_pipeline(records, cfg)
    result.bundle.save(args.model_out)
    test = result.prepared.test
    ms = metrics(result.y_test, result.y_pred)
    report = {
        "artifact_version": __version__,
        "config": cfg.to_dict(),
        "n_train": len(result.prepared.train),
        "n_train_synthesized": result.prepared.train.n_synthesized,
        "n_test": len(test),
        "feature_map": result.bundle.qkr.spec.name,
        "test_metrics": ms.to_dict(),
        "residuals": [
            {"record_id": rid, "measured": float(yt), "predicted": float(yp), "residual": float(yp - yt)}
            for rid, yt, yp in zip(test.ids, result.y_test, result.y_pred)
        ],
    }
    report_path = args.report_out or os.path.splitext(args.model_out)[0] + ".report.json"
    _write_json(report_path, report)
    pr = "undefined" if ms.pearson_r is None else f"{ms.pearson_r:.3f}"
    print(f"test: mae={ms.mae:.4f} mse={ms.mse:.4f} rmse={ms.rmse:.4f} pearson={pr} (n={ms.n})")
    print(f"bundle -> {args.model_out}; report -> {report_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    bundle = PipelineBundle.load(args.bundle)
    records = read_csv(args.data)
    if not records:
        raise InputError(f"{args.data}: no records")
    pred = bundle.predict_records(records)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["record_id", "predicted_r_c_ohm_mm"])
        for r, p in zip(records, pred):
            w.writerow([r.record_id, repr(float(p))])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = PipelineConfig.load(args.config)
    records = _experimental(read_csv(args.data))
    report = run_benchmark(records, cfg, master_seed=args.seed, repetitions=args.repetitions)
    if args.maps:
        seed = cfg.seed if args.seed is None else args.seed
        report.feature_maps = compare_feature_maps(records, benchmark_variants(cfg.pca_k), cfg, seed)
    os.makedirs(args.out_dir, exist_ok=True)
    report.write(args.out_dir)
    summ, ref = report.summary(), report.reference()
    print(f"{'model':<18}" + "".join(f"{k:>20}" for k in ("mae", "mse", "rmse")))
    for m, d in summ.items():
        print(f"{m:<18}" + "".join(f"{d[k][0]:>11.4f} ± {d[k][1]:<6.4f}" for k in ("mae", "mse", "rmse")))
    print(f"{'reference':<18}" + "".join(f"{ref[k][0]:>11.4f} ± {ref[k][1]:<6.4f}" for k in ("mae", "mse", "rmse")))
    if report.feature_maps is not None:
        print(f"feature-map winner: {report.feature_maps.winner}")
    print(f"report -> {args.out_dir}")
    return EXIT_OK


def cmd_kernel(args) -> int:
    cfg = PipelineConfig.load(args.config)
    records = _experimental(read_csv(args.data))
    if not records:
        raise InputError(f"{args.data}: no experimental records")
    raw = encode_records(records, require_labels=False)
    if args.bundle:
        bundle = PipelineBundle.load(args.bundle)
        X = bundle.transform(raw.X)
        spec, scale = bundle.qkr.spec, bundle.qkr.input_scale
    else:
        pca = pca_fit(raw.X, cfg.pca_k)
        Z = pca_transform(pca, raw.X)
        X = scale_transform(scale_fit(Z), Z)
        spec, scale = cfg.feature_map(cfg.pca_k), cfg.qkr_input_scale
    sampled = args.sampled or cfg.kernel_mode == "sampled"
    mode = KernelMode(args.shots or cfg.kernel_shots, cfg.seed) if sampled else KernelMode()
    K = gram_matrix(spec, scale * X, mode, raw.ids)
    K.to_csv(args.out)
    print(f"wrote {K.shape[0]}x{K.shape[1]} {mode} kernel to {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    bundle = PipelineBundle.load(args.bundle)
    records = read_csv(args.data)
    result = verify_holdout(bundle, records)
    print(f"{'record_id':<12}{'measured':>12}{'predicted':>12}{'abs_error':>12}")
    for row in result.rows():
        print(f"{row['record_id']:<12}{row['measured']:>12.4f}{row['predicted']:>12.4f}{row['abs_error']:>12.4f}")
    print(f"MAE = {result.mae:.4f} ohm mm over {len(result.record_ids)} samples")
    if args.out:
        result.write_csv(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qkr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic device dataset CSV")
    s.add_argument("--n", type=_positive_int, default=159)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.05, help="label noise std (ohm mm)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="fit the QKR pipeline and write a bundle")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--model-out", required=True)
    s.add_argument("--report-out")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="predict r_c for records with a trained bundle")
    s.add_argument("--bundle", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("benchmark", help="repeated-split benchmark against classical models")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--repetitions", type=_positive_int)
    s.add_argument("--seed", type=int)
    s.add_argument("--maps", action="store_true", help="also compare the four feature maps")
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("kernel", help="write the Gram matrix of experimental records as CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--bundle", help="use the frozen transforms of a trained bundle")
    s.add_argument("--sampled", action="store_true", help="shot-sampled kernel estimate")
    s.add_argument("--shots", type=_positive_int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_kernel)

    s = sub.add_parser("verify", help="score a bundle on labelled external records")
    s.add_argument("--bundle", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, SchemaError, ConfigError, ValueError, OSError) as exc:
        print(f"qkr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"qkr {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
