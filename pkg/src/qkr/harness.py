"""Metrics, repeated-split benchmarking, feature-map comparison and holdout checks."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .baselines import BaselineKind, fit_baseline, predict_baseline
from .config import PipelineConfig
from .feature_map import FeatureMapSpec
from .pipeline import PipelineBundle, fit_qkr_from_config, predict_qkr, prepare_split
from .preprocess import DeviceRecord, EncodedDataset, assert_experimental, encode_records, split

log = logging.getLogger(__name__)

QKR = "QKR"
METRIC_NAMES = ("mae", "mse", "rmse")
# classical means at or below this are float dust from a perfect fit; ratios are flagged
NEGLIGIBLE_METRIC = 1e-12


class BenchmarkError(RuntimeError):
    pass


@dataclass(frozen=True)
class MetricSet:
    mae: float
    mse: float
    rmse: float
    pearson_r: Optional[float]  # None when either vector is constant
    n: int

    def to_dict(self) -> dict:
        return {"mae": self.mae, "mse": self.mse, "rmse": self.rmse, "pearson_r": self.pearson_r, "n": self.n}

    def __getitem__(self, name: str) -> float:
        return getattr(self, name)


def pearson(a, b) -> Optional[float]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da, db = a - a.mean(), b - b.mean()
    saa, sbb = float(da @ da), float(db @ db)
    if saa == 0.0 or sbb == 0.0:
        return None
    r = float(da @ db) / math.sqrt(saa * sbb)
    return max(-1.0, min(1.0, r))


def metrics(y_true, y_pred) -> MetricSet:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"shape mismatch: {y_true.shape} vs {y_pred.shape}")
    if len(y_true) == 0:
        raise ValueError("empty vectors")
    if not (np.all(np.isfinite(y_true)) and np.all(np.isfinite(y_pred))):
        raise ValueError("non-finite values in metric inputs")
    e = y_pred - y_true
    mse = float(np.mean(e * e))
    return MetricSet(float(np.mean(np.abs(e))), mse, math.sqrt(mse), pearson(y_true, y_pred), len(e))


def reference_metrics(train_labels, test_labels) -> MetricSet:
    """Metrics of predicting the mean experimental training label for every test point.

    ``train_labels`` may be an :class:`EncodedDataset`; synthesized rows are rejected.
    """
    if isinstance(train_labels, EncodedDataset):
        assert_experimental(train_labels, "reference-line training labels")
        train_labels = train_labels.y
    train_labels = np.asarray(train_labels, dtype=float)
    test_labels = np.asarray(test_labels, dtype=float)
    if len(train_labels) == 0 or len(test_labels) == 0:
        raise ValueError("reference line needs non-empty label sets")
    return metrics(test_labels, np.full(len(test_labels), train_labels.mean()))


def advantage_ratio(qkr_mean: float, cml_mean: float) -> float:
    """Relative improvement ``(cml - qkr) / cml``."""
    if not cml_mean > 0:
        raise ValueError(f"advantage ratio needs a positive classical metric, got {cml_mean}")
    return (cml_mean - qkr_mean) / cml_mean


def repetition_seed(master_seed: int, r: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), int(r)]).generate_state(1)[0])


@dataclass
class RepetitionResult:
    seed: int
    train_ids: list
    test_ids: list
    metrics: dict  # model -> MetricSet
    reference: MetricSet
    predictions: dict  # model -> np.ndarray
    y_test: np.ndarray


@dataclass
class BenchmarkReport:
    models: list
    repetitions: list
    config: dict
    master_seed: int
    feature_maps: Optional["FeatureMapComparison"] = None
    version: str = __version__

    @property
    def seeds(self) -> list:
        return [r.seed for r in self.repetitions]

    def _stat(self, values) -> tuple:
        v = np.asarray(values, dtype=float)
        return float(v.mean()), float(v.std())

    def summary(self) -> dict:
        """``{model: {metric: (mean, std)}}`` over repetitions (population std)."""
        out = {}
        for m in self.models:
            out[m] = {k: self._stat([rep.metrics[m][k] for rep in self.repetitions]) for k in METRIC_NAMES}
        return out

    def reference(self) -> dict:
        return {k: self._stat([rep.reference[k] for rep in self.repetitions]) for k in METRIC_NAMES}

    def advantage_ratios(self) -> dict:
        """``{cml_model: {metric: ratio or None}}``; None flags a negligible classical mean."""
        summ = self.summary()
        out = {}
        for m in self.models:
            if m == QKR:
                continue
            out[m] = {}
            for k in METRIC_NAMES:
                cml = summ[m][k][0]
                out[m][k] = advantage_ratio(summ[QKR][k][0], cml) if cml > NEGLIGIBLE_METRIC else None
        return out

    def to_dict(self) -> dict:
        summ = self.summary()
        return {
            "artifact_version": self.version,
            "config": self.config,
            "master_seed": self.master_seed,
            "repetitions": len(self.repetitions),
            "seeds": self.seeds,
            "models": self.models,
            "summary": {m: {k: {"mean": v[0], "std": v[1]} for k, v in d.items()} for m, d in summ.items()},
            "reference": {k: {"mean": v[0], "std": v[1]} for k, v in self.reference().items()},
            "advantage_ratios": self.advantage_ratios(),
            "per_repetition": [
                {
                    "seed": rep.seed,
                    "train_ids": rep.train_ids,
                    "test_ids": rep.test_ids,
                    "metrics": {m: ms.to_dict() for m, ms in rep.metrics.items()},
                    "reference": rep.reference.to_dict(),
                }
                for rep in self.repetitions
            ],
            "feature_maps": self.feature_maps.to_dict() if self.feature_maps else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, out_dir) -> list:
        os.makedirs(os.path.join(out_dir, "plotdata"), exist_ok=True)
        written = []

        def path(*parts):
            p = os.path.join(out_dir, *parts)
            written.append(p)
            return p

        with open(path("benchmark.json"), "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
        summ = self.summary()
        with open(path("benchmark.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "metric", "mean", "std"])
            for m in self.models:
                for k in METRIC_NAMES:
                    w.writerow([m, k, repr(summ[m][k][0]), repr(summ[m][k][1])])
            for k, (mean, std) in self.reference().items():
                w.writerow(["reference", k, repr(mean), repr(std)])
        with open(path("plotdata", "bars.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "model", "mean", "std", "reference_mean"])
            ref = self.reference()
            for k in METRIC_NAMES:
                for m in self.models:
                    w.writerow([k, m, repr(summ[m][k][0]), repr(summ[m][k][1]), repr(ref[k][0])])
        with open(path("plotdata", "advantage.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "model", "advantage_ratio"])
            for m, d in self.advantage_ratios().items():
                for k in METRIC_NAMES:
                    w.writerow([k, m, "" if d[k] is None else repr(d[k])])
        with open(path("plotdata", "scatter.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["repetition", "model", "record_id", "measured", "predicted", "residual"])
            for r, rep in enumerate(self.repetitions):
                for m in self.models:
                    for rid, yt, yp in zip(rep.test_ids, rep.y_test, rep.predictions[m]):
                        w.writerow([r, m, rid, repr(float(yt)), repr(float(yp)), repr(float(yp - yt))])
        if self.feature_maps is not None:
            self.feature_maps.write_csv(path("plotdata", "feature_maps.csv"))
        return written


def _as_dataset(data) -> EncodedDataset:
    if isinstance(data, EncodedDataset):
        return data
    return encode_records(list(data))


def run_benchmark(
    data,
    cfg: Optional[PipelineConfig] = None,
    master_seed: Optional[int] = None,
    repetitions: Optional[int] = None,
    models: Optional[Sequence[str]] = None,
) -> BenchmarkReport:
    """Paired repeated-split benchmark of the QKR against the classical baselines."""
    cfg = cfg or PipelineConfig()
    master_seed = cfg.seed if master_seed is None else master_seed
    repetitions = cfg.repetitions if repetitions is None else repetitions
    models = list(models) if models is not None else [QKR] + [k.value for k in BaselineKind]
    if QKR not in models:
        raise ValueError("model suite must include the QKR")
    dataset = _as_dataset(data)
    assert_experimental(dataset, "benchmark dataset")
    hyper = {k.value: v for k, v in cfg.baseline_hyperparams().items()}

    reps = []
    for r in range(repetitions):
        seed = repetition_seed(master_seed, r)
        train_raw, test_raw = split(dataset, cfg.train_fraction, seed)
        prep = prepare_split(train_raw, test_raw, cfg, seed)
        preds, scores = {}, {}
        for name in models:
            try:
                if name == QKR:
                    model = fit_qkr_from_config(prep.train, cfg, seed)
                    preds[name] = predict_qkr(model, prep.test.X)
                else:
                    b = fit_baseline(name, prep.train.X, prep.train.y, hyper[name], seed=seed)
                    preds[name] = predict_baseline(b, prep.test.X)
                scores[name] = metrics(prep.test.y, preds[name])
            except Exception as exc:
                raise BenchmarkError(f"repetition {r}, model {name}: {exc}") from exc
        log.info("repetition %d/%d: QKR mae=%.4f", r + 1, repetitions, scores[QKR].mae)
        reps.append(RepetitionResult(
            seed=seed,
            train_ids=list(prep.train.ids),
            test_ids=list(prep.test.ids),
            metrics=scores,
            reference=reference_metrics(prep.train_experimental_y, prep.test.y),
            predictions=preds,
            y_test=prep.test.y.copy(),
        ))
    return BenchmarkReport(models, reps, cfg.to_dict(), int(master_seed))


# --- feature-map comparison --------------------------------------------------

def select_winner(table: dict) -> str:
    """Lowest MAE, then lowest RMSE, then lexicographic name."""
    return min(table, key=lambda name: (table[name].mae, table[name].rmse, name))


@dataclass
class FeatureMapComparison:
    table: dict  # spec name -> MetricSet
    winner: str
    seed: int
    specs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "winner": self.winner,
                "table": {k: v.to_dict() for k, v in self.table.items()},
                "specs": [s.to_dict() for s in self.specs]}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature_map", "mae", "mse", "rmse", "winner"])
            for name, ms in self.table.items():
                w.writerow([name, repr(ms.mae), repr(ms.mse), repr(ms.rmse), int(name == self.winner)])


def compare_feature_maps(data, specs: Sequence[FeatureMapSpec], cfg: Optional[PipelineConfig] = None,
                         seed: int = 0) -> FeatureMapComparison:
    """Score each map on one shared split/augmentation; only the encoding differs."""
    cfg = cfg or PipelineConfig()
    specs = list(specs)
    if len(specs) < 2:
        raise ValueError("need at least two feature maps to compare")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate feature maps in comparison: {names}")
    dataset = _as_dataset(data)
    train_raw, test_raw = split(dataset, cfg.train_fraction, seed)
    prep = prepare_split(train_raw, test_raw, cfg, seed)
    table = {}
    for spec in specs:
        model = fit_qkr_from_config(prep.train, cfg, seed, spec=spec)
        table[spec.name] = metrics(prep.test.y, predict_qkr(model, prep.test.X))
    return FeatureMapComparison(table, select_winner(table), seed, specs)


# --- external verification ------------------------------------------------

@dataclass
class HoldoutResult:
    record_ids: list
    measured: np.ndarray
    predicted: np.ndarray

    @property
    def abs_error(self) -> np.ndarray:
        return np.abs(self.predicted - self.measured)

    @property
    def mae(self) -> float:
        return float(self.abs_error.mean())

    def rows(self) -> list:
        return [
            {"record_id": rid, "measured": float(m), "predicted": float(p), "abs_error": float(abs(p - m))}
            for rid, m, p in zip(self.record_ids, self.measured, self.predicted)
        ]

    def to_dict(self) -> dict:
        return {"rows": self.rows(), "mae": self.mae, "n": len(self.record_ids)}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["record_id", "measured", "predicted", "abs_error"])
            for row in self.rows():
                w.writerow([row["record_id"], repr(row["measured"]), repr(row["predicted"]), repr(row["abs_error"])])
            w.writerow(["MAE", "", "", repr(self.mae)])


def verify_holdout(bundle: PipelineBundle, records: Sequence[DeviceRecord]) -> HoldoutResult:
    records = list(records)
    if not records:
        raise ValueError("no external records to verify")
    missing = [r.record_id for r in records if r.r_c is None]
    if missing:
        raise ValueError(f"external records missing measured r_c: {', '.join(missing)}")
    predicted = bundle.predict_records(records)
    measured = np.array([r.r_c for r in records], dtype=float)
    return HoldoutResult([r.record_id for r in records], measured, predicted)
