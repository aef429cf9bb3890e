"""End-to-end QKR pipeline: PCA -> angle scaling -> VAE augmentation -> kernel SVR.

The fitted pieces are frozen into a :class:`PipelineBundle` that can be written
to JSON and re-applied to unseen device records.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__, kernel_svr
from .config import PipelineConfig
from .feature_map import FeatureMapSpec
from .preprocess import (
    SCHEMA_VERSION,
    DeviceRecord,
    EncodedDataset,
    PCAModel,
    ScalerModel,
    assert_experimental,
    encode_records,
    pca_fit,
    pca_transform,
    scale_fit,
    scale_transform,
    split,
)
from .qkernel import KernelMode, cross_matrix, gram_matrix, psd_project
from .vae import AugmentResult, VAEParams, augment

log = logging.getLogger(__name__)


@dataclass
class PreparedSplit:
    train: EncodedDataset  # augmented, reduced and scaled
    test: EncodedDataset  # experimental only, reduced and scaled
    train_experimental_y: np.ndarray
    pca: PCAModel
    scaler: ScalerModel
    augmentation: AugmentResult


def prepare_split(train_raw: EncodedDataset, test_raw: EncodedDataset, cfg: PipelineConfig, seed: int) -> PreparedSplit:
    assert_experimental(train_raw, "training set")
    assert_experimental(test_raw, "test set")
    pca = pca_fit(train_raw.X, cfg.pca_k)
    z_train = pca_transform(pca, train_raw.X)
    if cfg.pca_per_set:
        z_test = pca_transform(pca_fit(test_raw.X, cfg.pca_k), test_raw.X)
    else:
        z_test = pca_transform(pca, test_raw.X)
    scaler = scale_fit(z_train)
    train = train_raw.with_X(scale_transform(scaler, z_train))
    test = test_raw.with_X(scale_transform(scaler, z_test))
    target = int(round(cfg.vae_factor * len(train)))
    aug = augment(
        train, target,
        epochs=cfg.vae_epochs, learning_rate=cfg.vae_learning_rate, batch_size=cfg.vae_batch_size,
        kl_weight=cfg.vae_kl_weight, hidden_dim=cfg.vae_hidden, latent_dim=cfg.vae_latent, seed=seed,
    )
    assert_experimental(test, "test set")
    return PreparedSplit(aug.data, test, train_raw.y.copy(), pca, scaler, aug)


@dataclass
class QKRModel:
    """Kernel SVR over fidelities of ``input_scale * x`` encoded by ``spec``."""

    spec: FeatureMapSpec
    svr: kernel_svr.SVRModel
    train_X: np.ndarray
    mode: KernelMode
    input_scale: float = 1.0


def fit_qkr(X, y, spec: FeatureMapSpec, C: float = 1.0, epsilon: float = 0.1, tol: float = 1e-3,
            mode: KernelMode = KernelMode(), ids: Optional[Sequence] = None, input_scale: float = 1.0) -> QKRModel:
    X = np.asarray(X, dtype=float)
    ids = list(ids) if ids is not None else list(range(len(X)))
    K = gram_matrix(spec, input_scale * X, mode, ids)
    if not mode.exact:
        K = psd_project(K)
    svr = kernel_svr.fit(K, y, C=C, epsilon=epsilon, tol=tol, train_ids=ids)
    return QKRModel(spec, svr, X.copy(), mode, float(input_scale))


def predict_qkr(model: QKRModel, X) -> np.ndarray:
    mode = model.mode if model.mode.exact else KernelMode(model.mode.shots, model.mode.seed + 1)
    s = model.input_scale
    Kx = cross_matrix(model.spec, s * np.asarray(X, dtype=float), s * model.train_X, mode,
                      train_ids=model.svr.train_ids)
    return kernel_svr.predict(model.svr, Kx)


def fit_qkr_from_config(train: EncodedDataset, cfg: PipelineConfig, seed: int,
                        spec: Optional[FeatureMapSpec] = None) -> QKRModel:
    spec = spec or cfg.feature_map(train.X.shape[1])
    return fit_qkr(train.X, train.y, spec, cfg.svr_C, cfg.svr_epsilon, cfg.svr_tol,
                   cfg.kernel_mode_for(seed), train.ids, cfg.qkr_input_scale)


@dataclass
class PipelineBundle:
    config: dict
    pca: PCAModel
    scaler: ScalerModel
    qkr: QKRModel
    vae: Optional[VAEParams] = None
    train_ids: Optional[list] = None
    test_ids: Optional[list] = None
    version: str = __version__
    schema_version: str = SCHEMA_VERSION

    @property
    def n_raw_features(self) -> int:
        return int(self.pca.mean.shape[0])

    def transform(self, raw_X) -> np.ndarray:
        raw_X = np.atleast_2d(np.asarray(raw_X, dtype=float))
        if raw_X.shape[1] != self.n_raw_features:
            raise ValueError(f"feature width mismatch: bundle expects {self.n_raw_features} encoded features, "
                             f"got {raw_X.shape[1]}")
        return scale_transform(self.scaler, pca_transform(self.pca, raw_X))

    def predict_encoded(self, raw_X) -> np.ndarray:
        return predict_qkr(self.qkr, self.transform(raw_X))

    def predict_records(self, records: Sequence[DeviceRecord]) -> np.ndarray:
        return self.predict_encoded(encode_records(records, require_labels=False).X)

    def to_dict(self) -> dict:
        mode = self.qkr.mode
        return {
            "artifact_version": self.version,
            "schema_version": self.schema_version,
            "config": self.config,
            "pca": self.pca.to_dict(),
            "scaler": self.scaler.to_dict(),
            "feature_map": self.qkr.spec.to_dict(),
            "kernel_mode": {"shots": mode.shots, "seed": mode.seed},
            "qkr_input_scale": self.qkr.input_scale,
            "svr": self.qkr.svr.to_dict(),
            "train_X": self.qkr.train_X.tolist(),
            "vae": self.vae.to_dict() if self.vae is not None else None,
            "train_ids": self.train_ids,
            "test_ids": self.test_ids,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineBundle":
        try:
            mode = KernelMode(d["kernel_mode"]["shots"], d["kernel_mode"]["seed"])
            qkr = QKRModel(FeatureMapSpec.from_dict(d["feature_map"]), kernel_svr.SVRModel.from_dict(d["svr"]),
                           np.asarray(d["train_X"], dtype=float), mode, float(d["qkr_input_scale"]))
            return cls(
                config=d["config"],
                pca=PCAModel.from_dict(d["pca"]),
                scaler=ScalerModel.from_dict(d["scaler"]),
                qkr=qkr,
                vae=VAEParams.from_dict(d["vae"]) if d.get("vae") else None,
                train_ids=d.get("train_ids"),
                test_ids=d.get("test_ids"),
                version=d.get("artifact_version", __version__),
                schema_version=d.get("schema_version", SCHEMA_VERSION),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed pipeline bundle: missing or invalid field {exc}") from None

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "PipelineBundle":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class TrainResult:
    bundle: PipelineBundle
    prepared: PreparedSplit
    y_test: np.ndarray
    y_pred: np.ndarray
    train_fitted: np.ndarray


def train_pipeline(records: Sequence[DeviceRecord], cfg: PipelineConfig) -> TrainResult:
    """Split, prepare, fit the QKR and score it on the held-out experimental rows."""
    data = encode_records(records)
    train_raw, test_raw = split(data, cfg.train_fraction, cfg.seed)
    prepared = prepare_split(train_raw, test_raw, cfg, cfg.seed)
    log.info("training QKR on %d rows (%d synthesized), testing on %d",
             len(prepared.train), prepared.train.n_synthesized, len(prepared.test))
    model = fit_qkr_from_config(prepared.train, cfg, cfg.seed)
    y_pred = predict_qkr(model, prepared.test.X)
    fitted = predict_qkr(model, prepared.train.X)
    bundle = PipelineBundle(cfg.to_dict(), prepared.pca, prepared.scaler, model,
                            prepared.augmentation.params, list(prepared.train.ids), list(prepared.test.ids))
    return TrainResult(bundle, prepared, prepared.test.y, y_pred, fitted)
