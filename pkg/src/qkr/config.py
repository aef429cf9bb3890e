"""Flat JSON pipeline configuration. Unknown keys are rejected."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Optional

from .baselines import BaselineKind
from .feature_map import Entanglement, Family, FeatureMapSpec
from .qkernel import KernelMode


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    # feature map
    feature_map_family: str = "ZZ"
    feature_map_entanglement: str = "full"
    feature_map_reps: int = 2
    # quantum kernel
    kernel_mode: str = "exact"
    kernel_shots: int = 1024
    # SVR
    svr_C: float = 1.0
    svr_epsilon: float = 0.1
    svr_tol: float = 1e-3
    # multiplier on the [0, pi]-scaled features before quantum encoding
    qkr_input_scale: float = 1.0 / 32
    # PCA / split
    pca_k: int = 5
    pca_per_set: bool = False
    train_fraction: float = 0.8
    # VAE augmentation
    vae_factor: float = 3.0
    vae_hidden: int = 16
    vae_latent: int = 3
    vae_epochs: int = 200
    vae_learning_rate: float = 1e-2
    vae_batch_size: int = 32
    vae_kl_weight: float = 1.0
    # benchmark
    seed: int = 0
    repetitions: int = 5
    # classical baselines
    ridge_lambda: float = 1.0
    knn_k: int = 5
    tree_max_depth: int = 8
    tree_min_leaf: int = 2
    forest_n_trees: int = 100
    forest_max_depth: int = 8
    boost_rounds: int = 200
    boost_depth: int = 3
    boost_learning_rate: float = 0.05
    rbf_C: float = 1.0
    rbf_epsilon: float = 0.1
    rbf_gamma: Optional[float] = None

    def __post_init__(self):
        if self.kernel_mode not in ("exact", "sampled"):
            raise ConfigError(f"kernel_mode must be 'exact' or 'sampled', got {self.kernel_mode!r}")
        if self.vae_factor < 1.0:
            raise ConfigError("vae_factor must be >= 1")
        if not self.qkr_input_scale > 0:
            raise ConfigError("qkr_input_scale must be > 0")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        self.feature_map(self.pca_k)

    def feature_map(self, n_features: Optional[int] = None) -> FeatureMapSpec:
        try:
            return FeatureMapSpec(Family(self.feature_map_family), Entanglement(self.feature_map_entanglement),
                                  int(self.feature_map_reps), int(n_features or self.pca_k))
        except ValueError as exc:
            raise ConfigError(f"invalid feature map: {exc}") from None

    def kernel_mode_for(self, seed: int) -> KernelMode:
        return KernelMode() if self.kernel_mode == "exact" else KernelMode(int(self.kernel_shots), int(seed))

    def baseline_hyperparams(self) -> dict:
        return {
            BaselineKind.RIDGE: {"lam": self.ridge_lambda},
            BaselineKind.KNN: {"k": self.knn_k},
            BaselineKind.TREE: {"max_depth": self.tree_max_depth, "min_leaf": self.tree_min_leaf},
            BaselineKind.FOREST: {"n_trees": self.forest_n_trees, "max_depth": self.forest_max_depth,
                                  "min_leaf": self.tree_min_leaf},
            BaselineKind.BOOSTING: {"n_rounds": self.boost_rounds, "max_depth": self.boost_depth,
                                    "learning_rate": self.boost_learning_rate},
            BaselineKind.RBF_SVR: {"C": self.rbf_C, "epsilon": self.rbf_epsilon, "gamma": self.rbf_gamma},
        }

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        if path is None:
            return cls()
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)
