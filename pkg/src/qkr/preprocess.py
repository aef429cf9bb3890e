"""Device records, 37-feature encoding, train/test split, PCA and angle scaling."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

SCHEMA_VERSION = "1"

MATERIALS = ("Ti", "Al", "Ni", "Au", "Mo", "Ta", "TiN", "Pt")
MAX_LAYERS = 4
N_SCALARS = 5
RAW_WIDTH = N_SCALARS + MAX_LAYERS * len(MATERIALS)  # 37

CSV_HEADER = (
    "record_id", "al_content", "barrier_thickness_nm", "anneal_temp_c", "anneal_time_s",
    "anneal_ambient", "layer1", "layer2", "layer3", "layer4", "r_c_ohm_mm", "provenance",
)


class Ambient(str, enum.Enum):
    N2 = "N2"
    OTHER = "Other"


class Provenance(str, enum.Enum):
    EXPERIMENTAL = "Experimental"
    SYNTHESIZED = "Synthesized"


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceRecord:
    record_id: str
    al_content: float
    barrier_thickness_nm: float
    anneal_temp_c: float
    anneal_time_s: float
    anneal_ambient: Ambient
    metal_stack: tuple[str, ...]
    r_c: Optional[float] = None
    provenance: Provenance = Provenance.EXPERIMENTAL

    def __post_init__(self):
        object.__setattr__(self, "anneal_ambient", Ambient(self.anneal_ambient))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        object.__setattr__(self, "metal_stack", tuple(self.metal_stack))
        if not 0.0 <= self.al_content <= 1.0:
            raise SchemaError(f"{self.record_id}: al_content {self.al_content} outside [0, 1]")
        if not self.barrier_thickness_nm > 0:
            raise SchemaError(f"{self.record_id}: barrier thickness must be > 0")
        if not self.anneal_time_s > 0:
            raise SchemaError(f"{self.record_id}: anneal time must be > 0")
        if not math.isfinite(self.anneal_temp_c):
            raise SchemaError(f"{self.record_id}: anneal temperature must be finite")
        if not 1 <= len(self.metal_stack) <= MAX_LAYERS:
            raise SchemaError(f"{self.record_id}: metal stack needs 1..{MAX_LAYERS} layers, got {len(self.metal_stack)}")
        for m in self.metal_stack:
            if m not in MATERIALS:
                raise SchemaError(f"{self.record_id}: unknown material {m!r}")
        if self.r_c is not None and not (math.isfinite(self.r_c) and self.r_c >= 0):
            raise SchemaError(f"{self.record_id}: r_c must be finite and >= 0")


def encode_record(rec: DeviceRecord) -> np.ndarray:
    """Layout: 5 scalars (Al, thickness, T, t, ambient!=N2) then 4 x 8 material one-hot blocks."""
    v = np.zeros(RAW_WIDTH)
    v[:N_SCALARS] = (
        rec.al_content,
        rec.barrier_thickness_nm,
        rec.anneal_temp_c,
        rec.anneal_time_s,
        0.0 if rec.anneal_ambient is Ambient.N2 else 1.0,
    )
    for layer, material in enumerate(rec.metal_stack):
        v[N_SCALARS + layer * len(MATERIALS) + MATERIALS.index(material)] = 1.0
    return v


@dataclass
class EncodedDataset:
    X: np.ndarray
    y: np.ndarray
    ids: list
    provenance: list
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        if not (len(self.X) == len(self.y) == len(self.ids) == len(self.provenance)):
            raise ValueError("dataset columns have inconsistent lengths")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_synthesized(self) -> int:
        return sum(p is Provenance.SYNTHESIZED for p in self.provenance)

    def experimental(self) -> "EncodedDataset":
        keep = [i for i, p in enumerate(self.provenance) if p is Provenance.EXPERIMENTAL]
        return self.subset(keep)

    def subset(self, idx: Sequence[int]) -> "EncodedDataset":
        idx = list(idx)
        return EncodedDataset(self.X[idx], self.y[idx], [self.ids[i] for i in idx],
                              [self.provenance[i] for i in idx], self.schema_version)

    def with_X(self, X) -> "EncodedDataset":
        return replace(self, X=np.asarray(X, dtype=float))


def encode_records(records: Sequence[DeviceRecord], require_labels: bool = True) -> EncodedDataset:
    if require_labels:
        missing = [r.record_id for r in records if r.r_c is None]
        if missing:
            raise SchemaError(f"records without r_c label: {', '.join(map(str, missing[:5]))}")
    X = np.array([encode_record(r) for r in records]).reshape(len(records), RAW_WIDTH)
    y = np.array([np.nan if r.r_c is None else r.r_c for r in records])
    return EncodedDataset(X, y, [r.record_id for r in records], [r.provenance for r in records])


def assert_experimental(data, what: str = "test set") -> None:
    prov = data.provenance if isinstance(data, EncodedDataset) else [r.provenance for r in data]
    n_syn = sum(Provenance(p) is Provenance.SYNTHESIZED for p in prov)
    if n_syn:
        raise ValueError(f"{what} contains {n_syn} synthesized rows")


def train_size(n: int, train_fraction: float = 0.8) -> int:
    # round-half-up, so 159 * 0.8 = 127.2 -> 127 and 10 * 0.8 -> 8
    return int(math.floor(n * train_fraction + 0.5))


def split(data, train_fraction: float = 0.8, seed: int = 0):
    """Seeded uniform permutation split of a list of records or an EncodedDataset."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(data)
    if n < 2:
        raise ValueError("need at least 2 records to split")
    assert_experimental(data, "dataset to split")
    perm = np.random.default_rng(seed).permutation(n)
    k = min(max(train_size(n, train_fraction), 1), n - 1)
    tr, te = sorted(perm[:k].tolist()), sorted(perm[k:].tolist())
    if isinstance(data, EncodedDataset):
        return data.subset(tr), data.subset(te)
    return [data[i] for i in tr], [data[i] for i in te]


@dataclass
class PCAModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PCAModel":
        return cls(*(np.asarray(d[key], dtype=float) for key in
                     ("mean", "components", "explained_variance", "explained_variance_ratio")))


def pca_fit(X, k: int = 5) -> PCAModel:
    """Top-``k`` principal directions from the covariance eigendecomposition.

    Each component is signed so that its largest-magnitude coordinate is positive.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 rows")
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"k={k} must lie in [1, min(n-1, d)] = [1, {min(n - 1, d)}]")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / n
    w, V = np.linalg.eigh(cov)
    w, V = w[::-1], V[:, ::-1]
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total <= 0:
        raise ValueError("degenerate data: all rows identical")
    comps = V[:, :k].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PCAModel(mean, comps, w[:k].copy(), w[:k] / total)


def pca_transform(model: PCAModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.mean.shape[0]:
        raise ValueError(f"expected width {model.mean.shape[0]}, got {X.shape[1]}")
    return (X - model.mean) @ model.components.T


def pca_inverse(model: PCAModel, Z) -> np.ndarray:
    return np.asarray(Z) @ model.components + model.mean


@dataclass
class ScalerModel:
    """Per-column affine map of the fitted [min, max] onto [low, high]."""

    data_min: np.ndarray
    data_max: np.ndarray
    low: float = 0.0
    high: float = math.pi

    def to_dict(self) -> dict:
        return {"data_min": self.data_min.tolist(), "data_max": self.data_max.tolist(),
                "low": self.low, "high": self.high}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerModel":
        return cls(np.asarray(d["data_min"], dtype=float), np.asarray(d["data_max"], dtype=float),
                   float(d["low"]), float(d["high"]))


def scale_fit(X, low: float = 0.0, high: float = math.pi) -> ScalerModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.all(np.isfinite(X)):
        raise ValueError("cannot fit scaler on non-finite data")
    return ScalerModel(X.min(axis=0), X.max(axis=0), low, high)


def scale_transform(model: ScalerModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    span = model.data_max - model.data_min
    flat = span <= 0
    safe = np.where(flat, 1.0, span)
    out = model.low + (X - model.data_min) / safe * (model.high - model.low)
    out[:, flat] = 0.5 * (model.low + model.high)
    return np.clip(out, model.low, model.high)


def scale_inverse(model: ScalerModel, Z) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    span = model.data_max - model.data_min
    return model.data_min + (Z - model.low) / (model.high - model.low) * span


# --- synthetic generator ---------------------------------------------------

SYNTH_STACKS = (
    ("Ti", "Al", "Ni", "Au"),
    ("Ti", "Al", "Mo", "Au"),
    ("Ti", "Al", "Pt", "Au"),
    ("Ti", "Al", "Ti", "TiN"),
    ("Ta", "Al", "Ta"),
    ("Ti", "Al", "TiN"),
    ("Ti", "Al"),
)

_STACK_OFFSET = {
    ("Ti", "Al", "Ni", "Au"): 0.00,
    ("Ti", "Al", "Mo", "Au"): -0.05,
    ("Ti", "Al", "Pt", "Au"): 0.05,
    ("Ti", "Al", "Ti", "TiN"): 0.10,
    ("Ta", "Al", "Ta"): 0.20,
    ("Ti", "Al", "TiN"): 0.15,
    ("Ti", "Al"): 0.30,
}


def ground_truth_rc(rec: DeviceRecord) -> float:
    """Noise-free contact resistance (ohm mm) used by :func:`synth_dataset`.

    r_c = 0.3 + 1.8 ((T - 820) / 250)^2 + 0.8 exp(-t / 40) + 0.04 (d - 15)
          + 2.0 (0.25 - Al) + 0.15 [ambient != N2] + stack offset
    clipped below at 0.05.
    """
    u = (rec.anneal_temp_c - 820.0) / 250.0
    value = (
        0.3
        + 1.8 * u * u
        + 0.8 * math.exp(-rec.anneal_time_s / 40.0)
        + 0.04 * (rec.barrier_thickness_nm - 15.0)
        + 2.0 * (0.25 - rec.al_content)
        + (0.15 if rec.anneal_ambient is Ambient.OTHER else 0.0)
        + _STACK_OFFSET.get(tuple(rec.metal_stack), 0.1)
    )
    return max(0.05, value)


def synth_dataset(n: int, seed: int = 0, noise: float = 0.05) -> list[DeviceRecord]:
    """Random recipes with labels ``ground_truth_rc(rec) + noise * N(0, 1)`` (clipped at 0.05)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    records = []
    for k in range(n):
        stack = SYNTH_STACKS[rng.integers(len(SYNTH_STACKS))]
        rec = DeviceRecord(
            record_id=f"S{k:04d}",
            al_content=round(float(rng.uniform(0.15, 0.35)), 4),
            barrier_thickness_nm=round(float(rng.uniform(5.0, 30.0)), 2),
            anneal_temp_c=round(float(rng.uniform(400.0, 900.0)), 1),
            anneal_time_s=round(float(rng.uniform(30.0, 120.0)), 1),
            anneal_ambient=Ambient.N2 if rng.random() < 0.85 else Ambient.OTHER,
            metal_stack=stack,
        )
        eta = float(rng.standard_normal())
        r_c = max(0.05, ground_truth_rc(rec) + noise * eta)
        records.append(replace(rec, r_c=round(r_c, 6)))
    return records


# --- CSV ---------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(records: Iterable[DeviceRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            layers = list(r.metal_stack) + [""] * (MAX_LAYERS - len(r.metal_stack))
            w.writerow([
                r.record_id, _fmt(r.al_content), _fmt(r.barrier_thickness_nm), _fmt(r.anneal_temp_c),
                _fmt(r.anneal_time_s), r.anneal_ambient.value, *layers,
                "" if r.r_c is None else _fmt(r.r_c), r.provenance.value,
            ])


def read_csv(path) -> list[DeviceRecord]:
    """Parse a dataset CSV; errors name the offending line number."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise SchemaError(f"{path}: line 1: header must be {','.join(CSV_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise SchemaError(f"{path}: line {line}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            f = dict(zip(CSV_HEADER, (c.strip() for c in row)))
            try:
                layers = [f[f"layer{i}"] for i in range(1, MAX_LAYERS + 1)]
                while layers and not layers[-1]:
                    layers.pop()
                if "" in layers:
                    raise SchemaError("empty layer inside metal stack")
                records.append(DeviceRecord(
                    record_id=f["record_id"],
                    al_content=float(f["al_content"]),
                    barrier_thickness_nm=float(f["barrier_thickness_nm"]),
                    anneal_temp_c=float(f["anneal_temp_c"]),
                    anneal_time_s=float(f["anneal_time_s"]),
                    anneal_ambient=Ambient(f["anneal_ambient"]),
                    metal_stack=tuple(layers),
                    r_c=float(f["r_c_ohm_mm"]) if f["r_c_ohm_mm"] else None,
                    provenance=Provenance(f["provenance"] or Provenance.EXPERIMENTAL.value),
                ))
            except (ValueError, KeyError) as exc:
                raise SchemaError(f"{path}: line {line}: {exc}") from None
    return records
