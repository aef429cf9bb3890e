"""Small variational auto-encoder used to synthesize extra training rows.

Architecture: ``D -> h (tanh) -> (mu, log_var) in R^L``, ``z = mu + exp(log_var / 2) * eta``,
``z -> h (tanh) -> D`` with a linear output.  Gradients are written out by hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .preprocess import EncodedDataset, Provenance, ScalerModel, assert_experimental, scale_fit, scale_inverse, scale_transform

PARAM_NAMES = ("W1", "b1", "Wm", "bm", "Wv", "bv", "W4", "b4", "W5", "b5")


class DivergenceError(RuntimeError):
    pass


@dataclass
class VAEParams:
    input_dim: int
    hidden_dim: int
    latent_dim: int
    weights: dict = field(default_factory=dict)

    def shapes(self) -> dict:
        D, h, L = self.input_dim, self.hidden_dim, self.latent_dim
        return {"W1": (D, h), "b1": (h,), "Wm": (h, L), "bm": (L,), "Wv": (h, L), "bv": (L,),
                "W4": (L, h), "b4": (h,), "W5": (h, D), "b5": (D,)}

    def copy(self) -> "VAEParams":
        return VAEParams(self.input_dim, self.hidden_dim, self.latent_dim,
                         {k: v.copy() for k, v in self.weights.items()})

    def check_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.weights.values())

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "latent_dim": self.latent_dim,
            "weights": {k: self.weights[k].ravel().tolist() for k in PARAM_NAMES},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VAEParams":
        p = cls(int(d["input_dim"]), int(d["hidden_dim"]), int(d["latent_dim"]))
        p.weights = {k: np.asarray(d["weights"][k], dtype=float).reshape(shape)
                     for k, shape in p.shapes().items()}
        return p


def init_params(input_dim: int, hidden_dim: int = 16, latent_dim: int = 3, seed: int = 0) -> VAEParams:
    rng = np.random.default_rng(seed)
    p = VAEParams(input_dim, hidden_dim, latent_dim)
    for name, shape in p.shapes().items():
        if name.startswith("W"):
            scale = math.sqrt(1.0 / shape[0])
            p.weights[name] = rng.normal(0.0, scale, size=shape)
        else:
            p.weights[name] = np.zeros(shape)
    return p


def _seed_seq(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


@dataclass
class TrainTrace:
    loss: list = field(default_factory=list)
    reconstruction: list = field(default_factory=list)
    kl: list = field(default_factory=list)
    kl_weight: list = field(default_factory=list)


def _forward(params: VAEParams, X: np.ndarray, eta: np.ndarray):
    w = params.weights
    h1 = np.tanh(X @ w["W1"] + w["b1"])
    mu = h1 @ w["Wm"] + w["bm"]
    log_var = h1 @ w["Wv"] + w["bv"]
    sigma = np.exp(0.5 * log_var)
    z = mu + sigma * eta
    h2 = np.tanh(z @ w["W4"] + w["b4"])
    out = h2 @ w["W5"] + w["b5"]
    return h1, mu, log_var, sigma, z, h2, out


def elbo_terms(X, mu, log_var, out):
    """(reconstruction MSE, KL to N(0, I) summed over latent dims, averaged over rows)."""
    X, mu, log_var, out = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (X, mu, log_var, out))
    B = X.shape[0]
    recon = float(np.mean((out - X) ** 2))
    kl = float(-0.5 * np.sum(1.0 + log_var - mu ** 2 - np.exp(log_var)) / B)
    return recon, kl


def _check_batch(params: VAEParams, batch) -> np.ndarray:
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[1] != params.input_dim:
        raise ValueError(f"batch width {batch.shape[1]} != VAE input width {params.input_dim}")
    return batch


def vae_loss(params: VAEParams, batch, kl_weight: float = 1.0, eta=None, seed: Optional[int] = None):
    """Return ``(loss, reconstruction, kl)`` for one batch.

    ``eta`` is the reparameterisation noise (shape ``(B, L)``); when omitted it is
    drawn from ``seed``.
    """
    X = _check_batch(params, batch)
    if eta is None:
        eta = np.random.default_rng(seed).standard_normal((X.shape[0], params.latent_dim))
    _, mu, log_var, _, _, _, out = _forward(params, X, eta)
    recon, kl = elbo_terms(X, mu, log_var, out)
    return recon + kl_weight * kl, recon, kl


def vae_loss_and_grad(params: VAEParams, batch, eta, kl_weight: float = 1.0):
    X = _check_batch(params, batch)
    w = params.weights
    B, D = X.shape
    h1, mu, log_var, sigma, z, h2, out = _forward(params, X, eta)
    recon, kl = elbo_terms(X, mu, log_var, out)

    g = {}
    d_out = 2.0 * (out - X) / (B * D)
    g["W5"] = h2.T @ d_out
    g["b5"] = d_out.sum(axis=0)
    d_a2 = (d_out @ w["W5"].T) * (1.0 - h2 ** 2)
    g["W4"] = z.T @ d_a2
    g["b4"] = d_a2.sum(axis=0)
    d_z = d_a2 @ w["W4"].T
    d_mu = d_z + kl_weight * mu / B
    d_lv = d_z * eta * 0.5 * sigma - kl_weight * 0.5 * (1.0 - np.exp(log_var)) / B
    g["Wm"] = h1.T @ d_mu
    g["bm"] = d_mu.sum(axis=0)
    g["Wv"] = h1.T @ d_lv
    g["bv"] = d_lv.sum(axis=0)
    d_a1 = (d_mu @ w["Wm"].T + d_lv @ w["Wv"].T) * (1.0 - h1 ** 2)
    g["W1"] = X.T @ d_a1
    g["b1"] = d_a1.sum(axis=0)
    return (recon + kl_weight * kl, recon, kl), g


def kl_schedule(epoch: int, epochs: int, kl_weight: float, warmup_fraction: float = 0.1) -> float:
    warm = max(1, math.ceil(warmup_fraction * epochs))
    return kl_weight * min(1.0, (epoch + 1) / warm)


def vae_train(
    X_train,
    epochs: int = 200,
    learning_rate: float = 1e-2,
    batch_size: int = 32,
    kl_weight: float = 1.0,
    seed: int = 0,
    hidden_dim: int = 16,
    latent_dim: int = 3,
    warmup_fraction: float = 0.1,
):
    """Plain mini-batch gradient descent; returns ``(params, trace)``."""
    X = np.atleast_2d(np.asarray(X_train, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty training matrix")
    if epochs < 1 or learning_rate <= 0 or batch_size < 1 or kl_weight < 0:
        raise ValueError("epochs, learning_rate and batch_size must be positive; kl_weight >= 0")
    init_seq, train_seq = _seed_seq(seed).spawn(2)
    params = init_params(X.shape[1], hidden_dim, latent_dim, seed=init_seq)
    rng = np.random.default_rng(train_seq)
    trace = TrainTrace()
    n = X.shape[0]
    for epoch in range(epochs):
        w_kl = kl_schedule(epoch, epochs, kl_weight, warmup_fraction)
        order = rng.permutation(n)
        sums = np.zeros(3)
        n_batches = 0
        for start in range(0, n, batch_size):
            batch = X[order[start:start + batch_size]]
            eta = rng.standard_normal((batch.shape[0], latent_dim))
            terms, grads = vae_loss_and_grad(params, batch, eta, w_kl)
            if not np.isfinite(terms[0]):
                raise DivergenceError(f"VAE loss became non-finite at epoch {epoch + 1}")
            for name in PARAM_NAMES:
                params.weights[name] -= learning_rate * grads[name]
            sums += terms
            n_batches += 1
        if not params.check_finite():
            raise DivergenceError(f"VAE parameters became non-finite at epoch {epoch + 1}")
        _, recon, kl = sums / n_batches
        trace.loss.append(float(recon + w_kl * kl))
        trace.reconstruction.append(float(recon))
        trace.kl.append(float(kl))
        trace.kl_weight.append(float(w_kl))
    return params, trace


def decode(params: VAEParams, Z) -> np.ndarray:
    w = params.weights
    return np.tanh(np.asarray(Z) @ w["W4"] + w["b4"]) @ w["W5"] + w["b5"]


def vae_generate(params: VAEParams, n: int, seed: int = 0, low: float = 0.0, high: float = math.pi,
                 label_range: Optional[tuple] = None) -> np.ndarray:
    """Decode ``n`` prior samples; features clamped to ``[low, high]``, last column to ``label_range``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    Z = np.random.default_rng(seed).standard_normal((n, params.latent_dim))
    rows = decode(params, Z)
    rows[:, :-1] = np.clip(rows[:, :-1], low, high)
    lo, hi = label_range if label_range is not None else (low, high)
    rows[:, -1] = np.clip(rows[:, -1], lo, hi)
    return rows


@dataclass
class AugmentResult:
    data: EncodedDataset
    params: Optional[VAEParams]
    trace: Optional[TrainTrace]
    label_scaler: Optional[ScalerModel]


def augment(
    train: EncodedDataset,
    target_size: Optional[int] = None,
    epochs: int = 200,
    learning_rate: float = 1e-2,
    batch_size: int = 32,
    kl_weight: float = 1.0,
    hidden_dim: int = 16,
    latent_dim: int = 3,
    seed: int = 0,
    low: float = 0.0,
    high: float = math.pi,
) -> AugmentResult:
    """Append VAE-synthesized rows to ``train`` until it holds ``target_size`` rows.

    ``train.X`` must already be scaled to ``[low, high]``.  The label is min-max
    scaled into the same range for training and mapped back on output.
    """
    assert_experimental(train, "training set passed to augment")
    n = len(train)
    if target_size is None:
        target_size = 3 * n
    if target_size < n:
        raise ValueError(f"target_size {target_size} is smaller than the training set ({n})")
    n_new = target_size - n
    if n_new == 0:
        return AugmentResult(train, None, None, None)

    label_scaler = scale_fit(train.y[:, None], low, high)
    Y = scale_transform(label_scaler, train.y[:, None])
    data = np.hstack([train.X, Y])
    train_seq, gen_seq = _seed_seq(seed).spawn(2)
    params, trace = vae_train(data, epochs=epochs, learning_rate=learning_rate, batch_size=batch_size,
                              kl_weight=kl_weight, seed=train_seq, hidden_dim=hidden_dim, latent_dim=latent_dim)
    rows = vae_generate(params, n_new, seed=gen_seq, low=low, high=high)
    y_new = scale_inverse(label_scaler, rows[:, -1:])[:, 0]
    y_new = np.clip(y_new, train.y.min(), train.y.max())
    merged = EncodedDataset(
        np.vstack([train.X, rows[:, :-1]]),
        np.concatenate([train.y, y_new]),
        list(train.ids) + [f"SYN{k:04d}" for k in range(n_new)],
        list(train.provenance) + [Provenance.SYNTHESIZED] * n_new,
        train.schema_version,
    )
    return AugmentResult(merged, params, trace, label_scaler)
