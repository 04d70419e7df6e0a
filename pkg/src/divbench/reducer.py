"""Learned behaviour space: a small numpy VAE plus a linear fitness head.

The encoder mean is the measure vector used by MAP-Elites. A ridge regression
from measures to ground-truth fitness, split element-wise, gives the
sub-objectives handed to the multi-objective algorithms.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

VERSION = "reducer-v1"
ACTIVATIONS = ("tanh", "identity")


class ReducerError(ValueError):
    """Shape mismatches, singular fits, bad model documents."""


class TrainingDiverged(ReducerError):
    pass


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "tanh"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ReducerError(f"layer shapes do not agree: W{self.weight.shape}, b{self.bias.shape}")
        if self.activation not in ACTIVATIONS:
            raise ReducerError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ReducerError("layer has non-finite entries")

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]


@dataclass
class MlpParams:
    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ReducerError("an MLP needs at least one layer")
        for a, b in zip(self.layers[:-1], self.layers[1:]):
            if a.n_out != b.n_in:
                raise ReducerError(f"layer chain broken: {a.n_out} -> {b.n_in}")

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns the output and the list of layer inputs (for backprop)."""
        inputs = []
        h = x
        for layer in self.layers:
            inputs.append(h)
            h = h @ layer.weight.T + layer.bias
            if layer.activation == "tanh":
                h = np.tanh(h)
        inputs.append(h)
        return h, inputs

    def backward(self, inputs: list[np.ndarray], grad_out: np.ndarray):
        """Backprop ``grad_out`` through the MLP; returns (grad wrt input, [(dW, db), ...])."""
        grads = []
        g = grad_out
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if layer.activation == "tanh":
                out = inputs[i + 1]
                g = g * (1.0 - out * out)
            grads.append((g.T @ inputs[i], g.sum(axis=0)))
            g = g @ layer.weight
        grads.reverse()
        return g, grads


@dataclass
class VaeModel:
    encoder: MlpParams  # trunk; may be empty-width-free but must exist
    mu_head: Layer
    logvar_head: Layer
    decoder: MlpParams

    def __post_init__(self):
        if self.mu_head.n_in != self.encoder.n_out or self.logvar_head.n_in != self.encoder.n_out:
            raise ReducerError("encoder heads do not match the trunk width")
        if self.mu_head.n_out != self.logvar_head.n_out:
            raise ReducerError("mu and logvar heads must have the same width")
        if self.decoder.n_in != self.mu_head.n_out:
            raise ReducerError("decoder input does not match latent width")
        if self.decoder.n_out != self.encoder.n_in:
            raise ReducerError("decoder output does not match encoder input")
        if self.mu_head.activation != "identity" or self.logvar_head.activation != "identity":
            raise ReducerError("latent heads must be linear")

    @property
    def latent_dim(self) -> int:
        return self.mu_head.n_out

    @property
    def input_dim(self) -> int:
        return self.encoder.n_in

    def layers(self) -> list[Layer]:
        return [*self.encoder.layers, self.mu_head, self.logvar_head, *self.decoder.layers]

    def parameters(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order (weight, bias per layer)."""
        out = []
        for layer in self.layers():
            out.extend((layer.weight, layer.bias))
        return out

    def copy(self) -> VaeModel:
        def cp(layer):
            return Layer(layer.weight.copy(), layer.bias.copy(), layer.activation)

        return VaeModel(MlpParams([cp(x) for x in self.encoder.layers]), cp(self.mu_head),
                        cp(self.logvar_head), MlpParams([cp(x) for x in self.decoder.layers]))


@dataclass
class FitnessHead:
    weights: np.ndarray
    bias: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        self.bias = float(self.bias)
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise ReducerError("fitness head has non-finite entries")


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 64
    learning_rate: float = 0.01
    beta_kl: float = 1.0
    seed: int = 0
    l2_ridge: float = 1e-6

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ReducerError("need epochs >= 1, batch_size >= 1, learning_rate > 0")
        if self.beta_kl < 0 or self.l2_ridge < 0:
            raise ReducerError("beta_kl and l2_ridge must be non-negative")


@dataclass
class Architecture:
    input_dim: int
    latent_dim: int = 4
    hidden: tuple[int, ...] = field(default=(32, 32))


def _check_dim(x: np.ndarray, dim: int, what: str):
    if x.shape[-1] != dim:
        raise ReducerError(f"{what} has dimension {x.shape[-1]}, model expects {dim}")


def encode(model: VaeModel, p) -> tuple[np.ndarray, np.ndarray]:
    """Encoder forward pass; accepts one phenotype or a batch."""
    p = np.asarray(p, dtype=np.float64)
    _check_dim(p, model.input_dim, "phenotype")
    h, _ = model.encoder.forward(p)
    mu = h @ model.mu_head.weight.T + model.mu_head.bias
    logvar = h @ model.logvar_head.weight.T + model.logvar_head.bias
    return mu, logvar


def reparameterize(mu, logvar, noise) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    return mu + np.exp(0.5 * np.asarray(logvar, dtype=np.float64)) * np.asarray(noise, dtype=np.float64)


def decode(model: VaeModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    _check_dim(z, model.latent_dim, "latent vector")
    out, _ = model.decoder.forward(z)
    return out


def kl_divergence(mu, logvar) -> np.ndarray:
    """KL(N(mu, exp(logvar)) || N(0, I)) summed over the last axis."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    return -0.5 * np.sum(1.0 + logvar - mu * mu - np.exp(logvar), axis=-1)


def vae_loss(model: VaeModel, batch, noise, beta_kl: float) -> tuple[float, list[np.ndarray]]:
    """Mean per-sample squared reconstruction error plus ``beta_kl`` times KL.

    Returns the loss and gradients ordered like ``model.parameters()``.
    """
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    eps = np.atleast_2d(np.asarray(noise, dtype=np.float64))
    if x.shape[0] == 0:
        raise ReducerError("empty batch")
    _check_dim(x, model.input_dim, "phenotype")
    if eps.shape != (x.shape[0], model.latent_dim):
        raise ReducerError("noise batch must be (batch, latent_dim)")
    n = x.shape[0]

    h, enc_inputs = model.encoder.forward(x)
    mu = h @ model.mu_head.weight.T + model.mu_head.bias
    logvar = h @ model.logvar_head.weight.T + model.logvar_head.bias
    std = np.exp(0.5 * logvar)
    z = mu + std * eps
    x_hat, dec_inputs = model.decoder.forward(z)

    diff = x_hat - x
    recon = np.sum(diff * diff, axis=1)
    kl = -0.5 * np.sum(1.0 + logvar - mu * mu - np.exp(logvar), axis=1)
    loss = float(np.mean(recon + beta_kl * kl))

    dz, dec_grads = model.decoder.backward(dec_inputs, (2.0 / n) * diff)
    dmu = dz + (beta_kl / n) * mu
    dlogvar = dz * eps * 0.5 * std + (beta_kl / n) * 0.5 * (np.exp(logvar) - 1.0)
    dh = dmu @ model.mu_head.weight + dlogvar @ model.logvar_head.weight
    _, enc_grads = model.encoder.backward(enc_inputs, dh)

    grads = []
    for dW, db in enc_grads:
        grads.extend((dW, db))
    grads.extend((dmu.T @ h, dmu.sum(axis=0)))
    grads.extend((dlogvar.T @ h, dlogvar.sum(axis=0)))
    for dW, db in dec_grads:
        grads.extend((dW, db))
    return loss, grads


def _glorot(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


def init_vae(arch: Architecture, seed: int) -> VaeModel:
    rng = np.random.default_rng(seed)

    def dense(n_in, n_out, act):
        return Layer(_glorot(rng, n_out, n_in), np.zeros(n_out), act)

    widths = [arch.input_dim, *arch.hidden]
    encoder = MlpParams([dense(a, b, "tanh") for a, b in zip(widths[:-1], widths[1:])]
                        or [dense(arch.input_dim, arch.input_dim, "identity")])
    mu_head = dense(encoder.n_out, arch.latent_dim, "identity")
    logvar_head = dense(encoder.n_out, arch.latent_dim, "identity")
    dwidths = [arch.latent_dim, *reversed(arch.hidden), arch.input_dim]
    dec = [dense(a, b, "tanh") for a, b in zip(dwidths[:-1], dwidths[1:])]
    dec[-1].activation = "identity"
    return VaeModel(encoder, mu_head, logvar_head, MlpParams(dec))


def train_vae(dataset, arch: Architecture, cfg: TrainConfig) -> tuple[VaeModel, list[float]]:
    """Plain minibatch SGD; deterministic for a given ``cfg.seed``.

    Returns the model and the per-epoch mean training loss.
    """
    data = np.asarray(dataset, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ReducerError("empty dataset")
    if data.shape[0] < cfg.batch_size:
        raise ReducerError(f"dataset of {data.shape[0]} is smaller than batch_size {cfg.batch_size}")
    _check_dim(data, arch.input_dim, "dataset")
    model = init_vae(arch, cfg.seed)
    params = model.parameters()
    rng = np.random.default_rng([cfg.seed, 1])
    n = data.shape[0]
    trace = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            noise = rng.standard_normal((len(idx), arch.latent_dim))
            loss, grads = vae_loss(model, data[idx], noise, cfg.beta_kl)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"loss became {loss} at epoch {epoch}; lower learning_rate (now {cfg.learning_rate})")
            for p, g in zip(params, grads):
                p -= cfg.learning_rate * g
            total += loss * len(idx)
        trace.append(total / n)
    return model, trace


def reconstruction_error(model: VaeModel, data) -> float:
    """Mean squared reconstruction error using the encoder mean (no sampling)."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    mu, _ = encode(model, data)
    diff = decode(model, mu) - data
    return float(np.mean(np.sum(diff * diff, axis=1)))


def measures(model: VaeModel, p) -> np.ndarray:
    """Deterministic descriptor: the encoder mean."""
    return encode(model, p)[0]


def r2_score(y, y_pred) -> float:
    y = np.asarray(y, dtype=np.float64)
    ss_res = float(np.sum((y - y_pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def solve_ridge(m, f, l2_ridge: float) -> tuple[np.ndarray, float]:
    """Closed-form ridge on ``[m, 1]``; the intercept is not penalized."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    f = np.asarray(f, dtype=np.float64).reshape(-1)
    n, d = m.shape
    if n == 0 or f.shape[0] != n:
        raise ReducerError("need matching, non-empty measure and fitness arrays")
    if l2_ridge == 0 and n < d + 1:
        raise ReducerError(f"singular system: {n} samples for {d + 1} unknowns without ridge")
    x = np.hstack([m, np.ones((n, 1))])
    a = x.T @ x
    a[np.arange(d), np.arange(d)] += l2_ridge
    try:
        theta = np.linalg.solve(a, x.T @ f)
    except np.linalg.LinAlgError as exc:
        raise ReducerError(f"singular system: {exc}") from exc
    return theta[:d], float(theta[d])


def fit_fitness_head(model: VaeModel, phenotypes, fitness, l2_ridge: float = 1e-6) -> tuple[FitnessHead, float]:
    """Fit ``fitness ~ w . measures + b`` with the encoder frozen; returns the head and training R^2."""
    m = measures(model, np.atleast_2d(phenotypes))
    w, b = solve_ridge(m, fitness, l2_ridge)
    head = FitnessHead(w, b)
    return head, r2_score(fitness, m @ w + b)


def predict_fitness(model: VaeModel, head: FitnessHead, p):
    return measures(model, p) @ head.weights + head.bias


def subobjectives(model: VaeModel, head: FitnessHead, p) -> np.ndarray:
    """Per-dimension fitness contributions ``w_j * m_j`` (bias excluded)."""
    return measures(model, p) * head.weights


# -- serialization ---------------------------------------------------------

def _layer_doc(layer: Layer) -> dict:
    return {
        "shape": [layer.n_out, layer.n_in],
        "weight": layer.weight.reshape(-1).tolist(),
        "bias": layer.bias.tolist(),
        "activation": layer.activation,
    }


def _layer_from_doc(doc: dict) -> Layer:
    out, inp = (int(v) for v in doc["shape"])
    w = np.asarray(doc["weight"], dtype=np.float64)
    if w.size != out * inp:
        raise ReducerError(f"weight array of {w.size} entries does not fit shape {out}x{inp}")
    return Layer(w.reshape(out, inp), doc["bias"], doc["activation"])


def model_to_dict(model: VaeModel, head: FitnessHead | None = None, **extra) -> dict:
    doc = {
        "version": VERSION,
        "input_dim": model.input_dim,
        "latent_dim": model.latent_dim,
        "encoder": [_layer_doc(x) for x in model.encoder.layers],
        "mu_head": _layer_doc(model.mu_head),
        "logvar_head": _layer_doc(model.logvar_head),
        "decoder": [_layer_doc(x) for x in model.decoder.layers],
        "fitness_head": None if head is None else {"weights": head.weights.tolist(), "bias": head.bias},
    }
    doc.update(extra)
    return doc


def model_from_dict(doc: dict) -> tuple[VaeModel, FitnessHead | None]:
    if doc.get("version") != VERSION:
        raise ReducerError(f"unsupported model version {doc.get('version')!r}")
    try:
        model = VaeModel(
            MlpParams([_layer_from_doc(x) for x in doc["encoder"]]),
            _layer_from_doc(doc["mu_head"]),
            _layer_from_doc(doc["logvar_head"]),
            MlpParams([_layer_from_doc(x) for x in doc["decoder"]]),
        )
    except (KeyError, TypeError) as exc:
        raise ReducerError(f"malformed model document: {exc}") from exc
    if model.input_dim != doc.get("input_dim") or model.latent_dim != doc.get("latent_dim"):
        raise ReducerError("declared input_dim/latent_dim do not match layer shapes")
    head = None
    if doc.get("fitness_head") is not None:
        head = FitnessHead(doc["fitness_head"]["weights"], doc["fitness_head"]["bias"])
        if head.weights.shape[0] != model.latent_dim:
            raise ReducerError("fitness head width does not match latent_dim")
    return model, head


def dumps_model(model: VaeModel, head: FitnessHead | None = None, **extra) -> str:
    return json.dumps(model_to_dict(model, head, **extra), indent=1, sort_keys=True) + "\n"


def checksum(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()
