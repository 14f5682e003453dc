"""Minimal deterministic feed-forward network engine.

Dense ReLU stacks with exponential (log-link) price heads and softmax
class heads, exact backpropagation, Nadam mini-batch training with
early stopping, and the unit losses shared by every architecture in
this package. Everything runs on flat float64 parameter vectors so a
whole model can be updated, copied, checked against finite differences,
and serialized as one array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np


class TrainingError(RuntimeError):
    """Raised when optimization produces a non-finite loss."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


_ACTIVATIONS = ("relu",)
_LINKS = ("log",)


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of one dense network tower.

    ``hidden_dims`` are the widths of the hidden layers, in order.
    ``num_price_heads`` counts exponential readouts (one per protected
    level, or a single one for a plain regression); ``num_class_heads``
    counts softmax logits (0 when the tower has no classifier).
    """

    input_dim: int
    hidden_dims: tuple[int, ...]
    num_price_heads: int = 1
    num_class_heads: int = 0
    activation: str = "relu"
    link: str = "log"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(q) for q in self.hidden_dims))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if not self.hidden_dims or any(q < 1 for q in self.hidden_dims):
            raise ValueError(f"hidden_dims must be non-empty with all dims >= 1, got {self.hidden_dims}")
        if self.num_price_heads < 0 or self.num_class_heads < 0:
            raise ValueError("head counts must be nonnegative")
        if self.num_price_heads + self.num_class_heads == 0:
            raise ValueError("network needs at least one head")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation!r}")
        if self.link not in _LINKS:
            raise ValueError(f"unsupported link {self.link!r}")

    @property
    def depth(self) -> int:
        return len(self.hidden_dims)

    @property
    def representation_dim(self) -> int:
        return self.hidden_dims[-1]

    @property
    def param_count(self) -> int:
        """Total trainable parameters: sum of (fan_in+1)*fan_out per hidden
        layer plus (q_last+1) per readout head."""
        dims = (self.input_dim, *self.hidden_dims)
        hidden = sum((dims[j] + 1) * dims[j + 1] for j in range(self.depth))
        heads = (self.representation_dim + 1) * (self.num_price_heads + self.num_class_heads)
        return hidden + heads


class NetworkParams:
    """Parameters of one tower, stored as a flat float64 vector.

    Layer weights, biases, and head readouts are exposed as reshaped
    views into ``theta``, so in-place updates of the flat vector (as the
    optimizer performs them) are immediately visible through the views.
    Head readout blocks have shape (K, 1 + q_last) with the intercept in
    column 0.
    """

    __slots__ = ("spec", "theta", "weights", "biases", "price_block", "class_block")

    def __init__(self, spec: NetworkSpec, theta: np.ndarray):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (spec.param_count,):
            raise ValueError(f"theta has shape {theta.shape}, spec needs ({spec.param_count},)")
        self.spec = spec
        self.theta = theta
        dims = (spec.input_dim, *spec.hidden_dims)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        pos = 0
        for j in range(spec.depth):
            fan_in, fan_out = dims[j], dims[j + 1]
            self.weights.append(theta[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out))
            pos += fan_in * fan_out
            self.biases.append(theta[pos:pos + fan_out])
            pos += fan_out
        width = spec.representation_dim + 1
        k_mu, k_p = spec.num_price_heads, spec.num_class_heads
        self.price_block = theta[pos:pos + k_mu * width].reshape(k_mu, width) if k_mu else None
        pos += k_mu * width
        self.class_block = theta[pos:pos + k_p * width].reshape(k_p, width) if k_p else None

    @property
    def hidden_weights(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.weights, self.biases))

    def price_readout(self, k: int) -> np.ndarray:
        if self.price_block is None or not 0 <= k < self.spec.num_price_heads:
            raise IndexError(f"no price head {k}")
        return self.price_block[k]

    def class_readout(self, k: int) -> np.ndarray:
        if self.class_block is None or not 0 <= k < self.spec.num_class_heads:
            raise IndexError(f"no class head {k}")
        return self.class_block[k]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.spec, self.theta.copy())

    def validate_finite(self) -> None:
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("parameters contain non-finite entries")

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> "NetworkParams":
        return cls(spec, np.zeros(spec.param_count))


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> NetworkParams:
    """Glorot-uniform weights with zero biases and zero head intercepts."""
    params = NetworkParams.zeros(spec)
    dims = (spec.input_dim, *spec.hidden_dims)
    for j in range(spec.depth):
        limit = np.sqrt(6.0 / (dims[j] + dims[j + 1]))
        params.weights[j][...] = rng.uniform(-limit, limit, size=params.weights[j].shape)
    q = spec.representation_dim
    limit = np.sqrt(6.0 / (q + 1))
    for block in (params.price_block, params.class_block):
        if block is not None:
            block[:, 1:] = rng.uniform(-limit, limit, size=block[:, 1:].shape)
    return params


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

def forward_cached(params: NetworkParams, x: np.ndarray) -> list[np.ndarray]:
    """Run the hidden stack, returning [input, act_1, ..., act_m]."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != params.spec.input_dim:
        raise ValueError(f"input has {x.shape[1]} features, spec expects {params.spec.input_dim}")
    acts = [x]
    for w, b in zip(params.weights, params.biases):
        x = np.maximum(x @ w + b, 0.0)
        acts.append(x)
    return acts


def forward_representation(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Learned representation after the last hidden layer.

    Accepts a single feature vector or a (n, input_dim) batch and
    returns the matching shape.
    """
    single = np.asarray(x).ndim == 1
    z = forward_cached(params, x)[-1]
    return z[0] if single else z


def price_heads_from_representation(params: NetworkParams, z: np.ndarray) -> np.ndarray:
    """exp(intercept + <weights, z>) for every price head; shape (n, K)."""
    block = params.price_block
    if block is None:
        raise IndexError("network has no price heads")
    return np.exp(z @ block[:, 1:].T + block[:, 0])


def class_logits_from_representation(params: NetworkParams, z: np.ndarray) -> np.ndarray:
    block = params.class_block
    if block is None:
        raise IndexError("network has no class heads")
    return z @ block[:, 1:].T + block[:, 0]


def predict_price(params: NetworkParams, x: np.ndarray, head: int = 0) -> np.ndarray | float:
    """Price-head prediction exp<readout, (1, z(x))>; strictly positive."""
    if not 0 <= head < params.spec.num_price_heads:
        raise IndexError(f"no price head {head}")
    single = np.asarray(x).ndim == 1
    z = forward_cached(params, x)[-1]
    mu = price_heads_from_representation(params, z)[:, head]
    return float(mu[0]) if single else mu


def predict_class_probs(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Softmax class probabilities; strictly positive, rows sum to 1."""
    single = np.asarray(x).ndim == 1
    z = forward_cached(params, x)[-1]
    p = softmax(class_logits_from_representation(params, z))
    return p[0] if single else p


def softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Unit losses
# ---------------------------------------------------------------------------

def _xlogy(y: np.ndarray, r: np.ndarray) -> np.ndarray:
    # y * log(r) with the y = 0 limit taken as 0
    y = np.asarray(y, dtype=np.float64)
    safe = np.where(y > 0, r, 1.0)
    return np.where(y > 0, y * np.log(safe), 0.0)


def poisson_deviance(y, mu):
    """Poisson deviance 2*(mu - y - y*log(mu/y)); zero iff mu == y.

    ``y`` are nonnegative counts, ``mu`` strictly positive intensities.
    Vectorizes over numpy arrays; scalars in, scalar out.
    """
    y_arr = np.asarray(y, dtype=np.float64)
    mu_arr = np.asarray(mu, dtype=np.float64)
    if np.any(mu_arr <= 0):
        raise ValueError("poisson_deviance requires mu > 0")
    if np.any(y_arr < 0):
        raise ValueError("poisson_deviance requires y >= 0")
    dev = 2.0 * (mu_arr - y_arr + _xlogy(y_arr, y_arr / mu_arr))
    return float(dev) if np.isscalar(y) and np.isscalar(mu) else dev


def cross_entropy(d_onehot: Sequence[float], p: Sequence[float]) -> float:
    """Multinomial cross-entropy -log p_k for the observed class k."""
    d = np.asarray(d_onehot, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if d.shape != p.shape or d.ndim != 1:
        raise ValueError("d_onehot and p must be 1-d vectors of equal length")
    if not (np.all((d == 0) | (d == 1)) and d.sum() == 1):
        raise ValueError("d_onehot must be a valid one-hot vector")
    if abs(p.sum() - 1.0) > 1e-9 or np.any(p <= 0):
        raise ValueError("p must be strictly positive and sum to 1")
    k = int(np.argmax(d))
    return float(-np.log(p[k]))


# ---------------------------------------------------------------------------
# Backpropagation building blocks
# ---------------------------------------------------------------------------

def backprop_hidden(params: NetworkParams, acts: list[np.ndarray],
                    d_top: np.ndarray, grad: NetworkParams) -> None:
    """Backpropagate d(loss)/d(last activation) through the ReLU stack,
    writing layer gradients into ``grad`` (a parameter-shaped buffer)."""
    d_act = d_top
    for j in range(params.spec.depth - 1, -1, -1):
        d_pre = d_act * (acts[j + 1] > 0)
        grad.weights[j][...] = acts[j].T @ d_pre
        grad.biases[j][...] = d_pre.sum(axis=0)
        if j:
            d_act = d_pre @ params.weights[j].T



def head_backward(param_block: np.ndarray, grad_block: np.ndarray,
                  z: np.ndarray, d_pre: np.ndarray) -> np.ndarray:
    """Gradients of a readout block given d(loss)/d(pre-link head output);
    returns d(loss)/d(representation)."""
    grad_block[:, 0] = d_pre.sum(axis=0)
    grad_block[:, 1:] = d_pre.T @ z
    return d_pre @ param_block[:, 1:]


class Objective(Protocol):
    """A differentiable training objective over an indexed record set.

    Implementations own the data encoding and the parameter layout; the
    trainer only needs record count, an initializer, and (loss, gradient)
    over arbitrary record index subsets. ``loss`` and ``loss_and_grad``
    report the mean per-record loss.
    """

    @property
    def n_records(self) -> int: ...

    def init_theta(self, rng: np.random.Generator) -> np.ndarray: ...

    def loss(self, theta: np.ndarray, idx: np.ndarray) -> float: ...

    def loss_and_grad(self, theta: np.ndarray, idx: np.ndarray) -> tuple[float, np.ndarray]: ...


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradientReport:
    """Backprop-vs-finite-difference comparison over one batch."""

    max_relative_error: float
    per_parameter_errors: np.ndarray

    def __post_init__(self):
        if self.max_relative_error < 0 or np.any(self.per_parameter_errors < 0):
            raise ValueError("errors must be nonnegative")


def gradient_check(objective: Objective, theta: np.ndarray, idx: np.ndarray,
                   step: float = 1e-5, scale_floor: float = 1e-4) -> GradientReport:
    """Compare analytic gradients against central finite differences.

    Per-parameter error is |g_bp - g_fd| / max(|g_bp|, |g_fd|, scale_floor);
    the floor keeps exactly-masked parameters (both sides zero) and nearly
    stationary directions from dividing by zero.
    """
    _, g_bp = objective.loss_and_grad(theta, idx)
    g_fd = np.empty_like(g_bp)
    th = theta.copy()
    for i in range(th.size):
        orig = th[i]
        th[i] = orig + step
        up = objective.loss(th, idx)
        th[i] = orig - step
        down = objective.loss(th, idx)
        th[i] = orig
        g_fd[i] = (up - down) / (2.0 * step)
    denom = np.maximum(np.maximum(np.abs(g_bp), np.abs(g_fd)), scale_floor)
    errors = np.abs(g_bp - g_fd) / denom
    return GradientReport(float(errors.max()), errors)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """Mini-batch Nadam settings with early stopping.

    The validation split is drawn once from ``seed``; when fitting an
    ensemble the split stays fixed across members while initialization
    and shuffling seeds vary per member.
    """

    batch_size: int = 50
    max_epochs: int = 500
    patience: int = 10
    validation_fraction: float = 0.2
    learning_rate: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    seed: int = 0
    ensemble_size: int = 10

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be >= 1")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")


@dataclass
class TrainHistory:
    """Per-epoch train/validation losses and the early-stopping outcome."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    epochs_run: int = 0
    seed: int = 0


def train(objective: Objective, config: TrainConfig, *,
          init_seed: int | np.random.SeedSequence | None = None,
          split_seed: int | np.random.SeedSequence | None = None) -> tuple[np.ndarray, TrainHistory]:
    """Fit an objective with mini-batch Nadam and early stopping.

    Records are shuffled once into an 80/20-style train/validation split
    (``split_seed``, default ``config.seed``); initialization and per-epoch
    shuffling derive from ``init_seed``. Validation loss is monitored each
    epoch and the parameters of the best epoch are returned after
    ``patience`` epochs without improvement (or at ``max_epochs``). The
    whole procedure is deterministic given the seeds.
    """
    n = objective.n_records
    if n < 2:
        raise ValueError("objective needs at least 2 records to split")
    split_rng = np.random.default_rng(config.seed if split_seed is None else split_seed)
    perm = split_rng.permutation(n)
    n_val = min(max(1, round(config.validation_fraction * n)), n - 1)
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    init_entropy = config.seed if init_seed is None else init_seed
    if isinstance(init_entropy, np.random.SeedSequence):
        ss = init_entropy
    else:
        ss = np.random.SeedSequence(init_entropy)
    ss_init, ss_shuffle = ss.spawn(2)
    theta = objective.init_theta(np.random.default_rng(ss_init))
    shuffle_rng = np.random.default_rng(ss_shuffle)

    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1, b2 = config.beta1, config.beta2
    lr, eps = config.learning_rate, config.epsilon
    t = 0

    history = TrainHistory(seed=int(ss.entropy) if isinstance(ss.entropy, int) else 0)
    best_theta = theta.copy()
    wait = 0
    for epoch in range(1, config.max_epochs + 1):
        order = train_idx[shuffle_rng.permutation(train_idx.size)]
        epoch_loss = 0.0
        for start in range(0, order.size, config.batch_size):
            bidx = order[start:start + config.batch_size]
            loss, grad = objective.loss_and_grad(theta, bidx)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}", epoch=epoch)
            epoch_loss += loss * bidx.size
            t += 1
            # Nadam: Adam moments with a Nesterov-corrected first moment.
            m += (1.0 - b1) * (grad - m)
            v += (1.0 - b2) * (grad * grad - v)
            m_hat = m / (1.0 - b1 ** (t + 1))
            g_hat = grad / (1.0 - b1 ** t)
            v_hat = v / (1.0 - b2 ** t)
            theta -= lr * (b1 * m_hat + (1.0 - b1) * g_hat) / (np.sqrt(v_hat) + eps)
        val = objective.loss(theta, val_idx)
        if not np.isfinite(val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}", epoch=epoch)
        history.train_loss.append(epoch_loss / order.size)
        history.val_loss.append(val)
        history.epochs_run = epoch
        if val < history.best_val_loss:
            history.best_val_loss = val
            history.best_epoch = epoch
            best_theta[...] = theta
            wait = 0
        else:
            wait += 1
            if wait >= config.patience:
                break
    return best_theta, history


# ---------------------------------------------------------------------------
# Nagging ensembles
# ---------------------------------------------------------------------------

class NaggingEnsemble:
    """Average of independently trained copies of one architecture.

    Price predictions are averaged on the price scale; class heads on the
    probability scale, renormalized to sum to 1.
    """

    def __init__(self, members: Sequence[NetworkParams]):
        if not members:
            raise ValueError("ensemble needs at least one member")
        spec = members[0].spec
        if any(p.spec != spec for p in members):
            raise ValueError("all ensemble members must share one NetworkSpec")
        self.members = list(members)
        self.spec = spec

    def predict_price(self, x: np.ndarray, head: int = 0) -> np.ndarray | float:
        preds = [predict_price(p, x, head) for p in self.members]
        out = np.mean(np.asarray(preds), axis=0)
        return float(out) if np.asarray(x).ndim == 1 else out

    def predict_class_probs(self, x: np.ndarray) -> np.ndarray:
        probs = np.mean([predict_class_probs(p, x) for p in self.members], axis=0)
        return probs / probs.sum(axis=-1, keepdims=True)


def nagging_average(predictors: Sequence[NetworkParams]) -> NaggingEnsemble:
    """Combine fitted networks into their prediction-averaging ensemble."""
    return NaggingEnsemble(predictors)
