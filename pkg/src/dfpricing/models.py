"""Pricing architectures and price notions.

Three ways to estimate the conditional claim frequency from a (possibly
gender-masked) portfolio:

* plain-vanilla: one network over (x, d), fitted on complete cases only;
* multi-output: one network over x with one price head per protected
  level, each record training only its own level's head;
* multi-task: two parallel towers over x, one producing the per-level
  price heads and one a softmax gender classifier, tied together by an
  internally composed gender-blind price and a masked joint loss that
  lets records with missing gender still contribute.

On top of the fitted heads sit the price notions: best-estimate
(level-specific), unawareness (classifier-weighted), and
discrimination-free (averaged under a pricing measure that cannot be
inferred from x).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import network as net
from .network import NetworkParams, NetworkSpec, TrainConfig, TrainHistory, _xlogy
from .portfolio import (AGE_MAX, AGE_MIN, DataError, GENDER_NA, Portfolio)

DEFAULT_HIDDEN = (20, 15, 10)


@dataclass(frozen=True)
class ProtectedLevels:
    """Ordered protected-attribute levels; order fixes head binding."""

    levels: tuple[str, ...] = ("female", "male")

    def __post_init__(self):
        if len(self.levels) < 2:
            raise ValueError("need at least two protected levels")
        if len(set(self.levels)) != len(self.levels):
            raise ValueError("protected levels must be distinct")

    def __len__(self) -> int:
        return len(self.levels)

    def index(self, level: str | int) -> int:
        if isinstance(level, (int, np.integer)):
            if not 0 <= level < len(self.levels):
                raise KeyError(f"no protected level with index {level}")
            return int(level)
        try:
            return self.levels.index(level)
        except ValueError:
            raise KeyError(f"unknown protected level {level!r}") from None


@dataclass(frozen=True)
class PricingMeasure:
    """Discrete distribution over protected levels used for the
    discrimination-free average."""

    probabilities: np.ndarray
    provenance: str = "user_supplied"  # empirical | multitask_estimate | user_supplied

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        object.__setattr__(self, "probabilities", p)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("measure needs probabilities over >= 2 levels")
        if np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("measure entries must lie in [0,1] and sum to 1")


def _scale_age(age) -> np.ndarray:
    return (np.asarray(age, dtype=np.float64) - AGE_MIN) / (AGE_MAX - AGE_MIN) * 2.0 - 1.0


def encode_covariates(age, smoker) -> np.ndarray:
    """Network inputs from raw covariates: age min-max scaled to [-1, 1],
    smoker dummy-coded {0, 1}."""
    return np.column_stack([_scale_age(age), np.asarray(smoker, dtype=np.float64)])


def encode_with_level(age, smoker, level_idx: int, k: int) -> np.ndarray:
    """Inputs for the full-covariate network: (x, d) with the first
    protected level (female) coded 1."""
    if k != 2:
        raise ValueError("full-covariate encoding is defined for binary protected levels")
    x = encode_covariates(age, smoker)
    dummy = np.full(x.shape[0], 1.0 - level_idx)
    return np.column_stack([x, dummy])


def default_spec(input_dim: int, num_price_heads: int, num_class_heads: int = 0,
                 hidden_dims: tuple[int, ...] = DEFAULT_HIDDEN) -> NetworkSpec:
    return NetworkSpec(input_dim=input_dim, hidden_dims=hidden_dims,
                       num_price_heads=num_price_heads, num_class_heads=num_class_heads)


# ---------------------------------------------------------------------------
# Training objectives
# ---------------------------------------------------------------------------
#
# Each objective keeps its encoded data, caches parameter views keyed on
# the identity of the flat theta buffer (the trainer mutates one buffer
# in place), and reports the mean per-record loss so that masked terms
# never change the normalization.

def _deviance(y: np.ndarray, mu: np.ndarray) -> np.ndarray:
    return 2.0 * (mu - y + _xlogy(y, y / mu))


class _TowerCache:
    """Identity-keyed view cache: one NetworkParams wrapper per theta buffer."""

    def __init__(self, spec: NetworkSpec, offset: int = 0):
        self.spec = spec
        self.offset = offset
        self._theta = None
        self._params = None

    def params(self, theta: np.ndarray) -> NetworkParams:
        if self._theta is not theta:
            view = theta[self.offset:self.offset + self.spec.param_count]
            self._params = NetworkParams(self.spec, view)
            self._theta = theta
        return self._params


class PlainVanillaObjective:
    """Mean Poisson deviance of a single exponential head over given inputs."""

    def __init__(self, spec: NetworkSpec, x: np.ndarray, y: np.ndarray):
        if spec.num_price_heads != 1 or spec.num_class_heads != 0:
            raise ValueError("plain objective needs exactly one price head")
        if x.shape[0] != y.shape[0]:
            raise ValueError("x and y must have equal record counts")
        self.spec = spec
        self.x = np.asarray(x, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self._tower = _TowerCache(spec)
        self._grad = np.zeros(spec.param_count)
        self._grad_view = NetworkParams(spec, self._grad)

    @property
    def n_records(self) -> int:
        return self.y.size

    def init_theta(self, rng: np.random.Generator) -> np.ndarray:
        return net.init_params(self.spec, rng).theta

    def _forward(self, theta, idx):
        params = self._tower.params(theta)
        acts = net.forward_cached(params, self.x[idx])
        mu = net.price_heads_from_representation(params, acts[-1])
        return params, acts, mu[:, 0]

    def loss(self, theta: np.ndarray, idx: np.ndarray) -> float:
        _, _, mu = self._forward(theta, idx)
        return float(np.mean(_deviance(self.y[idx], mu)))

    def loss_and_grad(self, theta: np.ndarray, idx: np.ndarray) -> tuple[float, np.ndarray]:
        params, acts, mu = self._forward(theta, idx)
        y = self.y[idx]
        n = idx.size
        loss = float(np.mean(_deviance(y, mu)))
        d_pre = (2.0 * (mu - y) / n)[:, None]
        d_top = net.head_backward(params.price_block, self._grad_view.price_block,
                                  acts[-1], d_pre)
        net.backprop_hidden(params, acts, d_top, self._grad_view)
        return loss, self._grad


class MultiOutputObjective:
    """Per-level price heads over a shared representation; each record
    contributes a deviance term only to its own level's head. Records
    with masked gender carry zero weight (and are normally dropped
    before fitting)."""

    def __init__(self, spec: NetworkSpec, x: np.ndarray, y: np.ndarray, d: np.ndarray):
        if spec.num_price_heads < 2 or spec.num_class_heads != 0:
            raise ValueError("multi-output objective needs K >= 2 price heads")
        self.spec = spec
        self.x = np.asarray(x, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.d = np.asarray(d, dtype=np.int64)
        k = spec.num_price_heads
        obs = self.d != GENDER_NA
        self.w = np.zeros((self.y.size, k))
        self.w[np.nonzero(obs)[0], self.d[obs]] = 1.0
        self._tower = _TowerCache(spec)
        self._grad = np.zeros(spec.param_count)
        self._grad_view = NetworkParams(spec, self._grad)

    @property
    def n_records(self) -> int:
        return self.y.size

    def init_theta(self, rng: np.random.Generator) -> np.ndarray:
        return net.init_params(self.spec, rng).theta

    def _forward(self, theta, idx):
        params = self._tower.params(theta)
        acts = net.forward_cached(params, self.x[idx])
        mu = net.price_heads_from_representation(params, acts[-1])
        return params, acts, mu

    def loss(self, theta: np.ndarray, idx: np.ndarray) -> float:
        _, _, mu = self._forward(theta, idx)
        dev = _deviance(self.y[idx][:, None], mu)
        return float((dev * self.w[idx]).sum() / idx.size)

    def loss_and_grad(self, theta: np.ndarray, idx: np.ndarray) -> tuple[float, np.ndarray]:
        params, acts, mu = self._forward(theta, idx)
        y = self.y[idx][:, None]
        w = self.w[idx]
        n = idx.size
        loss = float((_deviance(y, mu) * w).sum() / n)
        d_pre = 2.0 * (mu - y) * w / n
        d_top = net.head_backward(params.price_block, self._grad_view.price_block,
                                  acts[-1], d_pre)
        net.backprop_hidden(params, acts, d_top, self._grad_view)
        return loss, self._grad


class MultiTaskObjective:
    """Masked joint objective of the two-tower architecture.

    Per record, three ingredients: a deviance term for the price head of
    the observed level (switched off when the gender is masked), a
    cross-entropy term for the classifier (likewise switched off), and a
    final term on the internally composed gender-blind price
    mu(x) = sum_k mu(x, d_k) p_k(x) that every record contributes.

    With ``mu_tilde=None`` the final term is the Poisson deviance of the
    observed claim count against mu(x). Otherwise it compares mu(x) to
    the frozen auxiliary prediction mu_tilde(x) via the pointwise Poisson
    KL divergence; ``direction='aux_true'`` places the auxiliary in the
    true-intensity slot, ``'aux_estimate'`` the reverse.
    """

    def __init__(self, spec_mu: NetworkSpec, spec_p: NetworkSpec,
                 x: np.ndarray, y: np.ndarray, d: np.ndarray,
                 mu_tilde: np.ndarray | None = None, direction: str = "aux_true"):
        k = spec_mu.num_price_heads
        if k < 2 or spec_mu.num_class_heads != 0:
            raise ValueError("price tower needs K >= 2 price heads and no class heads")
        if spec_p.num_class_heads != k or spec_p.num_price_heads != 0:
            raise ValueError("class tower needs K class heads and no price heads")
        if direction not in ("aux_true", "aux_estimate"):
            raise ValueError(f"unknown direction {direction!r}")
        self.spec_mu, self.spec_p = spec_mu, spec_p
        self.k = k
        self.x = np.asarray(x, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.d = np.asarray(d, dtype=np.int64)
        self.mu_tilde = None if mu_tilde is None else np.asarray(mu_tilde, dtype=np.float64)
        if self.mu_tilde is not None and np.any(self.mu_tilde <= 0):
            raise ValueError("auxiliary predictions must be strictly positive")
        self.direction = direction
        obs = self.d != GENDER_NA
        self.w = np.zeros((self.y.size, k))
        self.w[np.nonzero(obs)[0], self.d[obs]] = 1.0
        self.obs = obs.astype(np.float64)
        self._mu_tower = _TowerCache(spec_mu)
        self._p_tower = _TowerCache(spec_p, offset=spec_mu.param_count)
        self._grad = np.zeros(spec_mu.param_count + spec_p.param_count)
        self._grad_mu = NetworkParams(spec_mu, self._grad[:spec_mu.param_count])
        self._grad_p = NetworkParams(spec_p, self._grad[spec_mu.param_count:])

    @property
    def n_records(self) -> int:
        return self.y.size

    def init_theta(self, rng: np.random.Generator) -> np.ndarray:
        return np.concatenate([net.init_params(self.spec_mu, rng).theta,
                               net.init_params(self.spec_p, rng).theta])

    def _forward(self, theta, idx):
        pm = self._mu_tower.params(theta)
        pp = self._p_tower.params(theta)
        xb = self.x[idx]
        acts_mu = net.forward_cached(pm, xb)
        acts_p = net.forward_cached(pp, xb)
        mu = net.price_heads_from_representation(pm, acts_mu[-1])
        probs = net.softmax(net.class_logits_from_representation(pp, acts_p[-1]))
        mu_comp = (mu * probs).sum(axis=1)
        return pm, pp, acts_mu, acts_p, mu, probs, mu_comp

    def _composite_loss(self, idx, mu, probs, mu_comp) -> float:
        y = self.y[idx]
        head_term = (_deviance(y[:, None], mu) * self.w[idx]).sum()
        p_obs = probs[np.arange(idx.size), np.maximum(self.d[idx], 0)]
        ce_term = (-np.log(p_obs) * self.obs[idx]).sum()
        if self.mu_tilde is None:
            final = _deviance(y, mu_comp).sum()
        else:
            mt = self.mu_tilde[idx]
            if self.direction == "aux_true":
                final = (mu_comp - mt - mt * np.log(mu_comp / mt)).sum()
            else:
                final = (mt - mu_comp - mu_comp * np.log(mt / mu_comp)).sum()
        return float((head_term + ce_term + final) / idx.size)

    def loss(self, theta: np.ndarray, idx: np.ndarray) -> float:
        _, _, _, _, mu, probs, mu_comp = self._forward(theta, idx)
        return self._composite_loss(idx, mu, probs, mu_comp)

    def loss_and_grad(self, theta: np.ndarray, idx: np.ndarray) -> tuple[float, np.ndarray]:
        pm, pp, acts_mu, acts_p, mu, probs, mu_comp = self._forward(theta, idx)
        y = self.y[idx]
        n = idx.size
        loss = self._composite_loss(idx, mu, probs, mu_comp)

        if self.mu_tilde is None:
            d_comp = 2.0 * (1.0 - y / mu_comp)
        elif self.direction == "aux_true":
            d_comp = 1.0 - self.mu_tilde[idx] / mu_comp
        else:
            d_comp = np.log(mu_comp / self.mu_tilde[idx])

        # price heads: own-level deviance plus the composed-price chain
        d_pre_mu = (2.0 * (mu - y[:, None]) * self.w[idx] + d_comp[:, None] * probs * mu) / n
        # classifier logits: cross-entropy plus the composed-price chain
        # through the softmax Jacobian
        d_p = d_comp[:, None] * mu
        d_logits = probs * (d_p - (d_p * probs).sum(axis=1, keepdims=True))
        onehot = self.w[idx]
        d_logits += (probs - onehot) * self.obs[idx][:, None]
        d_logits /= n

        d_top = net.head_backward(pm.price_block, self._grad_mu.price_block,
                                  acts_mu[-1], d_pre_mu)
        net.backprop_hidden(pm, acts_mu, d_top, self._grad_mu)
        d_top = net.head_backward(pp.class_block, self._grad_p.class_block,
                                  acts_p[-1], d_logits)
        net.backprop_hidden(pp, acts_p, d_top, self._grad_p)
        return loss, self._grad


# ---------------------------------------------------------------------------
# Fitted models
# ---------------------------------------------------------------------------

@dataclass
class FittedModel:
    """A fitted architecture (nagging ensemble of one or more members).

    ``price_networks`` holds the per-member network carrying the price
    head(s); multi-task kinds additionally carry the parallel classifier
    towers in ``class_networks``. Ensemble predictions average head
    prices on the price scale and classifier probabilities on the
    probability scale (renormalized), then compose derived prices from
    the averaged pieces.
    """

    kind: str
    levels: ProtectedLevels
    price_networks: list[NetworkParams]
    class_networks: list[NetworkParams] | None = None
    histories: list[TrainHistory] | None = None
    class_histories: list[TrainHistory] | None = None
    muhat_direction: str | None = None

    KINDS = ("plain_vanilla", "multi_output", "multi_task_y", "multi_task_muhat")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not self.price_networks:
            raise ValueError("model needs at least one fitted member")
        if self.is_multi_task and (self.class_networks is None
                                   or len(self.class_networks) != len(self.price_networks)):
            raise ValueError("multi-task model needs one classifier tower per member")

    @property
    def is_multi_task(self) -> bool:
        return self.kind in ("multi_task_y", "multi_task_muhat")

    @property
    def ensemble_size(self) -> int:
        return len(self.price_networks)

    def best_estimate_matrix(self, age, smoker) -> np.ndarray:
        """Best-estimate prices for every protected level; shape (n, K)."""
        k = len(self.levels)
        if self.kind == "plain_vanilla":
            cols = []
            for j in range(k):
                x = encode_with_level(age, smoker, j, k)
                cols.append(np.mean([net.predict_price(p, x) for p in self.price_networks], axis=0))
            return np.column_stack(cols)
        x = encode_covariates(age, smoker)
        reps = [net.forward_cached(p, x)[-1] for p in self.price_networks]
        return np.mean([net.price_heads_from_representation(p, z)
                        for p, z in zip(self.price_networks, reps)], axis=0)

    def price_best_estimate(self, age, smoker, level: str | int) -> np.ndarray | float:
        """Level-specific price; for the full-covariate model the level is
        fed as an input, otherwise it selects a head."""
        j = self.levels.index(level)
        out = self.best_estimate_matrix(np.atleast_1d(age), np.atleast_1d(smoker))[:, j]
        return float(out[0]) if np.isscalar(age) else out

    def class_probs(self, age, smoker) -> np.ndarray:
        """Ensemble-averaged classifier probabilities P(d_k | x)."""
        if not self.is_multi_task:
            raise ValueError(f"{self.kind} model has no gender classifier")
        x = encode_covariates(np.atleast_1d(age), np.atleast_1d(smoker))
        probs = np.mean([net.predict_class_probs(p, x) for p in self.class_networks], axis=0)
        return probs / probs.sum(axis=1, keepdims=True)

    def price_unawareness(self, age, smoker) -> np.ndarray | float:
        """Gender-blind price composed from heads and classifier:
        sum_k mu(x, d_k) p_k(x). Only multi-task models provide it."""
        if not self.is_multi_task:
            raise ValueError(f"{self.kind} model cannot produce an unawareness price")
        be = self.best_estimate_matrix(np.atleast_1d(age), np.atleast_1d(smoker))
        probs = self.class_probs(age, smoker)
        out = (be * probs).sum(axis=1)
        return float(out[0]) if np.isscalar(age) else out

    def price_discrimination_free(self, age, smoker, measure: PricingMeasure) -> np.ndarray | float:
        """Best-estimate prices averaged under the pricing measure."""
        if measure.probabilities.size != len(self.levels):
            raise ValueError("measure dimension does not match protected levels")
        be = self.best_estimate_matrix(np.atleast_1d(age), np.atleast_1d(smoker))
        out = be @ measure.probabilities
        return float(out[0]) if np.isscalar(age) else out


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _fit_ensemble(objective, config: TrainConfig) -> tuple[list[np.ndarray], list[TrainHistory]]:
    root = np.random.SeedSequence(config.seed)
    seeds = root.spawn(config.ensemble_size + 1)
    split_seed, member_seeds = seeds[0], seeds[1:]
    thetas, histories = [], []
    for member_seed in member_seeds:
        theta, history = net.train(objective, config, init_seed=member_seed, split_seed=split_seed)
        thetas.append(theta)
        histories.append(history)
    return thetas, histories


def _require_levels_present(d: np.ndarray, levels: ProtectedLevels) -> None:
    for j, label in enumerate(levels.levels):
        if not np.any(d == j):
            raise DataError(f"no complete-case records for protected level {label!r}")


def fit_plain_vanilla(portfolio: Portfolio, config: TrainConfig,
                      spec: NetworkSpec | None = None,
                      levels: ProtectedLevels = ProtectedLevels()) -> FittedModel:
    """Fit the full-covariate network on the complete-case sub-portfolio;
    records with masked gender are discarded."""
    if len(levels) != 2:
        raise ValueError("full-covariate model expects binary protected levels")
    complete = portfolio.complete_cases()
    if complete.n == 0:
        raise DataError("cannot fit on an empty complete-case sub-portfolio "
                        "(every gender label is missing)")
    x = encode_covariates(complete.age, complete.smoker)
    dummy = np.where(complete.gender == 0, 1.0, 0.0)
    spec = spec or default_spec(input_dim=3, num_price_heads=1)
    objective = PlainVanillaObjective(spec, np.column_stack([x, dummy]), complete.claims)
    thetas, histories = _fit_ensemble(objective, config)
    return FittedModel(kind="plain_vanilla", levels=levels,
                       price_networks=[NetworkParams(spec, t) for t in thetas],
                       histories=histories)


def fit_multi_output(portfolio: Portfolio, config: TrainConfig,
                     spec: NetworkSpec | None = None,
                     levels: ProtectedLevels = ProtectedLevels()) -> FittedModel:
    """Fit per-level price heads over x; each complete-case record trains
    its own level's head, masked records contribute nothing."""
    complete = portfolio.complete_cases()
    if complete.n == 0:
        raise DataError("cannot fit on an empty complete-case sub-portfolio")
    _require_levels_present(complete.gender, levels)
    spec = spec or default_spec(input_dim=2, num_price_heads=len(levels))
    objective = MultiOutputObjective(spec, encode_covariates(complete.age, complete.smoker),
                                     complete.claims, complete.gender)
    thetas, histories = _fit_ensemble(objective, config)
    return FittedModel(kind="multi_output", levels=levels,
                       price_networks=[NetworkParams(spec, t) for t in thetas],
                       histories=histories)


def _fit_multi_task(portfolio: Portfolio, config: TrainConfig, kind: str,
                    spec: NetworkSpec | None, levels: ProtectedLevels,
                    mu_tilde: np.ndarray | None, direction: str) -> FittedModel:
    observed = portfolio.gender[portfolio.gender != GENDER_NA]
    if observed.size == 0:
        raise DataError("multi-task fitting needs gender on at least part of the portfolio")
    _require_levels_present(observed, levels)
    k = len(levels)
    spec_mu = spec or default_spec(input_dim=2, num_price_heads=k)
    spec_p = NetworkSpec(input_dim=spec_mu.input_dim, hidden_dims=spec_mu.hidden_dims,
                         num_price_heads=0, num_class_heads=k)
    objective = MultiTaskObjective(spec_mu, spec_p,
                                   encode_covariates(portfolio.age, portfolio.smoker),
                                   portfolio.claims, portfolio.gender,
                                   mu_tilde=mu_tilde, direction=direction)
    thetas, histories = _fit_ensemble(objective, config)
    cut = spec_mu.param_count
    return FittedModel(kind=kind, levels=levels,
                       price_networks=[NetworkParams(spec_mu, t[:cut].copy()) for t in thetas],
                       class_networks=[NetworkParams(spec_p, t[cut:].copy()) for t in thetas],
                       histories=histories,
                       muhat_direction=direction if kind == "multi_task_muhat" else None)


def fit_multi_task_y(portfolio: Portfolio, config: TrainConfig,
                     spec: NetworkSpec | None = None,
                     levels: ProtectedLevels = ProtectedLevels()) -> FittedModel:
    """Fit the two-tower multi-task architecture with the observed claim
    count driving the composed-price term. Uses every record, masked or not."""
    return _fit_multi_task(portfolio, config, "multi_task_y", spec, levels,
                           mu_tilde=None, direction="aux_true")


@dataclass
class UnawarenessAuxModel:
    """Plain network over x only, the frozen auxiliary for the muhat
    variant of the multi-task loss."""

    networks: list[NetworkParams]
    histories: list[TrainHistory]

    def predict(self, age, smoker) -> np.ndarray | float:
        x = encode_covariates(np.atleast_1d(age), np.atleast_1d(smoker))
        out = np.mean([net.predict_price(p, x) for p in self.networks], axis=0)
        return float(out[0]) if np.isscalar(age) else out


def fit_unawareness_aux(portfolio: Portfolio, config: TrainConfig,
                        spec: NetworkSpec | None = None) -> UnawarenessAuxModel:
    """Fit the auxiliary gender-blind regression on the full portfolio
    (the protected attribute is simply dropped from the input)."""
    spec = spec or default_spec(input_dim=2, num_price_heads=1)
    if spec.input_dim != 2:
        raise ValueError("auxiliary model must not take the protected attribute as input")
    objective = PlainVanillaObjective(spec, encode_covariates(portfolio.age, portfolio.smoker),
                                      portfolio.claims)
    thetas, histories = _fit_ensemble(objective, config)
    return UnawarenessAuxModel([NetworkParams(spec, t) for t in thetas], histories)


def fit_multi_task_muhat(portfolio: Portfolio, config: TrainConfig,
                         aux: UnawarenessAuxModel,
                         spec: NetworkSpec | None = None,
                         levels: ProtectedLevels = ProtectedLevels(),
                         direction: str = "aux_true") -> FittedModel:
    """Multi-task variant whose final loss term pulls the composed price
    toward the frozen auxiliary prediction (pointwise Poisson KL, with
    the auxiliary in the true-intensity slot by default)."""
    if aux.networks[0].spec.input_dim != 2:
        raise ValueError("auxiliary model input does not match the record covariates")
    mu_tilde = aux.predict(portfolio.age, portfolio.smoker)
    return _fit_multi_task(portfolio, config, "multi_task_muhat", spec, levels,
                           mu_tilde=np.atleast_1d(mu_tilde), direction=direction)


# ---------------------------------------------------------------------------
# Pricing-measure estimation
# ---------------------------------------------------------------------------

def estimate_measure_empirical(portfolio: Portfolio,
                               levels: ProtectedLevels = ProtectedLevels()) -> PricingMeasure:
    """Level frequencies among the records whose gender is observed."""
    observed = portfolio.gender[portfolio.gender != GENDER_NA]
    if observed.size == 0:
        raise DataError("cannot estimate an empirical measure: no observed gender labels")
    probs = np.array([np.mean(observed == j) for j in range(len(levels))])
    return PricingMeasure(probs, provenance="empirical")


def estimate_measure_multitask(model: FittedModel, portfolio: Portfolio) -> PricingMeasure:
    """Average of the fitted classifier probabilities over the whole
    portfolio, masked records included."""
    probs = model.class_probs(portfolio.age, portfolio.smoker).mean(axis=0)
    return PricingMeasure(probs / probs.sum(), provenance="multitask_estimate")
