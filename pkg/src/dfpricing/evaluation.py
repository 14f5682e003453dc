"""Ground-truth scoring of fitted pricing models.

The synthetic world makes exact evaluation possible: pointwise Poisson
KL divergences against the true intensity, portfolio averages of those,
an exact covariate-cell enumeration of the true unawareness and
discrimination-free reference prices, and the direct/indirect
discrimination accounting built on top.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .portfolio import (AGES, DataError, GENDER_FEMALE, GENDER_MALE,
                        analytic_conditional_gender, PopulationConfig, Portfolio,
                        true_frequency)


def kl_pointwise(lambda_true, mu_est):
    """Poisson KL divergence mu - lambda - lambda*log(mu/lambda) between a
    true and an estimated intensity; zero iff they coincide."""
    lam = np.asarray(lambda_true, dtype=np.float64)
    mu = np.asarray(mu_est, dtype=np.float64)
    if np.any(lam <= 0) or np.any(mu <= 0):
        raise ValueError("kl_pointwise requires strictly positive intensities")
    out = mu - lam - lam * np.log(mu / lam)
    return float(out) if np.isscalar(lambda_true) and np.isscalar(mu_est) else out


def kl_portfolio(portfolio: Portfolio, price_fn, true_values: np.ndarray | None = None) -> float:
    """Average pointwise KL over the portfolio's records.

    ``price_fn`` is either a callable evaluating the model on the
    portfolio or a precomputed prediction array. The true side defaults
    to the oracle intensities carried by the records; pass
    ``true_values`` to score against another reference (e.g. the true
    discrimination-free price).
    """
    mu = price_fn(portfolio) if callable(price_fn) else np.asarray(price_fn, dtype=np.float64)
    true = portfolio.true_lambda if true_values is None else np.asarray(true_values, dtype=np.float64)
    if mu.shape != (portfolio.n,) or true.shape != (portfolio.n,):
        raise DataError("predictions and references must align with the portfolio")
    bad = np.nonzero(~((mu > 0) & (true > 0) & np.isfinite(mu) & np.isfinite(true)))[0]
    if bad.size:
        raise DataError(f"invalid intensity at record {bad[0]}: "
                        f"true={true[bad[0]]!r}, estimate={mu[bad[0]]!r}")
    return float(np.mean(kl_pointwise(true, mu)))


# ---------------------------------------------------------------------------
# Exact reference prices over the covariate grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReferencePrices:
    """True prices enumerated over every covariate cell (age x smoker),
    with per-level best-estimates and exact cell probabilities."""

    age: np.ndarray            # (C,) cell ages
    smoker: np.ndarray         # (C,) cell smoker status
    lambda_by_level: np.ndarray  # (C, 2) true best-estimate per gender level
    p_level_given_x: np.ndarray  # (C, 2) analytic P(d | x)
    lambda_unaware: np.ndarray   # (C,) tower-property price
    lambda_df: np.ndarray        # (C,) measure-averaged price
    x_probs: np.ndarray          # (C,) P(x) under the population config
    p_star: np.ndarray           # (2,) pricing measure used for lambda_df

    def cell_index(self, age, smoker) -> np.ndarray:
        return (np.asarray(age, dtype=np.int64) - AGES[0]) * 2 + np.asarray(smoker, dtype=np.int64)

    def unawareness_at(self, age, smoker) -> np.ndarray:
        return self.lambda_unaware[self.cell_index(age, smoker)]

    def df_at(self, age, smoker) -> np.ndarray:
        return self.lambda_df[self.cell_index(age, smoker)]

    def best_estimate_at(self, age, smoker, level_idx: int) -> np.ndarray:
        return self.lambda_by_level[self.cell_index(age, smoker), level_idx]


def true_reference_prices(config: PopulationConfig,
                          p_star_female: float | None = None) -> ReferencePrices:
    """Enumerate the true model over all covariate cells (no sampling).

    The unawareness price weights the per-level intensities by the
    analytic P(d | x); the discrimination-free price uses the fixed
    measure ``p_star_female`` (defaulting to the configured marginal).
    """
    if p_star_female is None:
        p_star_female = config.p_female
    ages = np.repeat(AGES, 2)
    smoker = np.tile(np.array([False, True]), AGES.size)
    lam_f = true_frequency(ages, smoker, np.full(ages.size, GENDER_FEMALE))
    lam_m = true_frequency(ages, smoker, np.full(ages.size, GENDER_MALE))
    lam = np.column_stack([lam_f, lam_m])
    p_f = np.where(smoker, config.p_female_given_smoker, config.p_female_given_nonsmoker)
    p_given_x = np.column_stack([p_f, 1.0 - p_f])
    p_star = np.array([p_star_female, 1.0 - p_star_female])
    age_p = config.age_distribution[(ages - AGES[0])]
    x_probs = age_p * np.where(smoker, config.p_smoker, 1.0 - config.p_smoker)
    return ReferencePrices(age=ages, smoker=smoker, lambda_by_level=lam,
                           p_level_given_x=p_given_x,
                           lambda_unaware=(lam * p_given_x).sum(axis=1),
                           lambda_df=lam @ p_star,
                           x_probs=x_probs, p_star=p_star)


def reference_kls(ref: ReferencePrices) -> tuple[float, float]:
    """Exact portfolio-level KLs of the true unawareness and
    discrimination-free prices to the true best-estimate, taken over the
    population distribution of all covariate cells."""
    cell_w = ref.x_probs[:, None] * ref.p_level_given_x
    kl_u = float((cell_w * kl_pointwise(ref.lambda_by_level, ref.lambda_unaware[:, None])).sum())
    kl_df = float((cell_w * kl_pointwise(ref.lambda_by_level, ref.lambda_df[:, None])).sum())
    return kl_u, kl_df


def discrimination_decomposition(kl_unawareness: float, kl_df: float) -> tuple[float, float]:
    """Normalize the unawareness-price KL to 100% and state the
    discrimination-free KL relative to it."""
    if kl_unawareness <= 0:
        raise ValueError("decomposition needs a positive unawareness KL")
    if kl_df < 0:
        raise ValueError("KL divergences are nonnegative")
    return 100.0, 100.0 * kl_df / kl_unawareness


# ---------------------------------------------------------------------------
# Report payloads
# ---------------------------------------------------------------------------

@dataclass
class EvaluationReport:
    """Accumulated (model_label, quantity, value) rows, stored in units
    of 1e-3 as the tables report them."""

    rows: list[tuple[str, str, float]]

    def add(self, model_label: str, quantity: str, value: float) -> None:
        if value < 0:
            raise ValueError(f"KL entry must be nonnegative: {model_label}/{quantity}")
        self.rows.append((model_label, quantity, value))

    def value(self, model_label: str, quantity: str) -> float:
        for label, q, v in self.rows:
            if label == model_label and q == quantity:
                return v
        raise KeyError(f"no report row ({model_label!r}, {quantity!r})")


def write_table_csv(path: str | Path, rows: Iterable[tuple[str, str, float]]) -> None:
    """Table analogue: one row per (model_label, quantity), KLs in 1e-3."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model_label", "quantity", "value_1e-3"])
        for label, quantity, value in rows:
            writer.writerow([label, quantity, format(value, ".6f")])


def write_curve_csv(path: str | Path, rows: Iterable[tuple], header: Sequence[str]) -> None:
    """Generic figure-data payload (age profiles, sweep curves)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format(v, ".10g") if isinstance(v, float) else v for v in row])


def age_profile_rows(price_by_series: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]]):
    """Evaluate price curves on the full age grid for both smoker strata;
    yields (age, smoker, series, value) rows for figure CSVs."""
    for smoker in (False, True):
        smoker_col = np.full(AGES.size, smoker)
        for series, fn in price_by_series.items():
            values = fn(AGES, smoker_col)
            for age, value in zip(AGES, values):
                yield int(age), int(smoker), series, float(value)
