"""Synthetic health-portfolio world.

Samples policies with age, smoking status, gender, and Poisson claim
counts from a fully known ground-truth frequency model, then optionally
masks the gender label (MCAR, or MNAR with an elevated rate on young
smokers). The true per-policy intensity rides along on every record so
fitted models can be scored exactly against the generating model.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np

AGE_MIN, AGE_MAX = 15, 80
AGES = np.arange(AGE_MIN, AGE_MAX + 1)

GENDER_FEMALE, GENDER_MALE, GENDER_NA = 0, 1, -1
GENDER_LABELS = {GENDER_FEMALE: "F", GENDER_MALE: "M", GENDER_NA: "NA"}
GENDER_CODES = {v: k for k, v in GENDER_LABELS.items()}

# Ground-truth log-frequency parameters of the three claim types.
_TYPE1 = (-40.0, 38.5, 38.5)          # base, young-female bump, senior-male bump
_TYPE2 = (-2.0, 0.004, 0.1, 0.2)      # base, age slope, smoker, female
_TYPE3 = (-2.0, 0.01)                 # base, age slope


class DataError(ValueError):
    """Invalid portfolio data or configuration."""


def default_age_distribution() -> np.ndarray:
    """Discrete triangular age marginal on 15..80 peaking at 45.

    Stand-in for a realistic portfolio age profile: linear rise from
    weight 1 at age 15 to 31 at age 45, linear fall back to 1 at age 80,
    normalized to sum to 1.
    """
    weights = np.interp(AGES, [AGE_MIN, 45, AGE_MAX], [1.0, 31.0, 1.0])
    return weights / weights.sum()


@dataclass(frozen=True)
class PopulationConfig:
    """Covariate distribution and sample size of the simulated portfolio.

    Age is independent of (smoker, gender); gender is sampled
    conditionally on smoking status, with P(female | non-smoker) implied
    by the three stated probabilities through total probability.
    """

    n: int
    p_female: float = 0.45
    p_smoker: float = 0.30
    p_female_given_smoker: float = 0.80
    age_distribution: np.ndarray = field(default_factory=default_age_distribution)
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DataError(f"n must be >= 1, got {self.n}")
        for name in ("p_female", "p_smoker", "p_female_given_smoker"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name} must be a probability, got {v}")
        if self.p_female_given_smoker * self.p_smoker > self.p_female:
            raise DataError("p_female_given_smoker * p_smoker exceeds p_female; "
                            "implied P(female | non-smoker) would be negative")
        dist = np.asarray(self.age_distribution, dtype=np.float64)
        object.__setattr__(self, "age_distribution", dist)
        if dist.shape != AGES.shape:
            raise DataError(f"age_distribution must cover ages {AGE_MIN}..{AGE_MAX}")
        if np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-12:
            raise DataError("age_distribution entries must be nonnegative and sum to 1")

    @property
    def p_female_given_nonsmoker(self) -> float:
        if self.p_smoker == 1.0:
            return self.p_female_given_smoker
        return (self.p_female - self.p_female_given_smoker * self.p_smoker) / (1.0 - self.p_smoker)


@dataclass(frozen=True)
class PortfolioRecord:
    """One policy: covariates, (possibly masked) gender, claim count,
    and the oracle-only true intensity."""

    age: int
    smoker: bool
    gender: int
    claims: int
    true_lambda: float


@dataclass
class Portfolio:
    """Column-array view of the simulated policies."""

    age: np.ndarray          # int, in [15, 80]
    smoker: np.ndarray       # bool
    gender: np.ndarray       # int8 codes, GENDER_NA after masking
    claims: np.ndarray       # nonnegative int
    true_lambda: np.ndarray  # float, oracle-only

    def __post_init__(self):
        n = self.age.size
        if not all(a.shape == (n,) for a in (self.smoker, self.gender, self.claims, self.true_lambda)):
            raise DataError("portfolio columns must share one length")

    @property
    def n(self) -> int:
        return self.age.size

    @property
    def complete_mask(self) -> np.ndarray:
        return self.gender != GENDER_NA

    def complete_cases(self) -> "Portfolio":
        return self.subset(self.complete_mask)

    def subset(self, mask: np.ndarray) -> "Portfolio":
        return Portfolio(self.age[mask], self.smoker[mask], self.gender[mask],
                         self.claims[mask], self.true_lambda[mask])

    def records(self) -> Iterator[PortfolioRecord]:
        for i in range(self.n):
            yield PortfolioRecord(int(self.age[i]), bool(self.smoker[i]),
                                  int(self.gender[i]), int(self.claims[i]),
                                  float(self.true_lambda[i]))


def true_frequency(age, smoker, gender):
    """Ground-truth expected claim frequency, the sum of three log-linear
    claim-type intensities (young-female/senior-male spike, smoking- and
    gender-loaded, and a pure age trend). Vectorizes over arrays."""
    age_arr = np.asarray(age, dtype=np.float64)
    smoker_arr = np.asarray(smoker, dtype=bool)
    gender_arr = np.asarray(gender)
    if np.any((age_arr < AGE_MIN) | (age_arr > AGE_MAX)):
        raise DataError(f"age out of range [{AGE_MIN}, {AGE_MAX}]")
    if np.any(gender_arr == GENDER_NA):
        raise DataError("true_frequency needs an observed gender")
    female = gender_arr == GENDER_FEMALE
    a0, a1, a2 = _TYPE1
    lam1 = np.exp(a0
                  + a1 * ((age_arr >= 20) & (age_arr <= 40) & female)
                  + a2 * ((age_arr >= 60) & ~female))
    g0, g1, g2, g3 = _TYPE2
    lam2 = np.exp(g0 + g1 * age_arr + g2 * smoker_arr + g3 * female)
    d0, d1 = _TYPE3
    lam3 = np.exp(d0 + d1 * age_arr)
    total = lam1 + lam2 + lam3
    return float(total) if np.isscalar(age) else total


def sample_portfolio(config: PopulationConfig) -> Portfolio:
    """Draw i.i.d. policies under the configured covariate distribution.

    Each field (age, smoker, gender, claims) consumes its own seeded
    substream, so downstream masking or resampling of one field can
    never perturb the others.
    """
    ss_age, ss_smoker, ss_gender, ss_claims = np.random.SeedSequence(config.seed).spawn(4)
    n = config.n
    age_cdf = np.cumsum(config.age_distribution)
    age_cdf[-1] = 1.0
    age = AGES[np.searchsorted(age_cdf, np.random.default_rng(ss_age).random(n), side="right")]
    smoker = np.random.default_rng(ss_smoker).random(n) < config.p_smoker
    p_female = np.where(smoker, config.p_female_given_smoker, config.p_female_given_nonsmoker)
    gender = np.where(np.random.default_rng(ss_gender).random(n) < p_female,
                      GENDER_FEMALE, GENDER_MALE).astype(np.int8)
    lam = true_frequency(age, smoker, gender)
    claims = np.random.default_rng(ss_claims).poisson(lam)
    return Portfolio(age=age.astype(np.int64), smoker=smoker, gender=gender,
                     claims=claims.astype(np.int64), true_lambda=lam)


# ---------------------------------------------------------------------------
# Masking of the protected attribute
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaskSpec:
    """Gender drop-out scheme.

    ``mcar`` masks every record independently at ``base_rate``. ``mnar``
    raises the rate to ``m_rate`` on the fixed sub-portfolio of smokers
    aged 45 or below, keeping ``base_rate`` elsewhere.
    """

    mode: str
    base_rate: float
    m_rate: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("mcar", "mnar"):
            raise DataError(f"mask mode must be 'mcar' or 'mnar', got {self.mode!r}")
        if not 0.0 <= self.base_rate <= 1.0:
            raise DataError("base_rate must be in [0, 1]")
        if self.mode == "mnar":
            if self.m_rate is None or not 0.0 <= self.m_rate <= 1.0:
                raise DataError("mnar masking needs m_rate in [0, 1]")
        elif self.m_rate is not None:
            raise DataError("m_rate only applies to mnar masking")


def elevated_subportfolio_mask(portfolio: Portfolio) -> np.ndarray:
    """Membership in the fixed MNAR sub-portfolio: smokers aged <= 45."""
    return (portfolio.age <= 45) & portfolio.smoker


def apply_mask(portfolio: Portfolio, spec: MaskSpec) -> Portfolio:
    """Return a copy with gender set to NA per the drop-out scheme.

    One uniform draw per record decides its drop-out against the
    record's own rate, so an mnar spec with m_rate == base_rate is
    bit-identical to mcar under the same seed. Covariates, claims, and
    true intensities are never touched.
    """
    if np.any(portfolio.gender == GENDER_NA):
        raise DataError("portfolio is already masked")
    u = np.random.default_rng(np.random.SeedSequence(spec.seed)).random(portfolio.n)
    rate = np.full(portfolio.n, spec.base_rate)
    if spec.mode == "mnar":
        rate[elevated_subportfolio_mask(portfolio)] = spec.m_rate
    gender = portfolio.gender.copy()
    gender[u < rate] = GENDER_NA
    return replace(portfolio, age=portfolio.age.copy(), smoker=portfolio.smoker.copy(),
                   gender=gender, claims=portfolio.claims.copy(),
                   true_lambda=portfolio.true_lambda.copy())


def analytic_conditional_gender(age, smoker, config: PopulationConfig) -> tuple[float, float]:
    """Exact P(female | x), P(male | x) under the generating model.

    Age is independent of gender, so only smoking status matters:
    (0.8, 0.2) for smokers and (0.3, 0.7) for non-smokers under the
    default configuration. Used only by the evaluation oracle.
    """
    p_f = config.p_female_given_smoker if smoker else config.p_female_given_nonsmoker
    return p_f, 1.0 - p_f


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def write_portfolio_csv(path: str | Path, portfolio: Portfolio, *, oracle: bool = False) -> None:
    """Write `id,age,smoker,gender,claims` rows; the oracle variant adds
    `true_lambda` at 17 significant digits."""
    lines = ["id,age,smoker,gender,claims" + (",true_lambda" if oracle else "")]
    for i in range(portfolio.n):
        row = (f"{i},{portfolio.age[i]},{int(portfolio.smoker[i])},"
               f"{GENDER_LABELS[int(portfolio.gender[i])]},{portfolio.claims[i]}")
        if oracle:
            row += f",{format(portfolio.true_lambda[i], '.17g')}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def read_portfolio_csv(path: str | Path) -> Portfolio:
    """Read a portfolio CSV; true_lambda defaults to NaN when the file
    has no oracle column."""
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise DataError(f"empty portfolio file: {path}")
    header = text[0].split(",")
    expected = ["id", "age", "smoker", "gender", "claims"]
    if header[:5] != expected:
        raise DataError(f"unexpected portfolio header in {path}: {text[0]!r}")
    has_oracle = len(header) > 5 and header[5] == "true_lambda"
    n = len(text) - 1
    age = np.empty(n, dtype=np.int64)
    smoker = np.empty(n, dtype=bool)
    gender = np.empty(n, dtype=np.int8)
    claims = np.empty(n, dtype=np.int64)
    lam = np.full(n, np.nan)
    for i, line in enumerate(text[1:]):
        parts = line.split(",")
        age[i] = int(parts[1])
        smoker[i] = parts[2] == "1"
        try:
            gender[i] = GENDER_CODES[parts[3]]
        except KeyError:
            raise DataError(f"unknown gender label {parts[3]!r} in {path}") from None
        claims[i] = int(parts[4])
        if has_oracle:
            lam[i] = float(parts[5])
    return Portfolio(age=age, smoker=smoker, gender=gender, claims=claims, true_lambda=lam)
