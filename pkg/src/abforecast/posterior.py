"""Closed-form posterior under the stable beta-scaled process prior.

Given pilot statistics, the posterior factorises into

* a Gamma law for the transformed largest jump ``Delta**(-alpha)``, with
  shape ``N + c + 1`` and rate ``beta + psi_r(0, D0)``;
* independent Beta laws for the activity rates of the observed users.

Only the Gamma parameters feed the unseen-user predictions; the Beta laws
drive predictions for users already seen.
"""

import json
from dataclasses import dataclass

import numpy as np

from .dataio import MODELS, SufficientStats
from .specfun import DomainError, psi

__all__ = [
    "HyperParams",
    "PosteriorState",
    "build_posterior",
    "posterior_from_counts",
    "sample_delta",
]


@dataclass(frozen=True)
class HyperParams:
    """Prior parameters ``(alpha, c, beta)`` plus the negative-binomial size ``r``."""

    alpha: float
    c: float
    beta: float
    r: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "c", "beta", "r"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.c > 0:
            raise DomainError(f"c must be positive, got {self.c}")
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if not self.r > 0:
            raise DomainError(f"r must be positive, got {self.r}")

    def for_model(self, model):
        """Check the ``r = 1`` constraint of the Bernoulli and geometric models."""
        if model in ("BE", "TG") and self.r != 1.0:
            raise ValueError(f"{model} model requires r = 1, got r = {self.r}")
        return self

    def as_dict(self):
        return {"alpha": self.alpha, "c": self.c, "beta": self.beta, "r": self.r}


@dataclass(frozen=True)
class PosteriorState:
    """Posterior summary; ``beta_a``/``beta_b``/``mults`` histogram user Betas."""

    model: str
    hyper: HyperParams
    D0: int
    N: int
    gamma_shape: float
    gamma_rate: float
    beta_a: np.ndarray
    beta_b: np.ndarray
    mults: np.ndarray
    T: int = None

    @property
    def r(self):
        return self.hyper.r

    def user_betas(self):
        """``{(a, b): multiplicity}``."""
        return {
            (float(a), float(b)): int(m)
            for a, b, m in zip(self.beta_a, self.beta_b, self.mults)
        }

    def mean_scale(self):
        """Posterior mean of ``Delta**(-alpha)``."""
        return self.gamma_shape / self.gamma_rate

    def to_json(self):
        doc = {
            "model": self.model,
            "hyper": self.hyper.as_dict(),
            "D0": self.D0,
            "N": self.N,
            "gamma_shape": self.gamma_shape,
            "gamma_rate": self.gamma_rate,
            "user_betas": [
                [float(a), float(b), int(m)]
                for a, b, m in zip(self.beta_a, self.beta_b, self.mults)
            ],
            "T": self.T,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        table = np.array(doc["user_betas"], dtype=float).reshape(-1, 3)
        return cls(
            model=doc["model"],
            hyper=HyperParams(**doc["hyper"]),
            D0=int(doc["D0"]),
            N=int(doc["N"]),
            gamma_shape=float(doc["gamma_shape"]),
            gamma_rate=float(doc["gamma_rate"]),
            beta_a=table[:, 0],
            beta_b=table[:, 1],
            mults=table[:, 2].astype(np.int64),
            T=doc.get("T"),
        )


def _gamma_params(N, D0, hyper):
    shape = N + hyper.c + 1.0
    rate = hyper.beta + (psi(0.0, D0, hyper.alpha, hyper.r) if D0 > 0 else 0.0)
    return shape, rate


def build_posterior(stats: SufficientStats, hyper: HyperParams) -> PosteriorState:
    """Posterior state for pilot statistics under the given hyperparameters.

    User Beta parameters per model, with ``m`` the model's per-user statistic:

    * NB: ``(m - alpha, r D0 + 1)`` with ``m`` the total trigger count;
    * BE: ``(m - alpha, D0 - m + 1)`` with ``m`` the number of active days;
    * TG: ``(1 - alpha, F)`` with ``F`` the first-trigger day.
    """
    if stats.model not in MODELS:
        raise ValueError(f"unknown model {stats.model!r}")
    hyper.for_model(stats.model)
    alpha = hyper.alpha
    vals = stats.values.astype(float)
    if stats.model == "NB":
        a = vals - alpha
        b = np.full_like(vals, hyper.r * stats.D0 + 1.0)
    elif stats.model == "BE":
        a = vals - alpha
        b = stats.D0 - vals + 1.0
    else:
        a = np.full_like(vals, 1.0 - alpha)
        b = vals.copy()
    shape, rate = _gamma_params(stats.N, stats.D0, hyper)
    for arr in (a, b):
        arr.setflags(write=False)
    return PosteriorState(
        model=stats.model,
        hyper=hyper,
        D0=stats.D0,
        N=stats.N,
        gamma_shape=shape,
        gamma_rate=rate,
        beta_a=a,
        beta_b=b,
        mults=stats.mults.copy(),
        T=stats.T,
    )


def posterior_from_counts(model, hyper, D0, N, T=None):
    """Posterior carrying only ``(D0, N)`` (and ``T`` for NB), no user Betas.

    Enough for every unseen-user functional and for the observed-user mean
    of the total-trigger estimator; used with aggregate-only data.
    """
    model = str(model).upper()
    hyper.for_model(model)
    shape, rate = _gamma_params(int(N), int(D0), hyper)
    empty = np.zeros(0)
    return PosteriorState(
        model, hyper, int(D0), int(N), shape, rate, empty, empty,
        np.zeros(0, dtype=np.int64), T,
    )


def sample_delta(post: PosteriorState, seed=None, size=None):
    """Draw ``Delta**(-alpha)`` from its Gamma posterior."""
    rng = np.random.default_rng(seed)
    return rng.gamma(post.gamma_shape, 1.0 / post.gamma_rate, size=size)
