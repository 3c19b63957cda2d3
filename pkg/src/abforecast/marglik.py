"""Exact log marginal likelihood of pilot data, labels marginalised out.

    log Pr = N log(alpha) + (c+1) log(beta) - (N+c+1) log(beta + psi_r(0, D0))
             + log Gamma(N+c+1) - log Gamma(c+1) + sum_n log Theta_n

with, per user,

    NB: prod_d C(A_dn + r - 1, A_dn) * B(m_n - alpha, r D0 + 1)
    BE: B(m_n - alpha, D0 - m_n + 1)
    TG: B(1 - alpha, F_n)

The normaliser uses Gamma(c + 1), matching the Gamma(c + 1, beta) law of
``Delta**(-alpha)`` under the prior; the NB Beta term integrates
``theta**(m - 1 - alpha) (1 - theta)**(r D0)``. Both agree with direct
numerical integration of the hierarchical model (see the test-suite oracle).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .posterior import HyperParams
from .specfun import log_beta, log_binom_nb, psi

__all__ = ["LogLikResult", "log_marginal"]


@dataclass(frozen=True)
class LogLikResult:
    log_value: float
    theta_terms: float
    structural_terms: float


def _theta_terms(stats, alpha, r):
    vals = stats.values.astype(float)
    mults = stats.mults.astype(float)
    if stats.model == "BE":
        logs = log_beta(vals - alpha, stats.D0 - vals + 1.0)
    elif stats.model == "TG":
        logs = log_beta(1.0 - alpha, vals)
    else:
        logs = log_beta(vals - alpha, r * stats.D0 + 1.0)
    total = math.fsum(np.atleast_1d(logs * mults).tolist())
    if stats.model == "NB" and len(stats.daily_values):
        coef = log_binom_nb(stats.daily_values.astype(float), r)
        total += math.fsum(np.atleast_1d(coef * stats.daily_mults).tolist())
    return total


def log_marginal(stats, hyper: HyperParams) -> LogLikResult:
    """Log marginal probability of the pilot data under ``hyper``.

    Cost is linear in the number of distinct histogram values, not in N.
    """
    hyper.for_model(stats.model)
    alpha, c, beta, r = hyper.alpha, hyper.c, hyper.beta, hyper.r
    N = stats.N
    rate = beta + psi(0.0, stats.D0, alpha, r)
    structural = math.fsum(
        [
            N * math.log(alpha),
            (c + 1.0) * math.log(beta),
            -(N + c + 1.0) * math.log(rate),
            float(gammaln(N + c + 1.0)),
            -float(gammaln(c + 1.0)),
        ]
    )
    theta = _theta_terms(stats, alpha, r) if N else 0.0
    value = structural + theta
    if not math.isfinite(value):
        raise FloatingPointError(f"non-finite log marginal at {hyper}")
    return LogLikResult(value, theta, structural)
