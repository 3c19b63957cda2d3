"""Closed-form predictive laws for the follow-up period.

Negative binomials here count successes: ``NegBinLaw(size, p)`` has pmf
``C(l + size - 1, l) p**l (1 - p)**size`` and mean ``size p / (1 - p)``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .posterior import PosteriorState
from .specfun import log_beta, log_binom_nb, psi

__all__ = [
    "NegBinLaw",
    "RetriggerClassLaw",
    "ObservedSumLaw",
    "unseen_users_law",
    "expected_unseen",
    "unseen_interval",
    "per_day_rate",
    "retrigger_class_law",
    "observed_future_sum_law",
    "total_triggers_estimate",
    "forecast_report",
]


@dataclass(frozen=True)
class NegBinLaw:
    size: float
    p: float

    def __post_init__(self):
        if not self.size > 0:
            raise ValueError("size must be positive")
        if not 0.0 <= self.p < 1.0:
            raise ValueError("p must lie in [0, 1)")

    @property
    def mean(self):
        return self.size * self.p / (1.0 - self.p)

    @property
    def var(self):
        return self.size * self.p / (1.0 - self.p) ** 2

    def logpmf(self, k):
        k = np.asarray(k, dtype=float)
        if self.p == 0.0:
            return np.where(k == 0, 0.0, -np.inf)
        out = (
            gammaln(k + self.size)
            - gammaln(self.size)
            - gammaln(k + 1.0)
            + k * math.log(self.p)
            + self.size * math.log1p(-self.p)
        )
        return np.where(k >= 0, out, -np.inf)

    def pmf(self, k):
        return np.exp(self.logpmf(k))

    def _window(self):
        sd = math.sqrt(self.var)
        lo = max(0, int(self.mean - 40.0 * sd - 10))
        hi = int(self.mean + 40.0 * sd + 50 + 10.0 / max(1e-12, -math.log(self.p)))
        return lo, hi

    def cdf(self, k):
        """CDF by direct summation of log-space pmf terms."""
        k = np.floor(np.asarray(k, dtype=float)).astype(np.int64)
        if self.p == 0.0:
            return np.where(k >= 0, 1.0, 0.0)
        top = int(np.max(k)) if k.size else 0
        if top < 0:
            return np.zeros(k.shape)
        support = np.arange(top + 1)
        cum = np.cumsum(self.pmf(support))
        return np.where(k < 0, 0.0, cum[np.clip(k, 0, top)])

    def interval(self, level):
        """Equal-tailed integer interval with mass at least ``level``."""
        if not 0.0 < level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        if self.p == 0.0:
            return 0, 0
        tail = (1.0 - level) / 2.0
        # mass outside the 40-sd window is far below double precision
        start, stop = self._window()
        support = np.arange(start, stop + 1)
        cum = np.cumsum(self.pmf(support))
        lo =support[np.searchsorted(cum, tail, side="right")]
        hi_idx = np.searchsorted(cum, 1.0 - tail, side="left")
        hi = support[min(hi_idx, len(support) - 1)]
        return int(lo), int(hi)

    def sample(self, rng, size=None):
        if self.p == 0.0:
            return np.zeros(size, dtype=np.int64) if size is not None else 0
        return rng.negative_binomial(self.size, 1.0 - self.p, size=size)


@dataclass(frozen=True)
class RetriggerClassLaw:
    """Law of the number of new users triggering exactly ``j`` times."""

    j: int
    law: NegBinLaw
    rho: float


def _rate(post):
    return post.gamma_rate


def unseen_users_law(post: PosteriorState, D1) -> NegBinLaw:
    """Law of the number of new users active during ``D1`` follow-up days."""
    if D1 < 0:
        raise ValueError("D1 must be nonnegative")
    h = post.hyper
    if D1 == 0:
        return NegBinLaw(post.gamma_shape, 0.0)
    num = psi(post.D0, D1, h.alpha, h.r)
    den = h.beta + psi(0.0, post.D0 + D1, h.alpha, h.r)
    return NegBinLaw(post.gamma_shape, float(num / den))


def expected_unseen(post: PosteriorState, D1):
    """Posterior mean number of new users over ``D1`` days; vectorised in D1."""
    D1 = np.asarray(D1, dtype=float)
    if np.any(D1 < 0):
        raise ValueError("D1 must be nonnegative")
    h = post.hyper
    # (N+c+1) p/(1-p) with p/(1-p) = psi(D0, D1) / (beta + psi(0, D0))
    out = post.gamma_shape * psi(post.D0, D1, h.alpha, h.r) / post.gamma_rate
    return float(out) if np.ndim(out) == 0 else out


def unseen_interval(post, D1, level=0.95):
    return unseen_users_law(post, D1).interval(level)


def per_day_rate(post: PosteriorState, d, delta_pow):
    """Conditional Poisson rate of first-time triggers on absolute day ``d``.

    Equals ``delta_pow * psi_r(d - 1, 1)``, which reduces to
    ``alpha * delta_pow * B(1 - alpha, d)`` when ``r = 1``.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= post.D0):
        raise ValueError("per-day rates are defined for follow-up days d > D0")
    h = post.hyper
    out = np.multiply.outer(delta_pow, psi(d - 1.0, 1.0, h.alpha, h.r))
    return float(out) if np.ndim(out) == 0 else out


def _log_rho(post, D1, j):
    h = post.hyper
    j = np.asarray(j, dtype=float)
    return (
        log_binom_nb(j, h.r * D1)
        + math.log(h.alpha)
        + log_beta(h.r * (post.D0 + D1) + 1.0, j - h.alpha)
    )


def retrigger_class_law(post: PosteriorState, D1, j) -> RetriggerClassLaw:
    """Law of ``U^(D1, j)``: new users with exactly ``j`` follow-up triggers.

    ``rho = C(j + r D1 - 1, j) alpha B(r (D0 + D1) + 1, j - alpha)`` and
    ``p = rho / (beta + psi_r(0, D0) + rho)``.
    """
    if post.model != "NB":
        raise ValueError("re-trigger classes need the NB model")
    if j < 1 or D1 < 1:
        raise ValueError("need j >= 1 and D1 >= 1")
    rho = float(np.exp(_log_rho(post, D1, j)))
    p = rho / (_rate(post) + rho)
    return RetriggerClassLaw(int(j), NegBinLaw(post.gamma_shape, p), rho)


@dataclass(frozen=True)
class ObservedSumLaw:
    """Follow-up trigger total of the users already seen in the pilot."""

    post: PosteriorState
    D1: int
    mean: float

    def sample(self, seed=None, size=1):
        post = self.post
        if self.D1 == 0 or post.N == 0:
            return np.zeros(size, dtype=np.int64)
        if not len(post.mults):
            raise ValueError("sampling needs per-user posterior Betas")
        rng = np.random.default_rng(seed)
        a = np.repeat(post.beta_a, post.mults)
        b = np.repeat(post.beta_b, post.mults)
        out = np.empty(size, dtype=np.int64)
        for i in range(size):
            theta = np.minimum(rng.beta(a, b), 1.0 - 1e-12)
            out[i] = rng.negative_binomial(post.r * self.D1, 1.0 - theta).sum()
        return out


def observed_future_sum_law(post: PosteriorState, D1) -> ObservedSumLaw:
    """Mean ``(D1 / D0) (T - N alpha)`` plus a sampler over the user Betas."""
    if post.model != "NB":
        raise ValueError("observed-user trigger totals need the NB model")
    if D1 < 0:
        raise ValueError("D1 must be nonnegative")
    if D1 == 0 or post.N == 0:
        return ObservedSumLaw(post, int(D1), 0.0)
    if post.T is None:
        raise ValueError("posterior lacks the pilot trigger total T")
    mean = D1 / post.D0 * (post.T - post.N * post.hyper.alpha)
    return ObservedSumLaw(post, int(D1), float(mean))


def total_triggers_estimate(post: PosteriorState, D1, tail_tol=1e-10,
                            chunk=2048, max_terms=50_000_000):
    """Posterior mean of all follow-up triggers (new plus returning users).

    The new-user part ``(N+c+1) sum_j j p_j / (1 - p_j)`` is summed in
    chunks until an increment drops below ``tail_tol`` times the running sum.
    """
    if post.model != "NB":
        raise ValueError("total triggers need the NB model")
    if D1 < 0:
        raise ValueError("D1 must be nonnegative")
    if D1 == 0:
        return 0.0
    if post.D0 < 1:
        raise ValueError("the new-user trigger mean is infinite without pilot days")
    scale = post.gamma_shape / _rate(post)
    running = 0.0
    start = 1
    while start <= max_terms:
        j = np.arange(start, start + chunk, dtype=float)
        incr = scale * j * np.exp(_log_rho(post, D1, j))
        cum = running + np.cumsum(incr)
        stop = np.nonzero(incr < tail_tol * cum)[0]
        if len(stop):
            running = float(cum[stop[0]])
            break
        running = float(cum[-1])
        start += chunk
    return running + observed_future_sum_law(post, D1).mean


def forecast_report(post: PosteriorState, D1, level=0.95):
    """Dictionary with the new-user forecast and, for NB, total triggers."""
    law = unseen_users_law(post, D1)
    lo, hi = law.interval(level) if D1 > 0 else (0, 0)
    doc = {
        "model": post.model,
        "D0": post.D0,
        "N": post.N,
        "D1": int(D1),
        "level": level,
        "new_users": {"mean": law.mean, "lo": lo, "hi": hi,
                      "size": law.size, "p": law.p},
    }
    if post.model == "NB" and post.T is not None:
        doc["total_triggers"] = {"mean": total_triggers_estimate(post, D1)}
    return doc
