"""Generative samplers for the BE, TG and NB activity models and misspecified benchmarks.

The model samplers are marginal (Indian-buffet-style) schemes: no random
measure is ever instantiated. On day ``d + 1`` the number of brand-new
users is negative binomial with size ``N_d + c + 1`` and success probability
``psi_r(d, 1) / (beta + psi_r(0, d + 1))``; users already seen re-trigger
according to their Beta posterior predictive.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln
from scipy.stats import nbinom

from .dataio import ActivityPanel, FirstTriggerSeries
from .posterior import HyperParams, PosteriorState
from .specfun import psi

__all__ = [
    "ZipfConfig",
    "replicate_seeds",
    "simulate_be",
    "simulate_tg",
    "simulate_nb",
    "simulate_followup",
    "simulate_dg2",
    "simulate_zipf",
    "first_day_count_pmf",
]

# theta is kept below 1 so that negative-binomial draws stay finite
_THETA_MAX = 1.0 - 1e-12


def replicate_seeds(seed, n):
    """Independent child seeds for ``n`` replicates of a run seeded by ``seed``."""
    return np.random.SeedSequence(seed).spawn(n)


def _new_user_probs(start, n_days, hyper):
    """Success probabilities of the new-user negative binomial on days ``start+1..start+n_days``."""
    a, r = hyper.alpha, hyper.r
    d = np.arange(start, start + n_days, dtype=float)
    return psi(d, 1.0, a, r) / (hyper.beta + psi(0.0, d + 1.0, a, r))


def _draw_new_count(rng, n_seen, p, hyper):
    return int(rng.negative_binomial(n_seen + hyper.c + 1.0, 1.0 - p))


def _new_user_theta(rng, k, d, hyper):
    """Rates of ``k`` users first active on day ``d + 1``.

    Target density is proportional to
    ``theta**(-1-alpha) (1-theta)**(r d) (1 - (1-theta)**r)``; proposals come
    from Beta(1 - alpha, r d + 1) and are accepted with probability
    ``(1 - (1-theta)**r) / (max(r, 1) theta)``.
    """
    a, r = hyper.alpha, hyper.r
    out = np.empty(0)
    bound = max(r, 1.0)
    while len(out) < k:
        want = max(16, 2 * (k - len(out)))
        th = rng.beta(1.0 - a, r * d + 1.0, size=want)
        acc = -np.expm1(r * np.log1p(-th)) / (bound * th)
        out = np.concatenate([out, th[rng.random(want) < acc]])
    return np.minimum(out[:k], _THETA_MAX)


def _zero_truncated_nb(rng, size_param, theta):
    """Counts from NegBin(size_param, theta) conditioned on being >= 1."""
    theta = np.asarray(theta, dtype=float)
    sf0 = -np.expm1(size_param * np.log1p(-theta))
    u = rng.random(theta.shape)
    draws = nbinom.isf(u * sf0, size_param, 1.0 - theta)
    return np.maximum(draws, 1).astype(np.int64)


def first_day_count_pmf(a, d, hyper):
    """Unnormalised mass of a new user's first-day count ``a`` on day ``d + 1``.

    ``C(a + r - 1, a) B(a - alpha, r (d + 1) + 1)``, computed in log space.
    """
    from .specfun import log_binom_nb

    a = np.asarray(a, dtype=float)
    r = hyper.r
    return np.exp(log_binom_nb(a, r) + betaln(a - hyper.alpha, r * (d + 1.0) + 1.0))


class _Growth:
    """Column-per-day accumulator for ragged user sets."""

    def __init__(self):
        self.days = []

    def add(self, idx, counts):
        self.days.append((np.asarray(idx, dtype=np.int64), np.asarray(counts, dtype=np.int64)))

    def panel(self, n_users, prefix="u"):
        D = len(self.days)
        mat = np.zeros((n_users, D), dtype=np.int64)
        for d, (idx, cnt) in enumerate(self.days):
            mat[idx, d] = cnt
        keep = mat.sum(axis=1) > 0
        ids = tuple(f"{prefix}{i}" for i in np.nonzero(keep)[0])
        return ActivityPanel(max(D, 1), ids, mat[keep].reshape(-1, max(D, 1)))


def simulate_be(hyper: HyperParams, D, seed=None) -> ActivityPanel:
    """Bernoulli-model panel via the sequential predictive scheme."""
    hyper.for_model("BE")
    rng = np.random.default_rng(seed)
    a = hyper.alpha
    active = np.zeros(0)
    grow = _Growth()
    probs = _new_user_probs(0, D, hyper)
    for d in range(D):
        n = len(active)
        fired = np.nonzero(rng.random(n) < (active - a) / (d - a + 1.0))[0]
        active[fired] += 1
        k = _draw_new_count(rng, n, probs[d], hyper)
        active = np.concatenate([active, np.ones(k)])
        idx = np.concatenate([fired, np.arange(n, n + k)])
        grow.add(idx, np.ones(len(idx)))
    return grow.panel(len(active))


def simulate_tg(hyper: HyperParams, D, seed=None) -> FirstTriggerSeries:
    """First-trigger counts: NegBin total, days iid with mass prop. to B(1-alpha, y)."""
    hyper.for_model("TG")
    rng = np.random.default_rng(seed)
    a = hyper.alpha
    tot = psi(0.0, D, a, 1.0)
    total = rng.negative_binomial(hyper.c + 1.0, 1.0 - tot / (hyper.beta + tot))
    logw = betaln(1.0 - a, np.arange(1, D + 1))
    w = np.exp(logw - logw.max())
    return FirstTriggerSeries(D, rng.multinomial(total, w / w.sum()))


def simulate_nb(hyper: HyperParams, D, seed=None) -> ActivityPanel:
    """Negative-binomial-model panel via the sequential predictive scheme.

    A seen user with running total ``m`` after ``d`` days draws
    ``theta ~ Beta(m - alpha, r d + 1)`` and then a NegBin(r, theta) count.
    """
    rng = np.random.default_rng(seed)
    a, r = hyper.alpha, hyper.r
    totals = np.zeros(0)
    grow = _Growth()
    probs = _new_user_probs(0, D, hyper)
    for d in range(D):
        n = len(totals)
        if n:
            theta = np.minimum(rng.beta(totals - a, r * d + 1.0), _THETA_MAX)
            cnt = rng.negative_binomial(r, 1.0 - theta)
            fired = np.nonzero(cnt)[0]
            totals[fired] += cnt[fired]
        else:
            fired, cnt = np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        k = _draw_new_count(rng, n, probs[d], hyper)
        first = _zero_truncated_nb(rng, r, _new_user_theta(rng, k, d, hyper))
        totals = np.concatenate([totals, first.astype(float)])
        grow.add(np.concatenate([fired, np.arange(n, n + k)]),
                 np.concatenate([cnt[fired], first]))
    return grow.panel(len(totals))


def simulate_followup(post: PosteriorState, D1, seed=None) -> ActivityPanel:
    """Posterior-predictive activity for follow-up days ``D0+1 .. D0+D1``.

    Column ``j`` of the returned panel is absolute day ``D0 + 1 + j``. Seen
    users keep one rate drawn from their Beta posterior for the whole
    follow-up; new users arrive through the sequential negative-binomial
    scheme and keep the rate drawn at arrival. Under TG only first triggers
    are generated. Seen users are labelled ``s<i>``, new users ``n<i>``.
    """
    rng = np.random.default_rng(seed)
    if D1 == 0:
        return ActivityPanel(1, (), np.zeros((0, 1), dtype=np.int64))
    h = post.hyper
    a, r = h.alpha, h.r
    theta = np.minimum(
        rng.beta(np.repeat(post.beta_a, post.mults), np.repeat(post.beta_b, post.mults)),
        _THETA_MAX,
    )
    n_seen = len(theta)
    if post.model != "TG" and n_seen != post.N:
        raise ValueError("follow-up simulation needs per-user posterior Betas")
    if post.model == "TG":
        theta = np.zeros(0)
        n_seen = 0
    n_total = post.N
    grow = _Growth()
    probs = _new_user_probs(post.D0, D1, h)
    for j in range(D1):
        d = post.D0 + j
        n_cur = len(theta)
        if post.model == "BE":
            cnt = (rng.random(n_cur) < theta).astype(np.int64)
        elif post.model == "NB":
            cnt = rng.negative_binomial(r, 1.0 - theta) if n_cur else np.zeros(0, np.int64)
        else:
            cnt = np.zeros(n_cur, dtype=np.int64)
        fired = np.nonzero(cnt)[0]
        k = _draw_new_count(rng, n_total, probs[j], h)
        if post.model == "NB":
            new_theta = _new_user_theta(rng, k, d, h)
            first = _zero_truncated_nb(rng, r, new_theta)
        else:
            new_theta = np.minimum(rng.beta(1.0 - a, d + 1.0, size=k), _THETA_MAX)
            first = np.ones(k, dtype=np.int64)
        if post.model == "TG":
            new_theta = np.zeros(k)
        theta = np.concatenate([theta, new_theta])
        n_total += k
        grow.add(np.concatenate([fired, np.arange(n_cur, n_cur + k)]),
                 np.concatenate([cnt[fired], first]))
    panel = grow.panel(len(theta))
    # relabel: indices below n_seen are pilot users
    ids = tuple(
        f"s{i}" if i < n_seen else f"n{i - n_seen}"
        for i in (int(u[1:]) for u in panel.user_ids)
    )
    return ActivityPanel(panel.D0, ids, panel.counts)


def simulate_dg2(hyper: HyperParams, D, seed=None) -> ActivityPanel:
    """Binary panel where users fade after their first trigger.

    First-trigger days follow the geometric model. On each later day user
    ``n`` is active with probability ``eps_n (1 - alpha) / (1 - alpha + F_n)``,
    ``eps_n ~ U(0, 0.5)``.
    """
    hyper.for_model("BE")
    rng = np.random.default_rng(seed)
    series = simulate_tg(hyper, D, seed=rng.integers(2**63))
    first = np.repeat(np.arange(1, D + 1), series.new_users_per_day)
    n = len(first)
    eps = rng.uniform(0.0, 0.5, size=n)
    prob = eps * (1.0 - hyper.alpha) / (1.0 - hyper.alpha + first)
    days = np.arange(1, D + 1)
    later = days[None, :] > first[:, None]
    counts = (later & (rng.random((n, D)) < prob[:, None])).astype(np.int64)
    counts[np.arange(n), first - 1] = 1
    return ActivityPanel(D, tuple(f"u{i}" for i in range(n)), counts)


@dataclass(frozen=True)
class ZipfConfig:
    """Zipf-Poisson population: user ``n`` triggers daily w.p. ``n**(-tau)``."""

    tau: float
    n_users: int
    days: int

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.n_users < 1 or self.days < 1:
            raise ValueError("n_users and days must be at least 1")


def _zero_truncated_poisson(rng, lam):
    out = rng.poisson(lam)
    bad = np.nonzero(out == 0)[0]
    while len(bad):
        out[bad] = rng.poisson(lam[bad])
        bad = bad[out[bad] == 0]
    return out


def simulate_zipf(cfg: ZipfConfig, seed=None) -> ActivityPanel:
    """Zipf-Poisson panel; counts are zero-truncated Poisson(1 + m / d)."""
    rng = np.random.default_rng(seed)
    theta = np.arange(1, cfg.n_users + 1, dtype=float) ** (-cfg.tau)
    cum = np.zeros(cfg.n_users)
    grow = _Growth()
    for d in range(1, cfg.days + 1):
        fired = np.nonzero(rng.random(cfg.n_users) < theta)[0]
        cnt = _zero_truncated_poisson(rng, 1.0 + cum[fired] / d)
        cum[fired] += cnt
        grow.add(fired, cnt)
    return grow.panel(cfg.n_users)
