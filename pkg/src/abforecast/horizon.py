"""How many more days until an experiment reaches ``M`` distinct users.

All day counts returned here are follow-up offsets ``l = d - D0``: a value of
``l`` means the target is met on absolute day ``D0 + l``.

Three estimators are provided:

* ``point_estimate_dm`` solves ``N + E[U(l)] >= M`` for the smallest ``l``;
* ``sample_dm`` draws exact posterior samples of the hitting day;
* ``global_band`` + ``invert_band`` slice a simultaneous credible band for
  the cumulative user curve at level ``M``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .forecast import expected_unseen, unseen_users_law
from .posterior import PosteriorState
from .specfun import psi

__all__ = [
    "AUTO",
    "CENSORED",
    "SaturationError",
    "HorizonConfig",
    "CredibleBand",
    "DaysInterval",
    "point_estimate_dm",
    "resolve_d_up",
    "first_day_weights",
    "sample_dm",
    "posterior_interval_dm",
    "band_draws",
    "global_band",
    "invert_band",
    "days_to_report",
]

AUTO = "auto"
CENSORED = -1
MAX_DAYS = 10_000_000


class SaturationError(RuntimeError):
    """The expected user curve does not reach the target within ``MAX_DAYS``."""


@dataclass(frozen=True)
class HorizonConfig:
    """Monte Carlo settings for the days-to-target estimators.

    ``D_up`` is the simulation horizon in follow-up days, or ``AUTO`` for
    three times the point estimate.
    """

    M: int
    D_up: object = AUTO
    K: int = 1000
    Q: int = 1000
    epsilon: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.D_up != AUTO and (int(self.D_up) != self.D_up or self.D_up < 1):
            raise ValueError("D_up must be a positive integer or 'auto'")
        if self.K < 100 or self.Q < 100:
            raise ValueError("K and Q must be at least 100")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")


@dataclass(frozen=True)
class CredibleBand:
    """Pointwise envelope of retained cumulative user trajectories."""

    days: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


@dataclass(frozen=True)
class DaysInterval:
    """Interval for the hitting day.

    ``hi`` is None when the upper end lies beyond the simulated horizon;
    both ends are None when every draw is censored.
    """

    lo: object
    hi: object
    censor_fraction: float
    hi_censored: bool
    degenerate: bool = False


def _check_target(post, M):
    if M < post.N:
        raise ValueError(f"target M={M} is below the observed user count N={post.N}")


def point_estimate_dm(post: PosteriorState, M):
    """Smallest ``l`` with ``N + expected_unseen(post, l) >= M``.

    Found by doubling then bisection. Raises ``SaturationError`` when the
    target is not met within ``MAX_DAYS`` days.
    """
    _check_target(post, M)
    need = M - post.N
    if need == 0:
        return 0

    def reached(days):
        return expected_unseen(post, days) >= need

    hi = 1
    while not reached(hi):
        if hi >= MAX_DAYS:
            raise SaturationError(
                f"expected users stay below M={M} for {MAX_DAYS} follow-up days"
            )
        hi = min(2 * hi, MAX_DAYS)
    lo = hi // 2  # reached(lo) is false, or lo == 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if reached(mid):
            hi = mid
        else:
            lo = mid
    return hi


def resolve_d_up(post, cfg: HorizonConfig):
    if cfg.D_up == AUTO:
        return max(1, 3 * point_estimate_dm(post, cfg.M))
    return int(cfg.D_up)


def first_day_weights(post: PosteriorState, D_up):
    """Probabilities that a new user's first day is ``D0 + l``, ``l = 1..D_up``.

    Proportional to ``psi_r(D0 + l - 1, 1)``, i.e. ``B(1 - alpha, D0 + l)``
    up to a constant when ``r = 1``.
    """
    h = post.hyper
    days = np.arange(post.D0, post.D0 + D_up, dtype=float)
    w = psi(days, 1.0, h.alpha, h.r)
    return w / w.sum()


def sample_dm(post: PosteriorState, cfg: HorizonConfig, D_up=None, chunk=256):
    """``K`` exact posterior draws of the follow-up day on which ``M`` is hit.

    Each draw samples the number of new users within ``D_up`` days from the
    unseen-user law, spreads them over days by ``first_day_weights`` and
    reports the day of the ``(M - N)``-th arrival, or ``CENSORED`` when fewer
    users arrive.
    """
    _check_target(post, cfg.M)
    if D_up is None:
        D_up = resolve_d_up(post, cfg)
    need = cfg.M - post.N
    if need == 0:
        return np.zeros(cfg.K, dtype=np.int64)
    rng = np.random.default_rng(cfg.seed)
    xi = unseen_users_law(post, D_up).sample(rng, size=cfg.K)
    w = first_day_weights(post, D_up)
    out = np.full(cfg.K, CENSORED, dtype=np.int64)
    for start in range(0, cfg.K, chunk):
        sl = slice(start, start + chunk)
        cum = np.cumsum(rng.multinomial(xi[sl], w), axis=1)
        hit = cum[:, -1] >= need
        first = np.argmax(cum >= need, axis=1) + 1
        out[sl] = np.where(hit, first, CENSORED)
    return out


def _rank(q, n):
    # nearest-rank: smallest k with k / n >= q, guarded against float fuzz
    return min(n, max(1, math.ceil(q * n - 1e-9))) - 1


def posterior_interval_dm(samples, level=0.95):
    """Equal-tailed nearest-rank interval; censored draws sort above every day."""
    s = np.asarray(samples)
    if s.size == 0:
        raise ValueError("no samples")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    cens = s == CENSORED
    frac = float(np.mean(cens))
    if cens.all():
        return DaysInterval(None, None, frac, True, degenerate=True)
    vals = np.sort(np.where(cens, np.inf, s.astype(float)))
    tail = (1.0 - level) / 2.0
    lo = vals[_rank(tail, len(vals))]
    hi = vals[_rank(1.0 - tail, len(vals))]
    hi_cens = bool(np.isinf(hi)) or frac > tail
    return DaysInterval(
        None if np.isinf(lo) else int(lo),
        None if hi_cens else int(hi),
        frac,
        hi_cens,
        degenerate=bool(np.isinf(lo)),
    )


def band_draws(post: PosteriorState, cfg: HorizonConfig, D_up):
    """``Q`` simulated new-user count paths and their joint log densities.

    Each path is a scale value from the Gamma posterior followed by
    independent Poisson new-user counts per follow-up day. Returns
    ``(counts, score)`` with ``counts`` of shape ``(Q, D_up)``.
    """
    rng = np.random.default_rng(cfg.seed)
    h = post.hyper
    shape, rate = post.gamma_shape, post.gamma_rate
    g = rng.gamma(shape, 1.0 / rate, size=cfg.Q)
    unit = psi(np.arange(post.D0, post.D0 + D_up, dtype=float), 1.0, h.alpha, h.r)
    lam = np.outer(g, unit)
    counts = rng.poisson(lam)
    logpdf_g = shape * math.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(g) - rate * g
    logpmf = counts * np.log(lam) - lam - gammaln(counts + 1.0)
    return counts, logpdf_g + logpmf.sum(axis=1)


def global_band(post: PosteriorState, cfg: HorizonConfig, D_up=None):
    """Band containing the highest-density ``(1 - epsilon)`` share of ``Q`` draws.

    Draws come from ``band_draws`` and are ranked by their joint log density,
    ties going to the lower draw index.
    """
    if D_up is None:
        D_up = resolve_d_up(post, cfg)
    counts, score = band_draws(post, cfg, D_up)
    keep = math.ceil((1.0 - cfg.epsilon) * cfg.Q - 1e-9)
    order = np.lexsort((np.arange(cfg.Q), -score))[:keep]
    traj = post.N + np.cumsum(counts[order], axis=1)
    return CredibleBand(np.arange(1, D_up + 1), traj.min(axis=0), traj.max(axis=0))


def invert_band(band: CredibleBand, M, N=None):
    """Slice the band at ``M``: first day the upper curve, then the lower, reach it.

    Returns ``(lo_day, hi_day)``; an end is None when its curve never reaches
    ``M`` inside the band. ``M`` at or below the band start gives ``(0, 0)``.
    """
    start = band.lo[0] if N is None else N
    if M <= start:
        return 0, 0

    def first(curve):
        idx = np.nonzero(curve >= M)[0]
        return int(band.days[idx[0]]) if len(idx) else None

    return first(band.hi), first(band.lo)


def days_to_report(post: PosteriorState, cfg: HorizonConfig, method="posterior", level=0.95):
    """Dictionary summary of the days-to-target estimate.

    With an explicit ``D_up`` a saturated point estimate is reported as None
    and the interval is still computed; with ``AUTO`` saturation is an error.
    """
    method = method.lower()
    if method not in ("posterior", "inversion"):
        raise ValueError(f"unknown method {method!r}")
    try:
        point = point_estimate_dm(post, cfg.M)
    except SaturationError:
        if cfg.D_up == AUTO:  # no horizon to simulate over
            raise
        point = None
    D_up = resolve_d_up(post, cfg)
    doc = {"M": int(cfg.M), "N": post.N, "D0": post.D0, "method": method,
           "point": point, "D_up": D_up, "level": level}
    if method == "posterior":
        iv = posterior_interval_dm(sample_dm(post, cfg, D_up), level)
        doc.update(lo=iv.lo, hi=iv.hi, censor_fraction=iv.censor_fraction,
                   hi_censored=iv.hi_censored, K=cfg.K)
    else:
        lo, hi = invert_band(global_band(post, cfg, D_up), cfg.M, post.N)
        doc.update(lo=lo, hi=hi, censor_fraction=None, hi_censored=hi is None,
                   Q=cfg.Q, epsilon=cfg.epsilon)
    return doc
