"""Frequentist unseen-user estimators and the accuracy scores used to compare methods."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb
from scipy.stats import binom

__all__ = [
    "FrequencySpectrum",
    "good_toulmin",
    "jackknife",
    "accuracy_v",
    "accuracy_tilde_v",
]


@dataclass(frozen=True)
class FrequencySpectrum:
    """``f[j]`` is the number of users active on exactly ``j`` of ``D0`` days."""

    D0: int
    f: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.D0 < 1:
            raise ValueError("D0 must be at least 1")
        clean = {}
        for j, n in dict(self.f).items():
            j, n = int(j), int(n)
            if not 1 <= j <= self.D0:
                raise ValueError(f"frequency index {j} outside 1..{self.D0}")
            if n < 0:
                raise ValueError("frequency counts must be nonnegative")
            if n:
                clean[j] = n
        object.__setattr__(self, "f", clean)

    @property
    def N(self):
        return sum(self.f.values())

    @classmethod
    def from_panel(cls, panel):
        days = (np.asarray(panel.counts) > 0).sum(axis=1)
        vals, mults = np.unique(days[days > 0], return_counts=True)
        return cls(panel.D0, dict(zip(vals.tolist(), mults.tolist())))


def good_toulmin(spec: FrequencySpectrum, D1):
    """Good-Toulmin estimate of new users over ``D1`` further days.

    With ``t = D1 / D0`` the estimate is ``-sum_j (-t)**j f_j`` for ``t <= 1``.
    For ``t > 1`` the terms are damped by binomial tail weights
    ``P(Bin(k, 1 / (t + 1)) >= j)`` with
    ``k = ceil(0.5 log2(D0 t**2 / (t - 1)))``. Negative values are clamped to 0.
    """
    if D1 < 0:
        raise ValueError("D1 must be nonnegative")
    t = D1 / spec.D0
    if t == 0 or not spec.f:
        return 0.0
    js = np.array(sorted(spec.f), dtype=float)
    fs = np.array([spec.f[j] for j in sorted(spec.f)], dtype=float)
    terms = -((-t) ** js) * fs
    if t > 1:
        k = math.ceil(0.5 * math.log2(spec.D0 * t * t / (t - 1.0)))
        terms = terms * binom.sf(js - 1, k, 1.0 / (t + 1.0))
    return max(0.0, math.fsum(terms.tolist()))


def jackknife(spec: FrequencySpectrum, k):
    """Order-``k`` jackknife estimate of users never seen, ``S_k - N``.

    ``S_k = sum_i w_i S_{n-i}`` where ``S_{n-i}`` is the mean number of users
    seen when ``i`` of the ``n = D0`` days are left out and
    ``w_i = (-1)**i (n - i)**k / (i! (k - i)!)``. Orders 1 and 2 reduce to the
    familiar ``N + f1 (n-1)/n`` and ``N + f1 (2n-3)/n - f2 (n-2)**2/(n(n-1))``.
    The estimate does not depend on a horizon.
    """
    n = spec.D0
    if not 1 <= k <= min(5, n - 1):
        raise ValueError(f"jackknife order must lie in 1..{min(5, n - 1)}, got {k}")
    N = spec.N
    total = 0.0
    for i in range(k + 1):
        w = (-1) ** i * (n - i) ** k / (math.factorial(i) * math.factorial(k - i))
        missed = sum(f * comb(n - j, i - j, exact=True) for j, f in spec.f.items() if j <= i)
        total += w * (N - missed / comb(n, i, exact=True))
    return total - N


def _accuracy(truth, est):
    if truth is None or est is None or not truth > 0 or not math.isfinite(est):
        return float("nan")
    return 1.0 - min(abs(truth - est) / truth, 1.0)


def accuracy_v(true_u, est):
    """``1 - min(|u - est| / u, 1)``; NaN when ``u = 0`` or the estimate is missing."""
    return _accuracy(true_u, est)


def accuracy_tilde_v(true_t, est_t):
    """Same score for total re-trigger counts."""
    return _accuracy(true_t, est_t)
