"""Special functions behind the closed-form predictive laws.

Everything here is vectorised over numpy arrays. The kernel ``psi`` is
never evaluated through a gamma function at a negative argument: the
stable-process beta function ``B(t + 1, -alpha)`` is rewritten as a gamma
ratio so that only ``Gamma(z + alpha) / Gamma(z)`` with ``z > 0`` appears.
Those ratios are computed with an asymptotic series once ``z`` is large,
which keeps differences such as ``R(a + y) - R(a)`` accurate for huge ``a``.
"""

import numpy as np
from scipy.special import bernoulli, comb, gamma, gammaln

__all__ = [
    "DomainError",
    "log_gamma",
    "log_gamma_ratio",
    "log_beta",
    "log_binom_nb",
    "psi",
    "trunc_geom_pmf",
]

# Switch-over point for the asymptotic expansion of log Gamma ratios.
_ASYMPTOTIC_Z = 50.0
_N_TERMS = 16


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a function."""


def _bernoulli_poly_coeffs(n_max):
    # B_n(x) = sum_k C(n, k) B_k x^(n-k); row n holds coefficients of x^0..x^n
    bn = bernoulli(n_max)
    coeffs = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        for k in range(n + 1):
            coeffs[n, n - k] = comb(n, k, exact=True) * bn[k]
    return coeffs


_BPOLY = _bernoulli_poly_coeffs(_N_TERMS)


_N_IDX = np.arange(2, _N_TERMS + 1)
_SERIES_SIGN = (-1.0) ** _N_IDX / (_N_IDX * (_N_IDX - 1.0))


def _series_coeffs(a):
    """Coefficients c_n(a) so that log G(z+a)/G(z) ~ a log z + sum c_n z^(1-n).

    Returned with the term index on the first axis.
    """
    a = np.asarray(a, dtype=float)
    powers = a[..., None] ** np.arange(_N_TERMS + 1)
    bn_a = powers @ _BPOLY.T
    coeffs = (bn_a[..., 2:] - _BPOLY[2:, 0]) * _SERIES_SIGN
    return np.moveaxis(coeffs, -1, 0)


def _as_float(x):
    return np.asarray(x, dtype=float)


def _maybe_scalar(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


def log_gamma(x):
    """Natural log of the gamma function for ``x > 0``.

    Backed by ``scipy.special.gammaln``.
    """
    x = _as_float(x)
    if np.any(~(x > 0)):
        raise DomainError("log_gamma requires x > 0")
    return _maybe_scalar(gammaln(x))


def _use_series(z, a):
    return (z >= _ASYMPTOTIC_Z) & (np.abs(a) <= 0.1 * z)


def _lgr_series(z, a):
    acc = a * np.log(z)
    for k, c in enumerate(_series_coeffs(a), start=1):
        acc = acc + c * z ** (-k)
    return acc


def _lgr_raw(z, a):
    """Unvalidated ``log Gamma(z + a) - log Gamma(z)``; z, a broadcast arrays."""
    z, a = np.broadcast_arrays(_as_float(z), _as_float(a))
    out = np.empty(z.shape)
    big = _use_series(z, a)
    # small z with moderate a: recurse upward, G(z+a)/G(z) = G(z+k+a)/G(z+k) / prod(1 + a/(z+i))
    shift = ~big & (np.abs(a) <= 0.1 * _ASYMPTOTIC_Z)
    direct = ~big & ~shift
    if np.any(direct):
        out[direct] = gammaln(z[direct] + a[direct]) - gammaln(z[direct])
    if np.any(big):
        out[big] = _lgr_series(z[big], a[big])
    if np.any(shift):
        zs, as_ = z[shift], a[shift]
        k = np.ceil(_ASYMPTOTIC_Z - zs)
        steps = np.arange(int(k.max()))
        terms = np.log1p(as_[:, None] / (zs[:, None] + steps))
        terms[steps >= k[:, None]] = 0.0
        out[shift] = _lgr_series(zs + k, as_) - terms.sum(axis=1)
    return out


def log_gamma_ratio(z, a):
    """``log(Gamma(z + a) / Gamma(z))`` for ``z > 0`` and ``z + a > 0``.

    Uses the Bernoulli-polynomial asymptotic series when ``z`` is large
    compared with ``a``, avoiding the cancellation of two huge log-gammas.
    """
    z, a = _as_float(z), _as_float(a)
    if np.any(~(z > 0)) or np.any(~(z + a > 0)):
        raise DomainError("log_gamma_ratio requires z > 0 and z + a > 0")
    return _maybe_scalar(_lgr_raw(z, a))


def log_beta(a, b):
    """``log B(a, b) = log Gamma(a) + log Gamma(b) - log Gamma(a + b)``."""
    a, b = np.broadcast_arrays(_as_float(a), _as_float(b))
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise DomainError("log_beta requires a > 0 and b > 0")
    small = np.minimum(a, b)
    large = np.maximum(a, b)
    return _maybe_scalar(gammaln(small) - _lgr_raw(large, small))


def log_binom_nb(a, r):
    """``log C(a + r - 1, a)`` for integer ``a >= 0`` and real ``r > 0``."""
    a, r = _as_float(a), _as_float(r)
    return _maybe_scalar(gammaln(a + r) - gammaln(r) - gammaln(a + 1.0))


def _check_psi_args(alpha, r, x, y):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~((alpha > 0) & (alpha < 1))):
        raise DomainError("alpha must lie strictly inside (0, 1)")
    if np.any(~(np.asarray(r, dtype=float) > 0)):
        raise DomainError("r must be positive")
    if np.any(~(_as_float(x) >= 0)) or np.any(~(_as_float(y) >= 0)):
        raise DomainError("x and y must be nonnegative")


def _log_ratio_shift(t, alpha):
    # log Gamma(t + 1) - log Gamma(t + 1 - alpha), t >= 0
    return _lgr_raw(t + 1.0 - alpha, alpha)


def _psi_raw(x, y, alpha, r):
    x, y, alpha, r = np.broadcast_arrays(
        _as_float(x), _as_float(y), _as_float(alpha), _as_float(r)
    )
    ta = r * x
    step = r * y
    tb = ta + step
    za = ta + 1.0 - alpha
    zb = tb + 1.0 - alpha
    la = _log_ratio_shift(ta, alpha)

    # log R(tb) - log R(ta); both large -> expand the difference directly
    diff = np.empty(la.shape)
    both = _use_series(za, alpha) & _use_series(zb, alpha)
    rest = ~both
    if np.any(rest):
        diff[rest] = _log_ratio_shift(tb[rest], alpha[rest]) - la[rest]
    if np.any(both):
        za_b, al_b, st_b = za[both], alpha[both], step[both]
        rel = np.log1p(st_b / za_b)
        acc = al_b * rel
        for k, c in enumerate(_series_coeffs(al_b), start=1):
            acc = acc + c * za_b ** (-k) * np.expm1(-k * rel)
        diff[both] = acc
    return gamma(1.0 - alpha) * np.exp(la) * np.expm1(diff)


def psi(x, y, alpha, r=1.0):
    """Beta-function kernel of the stable beta-scaled process.

    Evaluates ``alpha * [B(r x + 1, -alpha) - B(r (x + y) + 1, -alpha)]``
    in the equivalent form::

        Gamma(1 - alpha) * [Gamma(r(x+y)+1) / Gamma(r(x+y)+1-alpha)
                            - Gamma(r x + 1) / Gamma(r x + 1 - alpha)]

    It equals ``alpha * int_0^1 (1-t)^(r x) (1 - (1-t)^(r y)) t^(-1-alpha) dt``,
    the expected number of atoms first activated during ``y`` extra days
    after ``x`` days without activity (per unit of the scale variable).

    Parameters
    ----------
    x, y : array_like
        Nonnegative day counts (reals are accepted).
    alpha : float or array_like
        Stability index in (0, 1).
    r : float or array_like, optional
        Negative-binomial size; 1 for the Bernoulli and geometric models.

    Returns
    -------
    float or ndarray
        Nonnegative values; exactly 0 where ``y == 0``.
    """
    _check_psi_args(alpha, r, x, y)
    out = _psi_raw(x, y, alpha, r)
    return _maybe_scalar(np.where(_as_float(y) == 0, 0.0, out))


def trunc_geom_pmf(theta, y, D):
    """First-trigger-day pmf over ``{0, 1, ..., D}``.

    ``y`` in 1..D has mass ``(1 - theta)^(y - 1) theta``; ``y = 0`` (never
    triggered within ``D`` days) has mass ``(1 - theta)^D``.
    """
    theta = _as_float(theta)
    if np.any(~((theta > 0) & (theta < 1))):
        raise DomainError("theta must lie strictly inside (0, 1)")
    if int(D) < 1:
        raise DomainError("D must be at least 1")
    y = np.asarray(y)
    if np.any(y < 0):
        raise DomainError("y must be nonnegative")
    log1m = np.log1p(-theta)
    inside = np.exp((np.maximum(y, 1) - 1) * log1m) * theta
    out = np.where(y == 0, np.exp(D * log1m), np.where(y <= D, inside, 0.0))
    return _maybe_scalar(out)
