"""Empirical-Bayes hyperparameter estimation.

Two routes are offered:

* ``fit_mml`` maximises the exact log marginal likelihood of per-user data;
* ``fit_curve`` matches the expected new-user trajectory to an observed
  first-trigger series by least squares, and so only needs aggregate counts.

Both drive a small seeded differential-evolution optimiser. Scale
parameters ``c``, ``beta`` and ``r`` are searched on a log scale.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dataio import FirstTriggerSeries, SufficientStats
from .forecast import expected_unseen
from .marglik import log_marginal
from .posterior import HyperParams, posterior_from_counts
from .specfun import DomainError

__all__ = [
    "FitError",
    "FitConfig",
    "FittedParams",
    "DEResult",
    "DEFAULT_BOUNDS",
    "differential_evolution",
    "fit_mml",
    "fit_curve",
]

DEFAULT_BOUNDS = {
    "alpha": (0.01, 0.99),
    "c": (1e-2, 1e6),
    "beta": (1e-3, 1e4),
    "r": (1e-2, 1e3),
}
_LOG_SCALE = ("c", "beta", "r")


class FitError(RuntimeError):
    """Raised when a fit cannot be carried out or produces no usable point."""


@dataclass(frozen=True)
class DEResult:
    x: np.ndarray
    fun: float
    evaluations: int
    generations: int
    converged: bool


def differential_evolution(objective, bounds, population=32, max_gens=300,
                           tol=1e-8, seed=0, mutation=0.7, crossover=0.9,
                           map_fn=map):
    """Minimise ``objective`` over a box with DE/rand/1/bin.

    Parameters
    ----------
    objective : callable
        Maps a 1-d array to a float. Non-finite values count as ``+inf``.
    bounds : sequence of (low, high)
        Box constraints, one pair per coordinate.
    population : int
        Number of members, at least 4.
    max_gens : int
        Generation cap.
    tol : float
        Stop once the spread of member objectives falls below ``tol``.
    seed : int
        Seed of the only random stream used.
    mutation, crossover : float
        Differential weight ``F`` and crossover rate ``CR``.
    map_fn : callable
        ``map``-like function used to evaluate a generation's trials, e.g. an
        executor's ``map``. Selection happens afterwards in member order, so
        results do not depend on how evaluations are scheduled.

    Returns
    -------
    DEResult
    """
    b = np.asarray(bounds, dtype=float).reshape(-1, 2)
    lo, hi = b[:, 0], b[:, 1]
    if not np.all(hi > lo):
        raise ValueError("each bound needs high > low")
    if population < 4:
        raise ValueError("population must be at least 4")
    dim = len(lo)
    rng = np.random.default_rng(seed)

    def score(points):
        vals = np.array(list(map_fn(objective, list(points))), dtype=float)
        return np.where(np.isfinite(vals), vals, np.inf)

    pop = lo + rng.random((population, dim)) * (hi - lo)
    fit = score(pop)
    evals = population
    if np.sum(np.isinf(fit)) > population / 2:
        raise FitError("objective is non-finite on most of the initial population")

    converged = False
    gen = 0
    for gen in range(1, max_gens + 1):
        trials = np.empty_like(pop)
        for i in range(population):
            others = [k for k in range(population) if k != i]
            r1, r2, r3 = rng.choice(others, size=3, replace=False)
            mutant = pop[r1] + mutation * (pop[r2] - pop[r3])
            # out-of-box coordinates are resampled between the parent and the wall
            below, above = mutant < lo, mutant > hi
            u = rng.random(dim)
            mutant = np.where(below, lo + u * (pop[i] - lo), mutant)
            mutant = np.where(above, hi - u * (hi - pop[i]), mutant)
            cross = rng.random(dim) < crossover
            cross[rng.integers(dim)] = True
            trials[i] = np.where(cross, mutant, pop[i])
        trial_fit = score(trials)
        evals += population
        better = trial_fit < fit
        pop[better] = trials[better]
        fit[better] = trial_fit[better]
        finite = fit[np.isfinite(fit)]
        if len(finite) == population and finite.max() - finite.min() < tol:
            converged = True
            break
    best = int(np.argmin(fit))
    return DEResult(pop[best].copy(), float(fit[best]), evals, gen, converged)


@dataclass(frozen=True)
class FitConfig:
    """Settings shared by both fitting routes.

    ``bounds`` may override any of the keys of ``DEFAULT_BOUNDS``.
    """

    method: str = "MML"
    bounds: dict = field(default_factory=dict)
    d0: int = 1
    de_population: int = 32
    de_max_gens: int = 300
    de_tol: float = 1e-8
    seed: int = 0
    mutation: float = 0.7
    crossover: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "method", str(self.method).upper())
        if self.method not in ("MML", "CURVE"):
            raise ValueError(f"unknown fit method {self.method!r}")
        merged = dict(DEFAULT_BOUNDS)
        for key, pair in dict(self.bounds).items():
            if key not in DEFAULT_BOUNDS:
                raise ValueError(f"unknown parameter {key!r} in bounds")
            merged[key] = (float(pair[0]), float(pair[1]))
        for key, (low, high) in merged.items():
            if not low < high:
                raise ValueError(f"empty bound for {key}")
            if key == "alpha" and not (0.0 < low and high < 1.0):
                raise ValueError("alpha bounds must lie inside (0, 1)")
            if key != "alpha" and not low > 0:
                raise ValueError(f"{key} bounds must be positive")
        object.__setattr__(self, "bounds", merged)
        if self.d0 < 1:
            raise ValueError("d0 must be at least 1")


@dataclass(frozen=True)
class FittedParams:
    """Result of a fit.

    ``objective_value`` is the maximised log marginal likelihood for MML and
    the minimised sum of squares for CURVE.
    """

    model: str
    hyper: HyperParams
    objective_value: float
    method: str
    evaluations: int
    converged: bool
    seed: int = 0

    def to_dict(self):
        return {
            "model": self.model,
            "alpha": self.hyper.alpha,
            "c": self.hyper.c,
            "beta": self.hyper.beta,
            "r": self.hyper.r,
            "objective": self.objective_value,
            "method": self.method,
            "seed": self.seed,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc):
        hyper = HyperParams(doc["alpha"], doc["c"], doc["beta"], doc.get("r", 1.0))
        return cls(
            model=str(doc["model"]).upper(),
            hyper=hyper,
            objective_value=float(doc.get("objective", float("nan"))),
            method=str(doc.get("method", "MML")).upper(),
            evaluations=int(doc.get("evaluations", 0)),
            converged=bool(doc.get("converged", True)),
            seed=int(doc.get("seed", 0)),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _names(model):
    return ("alpha", "c", "beta", "r") if model == "NB" else ("alpha", "c", "beta")


def _search_box(names, bounds):
    box = []
    for key in names:
        low, high = bounds[key]
        box.append((math.log(low), math.log(high)) if key in _LOG_SCALE else (low, high))
    return box


def _decode(x, names):
    vals = {}
    for key, v in zip(names, x):
        vals[key] = math.exp(v) if key in _LOG_SCALE else float(v)
    return HyperParams(**vals)


def _run(objective, model, config, sign):
    names = _names(model)
    box = _search_box(names, config.bounds)

    def wrapped(x):
        try:
            return sign * objective(_decode(x, names))
        except (DomainError, FloatingPointError, ValueError, OverflowError):
            return math.inf

    res = differential_evolution(
        wrapped, box, population=config.de_population, max_gens=config.de_max_gens,
        tol=config.de_tol, seed=config.seed, mutation=config.mutation,
        crossover=config.crossover,
    )
    if not math.isfinite(res.fun):
        raise FitError("optimiser found no point with a finite objective")
    return FittedParams(
        model=model,
        hyper=_decode(res.x, names),
        objective_value=sign * res.fun,
        method=config.method,
        evaluations=res.evaluations,
        converged=res.converged,
        seed=config.seed,
    )


def fit_mml(stats: SufficientStats, config: FitConfig = None) -> FittedParams:
    """Maximum marginal likelihood estimate of the hyperparameters.

    ``r`` is fitted only for the NB model; BE and TG fix ``r = 1``.
    """
    config = config or FitConfig(method="MML")
    if config.method != "MML":
        config = FitConfig(**{**config.__dict__, "method": "MML"})
    if stats.N == 0:
        raise FitError("no users observed; the likelihood carries no information on alpha")
    return _run(lambda h: log_marginal(stats, h).log_value, stats.model, config, -1.0)


def curve_targets(series: FirstTriggerSeries, d0):
    """``(N_{d0}, u)``: users by day ``d0`` and cumulative new users after it."""
    counts = np.asarray(series.new_users_per_day, dtype=float)
    return float(counts[:d0].sum()), np.cumsum(counts[d0:])


def curve_objective(series: FirstTriggerSeries, model, hyper, d0=1):
    """Sum of squared gaps between expected and observed new-user curves."""
    n_d0, target = curve_targets(series, d0)
    post = posterior_from_counts(model, hyper, d0, int(n_d0))
    pred = expected_unseen(post, np.arange(1, len(target) + 1))
    return math.fsum(((pred - target) ** 2).tolist())


def fit_curve(series: FirstTriggerSeries, model, config: FitConfig = None) -> FittedParams:
    """Least-squares fit of the expected new-user trajectory.

    Anchored at day ``d0``: the residual for horizon ``d`` compares the
    expected new-user count after ``d0`` days with the observed number of
    first triggers on days ``d0 + 1 .. d0 + d``, for ``d = 1 .. D0 - d0``.
    """
    model = str(model).upper()
    config = config or FitConfig(method="CURVE")
    if config.method != "CURVE":
        config = FitConfig(**{**config.__dict__, "method": "CURVE"})
    if series.D0 < config.d0 + 2:
        raise FitError(f"curve fitting needs D0 >= d0 + 2, got D0={series.D0}, d0={config.d0}")
    if not np.any(np.asarray(series.new_users_per_day)):
        raise FitError("first-trigger series is all zero")
    return _run(lambda h: curve_objective(series, model, h, config.d0), model, config, 1.0)
