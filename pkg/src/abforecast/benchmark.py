"""Replicated accuracy benchmarks for new-user forecasts.

Every replicate simulates ``D0 + D1`` days, keeps the first ``D0`` as the
pilot, forecasts the number of users first seen in the follow-up and scores
the forecast with ``accuracy_v``.

Method names:

* ``nb``, ``be``, ``tg``: the model of that name fitted to the pilot;
* ``gt``: Good-Toulmin;
* ``j1`` .. ``j5``: jackknife of the given order (no horizon dependence).
"""

import csv
import math

import numpy as np

from .baselines import FrequencySpectrum, accuracy_v, good_toulmin, jackknife
from .calibrate import FitConfig, fit_curve, fit_mml
from .dataio import stats_from_panel, stats_from_series
from .forecast import expected_unseen
from .posterior import HyperParams, build_posterior
from .simulate import ZipfConfig, simulate_be, simulate_nb, simulate_tg, simulate_zipf

__all__ = [
    "METHODS",
    "DEFAULT_TAUS",
    "RESULT_FIELDS",
    "run_zipf_suite",
    "run_model_suite",
    "write_results",
]

METHODS = ("nb", "be", "tg", "gt", "j1", "j2", "j3", "j4", "j5")
DEFAULT_TAUS = (0.6, 0.7, 0.8, 0.9)
RESULT_FIELDS = ("replicate", "setting", "method", "D0", "D1", "true_u", "est", "v", "status")


def _check_methods(methods):
    methods = tuple(m.lower() for m in methods)
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ValueError(f"unknown methods: {', '.join(bad)}")
    return methods


def _child_int(seq):
    return int(seq.generate_state(1)[0])


def _sbsp_estimate(model, pilot, D1, fit, seed):
    model = model.upper()
    per_user = hasattr(pilot, "counts")
    if not per_user and model != "TG":
        raise ValueError(f"{model} needs per-user data")
    stats = stats_from_panel(pilot, model) if per_user else stats_from_series(pilot)
    if fit == "curve":
        series = pilot.to_series() if per_user else pilot
        fitted = fit_curve(series, model, FitConfig(method="CURVE", seed=seed))
    else:
        fitted = fit_mml(stats, FitConfig(seed=seed))
    return expected_unseen(build_posterior(stats, fitted.hyper), D1)


def _estimate(method, pilot, D1, fit, seed):
    if method in ("nb", "be", "tg"):
        return _sbsp_estimate(method, pilot, D1, fit, seed)
    if not hasattr(pilot, "counts"):
        raise ValueError("baselines need per-user data")
    spec = FrequencySpectrum.from_panel(pilot)
    if method == "gt":
        return good_toulmin(spec, D1)
    return jackknife(spec, int(method[1]))


def _score(replicate, setting, pilot, D1, true_u, methods, fit, seed):
    rows = []
    for method in methods:
        row = {"replicate": replicate, "setting": setting, "method": method,
               "D0": pilot.D0, "D1": D1, "true_u": int(true_u)}
        try:
            est = float(_estimate(method, pilot, D1, fit, seed))
            row.update(est=est, v=accuracy_v(true_u, est), status="ok")
        except Exception as exc:  # recorded, the run carries on
            row.update(est=float("nan"), v=float("nan"), status=f"error: {exc}")
        rows.append(row)
    return rows


def _split(full, D0):
    if hasattr(full, "counts"):
        pilot = full.truncate(D0)
        return pilot, full.N - pilot.N
    pilot = full.truncate(D0)
    return pilot, int(np.sum(full.new_users_per_day[D0:]))


def _zipf_job(args):
    tau, rep, seq, n_users, D0, D1, methods, fit = args
    full = simulate_zipf(ZipfConfig(tau, n_users, D0 + D1), seed=seq)
    pilot, true_u = _split(full, D0)
    return _score(rep, tau, pilot, D1, true_u, methods, fit, _child_int(seq))


def run_zipf_suite(taus=DEFAULT_TAUS, reps=20, D0=10, D1=50, n_users=100_000,
                   methods=("nb", "gt", "j1", "j4"), seed=0, fit="mml", map_fn=map):
    """Zipf-Poisson benchmark rows, ordered by ``tau``, replicate and method."""
    methods = _check_methods(methods)
    # replicate seeds depend only on (seed, tau index, replicate index)
    per_tau = np.random.SeedSequence(seed).spawn(len(taus))
    jobs = [(float(tau), rep, seq, n_users, D0, D1, methods, fit)
            for tau, parent in zip(taus, per_tau)
            for rep, seq in enumerate(parent.spawn(reps))]
    return [row for rows in map_fn(_zipf_job, jobs) for row in rows]


def _simulate_model(model, hyper, days, seed):
    if model == "NB":
        return simulate_nb(hyper, days, seed=seed)
    if model == "BE":
        return simulate_be(hyper, days, seed=seed)
    return simulate_tg(hyper, days, seed=seed)


def _model_job(args):
    model, hyper, rep, seq, D0, D1, methods, fit = args
    full = _simulate_model(model, hyper, D0 + D1, seq)
    pilot, true_u = _split(full, D0)
    return _score(rep, model, pilot, D1, true_u, methods, fit, _child_int(seq))


def run_model_suite(model="NB", hyper=None, reps=20, D0=10, D1=50,
                    methods=("nb", "gt", "j1"), seed=0, fit="mml", map_fn=map):
    """Rows for data simulated from one of the BE, TG or NB models (NB by default)."""
    model = model.upper()
    if hyper is None:
        hyper = HyperParams(0.5, 30.0, 2.0, 5.0 if model == "NB" else 1.0)
    hyper.for_model(model)
    methods = _check_methods(methods)
    seqs = np.random.SeedSequence(seed).spawn(reps)
    jobs = [(model, hyper, rep, seqs[rep], D0, D1, methods, fit) for rep in range(reps)]
    return [row for rows in map_fn(_model_job, jobs) for row in rows]


def _fmt(value):
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return value


def write_results(rows, stream, setting_name="setting"):
    """Write benchmark rows as CSV; the setting column is renamed to ``setting_name``."""
    fields = [setting_name if f == "setting" else f for f in RESULT_FIELDS]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([_fmt(row[f]) for f in RESULT_FIELDS])
