"""Activity data ingestion and per-model sufficient statistics.

Two CSV layouts are understood:

* long format, header ``user_id,day,count``: one row per user and day;
* aggregate format, header ``day,new_users[,total_triggers]``: one row per
  day with the number of users first triggering that day.

Days are 1-indexed throughout.
"""

import csv
import io
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MODELS",
    "DataError",
    "ActivityPanel",
    "FirstTriggerSeries",
    "SufficientStats",
    "parse_long_csv",
    "parse_aggregate_csv",
    "read_table",
    "stats_from_panel",
    "stats_from_series",
    "write_long_csv",
    "write_aggregate_csv",
]

MODELS = ("BE", "TG", "NB")

LONG_HEADER = ["user_id", "day", "count"]
AGG_HEADER = ["day", "new_users"]
AGG_HEADER_TOTALS = ["day", "new_users", "total_triggers"]


class DataError(ValueError):
    """Malformed or invalid input data."""


def _check_model(model):
    model = str(model).upper()
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return model


@dataclass(frozen=True)
class ActivityPanel:
    """Per-user daily trigger counts over ``D0`` pilot days.

    ``counts`` has shape ``(N, D0)``; row ``n`` belongs to ``user_ids[n]``.
    Every user has at least one positive count.
    """

    D0: int
    user_ids: tuple
    counts: np.ndarray
    dropped_users: int = 0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64).reshape(-1, self.D0)
        if self.D0 < 1:
            raise DataError("D0 must be at least 1")
        if counts.shape[0] != len(self.user_ids):
            raise DataError("one row of counts is required per user")
        if len(set(self.user_ids)) != len(self.user_ids):
            raise DataError("user ids must be unique")
        if np.any(counts < 0):
            raise DataError("counts must be nonnegative")
        if counts.shape[0] and np.any(counts.sum(axis=1) == 0):
            raise DataError("every user needs at least one positive count")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "user_ids", tuple(self.user_ids))

    @property
    def N(self):
        return len(self.user_ids)

    def first_days(self):
        """1-indexed day of each user's first positive count."""
        return np.argmax(self.counts > 0, axis=1) + 1

    def truncate(self, days):
        """Restrict the panel to its first ``days`` days, dropping inactive users."""
        days = int(days)
        if not 1 <= days <= self.D0:
            raise DataError(f"cannot truncate a {self.D0}-day panel to {days} days")
        sub = self.counts[:, :days]
        keep = sub.sum(axis=1) > 0
        ids = tuple(u for u, k in zip(self.user_ids, keep) if k)
        return ActivityPanel(days, ids, sub[keep])

    def new_users_per_day(self):
        return np.bincount(self.first_days(), minlength=self.D0 + 1)[1:]

    def to_series(self):
        """Aggregate view: first-trigger counts and total triggers per day."""
        return FirstTriggerSeries(
            self.D0, self.new_users_per_day(), self.counts.sum(axis=0)
        )


@dataclass(frozen=True)
class FirstTriggerSeries:
    """Daily counts of users triggering for the first time."""

    D0: int
    new_users_per_day: np.ndarray
    total_triggers_per_day: np.ndarray = None

    def __post_init__(self):
        new = np.asarray(self.new_users_per_day, dtype=np.int64)
        if new.shape != (self.D0,):
            raise DataError("new_users_per_day must have length D0")
        if np.any(new < 0):
            raise DataError("new user counts must be nonnegative")
        object.__setattr__(self, "new_users_per_day", new)
        if self.total_triggers_per_day is not None:
            tot = np.asarray(self.total_triggers_per_day, dtype=np.int64)
            if tot.shape != (self.D0,) or np.any(tot < 0):
                raise DataError("total_triggers_per_day must be nonnegative, length D0")
            object.__setattr__(self, "total_triggers_per_day", tot)

    @property
    def N(self):
        return int(self.new_users_per_day.sum())

    def truncate(self, days):
        days = int(days)
        if not 1 <= days <= self.D0:
            raise DataError(f"cannot truncate a {self.D0}-day series to {days} days")
        tot = None
        if self.total_triggers_per_day is not None:
            tot = self.total_triggers_per_day[:days]
        return FirstTriggerSeries(days, self.new_users_per_day[:days], tot)


@dataclass(frozen=True)
class SufficientStats:
    """Grouped statistics the likelihood and posterior depend on.

    ``values``/``mults`` is the histogram of the per-user statistic: active
    days (BE), first-trigger day (TG) or total trigger count (NB). For NB
    ``daily_values``/``daily_mults`` histogram the individual positive daily
    counts and ``T`` is the total number of pilot triggers.
    """

    model: str
    D0: int
    values: np.ndarray
    mults: np.ndarray
    daily_values: np.ndarray = None
    daily_mults: np.ndarray = None
    T: int = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        model = _check_model(self.model)
        object.__setattr__(self, "model", model)
        values = np.asarray(self.values, dtype=np.int64)
        mults = np.asarray(self.mults, dtype=np.int64)
        if values.shape != mults.shape:
            raise DataError("values and mults must align")
        if np.any(mults < 0):
            raise DataError("multiplicities must be nonnegative")
        keep = mults > 0
        order = np.argsort(values[keep], kind="stable")
        values, mults = values[keep][order], mults[keep][order]
        if len(np.unique(values)) != len(values):
            raise DataError("histogram values must be distinct")
        if len(values) and values[0] < 1:
            raise DataError("histogram values must be >= 1")
        if model in ("BE", "TG") and len(values) and values[-1] > self.D0:
            raise DataError(f"{model} statistics cannot exceed D0={self.D0}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mults", mults)
        if model == "NB":
            dv = np.asarray(
                self.daily_values if self.daily_values is not None else [],
                dtype=np.int64,
            )
            dm = np.asarray(
                self.daily_mults if self.daily_mults is not None else [],
                dtype=np.int64,
            )
            keep = dm > 0
            dv, dm = dv[keep], dm[keep]
            if np.any(dv < 1):
                raise DataError("daily counts in the histogram must be >= 1")
            object.__setattr__(self, "daily_values", dv)
            object.__setattr__(self, "daily_mults", dm)
            T = int((values * mults).sum())
            if self.T is not None and int(self.T) != T:
                raise DataError("T must equal the sum of total counts")
            if int((dv * dm).sum()) != T:
                raise DataError("daily counts must add up to T")
            object.__setattr__(self, "T", T)

    @property
    def N(self):
        return int(self.mults.sum())

    @property
    def hist(self):
        return dict(zip(self.values.tolist(), self.mults.tolist()))

    @property
    def daily_hist(self):
        if self.daily_values is None:
            return None
        return dict(zip(self.daily_values.tolist(), self.daily_mults.tolist()))

    @classmethod
    def from_histogram(cls, model, D0, hist, daily_hist=None):
        """Build statistics from ``{value: multiplicity}`` mappings."""
        hist = dict(hist)
        kwargs = {}
        if daily_hist is not None:
            kwargs["daily_values"] = list(daily_hist.keys())
            kwargs["daily_mults"] = list(daily_hist.values())
        return cls(model, int(D0), list(hist.keys()), list(hist.values()), **kwargs)


def _histogram(values):
    counter = Counter(np.asarray(values).tolist())
    keys = sorted(counter)
    return np.array(keys, dtype=np.int64), np.array(
        [counter[k] for k in keys], dtype=np.int64
    )


def _reader(stream):
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    return csv.reader(stream)


def _int_field(raw, line, name):
    try:
        return int(raw.strip())
    except ValueError:
        raise DataError(f"line {line}: {name} must be an integer, got {raw!r}") from None


def parse_long_csv(stream, D0=None):
    """Parse ``user_id,day,count`` rows into an :class:`ActivityPanel`.

    Duplicate ``(user_id, day)`` rows are summed. Users whose counts are all
    zero are dropped and reported in ``dropped_users``. ``D0`` defaults to the
    largest day present.
    """
    rows = _reader(stream)
    header = next(rows, None)
    if header is None or [h.strip() for h in header] != LONG_HEADER:
        raise DataError(f"line 1: expected header {','.join(LONG_HEADER)}")
    cells = {}
    order = []
    max_day = 0
    for line, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise DataError(f"line {line}: expected 3 fields, got {len(row)}")
        user = row[0].strip()
        if not user:
            raise DataError(f"line {line}: empty user_id")
        day = _int_field(row[1], line, "day")
        count = _int_field(row[2], line, "count")
        if day < 1:
            raise DataError(f"line {line}: day must be >= 1")
        if count < 0:
            raise DataError(f"line {line}: count must be >= 0")
        if D0 is not None and day > D0:
            raise DataError(f"line {line}: day {day} exceeds declared D0={D0}")
        if user not in cells:
            cells[user] = Counter()
            order.append(user)
        cells[user][day] += count
        max_day = max(max_day, day)

    days = int(D0) if D0 is not None else max(max_day, 1)
    ids, mat, dropped = [], [], 0
    for user in order:
        vec = np.zeros(days, dtype=np.int64)
        for day, count in cells[user].items():
            vec[day - 1] = count
        if vec.sum() == 0:
            dropped += 1
            continue
        ids.append(user)
        mat.append(vec)
    counts = np.array(mat, dtype=np.int64).reshape(len(ids), days)
    return ActivityPanel(days, tuple(ids), counts, dropped_users=dropped)


def parse_aggregate_csv(stream):
    """Parse ``day,new_users[,total_triggers]`` rows; days must run 1, 2, ..."""
    rows = _reader(stream)
    header = next(rows, None)
    header = [h.strip() for h in header] if header is not None else None
    if header not in (AGG_HEADER, AGG_HEADER_TOTALS):
        raise DataError("line 1: expected header day,new_users[,total_triggers]")
    width = len(header)
    new, tot = [], []
    for line, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise DataError(f"line {line}: expected {width} fields, got {len(row)}")
        day = _int_field(row[0], line, "day")
        if day != len(new) + 1:
            raise DataError(f"line {line}: days must be contiguous from 1, got {day}")
        n_new = _int_field(row[1], line, "new_users")
        if n_new < 0:
            raise DataError(f"line {line}: new_users must be >= 0")
        new.append(n_new)
        if width == 3:
            t = _int_field(row[2], line, "total_triggers")
            if t < 0:
                raise DataError(f"line {line}: total_triggers must be >= 0")
            tot.append(t)
    if not new:
        raise DataError("aggregate data needs at least one day")
    return FirstTriggerSeries(len(new), new, tot if width == 3 else None)


def read_table(path):
    """Read either CSV layout from ``path``, dispatching on the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    first = text.splitlines()[0].strip() if text.strip() else ""
    if first.split(",")[:1] == ["user_id"]:
        return parse_long_csv(io.StringIO(text))
    if first.split(",")[:1] == ["day"]:
        return parse_aggregate_csv(io.StringIO(text))
    raise DataError(f"{path}: unrecognised header {first!r}")


def stats_from_panel(panel, model):
    """Compress an :class:`ActivityPanel` into model-specific statistics.

    For BE, counts above 1 are clamped to 1 with a warning.
    """
    model = _check_model(model)
    counts = panel.counts
    meta = {"dropped_users": panel.dropped_users}
    if model == "BE":
        if np.any(counts > 1):
            warnings.warn("BE model: daily counts above 1 clamped to 1", stacklevel=2)
            meta["clamped"] = int((counts > 1).sum())
        vals, mults = _histogram((counts > 0).sum(axis=1))
        return SufficientStats("BE", panel.D0, vals, mults, meta=meta)
    if model == "TG":
        vals, mults = _histogram(panel.first_days())
        return SufficientStats("TG", panel.D0, vals, mults, meta=meta)
    vals, mults = _histogram(counts.sum(axis=1))
    dvals, dmults = _histogram(counts[counts > 0])
    return SufficientStats(
        "NB", panel.D0, vals, mults, daily_values=dvals, daily_mults=dmults, meta=meta
    )


def stats_from_series(series):
    """First-trigger (TG) statistics from aggregate data."""
    days = np.arange(1, series.D0 + 1)
    return SufficientStats("TG", series.D0, days, series.new_users_per_day)


def write_long_csv(panel, stream, day_offset=0):
    """Write a panel in long format; zero cells are omitted."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(LONG_HEADER)
    rows, cols = np.nonzero(panel.counts)
    for n, d in zip(rows.tolist(), cols.tolist()):
        writer.writerow([panel.user_ids[n], d + 1 + day_offset, int(panel.counts[n, d])])


def write_aggregate_csv(series, stream):
    writer = csv.writer(stream, lineterminator="\n")
    with_totals = series.total_triggers_per_day is not None
    writer.writerow(AGG_HEADER_TOTALS if with_totals else AGG_HEADER)
    for d in range(series.D0):
        row = [d + 1, int(series.new_users_per_day[d])]
        if with_totals:
            row.append(int(series.total_triggers_per_day[d]))
        writer.writerow(row)
