"""Censored survival data: records, risk sets, CSV I/O and simulation.

Indexing is 0-based everywhere in the library.  Reports that list subjects
say so explicitly when they switch to 1-based numbering.
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np


class DataError(ValueError):
    """Raised when survival data violates the input contract."""


class SurvivalRecord(NamedTuple):
    observed_time: float
    status: int
    covariates: tuple


def build_risk_sets(time, status, tau=None):
    """Distinct failure times and their risk sets.

    Ties among event times collapse to a single failure time (Breslow).

    Returns
    -------
    failure_times : (N,) array, strictly increasing
    risk_sets : list of index arrays, ``R_q = {i : Z_i >= t_q}``
    event_counts : (N,) int array, number of events at each failure time
    tie_flag : bool
    """
    failure_times, counts, tie_flag = _failure_times(time, status, tau)
    time = np.asarray(time, dtype=float)
    risk_sets = [np.flatnonzero(time >= t) for t in failure_times]
    return failure_times, risk_sets, counts, tie_flag


def _failure_times(time, status, tau=None):
    time = np.asarray(time, dtype=float)
    ev = np.asarray(status, dtype=int) == 1
    if tau is not None:
        ev &= time <= tau
    failure_times, counts = np.unique(time[ev], return_counts=True)
    return failure_times, counts.astype(int), bool(np.any(counts > 1))


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Immutable censored sample ``(Z_i, delta_i, X_i)``.

    Risk-set bookkeeping is precomputed.  ``order`` sorts subjects by observed
    time; the risk set of failure time ``q`` is ``order[risk_start[q]:]``.
    """

    time: np.ndarray
    status: np.ndarray
    covariates: np.ndarray
    tau: float
    bounds: tuple = (0.0, 1.0)
    failure_times: np.ndarray = field(init=False)
    event_counts: np.ndarray = field(init=False)
    tie_flag: bool = field(init=False)
    order: np.ndarray = field(init=False)
    risk_start: np.ndarray = field(init=False)

    def __post_init__(self):
        time = np.array(self.time, dtype=float)
        status = np.array(self.status, dtype=int)
        X = np.array(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if time.ndim != 1 or status.shape != time.shape or X.shape[0] != time.shape[0]:
            raise DataError("time, status and covariates must describe the same n subjects")
        if time.size == 0:
            raise DataError("no records")
        if np.any(~np.isfinite(time)) or np.any(time < 0):
            bad = int(np.flatnonzero(~(time >= 0))[0])
            raise DataError(f"row {bad}: observed time must be a finite nonnegative number")
        bad = np.flatnonzero((status != 0) & (status != 1))
        if bad.size:
            raise DataError(f"row {int(bad[0])}: status must be 0 or 1, got {status[bad[0]]}")
        lo, hi = self.bounds
        outside = np.argwhere((X < lo) | (X > hi) | ~np.isfinite(X))
        if outside.size:
            i, j = outside[0]
            raise DataError(
                f"row {int(i)}, covariate x{int(j) + 1}: value {X[i, j]} outside [{lo}, {hi}]"
            )
        if not (self.tau > 0):
            raise DataError("study end tau must be positive")
        for arr in (time, status, X):
            arr.setflags(write=False)
        ft, counts, ties = _failure_times(time, status, self.tau)
        order = np.argsort(time, kind="stable")
        start = np.searchsorted(time[order], ft, side="left")
        for name, value in [
            ("time", time), ("status", status), ("covariates", X),
            ("failure_times", ft), ("event_counts", counts), ("tie_flag", ties),
            ("order", order), ("risk_start", start),
        ]:
            object.__setattr__(self, name, value)
        if ft.size == 0:
            warnings.warn("dataset has no observed events (N = 0)", stacklevel=3)

    @classmethod
    def from_arrays(cls, time, status, covariates, tau=None, bounds=(0.0, 1.0)):
        time = np.asarray(time, dtype=float)
        status = np.asarray(status)
        if tau is None:
            events = time[np.asarray(status) == 1]
            tau = float(events.max()) if events.size else float(np.max(time, initial=0.0))
            if tau <= 0:
                tau = 1.0
        return cls(time, status, covariates, float(tau), tuple(bounds))

    @property
    def n(self) -> int:
        return self.time.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def N(self) -> int:
        """Number of distinct failure times."""
        return self.failure_times.shape[0]

    @property
    def n_events(self) -> int:
        return int(self.event_counts.sum())

    @property
    def no_events(self) -> bool:
        return self.N == 0

    @property
    def risk_sets(self) -> list:
        return [np.sort(self.order[s:]) for s in self.risk_start]

    @property
    def at_risk_any(self) -> np.ndarray:
        """Mask of subjects belonging to at least one risk set."""
        if self.N == 0:
            return np.zeros(self.n, dtype=bool)
        return self.time >= self.failure_times[0]

    @property
    def records(self) -> list:
        return [
            SurvivalRecord(float(t), int(s), tuple(float(v) for v in x))
            for t, s, x in zip(self.time, self.status, self.covariates)
        ]

    def subset(self, idx) -> "SurvivalDataset":
        idx = np.asarray(idx)
        return SurvivalDataset(self.time[idx], self.status[idx], self.covariates[idx],
                               self.tau, self.bounds)


def summarize_dataset(ds: SurvivalDataset) -> dict:
    if ds is None or ds.n == 0:
        raise DataError("no records")
    return {
        "n": ds.n,
        "N": ds.N,
        "events": ds.n_events,
        "censoring_rate": 1.0 - ds.n_events / ds.n,
        "min_time": float(ds.time.min()),
        "max_time": float(ds.time.max()),
        "tau": ds.tau,
        "tie_flag": ds.tie_flag,
        "covariate_min": ds.covariates.min(axis=0).tolist(),
        "covariate_max": ds.covariates.max(axis=0).tolist(),
    }


# --------------------------------------------------------------------------
# CSV input / output


def load_dataset(path, schema=None, tau=None, bounds=(0.0, 1.0)) -> SurvivalDataset:
    """Read ``time,status,x1,...,xp`` CSV into a validated dataset.

    ``schema`` optionally maps the canonical names ``time``, ``status`` and
    ``covariates`` (a list) to the file's column names.  A JSON sidecar next to
    the file (``<stem>.json``) supplies ``tau`` when present and not overridden.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    schema = dict(schema or {})
    with open(path, newline="", encoding="utf-8") as fh:
        # leading '#' lines carry provenance metadata
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("no records") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    tcol = schema.get("time", "time")
    scol = schema.get("status", "status")
    xcols = schema.get("covariates")
    if xcols is None:
        xcols = sorted((h for h in header if h.startswith("x") and h[1:].isdigit()),
                       key=lambda h: int(h[1:]))
    for col in [tcol, scol, *xcols]:
        if col not in header:
            raise DataError(f"missing column: {col}")
    if not xcols:
        raise DataError("missing column: x1")
    pos = [header.index(c) for c in [tcol, scol, *xcols]]
    if not rows:
        raise DataError("no records")
    data = np.empty((len(rows), len(pos)))
    for i, row in enumerate(rows):
        for k, c in enumerate(pos):
            try:
                data[i, k] = float(row[c])
            except (ValueError, IndexError):
                raise DataError(f"row {i}: non-numeric value in column {header[c]}") from None
    status = data[:, 1]
    if np.any((status != 0) & (status != 1)):
        bad = int(np.flatnonzero((status != 0) & (status != 1))[0])
        raise DataError(f"row {bad}: status must be 0 or 1, got {status[bad]:g}")
    if tau is None:
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            tau = json.loads(sidecar.read_text()).get("tau")
    return SurvivalDataset.from_arrays(data[:, 0], status.astype(int), data[:, 2:],
                                       tau=tau, bounds=bounds)


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def save_dataset(ds: SurvivalDataset, path, extra=None, comments=None):
    """Write the CSV plus a JSON sidecar ``{n, N, tau, tie_flag}``.

    ``comments`` (a mapping) is written as leading ``# key: value`` lines.
    """
    path = Path(path)
    header = ["time", "status"] + [f"x{j + 1}" for j in range(ds.p)]
    lines = [f"# {k}: {v}" for k, v in (comments or {}).items()] + [",".join(header)]
    for t, s, x in zip(ds.time, ds.status, ds.covariates):
        lines.append(",".join([repr(float(t)), str(int(s))] + [repr(float(v)) for v in x]))
    _atomic_write(path, "\n".join(lines) + "\n")
    meta = {"n": ds.n, "N": ds.N, "tau": ds.tau, "tie_flag": ds.tie_flag}
    meta.update(extra or {})
    _atomic_write(path.with_suffix(".json"), json.dumps(meta, indent=2, sort_keys=True))


# --------------------------------------------------------------------------
# Simulation


class BaselineHazard:
    """Baseline hazard ``lambda_0`` with cumulative ``Lambda_0``.

    When no closed-form inverse is given, ``Lambda_0^{-1}`` is evaluated by
    bisection to 1e-10 relative accuracy.
    """

    def __init__(self, hazard: Callable, cumulative: Callable, inverse: Callable | None = None):
        self.hazard = hazard
        self.cumulative = cumulative
        self._inverse = inverse

    def inverse_cumulative(self, y):
        y = np.asarray(y, dtype=float)
        if self._inverse is not None:
            return self._inverse(y)
        return _bisect_inverse(self.cumulative, y)


def _bisect_inverse(cum, y, rtol=1e-10):
    y = np.asarray(y, dtype=float)
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    for _ in range(200):
        short = cum(hi) < y
        if not short.any():
            break
        hi = np.where(short, hi * 2.0, hi)
    else:
        raise ValueError("cumulative baseline hazard is not invertible on the requested range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = cum(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= rtol * np.maximum(hi, 1e-300)):
            break
    return 0.5 * (lo + hi)


def constant_hazard(rate=1.0) -> BaselineHazard:
    return BaselineHazard(lambda t: np.full_like(np.asarray(t, float), rate),
                          lambda t: rate * np.asarray(t, float),
                          lambda y: np.asarray(y, float) / rate)


def weibull_hazard(shape=1.5, scale=1.0) -> BaselineHazard:
    return BaselineHazard(
        lambda t: shape / scale * (np.asarray(t, float) / scale) ** (shape - 1),
        lambda t: (np.asarray(t, float) / scale) ** shape,
        lambda y: scale * np.asarray(y, float) ** (1.0 / shape),
    )


@dataclass
class TrueModel:
    """Hazard ``lambda_0(t) * exp{g(x)}`` plus a censoring law.

    ``risk_function`` maps an ``(n, p)`` covariate array to ``n`` log-risks.
    ``censoring`` is ``None`` (no random censoring) or a callable
    ``(rng, n) -> times``.
    """

    baseline: BaselineHazard = field(default_factory=constant_hazard)
    risk_function: Callable = None
    censoring: Callable | None = None

    def g(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.risk_function is None:
            return np.zeros(X.shape[0])
        return np.asarray(self.risk_function(X), dtype=float)


def exponential_censoring(rate):
    return lambda rng, n: rng.exponential(1.0 / rate, size=n)


def uniform_covariates(lo=0.0, hi=1.0):
    return lambda rng, n, p: rng.uniform(lo, hi, size=(n, p))


@dataclass
class SimulationConfig:
    n: int
    p: int
    seed: int = 0
    true_model: TrueModel = field(default_factory=TrueModel)
    covariate_law: Callable | None = None
    tau: float | None = None
    bounds: tuple = (0.0, 1.0)

    def __post_init__(self):
        if int(self.n) < 2:
            raise ValueError("n must be at least 2")
        if int(self.p) < 1:
            raise ValueError("p must be positive")


def simulate_cox_sample(config: SimulationConfig) -> SurvivalDataset:
    """Draw a censored sample by inverse-transform sampling of ``Lambda_0``.

    ``T = Lambda_0^{-1}(E exp{-g(X)})`` with ``E ~ Exp(1)``.  Random censoring
    is applied first, then administrative censoring at ``tau``.
    """
    rng = np.random.default_rng(config.seed)
    law = config.covariate_law or uniform_covariates(*config.bounds)
    X = np.asarray(law(rng, config.n, config.p), dtype=float)
    model = config.true_model
    g = model.g(X)
    E = rng.exponential(size=config.n)
    T = model.baseline.inverse_cumulative(E * np.exp(-g))
    if model.censoring is not None:
        D = np.asarray(model.censoring(rng, config.n), dtype=float)
    else:
        D = np.full(config.n, np.inf)
    Z = np.minimum(T, D)
    status = (T <= D).astype(int)
    tau = config.tau
    if tau is not None and math.isfinite(tau):
        late = Z > tau
        Z = np.where(late, tau, Z)
        status = np.where(late, 0, status)
    return SurvivalDataset.from_arrays(Z, status, X, tau=tau, bounds=config.bounds)


def replicate_seed(seed: int, stream: int) -> int:
    """Seed of replicate ``stream``: ``seed + stream``."""
    return int(seed) + int(stream)


def records_to_dataset(records: Sequence[SurvivalRecord], tau=None, bounds=(0.0, 1.0)):
    if not records:
        raise DataError("no records")
    return SurvivalDataset.from_arrays(
        [r.observed_time for r in records], [r.status for r in records],
        [list(r.covariates) for r in records], tau=tau, bounds=bounds,
    )
