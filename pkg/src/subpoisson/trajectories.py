"""Quantum-jump rate chain over atom number and its ensemble statistics.

Each trajectory draws a Poisson initial atom number and one static laser
shift, then removes atoms one at a time with exponential waiting times at
the tabulated rates ``Gamma_N(delta_l)``.  Every trajectory owns an RNG
stream derived from ``(seed, trajectory index)``, and the reduction runs in
index order, so results do not depend on how the work is scheduled.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .dynamics import LossRateTable, SolverSettings, build_rate_table, make_delta_l_grid
from .errors import DomainError, HorizonTooShortError
from .params import NoiseModel, PhysicalParams

log = logging.getLogger(__name__)

DEFAULT_HORIZON = 500e-6
DEFAULT_DT_OUT = 1e-6
DEFAULT_STABILIZATION_EPS = 0.1


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams
    noise: NoiseModel
    trajectories: int = 20000
    horizon: float = DEFAULT_HORIZON
    dt_out: float = DEFAULT_DT_OUT
    seed: int = 0
    grid_points: int = 25
    n_cap: int | None = None
    stabilization_eps: float = DEFAULT_STABILIZATION_EPS
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.trajectories < 1:
            raise DomainError("need at least one trajectory")
        if not self.horizon > 0:
            raise DomainError("horizon must be > 0")
        if not 0 < self.dt_out <= self.horizon:
            raise DomainError("dt_out must lie in (0, horizon]")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")
        floor = self.min_cap(self.noise.nbar_initial)
        if self.n_cap is None:
            object.__setattr__(self, "n_cap", max(floor, self.params.n_target))
        elif self.n_cap < floor:
            raise DomainError(
                f"n_cap = {self.n_cap} is below nbar + 6 sqrt(nbar) = {floor}"
            )

    @staticmethod
    def min_cap(nbar):
        return math.ceil(nbar + 6.0 * math.sqrt(nbar))

    def time_grid(self):
        steps = int(round(self.horizon / self.dt_out))
        return self.dt_out * np.arange(steps + 1)

    def delta_l_grid(self):
        return make_delta_l_grid(self.noise.sigma_delta_l, self.grid_points)

    def with_sigma(self, sigma):
        return replace(self, noise=replace(self.noise, sigma_delta_l=sigma))


@dataclass(frozen=True)
class TrajectoryRecord:
    index: int
    n0: int
    delta_l: float
    event_times: np.ndarray
    n_final: int

    def n_at(self, t):
        """Atom number at time(s) ``t``; an event at exactly ``t`` has happened."""
        return self.n0 - np.searchsorted(self.event_times, t, side="right")


@dataclass(frozen=True)
class EnsembleTimeSeries:
    times: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    fano: np.ndarray
    trajectories: int
    seed: int
    failures: int = 0

    def min_variance(self):
        """``(variance, time, index)`` at the minimum of the variance curve."""
        i = int(np.argmin(self.var))
        return float(self.var[i]), float(self.times[i]), i


@dataclass
class Ensemble:
    series: EnsembleTimeSeries
    records: list
    failures: list
    table: LossRateTable


def trajectory_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def sample_initial_n(rng, nbar):
    """Poisson-distributed initial atom number."""
    if not nbar > 0:
        raise DomainError("nbar must be > 0")
    return int(rng.poisson(nbar))


def sample_laser_shift(rng, sigma):
    """Static Gaussian laser shift for one trajectory (rad/s)."""
    if sigma < 0:
        raise DomainError("sigma must be >= 0")
    if sigma == 0:
        return 0.0
    return float(rng.normal(0.0, sigma))


def _uniform_open(rng, size):
    r = rng.random(size)
    while np.any(r == 0.0):
        zero = r == 0.0
        r[zero] = rng.random(int(zero.sum()))
    return r


def jump_chain(rates, n0, rng, horizon):
    """Loss-event times for a chain starting at ``n0`` with ``rates[N] = Gamma_N``.

    The waiting time out of ``N`` is ``-log(r_N)/Gamma_N`` with ``r_N`` uniform
    in ``(0, 1)``.  Events past ``horizon`` are dropped; a zero rate stops the
    chain.
    """
    if n0 == 0:
        return np.empty(0)
    r = _uniform_open(rng, n0)
    gam = np.asarray(rates[n0:0:-1], dtype=float)
    with np.errstate(divide="ignore"):
        waits = np.where(gam > 0, -np.log(r) / np.where(gam > 0, gam, 1.0), np.inf)
    times = np.cumsum(waits)
    return times[times <= horizon]


def sample_trajectory(rate_table, n0, delta_l, rng, horizon, index=0):
    """Sample one jump-chain trajectory from the rate table."""
    if n0 > rate_table.n_max:
        raise DomainError(f"N0 = {n0} exceeds the rate table cap {rate_table.n_max}")
    if n0 < 0:
        raise DomainError("N0 must be >= 0")
    rates = rate_table.rates_at(delta_l)
    times = jump_chain(rates, n0, rng, horizon)
    return TrajectoryRecord(index, n0, delta_l, times, n0 - times.size)


def _simulate_chunk(args):
    table, nbar, sigma, seed, horizon, indices = args
    out = []
    for idx in indices:
        rng = trajectory_rng(seed, idx)
        n0 = sample_initial_n(rng, nbar)
        dl = sample_laser_shift(rng, sigma)
        try:
            out.append(sample_trajectory(table, n0, dl, rng, horizon, index=idx))
        except DomainError as exc:
            out.append((idx, str(exc)))
    return out


def _chunks(n, parts):
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def aggregate(records, times, seed, failures=0):
    """Exact mean and population variance of ``N(t)`` over the records."""
    m = len(records)
    if m == 0:
        raise DomainError("no successful trajectories to aggregate")
    s1 = np.zeros(times.size, dtype=np.int64)
    s2 = np.zeros(times.size, dtype=np.int64)
    for rec in records:
        n = rec.n_at(times).astype(np.int64)
        s1 += n
        s2 += n * n
    mean = s1 / m
    # integer numerator keeps the variance free of cancellation
    var = (m * s2 - s1 * s1) / float(m) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        fano = np.where(mean > 0, var / np.where(mean > 0, mean, 1.0), np.nan)
    return EnsembleTimeSeries(times, mean, var, fano, m, seed, failures)


def run_ensemble(config, table=None, threads=1):
    """Simulate ``config.trajectories`` jump chains and aggregate ``N(t)``."""
    if table is None:
        table = build_rate_table(
            config.params, config.n_cap, config.delta_l_grid(), config.solver, threads
        )
    times = config.time_grid()
    parts = max(1, threads) * 4 if threads > 1 else 1
    tasks = [
        (table, config.noise.nbar_initial, config.noise.sigma_delta_l, config.seed, config.horizon, idx)
        for idx in _chunks(config.trajectories, parts)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = [r for chunk in pool.map(_simulate_chunk, tasks) for r in chunk]
    else:
        results = [r for t in tasks for r in _simulate_chunk(t)]
    records = [r for r in results if isinstance(r, TrajectoryRecord)]
    failures = [r for r in results if not isinstance(r, TrajectoryRecord)]
    if failures:
        log.warning("%d of %d trajectories failed; first: %s", len(failures), len(results), failures[0][1])
    series = aggregate(records, times, config.seed, len(failures))
    return Ensemble(series, records, failures, table)


def stabilization_time(series, n_target, eps=DEFAULT_STABILIZATION_EPS):
    """First grid time at which the mean atom number is within ``eps`` of the target."""
    if series.times.size == 0:
        raise DomainError("empty series")
    hit = np.flatnonzero(series.mean <= n_target + eps)
    if hit.size == 0:
        raise HorizonTooShortError(
            f"mean atom number stayed above {n_target + eps} up to t = {series.times[-1]:.6g} s"
        )
    return float(series.times[hit[0]])


@dataclass(frozen=True)
class Histogram:
    time: float
    n: np.ndarray
    p_empirical: np.ndarray
    p_poisson: np.ndarray

    @property
    def mean(self):
        return float(self.n @ self.p_empirical)

    @property
    def variance(self):
        return float(((self.n - self.mean) ** 2) @ self.p_empirical)


def histogram_at(records, t):
    """Empirical atom-number PMF at ``t`` and the Poisson PMF of equal mean."""
    if not records:
        raise DomainError("no records")
    counts = np.bincount(np.array([int(rec.n_at(t)) for rec in records]))
    p_emp = counts / counts.sum()
    mean = float(np.arange(p_emp.size) @ p_emp)
    # extend the support until the Poisson tail is negligible
    n_hi = max(p_emp.size - 1, int(stats.poisson.isf(1e-16, mean)) + 1 if mean > 0 else 0)
    n = np.arange(n_hi + 1)
    p_emp = np.pad(p_emp, (0, n_hi + 1 - p_emp.size))
    p_poi = stats.poisson.pmf(n, mean) if mean > 0 else (n == 0).astype(float)
    return Histogram(float(t), n, p_emp, p_poi)


@dataclass(frozen=True)
class SweepPoint:
    sigma: float
    series: EnsembleTimeSeries
    min_var: float
    t_min: float
    fano_min: float


def noise_sweep(base_config, sigmas, threads=1, tables=None):
    """One ensemble per laser-noise level, all with the base seed.

    ``tables`` may map sigma to a prebuilt :class:`LossRateTable`.
    """
    tables = tables or {}
    out = []
    for sigma in sigmas:
        if sigma < 0:
            raise DomainError("sigma must be >= 0")
        cfg = base_config.with_sigma(sigma)
        ens = run_ensemble(cfg, table=tables.get(sigma), threads=threads)
        v, t, i = ens.series.min_variance()
        out.append(SweepPoint(sigma, ens.series, v, t, float(ens.series.fano[i])))
    return out
