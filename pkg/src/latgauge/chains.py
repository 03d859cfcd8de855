"""Multi-chain Monte Carlo driver shared by the Yang-Mills and sigma models.

A chain job is a picklable callable ``job(chain_index, rng) -> ChainTrace``.
Chains own their state and generator; the aggregator only sees finished
traces, so running them in worker processes gives bit-identical results.
"""
from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamples
from .seeding import derive_chain_seed
from .stats import MIN_SAMPLES, Estimate, estimate_series
from .ym import GaugeField, YMParams, YMSampler

WORKERS_ENV = "LATGAUGE_WORKERS"


@dataclass(frozen=True)
class ChainConfig:
    """Run length and seeding for a set of independent chains.

    ``burn_in`` defaults to 20% of ``sweeps``; measurements are taken on every
    ``thinning``-th sweep after burn-in.
    """

    sweeps: int
    burn_in: int | None = None
    thinning: int = 1
    n_chains: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.sweeps // 5)
        if self.sweeps < 1 or self.thinning < 1 or self.n_chains < 1 or self.burn_in < 0:
            raise ValueError(f"invalid chain config {self}")
        if self.sweeps <= self.burn_in:
            raise ValueError("sweeps must exceed burn_in")

    @property
    def n_measurements(self) -> int:
        """Measurements per chain."""
        return -(-(self.sweeps - self.burn_in) // self.thinning)

    def measured_sweeps(self) -> np.ndarray:
        return np.arange(self.burn_in, self.sweeps, self.thinning, dtype=np.int64)

    def check_budget(self, min_samples: int = MIN_SAMPLES) -> None:
        total = self.n_measurements * self.n_chains
        if total < min_samples:
            raise InsufficientSamples(f"{total} post-burn-in measurements, need at least {min_samples}")

    def to_dict(self) -> dict:
        return {"sweeps": self.sweeps, "burn_in": self.burn_in, "thinning": self.thinning,
                "n_chains": self.n_chains, "seed": self.seed}


@dataclass
class ChainTrace:
    """Per-chain measurements: ``values`` has shape ``(n_measurements, n_obs)``."""

    sweeps: np.ndarray
    values: np.ndarray
    acceptance: float = 1.0


@dataclass
class Trace:
    """Aggregated measurements of all chains: ``values[chain, measurement, obs]``."""

    sweeps: np.ndarray
    values: np.ndarray
    acceptance: np.ndarray

    @classmethod
    def merge(cls, traces: list[ChainTrace]) -> "Trace":
        return cls(traces[0].sweeps, np.stack([t.values for t in traces]),
                   np.array([t.acceptance for t in traces]))

    def estimates(self) -> list[Estimate]:
        return [estimate_series(self.values[:, :, k]) for k in range(self.values.shape[2])]


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_chains(job, n_chains: int, seed: int, workers: int | None = None) -> list[ChainTrace]:
    """Run ``job`` for chains ``0..n_chains-1`` with derived seeds, in order."""
    workers = default_workers() if workers is None else workers
    if workers <= 1 or n_chains == 1:
        return [job(i, derive_chain_seed(seed, i)) for i in range(n_chains)]
    with ProcessPoolExecutor(max_workers=min(workers, n_chains)) as pool:
        futures = [pool.submit(job, i, derive_chain_seed(seed, i)) for i in range(n_chains)]
        return [f.result() for f in futures]


# --- Yang-Mills chains ---------------------------------------------------------


def _ym_chain(params: YMParams, observable, cfg: ChainConfig, method: str, start: str,
              chain_index: int, rng: np.random.Generator) -> ChainTrace:
    lat = params.lattice
    field = GaugeField.haar(lat, params.spec, rng) if start == "hot" else GaugeField.identity(lat, params.spec)
    sampler = YMSampler(params, method)
    for _ in range(cfg.burn_in):
        sampler.tune(sampler.sweep(field, rng))
    sweeps = cfg.measured_sweeps()
    rows = []
    acc_total = 0.0
    next_measure = 0
    for s in range(cfg.burn_in, cfg.sweeps):
        acc_total += sampler.sweep(field, rng)
        if next_measure < sweeps.size and s == sweeps[next_measure]:
            rows.append(np.asarray(observable(field, params), dtype=np.complex128).ravel())
            next_measure += 1
    return ChainTrace(sweeps, np.array(rows), acc_total / (cfg.sweeps - cfg.burn_in))


def sample(observable, params: YMParams, cfg: ChainConfig, method: str = "auto", start: str = "cold",
           workers: int | None = None) -> Trace:
    """Measure ``observable(field, params)`` (an array) along every chain."""
    cfg.check_budget()
    job = functools.partial(_ym_chain, params, observable, cfg, method, start)
    return Trace.merge(run_chains(job, cfg.n_chains, cfg.seed, workers))


def estimate(observable, params: YMParams, cfg: ChainConfig, method: str = "auto", workers: int | None = None):
    """Pooled Estimate for each component of the observable.

    A single-component observable returns one Estimate, otherwise a list.

    Raises
    ------
    InsufficientSamples
        If the chains yield fewer than 100 post-burn-in measurements.
    """
    est = sample(observable, params, cfg, method, workers=workers).estimates()
    return est[0] if len(est) == 1 else est


def combined_stderr(a: Estimate, b: Estimate) -> float:
    return math.hypot(a.stderr, b.stderr)
