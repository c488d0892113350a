"""Monte Carlo batches of closed-loop trajectories from Haar-random initial states."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (ControlModel, IntegrationError, IntegratorOptions, classify_convergence,
                       integrate)
from .states import sample_isospectral

log = logging.getLogger(__name__)


@dataclass
class SampleResult:
    sample_id: int
    times: np.ndarray | None = None
    lyapunov: np.ndarray | None = None
    controls: np.ndarray | None = None
    dvdt: np.ndarray | None = None
    initial_state: np.ndarray | None = None
    final_state: np.ndarray | None = None
    final_target: np.ndarray | None = None
    verdict: str = "failed"
    slope: float = float("nan")
    stats: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def final_v(self) -> float:
        return float(self.lyapunov[-1]) if self.lyapunov is not None else float("nan")


def initial_state(model: ControlModel, seed: int, sample_id: int) -> np.ndarray:
    return sample_isospectral(model.rho_d0, (seed, sample_id))


def run_sample(model: ControlModel, seed: int, sample_id: int, opts: IntegratorOptions) -> SampleResult:
    rho0 = initial_state(model, seed, sample_id)
    try:
        tr = integrate(model, rho0, opts=opts)
    except (IntegrationError, ValueError) as exc:
        log.error("sample %d failed: %s", sample_id, exc)
        return SampleResult(sample_id, initial_state=rho0, error=str(exc))
    verdict, slope = classify_convergence(tr.times, tr.lyapunov)
    return SampleResult(
        sample_id=sample_id,
        times=tr.times,
        lyapunov=tr.lyapunov,
        controls=tr.controls,
        dvdt=tr.dvdt,
        initial_state=rho0,
        final_state=tr.final_state,
        final_target=tr.final_target,
        verdict=verdict,
        slope=slope,
        stats=tr.stats,
    )


def _run_star(args):
    return run_sample(*args)


def run_samples(model: ControlModel, n_samples: int, seed: int = 0,
                opts: IntegratorOptions | None = None, jobs: int = 1) -> list:
    """Results ordered by sample id regardless of ``jobs``."""
    opts = opts or IntegratorOptions()
    tasks = [(model, seed, i, opts) for i in range(n_samples)]
    if jobs > 1 and n_samples > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_star, tasks))
    return [_run_star(t) for t in tasks]


def verdict_counts(results) -> dict:
    counts = {"converged": 0, "flatlined": 0, "undecided": 0, "failed": 0}
    for r in results:
        counts[r.verdict] += 1
    return counts
