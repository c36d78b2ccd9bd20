"""Seeded multi-run experiment execution and aggregation.

Run r of an experiment draws all of its randomness from its own
substream: a counter-based Philox generator keyed by mixing
(master_seed, r). Aggregate output is therefore a pure function of the
experiment spec, and adding runs never perturbs existing ones.

Execution detail: every implemented optimizer is strictly elementwise in
its state, so R independent runs of a dim-d problem are stepped together
as one stacked (R * d)-coordinate vector. Per-run noise is pre-drawn in
bulk from each run's own generator before stepping, which makes the
stacked trajectories bit-identical to stepping runs one at a time (a
property the test suite checks).

Diagnostics recorded per run and step: loss, the cumulative adaptivity
sums S1 = sum_t ||g_t / sqrt(v_t)||^2 and
S2 = sum_t ||1/sqrt(v_t) - 1/sqrt(v_{t-1})||_1 (bias-corrected v, first
S2 term defined as 0, constant learning rate factored out), the mean
absolute gradient move, and the spread of the averaging coefficient.
A run whose iterate goes non-finite or beyond |theta| = 1e12 is flagged
as failed and its record is truncated at the last healthy step.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .optimizers import OptimizerConfig, init_state, step

DIVERGE_LIMIT = 1e12

BASE_SERIES = ("loss", "s1", "s2", "step_size", "beta_mean", "beta_min", "beta_max")


def substream(master_seed: int, run_index: int) -> np.random.Generator:
    """Independent per-run generator; Philox keyed by (master_seed, run)."""
    seq = np.random.SeedSequence([int(master_seed), int(run_index)])
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a problem, an optimizer, a horizon, and seeding."""

    problem: object
    config: OptimizerConfig
    horizon: int
    n_runs: int = 100
    master_seed: int = 0
    record_every: int = 1

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.n_runs < 1:
            raise ValueError(f"n_runs must be >= 1, got {self.n_runs}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")


@dataclass
class RunRecord:
    """Diagnostics of a single run at its recorded steps.

    Arrays all share the length of ``steps``; a failed run is truncated
    at the last step before failure and flagged, with ``failed_at`` the
    step index that produced a non-finite or runaway iterate.
    """

    run_index: int
    steps: np.ndarray
    loss: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    step_size: np.ndarray
    beta_mean: np.ndarray
    beta_min: np.ndarray
    beta_max: np.ndarray
    theta_final: np.ndarray
    failed: bool = False
    failed_at: int | None = None
    abs_theta: np.ndarray | None = None

    def series(self) -> dict[str, np.ndarray]:
        out = {name: getattr(self, name) for name in BASE_SERIES}
        if self.abs_theta is not None:
            out["abs_theta"] = self.abs_theta
        return out


@dataclass
class AggregateRecord:
    """Pointwise cross-run statistics of every RunRecord series.

    At each recorded step the median, standard error of the mean
    (sample standard deviation over sqrt of the contributing run count),
    and interquartile range are taken over the runs still alive there.
    ``n_failed[k]`` counts runs that failed at or before ``steps[k]``.
    """

    steps: np.ndarray
    median: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    iqr: dict[str, np.ndarray]
    n_alive: np.ndarray
    n_failed: np.ndarray
    n_runs: int

    @property
    def total_failed(self) -> int:
        return int(self.n_failed[-1]) if len(self.n_failed) else self.n_runs

    def final(self, name: str) -> float:
        """Median of a series at the last recorded step."""
        return float(self.median[name][-1])


def _recorded_steps(horizon: int, record_every: int) -> np.ndarray:
    steps = set(range(record_every, horizon + 1, record_every))
    steps.update((1, horizon))
    return np.array(sorted(steps))


def _run_batch(spec: ExperimentSpec, run_indices: list[int]) -> list[RunRecord]:
    """Step a block of runs together as one stacked coordinate vector."""
    problem = spec.problem
    cfg = spec.config
    horizon = spec.horizon
    n_runs = len(run_indices)
    dim = problem.dim
    scalar_problem = dim == 1

    rngs = [substream(spec.master_seed, r) for r in run_indices]
    theta = np.stack([problem.init_theta(rng) for rng in rngs]).reshape(n_runs * dim)
    noises = [problem.draw_noise(rng, horizon) for rng in rngs]
    if isinstance(noises[0], np.ndarray):
        noise_at = np.stack(noises, axis=1)  # (horizon, n_runs, ...)
    else:
        noise_at = None

    state = init_state(cfg, n_runs * dim)
    alive = np.ones(n_runs, dtype=bool)
    failed_at = np.full(n_runs, -1)
    s1 = np.zeros(n_runs)
    s2 = np.zeros(n_runs)
    prev_inv_sqrt_v = None
    record_mask = np.zeros(horizon + 1, dtype=bool)
    record_mask[_recorded_steps(horizon, spec.record_every)] = True
    rows: dict[str, list] = {r: [] for r in run_indices}

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for t in range(1, horizon + 1):
            noise_t = noise_at[t - 1] if noise_at is not None else [n[t - 1] for n in noises]
            g = problem.grad_stacked(theta.reshape(n_runs, dim), noise_t).reshape(-1)
            bad_grad = ~np.isfinite(g.reshape(n_runs, dim)).all(axis=1)
            newly = alive & bad_grad
            if newly.any():
                failed_at[newly] = t
                alive &= ~newly
            if not alive.all():
                # dead runs keep stepping on zero gradients so the live
                # ones can stay stacked; their rows are never recorded
                g = np.where(np.repeat(alive, dim), g, 0.0)

            theta, state, report = step(theta, g, state, cfg, t)

            theta2 = theta.reshape(n_runs, dim)
            runaway = ~np.isfinite(theta2).all(axis=1) | (np.abs(theta2).max(axis=1) > DIVERGE_LIMIT)
            newly = alive & runaway
            if newly.any():
                failed_at[newly] = t
                alive &= ~newly

            v_eff = report.v_effective.reshape(n_runs, dim)
            inv_sqrt_v = 1.0 / np.sqrt(v_eff)
            contrib = g.reshape(n_runs, dim) ** 2 / v_eff
            contrib[np.isnan(contrib)] = 0.0  # 0 gradient with 0 variance
            s1 = s1 + contrib.sum(axis=1)
            if prev_inv_sqrt_v is not None:
                s2 = s2 + np.abs(inv_sqrt_v - prev_inv_sqrt_v).sum(axis=1)
            prev_inv_sqrt_v = inv_sqrt_v

            if record_mask[t] and alive.any():
                loss = problem.loss_stacked(theta2)
                move = np.abs(report.gradient_move.reshape(n_runs, dim))
                if np.isscalar(report.beta_used) or report.beta_used.ndim == 0:
                    bmean = bmin = bmax = np.full(n_runs, float(report.beta_used))
                else:
                    beta2 = report.beta_used.reshape(n_runs, dim)
                    bmean, bmin, bmax = beta2.mean(axis=1), beta2.min(axis=1), beta2.max(axis=1)
                for k, r in enumerate(run_indices):
                    if alive[k]:
                        rows[r].append(
                            (t, loss[k], s1[k], s2[k], move[k].mean(), bmean[k], bmin[k], bmax[k],
                             abs(theta2[k, 0]) if scalar_problem else np.nan)
                        )

    theta_final = theta.reshape(n_runs, dim)
    records = []
    for k, r in enumerate(run_indices):
        data = np.array(rows[r], dtype=np.float64).reshape(-1, 9)
        records.append(
            RunRecord(
                run_index=r,
                steps=data[:, 0].astype(int),
                loss=data[:, 1],
                s1=data[:, 2],
                s2=data[:, 3],
                step_size=data[:, 4],
                beta_mean=data[:, 5],
                beta_min=data[:, 6],
                beta_max=data[:, 7],
                theta_final=theta_final[k].copy(),
                failed=bool(failed_at[k] >= 0),
                failed_at=int(failed_at[k]) if failed_at[k] >= 0 else None,
                abs_theta=data[:, 8] if scalar_problem else None,
            )
        )
    return records


def run_single(spec: ExperimentSpec, run_index: int) -> RunRecord:
    """Execute one run of the experiment by itself."""
    return _run_batch(spec, [run_index])[0]


def aggregate(records: list[RunRecord], n_runs: int) -> AggregateRecord:
    """Pointwise median / stderr / IQR over runs alive at each step."""
    names = list(records[0].series()) if records else list(BASE_SERIES)
    longest = max(records, key=lambda r: len(r.steps), default=None)
    steps = longest.steps if longest is not None else np.array([], dtype=int)
    n_cols = len(steps)
    median: dict[str, np.ndarray] = {}
    stderr: dict[str, np.ndarray] = {}
    iqr: dict[str, np.ndarray] = {}
    if n_cols == 0:
        empty = np.array([])
        for name in names:
            median[name], stderr[name], iqr[name] = empty, empty, empty
        return AggregateRecord(steps=steps, median=median, stderr=stderr, iqr=iqr,
                               n_alive=np.array([], dtype=int), n_failed=np.array([], dtype=int),
                               n_runs=n_runs)
    # records are truncated prefixes of one shared step grid, so NaN
    # padding plus nan-aware reductions aggregates exactly the alive runs
    n_alive = np.zeros(n_cols, dtype=int)
    padded = {name: np.full((len(records), n_cols), np.nan) for name in names}
    for i, rec in enumerate(records):
        k = len(rec.steps)
        n_alive[:k] += 1
        for name, values in rec.series().items():
            padded[name][i, :k] = values
    with np.errstate(invalid="ignore"):
        for name in names:
            block = padded[name]
            median[name] = np.nanmedian(block, axis=0)
            counts = np.maximum(n_alive, 1)
            sd = np.nanstd(block, axis=0, ddof=1) if len(records) > 1 else np.zeros(n_cols)
            sd = np.where(n_alive > 1, sd, 0.0)
            stderr[name] = sd / np.sqrt(counts)
            q75 = np.nanpercentile(block, 75, axis=0)
            q25 = np.nanpercentile(block, 25, axis=0)
            iqr[name] = q75 - q25
    return AggregateRecord(
        steps=steps,
        median=median,
        stderr=stderr,
        iqr=iqr,
        n_alive=n_alive,
        n_failed=n_runs - n_alive,
        n_runs=n_runs,
    )


def run_experiment(
    spec: ExperimentSpec, jobs: int = 1
) -> tuple[AggregateRecord, list[RunRecord]]:
    """Execute all runs of an experiment and aggregate them.

    jobs > 1 splits runs over processes; per-run seeding makes the result
    independent of the split.
    """
    indices = list(range(spec.n_runs))
    if jobs <= 1 or spec.n_runs == 1:
        records = _run_batch(spec, indices)
    else:
        jobs = min(jobs, spec.n_runs)
        chunks = [list(chunk) for chunk in np.array_split(indices, jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_batch, [spec] * len(chunks), chunks))
        records = [rec for part in parts for rec in part]
    return aggregate(records, spec.n_runs), records


@dataclass
class SweepEntry:
    """Outcome of one configuration inside a sweep."""

    config: OptimizerConfig
    eta: float
    beta: float | None
    aggregate: AggregateRecord
    final_median_loss: float
    final_stderr_loss: float
    n_failed: int


@dataclass
class SweepResult:
    entries: list[SweepEntry]
    best: SweepEntry


def lr_sweep(
    spec: ExperimentSpec,
    etas: list[float],
    betas: list[float] | None = None,
    jobs: int = 1,
) -> SweepResult:
    """Grid-search eta (optionally crossed with beta) for one algorithm.

    Best is the configuration with the lowest final median loss; exact
    ties resolve toward the smaller eta, then the smaller beta. A
    configuration whose runs all failed scores +inf.
    """
    entries = []
    for eta in etas:
        for beta in betas if betas is not None else [None]:
            cfg = replace(spec.config, eta=eta)
            if beta is not None:
                cfg = replace(cfg, beta=beta)
            agg, _ = run_experiment(replace(spec, config=cfg), jobs=jobs)
            final = agg.final("loss") if len(agg.steps) else float("inf")
            if np.isnan(final):
                final = float("inf")
            entries.append(
                SweepEntry(
                    config=cfg,
                    eta=eta,
                    beta=beta,
                    aggregate=agg,
                    final_median_loss=final,
                    final_stderr_loss=float(agg.stderr["loss"][-1]) if len(agg.steps) else float("nan"),
                    n_failed=agg.total_failed,
                )
            )
    best = min(entries, key=lambda e: (e.final_median_loss, e.eta, e.beta if e.beta is not None else 0.0))
    return SweepResult(entries=entries, best=best)
