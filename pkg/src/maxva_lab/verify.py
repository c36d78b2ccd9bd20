"""Drivers that pit the production code against the oracles.

Each suite draws a randomized battery of cases, compares the fast
implementation with its independent counterpart from :mod:`oracle`, and
returns a summary. The CLI and the acceptance tests both run these.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .maxva import BetaBounds, MaxVAState, compute_beta_raw
from .optimizers import ALGORITHMS, LRSchedule, OptimizerConfig, init_state, step
from .toyml import MLPShape, logistic_loss_grad, mlp_loss_grad


@dataclass
class SuiteResult:
    """Outcome of one verification suite."""

    name: str
    passed: bool
    n_cases: int
    worst: float
    detail: str = ""
    failures: list = field(default_factory=list)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = f"suite {self.name}: {status} (cases={self.n_cases}, worst={self.worst:.3e})"
        if self.detail:
            line += f" {self.detail}"
        if self.failures:
            line += f"\n  first failure: {self.failures[0]}"
        return line


def verify_beta_oracle(
    n_tuples: int = 10_000, grid_size: int = 10_000, seed: int = 101
) -> SuiteResult:
    """Closed-form coefficient versus brute-force grid maximization.

    For random (w, u, v, g) tuples the closed-form maximizer, clamped
    into the searched window, must sit within one grid spacing of the
    grid argmax, and no grid point may beat the closed-form variance
    estimate by more than 1e-10 (the closed form may beat the grid by
    the quadratic resolution gap; that is expected of an exact argmax).
    """
    rng = np.random.default_rng(seed)
    worst_loc = 0.0
    worst_gap = 0.0
    failures = []
    for _ in range(n_tuples):
        w = rng.uniform(0.01, 1.0)
        u = rng.uniform(-10.0, 10.0)
        v = u * u + rng.uniform(0.0, 10.0)
        g = rng.uniform(-10.0, 10.0)
        upper = oracle.beta_search_upper(w)
        res = upper / grid_size
        beta_grid, sigma_grid = oracle.beta_grid_argmax(g, u, v, w, grid_size)
        state = MaxVAState(
            u_tilde=np.array([u * w]), v_tilde=np.array([v * w]), w=np.array([w]), t=1
        )
        beta_closed = float(compute_beta_raw(np.array([g]), state)[0])
        beta_closed = min(max(beta_closed, res), upper)
        sigma_closed = float(oracle.sigma_sq_one_step(g, u, v, w, np.array([beta_closed]))[0])
        loc_err = abs(beta_closed - beta_grid)
        gap = sigma_grid - sigma_closed  # positive iff the grid found something better
        worst_loc = max(worst_loc, loc_err)
        worst_gap = max(worst_gap, gap)
        if loc_err > res + 1e-9 or gap > 1e-10:
            failures.append((w, u, v, g, beta_closed, beta_grid, loc_err, gap))
    return SuiteResult(
        name="beta-oracle",
        passed=not failures,
        n_cases=n_tuples,
        worst=worst_loc,
        detail=f"worst grid-over-closed gap={worst_gap:.3e}",
        failures=failures[:5],
    )


def _random_config(algorithm: str, rng: np.random.Generator) -> OptimizerConfig:
    return OptimizerConfig(
        algorithm=algorithm,
        eta=float(10 ** rng.uniform(-3, -0.5)),
        schedule=LRSchedule(),
        alpha=float(rng.choice([0.0, 0.9, rng.uniform(0.0, 0.99)])),
        beta=float(rng.uniform(0.5, 0.999)),
        bounds=BetaBounds(
            beta_lower=float(rng.uniform(0.3, 0.6)),
            beta_upper=float(rng.uniform(0.9, 1.0)),
        ),
        lam=float(rng.choice([0.0, 0.0, 0.01])),
        amsgrad=bool(rng.random() < 0.3) if algorithm != "sgd" else False,
        momentum=float(rng.uniform(0.0, 0.95)),
    )


def verify_trajectories(
    n_traces: int = 100, n_steps: int = 10, seed: int = 202
) -> SuiteResult:
    """Production stepper versus plain-Python reference, every algorithm.

    Scalar traces with randomized configs and gradients must agree to
    1e-12 relative at every step.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = []
    n_cases = 0
    for algorithm in ALGORITHMS:
        for _ in range(n_traces):
            n_cases += 1
            cfg = _random_config(algorithm, rng)
            grads = rng.standard_normal(n_steps) * 10 ** rng.uniform(-1, 1)
            theta0 = float(rng.standard_normal())
            ref = oracle.reference_trajectory(algorithm, cfg, grads, theta0)
            theta = np.array([theta0])
            state = init_state(cfg, 1)
            prod = np.empty(n_steps)
            for t, g in enumerate(grads, start=1):
                theta, state, _ = step(theta, np.array([g]), state, cfg, t)
                prod[t - 1] = theta[0]
            err = float(np.max(np.abs(prod - ref) / np.maximum(1.0, np.abs(ref))))
            worst = max(worst, err)
            if err > 1e-12:
                failures.append((algorithm, cfg.eta, cfg.alpha, cfg.beta, err))
    return SuiteResult(
        name="trajectories", passed=not failures, n_cases=n_cases, worst=worst,
        failures=failures[:5],
    )


def verify_gradients(n_instances: int = 100, seed: int = 303) -> SuiteResult:
    """Hand-coded gradients versus central finite differences.

    Random logistic and tanh-network instances; worst relative infinity-
    norm error must stay below 1e-6.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = []
    n_cases = 0
    for kind in ("logistic", "mlp"):
        for _ in range(n_instances):
            n_cases += 1
            n_feat = int(rng.integers(2, 5))
            n_batch = int(rng.integers(4, 33))
            X = rng.standard_normal((n_batch, n_feat))
            y = rng.integers(0, 2, size=n_batch).astype(float)
            if kind == "logistic":
                params = rng.standard_normal(n_feat + 1)
                loss_fn = lambda p: logistic_loss_grad(p, X, y)[0]
                grad = logistic_loss_grad(params, X, y)[1]
            else:
                shape = MLPShape(n_feat, int(rng.integers(2, 6)))
                params = 0.5 * rng.standard_normal(shape.size)
                loss_fn = lambda p: mlp_loss_grad(p, shape, X, y)[0]
                grad = mlp_loss_grad(params, shape, X, y)[1]
            approx = oracle.finite_diff_grad(loss_fn, params)
            err = float(np.max(np.abs(grad - approx)) / max(1.0, float(np.max(np.abs(grad)))))
            worst = max(worst, err)
            if err > 1e-6:
                failures.append((kind, n_feat, n_batch, err))
    return SuiteResult(
        name="gradients", passed=not failures, n_cases=n_cases, worst=worst,
        failures=failures[:5],
    )


SUITES = {
    "beta-oracle": verify_beta_oracle,
    "trajectories": verify_trajectories,
    "gradients": verify_gradients,
}


def run_suites(names: list[str] | None = None, n: int | None = None) -> list[SuiteResult]:
    """Run the named suites (all by default) with optional case-count n."""
    results = []
    for name in names or list(SUITES):
        fn = SUITES[name]
        if n is None:
            results.append(fn())
        elif name == "beta-oracle":
            results.append(fn(n_tuples=n))
        elif name == "trajectories":
            results.append(fn(n_traces=n))
        else:
            results.append(fn(n_instances=n))
    return results
