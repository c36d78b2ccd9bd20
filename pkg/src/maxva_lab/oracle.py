"""Independent verification engines.

Everything in this module is deliberately slow and written as a separate,
straight-line transcription of the defining formulas, with no imports
from the production math modules. It exists so the fast implementations
have something independent to disagree with:

* ``beta_grid_argmax`` maximizes the implied variance estimate by brute
  force over a dense grid of candidate averaging coefficients,
* ``finite_diff_grad`` checks hand-coded gradients by central differences,
* ``reference_trajectory`` replays every optimizer on a scalar problem
  using plain Python floats, one printed update rule per branch.

The config dataclass from :mod:`optimizers` is reused as a plain
parameter record; no stepping logic is shared.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence

import numpy as np

from .optimizers import OptimizerConfig

# candidate coefficients above 1 are searched up to this cap; the implied
# averaging window explodes as w -> 1 and the maximizer is insensitive
# far beyond the cap
BETA_SEARCH_CAP = 1e3


def beta_search_upper(w: float) -> float:
    """Upper end of the searched coefficient range for total weight w."""
    if not 0.0 < w <= 1.0:
        raise ValueError(f"w must lie in (0, 1], got {w}")
    if w >= 1.0:
        return BETA_SEARCH_CAP
    return min(1.0 / (1.0 - w), BETA_SEARCH_CAP)


def sigma_sq_one_step(g: float, u: float, v: float, w: float, betas: np.ndarray) -> np.ndarray:
    """Variance estimate after absorbing gradient g with coefficient beta.

    (u, v, w) describe the state before the step: bias-corrected mean and
    second moment plus the accumulated weight. Vectorized over betas;
    a coefficient that zeroes the new total weight yields -inf.
    """
    betas = np.asarray(betas, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        w_new = betas * w + (1.0 - betas)
        u_new = (betas * (w * u) + (1.0 - betas) * g) / w_new
        v_new = (betas * (w * v) + (1.0 - betas) * g * g) / w_new
        sigma_sq = v_new - u_new * u_new
    return np.where(np.isfinite(sigma_sq), sigma_sq, -np.inf)


def beta_grid_argmax(
    g: float, u: float, v: float, w: float, grid_size: int = 10_000
) -> tuple[float, float]:
    """Brute-force maximizer of the one-step variance estimate.

    Scans beta over (0, upper] where upper extends past 1 up to
    1 / (1 - w) (capped at 1e3): values above 1 are meaningful for the
    maximization even though the production code clips them away. Returns
    (argmax beta, maximized sigma^2). Resolution is upper / grid_size.

    Requires v - u^2 >= 0 up to rounding: the incoming (u, v) must be a
    realizable mean / second-moment pair.
    """
    if grid_size < 1_000:
        raise ValueError(f"grid_size must be >= 1000, got {grid_size}")
    if v - u * u < -1e-12:
        raise ValueError(f"v - u^2 = {v - u * u} is negative; not a moment pair")
    upper = beta_search_upper(w)
    betas = np.linspace(upper / grid_size, upper, grid_size)
    sigma_sq = sigma_sq_one_step(g, u, v, w, betas)
    k = int(np.argmax(sigma_sq))
    return float(betas[k]), float(sigma_sq[k])


def finite_diff_grad(
    func: Callable[[np.ndarray], float], params: np.ndarray, step: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.zeros_like(params)
    for k in range(len(params)):
        bumped = params.copy()
        bumped[k] = params[k] + step
        hi = func(bumped)
        bumped[k] = params[k] - step
        lo = func(bumped)
        grad[k] = (hi - lo) / (2.0 * step)
    return grad


def reference_trajectory(
    algorithm: str,
    config: OptimizerConfig,
    grads: Sequence[float],
    theta0: float = 0.0,
) -> np.ndarray:
    """Replay a scalar gradient sequence step by step in plain Python.

    Returns the iterate after each step (length = len(grads)). Intended
    for short scalar traces; every branch below restates its update rule
    from scratch rather than calling the production code.
    """
    if algorithm != config.algorithm:
        raise ValueError(f"algorithm {algorithm!r} != config.algorithm {config.algorithm!r}")
    a = config.alpha
    b = config.beta
    eps = config.epsilon
    lam = config.lam
    bl = config.bounds.beta_lower
    bu = config.bounds.beta_upper
    b1 = config.bounds.beta_one
    delta = config.bounds.delta
    track = config.tracks_max

    th = float(theta0)
    m = 0.0
    u_t = 0.0  # weighted moment accumulators for the adaptive coefficient
    v_t = 0.0
    w = 0.0
    v_ema = 0.0  # fixed-coefficient second moment
    v_hat = 0.0
    buf = 0.0
    out = []

    def next_beta(g: float, t: int) -> float:
        if t == 1:
            return b1
        uu = u_t / w
        s2 = max(v_t / w - uu * uu, 0.0)
        dg2 = (g - uu) ** 2
        raw = (dg2 + s2) / (w * (dg2 - s2) + dg2 + s2 + delta)
        return min(bu, max(bl, raw))

    for t, g in enumerate(grads, start=1):
        g = float(g)
        eta = config.schedule.value(config.eta, t)
        th = th - eta * lam * th
        if algorithm == "madam":
            m = a * m + (1.0 - a) * g
            beta = next_beta(g, t)
            u_t = beta * u_t + (1.0 - beta) * g
            v_t = beta * v_t + (1.0 - beta) * g * g
            w = beta * w + (1.0 - beta)
            if track:
                v_hat = max(v_hat, v_t / w)
                th = th - eta * m / ((1.0 - a**t) * (math.sqrt(v_hat) + eps))
            else:
                th = th - eta * math.sqrt(w) / (1.0 - a**t) * m / (math.sqrt(v_t) + eps)
        elif algorithm == "lamadam":
            beta = next_beta(g, t)
            u_t = beta * u_t + (1.0 - beta) * g
            v_t = beta * v_t + (1.0 - beta) * g * g
            w = beta * w + (1.0 - beta)
            v_used = v_t / w
            if track:
                v_hat = max(v_hat, v_used)
                v_used = v_hat
            m = a * m + (1.0 - a) * g / (math.sqrt(v_used) + eps)
            th = th - eta * m / (1.0 - a**t)
        elif algorithm in ("adam", "amsgrad"):
            m = a * m + (1.0 - a) * g
            v_ema = b * v_ema + (1.0 - b) * g * g
            v_used = v_ema / (1.0 - b**t)
            if track or algorithm == "amsgrad":
                v_hat = max(v_hat, v_used)
                v_used = v_hat
            th = th - eta * m / ((1.0 - a**t) * (math.sqrt(v_used) + eps))
        elif algorithm == "laprop":
            v_ema = b * v_ema + (1.0 - b) * g * g
            v_used = v_ema / (1.0 - b**t)
            if track:
                v_hat = max(v_hat, v_used)
                v_used = v_hat
            m = a * m + (1.0 - a) * g / (math.sqrt(v_used) + eps)
            th = th - eta * m / (1.0 - a**t)
        elif algorithm == "adabound":
            m = a * m + (1.0 - a) * g
            v_ema = b * v_ema + (1.0 - b) * g * g
            v_used = v_ema / (1.0 - b**t)
            if track:
                v_hat = max(v_hat, v_used)
                v_used = v_hat
            fl = config.adabound_final_lr
            gam = config.adabound_gamma
            lo = fl * (1.0 - 1.0 / (gam * t + 1.0))
            hi = fl * (1.0 + 1.0 / (gam * t))
            rate = min(hi, max(lo, eta / (math.sqrt(v_used) + eps)))
            th = th - rate * m / (1.0 - a**t)
        elif algorithm == "sgd":
            buf = config.momentum * buf + g
            th = th - eta * buf
        else:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        out.append(th)
    return np.array(out)
