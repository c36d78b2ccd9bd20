"""Variance-maximizing running averages of gradients.

The adaptive optimizers in this package replace the fixed second-moment
coefficient of Adam-style methods with a per-coordinate coefficient chosen
anew at every step. The state tracks three exponentially weighted
accumulators per coordinate:

    w_t  = beta_t * w_{t-1}  + (1 - beta_t)            total weight
    u~_t = beta_t * u~_{t-1} + (1 - beta_t) * g_t      first moment
    v~_t = beta_t * v~_{t-1} + (1 - beta_t) * g_t^2    second moment

Dividing by w_t gives bias-corrected estimates u_t = u~_t / w_t and
v_t = v~_t / w_t, and the implied gradient-variance estimate
sigma^2_t = v_t - u_t^2. Choosing beta_t to maximize sigma^2_t has the
closed form

    beta = (dg^2 + s2) / (w_{t-1} * (dg^2 - s2) + dg^2 + s2 + delta)

with dg = g_t - u_{t-1}, s2 = sigma^2_{t-1}, and a small delta guarding
division by zero. The result is clipped into [beta_lower, beta_upper].
A surprising gradient (large |dg| relative to s2) drives beta toward
1 / (1 + w), weighting the new observation heavily; an unsurprising one
drives beta toward 1 / (1 - w), extending the averaging window.

The very first step has no observable variance, so it uses the fixed
coefficient beta_one, which seeds the state with the first gradient.

All transitions here are pure: they return new state and never mutate
their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .vecmath import CoordVector, DimensionError


class UninitializedStateError(RuntimeError):
    """Bias-corrected estimates were requested before any update."""


@dataclass(frozen=True)
class BetaBounds:
    """Clip range and guards for the adaptive averaging coefficient.

    beta_lower / beta_upper bound the coefficient after clipping;
    beta_upper may be exactly 1, in which case the total weight w stalls
    whenever the upper bound is selected. beta_one is the fixed
    coefficient for the first step and must stay strictly below 1 so the
    first gradient actually enters the state; it defaults to beta_upper,
    capped when beta_upper is 1. delta guards the closed-form denominator.
    """

    beta_lower: float = 0.5
    beta_upper: float = 0.999
    beta_one: float | None = None
    delta: float = 1e-16

    def __post_init__(self) -> None:
        if not 0.0 < self.beta_lower <= self.beta_upper <= 1.0:
            raise ValueError(
                f"need 0 < beta_lower <= beta_upper <= 1, got "
                f"({self.beta_lower}, {self.beta_upper})"
            )
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.beta_one is None:
            default = self.beta_upper if self.beta_upper < 1.0 else 0.999
            object.__setattr__(self, "beta_one", default)
        if not 0.0 < self.beta_one < 1.0:
            raise ValueError(f"beta_one must lie in (0, 1), got {self.beta_one}")


@dataclass(frozen=True)
class MaxVAState:
    """Weighted moment accumulators after t steps; all arrays share a length."""

    u_tilde: np.ndarray
    v_tilde: np.ndarray
    w: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, dim: int) -> "MaxVAState":
        if dim < 1:
            raise DimensionError(f"dimension must be >= 1, got {dim}")
        return cls(
            u_tilde=np.zeros(dim),
            v_tilde=np.zeros(dim),
            w=np.zeros(dim),
            t=0,
        )

    @property
    def dim(self) -> int:
        return len(self.w)


def bias_corrected(state: MaxVAState) -> tuple[CoordVector, CoordVector, CoordVector]:
    """Return (u, v, sigma_sq) with the accumulated weight divided out.

    sigma_sq is floored at zero: v - u^2 can dip a hair below zero through
    rounding, and a negative variance estimate would flip the sign
    structure of the closed-form coefficient.
    """
    if state.t == 0:
        raise UninitializedStateError("no gradients observed yet (t = 0)")
    u = state.u_tilde / state.w
    v = state.v_tilde / state.w
    sigma_sq = np.maximum(v - u * u, 0.0)
    return u, v, sigma_sq


def compute_beta_raw(g: CoordVector, state: MaxVAState, delta: float = 1e-16) -> CoordVector:
    """Closed-form variance-maximizing coefficient, before clipping.

    Pure function of the incoming gradient and the state after t-1 >= 1
    steps. With positive observed variance the result lies in
    [1 / (1 + w), 1 / (1 - w)]; in the degenerate case (zero variance and
    g equal to the running mean) the delta guard sends it to 0.
    """
    if len(g) != state.dim:
        raise DimensionError(f"gradient length {len(g)} != state dim {state.dim}")
    u, _, sigma_sq = bias_corrected(state)
    dg_sq = (g - u) ** 2
    num = dg_sq + sigma_sq
    return num / (state.w * (dg_sq - sigma_sq) + num + delta)


def clip_beta(beta_raw: CoordVector, bounds: BetaBounds) -> CoordVector:
    """Clamp the raw coefficient into [beta_lower, beta_upper]."""
    return np.clip(beta_raw, bounds.beta_lower, bounds.beta_upper)


def update_moments(state: MaxVAState, g: CoordVector, beta: CoordVector) -> MaxVAState:
    """Advance all three accumulators one step with coefficient beta."""
    beta = np.asarray(beta, dtype=np.float64)
    if len(g) != state.dim or (beta.ndim == 1 and len(beta) != state.dim):
        raise DimensionError("gradient/beta length does not match state dimension")
    if beta.min() <= 0.0 or beta.max() > 1.0:
        raise ValueError("beta must lie in (0, 1] entrywise")
    one_minus = 1.0 - beta
    return MaxVAState(
        u_tilde=beta * state.u_tilde + one_minus * g,
        v_tilde=beta * state.v_tilde + one_minus * (g * g),
        w=beta * state.w + one_minus,
        t=state.t + 1,
    )


def maxva_step_beta(
    state: MaxVAState, g: CoordVector, bounds: BetaBounds
) -> tuple[CoordVector, MaxVAState]:
    """One full coefficient choice plus moment update.

    Step 1 uses the fixed beta_one (the state carries no variance signal
    yet); later steps clip the closed-form coefficient into bounds.
    Returns (beta used, next state).
    """
    if state.t == 0:
        beta = np.full(state.dim, float(bounds.beta_one))
    else:
        beta = clip_beta(compute_beta_raw(g, state, bounds.delta), bounds)
    return beta, update_moments(state, g, beta)
