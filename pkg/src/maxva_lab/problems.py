"""Synthetic objectives with seeded stochastic-gradient oracles.

Two problems are provided. The finite-sample problem is a piecewise
objective built from n components where a single rare component carries a
large opposing gradient; sampling components uniformly defeats
fixed-coefficient adaptive methods at learning rates where the
variance-maximizing coefficient still converges. The noisy quadratic is a
diagonal quadratic whose gradient noise scales with curvature, the
standard sandbox for comparing adaptive step-size rules under anisotropy.

Both expose the stacked multi-run interface consumed by the harness:

* ``init_theta(rng)`` draws the start point for one run,
* ``draw_noise(rng, horizon)`` pre-draws all of one run's randomness,
* ``grad_stacked(theta, noise_t)`` maps an (R, dim) block of run states
  plus the step-t noise of those R runs to an (R, dim) gradient block,
* ``loss_stacked(theta)`` maps (R, dim) to R loss values.

Because per-run noise comes from the run's own generator, stepping runs
stacked or one at a time gives bit-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .vecmath import CoordVector


class GradientProblem(Protocol):
    """Structural interface the experiment harness drives."""

    @property
    def dim(self) -> int: ...

    def init_theta(self, rng: np.random.Generator) -> np.ndarray: ...

    def draw_noise(self, rng: np.random.Generator, horizon: int): ...

    def grad_stacked(self, theta: np.ndarray, noise_t) -> np.ndarray: ...

    def loss_stacked(self, theta: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class FiniteSampleProblem:
    """Scalar piecewise objective over n components, sampled uniformly.

    Component 1 is a steep bowl (n/2) * theta^2, every other component is
    the shallow cap -theta^2 / 2; both flatten to linear growth outside
    |theta| <= 1 so single-component gradients stay bounded. The sum is
    theta^2 / 2 inside the unit interval and |theta| - 1/2 outside,
    minimized at 0. Per step one component index in 1..n is drawn
    uniformly and only its gradient is revealed.
    """

    n_components: int = 11
    theta0: float = 1.0

    def __post_init__(self) -> None:
        if self.n_components < 2:
            raise ValueError(f"need at least 2 components, got {self.n_components}")

    @property
    def dim(self) -> int:
        return 1

    def _check_index(self, i: int) -> None:
        if not 1 <= i <= self.n_components:
            raise ValueError(f"component index {i} outside 1..{self.n_components}")

    def component_loss(self, theta: float, i: int) -> float:
        self._check_index(i)
        n = self.n_components
        if i == 1:
            if abs(theta) <= 1.0:
                return 0.5 * n * theta * theta
            return n * abs(theta) - 0.5 * n
        if abs(theta) <= 1.0:
            return -0.5 * theta * theta
        return -abs(theta) + 0.5

    def component_grad(self, theta: float, i: int) -> float:
        self._check_index(i)
        n = self.n_components
        if i == 1:
            return n * theta if abs(theta) <= 1.0 else n * float(np.sign(theta))
        return -theta if abs(theta) <= 1.0 else -float(np.sign(theta))

    def full_loss(self, theta: float) -> float:
        """Sum over all components; theta^2/2 inside the unit interval."""
        if abs(theta) <= 1.0:
            return 0.5 * theta * theta
        return abs(theta) - 0.5

    def full_grad(self, theta: float) -> float:
        return theta if abs(theta) <= 1.0 else float(np.sign(theta))

    # --- stacked interface ---

    def init_theta(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([self.theta0])

    def draw_noise(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        """Uniform component indices for every step, shape (horizon,)."""
        return rng.integers(1, self.n_components + 1, size=horizon)

    def grad_stacked(self, theta: np.ndarray, noise_t: np.ndarray) -> np.ndarray:
        th = theta[:, 0]
        n = self.n_components
        inside = np.abs(th) <= 1.0
        steep = np.where(inside, n * th, n * np.sign(th))
        shallow = np.where(inside, -th, -np.sign(th))
        return np.where(noise_t == 1, steep, shallow)[:, None]

    def loss_stacked(self, theta: np.ndarray) -> np.ndarray:
        th = theta[:, 0]
        return np.where(np.abs(th) <= 1.0, 0.5 * th * th, np.abs(th) - 0.5)


def finite_sample_grad(theta: float, i: int, n_components: int = 11) -> float:
    """Gradient of component i at theta (module-level convenience)."""
    return FiniteSampleProblem(n_components=n_components).component_grad(theta, i)


def finite_sample_full_grad(theta: float, n_components: int = 11) -> float:
    """Gradient of the summed objective at theta."""
    return FiniteSampleProblem(n_components=n_components).full_grad(theta)


@dataclass(frozen=True)
class NQMProblem:
    """Diagonal noisy quadratic: grad_i = h_i * (theta_i - sigma * eps_i).

    eps is a fresh standard normal draw per step, so the gradient is
    unbiased for h * theta with per-coordinate variance h_i^2 sigma^2:
    noise scales with curvature. Excess risk is the noiseless objective
    0.5 * sum_i h_i theta_i^2; expected loss adds the constant floor
    0.5 * sum_i h_i sigma^2.
    """

    h: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.1]))
    sigma: float = 1.0

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=np.float64)
        if h.ndim != 1 or h.size < 1 or (h <= 0.0).any():
            raise ValueError("h must be a 1-D vector of positive curvatures")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return len(self.h)

    @property
    def loss_floor(self) -> float:
        """Expected loss minus excess risk: 0.5 * sum(h) * sigma^2."""
        return 0.5 * float(self.h.sum()) * self.sigma**2

    # --- stacked interface ---

    def init_theta(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.dim)

    def draw_noise(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        return rng.standard_normal((horizon, self.dim))

    def grad_stacked(self, theta: np.ndarray, noise_t: np.ndarray) -> np.ndarray:
        return self.h * (theta - self.sigma * noise_t)

    def loss_stacked(self, theta: np.ndarray) -> np.ndarray:
        """Excess risk per run (noise floor excluded)."""
        return 0.5 * (theta * theta) @ self.h


def nqm_grad(theta: CoordVector, problem: NQMProblem, rng: np.random.Generator) -> CoordVector:
    """Single stochastic gradient with a fresh noise draw from rng."""
    eps = rng.standard_normal(problem.dim)
    return problem.h * (np.asarray(theta, dtype=np.float64) - problem.sigma * eps)


def nqm_risk(theta: CoordVector, problem: NQMProblem) -> tuple[float, float]:
    """(excess risk, expected loss) at theta."""
    th = np.asarray(theta, dtype=np.float64)
    excess = 0.5 * float((th * th) @ problem.h)
    return excess, excess + problem.loss_floor
