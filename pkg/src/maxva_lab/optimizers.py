"""First-order stepping rules behind one shared contract.

Every optimizer is a pure transition: ``step(theta, g, state, cfg, t)``
returns ``(theta_next, state_next, report)`` and never mutates an input.
Implemented algorithms:

* ``madam`` / ``lamadam``: second moment with the variance-maximizing
  adaptive coefficient from :mod:`maxva`. ``madam`` preconditions the
  momentum of raw gradients; ``lamadam`` accumulates momentum of locally
  normalized gradients (the update is then invariant to gradient scale).
* ``adam`` / ``amsgrad`` / ``laprop`` / ``adabound``: fixed-coefficient
  baselines.
* ``sgd``: heavy-ball momentum.

All algorithms support decoupled weight decay (theta shrinks by
``eta_t * lam * theta`` independently of the gradient transform, applied
before the gradient move) and, where a second moment exists, optional
running-max tracking of the bias-corrected second moment via the
``amsgrad`` flag.

Epsilon placement differs by family and is part of each update's
definition: Adam-family methods divide by ``sqrt(v) + eps`` inside the
parameter update, LaProp-family methods divide the gradient by
``sqrt(v) + eps`` before it enters momentum. Their defaults differ too
(1e-8 versus 1e-15); a ``None`` epsilon in the config resolves to the
family default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .maxva import BetaBounds, MaxVAState, bias_corrected, maxva_step_beta
from .vecmath import CoordVector, DimensionError

ALGORITHMS = ("madam", "lamadam", "adam", "amsgrad", "laprop", "adabound", "sgd")

# epsilon sits next to sqrt(v) in the update for these
_ADAM_FAMILY = frozenset({"madam", "adam", "amsgrad", "adabound"})
# epsilon normalizes the gradient before momentum for these
_LAPROP_FAMILY = frozenset({"lamadam", "laprop"})

_SCHEDULE_KINDS = ("constant", "tri-stage", "inverse-sqrt", "cosine")


class NumericError(RuntimeError):
    """A non-finite gradient reached an optimizer step."""


@dataclass(frozen=True)
class LRSchedule:
    """Learning-rate schedule; ``value(eta, t)`` gives eta_t for 1-based t.

    kinds: ``constant``; ``tri-stage`` (linear warmup to eta over `warmup`
    steps, hold for `hold`, exponential decay to ``final_scale * eta`` by
    step `total`); ``inverse-sqrt`` (linear warmup then sqrt decay);
    ``cosine`` (half-cosine decay to ``final_scale * eta`` by `total`).
    Only ``constant`` is exercised by the shipped experiments.
    """

    kind: str = "constant"
    warmup: int = 0
    hold: int = 0
    total: int = 0
    final_scale: float = 0.01

    def __post_init__(self) -> None:
        if self.kind not in _SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind in ("tri-stage", "cosine") and self.total <= 0:
            raise ValueError(f"{self.kind} schedule needs total > 0")

    def value(self, eta: float, t: int) -> float:
        if t < 1:
            raise ValueError(f"step index must be >= 1, got {t}")
        if self.kind == "constant":
            return eta
        if self.kind == "tri-stage":
            if self.warmup > 0 and t <= self.warmup:
                frac = t / self.warmup
                return eta * (self.final_scale + (1.0 - self.final_scale) * frac)
            if t <= self.warmup + self.hold:
                return eta
            decay_len = max(1, self.total - self.warmup - self.hold)
            done = min(t - self.warmup - self.hold, decay_len)
            return eta * self.final_scale ** (done / decay_len)
        if self.kind == "inverse-sqrt":
            if self.warmup > 0:
                return eta * min(t / self.warmup, math.sqrt(self.warmup / t))
            return eta / math.sqrt(t)
        # cosine
        floor = self.final_scale * eta
        done = min(t, self.total)
        return floor + (eta - floor) * 0.5 * (1.0 + math.cos(math.pi * done / self.total))


@dataclass(frozen=True)
class OptimizerConfig:
    """Full description of one optimizer; only fields relevant to
    ``algorithm`` are consulted.

    eta is the base learning rate, shaped over time by ``schedule``.
    alpha is the first-moment (momentum) coefficient, beta the fixed
    second-moment coefficient of the non-adaptive baselines, bounds the
    clip range of the adaptive coefficient. lam is the decoupled weight
    decay. momentum applies to sgd only.
    """

    algorithm: str
    eta: float = 1e-3
    schedule: LRSchedule = LRSchedule()
    alpha: float = 0.9
    beta: float = 0.999
    bounds: BetaBounds = BetaBounds()
    epsilon: float | None = None
    lam: float = 0.0
    amsgrad: bool = False
    adabound_gamma: float = 1e-3
    adabound_final_lr: float = 0.1
    momentum: float = 0.9

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.eta <= 0.0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.lam < 0.0:
            raise ValueError(f"weight decay must be >= 0, got {self.lam}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.adabound_gamma <= 0.0 or self.adabound_final_lr <= 0.0:
            raise ValueError("adabound_gamma and adabound_final_lr must be positive")
        if self.epsilon is None:
            default = 1e-15 if self.algorithm in _LAPROP_FAMILY else 1e-8
            object.__setattr__(self, "epsilon", default)
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")

    @property
    def uses_maxva(self) -> bool:
        return self.algorithm in ("madam", "lamadam")

    @property
    def tracks_max(self) -> bool:
        """Whether the running max of the second moment is maintained."""
        return self.algorithm != "sgd" and (self.amsgrad or self.algorithm == "amsgrad")


def lr_at(config: OptimizerConfig, t: int) -> float:
    """eta_t under the config's schedule."""
    return config.schedule.value(config.eta, t)


@dataclass(frozen=True)
class OptimizerState:
    """Per-coordinate optimizer memory after t steps.

    m_tilde holds the first-moment accumulator (for sgd, the heavy-ball
    buffer). Exactly one of maxva / v_tilde is populated for algorithms
    with a second moment; v_hat exists only under max tracking.
    """

    m_tilde: np.ndarray
    t: int = 0
    maxva: MaxVAState | None = None
    v_tilde: np.ndarray | None = None
    v_hat: np.ndarray | None = None


def init_state(config: OptimizerConfig, dim: int) -> OptimizerState:
    """Zero-initialized state with exactly the slots the algorithm needs."""
    if dim < 1:
        raise DimensionError(f"dimension must be >= 1, got {dim}")
    maxva = MaxVAState.zeros(dim) if config.uses_maxva else None
    v_tilde = None
    if config.algorithm in ("adam", "amsgrad", "laprop", "adabound"):
        v_tilde = np.zeros(dim)
    v_hat = np.zeros(dim) if config.tracks_max else None
    return OptimizerState(m_tilde=np.zeros(dim), t=0, maxva=maxva, v_tilde=v_tilde, v_hat=v_hat)


@dataclass(frozen=True)
class StepReport:
    """Diagnostics emitted by one step.

    update is the realized parameter change theta_next - theta including
    weight decay; gradient_move is the adaptive part alone (theta loses
    this on top of decay), and step_size_avg is its mean absolute value.
    v_effective is the bias-corrected second moment used in the update
    (all ones for sgd); beta_used is the second-moment coefficient
    (per-coordinate for the adaptive algorithms, the scalar config value
    for fixed-coefficient ones, NaN for sgd).
    """

    update: np.ndarray
    gradient_move: np.ndarray
    step_size_avg: float
    beta_used: np.ndarray | float
    v_effective: np.ndarray


def _tracked(v_hat: np.ndarray | None, v: np.ndarray, track: bool) -> tuple[np.ndarray, np.ndarray | None]:
    """Apply running-max tracking; returns (v used in update, new v_hat)."""
    if not track:
        return v, None
    new_hat = np.maximum(v_hat, v)
    return new_hat, new_hat


def _madam_core(g, state, cfg, t, eta_t):
    m_tilde = cfg.alpha * state.m_tilde + (1.0 - cfg.alpha) * g
    beta, mv = maxva_step_beta(state.maxva, g, cfg.bounds)
    correction = 1.0 - cfg.alpha**t
    if cfg.tracks_max:
        _, v, _ = bias_corrected(mv)
        v_used, v_hat = _tracked(state.v_hat, v, True)
        move = eta_t * m_tilde / (correction * (np.sqrt(v_used) + cfg.epsilon))
    else:
        v_used = mv.v_tilde / mv.w
        v_hat = None
        move = eta_t * np.sqrt(mv.w) / correction * m_tilde / (np.sqrt(mv.v_tilde) + cfg.epsilon)
    next_state = OptimizerState(m_tilde=m_tilde, t=t, maxva=mv, v_hat=v_hat)
    return move, next_state, beta, v_used


def _lamadam_core(g, state, cfg, t, eta_t):
    beta, mv = maxva_step_beta(state.maxva, g, cfg.bounds)
    _, v, _ = bias_corrected(mv)
    v_used, v_hat = _tracked(state.v_hat, v, cfg.tracks_max)
    m_tilde = cfg.alpha * state.m_tilde + (1.0 - cfg.alpha) * g / (np.sqrt(v_used) + cfg.epsilon)
    move = eta_t * m_tilde / (1.0 - cfg.alpha**t)
    next_state = OptimizerState(m_tilde=m_tilde, t=t, maxva=mv, v_hat=v_hat)
    return move, next_state, beta, v_used


def _adam_core(g, state, cfg, t, eta_t):
    m_tilde = cfg.alpha * state.m_tilde + (1.0 - cfg.alpha) * g
    v_tilde = cfg.beta * state.v_tilde + (1.0 - cfg.beta) * (g * g)
    v = v_tilde / (1.0 - cfg.beta**t)
    v_used, v_hat = _tracked(state.v_hat, v, cfg.tracks_max)
    move = eta_t * m_tilde / ((1.0 - cfg.alpha**t) * (np.sqrt(v_used) + cfg.epsilon))
    next_state = OptimizerState(m_tilde=m_tilde, t=t, v_tilde=v_tilde, v_hat=v_hat)
    return move, next_state, cfg.beta, v_used


def _laprop_core(g, state, cfg, t, eta_t):
    v_tilde = cfg.beta * state.v_tilde + (1.0 - cfg.beta) * (g * g)
    v = v_tilde / (1.0 - cfg.beta**t)
    v_used, v_hat = _tracked(state.v_hat, v, cfg.tracks_max)
    m_tilde = cfg.alpha * state.m_tilde + (1.0 - cfg.alpha) * g / (np.sqrt(v_used) + cfg.epsilon)
    move = eta_t * m_tilde / (1.0 - cfg.alpha**t)
    next_state = OptimizerState(m_tilde=m_tilde, t=t, v_tilde=v_tilde, v_hat=v_hat)
    return move, next_state, cfg.beta, v_used


def _adabound_core(g, state, cfg, t, eta_t):
    m_tilde = cfg.alpha * state.m_tilde + (1.0 - cfg.alpha) * g
    v_tilde = cfg.beta * state.v_tilde + (1.0 - cfg.beta) * (g * g)
    v = v_tilde / (1.0 - cfg.beta**t)
    v_used, v_hat = _tracked(state.v_hat, v, cfg.tracks_max)
    lo = cfg.adabound_final_lr * (1.0 - 1.0 / (cfg.adabound_gamma * t + 1.0))
    hi = cfg.adabound_final_lr * (1.0 + 1.0 / (cfg.adabound_gamma * t))
    rate = np.clip(eta_t / (np.sqrt(v_used) + cfg.epsilon), lo, hi)
    move = rate * (m_tilde / (1.0 - cfg.alpha**t))
    next_state = OptimizerState(m_tilde=m_tilde, t=t, v_tilde=v_tilde, v_hat=v_hat)
    return move, next_state, cfg.beta, v_used


def _sgd_core(g, state, cfg, t, eta_t):
    buf = cfg.momentum * state.m_tilde + g
    move = eta_t * buf
    next_state = OptimizerState(m_tilde=buf, t=t)
    return move, next_state, float("nan"), np.ones_like(g)


_CORES = {
    "madam": _madam_core,
    "lamadam": _lamadam_core,
    "adam": _adam_core,
    "amsgrad": _adam_core,
    "laprop": _laprop_core,
    "adabound": _adabound_core,
    "sgd": _sgd_core,
}


def step(
    theta: CoordVector,
    g: CoordVector,
    state: OptimizerState,
    config: OptimizerConfig,
    t: int | None = None,
) -> tuple[CoordVector, OptimizerState, StepReport]:
    """Advance one step of the configured algorithm.

    t is the 1-based step index and must equal state.t + 1 (it defaults
    to that). Raises NumericError if the gradient contains NaN or Inf.
    """
    if t is None:
        t = state.t + 1
    elif t != state.t + 1:
        raise ValueError(f"step index {t} does not follow state at t = {state.t}")
    if len(theta) != len(g):
        raise DimensionError(f"theta length {len(theta)} != gradient length {len(g)}")
    if not np.isfinite(g).all():
        raise NumericError(f"non-finite gradient at step {t}")
    eta_t = lr_at(config, t)
    move, next_state, beta_used, v_eff = _CORES[config.algorithm](g, state, config, t, eta_t)
    theta_next = theta - move if config.lam == 0.0 else theta - eta_t * config.lam * theta - move
    update = theta_next - theta
    report = StepReport(
        update=update,
        gradient_move=move,
        step_size_avg=float(np.abs(move).mean()),
        beta_used=beta_used,
        v_effective=v_eff,
    )
    return theta_next, next_state, report


def _named_step(algorithm):
    def _stepper(theta, g, state, config, t=None):
        if config.algorithm != algorithm:
            raise ValueError(f"config is for {config.algorithm!r}, expected {algorithm!r}")
        return step(theta, g, state, config, t)

    _stepper.__name__ = f"{algorithm}_step"
    _stepper.__doc__ = f"``step`` restricted to algorithm {algorithm!r}."
    return _stepper


madam_step = _named_step("madam")
lamadam_step = _named_step("lamadam")
adam_step = _named_step("adam")
amsgrad_step = _named_step("amsgrad")
laprop_step = _named_step("laprop")
adabound_step = _named_step("adabound")
sgd_step = _named_step("sgd")


def with_eta(config: OptimizerConfig, eta: float) -> OptimizerConfig:
    """Copy of a config with a different base learning rate."""
    return replace(config, eta=eta)
