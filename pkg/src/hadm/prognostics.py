"""Event-time prediction for uncontrolled degrading systems.

A health scalar decays by a nominal amount each step, with some
probability of an extra loss.  The module provides the closed-form
deterministic and stochastic expected end-of-life (EOL), the prediction
uncertainty sigma (their absolute difference), the exact first-crossing
distribution by dynamic programming, a seeded Monte Carlo estimator, and
the inversion that finds the latest prediction health satisfying a
sigma budget.  All times are in prediction-step (dt) units.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .errors import InvalidConfigError, ResourceLimitError, UnconstrainedSigmaError

_TOL = 1e-9


@dataclass(frozen=True)
class DegradationModel:
    """Two-rate stochastic health decay.

    ``rate_nominal`` is the health lost per step under nominal
    degradation; with probability ``p_high`` a step additionally loses
    ``epsilon``.  ``dt`` is the step duration in absolute time and only
    matters when converting step counts to wall-clock time.
    """

    rate_nominal: float
    p_high: float = 0.0
    epsilon: float = 0.0
    s0: float = 1.0
    dt: float = 1.0

    def __post_init__(self):
        if self.s0 <= 0:
            raise InvalidConfigError("initial health must be positive")
        if self.rate_nominal <= 0:
            raise InvalidConfigError("nominal degradation rate must be positive")
        if self.epsilon < 0:
            raise InvalidConfigError("epsilon must be non-negative")
        if not (0.0 <= self.p_high <= 1.0):
            raise InvalidConfigError("p_high must be in [0, 1]")
        if self.dt <= 0:
            raise InvalidConfigError("dt must be positive")

    @property
    def rate_high(self):
        return self.rate_nominal + self.epsilon

    @property
    def mean_rate(self):
        return self.rate_nominal + self.p_high * self.epsilon


@dataclass(frozen=True)
class EventThreshold:
    """Event fires when health drops to ``h_min`` or below."""

    h_min: float = 0.0

    def crossed(self, health: float) -> bool:
        return health <= self.h_min + _TOL


@dataclass(frozen=True)
class PrognosisRequest:
    """Prediction made when a fraction ``rho_p`` of full health remains."""

    rho_p: float = 1.0
    t_p: float = 0.0
    horizon: int = 100

    def __post_init__(self):
        if not (0.0 < self.rho_p <= 1.0):
            raise InvalidConfigError("rho_p must be in (0, 1]")
        if self.horizon <= 0:
            raise InvalidConfigError("prediction horizon must be positive")


@dataclass
class PrognosisResult:
    eol_det: float
    eol_stoch: float
    sigma: float
    rul: float
    distribution: list = field(default_factory=list)  # [(step, probability)]
    residual: float = 0.0

    def mean_eol(self):
        mass = sum(p for _, p in self.distribution)
        if mass <= 0:
            return math.nan
        return sum(k * p for k, p in self.distribution) / mass

    def write_csv(self, fh: IO, dt: float = 1.0):
        writer = csv.writer(fh)
        writer.writerow(["step", "time", "probability"])
        for k, p in self.distribution:
            writer.writerow([k, repr(k * dt), repr(p)])
        writer.writerow(["residual", "", repr(self.residual)])


def predict_eol_deterministic(model: DegradationModel, req: PrognosisRequest) -> float:
    """Remaining time to threshold under the nominal rate: rho * s0 / rate."""
    return req.rho_p * model.s0 / model.rate_nominal


def predict_eol_stochastic(model: DegradationModel, req: PrognosisRequest) -> float:
    """Ratio-of-expected-rate form: rho * s0 / (rate_nominal + p_high * eps).

    This is the cited closed form, not the true expected hitting time of
    the discrete walk; ``eol_distribution`` exposes the gap.
    """
    return req.rho_p * model.s0 / model.mean_rate


def sigma(model: DegradationModel, req: PrognosisRequest) -> float:
    """Prediction uncertainty: |deterministic EOL - stochastic EOL|."""
    return abs(predict_eol_deterministic(model, req) - predict_eol_stochastic(model, req))


def max_prediction_health(model: DegradationModel, sigma_max: float) -> float:
    """Largest health fraction rho at which sigma(rho) <= sigma_max."""
    slope = model.s0 * abs(1.0 / model.rate_nominal - 1.0 / model.mean_rate)
    if slope == 0.0:
        raise UnconstrainedSigmaError("sigma is identically zero (p_high * epsilon = 0)")
    return sigma_max / slope


def rul(
    model: DegradationModel,
    req: PrognosisRequest,
    threshold: EventThreshold = EventThreshold(),
) -> float:
    """Remaining useful life to ``h_min`` under the nominal rate."""
    return max(0.0, (req.rho_p * model.s0 - threshold.h_min) / model.rate_nominal)


def eol_distribution(
    model: DegradationModel,
    req: PrognosisRequest,
    threshold: EventThreshold = EventThreshold(),
    node_cap: int = 10**6,
):
    """Exact first-crossing-time distribution within the horizon.

    Forward DP over the number of high-rate steps taken so far (health
    after k steps with j high ones is determined by k and j).  Returns
    ([(step, probability), ...], residual) where residual is the mass
    that has not crossed by the horizon.
    """
    start = req.rho_p * model.s0
    if threshold.h_min >= start:
        raise InvalidConfigError("threshold must be below the starting health")
    alive = {0: 1.0}  # high-step count -> probability, among survivors
    dist = []
    nodes = 0
    for k in range(1, req.horizon + 1):
        nxt = {}
        crossed_mass = 0.0
        for j, p in alive.items():
            for dj, pb in ((0, 1.0 - model.p_high), (1, model.p_high)):
                if pb <= 0.0:
                    continue
                j2 = j + dj
                health = start - k * model.rate_nominal - j2 * model.epsilon
                if threshold.crossed(health):
                    crossed_mass += p * pb
                else:
                    nxt[j2] = nxt.get(j2, 0.0) + p * pb
        if crossed_mass > 0.0:
            dist.append((k, crossed_mass))
        alive = nxt
        nodes += len(alive)
        if nodes > node_cap:
            raise ResourceLimitError(f"EOL DP exceeded {node_cap} reachable nodes")
        if not alive:
            break
    return dist, sum(alive.values())


def monte_carlo_eol(
    model: DegradationModel,
    req: PrognosisRequest,
    threshold: EventThreshold = EventThreshold(),
    n_samples: int = 10**5,
    seed: int = 0,
):
    """Seeded Monte Carlo estimate of the first-crossing distribution."""
    rng = np.random.default_rng(seed)
    start = req.rho_p * model.s0
    h = req.horizon
    losses = model.rate_nominal + model.epsilon * (
        rng.random((n_samples, h)) < model.p_high
    )
    health = start - np.cumsum(losses, axis=1)
    crossed = health <= threshold.h_min + _TOL
    any_cross = crossed.any(axis=1)
    first = np.where(any_cross, crossed.argmax(axis=1) + 1, 0)
    dist = []
    for k in range(1, h + 1):
        c = int(np.count_nonzero(first == k))
        if c:
            dist.append((k, c / n_samples))
    residual = float(np.count_nonzero(~any_cross)) / n_samples
    return dist, residual


def prognose(
    model: DegradationModel,
    req: PrognosisRequest,
    threshold: EventThreshold = EventThreshold(),
) -> PrognosisResult:
    """Assemble the full prognosis for one request."""
    dist, residual = eol_distribution(model, req, threshold)
    return PrognosisResult(
        eol_det=predict_eol_deterministic(model, req),
        eol_stoch=predict_eol_stochastic(model, req),
        sigma=sigma(model, req),
        rul=rul(model, req, threshold),
        distribution=dist,
        residual=residual,
    )
