"""Accept/abort rule: flag any correlator too far from its predicted value."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .correlators import ALL_KEYS, CorrelatorEstimate, CorrelatorKey


@dataclass(frozen=True)
class DetectorConfig:
    threshold_sigma: float = 4.0
    min_samples_per_key: int = 200

    def __post_init__(self):
        if not self.threshold_sigma > 0:
            raise ValueError("threshold_sigma must be positive")
        if self.min_samples_per_key < 1:
            raise ValueError("min_samples_per_key must be positive")


class Status(enum.Enum):
    ACCEPT = "ACCEPT"
    ABORT = "ABORT"
    INSUFFICIENT = "INSUFFICIENT"


@dataclass(frozen=True)
class Violation:
    key: CorrelatorKey
    estimate: CorrelatorEstimate
    predicted: float
    z_score: float


@dataclass(frozen=True)
class Verdict:
    """Detector decision.

    ``list_checked``/``list_violations`` are filled only by the protocol's
    perfect-correlation spot check; ``consumed`` holds the round indices that
    check used up.
    """

    status: Status
    violations: tuple[Violation, ...] = ()
    insufficient_keys: tuple[CorrelatorKey, ...] = ()
    z_scores: Mapping[CorrelatorKey, float] = field(default_factory=dict)
    list_checked: int = 0
    list_violations: tuple[int, ...] = ()
    consumed: frozenset = frozenset()

    @property
    def accepted(self) -> bool:
        return self.status is Status.ACCEPT

    @property
    def violated_keys(self) -> tuple[CorrelatorKey, ...]:
        return tuple(v.key for v in self.violations)

    @property
    def max_z(self) -> tuple[CorrelatorKey, float]:
        key = max(self.z_scores, key=lambda k: (self.z_scores[k], -ALL_KEYS.index(k)))
        return key, self.z_scores[key]


def z_score(est: CorrelatorEstimate, predicted: float) -> float:
    dev = abs(est.value - predicted)
    if est.stderr == 0:
        return 0.0 if dev == 0 else math.inf
    return dev / est.stderr


def decide(
    estimates: Iterable[CorrelatorEstimate],
    predictions: Mapping[CorrelatorKey, float],
    config: DetectorConfig = DetectorConfig(),
) -> Verdict:
    by_key = {e.key: e for e in estimates}
    missing = [k for k in ALL_KEYS if k not in by_key or k not in predictions]
    if missing:
        raise ValueError(f"missing correlator keys: {', '.join(map(str, missing))}")

    z = {k: z_score(by_key[k], predictions[k]) for k in ALL_KEYS}
    short = tuple(k for k in ALL_KEYS if by_key[k].n < config.min_samples_per_key)
    if short:
        return Verdict(Status.INSUFFICIENT, insufficient_keys=short, z_scores=z)
    violations = tuple(
        Violation(k, by_key[k], predictions[k], z[k]) for k in ALL_KEYS if z[k] > config.threshold_sigma
    )
    if violations:
        return Verdict(Status.ABORT, violations=violations, z_scores=z)
    return Verdict(Status.ACCEPT, z_scores=z)
