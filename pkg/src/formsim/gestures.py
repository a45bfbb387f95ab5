"""Gesture command stream: detector emulation, filtering, mapping.

Per-frame gesture IDs are noisy; commands are confirmed only when a full
window of recent valid detections is dominated by one gesture. A debounce
delay then blocks immediate re-confirmation so one sustained gesture does
not fire repeatedly.

Gesture ID 0 means "human detected, no gesture" and never counts as a
valid measurement.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import FormationParams, ParamLimits, wrap_angle

PARAM_BETA = "beta"
PARAM_GAMMA = "gamma"
PARAM_DISTANCE = "distance"


@dataclass(frozen=True)
class GestureDetection:
    """One detector output: gesture id at time t."""

    id: int
    t: float


@dataclass
class GestureFilterConfig:
    """Confirmation rules for the detection window.

    window: number of valid detections considered (and required).
    stale_after: detections older than this never influence a decision.
    ratio_threshold: minimum fraction of the window the dominant id must hold.
    debounce: minimum time between two confirmed commands.
    """

    window: int = 20
    stale_after: float = 20.0
    ratio_threshold: float = 0.8
    debounce: float = 5.0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not (0.0 <= self.ratio_threshold <= 1.0):
            raise ValueError("ratio_threshold must lie in [0, 1]")
        if self.stale_after <= 0 or self.debounce <= 0:
            raise ValueError("stale_after and debounce must be positive")


@dataclass
class GestureFilter:
    """Sliding-window majority filter with staleness and debounce."""

    config: GestureFilterConfig = field(default_factory=GestureFilterConfig)

    def __post_init__(self):
        self.window: deque[GestureDetection] = deque()
        self.last_command_time: float | None = None
        self._last_now = -math.inf

    def dominant(self) -> tuple[int, float]:
        """Most frequent id in the window and its ratio (0, 0.0 if empty).

        Ties report the smallest id but are never confirmed.
        """
        if not self.window:
            return 0, 0.0
        counts = Counter(d.id for d in self.window)
        top = max(counts.values())
        leaders = sorted(i for i, c in counts.items() if c == top)
        return leaders[0], top / len(self.window)

    def update(self, det: GestureDetection | None, now: float) -> int | None:
        """Advance the filter to `now`; return a confirmed id or None.

        A command is confirmed when the window holds a full `window` count
        of valid detections, the dominant id owns at least ratio_threshold
        of them without a tie, and the debounce delay since the previous
        command has elapsed. Confirming clears the window so the same
        evidence cannot fire twice.
        """
        if now < self._last_now:
            raise ValueError(f"time went backwards: {now} < {self._last_now}")
        self._last_now = now
        cutoff = now - self.config.stale_after
        while self.window and self.window[0].t < cutoff:
            self.window.popleft()
        if det is not None and det.id != 0:
            self.window.append(det)
            while len(self.window) > self.config.window:
                self.window.popleft()
        if len(self.window) < self.config.window:
            return None
        counts = Counter(d.id for d in self.window)
        top = max(counts.values())
        leaders = [i for i, c in counts.items() if c == top]
        if len(leaders) != 1:
            return None
        if top / len(self.window) < self.config.ratio_threshold:
            return None
        if self.last_command_time is not None and now - self.last_command_time < self.config.debounce:
            return None
        self.last_command_time = now
        self.window.clear()
        return leaders[0]


@dataclass
class DetectorEmulatorModel:
    """Stochastic stand-in for the onboard gesture recognition stack.

    confusion[i, j] is the probability that true gesture i is reported as
    gesture j. detection_rate is the probability that any output is
    produced for a frame at all.
    """

    confusion: np.ndarray
    detection_rate: float = 1.0

    def __post_init__(self):
        self.confusion = np.asarray(self.confusion, dtype=float)
        if self.confusion.ndim != 2 or self.confusion.shape[0] != self.confusion.shape[1]:
            raise ValueError("confusion must be a square matrix")
        rows = self.confusion.sum(axis=1)
        if np.abs(rows - 1.0).max() > 1e-9:
            raise ValueError("confusion rows must sum to 1")
        if not (0.0 <= self.detection_rate <= 1.0):
            raise ValueError("detection_rate must lie in [0, 1]")

    @classmethod
    def identity(cls, n_ids: int = 5, detection_rate: float = 1.0) -> "DetectorEmulatorModel":
        return cls(np.eye(n_ids), detection_rate)

    @classmethod
    def diagonal(cls, n_ids: int, accuracy: float, detection_rate: float = 1.0) -> "DetectorEmulatorModel":
        """Confusion with `accuracy` on the diagonal, remainder spread evenly."""
        off = (1.0 - accuracy) / (n_ids - 1) if n_ids > 1 else 0.0
        m = np.full((n_ids, n_ids), off)
        np.fill_diagonal(m, accuracy)
        return cls(m, detection_rate)


def emulate_detection(
    true_id: int, t: float, model: DetectorEmulatorModel, rng: np.random.Generator
) -> GestureDetection | None:
    """Sample one detector output for the gesture currently performed."""
    if not (0 <= true_id < model.confusion.shape[0]):
        raise ValueError(f"gesture id {true_id} outside confusion matrix")
    if rng.random() >= model.detection_rate:
        return None
    cdf = np.cumsum(model.confusion[true_id])
    detected = int(np.searchsorted(cdf, rng.random(), side="right"))
    return GestureDetection(min(detected, model.confusion.shape[0] - 1), t)


@dataclass(frozen=True)
class ParamDelta:
    """A requested change of one formation parameter.

    uav selects the target ("leader", a follower name, or "all"); exactly
    one of delta/absolute is set. Angles are radians, distances meters.
    """

    uav: str
    param: str
    delta: float | None = None
    absolute: float | None = None

    def __post_init__(self):
        if (self.delta is None) == (self.absolute is None):
            raise ValueError("exactly one of delta or absolute must be given")
        value = self.delta if self.delta is not None else self.absolute
        if not math.isfinite(value):
            raise ValueError("parameter change must be finite")
        if self.param not in (PARAM_BETA, PARAM_GAMMA, PARAM_DISTANCE):
            raise ValueError(f"unknown parameter {self.param!r}")


# Worker gesture vocabulary: cross arms / extend arm shrink or grow the
# horizontal angle, palms together / raise arm shrink or grow the vertical.
DEFAULT_GESTURE_MAP: dict[int, ParamDelta] = {
    1: ParamDelta("leader", PARAM_BETA, delta=math.radians(-30.0)),
    2: ParamDelta("leader", PARAM_BETA, delta=math.radians(30.0)),
    3: ParamDelta("leader", PARAM_GAMMA, delta=math.radians(-5.0)),
    4: ParamDelta("leader", PARAM_GAMMA, delta=math.radians(5.0)),
}


def map_gesture(gesture_id: int, mapping: dict[int, ParamDelta] | None = None) -> ParamDelta | None:
    """Translate a confirmed gesture id into a parameter change.

    Unmapped ids (including 0) are a no-op and return None.
    """
    table = DEFAULT_GESTURE_MAP if mapping is None else mapping
    return table.get(gesture_id)


def apply_operator_request(
    params: FormationParams, req: ParamDelta, limits: ParamLimits
) -> FormationParams:
    """Apply a parameter change and clamp it into the configured limits.

    Values are clamped rather than rejected so an aggressive request still
    moves the parameter to its nearest admissible value. beta is periodic
    and only wrapped.
    """
    out = params.copy()
    current = getattr(out, req.param)
    value = current + req.delta if req.delta is not None else req.absolute
    if req.param == PARAM_BETA:
        out.beta = wrap_angle(value)
    elif req.param == PARAM_GAMMA:
        out.gamma = min(max(value, limits.gamma_min), limits.gamma_max)
    else:
        out.distance = min(max(value, limits.d_min), limits.d_max)
    return out
