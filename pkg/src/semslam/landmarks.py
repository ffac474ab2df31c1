"""Landmarks and landmark maps exchanged between edge and control agents."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

import numpy as np

LOCAL = "local"
COLLECTIVE = "collective"


@dataclass
class Landmark:
    """A semantically labelled static feature in some map frame.

    ``true_x``/``true_y`` and ``feature_id`` come from the simulator and are
    used only for metrics and the oracle.
    """

    id: int
    cls: str
    confidence: float
    x: float
    y: float
    true_x: float
    true_y: float
    static: bool = True
    source: int = -1
    observations: int = 1
    feature_id: int = -1

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"landmark confidence {self.confidence} outside [0, 1]")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def true_position(self) -> tuple[float, float]:
        return (self.true_x, self.true_y)

    @property
    def offset_error(self) -> float:
        return math.hypot(self.x - self.true_x, self.y - self.true_y)

    def copy(self, **changes) -> "Landmark":
        return replace(self, **changes)


@dataclass
class LandmarkMap:
    """Ordered landmark collection tagged with its reference frame."""

    frame: str = LOCAL
    landmarks: list[Landmark] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.landmarks)

    def __iter__(self) -> Iterator[Landmark]:
        return iter(self.landmarks)

    def add(self, lm: Landmark) -> None:
        if any(other.id == lm.id for other in self.landmarks):
            raise ValueError(f"duplicate landmark id {lm.id}")
        self.landmarks.append(lm)

    def next_id(self) -> int:
        return max((lm.id for lm in self.landmarks), default=-1) + 1

    def snapshot(self) -> "LandmarkMap":
        return LandmarkMap(self.frame, [lm.copy() for lm in self.landmarks])

    def positions(self) -> np.ndarray:
        return np.array([lm.position for lm in self.landmarks], dtype=float).reshape(-1, 2)

    def to_records(self) -> list[dict]:
        return [
            {"id": lm.id, "class": lm.cls, "confidence": lm.confidence,
             "x": lm.x, "y": lm.y, "source": lm.source,
             "true_x": lm.true_x, "true_y": lm.true_y,
             "static": lm.static, "observations": lm.observations,
             "feature_id": lm.feature_id}
            for lm in self.landmarks
        ]

    def dumps(self) -> str:
        return json.dumps({"frame": self.frame, "landmarks": self.to_records()}, indent=1)

    @classmethod
    def from_records(cls, records: Iterable[dict], frame: str = COLLECTIVE) -> "LandmarkMap":
        out = cls(frame)
        for i, r in enumerate(records):
            out.add(Landmark(
                id=int(r.get("id", i)), cls=r["class"], confidence=float(r["confidence"]),
                x=float(r["x"]), y=float(r["y"]),
                true_x=float(r.get("true_x", r["x"])), true_y=float(r.get("true_y", r["y"])),
                static=bool(r.get("static", True)), source=int(r.get("source", -1)),
                observations=int(r.get("observations", 1)),
                feature_id=int(r.get("feature_id", -1)),
            ))
        return out

    @classmethod
    def loads(cls, text: str) -> "LandmarkMap":
        data = json.loads(text)
        return cls.from_records(data["landmarks"], data.get("frame", COLLECTIVE))
