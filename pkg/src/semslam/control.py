"""Control agent: collective map maintenance and dispersion incentives."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import frame_to_world
from .landmarks import COLLECTIVE, LOCAL, Landmark, LandmarkMap
from .ontology import Ontology, semantically_similar


class MergeOutcome(str, enum.Enum):
    MERGED = "merged"
    ADDED = "added"
    DISCARDED = "discarded"
    RESURRECTED = "resurrected"


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class MergeConfig:
    merge_radius: float = 0.02
    proximity_tolerance: float = 0.01
    resurrection_threshold: int = 3
    confidence_floor: float = 0.5

    def __post_init__(self):
        if self.merge_radius <= 0 or self.proximity_tolerance <= 0:
            raise ValueError("merge distances must be positive")
        if self.resurrection_threshold < 2:
            raise ValueError("resurrection threshold must be at least 2")


@dataclass
class CollectiveMap:
    ontology: Ontology
    config: MergeConfig = field(default_factory=MergeConfig)
    map: LandmarkMap = field(default_factory=lambda: LandmarkMap(COLLECTIVE))
    discards: list[tuple[Landmark, float]] = field(default_factory=list)
    _next_id: int = 0

    @property
    def landmarks(self) -> list[Landmark]:
        return self.map.landmarks

    def __len__(self) -> int:
        return len(self.map)

    def new_id(self) -> int:
        self._next_id += 1
        return self._next_id - 1


def rebase_map(edge_map: LandmarkMap, start_pose) -> LandmarkMap:
    """Transform an agent-local map into the collective frame via the known start pose."""
    if edge_map.frame != LOCAL:
        raise FrameError(f"expected an agent-local map, got frame {edge_map.frame!r}")
    out = LandmarkMap(COLLECTIVE)
    for lm in edge_map:
        x, y = frame_to_world(lm.position, start_pose)
        out.add(lm.copy(x=x, y=y))
    return out


def _combine(keep: Landmark, other: Landmark) -> None:
    """Pairwise merge into ``keep``: mean position, class of the more confident one."""
    if other.confidence > keep.confidence:
        keep.cls = other.cls
        keep.true_x, keep.true_y = other.true_x, other.true_y
        keep.feature_id = other.feature_id
        keep.source = other.source
        keep.confidence = other.confidence
    keep.x = (keep.x + other.x) / 2.0
    keep.y = (keep.y + other.y) / 2.0
    keep.observations += other.observations


def _settle(cmap: CollectiveMap, lm: Landmark) -> None:
    """Fold any similar landmark now inside the merge radius of ``lm`` into it."""
    o, radius = cmap.ontology, cmap.config.merge_radius
    while True:
        best = None
        for other in cmap.landmarks:
            if other is lm or not semantically_similar(o, lm.cls, other.cls):
                continue
            d = math.hypot(other.x - lm.x, other.y - lm.y)
            if d <= radius and (best is None or (d, other.id) < best[0]):
                best = ((d, other.id), other)
        if best is None:
            return
        other = best[1]
        cmap.landmarks.remove(other)
        _combine(lm, other)


def _neighbours(cmap: CollectiveMap, x: float, y: float):
    r = cmap.config.merge_radius
    out = []
    for lm in cmap.landmarks:
        d = math.hypot(lm.x - x, lm.y - y)
        if d <= r:
            out.append((d, lm.id, lm))
    out.sort(key=lambda t: (t[0], t[1]))
    return out


def _try_resurrect(cmap: CollectiveMap, newest: Landmark) -> bool:
    o, cfg = cmap.ontology, cmap.config
    group = [
        (lm, t) for lm, t in cmap.discards
        if semantically_similar(o, lm.cls, newest.cls)
        and math.hypot(lm.x - newest.x, lm.y - newest.y) <= cfg.proximity_tolerance
    ]
    if len(group) < cfg.resurrection_threshold:
        return False
    members = [lm for lm, _ in group]
    ids = {id(lm) for lm in members}
    cmap.discards = [(lm, t) for lm, t in cmap.discards if id(lm) not in ids]
    best = max(members, key=lambda lm: lm.confidence)
    mx = sum(lm.x for lm in members) / len(members)
    my = sum(lm.y for lm in members) / len(members)
    risen = best.copy(x=mx, y=my, observations=sum(lm.observations for lm in members))
    near = _neighbours(cmap, mx, my)
    if near:
        # the landmark at that position is replaced by the resurrected feature
        target = near[0][2]
        if semantically_similar(o, target.cls, risen.cls):
            _combine(target, risen)
            _settle(cmap, target)
            return True
        for attr in ("cls", "confidence", "x", "y", "true_x", "true_y",
                     "feature_id", "source", "observations"):
            setattr(target, attr, getattr(risen, attr))
    else:
        target = risen.copy(id=cmap.new_id())
        cmap.map.add(target)
    _settle(cmap, target)
    return True


def merge_landmark(cmap: CollectiveMap, incoming: Landmark, time: float = 0.0,
                   frame: str = COLLECTIVE) -> MergeOutcome:
    """Apply the map-matching rules to one incoming collective-frame landmark."""
    if frame != COLLECTIVE:
        raise FrameError("incoming landmark must be in the collective frame")
    o, cfg = cmap.ontology, cmap.config
    near = _neighbours(cmap, incoming.x, incoming.y)
    if not near:
        cmap.map.add(incoming.copy(id=cmap.new_id()))
        return MergeOutcome.ADDED
    similar = [lm for _, _, lm in near if semantically_similar(o, lm.cls, incoming.cls)]
    if similar:
        keep = similar[0]
        _combine(keep, incoming.copy())
        _settle(cmap, keep)
        return MergeOutcome.MERGED
    separation = near[0][0]
    if incoming.confidence >= cfg.confidence_floor and separation >= cfg.proximity_tolerance:
        cmap.map.add(incoming.copy(id=cmap.new_id()))
        return MergeOutcome.ADDED
    stored = incoming.copy()
    cmap.discards.append((stored, time))
    if _try_resurrect(cmap, stored):
        return MergeOutcome.RESURRECTED
    return MergeOutcome.DISCARDED


def merge_map(cmap: CollectiveMap, edge_map: LandmarkMap, time: float = 0.0) -> list[MergeOutcome]:
    """Merge every landmark of a rebased map in insertion order."""
    if edge_map.frame != COLLECTIVE:
        raise FrameError("rebase the edge map before merging")
    return [merge_landmark(cmap, lm, time) for lm in edge_map]


def dispersion_incentives(positions, gain: float = 1.0, cap: float | None = None) -> np.ndarray:
    """Unit vectors pointing away from the global centre of mass, scaled by ``gain``.

    Agents sitting on the centre of mass, or farther than ``cap`` from it, get zero.
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    out = np.zeros_like(pos)
    if len(pos) < 2:
        return out
    gcm = pos.mean(axis=0)
    d = pos - gcm
    dist = np.hypot(d[:, 0], d[:, 1])
    ok = dist > 1e-12
    if cap is not None:
        ok &= dist <= cap
    out[ok] = gain * d[ok] / dist[ok, None]
    return out


@dataclass
class ControlAgent:
    """Receives edge-map snapshots, rebases them and keeps the collective maps.

    Static landmarks feed the matching map; dynamic observations go to a
    separate observation layer that is deduplicated with the same rules but
    never used for matching.
    """

    ontology: Ontology
    start_poses: dict[int, tuple[float, float, float]]
    config: MergeConfig = field(default_factory=MergeConfig)
    collective: CollectiveMap = None
    observation_layer: CollectiveMap = None
    _seen: set[tuple[int, str, int]] = field(default_factory=set)

    def __post_init__(self):
        if self.collective is None:
            self.collective = CollectiveMap(self.ontology, self.config)
        if self.observation_layer is None:
            self.observation_layer = CollectiveMap(self.ontology, self.config)

    def rebase(self, agent_id: int, edge_map: LandmarkMap) -> LandmarkMap:
        if agent_id not in self.start_poses:
            raise KeyError(f"unknown agent id {agent_id}")
        return rebase_map(edge_map, self.start_poses[agent_id])

    def receive(self, agent_id: int, static_map: LandmarkMap,
                dynamic_log: LandmarkMap | None = None, time: float = 0.0) -> list[MergeOutcome]:
        """Merge landmarks from a snapshot that were not received before."""
        outcomes = []
        for layer, kind, snap in ((self.collective, "s", static_map),
                                  (self.observation_layer, "d", dynamic_log)):
            if snap is None:
                continue
            fresh = LandmarkMap(LOCAL, [lm for lm in snap if (agent_id, kind, lm.id) not in self._seen])
            self._seen.update((agent_id, kind, lm.id) for lm in fresh)
            rebased = self.rebase(agent_id, fresh)
            outcomes.extend(merge_map(layer, rebased, time))
        return outcomes

    def classification_landmarks(self) -> list[Landmark]:
        return list(self.collective.landmarks) + list(self.observation_layer.landmarks)
