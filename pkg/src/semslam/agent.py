"""Edge agent: random-walk search, simulated detection, target acquisition, drift and oracle.

The trained object detector is replaced by a parametric sensor: each feature
inside range and field of view is reported with probability ``p_detect``,
with a uniformly drawn confidence and Gaussian range/bearing noise.

Agents keep their local maps in a frame anchored at their start pose, so the
first landmark of an agent sitting at its start is referenced from ``(0, 0)``.
One simulation step is one simulated second.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import frame_to_world, world_to_frame, wrap_angle
from .landmarks import LOCAL, Landmark, LandmarkMap
from .ontology import Ontology
from .scenario import ScenarioSpec

DT = 1.0


@dataclass(frozen=True)
class SensorConfig:
    p_detect: float = 0.9
    sigma_range: float = 0.0
    sigma_bearing: float = 0.0
    range: float = 0.1
    fov: float = math.pi / 2
    conf_low: float = 0.6
    conf_high: float = 1.0

    @property
    def sweep_width(self) -> float:
        return 2.0 * self.range * math.sin(min(self.fov / 2.0, math.pi / 2.0))


@dataclass(frozen=True)
class MotionConfig:
    speed: float = 0.01
    turn_sigma: float = 0.4
    incentive_weight: float = 0.3
    max_turn: float = math.pi / 4
    acquire_distance: float = 0.005
    step_budget: int = 500


class Mobility(str, enum.Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class Detection:
    cls: str
    confidence: float
    range: float
    bearing: float
    static: bool
    feature_id: int


@dataclass
class AgentState:
    id: int
    pose: np.ndarray
    believed: np.ndarray
    start_pose: tuple[float, float, float]
    speed: float = 0.01
    sweep_width: float = 0.1414
    sensor_range: float = 0.1
    fov: float = math.pi / 2
    local_map: LandmarkMap = field(default_factory=lambda: LandmarkMap(LOCAL))
    observations: LandmarkMap = field(default_factory=lambda: LandmarkMap(LOCAL))
    bias: np.ndarray = field(default_factory=lambda: np.zeros(2))
    target: int | None = None
    approach_steps: int = 0
    acquired: set[int] = field(default_factory=set)
    given_up: set[int] = field(default_factory=set)
    distance_travelled: float = 0.0

    def __post_init__(self):
        if self.speed <= 0 or self.sweep_width <= 0:
            raise ValueError("agent speed and sweep width must be positive")

    @classmethod
    def at(cls, agent_id: int, start, sensor: SensorConfig | None = None,
           motion: MotionConfig | None = None) -> "AgentState":
        sensor = sensor or SensorConfig()
        motion = motion or MotionConfig()
        x, y = float(start[0]), float(start[1])
        h = float(start[2]) if len(start) > 2 else 0.0
        pose = np.array([x, y, h])
        return cls(id=agent_id, pose=pose, believed=pose.copy(), start_pose=(x, y, h),
                   speed=motion.speed, sweep_width=sensor.sweep_width,
                   sensor_range=sensor.range, fov=sensor.fov)

    @property
    def position(self) -> np.ndarray:
        return self.pose[:2]

    @property
    def discovered(self) -> set[int]:
        return self.acquired | {lm.feature_id for lm in self.observations}

    def believed_world(self, lm: Landmark) -> tuple[float, float]:
        return frame_to_world(lm.position, self.start_pose)


def _measure(agent: AgentState, xy: np.ndarray):
    d = xy - agent.pose[:2]
    dist = np.hypot(d[:, 0], d[:, 1])
    bearing = wrap_angle(np.arctan2(d[:, 1], d[:, 0]) - agent.pose[2])
    return dist, bearing


def sense(world: ScenarioSpec, agent: AgentState, sensor: SensorConfig,
          rng: np.random.Generator) -> list[Detection]:
    """Noisy detections of the features inside range and field of view.

    Draws are made in feature-id order for every in-view feature so replays
    are bit-identical.
    """
    if not world.features:
        return []
    dist, bearing = _measure(agent, world.feature_xy)
    in_view = np.flatnonzero((dist <= sensor.range) & (np.abs(bearing) <= sensor.fov / 2.0))
    n = len(in_view)
    if n == 0:
        return []
    hit = rng.random(n) < sensor.p_detect
    conf = rng.uniform(sensor.conf_low, sensor.conf_high, n)
    nr = rng.normal(0.0, sensor.sigma_range, n) if sensor.sigma_range > 0 else np.zeros(n)
    nb = rng.normal(0.0, sensor.sigma_bearing, n) if sensor.sigma_bearing > 0 else np.zeros(n)
    out = []
    for k, i in enumerate(in_view):
        if not hit[k]:
            continue
        f = world.features[i]
        r = float(np.clip(dist[i] + nr[k], 0.0, sensor.range))
        out.append(Detection(f.cls, float(conf[k]), r, float(wrap_angle(bearing[i] + nb[k])),
                             f.static, f.id))
    return out


def classify_static_dynamic(o: Ontology, d: Detection) -> Mobility:
    return Mobility.STATIC if o.is_static(d.cls) else Mobility.DYNAMIC


def select_target(detections, agent: AgentState | None = None) -> Detection | None:
    """Closest static detection; ties go to the smaller |bearing|, then lower feature id."""
    statics = [d for d in detections if d.static]
    if not statics:
        return None
    return min(statics, key=lambda d: (d.range, abs(d.bearing), d.feature_id))


def _advance(agent: AgentState, step: float, bounds) -> None:
    """Move along the current heading, reflecting off the world boundary."""
    w, h = bounds
    x = agent.pose[0] + step * math.cos(agent.pose[2])
    y = agent.pose[1] + step * math.sin(agent.pose[2])
    heading = agent.pose[2]
    if x < 0.0:
        x, heading = -x, math.pi - heading
    elif x > w:
        x, heading = 2 * w - x, math.pi - heading
    if y < 0.0:
        y, heading = -y, -heading
    elif y > h:
        y, heading = 2 * h - y, -heading
    x = min(max(x, 0.0), w)
    y = min(max(y, 0.0), h)
    moved = math.hypot(x - agent.pose[0], y - agent.pose[1])
    agent.pose[:] = (x, y, float(wrap_angle(heading)))
    agent.believed[:2] = agent.pose[:2] + agent.bias
    agent.believed[2] = agent.pose[2]
    agent.distance_travelled += moved


def random_walk_step(agent: AgentState, incentive, rng: np.random.Generator,
                     motion: MotionConfig, bounds) -> np.ndarray:
    """Blend a random turn with the control agent's movement incentive, then advance."""
    turned = agent.pose[2] + rng.normal(0.0, motion.turn_sigma)
    u = np.array([math.cos(turned), math.sin(turned)])
    inc = np.asarray(incentive, dtype=float)
    w = motion.incentive_weight
    blend = (1.0 - w) * u + w * inc
    if np.hypot(*blend) < 1e-12:
        agent.pose[2] = wrap_angle(turned)
    else:
        agent.pose[2] = math.atan2(blend[1], blend[0])
    _advance(agent, agent.speed * DT, bounds)
    return agent.pose.copy()


def apply_drift(agent: AgentState, sigma_drift: float, rng: np.random.Generator) -> np.ndarray:
    """Add one Gaussian increment to the accumulated odometry bias."""
    if sigma_drift > 0:
        agent.bias = agent.bias + rng.normal(0.0, sigma_drift, 2)
    agent.believed[:2] = agent.pose[:2] + agent.bias
    return agent.believed.copy()


class Approach(str, enum.Enum):
    CONTINUE = "continue"
    ACQUIRED = "acquired"
    ABANDONED = "abandoned"


def _insert_landmark(agent: AgentState, feat, conf: float, r: float, b: float,
                     static: bool = True) -> Landmark:
    bh = agent.believed[2] + b
    world = (agent.believed[0] + r * math.cos(bh), agent.believed[1] + r * math.sin(bh))
    local = world_to_frame(world, agent.start_pose)
    target_map = agent.local_map if static else agent.observations
    lm = Landmark(id=target_map.next_id(), cls=feat.cls, confidence=conf,
                  x=local[0], y=local[1], true_x=feat.x, true_y=feat.y,
                  static=static, source=agent.id, feature_id=feat.id)
    target_map.add(lm)
    return lm


def log_dynamic(agent: AgentState, world: ScenarioSpec, d: Detection) -> Landmark | None:
    """Record a dynamic detection once per feature in the observation log."""
    if any(lm.feature_id == d.feature_id for lm in agent.observations):
        return None
    return _insert_landmark(agent, world.features[d.feature_id], d.confidence,
                            d.range, d.bearing, static=False)


def approach_step(agent: AgentState, target: Detection, world: ScenarioSpec,
                  rng: np.random.Generator, sensor: SensorConfig, motion: MotionConfig):
    """One step of target acquisition.

    Re-measures the target, acquires it once within ``acquire_distance``,
    otherwise steers toward the measured bearing and advances. Returns
    ``(Approach, Landmark | None)``.
    """
    feat = world.features[target.feature_id]
    dist, bearing = _measure(agent, np.array([[feat.x, feat.y]]))
    if dist[0] > sensor.range:
        return Approach.ABANDONED, None
    r = float(dist[0] + (rng.normal(0.0, sensor.sigma_range) if sensor.sigma_range > 0 else 0.0))
    r = max(r, 0.0)
    b = float(bearing[0] + (rng.normal(0.0, sensor.sigma_bearing) if sensor.sigma_bearing > 0 else 0.0))
    if r <= motion.acquire_distance:
        lm = _insert_landmark(agent, feat, target.confidence, r, b)
        agent.acquired.add(feat.id)
        return Approach.ACQUIRED, lm
    if agent.approach_steps >= motion.step_budget:
        return Approach.ABANDONED, None
    agent.approach_steps += 1
    agent.pose[2] = wrap_angle(agent.pose[2] + float(np.clip(b, -motion.max_turn, motion.max_turn)))
    step = min(agent.speed * DT, r - 0.5 * motion.acquire_distance)
    _advance(agent, max(step, 0.0), world.bounds)
    return Approach.CONTINUE, None


def approach_and_acquire(agent: AgentState, target: Detection, world: ScenarioSpec,
                         rng: np.random.Generator, sensor: SensorConfig | None = None,
                         motion: MotionConfig | None = None, sigma_drift: float = 0.0,
                         drift_rng: np.random.Generator | None = None) -> Landmark | None:
    """Run :func:`approach_step` to completion; ``None`` means the target was abandoned."""
    sensor = sensor or SensorConfig()
    motion = motion or MotionConfig()
    agent.approach_steps = 0
    while True:
        status, lm = approach_step(agent, target, world, rng, sensor, motion)
        if status is Approach.ACQUIRED:
            return lm
        if status is Approach.ABANDONED:
            return None
        if sigma_drift > 0:
            apply_drift(agent, sigma_drift, drift_rng if drift_rng is not None else rng)


def oracle_correct(agent: AgentState, world: ScenarioSpec | None, theta: float) -> list[int]:
    """Snap landmarks whose believed position lies within ``theta`` of the truth.

    The residual of the most recently acquired snapped landmark is removed from
    the accumulated drift bias. Returns the ids of snapped landmarks.
    """
    snapped = []
    last_residual = None
    for lm in agent.local_map:
        bx, by = agent.believed_world(lm)
        rx, ry = bx - lm.true_x, by - lm.true_y
        if (rx, ry) == (0.0, 0.0):
            continue
        if math.hypot(rx, ry) <= theta:
            lm.x, lm.y = world_to_frame(lm.true_position, agent.start_pose)
            snapped.append(lm.id)
            last_residual = (rx, ry)
    if last_residual is not None:
        agent.bias = agent.bias - np.asarray(last_residual)
        agent.believed[:2] = agent.pose[:2] + agent.bias
    return snapped


@dataclass(frozen=True)
class AgentRngs:
    sense: np.random.Generator
    motion: np.random.Generator
    drift: np.random.Generator

    @classmethod
    def derive(cls, master_seed: int, agent_id: int) -> "AgentRngs":
        ss = np.random.SeedSequence(master_seed, spawn_key=(agent_id,))
        return cls(*(np.random.default_rng(s) for s in ss.spawn(3)))


def step_agent(agent: AgentState, world: ScenarioSpec, ontology: Ontology, incentive,
               rngs: AgentRngs, sensor: SensorConfig, motion: MotionConfig,
               sigma_drift: float = 0.0, oracle_theta: float | None = None) -> Landmark | None:
    """One simulated second for one agent. Returns a newly acquired landmark, if any."""
    acquired = None
    if agent.target is None:
        dets = sense(world, agent, sensor, rngs.sense)
        statics = []
        for d in dets:
            if classify_static_dynamic(ontology, d) is Mobility.STATIC:
                if d.feature_id not in agent.acquired and d.feature_id not in agent.given_up:
                    statics.append(replace(d, static=True))
            else:
                log_dynamic(agent, world, d)
        tgt = select_target(statics, agent)
        if tgt is not None:
            agent.target = tgt
            agent.approach_steps = 0
    if agent.target is not None:
        status, acquired = approach_step(agent, agent.target, world, rngs.sense, sensor, motion)
        if status is not Approach.CONTINUE:
            if status is Approach.ABANDONED:
                agent.given_up.add(agent.target.feature_id)
            agent.target = None
        if status is Approach.ACQUIRED and oracle_theta is not None:
            oracle_correct(agent, world, oracle_theta)
    else:
        random_walk_step(agent, incentive, rngs.motion, motion, world.bounds)
    apply_drift(agent, sigma_drift, rngs.drift)
    return acquired
