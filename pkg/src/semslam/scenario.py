"""Synthetic ground-truth worlds: zoned environment maps populated with typed features.

Coordinates are km with the origin at the lower-left corner of the bounds.
Grid arrays are indexed ``[row, col]`` with row 0 at the bottom (smallest y).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import geometry
from .ontology import UNKNOWN, Ontology, UnknownConceptError

GRID_SIZE = 24

_SCENARIO_KEYS = {"name", "bounds", "zones", "features", "agent_starts", "seed"}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Zone:
    label: str
    polygon: tuple[tuple[float, float], ...]

    @classmethod
    def rect(cls, label: str, x0: float, y0: float, x1: float, y1: float) -> "Zone":
        return cls(label, ((x0, y0), (x1, y0), (x1, y1), (x0, y1)))

    @property
    def area(self) -> float:
        return geometry.polygon_area(self.polygon)

    def contains(self, pt) -> bool:
        return geometry.point_in_polygon(pt, self.polygon)

    def bbox(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.polygon]
        ys = [p[1] for p in self.polygon]
        return min(xs), min(ys), max(xs), max(ys)

    def is_axis_rect(self) -> bool:
        if len(self.polygon) != 4:
            return False
        x0, y0, x1, y1 = self.bbox()
        return set(self.polygon) == {(x0, y0), (x1, y0), (x1, y1), (x0, y1)}


@dataclass(frozen=True)
class Feature:
    id: int
    cls: str
    x: float
    y: float
    static: bool = True

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    bounds: tuple[float, float]
    zones: tuple[Zone, ...] = ()
    features: tuple[Feature, ...] = ()
    seed: int = 0
    agent_starts: tuple[tuple[float, float, float], ...] = ()

    @property
    def width(self) -> float:
        return self.bounds[0]

    @property
    def height(self) -> float:
        return self.bounds[1]

    @property
    def area(self) -> float:
        return self.bounds[0] * self.bounds[1]

    @cached_property
    def feature_xy(self) -> np.ndarray:
        return np.array([(f.x, f.y) for f in self.features], dtype=float).reshape(-1, 2)

    def zone_label_at(self, pt) -> str:
        for z in self.zones:
            if z.contains(pt):
                return z.label
        return UNKNOWN

    def to_dict(self) -> dict:
        zones = []
        for z in self.zones:
            if z.is_axis_rect():
                zones.append({"label": z.label, "rect": list(z.bbox())})
            else:
                zones.append({"label": z.label, "polygon": [list(p) for p in z.polygon]})
        return {
            "name": self.name,
            "bounds": list(self.bounds),
            "seed": self.seed,
            "zones": zones,
            "agent_starts": [list(s) for s in self.agent_starts],
            "features": [
                {"id": f.id, "class": f.cls, "x": f.x, "y": f.y, "static": f.static}
                for f in self.features
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _validate(spec: ScenarioSpec, ontology: Ontology | None) -> None:
    w, h = spec.bounds
    if not (w > 0 and h > 0):
        raise ScenarioError(f"bounds must be positive, got {spec.bounds}")
    ids = set()
    for f in spec.features:
        if not (0.0 <= f.x <= w and 0.0 <= f.y <= h):
            raise ScenarioError(f"feature {f.id} ({f.cls}) at ({f.x}, {f.y}) lies outside bounds")
        if f.id in ids:
            raise ScenarioError(f"duplicate feature id {f.id}")
        ids.add(f.id)
        if ontology is not None and f.cls not in ontology.attributes:
            raise UnknownConceptError(f.cls)
    for z in spec.zones:
        if ontology is not None and z.label not in ontology.environments:
            raise UnknownConceptError(z.label)
    for s in spec.agent_starts:
        if not (0.0 <= s[0] <= w and 0.0 <= s[1] <= h):
            raise ScenarioError(f"agent start {s} lies outside bounds")


def scenario_from_dict(data: Mapping, ontology: Ontology | None = None) -> ScenarioSpec:
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario must be a JSON object")
    extra = set(data) - _SCENARIO_KEYS
    if extra:
        raise ScenarioError(f"unknown scenario keys {sorted(extra)}")
    if "bounds" not in data:
        raise ScenarioError("scenario missing 'bounds'")
    bounds = tuple(float(v) for v in data["bounds"])
    if len(bounds) != 2:
        raise ScenarioError("bounds must be [width, height]")

    zones = []
    for z in data.get("zones", []):
        if "rect" in z:
            zones.append(Zone.rect(z["label"], *map(float, z["rect"])))
        elif "polygon" in z:
            zones.append(Zone(z["label"], tuple((float(x), float(y)) for x, y in z["polygon"])))
        else:
            raise ScenarioError(f"zone {z.get('label')!r} needs 'rect' or 'polygon'")

    features = []
    for i, f in enumerate(data.get("features", [])):
        cls = f["class"]
        if "static" in f:
            static = bool(f["static"])
        elif ontology is not None and cls in ontology.attributes:
            static = ontology.is_static(cls)
        else:
            static = True
        features.append(Feature(int(f.get("id", i)), cls, float(f["x"]), float(f["y"]), static))

    starts = []
    for s in data.get("agent_starts", []):
        s = [float(v) for v in s]
        starts.append((s[0], s[1], s[2] if len(s) > 2 else 0.0))

    spec = ScenarioSpec(
        name=str(data.get("name", "scenario")),
        bounds=bounds,
        zones=tuple(zones),
        features=tuple(features),
        seed=int(data.get("seed", 0)),
        agent_starts=tuple(starts),
    )
    _validate(spec, ontology)
    return spec


def load_scenario(path, ontology: Ontology | None = None) -> ScenarioSpec:
    """Load a scenario file, cross-checking feature classes against ``ontology``."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return scenario_from_dict(data, ontology)


def save_scenario(spec: ScenarioSpec, path) -> None:
    Path(path).write_text(spec.dumps())


# Preset layouts: zones in unit-square fractions, scaled to the preset bounds.
# Areas and default densities mirror the six simulated trial regions.
@dataclass(frozen=True)
class Preset:
    side: float
    density: float
    zones: tuple[tuple[str, tuple], ...]
    ontology: str = "canberra"


def _r(label, x0, y0, x1, y1):
    return (label, ("rect", x0, y0, x1, y1))


def _p(label, *pts):
    return (label, ("polygon",) + pts)


PRESETS: dict[str, Preset] = {
    "quadrant": Preset(2.0, 20.0, (
        _r("Commercial", 0, 0, .5, .5), _r("Residential", .5, 0, 1, .5),
        _r("Industrial", 0, .5, .5, 1), _r("NonUrban", .5, .5, 1, 1)), "exclusive"),
    "small": Preset(0.5, 80.0, (
        _r("Commercial", 0, 0, .5, .5), _r("Residential", .5, 0, 1, .5),
        _r("Industrial", 0, .5, .5, 1), _r("NonUrban", .5, .5, 1, 1)), "exclusive"),
    "gunghalin": Preset(math.sqrt(29.5609), 125.0, (
        _r("Commercial", .35, .35, .65, .65),
        _r("Residential", 0, 0, .35, 1), _r("Residential", .65, .5, 1, 1),
        _r("CommunityFacility", .35, .65, .65, 1),
        _r("TransportServices", .35, 0, .65, .35),
        _r("UrbanOpenSpace", .65, .35, 1, .5),
        _p("NonUrban", (.65, 0), (1, 0), (1, .35), (.82, .35), (.65, .15)))),
    "airport": Preset(math.sqrt(27.8891), 7.1, (
        _r("NonUrban", 0, 0, 1, .6), _r("TransportServices", 0, .6, .7, .85),
        _r("CommunityFacility", .7, .6, 1, .85), _r("NonUrban", 0, .85, 1, 1))),
    "fyshwick": Preset(math.sqrt(6.6667), 22.8, (
        _r("Industrial", 0, 0, 1, .6), _r("Commercial", 0, .6, .6, 1),
        _r("TransportServices", .6, .6, 1, 1))),
    "kingston": Preset(math.sqrt(0.5041), 420.0, (
        _r("Commercial", 0, 0, .5, .5), _r("Residential", 0, .5, 1, 1),
        _r("UrbanOpenSpace", .5, 0, 1, .5))),
    "train_depot": Preset(math.sqrt(1.0976), 152.0, (
        _r("TransportServices", 0, 0, 1, .45), _r("Industrial", 0, .45, .5, 1),
        _r("Residential", .5, .45, 1, 1))),
    "city": Preset(1.35, 235.0, (
        _r("Commercial", .2, .2, .8, .8), _r("Residential", 0, 0, 1, .2),
        _r("CommunityFacility", 0, .2, .2, 1), _r("UrbanOpenSpace", .8, .2, 1, 1),
        _r("Commercial", .2, .8, .8, 1))),
}


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def preset_zones(preset: str) -> tuple[tuple[float, float], tuple[Zone, ...]]:
    if preset not in PRESETS:
        raise ScenarioError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[preset]
    s = p.side
    zones = []
    for label, geom in p.zones:
        if geom[0] == "rect":
            _, x0, y0, x1, y1 = geom
            zones.append(Zone.rect(label, x0 * s, y0 * s, x1 * s, y1 * s))
        else:
            zones.append(Zone(label, tuple((x * s, y * s) for x, y in geom[1:])))
    return (s, s), tuple(zones)


def default_agent_starts(bounds, n: int = 3) -> tuple[tuple[float, float, float], ...]:
    """``n`` equidistant points on a circle about the centre, facing outward."""
    w, h = bounds
    r = 0.25 * min(w, h)
    out = []
    for k in range(n):
        a = 2 * math.pi * k / n + math.pi / 2
        out.append((w / 2 + r * math.cos(a), h / 2 + r * math.sin(a), a))
    return tuple(out)


def _zone_classes(ontology: Ontology, env: str) -> tuple[list[str], np.ndarray]:
    names = [f for f in ontology.feature_classes if ontology.relations.get((f, env), 0.0) > 0]
    if not names:
        raise ScenarioError(f"ontology has no feature classes for environment {env!r}")
    w = np.array([ontology.relations[(f, env)] for f in names])
    return names, w / w.sum()


def _sample_in_zone(zone: Zone, rng: np.random.Generator) -> tuple[float, float]:
    x0, y0, x1, y1 = zone.bbox()
    if zone.is_axis_rect():
        return float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1))
    for _ in range(10_000):
        pt = (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
        if zone.contains(pt):
            return pt
    raise ScenarioError(f"could not sample inside zone {zone.label}")


def generate_scenario(
    preset: str,
    density: float | Mapping[str, float] | None = None,
    seed: int = 0,
    ontology: Ontology | None = None,
    n_agents: int = 3,
) -> ScenarioSpec:
    """Populate a preset layout with features.

    ``density`` is features per km², either one value for all zones or a
    mapping from zone label to density (labels absent from the mapping get 0).
    Each zone receives ``round(density * zone_area)`` features drawn from the
    ontology classes related to that zone's environment, weighted by proximity.
    """
    from .ontology import builtin_ontology

    bounds, zones = preset_zones(preset)
    if ontology is None:
        ontology = builtin_ontology(PRESETS[preset].ontology)
    if density is None:
        density = PRESETS[preset].density
    rng = np.random.default_rng(seed)
    features: list[Feature] = []
    for zone in zones:
        d = density.get(zone.label, 0.0) if isinstance(density, Mapping) else density
        if d < 0:
            raise ScenarioError("densities must be non-negative")
        count = _round_half_up(d * zone.area)
        if count == 0:
            continue
        names, p = _zone_classes(ontology, zone.label)
        picks = rng.choice(len(names), size=count, p=p)
        for k in picks:
            x, y = _sample_in_zone(zone, rng)
            cls = names[int(k)]
            features.append(Feature(len(features), cls, x, y, ontology.is_static(cls)))
    dens_tag = "mixed" if isinstance(density, Mapping) else f"{density:g}"
    return ScenarioSpec(
        name=f"{preset}-d{dens_tag}-s{seed}",
        bounds=bounds,
        zones=zones,
        features=tuple(features),
        seed=seed,
        agent_starts=default_agent_starts(bounds, n_agents),
    )


@dataclass(frozen=True)
class GroundTruthGrid:
    labels: np.ndarray = field(repr=False)
    bounds: tuple[float, float]

    @property
    def cell_size(self) -> tuple[float, float]:
        n_rows, n_cols = self.labels.shape
        return self.bounds[0] / n_cols, self.bounds[1] / n_rows


def cell_centres(bounds, n: int = GRID_SIZE) -> np.ndarray:
    """``(n, n, 2)`` array of cell-centre coordinates indexed ``[row, col]``."""
    w, h = bounds
    xs = (np.arange(n) + 0.5) * w / n
    ys = (np.arange(n) + 0.5) * h / n
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx, gy], axis=-1)


def ground_truth_grid(spec: ScenarioSpec, n: int = GRID_SIZE) -> GroundTruthGrid:
    """Label each cell with the first zone containing its centre (Unknown if none)."""
    centres = cell_centres(spec.bounds, n)
    labels = np.full((n, n), UNKNOWN, dtype=object)
    for r in range(n):
        for c in range(n):
            labels[r, c] = spec.zone_label_at(tuple(centres[r, c]))
    return GroundTruthGrid(labels, tuple(spec.bounds))
