"""Five-tuple knowledge base mapping feature classes to environment types.

The ontology is loaded from JSON and is immutable afterwards. File schema::

    {
      "name": "optional label",
      "environments": ["Commercial", "Residential", ...],
      "feature_classes": [
        {"name": "tree", "static": true,
         "superclasses": [{"env": "NonUrban", "sp": 0.9}, ...],
         "similarity_group": "vegetation"}          # optional
      ],
      "instances": [{"name": "parliament_house", "concept": "building"}]  # optional
    }

``Unknown`` is always part of the environment set; it may not be used as a
superclass. Unknown keys anywhere in the file are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np

UNKNOWN = "Unknown"

_TOP_KEYS = {"name", "environments", "feature_classes", "instances"}
_CLASS_KEYS = {"name", "static", "superclasses", "similarity_group"}
_EDGE_KEYS = {"env", "sp"}
_INSTANCE_KEYS = {"name", "concept"}

AXIOMS = (
    "every feature class has at least one environment superclass",
    "every semantic proximity lies in (0, 1]",
    "environment names are unique and include Unknown",
    "superclass edges reference declared environments",
    "concept names are unique across environments and feature classes",
)


class OntologyError(ValueError):
    """Malformed ontology file."""


class AxiomViolation(OntologyError):
    def __init__(self, axiom: str, concepts):
        self.axiom = axiom
        self.concepts = sorted(concepts)
        super().__init__(f"axiom violated ({axiom}): {', '.join(self.concepts)}")


class UnknownConceptError(KeyError):
    def __str__(self):
        return f"unknown concept: {self.args[0]!r}"


@dataclass(frozen=True)
class SemanticProximity:
    feature_class: str
    environment: str
    value: float


@dataclass(frozen=True)
class Ontology:
    """Immutable ontology ``<C, R, a, I, A>``.

    ``relations`` maps ``(feature_class, environment)`` to its semantic
    proximity weight; absent pairs have proximity 0.
    """

    environments: tuple[str, ...]
    feature_classes: tuple[str, ...]
    relations: Mapping[tuple[str, str], float]
    attributes: Mapping[str, Mapping[str, Any]]
    instances: Mapping[str, str] = field(default_factory=dict)
    axioms: tuple[str, ...] = AXIOMS
    name: str = ""

    @property
    def concepts(self) -> frozenset[str]:
        """Declared concepts; the implicit Unknown label is not one of them."""
        return frozenset(self.classifiable_environments) | frozenset(self.feature_classes)

    @property
    def classifiable_environments(self) -> tuple[str, ...]:
        """Environment types a segment can be assigned (everything but Unknown)."""
        return tuple(e for e in self.environments if e != UNKNOWN)

    def _check_class(self, f: str) -> None:
        if f not in self.attributes:
            raise UnknownConceptError(f)

    def _check_env(self, e: str) -> None:
        if e not in self.environments:
            raise UnknownConceptError(e)

    def is_static(self, f: str) -> bool:
        self._check_class(f)
        return bool(self.attributes[f]["static"])

    def similarity_group(self, f: str) -> str | None:
        self._check_class(f)
        return self.attributes[f].get("similarity_group")

    def proximity_matrix(self, classes, environments=None) -> np.ndarray:
        """Rows: ``classes``; columns: ``environments`` (default: classifiable ones)."""
        envs = self.classifiable_environments if environments is None else environments
        out = np.zeros((len(classes), len(envs)))
        for i, f in enumerate(classes):
            self._check_class(f)
            for j, e in enumerate(envs):
                out[i, j] = self.relations.get((f, e), 0.0)
        return out


def semantic_proximity(o: Ontology, f: str, e: str) -> float:
    o._check_class(f)
    o._check_env(e)
    return o.relations.get((f, e), 0.0)


def environment_superclasses(o: Ontology, f: str) -> frozenset[str]:
    o._check_class(f)
    return frozenset(e for (c, e), sp in o.relations.items() if c == f and sp > 0)


def semantically_similar(o: Ontology, c1: str, c2: str) -> bool:
    o._check_class(c1)
    o._check_class(c2)
    if c1 == c2:
        return True
    g1 = o.attributes[c1].get("similarity_group")
    return g1 is not None and g1 == o.attributes[c2].get("similarity_group")


def _reject_unknown_keys(obj: Mapping, allowed: set, where: str) -> None:
    if not isinstance(obj, Mapping):
        raise OntologyError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        raise OntologyError(f"{where}: unknown keys {sorted(extra)}")


def ontology_from_dict(data: Mapping[str, Any]) -> Ontology:
    _reject_unknown_keys(data, _TOP_KEYS, "ontology")
    for key in ("environments", "feature_classes"):
        if key not in data:
            raise OntologyError(f"ontology: missing section {key!r}")

    envs = [str(e) for e in data["environments"]]
    dup_envs = {e for e in envs if envs.count(e) > 1}
    if dup_envs:
        raise AxiomViolation(AXIOMS[2], dup_envs)
    if UNKNOWN not in envs:
        envs.append(UNKNOWN)

    relations: dict[tuple[str, str], float] = {}
    attributes: dict[str, dict[str, Any]] = {}
    no_super, bad_sp, bad_env, dups = set(), set(), set(), set()
    for i, fc in enumerate(data["feature_classes"]):
        _reject_unknown_keys(fc, _CLASS_KEYS, f"feature_classes[{i}]")
        try:
            name = str(fc["name"])
        except KeyError:
            raise OntologyError(f"feature_classes[{i}]: missing 'name'") from None
        if name in attributes or name in envs:
            dups.add(name)
        static = fc.get("static", True)
        if not isinstance(static, bool):
            raise OntologyError(f"{name}: 'static' must be a boolean")
        attributes[name] = {"static": static}
        if fc.get("similarity_group") is not None:
            attributes[name]["similarity_group"] = str(fc["similarity_group"])
        edges = fc.get("superclasses", [])
        if not edges:
            no_super.add(name)
        for j, edge in enumerate(edges):
            _reject_unknown_keys(edge, _EDGE_KEYS, f"{name}.superclasses[{j}]")
            env = edge.get("env")
            try:
                sp = float(edge.get("sp"))
            except (TypeError, ValueError):
                raise OntologyError(f"{name}: proximity to {env!r} is not a number") from None
            if env not in envs or env == UNKNOWN:
                bad_env.add(f"{name}->{env}")
            if not 0.0 < sp <= 1.0:
                bad_sp.add(f"{name}->{env}={sp:g}")
            relations[(name, env)] = sp

    if dups:
        raise AxiomViolation(AXIOMS[4], dups)
    if bad_env:
        raise AxiomViolation(AXIOMS[3], bad_env)
    if bad_sp:
        raise AxiomViolation(AXIOMS[1], bad_sp)
    if no_super:
        raise AxiomViolation(AXIOMS[0], no_super)

    instances: dict[str, str] = {}
    for i, inst in enumerate(data.get("instances", [])):
        _reject_unknown_keys(inst, _INSTANCE_KEYS, f"instances[{i}]")
        if inst.get("concept") not in attributes and inst.get("concept") not in envs:
            raise UnknownConceptError(inst.get("concept"))
        instances[str(inst["name"])] = str(inst["concept"])

    return Ontology(
        environments=tuple(envs),
        feature_classes=tuple(attributes),
        relations=MappingProxyType(relations),
        attributes=MappingProxyType({k: MappingProxyType(v) for k, v in attributes.items()}),
        instances=MappingProxyType(instances),
        name=str(data.get("name", "")),
    )


def load_ontology(path) -> Ontology:
    """Load and validate an ontology file.

    Raises :class:`OntologyError` on parse problems and :class:`AxiomViolation`
    (listing the offending concepts) when a constraint fails.
    """
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise OntologyError(f"{path}: {exc}") from exc
    return ontology_from_dict(data)


def builtin_ontology(name: str = "canberra") -> Ontology:
    """Shipped ontologies: ``canberra`` (seven land-use types) and ``exclusive``."""
    ref = resources.files("semslam") / "data" / f"{name}_ontology.json"
    if not ref.is_file():
        raise FileNotFoundError(f"no built-in ontology {name!r}")
    return ontology_from_dict(json.loads(ref.read_text()))


def builtin_ontology_path(name: str = "canberra") -> Path:
    return Path(str(resources.files("semslam") / "data" / f"{name}_ontology.json"))
