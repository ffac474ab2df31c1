"""Semantics engine: environment probability distribution of a map segment.

For an environment ``e`` and each unordered pair of features ``x < y`` whose
classes both relate to ``e`` (an *inference*), the pair contributes

    (SP(e, f_x) * c_x + SP(e, f_y) * c_y) * (1 - d(x, y))

where ``c`` is detection confidence and ``d`` the pair distance divided by the
segment's maximum possible distance. The summed confidence is divided by twice
the inference count so a perfect coincident pair scores 1. The probability of
``e`` blends that confidence with the share of possible pairs that are
inferences::

    P(e) = alpha * C(e) + (1 - alpha) * inferences(e) / (z (z - 1) / 2)

With no inference, ``C(e)`` falls back to the best single feature
``max SP(e, f) * c`` and the inference term is 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geometry
from .ontology import UNKNOWN, Ontology


@dataclass(frozen=True)
class SegmentFeatures:
    classes: tuple[str, ...]
    confidences: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)
    max_distance: float

    def __post_init__(self):
        if len(self.classes) != len(self.confidences) or len(self.classes) != len(self.positions):
            raise ValueError("classes, confidences and positions must align")

    @property
    def z(self) -> int:
        return len(self.classes)

    @classmethod
    def from_landmarks(cls, landmarks, rect=None) -> "SegmentFeatures":
        """Build from landmarks; ``rect = (x0, y0, x1, y1)`` sets the diagonal as the
        normalizer, otherwise the landmarks' convex-hull diameter is used."""
        lms = list(landmarks)
        pos = np.array([(lm.x, lm.y) for lm in lms], dtype=float).reshape(-1, 2)
        conf = np.array([lm.confidence for lm in lms], dtype=float)
        if rect is not None:
            x0, y0, x1, y1 = rect
            dmax = math.hypot(x1 - x0, y1 - y0)
        else:
            dmax = geometry.diameter(pos)
        return cls(tuple(lm.cls for lm in lms), conf, pos, dmax)


@dataclass(frozen=True)
class EnvironmentDistribution:
    environments: tuple[str, ...]
    probabilities: np.ndarray = field(repr=False)
    confidences: np.ndarray = field(repr=False)
    inferences: np.ndarray = field(repr=False)
    label: str
    alpha: float

    @property
    def max_p(self) -> float:
        return float(self.probabilities.max()) if len(self.probabilities) else 0.0

    def as_dict(self) -> dict[str, float]:
        return {e: float(p) for e, p in zip(self.environments, self.probabilities)}

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "alpha": self.alpha,
            "probabilities": self.as_dict(),
            "confidences": {e: float(c) for e, c in zip(self.environments, self.confidences)},
            "inferences": {e: int(n) for e, n in zip(self.environments, self.inferences)},
        }


def _distance_matrix(seg: SegmentFeatures) -> np.ndarray:
    p = seg.positions
    d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
    if seg.max_distance <= 0:
        return np.zeros_like(d)
    return np.clip(d / seg.max_distance, 0.0, 1.0)


def normalized_pairwise_distance(seg: SegmentFeatures, i: int, j: int) -> float:
    if i == j:
        raise ValueError("pairwise distance needs two distinct features")
    if seg.max_distance <= 0:
        return 0.0
    d = math.dist(seg.positions[i], seg.positions[j]) / seg.max_distance
    return min(1.0, max(0.0, d))


def _confidence_terms(seg: SegmentFeatures, sp: np.ndarray, ordered_pairs: bool):
    """Per-environment (C, inference count) from a ``(z, E)`` proximity matrix."""
    z, n_env = sp.shape
    if z == 0:
        return np.zeros(n_env), np.zeros(n_env, dtype=int)
    weighted = sp * seg.confidences[:, None]
    rel = sp > 0
    if z == 1:
        return weighted[0].copy(), np.zeros(n_env, dtype=int)
    closeness = 1.0 - _distance_matrix(seg)
    pair_mask = ~np.eye(z, dtype=bool) if ordered_pairs else np.triu(np.ones((z, z), dtype=bool), 1)
    both = rel[:, None, :] & rel[None, :, :] & pair_mask[:, :, None]
    mass = (weighted[:, None, :] + weighted[None, :, :]) * closeness[:, :, None]
    raw = np.where(both, mass, 0.0).sum(axis=(0, 1))
    count = both.sum(axis=(0, 1))
    conf = np.where(count > 0, raw / np.maximum(2 * count, 1), weighted.max(axis=0))
    return conf, count


def environment_confidence(seg: SegmentFeatures, o: Ontology, e: str,
                           ordered_pairs: bool = False) -> tuple[float, int]:
    sp = o.proximity_matrix(seg.classes, (e,))
    conf, count = _confidence_terms(seg, sp, ordered_pairs)
    return float(conf[0]), int(count[0])


def _argmax_label(envs: Sequence[str], p: np.ndarray) -> str:
    if len(p) == 0 or p.max() <= 0:
        return UNKNOWN
    top = p.max()
    return min(e for e, v in zip(envs, p) if v == top)


def distribution_from_terms(envs, conf, count, z, alpha, ordered_pairs=False) -> EnvironmentDistribution:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    max_pairs = z * (z - 1) if ordered_pairs else z * (z - 1) // 2
    ratio = count / max_pairs if max_pairs > 0 else np.zeros(len(envs))
    p = alpha * np.asarray(conf, dtype=float) + (1.0 - alpha) * ratio
    return EnvironmentDistribution(tuple(envs), p, np.asarray(conf, dtype=float),
                                   np.asarray(count), _argmax_label(envs, p), alpha)


def environment_distribution(seg: SegmentFeatures, o: Ontology, alpha: float = 0.5,
                             ordered_pairs: bool = False) -> EnvironmentDistribution:
    envs = o.classifiable_environments
    sp = o.proximity_matrix(seg.classes, envs)
    conf, count = _confidence_terms(seg, sp, ordered_pairs)
    return distribution_from_terms(envs, conf, count, seg.z, alpha, ordered_pairs)


def classify_segment(seg: SegmentFeatures, o: Ontology, alpha: float = 0.5,
                     threshold: float = 0.5) -> tuple[str, float, bool]:
    """``(label, max P, max P >= threshold)``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    dist = environment_distribution(seg, o, alpha)
    return dist.label, dist.max_p, dist.max_p >= threshold


class IncrementalSegment:
    """Grow a landmark set one point at a time, tracking the distribution in O(zE).

    The normalizer is the set's point diameter, so the summed closeness is kept
    as ``sum(mass) - sum(mass * dist) / diameter``.
    """

    def __init__(self, o: Ontology, alpha: float = 0.5):
        self.ontology = o
        self.alpha = alpha
        self.envs = o.classifiable_environments
        n = len(self.envs)
        self.pos: list[tuple[float, float]] = []
        self.weighted: list[np.ndarray] = []
        self.rel: list[np.ndarray] = []
        self.mass = np.zeros(n)
        self.mass_dist = np.zeros(n)
        self.count = np.zeros(n, dtype=int)
        self.diameter = 0.0
        self.best_single = np.zeros(n)

    def _terms_with(self, x, y, cls, conf):
        sp = self.ontology.proximity_matrix((cls,), self.envs)[0]
        w = sp * conf
        rel = sp > 0
        mass, mass_dist, count = self.mass.copy(), self.mass_dist.copy(), self.count.copy()
        dia = self.diameter
        if self.pos:
            P = np.asarray(self.pos)
            dists = np.hypot(P[:, 0] - x, P[:, 1] - y)
            W = np.asarray(self.weighted)
            R = np.asarray(self.rel) & rel[None, :]
            pair_mass = np.where(R, W + w[None, :], 0.0)
            mass += pair_mass.sum(0)
            mass_dist += (pair_mass * dists[:, None]).sum(0)
            count += R.sum(0)
            dia = max(dia, float(dists.max()))
        return w, rel, mass, mass_dist, count, dia

    def _distribution(self, mass, mass_dist, count, dia, best_single, z):
        raw = mass - (mass_dist / dia if dia > 0 else 0.0)
        conf = np.where(count > 0, raw / np.maximum(2 * count, 1), best_single)
        return distribution_from_terms(self.envs, conf, count, z, self.alpha)

    def preview(self, x, y, cls, conf) -> EnvironmentDistribution:
        w, rel, mass, mass_dist, count, dia = self._terms_with(x, y, cls, conf)
        return self._distribution(mass, mass_dist, count, dia,
                                  np.maximum(self.best_single, w), len(self.pos) + 1)

    def add(self, x, y, cls, conf) -> EnvironmentDistribution:
        w, rel, self.mass, self.mass_dist, self.count, self.diameter = self._terms_with(x, y, cls, conf)
        self.best_single = np.maximum(self.best_single, w)
        self.pos.append((x, y))
        self.weighted.append(w)
        self.rel.append(rel)
        return self.current()

    def current(self) -> EnvironmentDistribution:
        return self._distribution(self.mass, self.mass_dist, self.count, self.diameter,
                                  self.best_single, len(self.pos))
