"""Map segmentation: recursive grid and nearest-neighbour branch clustering.

Both methods classify regions of the collective map with the semantics engine
and rasterize onto the 24x24 evaluation grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geometry
from .landmarks import Landmark
from .ontology import UNKNOWN, Ontology
from .scenario import GRID_SIZE, cell_centres
from .semantics import (EnvironmentDistribution, IncrementalSegment, SegmentFeatures,
                        environment_distribution)

MAX_DEPTH = 3


# ---------------------------------------------------------------- grid method

@dataclass
class GridSegment:
    rect: tuple[float, float, float, float]
    depth: int
    members: list[int]
    distribution: EnvironmentDistribution
    children: list["GridSegment"] = field(default_factory=list)

    @property
    def label(self) -> str:
        return self.distribution.label

    @property
    def confidence(self) -> float:
        return self.distribution.max_p

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self) -> list["GridSegment"]:
        if self.is_leaf:
            return [self]
        return [leaf for c in self.children for leaf in c.leaves()]

    def to_json(self) -> dict:
        return {"rect": list(self.rect), "depth": self.depth, "count": len(self.members),
                **self.distribution.to_json()}


def _clamped_xy(landmarks, bounds) -> np.ndarray:
    xy = np.array([(lm.x, lm.y) for lm in landmarks], dtype=float).reshape(-1, 2)
    xy[:, 0] = np.clip(xy[:, 0], 0.0, bounds[0])
    xy[:, 1] = np.clip(xy[:, 1], 0.0, bounds[1])
    return xy


def _classify_rect(landmarks, members, rect, o, alpha) -> EnvironmentDistribution:
    seg = SegmentFeatures.from_landmarks([landmarks[i] for i in members], rect=rect)
    return environment_distribution(seg, o, alpha)


def grid_segment(landmarks: Sequence[Landmark], bounds, o: Ontology, alpha: float = 0.5,
                 threshold: float = 0.6, sparsity_floor: int = 4,
                 max_depth: int = MAX_DEPTH) -> list[GridSegment]:
    """Classify the nine initial regions and split unconfident ones into quadrants.

    A segment is split while its top probability is below ``threshold``, it holds
    at least ``sparsity_floor`` landmarks and it is shallower than ``max_depth``.
    Returns the nine root segments; use :func:`grid_leaves` for the final tiling.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    if sparsity_floor < 1:
        raise ValueError("sparsity floor must be at least 1")
    w, h = bounds
    xy = _clamped_xy(landmarks, bounds)

    def build(rect, members, depth):
        dist = _classify_rect(landmarks, members, rect, o, alpha)
        seg = GridSegment(rect, depth, members, dist)
        if (members and dist.max_p < threshold and len(members) >= sparsity_floor
                and depth < max_depth):
            x0, y0, x1, y1 = rect
            mx, my = (x0 + x1) / 2.0, (y0 + y1) / 2.0
            quads = {(0, 0): [], (1, 0): [], (0, 1): [], (1, 1): []}
            for i in members:
                quads[(int(xy[i, 0] >= mx), int(xy[i, 1] >= my))].append(i)
            for (qx, qy), sub in quads.items():
                sub_rect = (mx if qx else x0, my if qy else y0, x1 if qx else mx, y1 if qy else my)
                seg.children.append(build(sub_rect, sub, depth + 1))
        return seg

    cw, ch = w / 3.0, h / 3.0
    cells: dict[tuple[int, int], list[int]] = {(c, r): [] for r in range(3) for c in range(3)}
    for i in range(len(landmarks)):
        c = min(int(xy[i, 0] // cw), 2)
        r = min(int(xy[i, 1] // ch), 2)
        cells[(c, r)].append(i)
    roots = []
    for r in range(3):
        for c in range(3):
            rect = (c * cw, r * ch, w if c == 2 else (c + 1) * cw, h if r == 2 else (r + 1) * ch)
            roots.append(build(rect, cells[(c, r)], 0))
    return roots


def grid_leaves(roots: Sequence[GridSegment]) -> list[GridSegment]:
    return [leaf for r in roots for leaf in r.leaves()]


# -------------------------------------------------------------- branch method

@dataclass
class Fragment:
    id: int
    members: tuple[int, ...]
    points: np.ndarray = field(repr=False)
    distribution: EnvironmentDistribution = field(repr=False)

    @property
    def label(self) -> str:
        return self.distribution.label

    @property
    def confidence(self) -> float:
        return self.distribution.max_p

    @property
    def centroid(self) -> tuple[float, float]:
        c = self.points.mean(axis=0)
        return (float(c[0]), float(c[1]))

    def hull(self) -> list[tuple[float, float]]:
        return geometry.convex_hull(self.points)

    def hull_members(self) -> list[int]:
        """Member indices at the hull vertices, in hull order."""
        lookup = {}
        for i, p in zip(self.members, self.points):
            lookup.setdefault((float(p[0]), float(p[1])), i)
        return [lookup[v] for v in self.hull()]

    def to_json(self, landmarks) -> dict:
        return {"id": self.id, "landmarks": [landmarks[i].id for i in self.members],
                "centroid": list(self.centroid), "hull": [list(p) for p in self.hull()],
                **self.distribution.to_json()}


def make_fragment(fid: int, members, landmarks, o: Ontology, alpha: float) -> Fragment:
    members = tuple(sorted(members))
    lms = [landmarks[i] for i in members]
    seg = SegmentFeatures.from_landmarks(lms)
    pts = np.array([(lm.x, lm.y) for lm in lms], dtype=float).reshape(-1, 2)
    return Fragment(fid, members, pts, environment_distribution(seg, o, alpha))


def nnn_cluster(landmarks: Sequence[Landmark], o: Ontology, alpha: float = 0.5,
                seed_position=(0.0, 0.0), momentum: int = 0, init_size: int = 3) -> list[Fragment]:
    """Progressive nearest-neighbour clustering.

    Each cluster starts from the ``init_size`` unassigned landmarks nearest its
    centre and absorbs the unassigned landmark nearest its centroid for as long
    as the top environment probability does not fall. The first cluster is
    centred on ``seed_position``; each later one on the unassigned landmark
    reached after skipping ``momentum`` landmarks outward from the previous
    cluster.
    """
    n = len(landmarks)
    if n == 0:
        raise ValueError("cannot cluster an empty map")
    if momentum < 0:
        raise ValueError("momentum must be non-negative")
    xy = np.array([(lm.x, lm.y) for lm in landmarks], dtype=float)
    free = np.ones(n, dtype=bool)
    fragments: list[Fragment] = []
    prev: list[int] | None = None

    def nearest_free(pt, k=1):
        idx = np.flatnonzero(free)
        d = np.hypot(xy[idx, 0] - pt[0], xy[idx, 1] - pt[1])
        order = np.lexsort((idx, d))
        return idx[order[:k]]

    while free.any():
        if prev is None:
            centre = np.asarray(seed_position, dtype=float)
        else:
            idx = np.flatnonzero(free)
            P = xy[prev]
            d = np.sqrt(((xy[idx, None, :] - P[None, :, :]) ** 2).sum(-1)).min(axis=1)
            order = np.lexsort((idx, d))
            centre = xy[idx[order[min(momentum, len(idx) - 1)]]]
        members = [int(i) for i in nearest_free(centre, init_size)]
        free[members] = False
        inc = IncrementalSegment(o, alpha)
        for i in members:
            inc.add(xy[i, 0], xy[i, 1], landmarks[i].cls, landmarks[i].confidence)
        prior = inc.current().max_p
        while free.any():
            c = xy[members].mean(axis=0)
            j = int(nearest_free(c)[0])
            post = inc.preview(xy[j, 0], xy[j, 1], landmarks[j].cls, landmarks[j].confidence)
            if prior > post.max_p:
                break
            inc.add(xy[j, 0], xy[j, 1], landmarks[j].cls, landmarks[j].confidence)
            members.append(j)
            free[j] = False
            prior = post.max_p
        fragments.append(make_fragment(len(fragments), members, landmarks, o, alpha))
        prev = members
    return fragments


def default_adjacency(landmarks: Sequence[Landmark]) -> float:
    """Twice the mean nearest-neighbour spacing of the map."""
    xy = np.array([(lm.x, lm.y) for lm in landmarks], dtype=float).reshape(-1, 2)
    if len(xy) < 2:
        return 0.0
    nn = []
    for i in range(0, len(xy), 512):
        block = xy[i:i + 512]
        d = np.sqrt(((block[:, None, :] - xy[None, :, :]) ** 2).sum(-1))
        d[np.arange(len(block)), np.arange(i, i + len(block))] = np.inf
        nn.append(d.min(axis=1))
    return 2.0 * float(np.concatenate(nn).mean())


def fragment_neighbours(fragments: Sequence[Fragment], adjacency: float) -> list[tuple[int, int]]:
    """Index pairs ``(i, j)``, ``i < j``, whose hulls come closer than ``adjacency``."""
    hulls = [f.hull() for f in fragments]
    boxes = [(f.points.min(0), f.points.max(0)) for f in fragments]
    out = []
    for i in range(len(fragments)):
        for j in range(i + 1, len(fragments)):
            (lo1, hi1), (lo2, hi2) = boxes[i], boxes[j]
            gap = np.maximum(0.0, np.maximum(lo1 - hi2, lo2 - hi1))
            if math.hypot(*gap) >= adjacency:
                continue
            if geometry.hull_distance(hulls[i], hulls[j]) < adjacency:
                out.append((i, j))
    return out


def merge_fragments(fragments: Sequence[Fragment], landmarks, o: Ontology, alpha: float = 0.5,
                    adjacency: float | None = None) -> list[Fragment]:
    """Fuse connected components of neighbouring fragments sharing a label."""
    if adjacency is None:
        adjacency = default_adjacency(landmarks)
    parent = list(range(len(fragments)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in fragment_neighbours(fragments, adjacency):
        if fragments[i].label == fragments[j].label:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(len(fragments)):
        groups.setdefault(find(i), []).extend(fragments[i].members)
    ordered = sorted(groups.values(), key=min)
    return [make_fragment(k, g, landmarks, o, alpha) for k, g in enumerate(ordered)]


def detect_bisection(frag_a: Fragment, frag_b: Fragment, landmarks=None):
    """Crossing hull-edge pairs ``((a1, a2), (b1, b2))`` as landmark indices."""
    pos_a = {i: tuple(p) for i, p in zip(frag_a.members, frag_a.points)}
    pos_b = {i: tuple(p) for i, p in zip(frag_b.members, frag_b.points)}
    ha, hb = frag_a.hull_members(), frag_b.hull_members()
    edges_a = geometry.hull_edges(ha)
    edges_b = geometry.hull_edges(hb)
    out = []
    for a1, a2 in edges_a:
        for b1, b2 in edges_b:
            if geometry.segments_intersect(pos_a[a1], pos_a[a2], pos_b[b1], pos_b[b2]):
                out.append(((a1, a2), (b1, b2)))
    return out


class NotSeparableError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperplane:
    """Line ``w . x + b = 0`` with unit ``w``; the positive side belongs to the first set."""

    w: tuple[float, float]
    b: float
    margin: float

    def side(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return pts @ np.asarray(self.w) + self.b


def max_margin_boundary(points_a, points_b) -> Hyperplane:
    """Hard-margin linear separator of two point sets.

    The optimal normal joins the closest points of the two convex hulls and the
    margin is half their distance. Raises :class:`NotSeparableError` when the
    hulls touch or overlap.
    """
    a = np.asarray(points_a, dtype=float).reshape(-1, 2)
    b = np.asarray(points_b, dtype=float).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both point sets must be non-empty")
    ha, hb = geometry.convex_hull(a), geometry.convex_hull(b)
    if geometry.hulls_overlap(ha, hb):
        raise NotSeparableError("point sets are not linearly separable")
    p, q, d = geometry.hull_closest_points(ha, hb)
    if d <= 0:
        raise NotSeparableError("point sets touch")
    w = ((p[0] - q[0]) / d, (p[1] - q[1]) / d)
    mid = ((p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0)
    return Hyperplane(w, -(w[0] * mid[0] + w[1] * mid[1]), d / 2.0)


def least_misclassification_boundary(points_a, points_b) -> Hyperplane:
    """Fallback separator for overlapping sets.

    Candidate normals are the pairwise differences and their perpendiculars;
    for each the best threshold is found by a sorted scan. Fewest errors wins,
    then the widest gap around the threshold.
    """
    a = np.asarray(points_a, dtype=float).reshape(-1, 2)
    b = np.asarray(points_b, dtype=float).reshape(-1, 2)
    pts = np.vstack([a, b])
    y = np.r_[np.ones(len(a)), -np.ones(len(b))]
    dirs = []
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            v = pts[i] - pts[j]
            n = math.hypot(*v)
            if n > 0:
                dirs.append(v / n)
                dirs.append(np.array([-v[1], v[0]]) / n)
    if not dirs:
        dirs = [np.array([1.0, 0.0])]
    best = None
    for u in dirs:
        for w in (u, -u):
            proj = pts @ w
            order = np.lexsort((-y, proj))
            ps, ys = proj[order], y[order]
            # threshold below position k: points [k:] predicted positive
            neg_right = np.r_[np.cumsum((ys == -1)[::-1])[::-1], 0]
            pos_left = np.r_[0, np.cumsum(ys == 1)]
            errors = neg_right + pos_left
            lo = np.r_[ps[0] - 1.0, ps]
            hi = np.r_[ps, ps[-1] + 1.0]
            gap = hi - lo
            k = int(np.lexsort((-gap, errors))[0])
            key = (int(errors[k]), -float(gap[k]))
            if best is None or key < best[0]:
                t = (lo[k] + hi[k]) / 2.0
                best = (key, (float(w[0]), float(w[1])), -float(t), float(gap[k]) / 2.0)
    _, w, b0, margin = best
    return Hyperplane(w, b0, margin)


def _local_support(frag: Fragment, crossings_pts, exclude: set[int], adjacency: float):
    pos = {i: p for i, p in zip(frag.members, frag.points)}
    hull_ids = frag.hull_members()

    def near(ids):
        return [i for i in ids if i not in exclude
                and any(math.dist(pos[i], x) <= adjacency for x in crossings_pts)]

    chosen = near(hull_ids) or near(frag.members)
    if not chosen:
        chosen = [i for i in frag.members if i not in exclude] or list(frag.members)
    return chosen


def trade_landmarks(frag_a: Fragment, frag_b: Fragment, h: Hyperplane, landmarks,
                    o: Ontology, alpha: float = 0.5) -> tuple[Fragment | None, Fragment | None]:
    """Reassign both fragments' landmarks to the side of ``h`` they lie on.

    Points exactly on the line stay where they are; a fragment left empty comes
    back as ``None``.
    """
    a_new, b_new = [], []
    for frag, home in ((frag_a, a_new), (frag_b, b_new)):
        s = h.side(frag.points)
        for i, v in zip(frag.members, s):
            if v > 0:
                a_new.append(i)
            elif v < 0:
                b_new.append(i)
            else:
                home.append(i)
    fa = make_fragment(frag_a.id, a_new, landmarks, o, alpha) if a_new else None
    fb = make_fragment(frag_b.id, b_new, landmarks, o, alpha) if b_new else None
    return fa, fb


def boundary_between(frag_a: Fragment, frag_b: Fragment, crossings, adjacency: float) -> Hyperplane:
    """Separator drawn from landmarks surrounding the bisected portion."""
    pos = {i: p for f in (frag_a, frag_b) for i, p in zip(f.members, f.points)}
    xs = [geometry.segment_intersection_point(pos[a1], pos[a2], pos[b1], pos[b2])
          for (a1, a2), (b1, b2) in crossings]
    bisecting = {i for (a1, a2), (b1, b2) in crossings for i in (a1, a2, b1, b2)}
    sa = _local_support(frag_a, xs, bisecting, adjacency)
    sb = _local_support(frag_b, xs, bisecting, adjacency)
    pa = np.array([pos[i] for i in sa])
    pb = np.array([pos[i] for i in sb])
    try:
        return max_margin_boundary(pa, pb)
    except NotSeparableError:
        return least_misclassification_boundary(pa, pb)


def repair_bisections(fragments: Sequence[Fragment], landmarks, o: Ontology, alpha: float = 0.5,
                      adjacency: float | None = None) -> list[Fragment]:
    """Single pass over neighbouring pairs, trading landmarks across drawn boundaries."""
    if adjacency is None:
        adjacency = default_adjacency(landmarks)
    frags: list[Fragment | None] = list(fragments)
    for i, j in fragment_neighbours(fragments, adjacency):
        fa, fb = frags[i], frags[j]
        if fa is None or fb is None:
            continue
        crossings = detect_bisection(fa, fb)
        if not crossings:
            continue
        h = boundary_between(fa, fb, crossings, adjacency)
        frags[i], frags[j] = trade_landmarks(fa, fb, h, landmarks, o, alpha)
    kept = [f for f in frags if f is not None]
    return [make_fragment(k, f.members, landmarks, o, alpha) for k, f in enumerate(kept)]


def branch_segment(landmarks: Sequence[Landmark], o: Ontology, alpha: float = 0.5,
                   seed_position=(0.0, 0.0), momentum: int = 0,
                   adjacency: float | None = None) -> list[Fragment]:
    """Cluster, merge same-label neighbours, then repair bisecting neighbours."""
    if not landmarks:
        return []
    if adjacency is None:
        adjacency = default_adjacency(landmarks)
    frags = nnn_cluster(landmarks, o, alpha, seed_position, momentum)
    frags = merge_fragments(frags, landmarks, o, alpha, adjacency)
    return repair_bisections(frags, landmarks, o, alpha, adjacency)


# --------------------------------------------------------------- rasterizing

def rasterize_grid(leaves: Sequence[GridSegment], bounds, n: int = GRID_SIZE):
    """Paint grid leaves onto the ``n x n`` overlay; returns ``(labels, confidence)``."""
    w, h = bounds
    labels = np.full((n, n), UNKNOWN, dtype=object)
    conf = np.zeros((n, n))
    for leaf in leaves:
        x0, y0, x1, y1 = leaf.rect
        c0, c1 = int(round(x0 / w * n)), int(round(x1 / w * n))
        r0, r1 = int(round(y0 / h * n)), int(round(y1 / h * n))
        labels[r0:r1, c0:c1] = leaf.label
        conf[r0:r1, c0:c1] = leaf.confidence if leaf.label != UNKNOWN else 0.0
    return labels, conf


def rasterize_fragments(fragments: Sequence[Fragment], bounds, n: int = GRID_SIZE):
    """Label each cell by the fragment whose hull holds its centre (most confident wins)."""
    labels = np.full((n, n), UNKNOWN, dtype=object)
    conf = np.zeros((n, n))
    centres = cell_centres(bounds, n)
    ranked = sorted(range(len(fragments)), key=lambda k: (-fragments[k].confidence, k))
    for k in ranked:
        f = fragments[k]
        if f.label == UNKNOWN:
            continue
        hull = f.hull()
        if len(hull) < 3:
            continue
        xs, ys = [p[0] for p in hull], [p[1] for p in hull]
        for r in range(n):
            for c in range(n):
                if labels[r, c] != UNKNOWN:
                    continue
                x, y = centres[r, c]
                if not (min(xs) <= x <= max(xs) and min(ys) <= y <= max(ys)):
                    continue
                if geometry.point_in_convex((x, y), hull):
                    labels[r, c] = f.label
                    conf[r, c] = f.confidence
    return labels, conf
