"""Independent reference implementations used as test oracles.

These are written as plain loops straight from the rule statements and share
no code with the package beyond reading ontology tables.
"""

from __future__ import annotations

import itertools
import math


# ------------------------------------------------------------ semantics

def brute_force_distribution(classes, confs, positions, dmax, relations, envs, alpha,
                             ordered=False):
    """``({env: (C, count, P)}, label)`` by a naive double loop."""
    z = len(classes)
    out = {}
    for e in envs:
        raw, count = 0.0, 0
        for x in range(z):
            for y in range(z):
                if x == y or (not ordered and y < x):
                    continue
                sx = relations.get((classes[x], e), 0.0)
                sy = relations.get((classes[y], e), 0.0)
                if sx > 0 and sy > 0:
                    dist = math.dist(positions[x], positions[y])
                    d = 0.0 if dmax <= 0 else min(1.0, dist / dmax)
                    raw += (sx * confs[x] + sy * confs[y]) * (1.0 - d)
                    count += 1
        if count:
            c = raw / (2 * count)
        else:
            c = max((relations.get((classes[x], e), 0.0) * confs[x] for x in range(z)), default=0.0)
        pairs = z * (z - 1) if ordered else z * (z - 1) / 2
        ratio = count / pairs if pairs else 0.0
        out[e] = (c, count, alpha * c + (1 - alpha) * ratio)
    best = max((v[2] for v in out.values()), default=0.0)
    if best <= 0:
        label = "Unknown"
    else:
        label = sorted(e for e, v in out.items() if v[2] == best)[0]
    return out, label


# ------------------------------------------------------------ merge rules

class MergeInterpreter:
    """Sequential replay of the map-matching rules over plain dicts."""

    def __init__(self, similar, radius, tolerance, threshold, floor):
        self.similar = similar
        self.radius, self.tolerance = radius, tolerance
        self.threshold, self.floor = threshold, floor
        self.entries = []
        self.discards = []
        self.next_id = 0

    def _new(self, lm):
        e = dict(lm, id=self.next_id)
        self.next_id += 1
        self.entries.append(e)
        return e

    @staticmethod
    def _absorb(keep, other):
        if other["conf"] > keep["conf"]:
            keep["cls"], keep["conf"] = other["cls"], other["conf"]
        keep["x"] = (keep["x"] + other["x"]) / 2.0
        keep["y"] = (keep["y"] + other["y"]) / 2.0
        keep["obs"] += other["obs"]

    def _within(self, x, y, r):
        hits = []
        for e in self.entries:
            d = math.hypot(e["x"] - x, e["y"] - y)
            if d <= r:
                hits.append((d, e["id"], e))
        hits.sort(key=lambda t: (t[0], t[1]))
        return hits

    def _cascade(self, lm):
        while True:
            cands = [(d, i, e) for d, i, e in self._within(lm["x"], lm["y"], self.radius)
                     if e is not lm and self.similar(e["cls"], lm["cls"])]
            if not cands:
                return
            other = cands[0][2]
            self.entries.remove(other)
            self._absorb(lm, other)

    def submit(self, lm):
        lm = dict(lm)
        near = self._within(lm["x"], lm["y"], self.radius)
        if not near:
            self._new(lm)
            return "added"
        for _, _, e in near:
            if self.similar(e["cls"], lm["cls"]):
                self._absorb(e, lm)
                self._cascade(e)
                return "merged"
        if lm["conf"] >= self.floor and near[0][0] >= self.tolerance:
            self._new(lm)
            return "added"
        self.discards.append(lm)
        group = [d for d in self.discards if self.similar(d["cls"], lm["cls"])
                 and math.hypot(d["x"] - lm["x"], d["y"] - lm["y"]) <= self.tolerance]
        if len(group) < self.threshold:
            return "discarded"
        self.discards = [d for d in self.discards if not any(d is g for g in group)]
        top = group[0]
        for g in group[1:]:
            if g["conf"] > top["conf"]:
                top = g
        mx = sum(g["x"] for g in group) / len(group)
        my = sum(g["y"] for g in group) / len(group)
        risen = dict(top, x=mx, y=my, obs=sum(g["obs"] for g in group))
        near = self._within(mx, my, self.radius)
        if near:
            target = near[0][2]
            if self.similar(target["cls"], risen["cls"]):
                self._absorb(target, risen)
            else:
                target.update({k: risen[k] for k in ("cls", "conf", "x", "y", "obs")})
        else:
            target = self._new(risen)
        self._cascade(target)
        return "resurrected"


# ------------------------------------------------------------ max margin

def _feasible(a, b, w, c, margin, tol=1e-9):
    for p in a:
        if w[0] * p[0] + w[1] * p[1] + c < margin - tol:
            return False
    for p in b:
        if -(w[0] * p[0] + w[1] * p[1] + c) < margin - tol:
            return False
    return True


def support_candidate_margin(a, b):
    """Best hard margin over every 1+1 and 2+1 support configuration (0 if none)."""
    best = 0.0
    for p in a:
        for q in b:
            d = math.dist(p, q)
            if d == 0:
                continue
            w = ((p[0] - q[0]) / d, (p[1] - q[1]) / d)
            mid = ((p[0] + q[0]) / 2, (p[1] + q[1]) / 2)
            c = -(w[0] * mid[0] + w[1] * mid[1])
            if _feasible(a, b, w, c, d / 2):
                best = max(best, d / 2)
    for pair_side, other, flip in ((a, b, 1.0), (b, a, -1.0)):
        for p1, p2 in itertools.combinations(pair_side, 2):
            dx, dy = p2[0] - p1[0], p2[1] - p1[1]
            n = math.hypot(dx, dy)
            if n == 0:
                continue
            for q in other:
                w = (-dy / n, dx / n)
                s = w[0] * (p1[0] - q[0]) + w[1] * (p1[1] - q[1])
                if s == 0:
                    continue
                if s < 0:
                    w = (-w[0], -w[1])
                    s = -s
                m = s / 2
                c = -(w[0] * p1[0] + w[1] * p1[1]) + m
                wf, cf = (w[0] * flip, w[1] * flip), c * flip
                if _feasible(a, b, wf, cf, m):
                    best = max(best, m)
    return best


# ------------------------------------------------------------ average precision

def hand_ap(rows, n_pos):
    """Trapezoidal AP from ``(score, hit)`` rows, ties grouped into one step."""
    rows = sorted(rows, key=lambda r: -r[0])
    pts = []
    tp = fp = 0
    i = 0
    while i < len(rows):
        j = i
        while j < len(rows) and rows[j][0] == rows[i][0]:
            tp += rows[j][1]
            fp += 1 - rows[j][1]
            j += 1
        pts.append((tp / n_pos, tp / (tp + fp)))
        i = j
    area = 0.0
    prev_r, prev_p = 0.0, pts[0][1]
    for r, p in pts:
        area += (r - prev_r) * (p + prev_p) / 2
        prev_r, prev_p = r, p
    return area
