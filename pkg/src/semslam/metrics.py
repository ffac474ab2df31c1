"""Evaluation statistics: search coverage, dispersion, map error, IoU and AP."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from .landmarks import Landmark
from .ontology import UNKNOWN, Ontology, semantically_similar


def area_coverage(speeds, sweep_widths, t: float, total_area: float,
                  trajectories=None, bounds=None):
    """Washburn estimate ``A' = sum(V W t)`` capped at the total area.

    Returns ``(A', A'/A, tracked)`` where ``tracked`` is the fraction of
    occupancy cells of side ``W`` (the smallest sweep width) visited by any
    trajectory, or ``nan`` when no trajectories are given.
    """
    searched = sum(v * w * t for v, w in zip(speeds, sweep_widths))
    searched = min(searched, total_area)
    tracked = float("nan")
    if trajectories is not None and bounds is not None:
        tracked = tracked_ratio(trajectories, bounds, min(sweep_widths))
    return searched, searched / total_area, tracked


def tracked_ratio(trajectories, bounds, cell: float) -> float:
    w, h = bounds
    nx, ny = max(1, math.ceil(w / cell - 1e-9)), max(1, math.ceil(h / cell - 1e-9))
    seen = np.zeros((ny, nx), dtype=bool)
    for traj in trajectories:
        pts = np.asarray(traj, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            continue
        ix = np.clip((pts[:, 0] / cell).astype(int), 0, nx - 1)
        iy = np.clip((pts[:, 1] / cell).astype(int), 0, ny - 1)
        seen[iy, ix] = True
    return float(seen.sum()) / (nx * ny)


def dispersion(samples, bounds) -> tuple[float, float]:
    """Mean agent distance to the global centre of mass, averaged over samples.

    ``samples`` has shape ``(T, n_agents, 2)``. The normalized value divides by
    half the bounds diagonal.
    """
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        return 0.0, 0.0
    gcm = s.mean(axis=1, keepdims=True)
    per_sample = np.sqrt(((s - gcm) ** 2).sum(-1)).mean(axis=1)
    avg = float(per_sample.mean())
    return avg, avg / (0.5 * math.hypot(*bounds))


def avg_center_offset_error(landmarks: Sequence[Landmark]) -> float:
    """Mean distance between believed and true landmark positions."""
    if not landmarks:
        return 0.0
    return float(np.mean([math.hypot(lm.x - lm.true_x, lm.y - lm.true_y) for lm in landmarks]))


def topology_match(generated: Sequence[Landmark], truth, radius: float,
                   ontology: Ontology | None = None) -> tuple[float, float]:
    """Greedy nearest-pair matching of map vertices against true features.

    ``truth`` is a sequence of objects with ``cls``, ``x``, ``y``. Returns
    ``(coverage, mean positional error of matched pairs)``; the error is ``nan``
    when nothing matches.
    """
    if radius <= 0:
        raise ValueError("match radius must be positive")
    truth = list(truth)
    if not truth:
        return 0.0, float("nan")
    pairs = []
    for i, g in enumerate(generated):
        for j, t in enumerate(truth):
            if ontology is not None:
                ok = semantically_similar(ontology, g.cls, t.cls)
            else:
                ok = g.cls == t.cls
            if not ok:
                continue
            d = math.hypot(g.x - t.x, g.y - t.y)
            if d <= radius:
                pairs.append((d, i, j))
    pairs.sort()
    used_g, used_t, errs = set(), set(), []
    for d, i, j in pairs:
        if i in used_g or j in used_t:
            continue
        used_g.add(i)
        used_t.add(j)
        errs.append(d)
    coverage = len(errs) / len(truth)
    return coverage, (float(np.mean(errs)) if errs else float("nan"))


def _check_shapes(a, b):
    a, b = np.asarray(a, dtype=object), np.asarray(b, dtype=object)
    if a.shape != b.shape:
        raise ValueError(f"grid size mismatch: {a.shape} vs {b.shape}")
    return a, b


def iou(pred, truth, label: str) -> float:
    """Cells labelled ``label`` in both / in either; 1.0 when neither has it."""
    pred, truth = _check_shapes(pred, truth)
    p, t = pred == label, truth == label
    union = int((p | t).sum())
    if union == 0:
        return 1.0
    return int((p & t).sum()) / union


def macro_iou(pred, truth) -> tuple[float, dict[str, float]]:
    """Mean IoU over the labels present in the truth grid, Unknown excluded."""
    pred, truth = _check_shapes(pred, truth)
    labels = sorted({str(v) for v in truth.ravel()} - {UNKNOWN})
    per = {lab: iou(pred, truth, lab) for lab in labels}
    return (float(np.mean(list(per.values()))) if per else float("nan")), per


def explored_accuracy(pred, truth) -> float:
    """Fraction of predicted (non-Unknown) cells whose label matches the truth."""
    pred, truth = _check_shapes(pred, truth)
    mask = pred != UNKNOWN
    if not mask.any():
        return float("nan")
    return float((pred[mask] == truth[mask]).mean())


def _ap_from_ranked(scores, hits, n_pos) -> tuple[float, float, float]:
    """Trapezoidal PR area with tied scores treated as one threshold."""
    if n_pos == 0:
        return float("nan"), float("nan"), float("nan")
    if len(scores) == 0:
        return 0.0, float("nan"), 0.0
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    s = np.asarray(scores, dtype=float)[order]
    hit = np.asarray(hits, dtype=bool)[order]
    tp = np.cumsum(hit)
    fp = np.cumsum(~hit)
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp, fp = tp[last], fp[last]
    precision = tp / (tp + fp)
    recall = tp / n_pos
    r = np.r_[0.0, recall]
    p = np.r_[precision[0], precision]
    ap = float(np.sum(np.diff(r) * (p[1:] + p[:-1]) / 2.0))
    return ap, float(precision[-1]), float(recall[-1])


def precision_recall_ap(pred, conf, truth) -> dict:
    """Per-class precision, recall and AP over grid cells ranked by confidence.

    Each non-Unknown predicted cell is a detection of its label; it is a true
    positive when the truth agrees. Unknown predictions never count as true
    positives, so unexplored true cells surface as false negatives. ``mAP``
    averages over classes present in the truth; ``micro_ap`` pools every
    prediction against all labelled truth cells.
    """
    pred, truth = _check_shapes(pred, truth)
    conf = np.asarray(conf, dtype=float)
    if conf.shape != pred.shape:
        raise ValueError("confidence grid must match the prediction grid")
    classes = sorted({str(v) for v in truth.ravel()} - {UNKNOWN})
    per = {}
    for c in classes:
        mask = pred == c
        ap, prec, rec = _ap_from_ranked(conf[mask], truth[mask] == c, int((truth == c).sum()))
        per[c] = {"precision": prec, "recall": rec, "ap": ap}
    m = [v["ap"] for v in per.values()]
    labelled = pred != UNKNOWN
    micro = _ap_from_ranked(conf[labelled], pred[labelled] == truth[labelled],
                            int((truth != UNKNOWN).sum()))[0]
    return {"per_class": per, "mAP": float(np.mean(m)) if m else float("nan"), "micro_ap": micro}


REPORT_COLUMNS = (
    "scenario", "seed", "agents", "feature_count", "discovered", "steps", "terminated",
    "total_area", "searched_area", "coverage", "tracked_coverage",
    "avg_dispersion", "norm_dispersion", "er_final", "er_max",
    "topology_coverage", "global_accuracy",
    "grid_iou", "grid_ap", "grid_micro_ap", "grid_accuracy",
    "branch_iou", "branch_ap", "branch_micro_ap", "branch_accuracy",
    "landmarks", "fragments", "grid_leaves",
)


@dataclass
class TrialReport:
    scenario: str = ""
    seed: int = 0
    agents: int = 0
    feature_count: int = 0
    discovered: int = 0
    steps: int = 0
    terminated: bool = False
    total_area: float = 0.0
    searched_area: float = 0.0
    coverage: float = 0.0
    tracked_coverage: float = 0.0
    avg_dispersion: float = 0.0
    norm_dispersion: float = 0.0
    er_final: float = 0.0
    er_max: float = 0.0
    topology_coverage: float = 0.0
    global_accuracy: float = float("nan")
    grid_iou: float = float("nan")
    grid_ap: float = float("nan")
    grid_micro_ap: float = float("nan")
    grid_accuracy: float = float("nan")
    branch_iou: float = float("nan")
    branch_ap: float = float("nan")
    branch_micro_ap: float = float("nan")
    branch_accuracy: float = float("nan")
    landmarks: int = 0
    fragments: int = 0
    grid_leaves: int = 0
    er_series: list[tuple[int, float]] = field(default_factory=list)
    per_class: dict = field(default_factory=dict)
    error: str = ""

    def row(self) -> list:
        out = []
        for c in REPORT_COLUMNS:
            v = getattr(self, c)
            out.append(repr(float(v)) if isinstance(v, float) else v)
        return out

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(REPORT_COLUMNS)
        w.writerow(self.row())
        return buf.getvalue()

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, indent=1, default=float)


def reports_to_csv(reports: Sequence[TrialReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS + ("error",))
    for r in reports:
        w.writerow(r.row() + [r.error])
    return buf.getvalue()


def report_fields() -> list[str]:
    return [f.name for f in fields(TrialReport)]
