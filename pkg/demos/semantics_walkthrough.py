"""How a handful of landmarks becomes an environment label.

Four features sit in one segment of the Canberra ontology: two houses close
together, a letterbox beside them and a tree off to one side. The engine
scores every environment from feature pairs that share it, blends that score
with the share of pairs that count as inferences, and picks the argmax.
"""

import numpy as np

from semslam import SegmentFeatures, builtin_ontology, environment_distribution
from semslam.semantics import classify_segment

onto = builtin_ontology("canberra")
segment = SegmentFeatures(
    classes=("house", "house", "letterbox", "tree"),
    confidences=np.array([0.95, 0.9, 0.8, 0.7]),
    positions=np.array([[0.10, 0.10], [0.12, 0.11], [0.11, 0.14], [0.30, 0.25]]),
    max_distance=np.hypot(0.33, 0.33),  # diagonal of the segment
)

dist = environment_distribution(segment, onto, alpha=0.5)
print("environment        C(e)   pairs   P(e)")
for env, c, n, p in zip(dist.environments, dist.confidences, dist.inferences, dist.probabilities):
    if p > 0:
        print(f"{env:<18} {c:5.3f}   {n:5d}   {p:5.3f}")
print(f"\nlabel: {dist.label}")

# alpha trades pair strength against pair count
for alpha in (0.1, 0.9):
    d = environment_distribution(segment, onto, alpha).as_dict()
    print(f"alpha={alpha}: Residential {d['Residential']:.3f}, NonUrban {d['NonUrban']:.3f}")

# the grid method only accepts a label above its threshold
for threshold in (0.3, 0.9):
    label, p, ok = classify_segment(segment, onto, threshold=threshold)
    print(f"threshold {threshold}: {label} p={p:.3f} accepted={ok}")
