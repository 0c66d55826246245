"""Detection-record filtering: dedup, single-interaction acceptance, reports.

An image survives when, after in-category dedup, it shows exactly one person
and exactly one target-category instance, the two overlap enough, the torso
keypoints are usable, and the person is not tiny. Rejections carry the first
failed rule's reason code, checked in that order.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PERSON_CATEGORY = "person"

# 17-keypoint order used by the pose records
KEYPOINT_NAMES = [
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
]
TORSO_KEYPOINTS = (5, 6, 11, 12)  # both shoulders, both hips

REASON_MULTI_HUMAN = "multi-human"
REASON_NO_HUMAN = "no-human"
REASON_NO_OBJECT = "no-object"
REASON_MULTI_OBJECT = "multi-object"
REASON_NO_INTERACTION = "no-interaction"
REASON_TORSO_MISSING = "torso-missing"
REASON_HUMAN_TOO_SMALL = "human-too-small"


@dataclass(frozen=True)
class Instance:
    category: str
    confidence: float
    bbox: tuple[float, float, float, float]  # x0, y0, x1, y1

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"bbox must have positive area, got {self.bbox}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))

    @property
    def area(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return (x1 - x0) * (y1 - y0)


@dataclass(frozen=True)
class DetectionRecord:
    image_id: str
    width: int
    height: int
    instances: tuple = field(default=())
    keypoints: np.ndarray | None = None  # (17, 3) x, y, confidence

    def __post_init__(self):
        if self.keypoints is not None:
            kp = np.asarray(self.keypoints, dtype=np.float64)
            if kp.shape != (17, 3):
                raise ValueError(f"keypoints must be (17, 3), got {kp.shape}")
            object.__setattr__(self, "keypoints", kp)
        object.__setattr__(self, "instances", tuple(self.instances))


@dataclass(frozen=True)
class FilterProfile:
    name: str
    dedup_iosb: float = 0.8
    dedup_conf_exempt: float = 0.98
    interaction_metric: str = "over-object"  # or "over-smaller"
    interaction_min: float = 0.1
    keypoint_conf: float = 0.7
    min_person_side: float = 32.0

    def __post_init__(self):
        if self.interaction_metric not in ("over-object", "over-smaller"):
            raise ValueError(f"unknown interaction metric {self.interaction_metric!r}")


PROFILES = {
    "default": FilterProfile(name="default"),
    "eval": FilterProfile(name="eval", interaction_metric="over-smaller", interaction_min=0.5),
}


def _intersection(a, b) -> float:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    w = min(ax1, bx1) - max(ax0, bx0)
    h = min(ay1, by1) - max(ay0, by0)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def iosb(a: Instance, b: Instance) -> float:
    """Intersection over the smaller box's area."""
    return _intersection(a.bbox, b.bbox) / min(a.area, b.area)


def interaction_score(person: Instance, obj: Instance, metric: str) -> float:
    inter = _intersection(person.bbox, obj.bbox)
    if metric == "over-object":
        return inter / obj.area
    if metric == "over-smaller":
        return inter / min(person.area, obj.area)
    raise ValueError(f"unknown interaction metric {metric!r}")


def dedup_boxes(
    instances,
    iosb_threshold: float = 0.8,
    conf_exempt: float = 0.98,
):
    """Drop same-category near-duplicates, keeping the higher confidence.

    A box is removed when it overlaps an already-kept same-category box with
    intersection-over-smaller-box above the threshold, unless its own
    confidence exceeds the exemption level. Applied in descending confidence
    until stable; idempotent.
    """
    order = sorted(
        range(len(instances)),
        key=lambda i: (-instances[i].confidence, i),
    )
    alive: list = list(instances)
    while True:
        kept: list[int] = []
        removed = False
        for i in order:
            inst = alive[i]
            if inst is None:
                continue
            drop = False
            if inst.confidence <= conf_exempt:
                for j in kept:
                    other = alive[j]
                    if other.category == inst.category and iosb(other, inst) > iosb_threshold:
                        drop = True
                        break
            if drop:
                alive[i] = None
                removed = True
            else:
                kept.append(i)
        if not removed:
            break
    return tuple(inst for inst in alive if inst is not None)


@dataclass(frozen=True)
class Decision:
    image_id: str
    accepted: bool
    reason: str | None


def accept_image(record: DetectionRecord, category: str, profile: FilterProfile) -> Decision:
    instances = dedup_boxes(record.instances, profile.dedup_iosb, profile.dedup_conf_exempt)
    persons = [i for i in instances if i.category == PERSON_CATEGORY]
    objects = [i for i in instances if i.category == category]

    if len(persons) == 0:
        return Decision(record.image_id, False, REASON_NO_HUMAN)
    if len(persons) > 1:
        return Decision(record.image_id, False, REASON_MULTI_HUMAN)
    if len(objects) == 0:
        return Decision(record.image_id, False, REASON_NO_OBJECT)
    if len(objects) > 1:
        return Decision(record.image_id, False, REASON_MULTI_OBJECT)

    person, obj = persons[0], objects[0]
    if interaction_score(person, obj, profile.interaction_metric) < profile.interaction_min:
        return Decision(record.image_id, False, REASON_NO_INTERACTION)

    kp = record.keypoints
    if kp is None:
        return Decision(record.image_id, False, REASON_TORSO_MISSING)
    for idx in TORSO_KEYPOINTS:
        x, y, conf = kp[idx]
        inside = 0.0 <= x <= record.width and 0.0 <= y <= record.height
        if conf < profile.keypoint_conf or not inside:
            return Decision(record.image_id, False, REASON_TORSO_MISSING)

    x0, y0, x1, y1 = person.bbox
    if min(x1 - x0, y1 - y0) < profile.min_person_side:
        return Decision(record.image_id, False, REASON_HUMAN_TOO_SMALL)

    return Decision(record.image_id, True, None)


def filter_records(records, category: str, profile: FilterProfile):
    """Decisions for a batch, in input order."""
    return [accept_image(r, category, profile) for r in records]


def rejection_rate(decisions) -> float:
    decisions = list(decisions)
    if not decisions:
        raise ValueError("no decisions; rejection rate undefined")
    n_rej = sum(1 for d in decisions if not d.accepted)
    return n_rej / len(decisions)


def load_records(path) -> list[DetectionRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{line_no}: bad JSON: {e}") from None
            extra = set(d) - {"image_id", "width", "height", "instances", "keypoints"}
            if extra:
                raise ValueError(f"{path}:{line_no}: unknown keys {sorted(extra)}")
            instances = []
            for inst in d.get("instances", []):
                extra = set(inst) - {"category", "confidence", "bbox"}
                if extra:
                    raise ValueError(f"{path}:{line_no}: unknown instance keys {sorted(extra)}")
                instances.append(Instance(inst["category"], inst["confidence"], tuple(inst["bbox"])))
            kp = d.get("keypoints")
            records.append(DetectionRecord(
                image_id=str(d["image_id"]),
                width=int(d["width"]),
                height=int(d["height"]),
                instances=tuple(instances),
                keypoints=None if kp is None else np.array(kp, dtype=np.float64),
            ))
    return records


def save_records(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            d = {
                "image_id": r.image_id,
                "width": r.width,
                "height": r.height,
                "instances": [
                    {"category": i.category, "confidence": i.confidence, "bbox": list(i.bbox)}
                    for i in r.instances
                ],
                "keypoints": None if r.keypoints is None else r.keypoints.tolist(),
            }
            fh.write(json.dumps(d) + "\n")


def write_rejection_report(decisions, path) -> None:
    """CSV of rejected images: image_id, reason."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "reason"])
        for d in decisions:
            if not d.accepted:
                writer.writerow([d.image_id, d.reason])
