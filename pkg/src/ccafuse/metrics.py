"""Box matching and detection metrics (precision-based mAP, mRecall, mIoU)."""
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError, FormatError, ParameterError

DEFAULT_IOU = 0.5


@dataclass(frozen=True)
class DetBox:
    x1: float
    y1: float
    x2: float
    y2: float
    class_id: int = 0
    score: float = 1.0
    image_id: object = 0

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise DimensionError(f"degenerate box ({self.x1}, {self.y1}, {self.x2}, {self.y2})")

    @property
    def coords(self):
        return (self.x1, self.y1, self.x2, self.y2)

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                float(d["x1"]),
                float(d["y1"]),
                float(d["x2"]),
                float(d["y2"]),
                int(d.get("class_id", 0)),
                float(d.get("score", 1.0)),
                d.get("image_id", 0),
            )
        except KeyError as exc:
            raise FormatError(f"box {d!r} lacks field {exc}") from None
        except (TypeError, ValueError, AttributeError) as exc:
            if isinstance(exc, DimensionError):
                raise
            raise FormatError(f"box {d!r}: {exc}") from None


def iou(a, b):
    """Intersection over union of two boxes; 0 when disjoint."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter
    return inter / union


@dataclass
class Matching:
    pairs: list  # (pred index, gt index, iou)
    unmatched_preds: list
    unmatched_gts: list


def score_order(preds):
    """Visit order: score descending, ties broken by class then coordinates.

    The key depends only on box content, so the order is independent of how
    the input list was arranged.
    """
    return sorted(range(len(preds)), key=lambda i: (-preds[i].score, preds[i].class_id, preds[i].coords))


def match_greedy(preds, gts, iou_threshold=DEFAULT_IOU):
    """Greedy one-to-one matching of same-class boxes within one image."""
    if not 0.0 < iou_threshold < 1.0:
        raise ParameterError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    if not preds or not gts:
        return Matching([], list(range(len(preds))), list(range(len(gts))))
    m = kernels.iou_matrix([p.coords for p in preds], [g.coords for g in gts])
    pc = np.array([p.class_id for p in preds])
    gc = np.array([g.class_id for g in gts])
    m[pc[:, None] != gc[None, :]] = -1.0
    assign = kernels.greedy_match(m, np.array(score_order(preds), dtype=np.int64), iou_threshold)
    pairs = [(int(p), int(g), float(m[p, g])) for p, g in enumerate(assign) if g >= 0]
    matched_g = {g for _, g, _ in pairs}
    return Matching(
        pairs=pairs,
        unmatched_preds=[i for i, g in enumerate(assign) if g < 0],
        unmatched_gts=[j for j in range(len(gts)) if j not in matched_g],
    )


@dataclass
class MetricsReport:
    map: float
    mrecall: float
    miou: float
    per_class_ap: dict = field(default_factory=dict)
    per_class_recall: dict = field(default_factory=dict)
    ignored_classes: list = field(default_factory=list)
    interpolated: bool = False

    def as_dict(self):
        return {
            "map": self.map,
            "mrecall": self.mrecall,
            "miou": self.miou,
            "per_class_ap": {str(k): v for k, v in self.per_class_ap.items()},
            "per_class_recall": {str(k): v for k, v in self.per_class_recall.items()},
            "ignored_classes": list(self.ignored_classes),
            "interpolated": self.interpolated,
        }


def _mean(values):
    return sum(values) / len(values) if values else 0.0


def eleven_point_ap(scored_hits, n_gt):
    """11-point interpolated AP from ``(score, is_tp)`` pairs (not the default metric)."""
    if n_gt == 0 or not scored_hits:
        return 0.0
    hits = sorted(scored_hits, key=lambda t: -t[0])
    tp = np.cumsum([h for _, h in hits])
    fp = np.cumsum([1 - h for _, h in hits])
    recall = tp / n_gt
    precision = tp / (tp + fp)
    ap = 0.0
    for r in np.linspace(0.0, 1.0, 11):
        mask = recall >= r
        ap += precision[mask].max() if mask.any() else 0.0
    return float(ap / 11.0)


def compute_metrics(preds, gts, iou_threshold=DEFAULT_IOU, interpolated=False):
    """Aggregate detection metrics over all images.

    Per class: precision = matched predictions / predictions, recall =
    matched ground truths / ground truths. ``map`` and ``mrecall`` average
    these over classes that appear in the ground truth; a class with no
    predictions has precision 0. ``miou`` is the mean IoU over every matched
    pair. Predicted classes absent from the ground truth are listed in
    ``ignored_classes``. With ``interpolated=True`` the per-class AP is the
    11-point interpolated AP instead of plain precision.
    """
    if not gts and not preds:
        raise ParameterError("no boxes given")
    by_img_p = defaultdict(list)
    by_img_g = defaultdict(list)
    for p in preds:
        by_img_p[p.image_id].append(p)
    for g in gts:
        by_img_g[g.image_id].append(g)

    n_pred = defaultdict(int)
    n_gt = defaultdict(int)
    tp = defaultdict(int)
    hits = defaultdict(list)
    ious = []
    for img in sorted(set(by_img_p) | set(by_img_g), key=repr):
        ps, gs = by_img_p[img], by_img_g[img]
        match = match_greedy(ps, gs, iou_threshold)
        matched = {pi for pi, _, _ in match.pairs}
        for pi, p in enumerate(ps):
            n_pred[p.class_id] += 1
            hits[p.class_id].append((p.score, int(pi in matched)))
        for g in gs:
            n_gt[g.class_id] += 1
        for pi, _, v in match.pairs:
            tp[ps[pi].class_id] += 1
            ious.append(v)

    classes = sorted(n_gt)
    ap = {}
    rec = {}
    for c in classes:
        if interpolated:
            ap[c] = eleven_point_ap(hits[c], n_gt[c])
        else:
            ap[c] = tp[c] / n_pred[c] if n_pred[c] else 0.0
        rec[c] = tp[c] / n_gt[c]
    return MetricsReport(
        map=_mean([ap[c] for c in classes]),
        mrecall=_mean([rec[c] for c in classes]),
        miou=_mean(sorted(ious)),
        per_class_ap=ap,
        per_class_recall=rec,
        ignored_classes=sorted(c for c in n_pred if c not in n_gt),
        interpolated=interpolated,
    )
