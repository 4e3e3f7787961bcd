"""Sequence and shape metrics: LCS ratio, per-command classification
scores, Chamfer distance, minimum matching distance and Jensen-Shannon
divergence."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import rankdata

from .errors import (
    AlignmentError,
    CcsRangeError,
    EmptyCloud,
    EmptyGroundTruth,
    EmptyInput,
    EmptySet,
)
from .mesh import PointCloud
from .model import CadSequence, CommandType, command_atoms, parse_ccs

CD_SCALE = 1000.0
JSD_SCALE = 100.0
JSD_DEFAULT_RESOLUTION = 28


@dataclass(frozen=True)
class LcsReport:
    lcs_length: int
    ground_truth_length: int
    ratio: float


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Length of the longest common subsequence (classic DP, two rows)."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return 0
    prev = [0] * (m + 1)
    cur = [0] * (m + 1)
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                pj, cj = prev[j], cur[j - 1]
                cur[j] = pj if pj >= cj else cj
        prev, cur = cur, prev
    return prev[m]


def lcs_ratio(g: Sequence, r: Sequence) -> LcsReport:
    """LCS length between token lists, normalized by the ground-truth length."""
    if len(g) == 0:
        raise EmptyGroundTruth("ground-truth token list is empty")
    length = lcs_length(g, r)
    return LcsReport(length, len(g), length / len(g))


# --- command classification metrics ----------------------------------------------

@dataclass(frozen=True)
class ConfidenceTrack:
    """Per-command (s_cmd, s_args) confidence pairs in [0, 1]."""

    scores: tuple   # of (s_cmd, s_args)

    def __init__(self, scores):
        pairs = tuple((float(c), float(a)) for c, a in scores)
        for c, a in pairs:
            if not (0.0 <= c <= 1.0 and 0.0 <= a <= 1.0):
                raise CcsRangeError(f"confidence ({c}, {a}) outside [0, 1]")
        object.__setattr__(self, "scores", pairs)

    def __len__(self) -> int:
        return len(self.scores)

    def __iter__(self):
        return iter(self.scores)

    def __getitem__(self, i):
        return self.scores[i]


@dataclass(frozen=True)
class PredictionRecord:
    ground_truth: CadSequence
    predicted: CadSequence
    confidence: ConfidenceTrack
    record_id: str = ""

    def __post_init__(self):
        if len(self.confidence) != len(self.predicted):
            raise AlignmentError(
                f"confidence length {len(self.confidence)} != "
                f"predicted length {len(self.predicted)}")


@dataclass
class TypeScores:
    accuracy: float
    f1: float
    auc: Optional[float]


@dataclass
class MetricsReport:
    per_type: dict                      # name -> TypeScores
    macro_accuracy: float
    macro_f1: float
    macro_auc: Optional[float]
    overall_accuracy: float
    param_accuracy: float
    records: int
    shape: Optional[dict] = None        # {"cd": .., "mmd": .., "jsd": ..}

    def to_json_obj(self) -> dict:
        obj = {
            "records": self.records,
            "overall_accuracy": self.overall_accuracy,
            "param_accuracy": self.param_accuracy,
            "macro": {"accuracy": self.macro_accuracy, "f1": self.macro_f1,
                      "auc": self.macro_auc},
            "per_type": {k: {"accuracy": v.accuracy, "f1": v.f1, "auc": v.auc}
                         for k, v in self.per_type.items()},
        }
        if self.shape is not None:
            obj["shape"] = self.shape
        return obj


METRIC_TYPES = (CommandType.LINE, CommandType.ARC, CommandType.CIRCLE,
                CommandType.EXTRUDE)
_NONE_TYPE = "NONE"


def _aligned_rows(records):
    """Positional alignment at ground-truth length; missing predictions pad
    with a NONE type carrying full confidence."""
    gt_types, pred_types, s_cmd, param_hits, param_total = [], [], [], 0, 0
    for rec in records:
        gt = rec.ground_truth.commands
        pred = rec.predicted.commands
        conf = rec.confidence.scores
        for i, g in enumerate(gt):
            gt_types.append(g.ctype.value)
            if i < len(pred):
                p = pred[i]
                pred_types.append(p.ctype.value)
                s_cmd.append(conf[i][0])
                if p.ctype is g.ctype:
                    g_atoms = command_atoms(g)[1:]
                    p_atoms = command_atoms(p)[1:]
                    param_total += len(g_atoms)
                    param_hits += sum(x == y for x, y in zip(g_atoms, p_atoms))
            else:
                pred_types.append(_NONE_TYPE)
                s_cmd.append(1.0)
    return (np.array(gt_types), np.array(pred_types),
            np.array(s_cmd, dtype=float), param_hits, param_total)


def _rank_auc(labels: np.ndarray, scores: np.ndarray) -> Optional[float]:
    """Mann-Whitney AUC with tie-corrected average ranks."""
    n_pos = int(labels.sum())
    n_neg = int(len(labels) - n_pos)
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)
    r_pos = ranks[labels].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def command_metrics(records: Sequence[PredictionRecord]) -> MetricsReport:
    """Per-type accuracy/F1/AUC plus macro averages over aligned commands.

    Commands are aligned positionally after truncating or padding the
    prediction to the ground-truth length.  AUC for a type ranks the
    confidence assigned to that type (s_cmd where the model predicted it,
    1 - s_cmd elsewhere) of positive versus negative positions.  Parameter
    accuracy is the fraction of exactly matching quantized parameters among
    type-matched commands.
    """
    if not records:
        raise EmptyInput("no prediction records")
    gt_types, pred_types, s_cmd, param_hits, param_total = _aligned_rows(records)

    per_type = {}
    for ctype in METRIC_TYPES:
        name = ctype.value
        pos = gt_types == name
        fired = pred_types == name
        tp = int(np.sum(pos & fired))
        fp = int(np.sum(~pos & fired))
        fn = int(np.sum(pos & ~fired))
        tn = int(np.sum(~pos & ~fired))
        accuracy = (tp + tn) / len(gt_types)
        f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
        # Confidence assigned to this type, as a rank key: positions where
        # the model predicted the type outrank all others, ordered by s_cmd
        # within each group.  Strictly monotone transforms of s_cmd leave
        # the ranking (hence the AUC) unchanged.
        scores = np.where(fired, 2.0 + s_cmd, 1.0 - s_cmd)
        per_type[name] = TypeScores(accuracy, f1, _rank_auc(pos, scores))

    aucs = [t.auc for t in per_type.values() if t.auc is not None]
    return MetricsReport(
        per_type=per_type,
        macro_accuracy=float(np.mean([t.accuracy for t in per_type.values()])),
        macro_f1=float(np.mean([t.f1 for t in per_type.values()])),
        macro_auc=float(np.mean(aucs)) if aucs else None,
        overall_accuracy=float(np.mean(gt_types == pred_types)),
        param_accuracy=param_hits / param_total if param_total else 0.0,
        records=len(records),
    )


# --- shape metrics ---------------------------------------------------------------

def _nn_squared(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact nearest-neighbour squared distances from each a-point to b."""
    _, idx = cKDTree(b).query(a, k=1)
    diff = a - b[idx]
    return np.einsum("ij,ij->i", diff, diff)


def chamfer_distance(a: PointCloud, b: PointCloud) -> float:
    """Symmetric mean squared nearest-neighbour distance, scaled x1000."""
    pa = np.asarray(a.points, dtype=float)
    pb = np.asarray(b.points, dtype=float)
    if len(pa) == 0 or len(pb) == 0:
        raise EmptyCloud("chamfer distance of an empty cloud")
    return float((_nn_squared(pa, pb).mean() + _nn_squared(pb, pa).mean()) * CD_SCALE)


def mmd(reference: Sequence[PointCloud], generated: Sequence[PointCloud]) -> float:
    """Mean over reference clouds of the minimum Chamfer distance to any
    generated cloud."""
    if not reference or not generated:
        raise EmptySet("mmd requires non-empty cloud sets")
    per_ref = [min(chamfer_distance(r, g) for g in generated) for r in reference]
    return float(np.mean(per_ref))


def _occupancy_histogram(clouds: Sequence[PointCloud], grid_res: int) -> np.ndarray:
    counts = np.zeros((grid_res, grid_res, grid_res), dtype=np.float64)
    for cloud in clouds:
        pts = np.asarray(cloud.points, dtype=float)
        idx = np.floor((pts + 1.0) * 0.5 * grid_res).astype(np.int64)
        idx = np.clip(idx, 0, grid_res - 1)
        np.add.at(counts, (idx[:, 0], idx[:, 1], idx[:, 2]), 1.0)
    total = counts.sum()
    if total == 0:
        raise EmptySet("no points to histogram")
    return counts / total


def jsd(set_a: Sequence[PointCloud], set_b: Sequence[PointCloud],
        grid_res: int = JSD_DEFAULT_RESOLUTION) -> float:
    """Jensen-Shannon divergence between pooled occupancy histograms on
    [-1, 1]^3, natural log, scaled x100."""
    if grid_res < 2:
        raise ValueError(f"grid_res {grid_res} < 2")
    if not set_a or not set_b:
        raise EmptySet("jsd requires non-empty cloud sets")
    p = _occupancy_histogram(set_a, grid_res).ravel()
    q = _occupancy_histogram(set_b, grid_res).ravel()
    m = 0.5 * (p + q)

    def kl(x, y):
        mask = x > 0
        return float(np.sum(x[mask] * np.log(x[mask] / y[mask])))

    return float(0.5 * (kl(p, m) + kl(q, m)) * JSD_SCALE)


# --- record ingestion --------------------------------------------------------------

def load_records_jsonl(path) -> list:
    """Read prediction records from JSON-lines:
    {id, gt_ccs, pred_ccs, confidence: [[s_cmd, s_args], ...]} per line."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            records.append(PredictionRecord(
                ground_truth=parse_ccs(obj["gt_ccs"]),
                predicted=parse_ccs(obj["pred_ccs"]),
                confidence=ConfidenceTrack(obj["confidence"]),
                record_id=str(obj.get("id", lineno)),
            ))
    return records
