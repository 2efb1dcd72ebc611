"""Counting-accuracy and temporal-consistency metrics over count records.

Counts come from an external detector; this module only reproduces the
scoring arithmetic.  CountAcc: per frame, the mean over classes of the 0/1
indicator that the detected count matches the target, then averaged over
frames.  TC: the mean over adjacent frame pairs and classes of the 0/1
indicator that counts are identical.  Both orders of averaging coincide for
complete records, so the joint mean over cells is used.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewFrames
from .io import CountRecord


@dataclass
class MetricReport:
    count_acc: float
    tc: float
    per_class: dict = field(default_factory=dict)
    per_frame: list = field(default_factory=list)
    per_numeral: dict = field(default_factory=dict)   # max target -> accuracy
    n_records: int = 1

    def to_json_obj(self):
        return {
            "count_acc": self.count_acc,
            "tc": self.tc,
            "per_class": self.per_class,
            "per_frame": self.per_frame,
            "per_numeral": {str(k): v for k, v in sorted(self.per_numeral.items())},
            "n_records": self.n_records,
        }


def count_acc(record: CountRecord) -> float:
    """Frame-and-class-averaged indicator that counts match targets."""
    if record.frames.shape[0] < 1:
        raise TooFewFrames("record has no frames")
    targets = np.asarray(record.targets)
    match = record.frames == targets[None, :]
    return float(match.mean(axis=1).mean())


def temporal_consistency(record: CountRecord) -> float:
    """Fraction of (adjacent frame pair, class) cells with identical counts."""
    if record.frames.shape[0] < 2:
        raise TooFewFrames("temporal consistency needs at least 2 frames")
    same = record.frames[1:] == record.frames[:-1]
    return float(same.mean())


def _bucket(record: CountRecord) -> int:
    # per-numeral breakdown keys on the max target for multi-category prompts
    return int(max(record.targets))


def evaluate_record(record: CountRecord) -> MetricReport:
    tc = temporal_consistency(record)
    acc = count_acc(record)
    targets = np.asarray(record.targets)
    match = record.frames == targets[None, :]
    same = record.frames[1:] == record.frames[:-1]
    per_class = {
        cls: {"count_acc": float(match[:, i].mean()), "tc": float(same[:, i].mean())}
        for i, cls in enumerate(record.classes)
    }
    return MetricReport(
        count_acc=acc,
        tc=tc,
        per_class=per_class,
        per_frame=[float(x) for x in match.mean(axis=1)],
        per_numeral={_bucket(record): acc},
    )


def evaluate_records(records) -> MetricReport:
    """Aggregate report over many records: plain means, with the per-numeral
    breakdown bucketed by each record's max target."""
    if not records:
        raise ValueError("no records to evaluate")
    accs = [count_acc(r) for r in records]
    tcs = [temporal_consistency(r) for r in records]
    buckets = {}
    for r, a in zip(records, accs):
        buckets.setdefault(_bucket(r), []).append(a)
    return MetricReport(
        count_acc=float(np.mean(accs)),
        tc=float(np.mean(tcs)),
        per_numeral={k: float(np.mean(v)) for k, v in buckets.items()},
        n_records=len(records),
    )
