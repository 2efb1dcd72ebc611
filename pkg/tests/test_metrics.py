import numpy as np
import pytest

from numina.errors import TooFewFrames
from numina.io import CountRecord
from numina.metrics import (
    count_acc,
    evaluate_record,
    evaluate_records,
    temporal_consistency,
)


def record(frames, targets, classes=None):
    frames = np.asarray(frames)
    classes = classes or [f"c{i}" for i in range(frames.shape[1])]
    return CountRecord(classes=classes, targets=targets, frames=frames)


def test_count_acc_fixture():
    # 2 frames, 2 classes: frame 1 one match, frame 2 both
    rec = record([[3, 1], [3, 2]], targets=[3, 2])
    assert count_acc(rec) == pytest.approx(0.75)


def test_count_acc_bounds():
    assert count_acc(record([[2, 2], [2, 2]], targets=[2, 2])) == 1.0
    assert count_acc(record([[1, 1], [1, 1]], targets=[2, 2])) == 0.0


def test_tc_fixture():
    rec = record([[2], [2], [3]], targets=[2])
    assert temporal_consistency(rec) == pytest.approx(0.5)


def test_tc_bounds():
    assert temporal_consistency(record([[4], [4], [4]], targets=[4])) == 1.0
    assert temporal_consistency(record([[1], [2], [3]], targets=[2])) == 0.0


def test_tc_too_few_frames():
    with pytest.raises(TooFewFrames):
        temporal_consistency(record([[2]], targets=[2]))


def test_permutation_invariance():
    rng = np.random.default_rng(3)
    frames = rng.integers(0, 4, size=(4, 3))
    targets = [2, 1, 3]
    rec = record(frames, targets=targets)
    perm = [2, 0, 1]
    rec_p = record(frames[:, perm], targets=[targets[i] for i in perm])
    assert count_acc(rec) == pytest.approx(count_acc(rec_p))
    assert temporal_consistency(rec) == pytest.approx(temporal_consistency(rec_p))
    assert 0.0 <= count_acc(rec) <= 1.0
    assert 0.0 <= temporal_consistency(rec) <= 1.0


def test_tc_equals_one_minus_change_fraction():
    rng = np.random.default_rng(4)
    for _ in range(20):
        frames = rng.integers(0, 3, size=(int(rng.integers(2, 6)), int(rng.integers(1, 4))))
        rec = record(frames, targets=[1] * frames.shape[1])
        changes = (frames[1:] != frames[:-1]).sum()
        cells = (frames.shape[0] - 1) * frames.shape[1]
        assert temporal_consistency(rec) == pytest.approx(1 - changes / cells)


def test_count_acc_mean_stability():
    rec = record([[3, 1], [3, 2]], targets=[3, 2])
    base = count_acc(rec)  # 0.75: appending a frame with matches (1, 0.5 avg)
    grown = record([[3, 1], [3, 2], [3, 1]], targets=[3, 2])
    # appended frame scores 0.5 != 0.75, so acc moves; append a frame whose
    # per-class matches average exactly the current mean is impossible with 2
    # classes at 0.75, so verify mean arithmetic directly instead
    assert count_acc(grown) == pytest.approx((0.5 + 1.0 + 0.5) / 3)
    assert base == pytest.approx(0.75)


def test_evaluate_record_breakdowns():
    rec = record([[3, 1], [3, 2]], targets=[3, 2], classes=["cats", "dogs"])
    rep = evaluate_record(rec)
    assert rep.count_acc == pytest.approx(0.75)
    assert rep.tc == pytest.approx(0.5)  # dogs count changes between frames
    assert rep.per_class["cats"]["count_acc"] == 1.0
    assert rep.per_class["dogs"]["count_acc"] == 0.5
    assert rep.per_frame == [0.5, 1.0]
    assert rep.per_numeral == {3: pytest.approx(0.75)}
    # aggregate equals the mean of the per-frame breakdown
    assert abs(rep.count_acc - np.mean(rep.per_frame)) < 1e-12


def test_evaluate_records_aggregate_reconciles():
    recs = [
        record([[3], [3]], targets=[3]),
        record([[1], [2]], targets=[2]),
        record([[2, 5], [2, 5]], targets=[2, 5]),
    ]
    rep = evaluate_records(recs)
    accs = [count_acc(r) for r in recs]
    assert rep.count_acc == pytest.approx(np.mean(accs))
    weighted = sum(v * sum(1 for r in recs if max(r.targets) == k)
                   for k, v in rep.per_numeral.items())
    assert abs(weighted / len(recs) - rep.count_acc) < 1e-12
    assert rep.n_records == 3
