import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from synthforge.errors import MissingPairError, SchemaError, UnknownCategoryError
from synthforge.metrics import Detection, average_precision, iou, map_metrics, matrix_report


def pixel_iou(a, b, size=40):
    """Counts covered unit cells of integer boxes on a grid."""
    def mask(box):
        m = np.zeros((size, size), bool)
        x, y, w, h = box
        m[y:y + h, x:x + w] = True
        return m

    ma, mb = mask(a), mask(b)
    return (ma & mb).sum() / (ma | mb).sum()


def brute_ap(dets, gts, thr):
    """Reference evaluator written from the definition, loop by loop."""
    def overlap(a, b):
        ix = max(0.0, min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0]))
        iy = max(0.0, min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1]))
        inter = ix * iy
        if inter == 0:
            return 0.0
        return inter / (a[2] * a[3] + b[2] * b[3] - inter)

    n_gt = len(gts)
    if n_gt == 0:
        return 1.0 if not dets else 0.0
    # global ranking: score desc, then image id, then input position
    ranked = sorted(range(len(dets)), key=lambda i: (-dets[i]["score"], dets[i]["image_id"], i))
    used = set()
    outcome = {}
    for img in sorted({d["image_id"] for d in dets}):
        mine = [i for i in ranked if dets[i]["image_id"] == img]
        for i in mine:
            best = None
            for j, g in enumerate(gts):
                if g["image_id"] != img or j in used:
                    continue
                v = overlap(dets[i]["bbox"], g["bbox"])
                if v >= thr and (best is None or v > best[0]):
                    best = (v, j)
            if best is not None:
                used.add(best[1])
            outcome[i] = best is not None
    prec, rec = [], []
    tp = fp = 0
    for i in ranked:
        if outcome[i]:
            tp += 1
        else:
            fp += 1
        prec.append(tp / (tp + fp))
        rec.append(tp / n_gt)
    total = 0.0
    for k in range(101):
        r = k / 100
        cands = [p for p, q in zip(prec, rec) if q >= r]
        total += max(cands) if cands else 0.0
    return total / 101


def brute_map(dets, gts):
    cats = sorted({g["category_id"] for g in gts} | {d["category_id"] for d in dets})
    if not cats:
        return 1.0, 1.0
    per = []
    for c in cats:
        dc = [d for d in dets if d["category_id"] == c]
        gc = [g for g in gts if g["category_id"] == c]
        per.append([brute_ap(dc, gc, float(t)) for t in np.linspace(0.5, 0.95, 10)])
    return float(np.mean([p[0] for p in per])), float(np.mean([np.mean(p) for p in per]))


def random_instance(rng):
    gts, dets = [], []
    for img in range(1, int(rng.integers(1, 6)) + 1):
        for _ in range(int(rng.integers(0, 5))):
            x, y = (int(v) for v in rng.integers(0, 20, 2))
            w, h = (int(v) for v in rng.integers(1, 10, 2))
            gts.append({"image_id": img, "category_id": int(rng.integers(1, 3)), "bbox": [x, y, w, h]})
        for _ in range(int(rng.integers(0, 5))):
            if gts and rng.random() < 0.6:
                g = gts[int(rng.integers(len(gts)))]
                x, y, w, h = g["bbox"]
                box = [x + int(rng.integers(-2, 3)), y + int(rng.integers(-2, 3)), max(1, w + int(rng.integers(-2, 3))),
                       max(1, h + int(rng.integers(-2, 3)))]
                cat = g["category_id"] if rng.random() < 0.8 else 3 - g["category_id"]
            else:
                box = [int(v) for v in rng.integers(0, 20, 2)] + [int(v) for v in rng.integers(1, 10, 2)]
                cat = int(rng.integers(1, 3))
            dets.append({"image_id": img, "category_id": cat, "bbox": box,
                         "score": float(rng.choice([0.9, 0.5, 0.3])) if rng.random() < 0.3 else float(rng.random())})
    return dets, gts


def test_iou_examples():
    assert iou([0, 0, 10, 10], [0, 0, 10, 10]) == 1.0
    assert iou([0, 0, 10, 10], [20, 20, 5, 5]) == 0.0
    assert iou([0, 0, 10, 10], [10, 0, 10, 10]) == 0.0
    assert iou([0, 0, 10, 10], [5, 0, 10, 10]) == pytest.approx(1 / 3, abs=1e-12)
    assert pixel_iou([0, 0, 10, 10], [5, 0, 10, 10]) == pytest.approx(1 / 3, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 15), min_size=4, max_size=4), st.lists(st.integers(1, 15), min_size=4, max_size=4))
def test_iou_matches_pixels(xy, wh):
    a = [xy[0], xy[1], wh[0], wh[1]]
    b = [xy[2], xy[3], wh[2], wh[3]]
    assert iou(a, b) == pytest.approx(pixel_iou(a, b), abs=1e-12)
    assert iou(a, b) == iou(b, a)


def test_ap_cases():
    g = [{"image_id": 1, "bbox": [0, 0, 10, 10]}]
    assert average_precision([{"image_id": 1, "bbox": [0, 0, 10, 10], "score": 0.9}], g) == 1.0
    assert average_precision([], g) == 0.0
    assert average_precision([], []) == 1.0
    assert average_precision([{"image_id": 1, "bbox": [0, 0, 10, 10], "score": 0.9}], []) == 0.0


def test_half_recall_is_51_over_101():
    gts = [{"image_id": 1, "bbox": [0, 0, 10, 10]}, {"image_id": 1, "bbox": [30, 30, 10, 10]}]
    dets = [{"image_id": 1, "bbox": [0, 0, 10, 10], "score": 0.9}, {"image_id": 1, "bbox": [60, 60, 5, 5], "score": 0.8}]
    assert average_precision(dets, gts) == 51 / 101


def test_ap_not_increasing_in_threshold():
    rng = np.random.default_rng(3)
    for _ in range(50):
        dets, gts = random_instance(rng)
        aps = [average_precision(dets, gts, t) for t in np.linspace(0.5, 0.95, 10)]
        assert all(a >= b - 1e-12 for a, b in zip(aps, aps[1:]))


def test_perfect_and_empty_detector():
    rng = np.random.default_rng(4)
    _, gts = random_instance(rng)
    while not gts:
        _, gts = random_instance(rng)
    perfect = [{**g, "score": 1.0} for g in gts]
    rep = map_metrics(perfect, gts)
    assert rep.map50 == 1.0 and rep.map50_95 == 1.0
    rep = map_metrics([], gts)
    assert rep.map50 == 0.0 and rep.map50_95 == 0.0


def test_unknown_category():
    with pytest.raises(UnknownCategoryError):
        map_metrics([{"image_id": 1, "category_id": 9, "bbox": [0, 0, 1, 1], "score": 1.0}],
                    [{"image_id": 1, "category_id": 1, "bbox": [0, 0, 1, 1]}], categories=[1, 2])


def test_detection_validation():
    with pytest.raises(SchemaError):
        Detection(1, 1, (0, 0, 0, 5), 0.5)
    with pytest.raises(SchemaError):
        Detection(1, 1, (0, 0, 2, 5), float("nan"))
    with pytest.raises(SchemaError):
        Detection.from_dict({"image_id": 1})


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(2025)
    for _ in range(300):
        dets, gts = random_instance(rng)
        rep = map_metrics(dets, gts, categories=[1, 2])
        m50, m5095 = brute_map(dets, gts)
        assert rep.map50 == pytest.approx(m50, abs=1e-9)
        assert rep.map50_95 == pytest.approx(m5095, abs=1e-9)


def test_maps_are_means_of_aps():
    rng = np.random.default_rng(6)
    dets, gts = random_instance(rng)
    rep = map_metrics(dets, gts, categories=[1, 2])
    if rep.ap:
        assert rep.map50 == np.mean([v[0] for v in rep.ap.values()])
        assert rep.map50_95 == np.mean([np.mean(v) for v in rep.ap.values()])


def _gt_set(n):
    return [{"image_id": i, "category_id": 1, "bbox": [0, 0, 10, 10]} for i in range(1, n + 1)], [1]


def test_matrix_echo_and_averages():
    gt = {"P1": _gt_set(2), "loose": _gt_set(2)}
    good = [{"image_id": i, "category_id": 1, "bbox": [0, 0, 10, 10], "score": 1.0} for i in (1, 2)]
    half = good[:1]
    models = [("A", {"P1": good, "loose": half}), ("B", {"P1": half, "loose": good})]
    rep = matrix_report(models, gt, metric="map50")
    expect_half = map_metrics(half, gt["P1"][0]).map50
    table = rep.table()
    assert table[0] == ["Validated on", "A", "B"]
    assert table[1] == ["P1", 1.0, expect_half]
    assert table[2] == ["Average Sim", 1.0, expect_half]
    assert table[3] == ["loose", expect_half, 1.0]
    assert table[4] == ["Average Real", expect_half, 1.0]
    assert "Average Sim" in rep.text() and rep.csv().splitlines()[0] == "Validated on,A,B"


def test_matrix_groups_and_single_model():
    names = ["P1", "P2", "P3", "P4", "P5", "loose", "assembly"]
    gt = {n: _gt_set(1) for n in names}
    perfect = [{"image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10], "score": 0.5}]
    rep = matrix_report([("C1", {n: perfect for n in names})], gt)
    rows = [r[0] for r in rep.table()]
    assert rows == ["Validated on", *names[:5], "Average Sim", "loose", "assembly", "Average Real"]
    assert all(v == 1.0 for r in rep.table()[1:] for v in r[1:])
    assert len(rep.table()[0]) == 2


def test_matrix_missing_pair():
    gt = {"P1": _gt_set(1), "real": _gt_set(1)}
    with pytest.raises(MissingPairError) as e:
        matrix_report([("A", {"P1": []})], gt)
    assert "A/real" in str(e.value)
