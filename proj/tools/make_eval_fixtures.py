#!/usr/bin/env python3
"""Builds the deterministic evaluation fixtures under tests/fixtures.

The real-eval set has 158 empty-gripper, 150 rigid and 210 deformable images.
Detector and classifier fixtures drive the two-stage pipeline over it; record
files and a VQA recording hold per-example outcomes whose counts reproduce the
published detection, accuracy and precision/recall tables. Only the standard
library is used. Re-running overwrites the fixtures with identical bytes.
"""

import argparse
import json
import math
import random
import shutil
import struct
import zlib
from pathlib import Path

WIDTH, HEIGHT = 640, 480
NO_OBJECT, RIGID, DEFORMABLE = "no_object", "rigid", "deformable"
DECISION_THRESHOLD = 0.15  # real-domain threshold the classifier fixture is built for


def write_png(path, width, height, rects, background):
    """Solid background plus filled rectangles [(x0, y0, x1, y1, rgb)]."""
    rows = []
    base = bytes(background) * width
    for y in range(height):
        row = bytearray(base)
        for x0, y0, x1, y1, rgb in rects:
            if y0 <= y < y1:
                row[x0 * 3 : x1 * 3] = bytes(rgb) * (x1 - x0)
        rows.append(b"\x00" + bytes(row))
    raw = b"".join(rows)

    def chunk(tag, data):
        c = struct.pack(">I", len(data)) + tag + data
        return c + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)

    png = b"\x89PNG\r\n\x1a\n"
    png += chunk(b"IHDR", struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0))
    png += chunk(b"IDAT", zlib.compress(raw, 9))
    png += chunk(b"IEND", b"")
    path.write_bytes(png)


def dump_jsonl(path, rows):
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r, separators=(",", ":")) + "\n")


def dump_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def clamp_box(b):
    x0, y0, x1, y1 = b
    x0, x1 = max(0.0, x0), min(float(WIDTH), x1)
    y0, y1 = max(0.0, y0), min(float(HEIGHT), y1)
    return [round(x0, 1), round(y0, 1), round(x1, 1), round(y1, 1)]


# --------------------------------------------------------------------------
# Example layout


def object_counts(n_objects, n_full, full=10, rest=9):
    return [full] * n_full + [rest] * (n_objects - n_full)


def build_examples(rng):
    """Returns a list of dicts: id, category, object_id, bbox."""
    layout = [(NO_OBJECT, None, 158)]
    for i, n in enumerate(object_counts(16, 6)):
        layout.append((RIGID, f"rigid_{i:02d}", n))
    for i, n in enumerate(object_counts(23, 3)):
        layout.append((DEFORMABLE, f"deformable_{i:02d}", n))
    examples = []
    for category, object_id, n in layout:
        for _ in range(n):
            w, h = rng.uniform(90, 150), rng.uniform(80, 130)
            cx, cy = rng.uniform(200, 440), rng.uniform(170, 330)
            examples.append(
                {
                    "id": f"images/{len(examples):03d}.png",
                    "category": category,
                    "object_id": object_id,
                    "bbox": clamp_box([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2]),
                }
            )
    assert len(examples) == 518
    return examples


def by_category(examples, category):
    return [e for e in examples if e["category"] == category]


# --------------------------------------------------------------------------
# Detection review: which examples have a qualitatively correct box.


def assign_detection_failures(rng, examples):
    failed = set()
    nobj = by_category(examples, NO_OBJECT)
    failed.update(e["id"] for e in rng.sample(nobj, 3))
    # failures per object: rigid 8 over 6 objects, deformable 7 over 4 objects
    for category, pattern, n_objects in ((RIGID, [2, 2, 1, 1, 1, 1], 16), (DEFORMABLE, [2, 2, 2, 1], 23)):
        objects = sorted({e["object_id"] for e in by_category(examples, category)})
        assert len(objects) == n_objects
        for obj, k in zip(rng.sample(objects, len(pattern)), pattern):
            members = [e for e in examples if e["object_id"] == obj]
            failed.update(e["id"] for e in rng.sample(members, k))
    return failed


# --------------------------------------------------------------------------
# Two-stage model outcomes.


def assign_pipeline_predictions(rng, examples, failed):
    """Predicted label per example (1 = no_object, 0 = object)."""
    pred = {}
    nobj = by_category(examples, NO_OBJECT)
    nobj_fail = [e for e in nobj if e["id"] in failed]
    nobj_ok = [e for e in nobj if e["id"] not in failed]
    # 118 of 158 correct overall, 116 of 155 among correctly detected
    for i, e in enumerate(nobj_fail):
        pred[e["id"]] = 1 if i < 2 else 0
    correct = set(x["id"] for x in rng.sample(nobj_ok, 116))
    for e in nobj_ok:
        pred[e["id"]] = 1 if e["id"] in correct else 0

    # rigid: 20 wrong, one of them among detection failures
    rigid = by_category(examples, RIGID)
    rigid_fail = [e for e in rigid if e["id"] in failed]
    rigid_ok = [e for e in rigid if e["id"] not in failed]
    wrong = {rng.choice(rigid_fail)["id"]}
    wrong.update(x["id"] for x in rng.sample(rigid_ok, 19))
    for e in rigid:
        pred[e["id"]] = 1 if e["id"] in wrong else 0

    # deformable: 36 wrong, all among correctly detected
    deform = by_category(examples, DEFORMABLE)
    deform_ok = [e for e in deform if e["id"] not in failed]
    wrong = set(x["id"] for x in rng.sample(deform_ok, 36))
    for e in deform:
        pred[e["id"]] = 1 if e["id"] in wrong else 0
    return pred


def jitter(rng, box, scale):
    x0, y0, x1, y1 = box
    w, h = x1 - x0, y1 - y0
    return clamp_box(
        [
            x0 + rng.gauss(0, scale * w),
            y0 + rng.gauss(0, scale * h),
            x1 + rng.gauss(0, scale * w),
            y1 + rng.gauss(0, scale * h),
        ]
    )


def detector_candidates(rng, example, detection_ok):
    """Candidate boxes for one image. The densest cluster sits on the gripper
    when detection_ok, elsewhere otherwise; a fraction of images only produce
    low-confidence candidates so the adaptive threshold has to back off."""
    gt = example["bbox"]
    weak = rng.random() < 0.15
    top = rng.uniform(0.12, 0.24) if weak else rng.uniform(0.55, 0.95)
    if detection_ok:
        center = gt
    else:
        # a box shifted far enough that at most one finger is covered
        dx = (gt[2] - gt[0]) * rng.choice([-0.8, 0.8])
        dy = (gt[3] - gt[1]) * rng.uniform(-0.3, 0.3)
        center = clamp_box([gt[0] + dx, gt[1] + dy, gt[2] + dx, gt[3] + dy])
        if center[2] - center[0] < 10 or center[3] - center[1] < 10:
            center = clamp_box([gt[0], gt[1] + (gt[3] - gt[1]) * 0.7, gt[2], gt[3] + (gt[3] - gt[1]) * 0.7])
    cands = [{"bbox": jitter(rng, center, 0.02), "confidence": round(top, 3)}]
    for _ in range(rng.randint(1, 4)):
        cands.append({"bbox": jitter(rng, center, 0.05), "confidence": round(top * rng.uniform(0.3, 0.9), 3)})
    # an isolated distractor candidate, weaker than the main cluster's total
    if rng.random() < 0.5:
        w, h = rng.uniform(40, 90), rng.uniform(40, 90)
        far_x = 40 + w / 2 if gt[0] > WIDTH / 2 else WIDTH - 40 - w / 2
        cy = rng.uniform(60, HEIGHT - 60)
        cands.append(
            {
                "bbox": clamp_box([far_x - w / 2, cy - h / 2, far_x + w / 2, cy + h / 2]),
                "confidence": round(top * rng.uniform(0.5, 0.95), 3),
            }
        )
    rng.shuffle(cands)
    return cands


def classifier_probability(rng, predicted_no_object, first_no_object):
    if predicted_no_object:
        return DECISION_THRESHOLD if first_no_object else round(rng.uniform(0.16, 0.97), 4)
    return round(rng.uniform(0.0, 0.14), 4)


# --------------------------------------------------------------------------
# VQA outcomes.

YES = ["Yes", "YES", "Yes.", "Yes, the gripper is holding an object.", "yes"]
NO = ["No", "NO", "No.", "No, the gripper is empty.", "no"]
UNPARSEABLE = [
    "The gripper appears occupied.",
    "I cannot determine that from this image.",
    "It is hard to tell from this viewpoint.",
    "The image is too blurry to decide.",
]


def exact_latencies(rng, n, mean, std):
    """Integer milliseconds with exactly the requested mean and population std."""
    target_ss = n * std * std
    assert target_ss == int(target_ss)
    target_ss = int(target_ss)
    raw = [rng.lognormvariate(0.0, 0.55) for _ in range(n)]
    m = sum(raw) / n
    s = math.sqrt(sum((x - m) ** 2 for x in raw) / n)
    d = [round((x - m) / s * std) for x in raw]
    # zero the deviation sum
    while sum(d) != 0:
        i = rng.randrange(n)
        d[i] -= 1 if sum(d) > 0 else -1
    # moving one unit from j to i changes the square sum by 2 * (d_i - d_j + 1)
    for _ in range(10000):
        ss = sum(x * x for x in d)
        if ss == target_ss:
            break
        r = (target_ss - ss) // 2
        pos = {v: k for k, v in enumerate(d)}
        done = False
        for j, dj in enumerate(d):
            i = pos.get(dj + r - 1)
            if i is not None and i != j:
                d[i] += 1
                d[j] -= 1
                done = True
                break
        if done:
            continue
        order = sorted(range(n), key=lambda k: d[k])
        if r > 0:
            i, j = order[-1], order[0]
        else:
            i, j = order[0], order[-1]
        step = d[i] - d[j] + 1
        if abs(step) > abs(r):
            # move between closer neighbours instead
            i, j = (order[n // 2 + 1], order[n // 2]) if r > 0 else (order[n // 2], order[n // 2 + 1])
        d[i] += 1
        d[j] -= 1
    assert sum(d) == 0 and sum(x * x for x in d) == target_ss
    values = [int(mean) + x for x in d]
    assert min(values) > 0
    return values


def assign_gpt4o(rng, examples):
    """raw answer per example id."""
    answers = {}
    plan = {
        NO_OBJECT: (7, 133, 18),  # yes, no, unparseable
        RIGID: (143, 7, 0),
        DEFORMABLE: (143, 40, 27),
    }
    for category, (n_yes, n_no, n_bad) in plan.items():
        members = by_category(examples, category)
        assert len(members) == n_yes + n_no + n_bad
        kinds = ["yes"] * n_yes + ["no"] * n_no + ["bad"] * n_bad
        rng.shuffle(kinds)
        for e, kind in zip(members, kinds):
            pool = {"yes": YES, "no": NO, "bad": UNPARSEABLE}[kind]
            answers[e["id"]] = rng.choice(pool)
    return answers


def answer_label(text):
    for token in "".join(c.lower() if c.isalnum() else " " for c in text).split():
        if token == "yes":
            return 0
        if token == "no":
            return 1
    return None


def llama_predictions(rng, examples, n_correct):
    """All-predicted records with a fixed number of correct answers per category."""
    pred = {}
    for category, k in n_correct.items():
        members = by_category(examples, category)
        right = set(e["id"] for e in rng.sample(members, k))
        truth = 1 if category == NO_OBJECT else 0
        for e in members:
            pred[e["id"]] = truth if e["id"] in right else 1 - truth
    return pred


def record(e, detection_correct, predicted):
    truth = 1 if e["category"] == NO_OBJECT else 0
    return {
        "example_id": e["id"],
        "category": e["category"],
        "object_id": e["object_id"],
        "detection_correct": detection_correct,
        "predicted_label": predicted,
        "true_label": truth,
    }


# --------------------------------------------------------------------------


def write_dataset(root, examples, split, draw_rng, with_object):
    (root / "images").mkdir(parents=True, exist_ok=True)
    manifest = [{"manifest_version": "1", "split": split, "image_width": WIDTH, "image_height": HEIGHT}]
    for i, e in enumerate(examples):
        label = 1 if e["category"] == NO_OBJECT else 0
        manifest.append(
            {
                "image": e["id"],
                "batch": 0,
                "index": i,
                "label": label,
                "category": e["category"],
                "object_id": e["object_id"],
                "bbox": e["bbox"],
            }
        )
        bg = [draw_rng.randrange(90, 200) for _ in range(3)]
        x0, y0, x1, y1 = (int(v) for v in e["bbox"])
        rects = [
            (x0, y0, x0 + (x1 - x0) // 5, y1, (40, 40, 45)),
            (x1 - (x1 - x0) // 5, y0, x1, y1, (40, 40, 45)),
        ]
        if with_object(e):
            rects.append((x0 + (x1 - x0) // 5, y0 + (y1 - y0) // 4, x1 - (x1 - x0) // 5, y1 - (y1 - y0) // 4,
                          tuple(draw_rng.randrange(0, 256) for _ in range(3))))
        write_png(root / e["id"], WIDTH, HEIGHT, rects, bg)
    dump_jsonl(root / "manifest.jsonl", manifest)


def build_real_eval(out):
    rng = random.Random(518)
    examples = build_examples(rng)
    failed = assign_detection_failures(rng, examples)
    pred = assign_pipeline_predictions(rng, examples, failed)

    real = out / "real_eval"
    if real.exists():
        shutil.rmtree(real)
    write_dataset(real, examples, "real_eval", random.Random(7), lambda e: e["category"] != NO_OBJECT)
    dump_jsonl(real / "detection_review.jsonl",
               [{"example_id": e["id"], "detection_correct": e["id"] not in failed} for e in examples])

    backends = out / "backends"
    backends.mkdir(parents=True, exist_ok=True)
    det_rng = random.Random(11)
    dump_json(backends / "real_eval_detector.json",
              {e["id"]: detector_candidates(det_rng, e, e["id"] not in failed) for e in examples})
    cls_rng = random.Random(13)
    probs = {}
    first = True
    for e in examples:
        probs[e["id"]] = classifier_probability(cls_rng, pred[e["id"]] == 1, first and pred[e["id"]] == 1)
        first = first and pred[e["id"]] != 1
    dump_json(backends / "real_eval_classifier.json", probs)

    records = out / "records"
    records.mkdir(parents=True, exist_ok=True)
    dump_jsonl(records / "graspchecknet.jsonl", [record(e, e["id"] not in failed, pred[e["id"]]) for e in examples])

    answers = assign_gpt4o(random.Random(4), examples)
    latencies = exact_latencies(random.Random(2270), len(examples), 2270, 1530)
    vqa = out / "vqa"
    vqa.mkdir(parents=True, exist_ok=True)
    dump_jsonl(vqa / "gpt4o_recording.jsonl",
               [{"example_id": e["id"], "raw_text": answers[e["id"]], "latency_ms": lat, "cost": 0.001,
                 "currency": "EUR"} for e, lat in zip(examples, latencies)])
    dump_jsonl(records / "gpt4o.jsonl", [record(e, True, answer_label(answers[e["id"]])) for e in examples])

    l2 = llama_predictions(random.Random(32), examples, {NO_OBJECT: 77, RIGID: 103, DEFORMABLE: 126})
    dump_jsonl(records / "llama_table2.jsonl", [record(e, True, l2[e["id"]]) for e in examples])
    # precision/recall table: 81 of 158 empty grippers found, 146 false alarms
    l3 = llama_predictions(random.Random(33), examples, {NO_OBJECT: 81, RIGID: 90, DEFORMABLE: 124})
    dump_jsonl(records / "llama_table3.jsonl", [record(e, True, l3[e["id"]]) for e in examples])


def build_small(out):
    """Six images; the detector fixture knows nothing about three of them."""
    rng = random.Random(6)
    examples = []
    for i, category in enumerate([NO_OBJECT, RIGID, DEFORMABLE, NO_OBJECT, RIGID, DEFORMABLE]):
        object_id = None if category == NO_OBJECT else f"{category}_{i:02d}"
        examples.append({"id": f"images/{i:03d}.png", "category": category, "object_id": object_id,
                         "bbox": [200.0 + 10 * i, 150.0, 330.0 + 10 * i, 270.0]})
    small = out / "small"
    if small.exists():
        shutil.rmtree(small)
    write_dataset(small, examples, "real_eval", random.Random(8), lambda e: e["category"] != NO_OBJECT)
    detections = {e["id"]: detector_candidates(rng, e, True) for e in examples[:3]}
    dump_json(small / "detector.json", detections)
    dump_json(small / "classifier.json", {e["id"]: (0.8 if e["category"] == NO_OBJECT else 0.05) for e in examples})
    dump_jsonl(small / "detection_review.jsonl", [{"example_id": e["id"], "detection_correct": True}
                                                   for e in examples[:3]])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "tests" / "fixtures")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    build_real_eval(args.out)
    build_small(args.out)


if __name__ == "__main__":
    main()
