"""Builds the frozen evaluation fixture and its expected reports.

Ground truths are written as Cornell corner files; predictions as
`x y w h theta score` rectangles. Expected accuracies come from shapely
polygon overlaps, independent of the Rust geometry code.

    python3 make_eval_fixture.py  # writes into ./eval
"""

import math
import random
from pathlib import Path

from shapely.geometry import Polygon

OUT = Path(__file__).parent / "eval"
JACCARD = 0.25
ANGLE = 30.0
SWEEP_JACCARD = [0.20, 0.25, 0.30, 0.35]
SWEEP_ANGLE = [10.0, 15.0, 20.0, 25.0, 30.0]
MARGIN = 1e-4


def corners(x, y, w, h, theta):
    c, s = math.cos(math.radians(theta)), math.sin(math.radians(theta))
    local = [(-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)]
    return [(x + c * u - s * v, y + s * u + c * v) for u, v in local]


def line_angle(p, q):
    """Undirected angle of segment p→q, degrees in (-90, 90]."""
    d = math.degrees(math.atan2(q[1] - p[1], q[0] - p[0]))
    return d - 180.0 * math.floor((d + 90.0) / 180.0) if d != 90.0 else 90.0


def angle_gap(a, b):
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


def iou(p, q):
    inter = p.intersection(q).area
    return inter / (p.area + q.area - inter)


def near_threshold(pred, gts):
    for g in gts:
        j, a = iou(pred["poly"], g["poly"]), angle_gap(pred["theta"], g["theta"])
        if any(abs(j - t) < MARGIN for t in SWEEP_JACCARD):
            return True
        if any(abs(a - t) < MARGIN for t in SWEEP_ANGLE):
            return True
    return False


def correct(pred, gts, jt, at):
    return any(
        angle_gap(pred["theta"], g["theta"]) <= at and iou(pred["poly"], g["poly"]) > jt
        for g in gts
    )


def main():
    rng = random.Random(20240611)
    OUT.mkdir(exist_ok=True)
    images = []
    for i in range(12):
        gts = []
        for _ in range(rng.randint(1, 3)):
            x, y = rng.uniform(80, 560), rng.uniform(80, 400)
            w, h = rng.uniform(30, 90), rng.uniform(12, 30)
            quad = corners(x, y, w, h, rng.uniform(-90, 90))
            gts.append({"quad": quad, "poly": Polygon(quad), "theta": line_angle(quad[0], quad[1])})
        preds = []
        # Image 5 has no prediction line; image 9 has an empty one.
        count = 0 if i in (5, 9) else rng.randint(1, 3)
        while len(preds) < count:
            base = rng.choice(gts)
            cx = sum(p[0] for p in base["quad"]) / 4
            cy = sum(p[1] for p in base["quad"]) / 4
            w = math.dist(base["quad"][0], base["quad"][1]) * rng.uniform(0.75, 1.3)
            h = math.dist(base["quad"][1], base["quad"][2]) * rng.uniform(0.75, 1.3)
            theta = base["theta"] + rng.uniform(-35, 35)
            theta = theta - 180.0 * math.floor((theta + 90.0) / 180.0)
            x, y = cx + rng.uniform(-12, 12), cy + rng.uniform(-12, 12)
            pred = {
                "rect": (x, y, w, h, theta),
                "poly": Polygon(corners(x, y, w, h, theta)),
                "theta": theta,
                "score": round(rng.uniform(0.05, 0.95), 6),
            }
            if near_threshold(pred, gts) or any(p["score"] == pred["score"] for p in preds):
                continue
            preds.append(pred)
        images.append({"id": f"img{i:02d}", "instance": f"obj{i // 2}", "gts": gts, "preds": preds})

    folds = [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9, 10, 11]]

    manifest = ["# id instance rgb depth grasps"]
    for img in images:
        name = f"{img['id']}cpos.txt"
        lines = [f"{x:.6f} {y:.6f}" for g in img["gts"] for x, y in g["quad"]]
        (OUT / name).write_text("\n".join(lines) + "\n")
        manifest.append(f"{img['id']} {img['instance']} {img['id']}r.png {img['id']}d.png {name}")
    (OUT / "manifest.txt").write_text("\n".join(manifest) + "\n")

    pred_lines = []
    for img in images:
        if img["id"] == "img05":
            continue
        fields = [img["id"]]
        for p in img["preds"]:
            fields += [f"{v:.6f}" for v in p["rect"]] + [f"{p['score']:.6f}"]
        pred_lines.append(" ".join(fields))
    (OUT / "predictions.txt").write_text("\n".join(pred_lines) + "\n")

    (OUT / "folds.txt").write_text(
        "".join(f"{f + 1} {images[i]['id']}\n" for f, members in enumerate(folds) for i in members)
    )

    def outcome(img, jt, at):
        if not img["preds"]:
            return "missing"
        best = max(img["preds"], key=lambda p: p["score"])
        return "correct" if correct(best, img["gts"], jt, at) else "wrong"

    def row(name, jt, at):
        accs = []
        for members in folds:
            hits = sum(outcome(images[i], jt, at) == "correct" for i in members)
            accs.append(hits / len(members))
        cells = [name, "file", f"{jt:.6f}", f"{at:.6f}"] + [f"{a:.6f}" for a in accs]
        return ",".join(cells + [f"{sum(accs) / len(accs):.6f}"])

    header = "table,split,jaccard_threshold,angle_threshold,fold_1,fold_2,fold_3,mean"
    rows = [header, row("top1", JACCARD, ANGLE)]
    rows += [row("jaccard_sweep", j, ANGLE) for j in SWEEP_JACCARD]
    rows += [row("angle_sweep", JACCARD, a) for a in SWEEP_ANGLE]
    (OUT / "expected_report.csv").write_text("\n".join(rows) + "\n")

    per_image = ["fold,id,outcome"] + [
        f"{f + 1},{images[i]['id']},{outcome(images[i], JACCARD, ANGLE)}"
        for f, members in enumerate(folds)
        for i in members
    ]
    (OUT / "expected_per_image.csv").write_text("\n".join(per_image) + "\n")


if __name__ == "__main__":
    main()
