"""Brute-force reference computations used to cross-check the package."""

import itertools
import struct
import math


def points_mm(voxels, spacing):
    # volumes store spacing as float32; use the stored value
    spacing = [float(struct.unpack("<f", struct.pack("<f", s))[0]) for s in spacing]
    return [(i * spacing[0], j * spacing[1], k * spacing[2]) for i, j, k in voxels]


def max_pairwise(points):
    best = 0.0
    for p, q in itertools.combinations(points, 2):
        best = max(best, math.dist(p, q))
    return best


def directed_hausdorff(src, dst):
    return max(min(math.dist(p, q) for q in dst) for p in src)


def hausdorff(a, b):
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def cosine(u, v):
    dot = sum(x * y for x, y in zip(u, v))
    return dot / (math.sqrt(sum(x * x for x in u)) * math.sqrt(sum(y * y for y in v)))


def per_class_f1(preds, truths):
    """{class: (precision, recall, f1, support)} from explicit confusion counts."""
    out = {}
    for c in set(preds) | set(truths):
        tp = fp = fn = 0
        for p, t in zip(preds, truths):
            if p == c and t == c:
                tp += 1
            elif p == c:
                fp += 1
            elif t == c:
                fn += 1
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out[c] = (precision, recall, f1, tp + fn)
    return out


def weighted_f1(preds, truths):
    n = len(truths)
    return sum(f1 * support / n for _, _, f1, support in per_class_f1(preds, truths).values())


def digitized_sphere(diameter_mm, spacing=1.0):
    """Voxel index triples whose centres are within D/2 of a lattice-point centre."""
    r = diameter_mm / 2.0
    reach = int(r // spacing)
    return [(i, j, k)
            for i in range(-reach, reach + 1)
            for j in range(-reach, reach + 1)
            for k in range(-reach, reach + 1)
            if (i * spacing) ** 2 + (j * spacing) ** 2 + (k * spacing) ** 2 <= r * r]
