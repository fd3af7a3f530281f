"""Fixed class-balanced evaluation subsets.

Selection is class-stratified with per-class counts differing by at most
one, deterministic given ``subset_seed``, and ordered class-major with a
seeded shuffle within each class.  When balanced stratification is
impossible (more classes than slots, or a class smaller than its quota)
the allocation falls back to largest-remainder proportional selection
and a warning record is returned alongside the ids.
"""

from __future__ import annotations

import numpy as np


def _proportional_counts(class_sizes: dict, n: int) -> dict:
    total = sum(class_sizes.values())
    raw = {c: n * size / total for c, size in class_sizes.items()}
    counts = {c: min(int(raw[c]), class_sizes[c]) for c in class_sizes}
    remaining = n - sum(counts.values())
    # largest fractional remainder first; class order breaks ties
    order = sorted(class_sizes, key=lambda c: (-(raw[c] - int(raw[c])), c))
    while remaining > 0:
        progressed = False
        for c in order:
            if remaining == 0:
                break
            if counts[c] < class_sizes[c]:
                counts[c] += 1
                remaining -= 1
                progressed = True
        if not progressed:
            break
    return counts


def fixed_eval_subset(image_ids, labels, n: int, subset_seed: int):
    """Select ``n`` image ids, class-stratified and deterministic.

    Returns (ordered ids, warnings).  Ids are grouped class-major in
    ascending class order; within a class the order is a seeded shuffle.
    """
    ids = list(image_ids)
    labels = list(labels)
    if len(ids) != len(labels):
        raise ValueError(f"{len(ids)} ids but {len(labels)} labels")
    if n > len(ids):
        raise ValueError(f"subset size {n} exceeds split size {len(ids)}")

    by_class: dict = {}
    for img_id, label in zip(ids, labels):
        by_class.setdefault(label, []).append(img_id)
    classes = sorted(by_class)
    class_sizes = {c: len(by_class[c]) for c in classes}

    warnings = []
    base, extra = divmod(n, len(classes))
    counts = {c: base + (1 if i < extra else 0) for i, c in enumerate(classes)}
    if base == 0 or any(counts[c] > class_sizes[c] for c in classes):
        counts = _proportional_counts(class_sizes, n)
        warnings.append(
            "balanced stratification impossible "
            f"({len(classes)} classes, {n} slots); used proportional allocation"
        )

    rng = np.random.default_rng(subset_seed)
    selected = []
    for c in classes:
        members = by_class[c]
        order = rng.permutation(len(members))
        selected.extend(members[i] for i in order[: counts[c]])
    return selected, warnings
