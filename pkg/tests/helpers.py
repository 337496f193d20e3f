"""Independent brute-force helpers shared by pipeline and acceptance tests.

Deliberately written from scratch (plain loops over the exported CSV),
not via the engine's metric code, so they can serve as an oracle.
"""

import csv


def recompute_map_from_csv(path, manifest):
    """Recompute base/novel/overall mAP from an exported rankings CSV."""
    tier_of = {c.class_id: c.tier for c in manifest.classes}
    class_of = {v.video_id: v.class_id for v in manifest.videos if not v.is_distractor}
    per_query = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            per_query.setdefault(row["query_id"], []).append(
                (int(row["rank"]), row["relevant"] == "1")
            )
    tiers = {"base": [], "novel": [], "overall": []}
    for qid, rows in per_query.items():
        rows.sort()
        hits, total, n_rel = 0, 0.0, sum(1 for _, rel in rows if rel)
        if n_rel == 0:
            continue
        for rank, rel in rows:
            if rel:
                hits += 1
                total += hits / rank
        ap = total / n_rel
        video_id = qid.split(":")[0].split("+")[0]
        tiers[tier_of[class_of[video_id]]].append(ap)
        tiers["overall"].append(ap)
    return {
        tier: (100.0 * sum(values) / len(values) if values else None)
        for tier, values in tiers.items()
    }
