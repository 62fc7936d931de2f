"""Evaluation metrics, cluster cohesion, 2-D projection, and stance scores."""

from __future__ import annotations

import csv

import numpy as np

from .hin import Hin

__all__ = [
    "metrics",
    "harmonic_combine",
    "dbi",
    "pca_project",
    "continuous_stance",
    "governor_label",
    "export_projection",
    "export_stances",
    "GOVERNOR_LABELS",
]

GOVERNOR_LABELS = (
    "very conservative",
    "lean conservative",
    "neutral",
    "lean liberal",
    "very liberal",
)


def metrics(preds, golds) -> tuple[float, float, float]:
    """(accuracy, macro-F1, micro-F1).

    Macro-F1 averages per-class F1 over the classes present in golds; a class
    with zero precision+recall contributes 0. Micro-F1 pools counts, which for
    single-label classification equals accuracy.
    """
    preds = np.asarray(list(preds), dtype=np.int64)
    golds = np.asarray(list(golds), dtype=np.int64)
    if preds.size == 0 or preds.shape != golds.shape:
        raise ValueError("preds and golds must be equal-length and non-empty")
    acc = float((preds == golds).mean())

    f1s = []
    tp_sum = fp_sum = fn_sum = 0
    for c in np.unique(golds):
        tp = int(((preds == c) & (golds == c)).sum())
        fp = int(((preds == c) & (golds != c)).sum())
        fn = int(((preds != c) & (golds == c)).sum())
        tp_sum, fp_sum, fn_sum = tp_sum + tp, fp_sum + fp, fn_sum + fn
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
    # predicted-only classes still pool into micro counts
    for c in np.setdiff1d(np.unique(preds), np.unique(golds)):
        fp_sum += int((preds == c).sum())
    maf = float(np.mean(f1s))
    micro_denom = 2 * tp_sum + fp_sum + fn_sum
    mif = 2 * tp_sum / micro_denom if micro_denom else 0.0
    return acc, maf, float(mif)


def harmonic_combine(m_lib: float, m_con: float) -> float:
    """Harmonic mean of two nonnegative metrics; 0 if either is 0."""
    if m_lib < 0 or m_con < 0:
        raise ValueError("metrics must be nonnegative")
    if m_lib == 0 or m_con == 0:
        return 0.0
    return 2.0 * m_lib * m_con / (m_lib + m_con)


def dbi(points, cluster_ids) -> float:
    """Davies-Bouldin index: mean over clusters of the worst
    (spread_i + spread_j) / centroid_distance_ij ratio. Lower is tighter."""
    points = np.asarray(points, dtype=np.float64)
    cluster_ids = np.asarray(list(cluster_ids))
    if points.ndim != 2 or points.shape[0] != cluster_ids.shape[0]:
        raise ValueError("points must be (m, k) with one cluster id per row")
    labels = np.unique(cluster_ids)
    if labels.size < 2:
        raise ValueError("DBI needs at least 2 clusters")
    centroids = []
    spreads = []
    for lab in labels:
        members = points[cluster_ids == lab]
        if members.shape[0] == 0:
            raise ValueError(f"cluster {lab} is empty")
        c = members.mean(axis=0)
        centroids.append(c)
        spreads.append(float(np.linalg.norm(members - c, axis=1).mean()))
    centroids = np.vstack(centroids)
    k = labels.size
    worst = np.zeros(k)
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            dist = float(np.linalg.norm(centroids[i] - centroids[j]))
            if dist == 0.0:
                raise ValueError(
                    f"clusters {labels[i]} and {labels[j]} have coincident centroids"
                )
            worst[i] = max(worst[i], (spreads[i] + spreads[j]) / dist)
    return float(worst.mean())


def pca_project(emb, out_dims: int = 2) -> np.ndarray:
    """Project rows onto the top principal directions of the column-centered
    data. Signs are fixed so each direction's largest-magnitude loading is
    positive, making the output deterministic."""
    emb = np.asarray(emb, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[0] < out_dims:
        raise ValueError(f"need at least {out_dims} rows")
    centered = emb - emb.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / max(1, emb.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:out_dims]
    basis = eigvecs[:, order]
    for j in range(basis.shape[1]):
        lead = np.argmax(np.abs(basis[:, j]))
        if basis[lead, j] < 0:
            basis[:, j] = -basis[:, j]
    return centered @ basis


def continuous_stance(dist) -> float:
    """Expected class index of a 5-class stance distribution, in [0, 4]."""
    dist = np.asarray(dist, dtype=np.float64).reshape(-1)
    if abs(dist.sum() - 1.0) > 1e-6:
        raise ValueError(f"distribution sums to {dist.sum()}, not 1")
    return float(np.arange(dist.size) @ dist)


def governor_label(liberal_dist) -> str:
    """Map a liberal stance distribution to its ideology label by argmax;
    ties resolve to the lower (more conservative) class."""
    dist = np.asarray(liberal_dist, dtype=np.float64).reshape(-1)
    if dist.size != len(GOVERNOR_LABELS):
        raise ValueError(f"expected {len(GOVERNOR_LABELS)} classes; got {dist.size}")
    if abs(dist.sum() - 1.0) > 1e-6:
        raise ValueError(f"distribution sums to {dist.sum()}, not 1")
    return GOVERNOR_LABELS[int(np.argmax(dist))]


# -- exports -------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def export_projection(csv_path, hin: Hin, coords, groups, svg_path=None) -> None:
    """Write `id,name,kind,px,py,group` rows and, optionally, a standalone
    SVG scatter with one color per group."""
    coords = np.asarray(coords, dtype=np.float64)
    groups = list(groups)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "name", "kind", "px", "py", "group"])
        for i in range(coords.shape[0]):
            w.writerow([i, hin.names[i], hin.kinds[i].value,
                        _fmt(coords[i, 0]), _fmt(coords[i, 1]), groups[i]])
    if svg_path is not None:
        _write_svg(svg_path, coords, groups)


def _write_svg(path, coords, groups, size=640, margin=40) -> None:
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    color = {}
    for g in sorted(set(groups)):
        color[g] = _PALETTE[len(color) % len(_PALETTE)]
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    inner = size - 2 * margin
    for (x, y), g in zip(coords, groups):
        px = margin + inner * (x - lo[0]) / span[0]
        py = size - margin - inner * (y - lo[1]) / span[1]
        lines.append(
            f'<circle cx="{px:.2f}" cy="{py:.2f}" r="4" fill="{color[g]}" '
            f'fill-opacity="0.75"><title>{g}</title></circle>'
        )
    for k, g in enumerate(sorted(color)):
        lines.append(
            f'<circle cx="{margin}" cy="{margin + 16 * k}" r="5" fill="{color[g]}"/>'
            f'<text x="{margin + 10}" y="{margin + 16 * k + 4}" '
            f'font-size="12" font-family="sans-serif">{g}</text>'
        )
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def export_stances(path, hin: Hin, lib_probs, con_probs) -> None:
    """Write `id,name,l0..l4,c0..c4,lib_cont,con_cont,label` for every node."""
    lib_probs = np.asarray(lib_probs, dtype=np.float64)
    con_probs = np.asarray(con_probs, dtype=np.float64)
    d = lib_probs.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["id", "name"]
            + [f"l{i}" for i in range(d)]
            + [f"c{i}" for i in range(d)]
            + ["lib_cont", "con_cont", "label"]
        )
        for i in range(lib_probs.shape[0]):
            w.writerow(
                [i, hin.names[i]]
                + [_fmt(v) for v in lib_probs[i]]
                + [_fmt(v) for v in con_probs[i]]
                + [_fmt(continuous_stance(lib_probs[i])),
                   _fmt(continuous_stance(con_probs[i])),
                   governor_label(lib_probs[i])]
            )
