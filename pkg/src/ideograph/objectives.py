"""The three training objectives and their weighted combination.

1. Expert supervision: summed cross-entropy of the liberal head against
   liberal-side labels and the conservative head against conservative-side
   labels.
2. Stance consistency: for entities scored by both sides, each head is pushed
   toward the class-reversed argmax of the other head. Derived targets are
   constants; no gradient flows through the argmax.
3. Echo chamber: a contrastive term pulling graph neighbors' representations
   together (log-sigmoid of row dots, each undirected pair counted from both
   endpoints) and, weighted by a negative constant, a penalty on sampled
   non-neighbors that look similar.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import numkit as nk
from .hin import Hin

__all__ = [
    "LossWeights",
    "LossReport",
    "NonFiniteLossError",
    "expert_loss",
    "reverse_class",
    "consistency_labels",
    "consistency_loss",
    "sample_negatives",
    "echo_loss",
    "total_loss",
]


@dataclass
class LossWeights:
    """Objective weights; defaults follow the published configuration."""

    expert: float = 0.01
    consistency: float = 0.2
    echo: float = 1.0
    weight_decay: float = 1e-5
    neg_weight: float = -0.1
    negatives_per_anchor: int = 2

    def __post_init__(self):
        for name in ("expert", "consistency", "echo", "weight_decay"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} weight must be nonnegative")
        if self.negatives_per_anchor < 0:
            raise ValueError("negatives_per_anchor must be nonnegative")


@dataclass
class LossReport:
    expert: float
    consistency: float
    echo: float
    reg: float
    total: float

    def row(self) -> list[float]:
        return [self.expert, self.consistency, self.echo, self.reg, self.total]


class NonFiniteLossError(FloatingPointError):
    """A loss part went NaN/Inf; message names the offending term."""


def _class_crossentropy(probs: nk.Tensor, rows, onehot: np.ndarray) -> nk.Tensor:
    """-sum of onehot * log(probs[rows]); onehot is a constant target matrix."""
    picked = nk.gather_rows(probs, rows)
    sel = nk.hadamard(nk.tlog(picked), nk.constant(onehot))
    return nk.scale(nk.tsum(sel), -1.0)


def expert_loss(lib: nk.Tensor, con: nk.Tensor, labels) -> nk.Tensor:
    """Summed (not averaged) cross-entropy against bucketed expert labels."""
    labels = list(labels)
    if not labels:
        warnings.warn("expert_loss called with no labels; returning 0")
        return nk.scalar(0.0)
    n_classes = lib.shape[1]
    total = None
    for probs, side in ((lib, "liberal"), (con, "conservative")):
        items = [(lab.entity, lab.cls) for lab in labels if lab.side == side]
        if not items:
            continue
        rows = np.array([e for e, _ in items], dtype=np.int64)
        onehot = np.zeros((len(items), n_classes))
        onehot[np.arange(len(items)), [c for _, c in items]] = 1.0
        part = _class_crossentropy(probs, rows, onehot)
        total = part if total is None else nk.add(total, part)
    return total if total is not None else nk.scalar(0.0)


def reverse_class(k: int, n_classes: int = 5) -> int:
    """Ordinal reversal (an involution): 0 <-> n-1, 1 <-> n-2, ..."""
    return (n_classes - 1) - k


def consistency_labels(lib: nk.Tensor, con: nk.Tensor):
    """Derived one-hot targets: each side's target is the reversed argmax of
    the other side. Returned as plain constant arrays (stop-gradient)."""
    n, d = lib.shape
    lib_hat = np.zeros((n, d))
    con_hat = np.zeros((n, d))
    rev_c = (d - 1) - np.argmax(con.values, axis=1)
    rev_l = (d - 1) - np.argmax(lib.values, axis=1)
    lib_hat[np.arange(n), rev_c] = 1.0
    con_hat[np.arange(n), rev_l] = 1.0
    return lib_hat, con_hat


def consistency_loss(lib: nk.Tensor, con: nk.Tensor, entities) -> nk.Tensor:
    """Cross-entropy of each head against the other head's reversed argmax,
    over entities labeled by both sides."""
    entities = np.asarray(list(entities), dtype=np.int64)
    if entities.size == 0:
        warnings.warn("consistency_loss called with empty entity set; returning 0")
        return nk.scalar(0.0)
    d = lib.shape[1]
    k = entities.size
    lib_hat = np.zeros((k, d))
    con_hat = np.zeros((k, d))
    lib_hat[np.arange(k), (d - 1) - np.argmax(con.values[entities], axis=1)] = 1.0
    con_hat[np.arange(k), (d - 1) - np.argmax(lib.values[entities], axis=1)] = 1.0
    return nk.add(
        _class_crossentropy(lib, entities, lib_hat),
        _class_crossentropy(con, entities, con_hat),
    )


def sample_negatives(hin: Hin, anchor: int, k: int, seed: int,
                     epoch: int = 0) -> list[int]:
    """Up to k non-neighbors of anchor, uniform without replacement,
    deterministic per (anchor, epoch, seed). Empty list means skip."""
    negs = hin.negative_set(anchor)
    if not negs:
        warnings.warn(f"anchor {anchor} has no non-neighbors; skipped")
        return []
    if k >= len(negs):
        return list(negs)
    rng = np.random.default_rng([seed, epoch, anchor])
    picked = rng.choice(len(negs), size=k, replace=False)
    return [negs[i] for i in picked]


def echo_loss(x: nk.Tensor, hin: Hin, q_weight: float = -0.1, k: int = 2,
              seed: int = 0, epoch: int = 0, anchors=None) -> nk.Tensor:
    """Contrastive neighborhood loss over the given anchors (default: all).

    Positive pairs are (anchor, neighbor) for every neighbor, so with all
    nodes as anchors each undirected edge pair is counted once per endpoint.
    Negative pairs use the seeded sampler; their log-sigmoid sum is scaled by
    q_weight (negative values make the term a similarity penalty).
    """
    ids = range(hin.n) if anchors is None else anchors
    pos_i, pos_j, neg_i, neg_j = [], [], [], []
    for i in ids:
        for j in hin.positive_set(i):
            pos_i.append(i)
            pos_j.append(j)
        if k > 0:
            for j in sample_negatives(hin, i, k, seed, epoch):
                neg_i.append(i)
                neg_j.append(j)
    total = None
    if pos_i:
        dots = nk.row_pair_dot(nk.gather_rows(x, pos_i), nk.gather_rows(x, pos_j))
        pos_term = nk.scale(nk.tsum(nk.tlog(nk.sigmoid(dots))), -1.0)
        total = pos_term
    if neg_i:
        dots = nk.row_pair_dot(nk.gather_rows(x, neg_i), nk.gather_rows(x, neg_j))
        neg_term = nk.scale(nk.tsum(nk.tlog(nk.sigmoid(nk.scale(dots, -1.0)))),
                            q_weight)
        total = neg_term if total is None else nk.add(total, neg_term)
    return total if total is not None else nk.scalar(0.0)


def total_loss(expert: nk.Tensor, consistency: nk.Tensor, echo: nk.Tensor,
               weights: LossWeights, params):
    """Weighted sum of the three objectives plus L2 over every parameter
    tensor (biases included). Returns (scalar tensor, LossReport)."""
    parts = {"expert": expert, "consistency": consistency, "echo": echo}
    for name, t in parts.items():
        if not np.isfinite(t.values).all():
            raise NonFiniteLossError(f"loss term {name} is non-finite")
    reg = None
    for t in params.tensors():
        sq = nk.sqnorm(t)
        reg = sq if reg is None else nk.add(reg, sq)
    if reg is None:
        reg = nk.scalar(0.0)
    if not np.isfinite(reg.values).all():
        raise NonFiniteLossError("L2 regularizer is non-finite")
    total = nk.add(
        nk.add(nk.scale(expert, weights.expert),
               nk.scale(consistency, weights.consistency)),
        nk.add(nk.scale(echo, weights.echo),
               nk.scale(reg, weights.weight_decay)),
    )
    report = LossReport(
        expert=expert.item(),
        consistency=consistency.item(),
        echo=echo.item(),
        reg=reg.item(),
        total=total.item(),
    )
    return total, report
