"""File ingest, score bucketing, splits, and synthetic desk-scale fixtures.

File formats (all UTF-8 CSV with headers):
  nodes     id,kind,name            kind is one of the NodeKind values
  edges     src,dst,relation        relation in {R1..R5}
  features  id,f0,...,f{d-1}        one row per node, or "synthetic:<seed>"
  scores    entity_id,side,score,term   side in {liberal,conservative}
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .hin import Hin, NodeKind, RelationKind

__all__ = [
    "ExpertScore",
    "ExpertLabel",
    "SideSplit",
    "SplitAssignment",
    "SIDES",
    "N_CLASSES",
    "bucket_score",
    "label_scores",
    "split_scores",
    "load_graph",
    "load_scores",
    "synth_features",
    "synth_hin",
]

SIDES = ("liberal", "conservative")
N_CLASSES = 5

_KIND_BY_NAME = {k.value: k for k in NodeKind}
_REL_BY_CODE = {r.code: r for r in RelationKind}


@dataclass(frozen=True)
class ExpertScore:
    """Think-tank alignment score in [0, 1] for one actor on one side."""

    entity: int
    side: str
    score: float
    term: str | None = None


@dataclass(frozen=True)
class ExpertLabel:
    """Bucketed 5-class ordinal label (0 strongly oppose .. 4 strongly favor)."""

    entity: int
    side: str
    cls: int


@dataclass
class SideSplit:
    train: list[int] = field(default_factory=list)
    val: list[int] = field(default_factory=list)
    test: list[int] = field(default_factory=list)

    def part(self, name: str) -> list[int]:
        return {"train": self.train, "val": self.val, "test": self.test}[name]


@dataclass
class SplitAssignment:
    """Per-side partition of label indices into train/val/test."""

    sides: dict[str, SideSplit]

    def indices(self, side: str, part: str) -> list[int]:
        return self.sides[side].part(part)


def bucket_score(s: float) -> int:
    """Map a [0, 1] score onto 5 ordinal classes.

    Boundaries go to the higher class: [0, .1) -> 0, [.1, .25) -> 1,
    [.25, .75) -> 2, [.75, .9) -> 3, [.9, 1] -> 4.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"score must be in [0, 1]; got {s}")
    if s < 0.1:
        return 0
    if s < 0.25:
        return 1
    if s < 0.75:
        return 2
    if s < 0.9:
        return 3
    return 4


def label_scores(scores, collapse: str = "latest") -> list[ExpertLabel]:
    """Bucket scores into labels; one label per (entity, side) by default.

    collapse="latest" keeps the lexicographically greatest term (rows with no
    term sort first; later file rows win ties). collapse="all" keeps every
    scored term as its own labeled example.
    """
    if collapse not in ("latest", "all"):
        raise ValueError(f"collapse must be 'latest' or 'all'; got {collapse!r}")
    if collapse == "all":
        return [ExpertLabel(s.entity, s.side, bucket_score(s.score)) for s in scores]
    best: dict[tuple[int, str], ExpertScore] = {}
    for s in scores:
        key = (s.entity, s.side)
        prev = best.get(key)
        if prev is None or (s.term or "") >= (prev.term or ""):
            best[key] = s
    ordered = sorted(best, key=lambda key: (key[0], key[1]))
    return [
        ExpertLabel(e, side, bucket_score(best[(e, side)].score))
        for e, side in ordered
    ]


def split_scores(labels, ratios=(0.7, 0.2, 0.1), seed: int = 0) -> SplitAssignment:
    """Seeded per-side shuffle, then contiguous train/val/test cuts."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1; got {sum(ratios)}")
    sides: dict[str, SideSplit] = {}
    for side_idx, side in enumerate(SIDES):
        idx = [i for i, lab in enumerate(labels) if lab.side == side]
        if len(idx) < 3:
            raise ValueError(
                f"need at least 3 labels on the {side} side; got {len(idx)}"
            )
        rng = np.random.default_rng([seed, side_idx])
        order = rng.permutation(len(idx))
        shuffled = [idx[i] for i in order]
        n = len(shuffled)
        cut1 = int(np.floor(ratios[0] * n))
        cut2 = int(np.floor((ratios[0] + ratios[1]) * n))
        sides[side] = SideSplit(
            train=shuffled[:cut1], val=shuffled[cut1:cut2], test=shuffled[cut2:]
        )
    return SplitAssignment(sides=sides)


# -- file loading -----------------------------------------------------------


def _read_csv(path, expected_header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[: len(expected_header)]] != list(
            expected_header
        ):
            raise ValueError(
                f"{path}: expected header {','.join(expected_header)}"
            )
        return list(reader), header


def load_graph(nodes_path, edges_path, features_src, d_in: int | None = None) -> Hin:
    """Build a schema-validated graph from node/edge/feature files.

    features_src is either a CSV path or the token "synthetic:<seed>", in
    which case d_in must be given and rows are generated deterministically.
    """
    hin = Hin()
    rows, _ = _read_csv(nodes_path, ("id", "kind", "name"))
    for row in rows:
        if not row:
            continue
        node_id, kind_s, name = int(row[0]), row[1].strip(), row[2]
        kind = _KIND_BY_NAME.get(kind_s)
        if kind is None:
            raise ValueError(f"{nodes_path}: unknown node kind {kind_s!r}")
        got = hin.add_node(kind, name)
        if got != node_id:
            raise ValueError(
                f"{nodes_path}: ids must be dense and ascending; row says "
                f"{node_id}, expected {got}"
            )

    rows, _ = _read_csv(edges_path, ("src", "dst", "relation"))
    for row in rows:
        if not row:
            continue
        rel = _REL_BY_CODE.get(row[2].strip())
        if rel is None:
            raise ValueError(f"{edges_path}: unknown relation {row[2]!r}")
        hin.add_edge(int(row[0]), int(row[1]), rel)

    features_src = str(features_src)
    if features_src.startswith("synthetic:"):
        seed = int(features_src.split(":", 1)[1])
        if d_in is None:
            raise ValueError("synthetic features need an explicit d_in")
        hin.set_features(synth_features(hin.n, d_in, seed))
    else:
        rows, header = _read_csv(features_src, ("id",))
        d = len(header) - 1
        if d < 1:
            raise ValueError(f"{features_src}: no feature columns")
        feats = np.zeros((hin.n, d))
        seen = set()
        for row in rows:
            if not row:
                continue
            i = int(row[0])
            if not 0 <= i < hin.n:
                raise ValueError(f"{features_src}: feature row for unknown id {i}")
            feats[i] = [float(x) for x in row[1:]]
            seen.add(i)
        if len(seen) != hin.n:
            raise ValueError(
                f"{features_src}: {len(seen)} feature rows for {hin.n} nodes"
            )
        hin.set_features(feats)
    return hin


def load_scores(path) -> list[ExpertScore]:
    rows, _ = _read_csv(path, ("entity_id", "side", "score", "term"))
    out = []
    for row in rows:
        if not row:
            continue
        side = row[1].strip()
        if side not in SIDES:
            raise ValueError(f"{path}: unknown side {side!r}")
        score = float(row[2])
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"{path}: score {score} outside [0, 1]")
        term = row[3].strip() if len(row) > 3 and row[3].strip() else None
        out.append(ExpertScore(int(row[0]), side, score, term))
    return out


# -- synthetic fixtures -------------------------------------------------------


def synth_features(n: int, d_in: int, seed: int) -> np.ndarray:
    """Standard-normal features; row i depends only on (i, seed)."""
    if n < 1 or d_in < 1:
        raise ValueError("n and d_in must be >= 1")
    out = np.empty((n, d_in))
    for i in range(n):
        out[i] = np.random.default_rng([i, seed]).standard_normal(d_in)
    return out


def synth_hin(
    n_actors: int,
    n_context: int,
    d_in: int,
    n_communities: int,
    flip_prob: float,
    seed: int,
    feature_sep: float = 1.0,
) -> tuple[Hin, list[ExpertScore]]:
    """Planted-partition fixture: actors split into communities, each wired to
    its own party and institution hub, plus shared state/term noise edges.

    Actor features are drawn from community Gaussians (unit noise around a
    community mean scaled by feature_sep). The liberal score is the community
    value, flipped to its mirror with probability flip_prob; the conservative
    score is one minus the clean liberal value.
    """
    if n_communities < 2:
        raise ValueError("need at least 2 communities")
    if not 0.0 <= flip_prob < 0.5:
        raise ValueError("flip_prob must be in [0, 0.5)")
    if n_context < 2 * n_communities + 2:
        raise ValueError(
            f"n_context must be >= {2 * n_communities + 2} to fit hubs plus noise nodes"
        )
    rng = np.random.default_rng(seed)
    hin = Hin()

    community = np.array([i % n_communities for i in range(n_actors)])
    for i in range(n_actors):
        hin.add_node(NodeKind.LEGISLATOR, f"actor-{i:04d}")

    parties = [hin.add_node(NodeKind.PARTY, f"party-{c}") for c in range(n_communities)]
    institutions = [
        hin.add_node(NodeKind.INSTITUTION, f"institution-{c}")
        for c in range(n_communities)
    ]
    n_rest = n_context - 2 * n_communities
    n_states = max(1, n_rest // 2)
    n_terms = n_rest - n_states
    states = [hin.add_node(NodeKind.STATE, f"state-{j}") for j in range(n_states)]
    terms = [
        hin.add_node(NodeKind.OFFICE_TERM, f"term-{j}") for j in range(max(1, n_terms))
    ]

    for i in range(n_actors):
        c = community[i]
        hin.add_edge(i, parties[c], RelationKind.PARTY_AFFILIATION)
        hin.add_edge(i, institutions[c], RelationKind.HOLDS_OFFICE)
        hin.add_edge(i, states[rng.integers(len(states))], RelationKind.HOME_STATE)
        hin.add_edge(i, terms[rng.integers(len(terms))], RelationKind.TIME_IN_OFFICE)

    means = rng.standard_normal((n_communities, d_in)) * feature_sep
    feats = np.empty((hin.n, d_in))
    for i in range(n_actors):
        feats[i] = means[community[i]] + rng.standard_normal(d_in)
    feats[n_actors:] = rng.standard_normal((hin.n - n_actors, d_in))
    hin.set_features(feats)

    # Community c's clean liberal value, spread across [0.05, 0.95].
    lib_value = 0.05 + 0.9 * community / (n_communities - 1)
    scores = []
    for i in range(n_actors):
        lib = float(lib_value[i])
        noisy_lib = 1.0 - lib if rng.random() < flip_prob else lib
        scores.append(ExpertScore(i, "liberal", noisy_lib))
        scores.append(ExpertScore(i, "conservative", 1.0 - lib))
    return hin, scores
