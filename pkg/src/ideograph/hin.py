"""Typed heterogeneous graph of political actors and their social context.

Eight node kinds (office terms, legislators, presidents, governors, states,
institutions, justices, parties) and five relation kinds with endpoint
constraints. Edges are stored directed as declared but traversed undirected,
so actor nodes receive messages from the hub nodes their edges point at.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

__all__ = [
    "NodeKind",
    "RelationKind",
    "Hin",
    "SchemaError",
    "DuplicateNodeError",
    "DuplicateEdgeError",
    "ENDPOINT_RULES",
    "ACTOR_KINDS",
    "drop_relation_fraction",
]


class NodeKind(Enum):
    OFFICE_TERM = "office_term"
    LEGISLATOR = "legislator"
    PRESIDENT = "president"
    GOVERNOR = "governor"
    STATE = "state"
    INSTITUTION = "institution"
    JUSTICE = "justice"
    PARTY = "party"


class RelationKind(Enum):
    PARTY_AFFILIATION = "R1"
    HOME_STATE = "R2"
    HOLDS_OFFICE = "R3"
    TIME_IN_OFFICE = "R4"
    APPOINT = "R5"

    @property
    def code(self) -> str:
        return self.value


# Political actors: node kinds that carry ideology and receive stance heads.
ACTOR_KINDS = (
    NodeKind.LEGISLATOR,
    NodeKind.PRESIDENT,
    NodeKind.GOVERNOR,
    NodeKind.JUSTICE,
)

_ELECTED = (NodeKind.LEGISLATOR, NodeKind.PRESIDENT, NodeKind.GOVERNOR)
_OFFICE_HOLDERS = _ELECTED + (NodeKind.JUSTICE,)

# Allowed (src kind, dst kind) pairs for each relation. R5 covers both
# president-appoints-justice and governor-appoints-legislator.
ENDPOINT_RULES: dict[RelationKind, frozenset] = {
    RelationKind.PARTY_AFFILIATION: frozenset(
        (k, NodeKind.PARTY) for k in _ELECTED
    ),
    RelationKind.HOME_STATE: frozenset(
        (k, NodeKind.STATE) for k in _OFFICE_HOLDERS
    ),
    RelationKind.HOLDS_OFFICE: frozenset(
        (k, NodeKind.INSTITUTION) for k in _OFFICE_HOLDERS
    ),
    RelationKind.TIME_IN_OFFICE: frozenset(
        (k, NodeKind.OFFICE_TERM) for k in _OFFICE_HOLDERS
    ),
    RelationKind.APPOINT: frozenset(
        {
            (NodeKind.PRESIDENT, NodeKind.JUSTICE),
            (NodeKind.GOVERNOR, NodeKind.LEGISLATOR),
        }
    ),
}


class SchemaError(ValueError):
    """An edge violates its relation's endpoint-kind rule."""


class DuplicateNodeError(ValueError):
    """Same (kind, name) added twice; usually signals ingest double-counting."""


class DuplicateEdgeError(ValueError):
    """Same (src, dst, relation) triple added twice."""


def _rule_text(rel: RelationKind) -> str:
    pairs = sorted(
        (s.value, d.value) for s, d in ENDPOINT_RULES[rel]
    )
    return ", ".join(f"{s}->{d}" for s, d in pairs)


class Hin:
    """Heterogeneous information network with schema-checked edges.

    Nodes get dense consecutive integer ids. Edges are grouped by relation
    kind. A feature matrix (one row per node) may be attached after
    construction. The graph is meant to be immutable once built; mutation
    invalidates cached aggregation matrices.
    """

    def __init__(self):
        self.kinds: list[NodeKind] = []
        self.names: list[str] = []
        self.edges: dict[RelationKind, list[tuple[int, int]]] = {
            r: [] for r in RelationKind
        }
        self.features: np.ndarray | None = None
        self._by_key: dict[tuple[NodeKind, str], int] = {}
        self._adj: dict[RelationKind, dict[int, set[int]]] = {
            r: {} for r in RelationKind
        }
        self._edge_keys: set[tuple[int, int, RelationKind]] = set()
        self._agg_cache: dict = {}

    # -- construction ---------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.kinds)

    def add_node(self, kind: NodeKind, name: str) -> int:
        if not name:
            raise ValueError("node name must be non-empty")
        key = (kind, name)
        if key in self._by_key:
            raise DuplicateNodeError(
                f"node ({kind.value}, {name!r}) already present"
            )
        node_id = len(self.kinds)
        self.kinds.append(kind)
        self.names.append(name)
        self._by_key[key] = node_id
        self._agg_cache.clear()
        return node_id

    def add_edge(self, src: int, dst: int, rel: RelationKind) -> None:
        for node_id in (src, dst):
            if not (0 <= node_id < self.n):
                raise ValueError(f"unknown node id {node_id}")
        pair = (self.kinds[src], self.kinds[dst])
        if pair not in ENDPOINT_RULES[rel]:
            raise SchemaError(
                f"schema rule {rel.code} violated: "
                f"{pair[0].value}->{pair[1].value} is not allowed; "
                f"{rel.code} permits {_rule_text(rel)}"
            )
        key = (src, dst, rel)
        if key in self._edge_keys:
            raise DuplicateEdgeError(
                f"duplicate edge ({src}, {dst}, {rel.code})"
            )
        self.edges[rel].append((src, dst))
        self._edge_keys.add(key)
        self._adj[rel].setdefault(src, set()).add(dst)
        self._adj[rel].setdefault(dst, set()).add(src)
        self._agg_cache.clear()

    def set_features(self, features: np.ndarray) -> None:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != self.n:
            raise ValueError(
                f"feature matrix must be ({self.n}, d); got {features.shape}"
            )
        self.features = features

    @property
    def d_in(self) -> int:
        if self.features is None:
            raise ValueError("no feature matrix attached")
        return self.features.shape[1]

    # -- queries ----------------------------------------------------------

    def neighbors(self, node_id: int, rel: RelationKind) -> list[int]:
        """Nodes sharing a rel-edge with node_id in either direction, ascending."""
        if not (0 <= node_id < self.n):
            raise ValueError(f"unknown node id {node_id}")
        return sorted(self._adj[rel].get(node_id, ()))

    def positive_set(self, node_id: int) -> list[int]:
        """Union of neighborhoods over all relations, ascending."""
        if not (0 <= node_id < self.n):
            raise ValueError(f"unknown node id {node_id}")
        out: set[int] = set()
        for rel in RelationKind:
            out |= self._adj[rel].get(node_id, set())
        return sorted(out)

    def negative_set(self, node_id: int) -> list[int]:
        """All nodes that are not neighbors of node_id (excluding itself)."""
        pos = set(self.positive_set(node_id))
        pos.add(node_id)
        return [i for i in range(self.n) if i not in pos]

    def nodes_of_kind(self, kind: NodeKind) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k is kind]

    def actor_indices(self) -> np.ndarray:
        actors = set(ACTOR_KINDS)
        return np.array(
            [i for i, k in enumerate(self.kinds) if k in actors], dtype=np.int64
        )

    def edge_count(self, rel: RelationKind | None = None) -> int:
        if rel is not None:
            return len(self.edges[rel])
        return sum(len(v) for v in self.edges.values())

    def validate(self) -> list[str]:
        """Full-graph check; returns one message per violation (empty if clean)."""
        problems = []
        for rel, pairs in self.edges.items():
            for src, dst in pairs:
                if not (0 <= src < self.n and 0 <= dst < self.n):
                    problems.append(f"{rel.code}: edge ({src},{dst}) endpoint out of range")
                    continue
                if (self.kinds[src], self.kinds[dst]) not in ENDPOINT_RULES[rel]:
                    problems.append(
                        f"schema rule {rel.code} violated by edge "
                        f"({src}:{self.kinds[src].value} -> {dst}:{self.kinds[dst].value})"
                    )
        if self.features is not None and self.features.shape[0] != self.n:
            problems.append(
                f"feature rows {self.features.shape[0]} != node count {self.n}"
            )
        return problems

    # -- aggregation helpers (cached; graph treated as immutable) ----------

    def mean_adjacency(self, rel: RelationKind) -> tuple[np.ndarray, np.ndarray]:
        """Row-normalized undirected adjacency for rel plus a nonempty-row mask.

        Returns (A, m): A is (n, n) with A[i, j] = 1/deg_rel(i) for each
        rel-neighbor j, zero rows where deg_rel(i) = 0; m is (n, 1) with 1.0
        exactly on the rows that have at least one rel-neighbor.
        """
        key = ("rel", rel)
        if key not in self._agg_cache:
            n = self.n
            a = np.zeros((n, n), dtype=np.float64)
            mask = np.zeros((n, 1), dtype=np.float64)
            for i, nbrs in self._adj[rel].items():
                if not nbrs:
                    continue
                a[i, sorted(nbrs)] = 1.0 / len(nbrs)
                mask[i, 0] = 1.0
            self._agg_cache[key] = (a, mask)
        return self._agg_cache[key]

    def union_mean_adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """Like mean_adjacency but over the union of all relations."""
        key = ("union",)
        if key not in self._agg_cache:
            n = self.n
            a = np.zeros((n, n), dtype=np.float64)
            mask = np.zeros((n, 1), dtype=np.float64)
            for i in range(n):
                nbrs = self.positive_set(i)
                if not nbrs:
                    continue
                a[i, nbrs] = 1.0 / len(nbrs)
                mask[i, 0] = 1.0
            self._agg_cache[key] = (a, mask)
        return self._agg_cache[key]


def drop_relation_fraction(
    hin: Hin, rel: RelationKind, keep: float, seed: int
) -> Hin:
    """New graph retaining a seeded random fraction of one relation's edges.

    Keeps round-half-up(keep * m) edges chosen as a prefix of a single seeded
    permutation, so the kept set at a smaller `keep` is always a subset of the
    kept set at a larger `keep` under the same seed.
    """
    if not 0.0 <= keep <= 1.0:
        raise ValueError(f"keep must be in [0, 1]; got {keep}")
    out = Hin()
    out.kinds = list(hin.kinds)
    out.names = list(hin.names)
    out._by_key = dict(hin._by_key)
    if hin.features is not None:
        out.features = hin.features
    for r in RelationKind:
        if r is rel:
            m = len(hin.edges[r])
            n_keep = math.floor(keep * m + 0.5)
            perm = np.random.default_rng(seed).permutation(m)
            kept = sorted(perm[:n_keep])
            pairs = [hin.edges[r][i] for i in kept]
        else:
            pairs = list(hin.edges[r])
        for src, dst in pairs:
            out.edges[r].append((src, dst))
            out._edge_keys.add((src, dst, r))
            out._adj[r].setdefault(src, set()).add(dst)
            out._adj[r].setdefault(dst, set()).add(src)
    return out
