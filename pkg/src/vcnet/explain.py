"""Explain an OOD verdict by diffing a graph against its nearest in-distribution graph."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import ConceptGraph
from .ingest import ValidationError, Vocabulary


@dataclass(frozen=True)
class EdgeEntry:
    concepts: tuple[str, str]
    weight: float | None = None
    neighbor_weight: float | None = None


@dataclass
class ExplainReport:
    target_id: str
    neighbor_id: str
    neighbor_index: int
    distance: float
    only_target: list[EdgeEntry] = field(default_factory=list)
    only_neighbor: list[EdgeEntry] = field(default_factory=list)
    shared: list[EdgeEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def nearest(target: np.ndarray, corpus: np.ndarray) -> tuple[int, float]:
    """Index of the closest corpus row (Euclidean); the first one wins ties."""
    d = np.sqrt(np.sum((corpus - target[None, :]) ** 2, axis=1))
    i = int(np.argmin(d))
    return i, float(d[i])


def explain_ood(
    target: ConceptGraph,
    target_embedding,
    id_graphs: list[ConceptGraph],
    id_embeddings,
    vocab: Vocabulary,
    target_id: str = "target",
    id_ids: list[str] | None = None,
) -> ExplainReport:
    x = np.asarray(target_embedding, dtype=float).ravel()
    E = np.asarray(id_embeddings, dtype=float)
    if not id_graphs or E.ndim != 2 or E.shape[0] == 0:
        raise ValidationError("explain needs a non-empty in-distribution corpus")
    if E.shape[0] != len(id_graphs):
        raise ValidationError(f"{len(id_graphs)} graphs but {E.shape[0]} embeddings")
    if E.shape[1] != x.size:
        raise ValidationError(f"target embedding width {x.size} != corpus width {E.shape[1]}")
    idx, dist = nearest(x, E)
    neighbor = id_graphs[idx]
    if neighbor.node_count != target.node_count:
        raise ValidationError("target and neighbour graphs use different vocabularies")
    ids = id_ids if id_ids is not None else [str(i) for i in range(len(id_graphs))]

    def names(u, v):
        return (vocab.concepts[u], vocab.concepts[v])

    mine, theirs = target.edge_map(), neighbor.edge_map()
    report = ExplainReport(target_id, ids[idx], idx, dist)
    for key in sorted(mine.keys() | theirs.keys()):
        if key in mine and key in theirs:
            report.shared.append(EdgeEntry(names(*key), mine[key], theirs[key]))
        elif key in mine:
            report.only_target.append(EdgeEntry(names(*key), mine[key]))
        else:
            report.only_neighbor.append(EdgeEntry(names(*key), None, theirs[key]))
    return report
