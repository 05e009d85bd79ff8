"""Visual concept networks: one vocabulary-indexed weighted graph per image."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .ingest import BoundingBox, ImageDetections, ValidationError, Vocabulary

Edge = tuple[int, int, float]


@dataclass(frozen=True)
class ConceptGraph:
    """Undirected simple graph on ``node_count`` vocabulary nodes.

    ``edges`` holds ``(u, v, weight)`` triples with ``u < v``, sorted by
    ``(u, v)``.
    """

    node_count: int
    edges: tuple[Edge, ...] = ()
    weighted: bool = True

    def __post_init__(self):
        seen = set()
        for u, v, w in self.edges:
            if not (0 <= u < v < self.node_count):
                raise ValidationError(f"bad edge ({u}, {v}) for {self.node_count} nodes")
            if (u, v) in seen:
                raise ValidationError(f"duplicate edge ({u}, {v})")
            if not math.isfinite(w) or w < (1.0 if self.weighted else 0.0):
                raise ValidationError(f"bad edge weight {w} on ({u}, {v})")
            if not self.weighted and w != 1.0:
                raise ValidationError("unweighted graph with non-unit weight")
            seen.add((u, v))

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[Edge], weighted: bool = True):
        canon = sorted((min(u, v), max(u, v), float(w)) for u, v, w in edges)
        return cls(node_count, tuple(canon), weighted)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def edge_map(self) -> dict[tuple[int, int], float]:
        return {(u, v): w for u, v, w in self.edges}

    def adjacency(self, use_weights: bool = True) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count))
        for u, v, w in self.edges:
            val = w if use_weights else 1.0
            a[u, v] = a[v, u] = val
        return a

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.int64)
        for u, v, _ in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def active_nodes(self) -> np.ndarray:
        """Indices of nodes with at least one incident edge, ascending."""
        return np.flatnonzero(self.degrees() > 0)

    def neighbors(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v, _ in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return nbrs

    def to_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "weighted": self.weighted,
            "edges": [[u, v, w] for u, v, w in self.edges],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ConceptGraph":
        try:
            edges = [(int(u), int(v), float(w)) for u, v, w in obj["edges"]]
            return cls.from_edges(int(obj["node_count"]), edges, bool(obj["weighted"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed graph record: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def centroid(b: BoundingBox) -> tuple[float, float]:
    return ((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0)


def corner(b: BoundingBox) -> tuple[float, float]:
    return (b.x_min, b.y_min)


def find_distance(p: tuple[float, float], q: tuple[float, float]) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def find_iou(a: BoundingBox, b: BoundingBox) -> float:
    """IoU on the inclusive pixel grid (each side spans ``max - min + 1`` pixels)."""
    xa = max(a.x_min, b.x_min)
    ya = max(a.y_min, b.y_min)
    xb = min(a.x_max, b.x_max)
    yb = min(a.y_max, b.y_max)
    inter = max(0.0, xb - xa + 1) * max(0.0, yb - ya + 1)
    area_a = (a.x_max - a.x_min + 1) * (a.y_max - a.y_min + 1)
    area_b = (b.x_max - b.x_min + 1) * (b.y_max - b.y_min + 1)
    return inter / (area_a + area_b - inter)


def edge_weight(
    a: BoundingBox,
    b: BoundingBox,
    weighted: bool = True,
    distance_anchor: str = "centroid",
    diagonal: float | None = None,
) -> float:
    """``1 + distance * IoU`` in weighted mode, else 1.

    ``distance_anchor="corner"`` measures between top-left corners instead of
    centroids. ``diagonal`` divides the distance (image-size normalization).
    """
    if not weighted:
        return 1.0
    if distance_anchor == "centroid":
        p, q = centroid(a), centroid(b)
    elif distance_anchor == "corner":
        p, q = corner(a), corner(b)
    else:
        raise ValidationError(f"unknown distance anchor {distance_anchor!r}")
    dist = find_distance(p, q)
    if diagonal:
        dist /= diagonal
    return 1.0 + dist * find_iou(a, b)


def create_graph(
    vocab: Vocabulary,
    d: ImageDetections,
    weighted: bool = True,
    distance_anchor: str = "centroid",
    diagonal: float | None = None,
) -> ConceptGraph:
    """Connect every pair of detected concepts; repeated node pairs keep the max weight.

    Detections of the same concept never produce an edge.
    """
    best: dict[tuple[int, int], float] = {}
    if len(d.detections) > 1:
        for da, db in itertools.combinations(d.detections, 2):
            u, v = vocab.index[da.concept], vocab.index[db.concept]
            if u == v:
                continue
            key = (u, v) if u < v else (v, u)
            w = edge_weight(da.box, db.box, weighted, distance_anchor, diagonal)
            if w > best.get(key, -1.0):
                best[key] = w
    edges = tuple((u, v, w) for (u, v), w in sorted(best.items()))
    return ConceptGraph(len(vocab), edges, weighted)


def line_graph(g: ConceptGraph) -> ConceptGraph:
    """Edges of ``g`` become nodes; two are adjacent when they share an endpoint."""
    incident: dict[int, list[int]] = {}
    for idx, (u, v, _) in enumerate(g.edges):
        incident.setdefault(u, []).append(idx)
        incident.setdefault(v, []).append(idx)
    pairs = set()
    for members in incident.values():
        for i, j in itertools.combinations(members, 2):
            pairs.add((i, j) if i < j else (j, i))
    edges = tuple((i, j, 1.0) for i, j in sorted(pairs))
    return ConceptGraph(g.edge_count, edges, weighted=False)


def unweighted(g: ConceptGraph) -> ConceptGraph:
    if not g.weighted:
        return g
    return ConceptGraph(g.node_count, tuple((u, v, 1.0) for u, v, _ in g.edges), False)
