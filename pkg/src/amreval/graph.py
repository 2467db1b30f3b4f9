"""AMR graph model: triples, k-gram bags, and the edge-to-node (Levi) transform."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

Edge = tuple[str, str, str]
Attribute = tuple[str, str, str]

# label carried by the unlabeled edges produced by edge_to_node_transform
EDGE_SENTINEL = "e2n"
TOP = "TOP"


class GraphError(ValueError):
    """A graph violates one of the structural invariants."""


@dataclass(frozen=True, eq=True)
class AmrGraph:
    """A rooted, directed, labeled AMR graph.

    ``nodes`` maps variables to concepts, ``edges`` holds
    ``(source, role, target)`` between variables and ``attributes`` holds
    ``(source, role, constant)``. Roles are stored without the leading
    colon and always in forward direction.
    """

    root: str
    nodes: dict[str, str]
    edges: tuple[Edge, ...] = ()
    attributes: tuple[Attribute, ...] = ()
    edge_weights: dict[Edge, float] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict, compare=False)

    __hash__ = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        # duplicate edges/attributes collapse: triple sets are sets
        object.__setattr__(self, "edges", tuple(dict.fromkeys(tuple(e) for e in self.edges)))
        object.__setattr__(self, "attributes", tuple(dict.fromkeys(tuple(a) for a in self.attributes)))
        self._validate()

    def _validate(self) -> None:
        if self.root not in self.nodes:
            raise GraphError(f"root {self.root!r} is not a node")
        for var, concept in self.nodes.items():
            if not var:
                raise GraphError("empty variable id")
            if not concept:
                raise GraphError(f"empty concept for variable {var!r}")
        for src, role, tgt in self.edges:
            if src not in self.nodes or tgt not in self.nodes:
                raise GraphError(f"edge ({src}, {role}, {tgt}) has an unknown endpoint")
        for src, role, _ in self.attributes:
            if src not in self.nodes:
                raise GraphError(f"attribute {role!r} hangs off unknown variable {src!r}")
        for edge, weight in self.edge_weights.items():
            if weight < 0:
                raise GraphError(f"negative weight on edge {edge}")
        reached = self._reachable()
        if len(reached) != len(self.nodes):
            missing = sorted(set(self.nodes) - reached)
            raise GraphError(f"graph is disconnected; unreachable from root: {missing}")

    def _reachable(self) -> set[str]:
        adjacency: dict[str, list[str]] = {v: [] for v in self.nodes}
        for src, _, tgt in self.edges:
            adjacency[src].append(tgt)
            adjacency[tgt].append(src)
        seen = {self.root}
        queue = deque([self.root])
        while queue:
            for nxt in adjacency[queue.popleft()]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return seen

    def weight(self, edge: Edge) -> float:
        return self.edge_weights.get(edge, 1.0)

    @property
    def variables(self) -> list[str]:
        return list(self.nodes)

    def rename(self, mapping: dict[str, str]) -> AmrGraph:
        """Return a copy with variables renamed through a bijective ``mapping``."""
        get = lambda v: mapping.get(v, v)  # noqa: E731
        if len({get(v) for v in self.nodes}) != len(self.nodes):
            raise GraphError("renaming is not injective")
        return AmrGraph(
            root=get(self.root),
            nodes={get(v): c for v, c in self.nodes.items()},
            edges=tuple((get(s), r, get(t)) for s, r, t in self.edges),
            attributes=tuple((get(s), r, c) for s, r, c in self.attributes),
            edge_weights={(get(s), r, get(t)): w for (s, r, t), w in self.edge_weights.items()},
            metadata=dict(self.metadata),
        )


class Triple(NamedTuple):
    """Smatch-style triple.

    ``kind`` is one of ``instance``, ``attribute`` or ``relation``. For
    instance triples ``relation`` is ``"instance"`` and ``target`` is the
    concept; for attributes the target is the constant.
    """

    kind: str
    relation: str
    source: str
    target: str


def to_triples(g: AmrGraph) -> set[Triple]:
    """All triples of ``g``, including the synthetic TOP attribute.

    The TOP triple ``(TOP, root, root-concept)`` is part of every set, so
    ``len(to_triples(g)) == nodes + edges + attributes + 1``.
    """
    triples = {Triple("instance", "instance", v, c) for v, c in g.nodes.items()}
    triples.update(Triple("relation", r, s, t) for s, r, t in g.edges)
    triples.update(Triple("attribute", r, s, c) for s, r, c in g.attributes)
    triples.add(Triple("attribute", TOP, g.root, g.nodes[g.root]))
    return triples


def content_triples(g: AmrGraph) -> set[Triple]:
    """Triples without TOP (the count a reader would make by hand)."""
    return {t for t in to_triples(g) if t.relation != TOP}


@dataclass(frozen=True)
class LabeledDigraph:
    """Graph view in which attribute constants are ordinary leaf nodes."""

    labels: dict[str, str]
    arcs: tuple[tuple[str, str, str, float], ...]

    def out_arcs(self) -> dict[str, list[tuple[str, str]]]:
        out: dict[str, list[tuple[str, str]]] = {k: [] for k in self.labels}
        for src, role, tgt, _ in self.arcs:
            out[src].append((role, tgt))
        return out


def attribute_key(index: int, attribute: Attribute) -> str:
    src, role, _ = attribute
    # ':' never occurs in a Penman variable, so these keys cannot collide
    return f"{src}:{role}:{index}"


def labeled_digraph(g: AmrGraph) -> LabeledDigraph:
    labels = dict(g.nodes)
    arcs = [(s, r, t, g.weight((s, r, t))) for s, r, t in g.edges]
    for i, attr in enumerate(g.attributes):
        key = attribute_key(i, attr)
        labels[key] = attr[2]
        arcs.append((attr[0], attr[1], key, 1.0))
    return LabeledDigraph(labels, tuple(arcs))


def edge_to_node_transform(g: AmrGraph) -> AmrGraph:
    """Levi transform: every labeled edge becomes a node labeled by its role.

    ``(x, r, z)`` turns into a fresh node ``y / r`` with unlabeled edges
    ``x -> y -> z``. Attribute constants first become leaf nodes and are
    then treated like any other edge target. Fresh variables come from a
    counter so the output is deterministic; all edge weights are 1.
    """
    used = set(g.nodes)
    counter = 0

    def fresh(prefix: str) -> str:
        nonlocal counter
        while True:
            name = f"{prefix}{counter}"
            counter += 1
            if name not in used:
                used.add(name)
                return name

    nodes = dict(g.nodes)
    edges: list[Edge] = []
    targets: list[tuple[str, str, str]] = list(g.edges)
    for src, role, const in g.attributes:
        leaf = fresh("c")
        nodes[leaf] = const
        targets.append((src, role, leaf))
    for src, role, tgt in targets:
        mid = fresh("r")
        nodes[mid] = role
        edges.append((src, EDGE_SENTINEL, mid))
        edges.append((mid, EDGE_SENTINEL, tgt))
    return AmrGraph(root=g.root, nodes=nodes, edges=tuple(edges), metadata=dict(g.metadata))


def extract_kgrams(g: AmrGraph, k: int) -> Counter[tuple[str, ...]]:
    """Bag of k-node label paths.

    A gram alternates node and role labels, ``(n1, r1, n2, ..., nk)``. Paths
    follow outgoing arcs, start at every node and never revisit a node, so
    the bag does not depend on traversal order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    view = labeled_digraph(g)
    out = view.out_arcs()
    bag: Counter[tuple[str, ...]] = Counter()
    for start in view.labels:
        for path in _paths(start, k, out, view.labels):
            bag[path] += 1
    return bag


def _paths(
    start: str, k: int, out: dict[str, list[tuple[str, str]]], labels: dict[str, str]
) -> Iterator[tuple[str, ...]]:
    stack = [(start, (labels[start],), frozenset({start}))]
    while stack:
        node, gram, seen = stack.pop()
        if (len(gram) + 1) // 2 == k:
            yield gram
            continue
        for role, nxt in out[node]:
            if nxt not in seen:
                stack.append((nxt, gram + (role, labels[nxt]), seen | {nxt}))


def isomorphic(a: AmrGraph, b: AmrGraph) -> bool:
    """True if the triple sets agree under some variable bijection.

    Exhaustive over concept-compatible bijections; meant for tests and
    round-trip checks on small graphs.
    """
    if len(a.nodes) != len(b.nodes) or len(a.edges) != len(b.edges):
        return False
    if Counter(a.nodes.values()) != Counter(b.nodes.values()):
        return False
    target = {(t.kind, t.relation, t.source, t.target) for t in to_triples(b)}
    avars = list(a.nodes)
    by_concept: dict[str, list[str]] = {}
    for v, c in b.nodes.items():
        by_concept.setdefault(c, []).append(v)

    def extend(i: int, mapping: dict[str, str], used: set[str]) -> bool:
        if i == len(avars):
            renamed = a.rename(mapping)
            return {(t.kind, t.relation, t.source, t.target) for t in to_triples(renamed)} == target
        v = avars[i]
        for w in by_concept[a.nodes[v]]:
            if w not in used:
                mapping[v] = w
                used.add(w)
                if extend(i + 1, mapping, used):
                    return True
                used.discard(w)
                del mapping[v]
        return False

    return extend(0, {}, set())
