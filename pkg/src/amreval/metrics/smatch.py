"""Smatch and S2match: triple F1 under a hill-climbed variable alignment."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..embeddings import EmbeddingStore, cosine_similarity
from ..graph import AmrGraph, to_triples
from .base import MetricId, MetricScore, f1

ConceptMatch = Callable[[str, str], float]


@dataclass(frozen=True)
class VarAlignment:
    mapping: dict[str, str]
    matched: float


def exact_concepts(a: str, b: str) -> float:
    return 1.0 if a == b else 0.0


class AlignmentProblem:
    """Match weights between the variables of a candidate and a reference graph.

    The value of an injective mapping ``m`` (candidate index -> reference
    index, -1 for unmapped) is ``sum_i node[i, m[i]]`` plus one for every
    candidate relation whose image is a reference relation. ``node`` holds
    instance matches (graded for S2match) and attribute matches, TOP
    included.
    """

    def __init__(self, candidate: AmrGraph, reference: AmrGraph, concept_match: ConceptMatch = exact_concepts):
        self.cvars = list(candidate.nodes)
        self.rvars = list(reference.nodes)
        cidx = {v: i for i, v in enumerate(self.cvars)}
        ridx = {v: j for j, v in enumerate(self.rvars)}
        nc, nr = len(self.cvars), len(self.rvars)
        self.candidate_total = len(to_triples(candidate))
        self.reference_total = len(to_triples(reference))

        node = np.zeros((nc, nr))
        rconcepts = [reference.nodes[v] for v in self.rvars]
        for i, v in enumerate(self.cvars):
            c = candidate.nodes[v]
            for j, rc in enumerate(rconcepts):
                node[i, j] = concept_match(c, rc)

        ref_attrs: dict[tuple[str, str], list[int]] = {}
        for t in to_triples(reference):
            if t.kind == "attribute":
                ref_attrs.setdefault((t.relation, t.target), []).append(ridx[t.source])
        for t in to_triples(candidate):
            if t.kind == "attribute":
                for j in ref_attrs.get((t.relation, t.target), ()):
                    node[cidx[t.source], j] += 1.0
        self.node = node

        ref_by_label: dict[str, list[tuple[int, int]]] = {}
        for s, r, t in reference.edges:
            ref_by_label.setdefault(r, []).append((ridx[s], ridx[t]))
        self.ref_rel = {(r, j1, j2) for r, pairs in ref_by_label.items() for j1, j2 in pairs}
        self.rels = [(r, cidx[s], cidx[t]) for s, r, t in candidate.edges]
        self.rels_of: list[list[int]] = [[] for _ in range(nc)]
        for k, (_, i1, i2) in enumerate(self.rels):
            self.rels_of[i1].append(k)
            if i2 != i1:
                self.rels_of[i2].append(k)

        # reference variables a candidate variable could usefully map to
        self.options: list[list[int]] = []
        for i in range(nc):
            opts = {int(j) for j in np.nonzero(node[i] > 0)[0]}
            for k in self.rels_of[i]:
                r, i1, i2 = self.rels[k]
                for j1, j2 in ref_by_label.get(r, ()):
                    if i == i1 and (i1 != i2 or j1 == j2):
                        opts.add(j1)
                    if i == i2:
                        opts.add(j2)
            self.options.append(sorted(opts))

    def rel_hit(self, k: int, mapping: list[int]) -> int:
        r, i1, i2 = self.rels[k]
        j1, j2 = mapping[i1], mapping[i2]
        return int(j1 >= 0 and j2 >= 0 and (r, j1, j2) in self.ref_rel)

    def value(self, mapping: list[int]) -> float:
        total = sum(self.node[i, j] for i, j in enumerate(mapping) if j >= 0)
        return float(total + sum(self.rel_hit(k, mapping) for k in range(len(self.rels))))

    def _delta(self, mapping: list[int], changes: dict[int, int]) -> float:
        gain = 0.0
        for i, j in changes.items():
            old = mapping[i]
            gain += (self.node[i, j] if j >= 0 else 0.0) - (self.node[i, old] if old >= 0 else 0.0)
        touched = {k for i in changes for k in self.rels_of[i]}
        if touched:
            before = sum(self.rel_hit(k, mapping) for k in touched)
            saved = {i: mapping[i] for i in changes}
            for i, j in changes.items():
                mapping[i] = j
            after = sum(self.rel_hit(k, mapping) for k in touched)
            for i, j in saved.items():
                mapping[i] = j
            gain += after - before
        return gain

    def greedy_start(self) -> list[int]:
        """Each candidate variable takes its best free reference variable, lowest index on ties."""
        mapping = [-1] * len(self.cvars)
        used: set[int] = set()
        for i in range(len(self.cvars)):
            best, best_w = -1, 0.0
            for j in self.options[i]:
                if j not in used and self.node[i, j] > best_w:
                    best, best_w = j, self.node[i, j]
            if best >= 0:
                mapping[i] = best
                used.add(best)
        return mapping

    def random_start(self, rng: random.Random) -> list[int]:
        mapping = [-1] * len(self.cvars)
        used: set[int] = set()
        order = list(range(len(self.cvars)))
        rng.shuffle(order)
        for i in order:
            free = [j for j in self.options[i] if j not in used]
            if free:
                mapping[i] = rng.choice(free)
                used.add(mapping[i])
        return mapping

    def climb(self, mapping: list[int]) -> tuple[list[int], float]:
        """Steepest ascent over reassignments, swaps and one-step displacement chains."""
        mapping = list(mapping)
        owner = {j: i for i, j in enumerate(mapping) if j >= 0}
        score = self.value(mapping)
        while True:
            best_gain, best_change = 1e-9, None
            for i, opts in enumerate(self.options):
                cur = mapping[i]
                for j in opts:
                    if j == cur:
                        continue
                    k = owner.get(j)
                    if k is None:
                        changes = [{i: j}]
                    else:
                        # the displaced variable may take the freed slot or any free option
                        changes = [{i: j, k: cur}]
                        changes += [{i: j, k: alt} for alt in self.options[k] if alt != cur and alt not in owner]
                    for change in changes:
                        gain = self._delta(mapping, change)
                        if gain > best_gain:
                            best_gain, best_change = gain, change
            if best_change is None:
                return mapping, score
            for i, j in best_change.items():
                if mapping[i] >= 0 and owner.get(mapping[i]) == i:
                    del owner[mapping[i]]
            for i, j in best_change.items():
                mapping[i] = j
                if j >= 0:
                    owner[j] = i
            score += best_gain

    def solve(self, restarts: int = 4, seed: int = 0) -> tuple[list[int], float]:
        upper = min(self.candidate_total, self.reference_total)
        rng = random.Random(seed)
        best_map, best = [-1] * len(self.cvars), 0.0
        for r in range(max(restarts, 1)):
            start = self.greedy_start() if r == 0 else self.random_start(rng)
            mapping, score = self.climb(start)
            # recompute to shed accumulated float error from incremental gains
            score = self.value(mapping)
            if score > best + 1e-12:
                best_map, best = mapping, score
            if best >= upper - 1e-12:
                break
        return best_map, best


def _score(
    metric: MetricId, candidate: AmrGraph, reference: AmrGraph, match: ConceptMatch, restarts: int, seed: int
) -> tuple[MetricScore, VarAlignment]:
    prob = AlignmentProblem(candidate, reference, match)
    mapping, matched = prob.solve(restarts, seed)
    p, r, f = f1(matched, prob.candidate_total, prob.reference_total)
    score = MetricScore(metric, min(f, 1.0), p, r, matched, prob.candidate_total, prob.reference_total)
    align = {prob.cvars[i]: prob.rvars[j] for i, j in enumerate(mapping) if j >= 0}
    return score, VarAlignment(align, matched)


def smatch(
    candidate: AmrGraph, reference: AmrGraph, restarts: int = 4, seed: int = 0
) -> tuple[MetricScore, VarAlignment]:
    return _score(MetricId.SMATCH, candidate, reference, exact_concepts, restarts, seed)


def graded_concepts(store: EmbeddingStore, tau: float = 0.5) -> ConceptMatch:
    """Concept match weight for S2match: 1 on equal strings, else cosine if >= tau."""

    def match(a: str, b: str) -> float:
        if a == b:
            return 1.0
        sim = cosine_similarity(store, a, b)
        return sim if sim >= tau else 0.0

    return match


def s2match(
    candidate: AmrGraph,
    reference: AmrGraph,
    store: EmbeddingStore,
    tau: float = 0.5,
    restarts: int = 4,
    seed: int = 0,
) -> MetricScore:
    score, _ = _score(MetricId.S2MATCH, candidate, reference, graded_concepts(store, tau), restarts, seed)
    return score
