"""Weisfeiler-Leman kernels: discrete WLK and the Wasserstein variant WWLK."""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from ..embeddings import EmbeddingStore, expected_sq_distances, token_features
from ..graph import AmrGraph, LabeledDigraph, edge_to_node_transform, labeled_digraph
from ..transport import solve_exact
from .base import MetricId, MetricScore

WLFeatures = Counter  # (iteration, compressed label) -> count


def wl_features(g: AmrGraph | LabeledDigraph, k: int, codebook: dict[tuple, int]) -> WLFeatures:
    """Label-refinement counts for iterations ``0..k``.

    A refined label is the compressed signature ``(own label, sorted
    (role, neighbour label) pairs)`` with neighbours taken over both edge
    directions. ``codebook`` compresses signatures and must be shared by all
    graphs that will be compared.
    """
    view = g if isinstance(g, LabeledDigraph) else labeled_digraph(g)
    neigh: dict[str, list[tuple[str, str]]] = {v: [] for v in view.labels}
    for src, role, tgt, _ in view.arcs:
        neigh[src].append((role, tgt))
        neigh[tgt].append((role, src))
    labels: dict[str, object] = dict(view.labels)
    feats: WLFeatures = Counter((0, lab) for lab in labels.values())
    for it in range(1, k + 1):
        new = {}
        for v in labels:
            sig = (labels[v], tuple(sorted((r, str(labels[u])) for r, u in neigh[v])))
            new[v] = codebook.setdefault(sig, len(codebook))
        labels = new
        feats.update((it, lab) for lab in labels.values())
    return feats


def wlk(candidate: AmrGraph, reference: AmrGraph, k: int = 2) -> MetricScore:
    """Cosine similarity of the two WL feature vectors."""
    codebook: dict[tuple, int] = {}
    a = wl_features(candidate, k, codebook)
    b = wl_features(reference, k, codebook)
    dot = sum(a[key] * b[key] for key in a.keys() & b.keys())
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    sim = dot / (na * nb) if na and nb else 0.0
    return MetricScore(MetricId.WLK_K2, min(sim, 1.0))


def propagation_matrix(view: LabeledDigraph, order: list[str], unit_weights: bool = False) -> np.ndarray:
    """``h' = h/2 + mean_u(w(v, u) h(u))/2`` as a matrix; isolated nodes keep ``h``."""
    pos = {v: i for i, v in enumerate(order)}
    n = len(order)
    acc = np.zeros((n, n))
    deg = np.zeros(n)
    for src, _, tgt, w in view.arcs:
        w = 1.0 if unit_weights else w
        i, j = pos[src], pos[tgt]
        acc[i, j] += w
        acc[j, i] += w
        deg[i] += 1
        deg[j] += 1
    prop = np.eye(n)
    has = deg > 0
    prop[has] = 0.5 * np.eye(n)[has] + 0.5 * acc[has] / deg[has, None]
    return prop


def wwl_embedding(
    view: LabeledDigraph, store: EmbeddingStore, k: int, oov_index: dict[str, int], unit_weights: bool = False
) -> tuple[np.ndarray, list[int], np.ndarray]:
    """Contextualised node features before OOV expansion.

    Returns the stacked known-vector part of shape (n, k+1, d), the OOV
    type id per node, and the per-iteration propagation powers (k+1, n, n)
    needed to carry the OOV indicators through the same linear map.
    """
    order = list(view.labels)
    mean0, ids = token_features(store, [view.labels[v] for v in order], oov_index)
    prop = propagation_matrix(view, order, unit_weights)
    n = len(order)
    powers = np.empty((k + 1, n, n))
    powers[0] = np.eye(n)
    for it in range(1, k + 1):
        powers[it] = prop @ powers[it - 1]
    means = np.einsum("bij,jd->ibd", powers, mean0)
    return means, ids, powers


def _oov_coefficients(ids: list[int], powers: np.ndarray, types: int) -> np.ndarray:
    n = len(ids)
    indicator = np.zeros((n, max(types, 1)))
    for i, t in enumerate(ids):
        if t >= 0:
            indicator[i, t] = 1.0
    # coef[node, block, type]
    return np.einsum("bij,jt->ibt", powers, indicator)


def wwl_cost_matrix(
    a: LabeledDigraph, b: LabeledDigraph, store: EmbeddingStore, k: int, unit_weights: bool = False
) -> np.ndarray:
    """Expected Euclidean distances between the contextualised nodes of two graphs.

    Each OOV token type is one random vector shared by both graphs, so the
    expectation is taken jointly; no randomness is drawn.
    """
    oov_index: dict[str, int] = {}
    ma, ids_a, pa = wwl_embedding(a, store, k, oov_index, unit_weights)
    mb, ids_b, pb = wwl_embedding(b, store, k, oov_index, unit_weights)
    types = len(oov_index)
    ca = _oov_coefficients(ids_a, pa, types)
    cb = _oov_coefficients(ids_b, pb, types)
    sq = expected_sq_distances(
        ma.reshape(len(ids_a), -1), ca, mb.reshape(len(ids_b), -1), cb, store.dimension * store.sigma2
    )
    return np.sqrt(sq)


def _wwlk(
    metric: MetricId, candidate: AmrGraph, reference: AmrGraph, store: EmbeddingStore, k: int, unit_weights: bool
) -> MetricScore:
    cost = wwl_cost_matrix(labeled_digraph(candidate), labeled_digraph(reference), store, k, unit_weights)
    distance = solve_exact(cost).objective
    return MetricScore(metric, math.exp(-distance), distance=distance)


def wwlk(candidate: AmrGraph, reference: AmrGraph, store: EmbeddingStore, k: int = 2) -> MetricScore:
    """``exp(-W)`` where W is the Wasserstein distance between the node clouds."""
    return _wwlk(MetricId.WWLK_K2, candidate, reference, store, k, unit_weights=False)


def wwlk_k3e2n(candidate: AmrGraph, reference: AmrGraph, store: EmbeddingStore) -> MetricScore:
    """WWLK on edge-to-node transformed graphs with k=3 and unit edge weights."""
    return _wwlk(
        MetricId.WWLK_K3E2N,
        edge_to_node_transform(candidate),
        edge_to_node_transform(reference),
        store,
        3,
        unit_weights=True,
    )
