"""Word vectors for concept labels, with closed-form expected distances for OOV tokens.

An out-of-vocabulary token is modelled as a random vector with zero mean
and i.i.d. components of variance ``sigma2``; one vector per token type.
Distances involving such tokens are reported as ``sqrt(E ||x - y||^2)``,
which removes any dependence on a random seed.
"""

from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

ENV_VAR = "AMREVAL_EMBEDDINGS"
FALLBACK_DIMENSION = 50

_SENSE = re.compile(r"-\d+$")


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class TokenDistance:
    value: float
    kind: str  # "exact" or "expected"


def normalize_token(token: str) -> str:
    """Lowercase and drop a PropBank sense suffix: ``look-over-06`` -> ``look-over``."""
    return _SENSE.sub("", token.lower())


@dataclass(frozen=True, eq=False)
class EmbeddingStore:
    """Immutable token -> vector table.

    ``sigma2`` is the per-component variance assumed for OOV vectors; by
    default it is the empirical per-component variance of the table.
    """

    dimension: int
    table: dict[str, np.ndarray]
    sigma2: float
    name: str = field(default="custom")

    def __post_init__(self) -> None:
        if self.dimension <= 0:
            raise EmbeddingError("dimension must be positive")
        for tok, vec in self.table.items():
            if vec.shape != (self.dimension,):
                raise EmbeddingError(f"vector for {tok!r} has shape {vec.shape}, expected ({self.dimension},)")
            vec.setflags(write=False)
        if not self.sigma2 > 0:
            raise EmbeddingError("OOV variance must be positive")

    @classmethod
    def from_vectors(
        cls, vectors: dict[str, Iterable[float]], sigma2: float | None = None, name: str = "custom"
    ) -> EmbeddingStore:
        table = {tok: np.asarray(list(v), dtype=float) for tok, v in vectors.items()}
        if not table:
            raise EmbeddingError("no vectors given")
        dims = {v.shape[0] for v in table.values()}
        if len(dims) != 1:
            raise EmbeddingError(f"dimension mismatch: {sorted(dims)}")
        if sigma2 is None:
            sigma2 = _component_variance(table)
        return cls(dims.pop(), table, sigma2, name)

    def __contains__(self, token: str) -> bool:
        return self.lookup(token) is not None

    def key(self, token: str) -> str | None:
        """Vocabulary entry used for ``token``, or None if it is OOV."""
        if token in self.table:
            return token
        norm = normalize_token(token)
        if norm in self.table:
            return norm
        head = norm.split("-", 1)[0]
        if head in self.table:
            return head
        return None

    def lookup(self, token: str) -> np.ndarray | None:
        key = self.key(token)
        return None if key is None else self.table[key]

    def oov_type(self, token: str) -> str:
        """Identity of the random vector that stands in for an OOV token."""
        return normalize_token(token)


def _component_variance(table: dict[str, np.ndarray]) -> float:
    mat = np.stack(list(table.values()))
    if mat.shape[0] < 2:
        var = float(np.mean(mat**2))
    else:
        var = float(np.mean(np.var(mat, axis=0)))
    return var if var > 0 else 1.0 / mat.shape[1]


def load_embeddings(path: str | Path, limit: int | None = None) -> EmbeddingStore:
    """Read a GloVe-style text file: a token followed by its components per line."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if limit is not None and len(vectors) >= limit:
                break
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            tok, comps = parts[0], parts[1:]
            try:
                vec = np.array([float(c) for c in comps], dtype=float)
            except ValueError as exc:
                raise EmbeddingError(f"{path}:{lineno}: unparsable component ({exc})") from None
            if dim is None:
                if not comps:
                    raise EmbeddingError(f"{path}:{lineno}: token without components")
                dim = len(comps)
            elif len(comps) != dim:
                raise EmbeddingError(f"{path}:{lineno}: dimension mismatch ({len(comps)} != {dim})")
            vectors[tok] = vec
    if not vectors:
        raise EmbeddingError(f"{path}: empty embedding file")
    return EmbeddingStore(dim, vectors, _component_variance(vectors), name=str(path))


def hash_vector(token: str, dimension: int = FALLBACK_DIMENSION) -> np.ndarray:
    """Deterministic pseudo-embedding derived from a SHA-256 of the token."""
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:16], "little")))
    return rng.standard_normal(dimension) / np.sqrt(dimension)


def hashed_store(vocabulary: Iterable[str], dimension: int = FALLBACK_DIMENSION) -> EmbeddingStore:
    table = {}
    for tok in vocabulary:
        tok = tok.strip().lower()
        if tok and tok not in table:
            table[tok] = hash_vector(tok, dimension)
    return EmbeddingStore.from_vectors(table, name=f"hashed-{dimension}")


@lru_cache(maxsize=1)
def fallback_store() -> EmbeddingStore:
    """Hash-based store over the shipped word list; used when no file is given."""
    words = resources.files("amreval").joinpath("data/fallback_vocab.txt").read_text(encoding="utf-8")
    return hashed_store(w for w in words.split() if not w.startswith("#"))


def resolve_store(path: str | Path | None = None) -> EmbeddingStore:
    """Explicit path, then the environment override, then the hashed fallback."""
    path = path or os.environ.get(ENV_VAR)
    if path:
        return load_embeddings(path)
    return fallback_store()


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def cosine_similarity(store: EmbeddingStore, a: str, b: str) -> float:
    """Cosine of the two token vectors.

    Identical strings give 1.0. If either token is OOV the similarity is 0.0
    unless both map to the same OOV type.
    """
    if a == b:
        return 1.0
    u, v = store.lookup(a), store.lookup(b)
    if u is None or v is None:
        return 1.0 if u is None and v is None and store.oov_type(a) == store.oov_type(b) else 0.0
    return cosine(u, v)


def expected_euclidean_distance(store: EmbeddingStore, a: str, b: str) -> TokenDistance:
    u, v = store.lookup(a), store.lookup(b)
    if u is not None and v is not None:
        return TokenDistance(float(np.linalg.norm(u - v)), "exact")
    d_sigma2 = store.dimension * store.sigma2
    if u is None and v is None:
        if store.oov_type(a) == store.oov_type(b):
            return TokenDistance(0.0, "expected")
        return TokenDistance(float(np.sqrt(2.0 * d_sigma2)), "expected")
    known = u if u is not None else v
    return TokenDistance(float(np.sqrt(known @ known + d_sigma2)), "expected")


def expected_sq_distances(
    mean_a: np.ndarray, coef_a: np.ndarray, mean_b: np.ndarray, coef_b: np.ndarray, d_sigma2: float
) -> np.ndarray:
    """Pairwise ``E ||a_i - b_j||^2`` for points of the form ``mean + sum_t coef[t] X_t``.

    ``mean_*`` has shape (n, width); ``coef_*`` has shape (n, blocks, types)
    and says how many copies of the OOV vector ``X_t`` sit in each block of
    ``width / blocks`` components. The ``X_t`` are independent with
    ``E ||X_t||^2 = d_sigma2``.
    """
    diff = mean_a[:, None, :] - mean_b[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if coef_a.size and coef_b.size:
        cdiff = coef_a[:, None] - coef_b[None, :]
        sq = sq + d_sigma2 * np.einsum("ijbt,ijbt->ij", cdiff, cdiff)
    return np.maximum(sq, 0.0)


def token_features(
    store: EmbeddingStore, tokens: list[str], oov_index: dict[str, int]
) -> tuple[np.ndarray, list[int]]:
    """Mean vectors and OOV type ids (-1 for known tokens) for ``tokens``.

    ``oov_index`` is shared between the graphs being compared so that the
    same OOV token is the same random vector on both sides; it is extended
    in place.
    """
    mean = np.zeros((len(tokens), store.dimension))
    ids = []
    for i, tok in enumerate(tokens):
        vec = store.lookup(tok)
        if vec is None:
            ids.append(oov_index.setdefault(store.oov_type(tok), len(oov_index)))
        else:
            mean[i] = vec
            ids.append(-1)
    return mean, ids
