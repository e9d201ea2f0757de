"""Graph analytics: PageRank, betweenness centrality, word-neighbor collection.

Two PageRank implementations exist deliberately: the in-memory-library variant
iterates adjacency lists directly (cheap setup, slower per edge at scale),
the graph-engine variant runs vectorized power iteration over a CSR index
(setup cost, fast at scale).  Both converge to the same scores; results are
reported at 1e-10 resolution so either implementation yields identical output.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from ..errors import EmptyGraph
from ..values import Corpus, PropertyGraph, Relation
from . import kernels

SCORE_RESOLUTION = 10  # decimal places reported in score relations


def _score_relation(graph: PropertyGraph, scores: dict[int, float],
                    topk: int | None = None) -> Relation:
    rows = [(graph.node_key(nid), round(s, SCORE_RESOLUTION))
            for nid, s in scores.items()]
    rows.sort(key=lambda r: (-r[1], str(r[0])))
    if topk is not None:
        rows = rows[:topk]
    key_type = "String" if rows and isinstance(rows[0][0], str) else "Integer"
    if not rows:
        key_type = "String"
    return Relation({"node_key": key_type, "score": "Double"}, rows)


def pagerank(graph: PropertyGraph, damping: float = 0.85, epsilon: float = 1e-8,
             topk: int | None = None, engine_index=None) -> Relation:
    """Power iteration with uniform teleport and uniform dangling redistribution."""
    if graph.node_count == 0:
        raise EmptyGraph("pagerank requires a non-empty graph")
    node_ids = sorted(graph.nodes)
    index = {nid: i for i, nid in enumerate(node_ids)}
    if engine_index is not None:
        ranks = _pagerank_csr(engine_index, damping, epsilon)
    else:
        out_edges: list[list[int]] = [[] for _ in node_ids]
        for e in graph.edges.values():
            out_edges[index[e.src]].append(index[e.dst])
        ranks = kernels.pagerank_iterate(out_edges, damping, epsilon)
    return _score_relation(graph, {nid: ranks[index[nid]] for nid in node_ids}, topk)


def build_csr(graph: PropertyGraph):
    """(src_idx, dst_idx, out_degree, node_ids) arrays for the engine variant."""
    node_ids = sorted(graph.nodes)
    index = {nid: i for i, nid in enumerate(node_ids)}
    src = np.fromiter((index[e.src] for e in graph.edges.values()), dtype=np.int64,
                      count=graph.edge_count)
    dst = np.fromiter((index[e.dst] for e in graph.edges.values()), dtype=np.int64,
                      count=graph.edge_count)
    outdeg = np.bincount(src, minlength=len(node_ids)).astype(np.float64)
    return src, dst, outdeg, node_ids


def _pagerank_csr(csr, damping: float, epsilon: float, max_iter: int = 1000):
    src, dst, outdeg, node_ids = csr
    n = len(node_ids)
    rank = np.full(n, 1.0 / n)
    base = (1.0 - damping) / n
    dangling = outdeg == 0
    safe_deg = np.where(dangling, 1.0, outdeg)
    for _ in range(max_iter):
        contrib = rank / safe_deg
        nxt = np.zeros(n)
        np.add.at(nxt, dst, contrib[src])
        dshare = rank[dangling].sum() / n
        nxt = base + damping * (nxt + dshare)
        if np.abs(nxt - rank).sum() < epsilon:
            rank = nxt
            break
        rank = nxt
    return rank.tolist()


def betweenness(graph: PropertyGraph) -> Relation:
    """Brandes' algorithm on the undirected unweighted view; unnormalized
    unordered-pair counts."""
    if graph.node_count == 0:
        raise EmptyGraph("betweenness requires a non-empty graph")
    node_ids = sorted(graph.nodes)
    index = {nid: i for i, nid in enumerate(node_ids)}
    n = len(node_ids)
    adj: list[list[int]] = [[] for _ in range(n)]
    seen_pairs = set()
    for e in graph.edges.values():
        a, b = index[e.src], index[e.dst]
        if a == b or (min(a, b), max(a, b)) in seen_pairs:
            continue
        seen_pairs.add((min(a, b), max(a, b)))
        adj[a].append(b)
        adj[b].append(a)

    centrality = [0.0] * n
    for s in range(n):
        stack: list[int] = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = [0.0] * n
        dist = [-1] * n
        sigma[s] = 1.0
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in adj[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                centrality[w] += delta[w]
    # each unordered pair was counted from both endpoints
    scores = {nid: centrality[index[nid]] / 2.0 for nid in node_ids}
    return _score_relation(graph, scores)


def collect_word_neighbors(corpus: Corpus, max_distance: int,
                           words: list[str]) -> Relation:
    """Co-occurrence counts of the given words within a forward token window
    of ``max_distance`` (inclusive); one row per unordered pair, sorted."""
    counts = collect_word_neighbor_counts(corpus, max_distance, words)
    return neighbor_counts_to_relation(counts)


def collect_word_neighbor_counts(corpus: Corpus, max_distance: int,
                                 words) -> dict[tuple[str, str], int]:
    if max_distance < 1:
        raise ValueError("max_distance must be >= 1")
    wordset = set(words)
    vocab: dict[str, int] = {}
    names: list[str] = []
    docs: list[list[int]] = []
    for doc in corpus.docs:
        ids = []
        for tok in doc.tokens or []:
            idx = vocab.get(tok)
            if idx is None:
                idx = vocab[tok] = len(names)
                names.append(tok)
            ids.append(idx)
        docs.append(ids)
    keep = [name in wordset for name in names]
    packed = kernels.count_pairs(docs, keep, max_distance)
    out: dict[tuple[str, str], int] = {}
    for key, cnt in packed.items():
        w1, w2 = names[key >> 32], names[key & 0xFFFFFFFF]
        if w1 > w2:
            w1, w2 = w2, w1
        out[(w1, w2)] = out.get((w1, w2), 0) + cnt
    return out


def neighbor_counts_to_relation(counts: dict[tuple[str, str], int]) -> Relation:
    rows = sorted((w1, w2, c) for (w1, w2), c in counts.items())
    return Relation({"word1": "String", "word2": "String", "count": "Integer"}, rows)


def merge_neighbor_counts(parts: list[dict[tuple[str, str], int]]) -> dict:
    total: dict[tuple[str, str], int] = {}
    for part in parts:
        for key, cnt in part.items():
            total[key] = total.get(key, 0) + cnt
    return total
