"""Pure-Python implementations of the hot kernels.

The compiled extension (`_ckernels`) implements the same functions over the
same integer encodings with the same RNG, so either backend produces
identical results.  Keep the two in lockstep when changing anything here.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_LCG_MUL = 6364136223846793005
_LCG_INC = 1442695040888963407


class Lcg64:
    """64-bit LCG with splitmix-style output; mirrored in the compiled core."""

    def __init__(self, seed: int):
        self.state = (seed * 2685821657736338717 + 1) & MASK64
        for _ in range(3):
            self.next_u64()

    def next_u64(self) -> int:
        self.state = (self.state * _LCG_MUL + _LCG_INC) & MASK64
        x = self.state
        x ^= x >> 33
        x = (x * 0xFF51AFD7ED558CCD) & MASK64
        x ^= x >> 33
        return x

    def next_double(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def next_below(self, n: int) -> int:
        return self.next_u64() % n


def count_pairs(docs: list[list[int]], keep: list[bool], max_distance: int) -> dict[int, int]:
    """Co-occurrence counts over kept token ids within a forward window.

    Pair key packs the unordered pair as min_id * 2^32 + max_id.
    """
    counts: dict[int, int] = {}
    for tokens in docs:
        n = len(tokens)
        for i in range(n):
            ti = tokens[i]
            if not keep[ti]:
                continue
            hi = min(n, i + max_distance + 1)
            for j in range(i + 1, hi):
                tj = tokens[j]
                if not keep[tj]:
                    continue
                if ti <= tj:
                    key = (ti << 32) | tj
                else:
                    key = (tj << 32) | ti
                counts[key] = counts.get(key, 0) + 1
    return counts


def lda_gibbs(docs: list[list[int]], vocab_size: int, k: int, iterations: int,
              alpha: float, beta: float, seed: int):
    """Collapsed Gibbs sampling; returns (doc_topic, word_topic, topic_totals)."""
    rng = Lcg64(seed)
    n_docs = len(docs)
    ndk = [[0] * k for _ in range(n_docs)]
    nwk = [[0] * k for _ in range(vocab_size)]
    nk = [0] * k
    assignments = []
    for d, tokens in enumerate(docs):
        zs = []
        for w in tokens:
            z = rng.next_below(k)
            zs.append(z)
            ndk[d][z] += 1
            nwk[w][z] += 1
            nk[z] += 1
        assignments.append(zs)

    vbeta = vocab_size * beta
    probs = [0.0] * k
    for _ in range(iterations):
        for d, tokens in enumerate(docs):
            zs = assignments[d]
            row = ndk[d]
            for idx, w in enumerate(tokens):
                z = zs[idx]
                row[z] -= 1
                nwk[w][z] -= 1
                nk[z] -= 1
                total = 0.0
                wrow = nwk[w]
                for t in range(k):
                    p = (row[t] + alpha) * (wrow[t] + beta) / (nk[t] + vbeta)
                    total += p
                    probs[t] = total
                u = rng.next_double() * total
                z = 0
                while z < k - 1 and probs[z] <= u:
                    z += 1
                zs[idx] = z
                row[z] += 1
                nwk[w][z] += 1
                nk[z] += 1
    return ndk, nwk, nk


def pagerank_iterate(out_edges: list[list[int]], damping: float, epsilon: float,
                     max_iter: int = 1000) -> list[float]:
    """Power iteration over adjacency lists with uniform teleport and
    uniform redistribution of dangling mass."""
    n = len(out_edges)
    rank = [1.0 / n] * n
    base = (1.0 - damping) / n
    for _ in range(max_iter):
        nxt = [0.0] * n
        dangling = 0.0
        for u in range(n):
            targets = out_edges[u]
            if targets:
                share = rank[u] / len(targets)
                for v in targets:
                    nxt[v] += share
            else:
                dangling += rank[u]
        dshare = dangling / n
        delta = 0.0
        for v in range(n):
            val = base + damping * (nxt[v] + dshare)
            delta += abs(val - rank[v])
            rank[v] = val
        if delta < epsilon:
            break
    return rank
