"""Kernel backend selection: compiled extension when available, else pure Python.

Set ``TRISTORE_PURE=1`` to force the pure-Python backend (used by the
benchmark and by tests that pin a backend).
"""

from __future__ import annotations

import os

from . import kernels_py

_FORCED_PURE = os.environ.get("TRISTORE_PURE", "") not in ("", "0")

if not _FORCED_PURE:
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        _ckernels = None
else:
    _ckernels = None

BACKEND = "compiled" if _ckernels is not None else "pure"


def backend_name() -> str:
    return BACKEND


def count_pairs(docs, keep, max_distance):
    if _ckernels is not None:
        return _ckernels.count_pairs(docs, keep, max_distance)
    return kernels_py.count_pairs(docs, keep, max_distance)


def lda_gibbs(docs, vocab_size, k, iterations, alpha, beta, seed):
    if _ckernels is not None:
        return _ckernels.lda_gibbs(docs, vocab_size, k, iterations, alpha, beta, seed)
    return kernels_py.lda_gibbs(docs, vocab_size, k, iterations, alpha, beta, seed)


def pagerank_iterate(out_edges, damping, epsilon, max_iter=1000):
    if _ckernels is not None:
        return _ckernels.pagerank_iterate(out_edges, damping, epsilon, max_iter)
    return kernels_py.pagerank_iterate(out_edges, damping, epsilon, max_iter)
