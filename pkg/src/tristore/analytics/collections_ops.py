"""Matrix and collection operators: pure total functions on valid input."""

from __future__ import annotations

import numpy as np

from ..errors import IndexOutOfRange, MissingKeyMap, UnknownKey
from ..values import Matrix


def get_value(vector, index: int) -> float:
    if index < 0 or index >= len(vector):
        raise IndexOutOfRange(f"index {index} out of range for length {len(vector)}")
    return float(vector[index])


def row_keys(m: Matrix) -> list:
    if m.row_keys is None:
        raise MissingKeyMap("matrix has no row key map")
    return list(m.row_keys)


def col_keys(m: Matrix) -> list:
    if m.col_keys is None:
        raise MissingKeyMap("matrix has no column key map")
    return list(m.col_keys)


def get_rows_by_indices(m: Matrix, indices: list[int]) -> Matrix:
    n = m.shape[0]
    for i in indices:
        if i < 0 or i >= n:
            raise IndexOutOfRange(f"row index {i} out of range")
    keys = [m.row_keys[i] for i in indices] if m.row_keys is not None else None
    return Matrix(m.values[indices, :].copy(), row_keys=keys, col_keys=m.col_keys)


def get_rows_by_keys(m: Matrix, keys: list) -> Matrix:
    if m.row_keys is None:
        raise MissingKeyMap("matrix has no row key map")
    lookup = {k: i for i, k in enumerate(m.row_keys)}
    indices = []
    for k in keys:
        if k not in lookup:
            raise UnknownKey(f"unknown row key {k!r}")
        indices.append(lookup[k])
    return get_rows_by_indices(m, indices)


def get_cols_by_indices(m: Matrix, indices: list[int]) -> Matrix:
    n = m.shape[1]
    for i in indices:
        if i < 0 or i >= n:
            raise IndexOutOfRange(f"column index {i} out of range")
    keys = [m.col_keys[i] for i in indices] if m.col_keys is not None else None
    return Matrix(m.values[:, indices].copy(), row_keys=m.row_keys, col_keys=keys)


def get_cols_by_keys(m: Matrix, keys: list) -> Matrix:
    if m.col_keys is None:
        raise MissingKeyMap("matrix has no column key map")
    lookup = {k: i for i, k in enumerate(m.col_keys)}
    indices = []
    for k in keys:
        if k not in lookup:
            raise UnknownKey(f"unknown column key {k!r}")
        indices.append(lookup[k])
    return get_cols_by_indices(m, indices)


def filter_matrix_rows(m: Matrix, predicate) -> Matrix:
    """Keep rows whose vector satisfies the predicate; row map filtered along."""
    kept = [i for i in range(m.shape[0]) if predicate(m.values[i, :])]
    return get_rows_by_indices(m, kept)


def filter_matrix_cols(m: Matrix, predicate) -> Matrix:
    kept = [i for i in range(m.shape[1]) if predicate(m.values[:, i])]
    return get_cols_by_indices(m, kept)


def sum_list(values) -> float | int:
    if all(isinstance(v, int) and not isinstance(v, bool) for v in values):
        return sum(values)
    return float(sum(float(v) for v in values))


def sum_matrix(m: Matrix) -> float:
    return float(m.values.sum())


def make_range(lo: int, hi: int, step: int) -> list[int]:
    if step == 0:
        raise ValueError("range step must be non-zero")
    return list(range(lo, hi, step))


def union_lists(lists: list[list]) -> list:
    """Concatenate then deduplicate, preserving first occurrence."""
    seen: dict = {}
    for lst in lists:
        for item in lst:
            seen.setdefault(item, None)
    return list(seen)


def string_replace(template: str, value: str) -> str:
    """Substitute the single `$` placeholder."""
    return template.replace("$", str(value), 1)


def string_join(sep: str, parts: list[str]) -> str:
    return sep.join(str(p) for p in parts)
