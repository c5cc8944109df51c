"""Dense (1,m)-tensors and the multilinear algebra used throughout the package.

A (1,m)-tensor has one output index followed by ``m`` input indices and is
symmetric under permutation of the inputs. Entries are stored densely as an
array of shape ``(n,) * (m + 1)`` in C order, so the output index is the
slowest-varying one.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from math import factorial
from pathlib import Path

import numpy as np

MAX_INPUT_ORDER = 3


class DimensionError(ValueError):
    """Raised when tensor or vector shapes are incompatible."""


def _entries(A) -> np.ndarray:
    return A.entries if isinstance(A, TensorOneM) else np.asarray(A, dtype=float)


def symmetrize_inputs(entries: np.ndarray) -> np.ndarray:
    """Average ``entries`` over all permutations of its input axes (axis 0 is the output)."""
    entries = np.asarray(entries, dtype=float)
    m = entries.ndim - 1
    if m <= 1:
        return entries.copy()
    perms = list(itertools.permutations(range(1, m + 1)))
    out = np.zeros_like(entries)
    for p in perms:
        out += entries.transpose((0, *p))
    return out / len(perms)


def symmetry_defect(entries: np.ndarray) -> float:
    """Largest absolute difference between ``entries`` and any input-axis permutation of it."""
    entries = np.asarray(entries, dtype=float)
    m = entries.ndim - 1
    defect = 0.0
    for p in itertools.permutations(range(1, m + 1)):
        defect = max(defect, float(np.max(np.abs(entries - entries.transpose((0, *p))), initial=0.0)))
    return defect


@dataclass(frozen=True)
class TensorOneM:
    """Dense (1,m)-tensor, symmetric in its ``m`` input slots.

    Parameters
    ----------
    entries : ndarray of shape (n,) * (m + 1)
        ``entries[i, j1, ..., jm]``. Input symmetry is enforced on construction
        by averaging over input permutations unless ``symmetrize=False``.
    """

    entries: np.ndarray

    def __init__(self, entries, symmetrize: bool = True):
        arr = np.array(entries, dtype=float)
        if arr.ndim < 2:
            raise DimensionError("a (1,m)-tensor needs at least one input index")
        n = arr.shape[0]
        if any(d != n for d in arr.shape):
            raise DimensionError(f"all tensor dimensions must be equal, got {arr.shape}")
        if arr.ndim - 1 > MAX_INPUT_ORDER:
            raise DimensionError(f"input order {arr.ndim - 1} exceeds {MAX_INPUT_ORDER}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor entries must be finite")
        if symmetrize:
            arr = symmetrize_inputs(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def m(self) -> int:
        return self.entries.ndim - 1

    @property
    def flat(self) -> np.ndarray:
        """Entries as an ``n x n**m`` matrix (output index by flattened inputs)."""
        return self.entries.reshape(self.n, -1)

    @classmethod
    def zeros(cls, n: int, m: int) -> "TensorOneM":
        return cls(np.zeros((n,) * (m + 1)), symmetrize=False)

    def __sub__(self, other):
        return TensorOneM(self.entries - _entries(other), symmetrize=False)

    def __add__(self, other):
        return TensorOneM(self.entries + _entries(other), symmetrize=False)


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def _check_vector(a: np.ndarray, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (a.shape[0],):
        raise DimensionError(f"vector of length {a.shape[0]} expected, got shape {x.shape}")
    return x


def frobenius_inner(A, B) -> float:
    a, b = _entries(A), _entries(B)
    _check_same_shape(a, b)
    return float(np.dot(a.ravel(), b.ravel()))


def frobenius_norm(A) -> float:
    return float(np.linalg.norm(_entries(A).ravel()))


def rank1_outer(u, v, m: int) -> TensorOneM:
    """``u (x) v (x) ... (x) v`` with ``m`` copies of ``v``."""
    out = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    for _ in range(m):
        out = np.multiply.outer(out, v)
    return TensorOneM(out, symmetrize=False)


def contract_full(A, x) -> np.ndarray:
    """Contract every input slot of ``A`` with ``x``: ``(A x^m)_i``."""
    a = _entries(A)
    x = _check_vector(a, x)
    out = a
    for _ in range(a.ndim - 1):
        out = out @ x
    return out


def contract_all_but_one_input(A, x) -> np.ndarray:
    """Matrix ``M[i, j] = A[i; j, x, ..., x]`` (``m - 1`` copies of ``x``)."""
    a = _entries(A)
    x = _check_vector(a, x)
    out = a
    for _ in range(a.ndim - 2):
        out = out @ x
    return out


def change_basis(A, R) -> np.ndarray:
    """Apply the rows of ``R`` (shape ``k x n``) to every input slot of ``A``.

    Returns an array of shape ``(n,) + (k,) * m``; when ``k == 1`` the
    directional tensor is returned as a plain vector of length ``n``.
    """
    a = _entries(A)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape[1] != a.shape[0]:
        raise DimensionError(f"basis must have {a.shape[0]} columns, got {R.shape[1]}")
    out = a
    # contracting the last axis each time cycles the new axes to the front
    for _ in range(a.ndim - 1):
        out = np.tensordot(out, R, axes=([out.ndim - 1], [1]))
        out = np.moveaxis(out, -1, 1)
    if R.shape[0] == 1:
        return out.reshape(a.shape[0])
    return out


def symmetrized_square(A) -> np.ndarray:
    """Materialize the fully symmetrized square of ``A`` (order ``2m`` in ``n`` dims).

    ``square[j1..jm, k1..km] = A[i; j1..jm] A[i; k1..km]`` averaged over all
    ``(2m)!`` index permutations. Exponential in ``m``; intended for checks on
    small instances only.
    """
    a = _entries(A)
    m = a.ndim - 1
    sq = np.tensordot(a, a, axes=([0], [0]))
    perms = list(itertools.permutations(range(2 * m)))
    out = np.zeros_like(sq)
    for p in perms:
        out += sq.transpose(p)
    return out / factorial(2 * m)


def symmetric_contract(S: np.ndarray, x, times: int) -> np.ndarray:
    """Contract the trailing ``times`` slots of a plain array with ``x``."""
    out = np.asarray(S, dtype=float)
    x = np.asarray(x, dtype=float)
    for _ in range(times):
        out = out @ x
    return out


def write_tensor_csv(A, path) -> None:
    """Write a tensor as ``(i, j1..jm, value)`` rows with 1-based indices."""
    a = _entries(A)
    m = a.ndim - 1
    header = ["i"] + [f"j{k + 1}" for k in range(m)] + ["value"]
    with open(Path(path), "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for idx in np.ndindex(*a.shape):
            fh.write(",".join(str(k + 1) for k in idx) + f",{a[idx]:.17g}\n")


def read_tensor_csv(path) -> np.ndarray:
    """Inverse of :func:`write_tensor_csv`; returns the raw entry array."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    order = len(header) - 1
    idx = np.array([[int(r[k]) - 1 for k in range(order)] for r in body], dtype=int)
    n = int(idx.max()) + 1 if len(idx) else 0
    out = np.zeros((n,) * order)
    out[tuple(idx.T)] = [float(r[-1]) for r in body]
    return out
