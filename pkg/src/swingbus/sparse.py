"""Sparse complex matrices and LU factorization with fill-reducing ordering.

Layout is compressed-by-row with sorted column indices. Admittance matrices
are structurally symmetric (values may differ across the diagonal) and the
diagonal is always structurally present; the constructor enforces both by
inserting explicit zeros where needed.

Factorization applies a symmetric fill-reducing permutation (greedy minimum
degree on the symmetric pattern, or natural order), computes the fill pattern
symbolically once, then runs the numeric kernel. No pivoting happens beyond
the ordering; a pivot with magnitude <= 1e-12 raises SingularMatrix.
"""

from __future__ import annotations

import numpy as np

from . import _backend
from .errors import DimensionMismatch, SingularMatrix

ZERO_PIVOT_TOL = 1e-12


class SparseComplexMatrix:
    """Immutable complex CSR matrix with structurally symmetric pattern."""

    __slots__ = ("n", "indptr", "indices", "data")

    def __init__(self, n, indptr, indices, data):
        self.n = int(n)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.complex128)
        for arr in (self.indptr, self.indices, self.data):
            arr.flags.writeable = False

    @classmethod
    def from_triplets(cls, n, rows, cols, values) -> "SparseComplexMatrix":
        """Build from coordinate triplets.

        Duplicate coordinates are summed. The pattern is symmetrized and the
        diagonal completed with explicit zeros, so the class invariants hold
        by construction. Deterministic: identical triplet multisets produce
        byte-identical structure.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.complex128)
        if rows.shape != cols.shape or rows.shape != values.shape:
            raise DimensionMismatch("triplet arrays must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= n
                          or cols.min() < 0 or cols.max() >= n):
            raise DimensionMismatch(f"triplet coordinates outside [0, {n})")

        entries: dict[tuple[int, int], complex] = {}
        for r, c, v in zip(rows.tolist(), cols.tolist(), values.tolist()):
            key = (r, c)
            entries[key] = entries.get(key, 0j) + v
        # pattern symmetrization + structurally present diagonal
        for r, c in list(entries):
            entries.setdefault((c, r), 0j)
        for i in range(n):
            entries.setdefault((i, i), 0j)

        order = sorted(entries)
        indptr = np.zeros(n + 1, dtype=np.int64)
        indices = np.empty(len(order), dtype=np.int64)
        data = np.empty(len(order), dtype=np.complex128)
        for t, (r, c) in enumerate(order):
            indptr[r + 1] += 1
            indices[t] = c
            data[t] = entries[(r, c)]
        np.cumsum(indptr, out=indptr)
        return cls(n, indptr, indices, data)

    @property
    def nnz(self) -> int:
        return int(self.indices.shape[0])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.complex128)
        for i in range(self.n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out[i, self.indices[lo:hi]] = self.data[lo:hi]
        return out

    def to_triplets(self):
        """Row-major sorted (row, col, re, im) records for export."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64),
                         np.diff(self.indptr))
        return rows, self.indices.copy(), self.data.real.copy(), self.data.imag.copy()

    def diagonal(self) -> np.ndarray:
        diag = np.zeros(self.n, dtype=np.complex128)
        for i in range(self.n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            pos = np.searchsorted(self.indices[lo:hi], i)
            diag[i] = self.data[lo + pos]
        return diag

    def add_to_diagonal(self, idx, values) -> "SparseComplexMatrix":
        """Return a new matrix with values added at diagonal positions idx."""
        idx = np.asarray(idx, dtype=np.int64)
        data = self.data.copy()
        for i, v in zip(idx.tolist(), np.asarray(values, dtype=np.complex128).tolist()):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            pos = lo + np.searchsorted(self.indices[lo:hi], i)
            data[pos] += v
        return SparseComplexMatrix(self.n, self.indptr, self.indices, data)

    def matvec(self, x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.complex128)
        if x.shape != (self.n,):
            raise DimensionMismatch(f"expected vector of length {self.n}")
        out = np.empty(self.n, dtype=np.complex128)
        _backend.csr_matvec(self.indptr, self.indices, self.data, x, out)
        return out

    def same_structure(self, other: "SparseComplexMatrix") -> bool:
        return (self.n == other.n
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __eq__(self, other):
        if not isinstance(other, SparseComplexMatrix):
            return NotImplemented
        return self.same_structure(other) and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"SparseComplexMatrix(n={self.n}, nnz={self.nnz})"


def adjacency_sets(matrix: SparseComplexMatrix) -> list[set[int]]:
    """Off-diagonal structural adjacency of the (symmetric) pattern."""
    adj: list[set[int]] = [set() for _ in range(matrix.n)]
    for i in range(matrix.n):
        lo, hi = matrix.indptr[i], matrix.indptr[i + 1]
        for j in matrix.indices[lo:hi].tolist():
            if j != i:
                adj[i].add(j)
                adj[j].add(i)
    return adj


def minimum_degree_order(n: int, adj: list[set[int]]) -> np.ndarray:
    """Greedy minimum-degree elimination order, smallest node id breaking ties."""
    work = [set(a) for a in adj]
    alive = set(range(n))
    perm = np.empty(n, dtype=np.int64)
    for step in range(n):
        best = min(alive, key=lambda v: (len(work[v]), v))
        perm[step] = best
        nbrs = work[best]
        for a in nbrs:
            work[a].discard(best)
        nbr_list = sorted(nbrs)
        for ia, a in enumerate(nbr_list):
            wa = work[a]
            for b in nbr_list[ia + 1:]:
                if b not in wa:
                    wa.add(b)
                    work[b].add(a)
        alive.discard(best)
        work[best] = set()
    return perm


def _symbolic_fill(n: int, adj_perm: list[set[int]]):
    """Elimination on the permuted pattern.

    Returns per-row upper patterns (strictly above the diagonal, sorted) and
    the fill count. Fill is counted as symmetric position pairs: each new
    strictly-upper entry of U mirrors one in L, and the pair counts once.
    """
    work = [set(a) for a in adj_perm]
    upper: list[list[int]] = [[] for _ in range(n)]
    fill_pairs = 0
    for k in range(n):
        nb = sorted(j for j in work[k] if j > k)
        upper[k] = nb
        for idx, a in enumerate(nb):
            wa = work[a]
            for b in nb[idx + 1:]:
                if b not in wa:
                    wa.add(b)
                    work[b].add(a)
                    fill_pairs += 1
        for j in nb:
            work[j].discard(k)
    return upper, fill_pairs


class LuFactors:
    """Triangular factors of a permuted matrix plus ordering metadata.

    The combined factor is stored row-compressed: strict lower part holds L
    (unit diagonal implied), diagonal and upper part hold U. Rows and columns
    are in elimination order; `perm[k]` is the original index eliminated at
    step k. Factors are immutable after construction.
    """

    __slots__ = ("n", "perm", "fill_in_count", "_fp", "_fi", "_fx", "_diag")

    def __init__(self, n, perm, fill_in_count, fp, fi, fx, diag):
        self.n = n
        self.perm = perm
        self.fill_in_count = fill_in_count
        self._fp = fp
        self._fi = fi
        self._fx = fx
        self._diag = diag
        fx.flags.writeable = False

    def solve(self, rhs) -> np.ndarray:
        """Solve A x = rhs; rhs is unchanged, factors are not mutated."""
        rhs = np.asarray(rhs)
        if rhs.shape != (self.n,):
            raise DimensionMismatch(
                f"rhs has length {rhs.shape}, matrix dimension is {self.n}")
        y = np.ascontiguousarray(rhs[self.perm], dtype=np.complex128)
        _backend.lu_solve_permuted(self._fp, self._fi, self._fx, self._diag, y)
        x = np.empty(self.n, dtype=np.complex128)
        x[self.perm] = y
        return x

    def _triangle(self, lower: bool) -> SparseComplexMatrix:
        rows, cols, vals = [], [], []
        for i in range(self.n):
            lo, hi = self._fp[i], self._fp[i + 1]
            d = self._diag[i]
            if lower:
                rows.extend([i] * (d - lo))
                cols.extend(self._fi[lo:d].tolist())
                vals.extend(self._fx[lo:d].tolist())
                rows.append(i)
                cols.append(i)
                vals.append(1.0 + 0j)
            else:
                rows.extend([i] * (hi - d))
                cols.extend(self._fi[d:hi].tolist())
                vals.extend(self._fx[d:hi].tolist())
        return SparseComplexMatrix.from_triplets(self.n, rows, cols, vals)

    @property
    def lower(self) -> SparseComplexMatrix:
        """Unit lower-triangular factor, rows/cols in elimination order."""
        return self._triangle(lower=True)

    @property
    def upper(self) -> SparseComplexMatrix:
        """Upper-triangular factor, rows/cols in elimination order."""
        return self._triangle(lower=False)


class SymbolicLu:
    """Reusable ordering + fill pattern for matrices sharing one structure.

    Splitting the symbolic phase from the numeric phase lets Newton loops and
    stage refactorizations pay the setup once per topology.
    """

    def __init__(self, matrix: SparseComplexMatrix, ordering: str = "mindeg"):
        n = matrix.n
        adj = adjacency_sets(matrix)
        if ordering == "mindeg":
            perm = minimum_degree_order(n, adj)
        elif ordering == "natural":
            perm = np.arange(n, dtype=np.int64)
        else:
            raise ValueError(f"unknown ordering {ordering!r}")
        inv = np.empty(n, dtype=np.int64)
        inv[perm] = np.arange(n, dtype=np.int64)

        adj_perm: list[set[int]] = [set() for _ in range(n)]
        for i, nbrs in enumerate(adj):
            pi = inv[i]
            for j in nbrs:
                adj_perm[pi].add(int(inv[j]))
        upper, fill_pairs = _symbolic_fill(n, adj_perm)

        lower: list[list[int]] = [[] for _ in range(n)]
        for k in range(n):
            for j in upper[k]:
                lower[j].append(k)
        fp = np.zeros(n + 1, dtype=np.int64)
        fi_parts = []
        diag = np.empty(n, dtype=np.int64)
        for i in range(n):
            row = lower[i] + [i] + upper[i]
            diag[i] = fp[i] + len(lower[i])
            fp[i + 1] = fp[i] + len(row)
            fi_parts.append(np.asarray(row, dtype=np.int64))
        fi = np.concatenate(fi_parts) if fi_parts else np.empty(0, dtype=np.int64)

        # map every entry of the (original-label) matrix onto factor storage
        scatter = np.empty(matrix.nnz, dtype=np.int64)
        for i in range(n):
            lo, hi = matrix.indptr[i], matrix.indptr[i + 1]
            pi = int(inv[i])
            row = fi[fp[pi]:fp[pi + 1]]
            scatter[lo:hi] = fp[pi] + np.searchsorted(row, inv[matrix.indices[lo:hi]])

        self.n = n
        self.ordering = ordering
        self.perm = perm
        self.fill_in_count = fill_pairs
        self._fp = fp
        self._fi = fi
        self._diag = diag
        self._scatter = scatter
        self._pattern_ref = (matrix.indptr, matrix.indices)

    def factor(self, matrix: SparseComplexMatrix,
               tol: float = ZERO_PIVOT_TOL) -> LuFactors:
        """Numeric factorization of a matrix with this symbolic pattern."""
        if matrix.indices.shape != self._pattern_ref[1].shape or not np.array_equal(
                matrix.indices, self._pattern_ref[1]):
            raise DimensionMismatch("matrix pattern differs from symbolic pattern")
        fx = np.zeros(self._fi.shape[0], dtype=np.complex128)
        fx[self._scatter] = matrix.data
        bad = _backend.lu_factor(self._fp, self._fi, fx, self._diag, tol)
        if bad:
            raise SingularMatrix(int(self.perm[bad - 1]))
        return LuFactors(self.n, self.perm, self.fill_in_count,
                         self._fp, self._fi, fx, self._diag)


def order_and_factorize(matrix: SparseComplexMatrix,
                        ordering: str = "mindeg",
                        tol: float = ZERO_PIVOT_TOL) -> LuFactors:
    return SymbolicLu(matrix, ordering=ordering).factor(matrix, tol=tol)
