"""Infinitesimal generator of the retrial model and its LDQBD block form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from .model import ModelParams, StateSpace, build_state_space, transitions_from


class StructureError(RuntimeError):
    """The generator does not have the expected block-tridiagonal shape."""


@dataclass(frozen=True)
class RateMatrix:
    """Generator in sorted triplet form.

    ``rows``/``cols``/``rates`` hold the off-diagonal entries (0-based, sorted
    by row then column); ``diagonal`` holds the negated total outflow rates.
    """

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    rates: np.ndarray
    diagonal: np.ndarray

    @classmethod
    def from_triplets(cls, dim, rows, cols, rates, diagonal=None) -> "RateMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        rates = np.asarray(rates, dtype=float)
        order = np.lexsort((cols, rows))
        rows, cols, rates = rows[order], cols[order], rates[order]
        if diagonal is None:
            sums = [math.fsum(rates[rows == r]) for r in range(dim)]
            diagonal = -np.asarray(sums, dtype=float)
        return cls(int(dim), rows, cols, rates, np.asarray(diagonal, dtype=float))

    @property
    def nnz(self) -> int:
        return len(self.rates) + int(np.count_nonzero(self.diagonal))

    def tocsr(self) -> sp.csr_matrix:
        diag = np.arange(self.dim)
        return sp.csr_matrix(
            (np.concatenate([self.rates, self.diagonal]),
             (np.concatenate([self.rows, diag]), np.concatenate([self.cols, diag]))),
            shape=(self.dim, self.dim),
        )

    def toarray(self) -> np.ndarray:
        Q = np.zeros((self.dim, self.dim))
        Q[self.rows, self.cols] = self.rates
        Q[np.arange(self.dim), np.arange(self.dim)] += self.diagonal
        return Q

    def row_sums(self) -> np.ndarray:
        sums = self.diagonal.copy()
        np.add.at(sums, self.rows, self.rates)
        return sums

    def dumps(self) -> str:
        """Text dump: ``dim <n>`` then ``row col rate`` lines with 1-based ordinals."""
        entries = list(zip(self.rows.tolist(), self.cols.tolist(), self.rates.tolist()))
        entries += [(r, r, d) for r, d in enumerate(self.diagonal.tolist()) if d != 0.0]
        entries.sort()
        lines = [f"dim {self.dim}"]
        lines += [f"{r + 1} {c + 1} {rate!r}" for r, c, rate in entries]
        return "\n".join(lines) + "\n"

    def dump(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.dumps())


def assemble_generator(space: StateSpace) -> RateMatrix:
    """Build Q from the transition rules, one entry per emitted transition."""
    params = space.params
    acc: dict[tuple[int, int], list[float]] = {}
    diagonal = np.empty(len(space))
    for row, s in enumerate(space.states):
        out = transitions_from(params, s)
        for t in out:
            acc.setdefault((row, space.index0(t.target)), []).append(t.rate)
        diagonal[row] = -math.fsum(t.rate for t in out)
    keys = sorted(acc)
    rows = [r for r, _ in keys]
    cols = [c for _, c in keys]
    rates = [math.fsum(acc[key]) for key in keys]
    return RateMatrix.from_triplets(len(space), rows, cols, rates, diagonal)


@dataclass
class QbdBlocks:
    """Per-level blocks: ``A[i]`` within level i, ``D[i]`` level i-1 -> i,
    ``C[i]`` level i -> i-1. ``D[0]`` and ``C[0]`` are ``None``."""

    level_sizes: tuple[int, ...]
    A: list[np.ndarray]
    D: list[np.ndarray | None]
    C: list[np.ndarray | None]
    params: ModelParams | None = field(default=None, compare=False)

    @property
    def levels(self) -> int:
        return len(self.level_sizes)

    def reassemble(self) -> np.ndarray:
        n = sum(self.level_sizes)
        Q = np.zeros((n, n))
        offsets = np.concatenate([[0], np.cumsum(self.level_sizes)])
        for i in range(self.levels):
            si = slice(offsets[i], offsets[i + 1])
            Q[si, si] = self.A[i]
            if i >= 1:
                sp_ = slice(offsets[i - 1], offsets[i])
                Q[sp_, si] = self.D[i]
                Q[si, sp_] = self.C[i]
        return Q


def extract_blocks(Q: RateMatrix, space: StateSpace) -> QbdBlocks:
    """Partition Q by PU level; raise if any entry jumps more than one level."""
    dense = Q.toarray()
    sizes = space.level_sizes
    slices = [space.level_slice(i) for i in range(len(sizes))]
    level_of = np.repeat(np.arange(len(sizes)), sizes)
    jump = np.abs(level_of[Q.rows] - level_of[Q.cols])
    if np.any(jump > 1):
        bad = int(np.argmax(jump > 1))
        raise StructureError(
            f"entry ({Q.rows[bad] + 1}, {Q.cols[bad] + 1}) lies outside the block-tridiagonal envelope"
        )
    A = [dense[s, s].copy() for s in slices]
    D: list[np.ndarray | None] = [None]
    C: list[np.ndarray | None] = [None]
    for i in range(1, len(sizes)):
        D.append(dense[slices[i - 1], slices[i]].copy())
        C.append(dense[slices[i], slices[i - 1]].copy())
    return QbdBlocks(tuple(sizes), A, D, C, space.params)


def closed_form_blocks(params: ModelParams) -> QbdBlocks:
    """Assemble the LDQBD blocks directly from the level formulas.

    Independent of :func:`transitions_from`. Departures from the literal
    formulas: the retrial term on the diagonal vanishes when all currently
    free sub-bands are busy; a preemption into a partially filled orbit
    keeps ``min(k + l, L)`` SUs; an SU arriving to a full orbit is a
    self-loop and does not appear on the diagonal.
    """
    M, N, L = params.M, params.N, params.L
    ls, lp, ms, mp, th = params.lambda_s, params.lambda_p, params.mu_s, params.mu_p, params.theta
    w = L + 1
    eye = np.eye(w)
    Z = np.eye(w, k=1)

    def x_of(i):
        return (M - i) * N + 1

    def delta(a, b):
        return 1 if a == b else 0

    A, D, C = [], [None], [None]
    for i in range(M + 1):
        X = x_of(i)
        Ai = np.zeros((X * w, X * w))
        up = np.diag(np.full(w, ls)) + np.diag(np.arange(1, w) * th, k=-1)
        for j in range(X):
            blk = slice(j * w, (j + 1) * w)
            diag = np.empty(w)
            if j < X - 1:
                for k in range(w):
                    terms = [ls]
                    if not delta(i, M):
                        terms.append(lp)
                        if not delta(j, X - 1):
                            terms.append(k * th)
                    terms += [j * ms, i * mp]
                    diag[k] = -math.fsum(terms)
                Ai[blk, blk] = np.diag(diag)
                nxt = slice((j + 1) * w, (j + 2) * w)
                Ai[blk, nxt] = up
            else:
                for k in range(w):
                    terms = [ls] if k < L else []
                    terms += [(1 - delta(i, M)) * lp, (X - 1) * ms, i * mp]
                    diag[k] = -math.fsum(terms)
                Ai[blk, blk] = np.diag(diag) + ls * Z
            if j >= 1:
                prv = slice((j - 1) * w, j * w)
                Ai[blk, prv] = j * ms * eye
        A.append(Ai)

    for i in range(1, M + 1):
        X_prev, X = x_of(i - 1), x_of(i)
        Ci = np.zeros((X * w, X_prev * w))
        Ci[:, : X * w] = i * mp * np.eye(X * w)
        C.append(Ci)

        Di = np.zeros((X_prev * w, X * w))
        top = X - 1
        for j in range(X_prev):
            for k in range(w):
                if j <= top:
                    Di[j * w + k, j * w + k] = lp
                else:
                    l = j - top
                    Di[j * w + k, top * w + min(k + l, L)] = lp
        D.append(Di)

    space = build_state_space(params)
    return QbdBlocks(space.level_sizes, A, D, C, params)


@dataclass
class ValidationReport:
    max_abs_row_sum: float
    negative_entries: list[tuple[int, int]]
    irreducible: bool
    unreachable_from_first: list[int]
    cannot_reach_first: list[int]
    row_sum_tol: float = 1e-12

    @property
    def conservative(self) -> bool:
        return self.max_abs_row_sum < self.row_sum_tol

    @property
    def ok(self) -> bool:
        return self.conservative and not self.negative_entries

    @property
    def warnings(self) -> list[str]:
        msgs = []
        if self.unreachable_from_first:
            msgs.append(f"{len(self.unreachable_from_first)} states unreachable from state 1: "
                        f"{self.unreachable_from_first}")
        if self.cannot_reach_first:
            msgs.append(f"{len(self.cannot_reach_first)} states cannot return to state 1 "
                        f"(transient): {self.cannot_reach_first}")
        return msgs


def validate_generator(Q: RateMatrix, row_sum_tol: float = 1e-12) -> ValidationReport:
    """Check conservativity, sign pattern and reachability; never raises.

    Ordinals in the report are 1-based.
    """
    sums = Q.row_sums()
    max_row = float(np.max(np.abs(sums))) if Q.dim else 0.0
    neg = [(int(r) + 1, int(c) + 1) for r, c, v in zip(Q.rows, Q.cols, Q.rates) if v < 0]
    neg += [(r + 1, r + 1) for r, d in enumerate(Q.diagonal) if d > 0]

    pos = Q.rates > 0
    adj = sp.csr_matrix((np.ones(int(pos.sum())), (Q.rows[pos], Q.cols[pos])), shape=(Q.dim, Q.dim))
    forward = set(breadth_first_order(adj, 0, directed=True, return_predecessors=False).tolist())
    backward = set(breadth_first_order(adj.T.tocsr(), 0, directed=True,
                                       return_predecessors=False).tolist())
    everyone = set(range(Q.dim))
    unreach = sorted(m + 1 for m in everyone - forward)
    noreturn = sorted(m + 1 for m in everyone - backward)
    return ValidationReport(max_row, neg, not unreach and not noreturn, unreach, noreturn, row_sum_tol)


def build_generator(params: ModelParams) -> tuple[StateSpace, RateMatrix]:
    space = build_state_space(params)
    return space, assemble_generator(space)
