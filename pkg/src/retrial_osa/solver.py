"""Stationary distribution of the retrial CTMC, computed two independent ways."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .generator import QbdBlocks, RateMatrix

DIRECT_MAX_STATES = 10_000


class ReducibleChainError(RuntimeError):
    def __init__(self, a: int, b: int):
        self.states = (a, b)
        super().__init__(f"chain has several recurrent classes: states {a} and {b} "
                         "are mutually unreachable")


class SingularLevelError(RuntimeError):
    def __init__(self, level: int):
        self.level = level
        super().__init__(f"matrix A_{level} + R_{level + 1} C_{level + 1} is numerically singular")


class CapacityError(RuntimeError):
    pass


class Method(str, enum.Enum):
    DIRECT = "direct"
    LDQBD = "ldqbd"


@dataclass(frozen=True)
class StationaryDistribution:
    probabilities: np.ndarray
    residual: float
    method: Method

    def __len__(self):
        return len(self.probabilities)

    def __getitem__(self, m0):
        return self.probabilities[m0]


def balance_residual(pi: np.ndarray, Q: RateMatrix) -> float:
    """max |(pi Q)_m|."""
    r = Q.diagonal * pi
    np.add.at(r, Q.cols, pi[Q.rows] * Q.rates)
    return float(np.max(np.abs(r)))


def gth(Q: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman elimination on an irreducible generator.

    Only off-diagonal entries are read; the diagonal is never used, so no
    differences of like-signed numbers appear.
    """
    P = np.array(Q, dtype=float)
    n = P.shape[0]
    np.fill_diagonal(P, 0.0)
    for m in range(n - 1, 0, -1):
        s = P[m, :m].sum()
        if s <= 0.0:
            raise ZeroDivisionError(f"state {m + 1} has no path to lower-numbered states")
        P[:m, m] /= s
        P[:m, :m] += np.outer(P[:m, m], P[m, :m])
    pi = np.zeros(n)
    pi[0] = 1.0
    for m in range(1, n):
        pi[m] = pi[:m] @ P[:m, m]
    return pi / pi.sum()


def _closed_class(Q: RateMatrix) -> np.ndarray:
    """Indices of the unique closed communicating class."""
    pos = Q.rates > 0
    adj = sp.csr_matrix((np.ones(int(pos.sum())), (Q.rows[pos], Q.cols[pos])), shape=(Q.dim, Q.dim))
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    if ncomp == 1:
        return np.arange(Q.dim)
    leaves = np.ones(ncomp, dtype=bool)
    leaves[np.unique(labels[Q.rows[pos]][labels[Q.rows[pos]] != labels[Q.cols[pos]]])] = False
    closed = np.flatnonzero(leaves)
    if len(closed) > 1:
        a = int(np.flatnonzero(labels == closed[0])[0]) + 1
        b = int(np.flatnonzero(labels == closed[1])[0]) + 1
        raise ReducibleChainError(a, b)
    return np.flatnonzero(labels == closed[0])


def solve_direct(Q: RateMatrix) -> StationaryDistribution:
    """Stationary vector by GTH elimination on the dense generator.

    Transient states (when the chain is not irreducible) get probability 0;
    more than one closed class is an error.
    """
    if Q.dim > DIRECT_MAX_STATES:
        raise CapacityError(f"direct solver is limited to {DIRECT_MAX_STATES} states, got {Q.dim}")
    keep = _closed_class(Q)
    dense = Q.toarray()
    pi = np.zeros(Q.dim)
    pi[keep] = gth(dense[np.ix_(keep, keep)])
    return StationaryDistribution(pi, balance_residual(pi, Q), Method.DIRECT)


def rate_matrices(blocks: QbdBlocks) -> list[np.ndarray | None]:
    """R_1..R_M of the backward recursion (index 0 unused)."""
    M = blocks.levels - 1
    R: list[np.ndarray | None] = [None] * (M + 1)
    for i in range(M, 0, -1):
        S = blocks.A[i] if i == M else blocks.A[i] + R[i + 1] @ blocks.C[i + 1]
        try:
            if np.linalg.cond(S) > 1e14:
                raise np.linalg.LinAlgError
            # R S = -D  <=>  S^T R^T = -D^T
            R[i] = -np.linalg.solve(S.T, blocks.D[i].T).T
        except np.linalg.LinAlgError:
            raise SingularLevelError(i) from None
    return R


def _boundary_vector(G: np.ndarray) -> np.ndarray:
    n = G.shape[0]
    lhs = G.T.copy()
    lhs[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        return np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        raise SingularLevelError(0) from None


def solve_ldqbd(blocks: QbdBlocks, Q: RateMatrix | None = None) -> StationaryDistribution:
    """Matrix-geometric solution of the finite level-dependent QBD.

    Level vectors satisfy ``pi_i = pi_{i-1} R_i``; the level-0 vector spans
    the null space of ``A_0 + R_1 C_1``. The residual is computed against
    ``Q`` when given, otherwise against the reassembled blocks.
    """
    R = rate_matrices(blocks)
    pieces = [_boundary_vector(blocks.A[0] + R[1] @ blocks.C[1])]
    for i in range(1, blocks.levels):
        pieces.append(pieces[-1] @ R[i])
    pi = np.concatenate(pieces)
    pi = pi / pi.sum()
    if Q is not None:
        residual = balance_residual(pi, Q)
    else:
        residual = float(np.max(np.abs(pi @ blocks.reassemble())))
    return StationaryDistribution(pi, residual, Method.LDQBD)
