"""SU dropping probability, throughput and auxiliary measures."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .model import ModelParams, StateSpace, build_state_space


class UndefinedMetricError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    p_drop_paper: float
    p_drop_exact: float
    throughput_paper: float
    throughput_exact: float
    mean_orbit: float
    su_utilization: float
    pu_blocking: float

    def as_dict(self) -> dict:
        return asdict(self)


def _probabilities(pi) -> np.ndarray:
    return np.asarray(getattr(pi, "probabilities", pi), dtype=float)


def _cube(pi, params: ModelParams) -> np.ndarray:
    """pi reshaped to an (M+1, MN+1, L+1) array, zero outside the state space."""
    p = _probabilities(pi)
    space = build_state_space(params)
    if len(p) != len(space):
        raise ValueError(f"distribution has {len(p)} entries, state space has {len(space)}")
    cube = np.zeros((params.M + 1, params.capacity + 1, params.L + 1))
    w = params.L + 1
    for i in range(params.M + 1):
        block = p[space.level_slice(i)]
        cube[i, : params.free_subbands(i) + 1, :] = block.reshape(-1, w)
    return cube


def _check_arrivals(params: ModelParams):
    if not params.lambda_s > 0:
        raise UndefinedMetricError("dropping probability is undefined when lambda_s = 0")


def dropping_probability_paper(pi, params: ModelParams) -> float:
    """Dropping probability by the published closed form.

    The preemption term adds, for every level, the full-orbit states with
    1..N SUs below the level's sub-band capacity; states with negative SU
    counts contribute zero.
    """
    _check_arrivals(params)
    cube = _cube(pi, params)
    M, N, L = params.M, params.N, params.L
    blocked = math.fsum(cube[i, (M - i) * N, L] for i in range(M + 1))
    preempt = math.fsum(
        cube[i, (M - i) * N - l, L]
        for i in range(M + 1)
        for l in range(1, N + 1)
        if (M - i) * N - l >= 0
    )
    return blocked + params.lambda_p / params.lambda_s * preempt


def dropping_probability_exact(pi, params: ModelParams) -> float:
    """Long-run lost SUs per arriving SU, from the drop rates.

    Blocked arrivals are lost at rate lambda_s in full states; a PU arrival
    evicting ``l`` SUs while ``k`` wait in the orbit loses ``max(0, k+l-L)``.
    """
    _check_arrivals(params)
    cube = _cube(pi, params)
    M, N, L = params.M, params.N, params.L
    blocked = math.fsum(cube[i, (M - i) * N, L] for i in range(M + 1))
    lost = []
    for i in range(M):
        free_after = (M - i - 1) * N
        for j in range(free_after + 1, (M - i) * N + 1):
            evicted = j - free_after
            for k in range(max(0, L - evicted + 1), L + 1):
                lost.append((k + evicted - L) * cube[i, j, k])
    return blocked + params.lambda_p / params.lambda_s * math.fsum(lost)


def throughput(p_drop: float, params: ModelParams) -> float:
    """Served SUs per unit time, ``lambda_s * (1 - p_drop)``."""
    return params.lambda_s * (1.0 - p_drop)


def erlang_loss_distribution(servers: int, load: float) -> np.ndarray:
    """Occupancy distribution of an M/M/c/c loss system."""
    terms = [1.0]
    for n in range(1, servers + 1):
        terms.append(terms[-1] * load / n)
    terms = np.array(terms)
    return terms / terms.sum()


def erlang_b(servers: int, load: float) -> float:
    """Blocking probability via the standard stable recursion."""
    b = 1.0
    for n in range(1, servers + 1):
        b = load * b / (n + load * b)
    return b


def level_marginal(pi, space: StateSpace) -> np.ndarray:
    p = _probabilities(pi)
    return np.array([p[space.level_slice(i)].sum() for i in range(space.params.M + 1)])


def auxiliary_metrics(pi, params: ModelParams) -> dict:
    cube = _cube(pi, params)
    k = np.arange(params.L + 1)
    j = np.arange(params.capacity + 1)
    return {
        "mean_orbit": float((cube.sum(axis=(0, 1)) * k).sum()),
        "su_utilization": float((cube.sum(axis=(0, 2)) * j).sum() / params.capacity),
        "pu_blocking": float(cube[params.M].sum()),
    }


def compute_metrics(pi, params: ModelParams) -> MetricsReport:
    paper = dropping_probability_paper(pi, params)
    exact = dropping_probability_exact(pi, params)
    return MetricsReport(
        p_drop_paper=paper,
        p_drop_exact=exact,
        throughput_paper=throughput(paper, params),
        throughput_exact=throughput(exact, params),
        **auxiliary_metrics(pi, params),
    )
