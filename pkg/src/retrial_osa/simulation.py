"""Discrete-event simulation of the overlay retrial dynamics.

Each replication runs the competing exponential clocks of the system (SU and
PU arrivals, per-customer service, per-orbit-customer retrial) with its own
random stream derived from ``(seed, rep_index)``. The state logic here is
written independently of :mod:`retrial_osa.model` so it can serve as an
oracle for the analytic pipeline.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .model import ModelParams

BUFFER = 1 << 15
Z95 = 1.959963984540054

# counter slots
SU_ARR, DROP_BLOCK, DROP_PREEMPT, SU_DONE, PU_ARR, PU_BLOCK, RETRY, RETRY_OK = range(8)
SU_ARR_ALL, DROP_ALL, SU_DONE_ALL = 8, 9, 10
N_COUNTERS = 11


@numba.njit(cache=True, nogil=True)
def _advance(M, N, L, lam_s, lam_p, mu_s, mu_p, theta, horizon, warmup,
             state, clock, expo, unif, counts, occupancy):
    """Run events until the buffers are spent or the horizon is reached.

    ``state`` is (pu_bands, su_subbands, orbit); ``clock[0]`` is the current
    time. Returns True once the horizon has been reached.
    """
    i, j, k = state[0], state[1], state[2]
    t = clock[0]
    done = False
    for n in range(expo.shape[0]):
        r_su = lam_s
        r_pu = lam_p
        r_retry = k * theta
        r_su_end = j * mu_s
        r_pu_end = i * mu_p
        total = r_su + r_pu + r_retry + r_su_end + r_pu_end
        t_next = t + expo[n] / total

        lo = max(t, warmup)
        hi = min(t_next, horizon)
        if hi > lo:
            occupancy[i, j, k] += hi - lo
        if t_next >= horizon:
            t = horizon
            done = True
            break
        t = t_next
        counted = t >= warmup
        free = (M - i) * N
        u = unif[n] * total

        if u < r_su:
            counts[SU_ARR_ALL] += 1
            if counted:
                counts[SU_ARR] += 1
            if j < free:
                j += 1
            elif k < L:
                k += 1
            else:
                counts[DROP_ALL] += 1
                if counted:
                    counts[DROP_BLOCK] += 1
            continue
        u -= r_su

        if u < r_pu:
            if counted:
                counts[PU_ARR] += 1
            if i == M:
                if counted:
                    counts[PU_BLOCK] += 1
                continue
            i += 1
            free -= N
            if j > free:
                evicted = j - free
                j = free
                room = L - k
                if evicted > room:
                    lost = evicted - room
                    k = L
                    counts[DROP_ALL] += lost
                    if counted:
                        counts[DROP_PREEMPT] += lost
                else:
                    k += evicted
            continue
        u -= r_pu

        if u < r_retry:
            if counted:
                counts[RETRY] += 1
            if j < free:
                j += 1
                k -= 1
                if counted:
                    counts[RETRY_OK] += 1
            continue
        u -= r_retry

        if r_pu_end > 0.0 and (u >= r_su_end or r_su_end == 0.0):
            i -= 1
        elif r_su_end > 0.0:
            j -= 1
            counts[SU_DONE_ALL] += 1
            if counted:
                counts[SU_DONE] += 1
        # otherwise a rounding spill past the last clock: no-op

    state[0], state[1], state[2] = i, j, k
    clock[0] = t
    return done


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    horizon: float = 1e4
    warmup: float | None = None
    replications: int = 100
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.params, ModelParams):
            raise TypeError("params must be a ModelParams instance")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be a positive finite time, got {self.horizon!r}")
        if self.warmup is None:
            object.__setattr__(self, "warmup", 0.1 * self.horizon)
        if not 0 <= self.warmup < self.horizon:
            raise ValueError(f"warmup must lie in [0, horizon), got {self.warmup!r}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ValueError(f"replications must be a positive integer, got {self.replications!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "replications", int(self.replications))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class ReplicationTally:
    rep_index: int
    observed_time: float
    su_arrivals: int
    dropped_blocked: int
    dropped_preempted: int
    su_completions: int
    pu_arrivals: int
    pu_blocked: int
    retrials: int
    retrial_successes: int
    su_arrivals_total: int
    dropped_total: int
    su_completions_total: int
    final_state: tuple[int, int, int]
    occupancy: np.ndarray

    @property
    def dropped(self) -> int:
        return self.dropped_blocked + self.dropped_preempted

    @property
    def p_drop(self) -> float:
        return self.dropped / self.su_arrivals if self.su_arrivals else 0.0

    @property
    def throughput(self) -> float:
        return self.su_completions / self.observed_time

    @property
    def mean_orbit(self) -> float:
        k = np.arange(self.occupancy.shape[2])
        return float((self.occupancy.sum(axis=(0, 1)) * k).sum() / self.observed_time)

    @property
    def pu_blocking(self) -> float:
        return self.pu_blocked / self.pu_arrivals if self.pu_arrivals else 0.0

    @property
    def in_system(self) -> int:
        return self.final_state[1] + self.final_state[2]


def replication_rng(seed: int, rep_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep_index,)))


def run_replication(config: SimConfig, rep_index: int) -> ReplicationTally:
    p = config.params
    rng = replication_rng(config.seed, rep_index)
    state = np.zeros(3, dtype=np.int64)
    clock = np.zeros(1)
    counts = np.zeros(N_COUNTERS, dtype=np.int64)
    occupancy = np.zeros((p.M + 1, p.capacity + 1, p.L + 1))
    done = False
    while not done:
        expo = rng.standard_exponential(BUFFER)
        unif = rng.random(BUFFER)
        done = _advance(p.M, p.N, p.L, p.lambda_s, p.lambda_p, p.mu_s, p.mu_p, p.theta,
                        float(config.horizon), float(config.warmup),
                        state, clock, expo, unif, counts, occupancy)
    c = counts.tolist()
    return ReplicationTally(
        rep_index=rep_index,
        observed_time=config.horizon - config.warmup,
        su_arrivals=c[SU_ARR],
        dropped_blocked=c[DROP_BLOCK],
        dropped_preempted=c[DROP_PREEMPT],
        su_completions=c[SU_DONE],
        pu_arrivals=c[PU_ARR],
        pu_blocked=c[PU_BLOCK],
        retrials=c[RETRY],
        retrial_successes=c[RETRY_OK],
        su_arrivals_total=c[SU_ARR_ALL],
        dropped_total=c[DROP_ALL],
        su_completions_total=c[SU_DONE_ALL],
        final_state=tuple(int(v) for v in state),
        occupancy=occupancy,
    )


@dataclass(frozen=True)
class SimEstimates:
    p_drop_hat: float
    p_drop_ci: float
    throughput_hat: float
    throughput_ci: float
    mean_orbit_hat: float
    mean_orbit_ci: float
    pu_blocking_hat: float
    pu_blocking_ci: float
    replications: int

    @property
    def half_widths_defined(self) -> bool:
        return self.replications > 1

    def interval(self, name: str) -> tuple[float, float]:
        mid, hw = getattr(self, f"{name}_hat"), getattr(self, f"{name}_ci")
        return mid - hw, mid + hw


def _mean_halfwidth(values) -> tuple[float, float]:
    x = np.asarray(values, dtype=float)
    if len(x) < 2:
        return float(x.mean()), float("nan")
    return float(x.mean()), float(Z95 * x.std(ddof=1) / math.sqrt(len(x)))


def aggregate(tallies) -> SimEstimates:
    """Combine replications; result does not depend on the input order."""
    tallies = sorted(tallies, key=lambda t: t.rep_index)
    out = {}
    for name in ("p_drop", "throughput", "mean_orbit", "pu_blocking"):
        out[f"{name}_hat"], out[f"{name}_ci"] = _mean_halfwidth([getattr(t, name) for t in tallies])
    return SimEstimates(replications=len(tallies), **out)


def run_simulation(config: SimConfig, n_jobs: int = 1) -> SimEstimates:
    reps = range(config.replications)
    if n_jobs == 1:
        tallies = [run_replication(config, r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            tallies = list(pool.map(lambda r: run_replication(config, r), reps))
    return aggregate(tallies)
