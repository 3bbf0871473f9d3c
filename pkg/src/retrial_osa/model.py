"""Parameters, state space and transition rules of the overlay retrial model.

A state ``(i, j, k)`` counts the bands held by primary users (PUs), the
sub-bands held by secondary users (SUs) and the SUs waiting in the retrial
orbit. States are ordered lexicographically; ordinals exposed to callers are
1-based, everything internal is 0-based.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
from functools import cached_property
from typing import Iterator, NamedTuple


class ParameterError(ValueError):
    """A model parameter lies outside its domain."""

    def __init__(self, field: str, value, reason: str):
        self.field = field
        self.value = value
        super().__init__(f"invalid {field}={value!r}: {reason}")


class StateDomainError(ValueError):
    """A state or ordinal does not belong to the state space."""


@dataclass(frozen=True)
class ModelParams:
    M: int
    N: int
    L: int
    lambda_p: float
    lambda_s: float
    mu_p: float
    mu_s: float
    theta: float

    def __post_init__(self):
        check_params(self)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.field_names()}

    def replace(self, **changes) -> "ModelParams":
        values = self.as_dict()
        values.update(changes)
        return ModelParams(**values)

    @property
    def capacity(self) -> int:
        """Total number of sub-bands, ``M * N``."""
        return self.M * self.N

    def free_subbands(self, i: int) -> int:
        """Sub-bands usable by SUs while ``i`` bands are held by PUs."""
        return (self.M - i) * self.N


INTEGER_FIELDS = ("M", "N", "L")
RATE_FIELDS = ("lambda_p", "lambda_s", "mu_p", "mu_s", "theta")


def _as_count(name, value, minimum):
    if isinstance(value, bool):
        raise ParameterError(name, value, "must be an integer")
    if isinstance(value, float):
        if not value.is_integer():
            raise ParameterError(name, value, "must be an integer")
        value = int(value)
    try:
        ivalue = int(value)
    except (TypeError, ValueError):
        raise ParameterError(name, value, "must be an integer") from None
    if ivalue != value:
        raise ParameterError(name, value, "must be an integer")
    if ivalue < minimum:
        raise ParameterError(name, value, f"must be >= {minimum}")
    return ivalue


def _as_rate(name, value, allow_zero):
    try:
        fvalue = float(value)
    except (TypeError, ValueError):
        raise ParameterError(name, value, "must be a real number") from None
    if not math.isfinite(fvalue):
        raise ParameterError(name, value, "must be finite")
    if allow_zero and fvalue < 0:
        raise ParameterError(name, value, "must be >= 0")
    if not allow_zero and fvalue <= 0:
        raise ParameterError(name, value, "must be > 0")
    return fvalue


def check_params(params: ModelParams) -> ModelParams:
    """Validate and normalise the field types of ``params`` in place."""
    minimums = {"M": 1, "N": 1, "L": 0}
    for name in INTEGER_FIELDS:
        object.__setattr__(params, name, _as_count(name, getattr(params, name), minimums[name]))
    for name in RATE_FIELDS:
        value = _as_rate(name, getattr(params, name), allow_zero=(name == "theta"))
        object.__setattr__(params, name, value)
    return params


class SystemState(NamedTuple):
    i: int
    j: int
    k: int


def in_domain(params: ModelParams, s) -> bool:
    i, j, k = s
    return 0 <= i <= params.M and 0 <= j <= params.free_subbands(i) and 0 <= k <= params.L


def _require_state(params: ModelParams, s) -> SystemState:
    try:
        s = SystemState(*(int(v) for v in s))
    except (TypeError, ValueError):
        raise StateDomainError(f"not a state triple: {s!r}") from None
    if not in_domain(params, s):
        raise StateDomainError(f"state {tuple(s)} is outside the state space")
    return s


@dataclass(frozen=True)
class StateSpace:
    """Lexicographic enumeration of all reachable-by-definition states."""

    params: ModelParams

    @cached_property
    def level_sizes(self) -> tuple[int, ...]:
        p = self.params
        return tuple((p.free_subbands(i) + 1) * (p.L + 1) for i in range(p.M + 1))

    @cached_property
    def level_offsets(self) -> tuple[int, ...]:
        """0-based ordinal of the first state of each PU level."""
        offsets, acc = [], 0
        for size in self.level_sizes:
            offsets.append(acc)
            acc += size
        return tuple(offsets)

    @cached_property
    def states(self) -> tuple[SystemState, ...]:
        p = self.params
        return tuple(
            SystemState(i, j, k)
            for i in range(p.M + 1)
            for j in range(p.free_subbands(i) + 1)
            for k in range(p.L + 1)
        )

    def __len__(self) -> int:
        return sum(self.level_sizes)

    def __iter__(self) -> Iterator[SystemState]:
        return iter(self.states)

    def index0(self, s) -> int:
        i, j, k = _require_state(self.params, s)
        return self.level_offsets[i] + j * (self.params.L + 1) + k

    def index_of(self, s) -> int:
        """1-based ordinal of ``s``."""
        return self.index0(s) + 1

    def state_of(self, m: int) -> SystemState:
        """Inverse of :meth:`index_of`."""
        if isinstance(m, bool) or int(m) != m or not 1 <= m <= len(self):
            raise StateDomainError(f"ordinal {m!r} outside 1..{len(self)}")
        m0 = int(m) - 1
        i = max(level for level, off in enumerate(self.level_offsets) if off <= m0)
        j, k = divmod(m0 - self.level_offsets[i], self.params.L + 1)
        return SystemState(i, j, k)

    def level_slice(self, i: int) -> slice:
        start = self.level_offsets[i]
        return slice(start, start + self.level_sizes[i])


def build_state_space(params: ModelParams) -> StateSpace:
    if not isinstance(params, ModelParams):
        raise TypeError("params must be a ModelParams instance")
    return StateSpace(params)


def index_of(space: StateSpace, s) -> int:
    return space.index_of(s)


def state_of(space: StateSpace, m: int) -> SystemState:
    return space.state_of(m)


class TransitionKind(enum.Enum):
    SU_ARRIVAL_ADMIT = "su_arrival_admit"
    SU_ARRIVAL_TO_ORBIT = "su_arrival_to_orbit"
    PU_ARRIVAL_NO_PREEMPT = "pu_arrival_no_preempt"
    PU_ARRIVAL_PREEMPT = "pu_arrival_preempt"
    SU_SERVICE_END = "su_service_end"
    PU_SERVICE_END = "pu_service_end"
    RETRIAL_SUCCESS = "retrial_success"


class Transition(NamedTuple):
    source: SystemState
    target: SystemState
    rate: float
    kind: TransitionKind
    su_dropped: int = 0


def transitions_from(params: ModelParams, s) -> list[Transition]:
    """All transitions out of ``s`` with positive rate.

    Emission order is fixed: SU arrival, PU arrival, retrial, SU service,
    PU service. SU arrivals meeting a full orbit and PU arrivals meeting
    ``i == M`` are lost and emit nothing.
    """
    s = _require_state(params, s)
    i, j, k = s
    M, N, L = params.M, params.N, params.L
    free = params.free_subbands(i)
    out = []

    if j < free:
        out.append(Transition(s, SystemState(i, j + 1, k), params.lambda_s,
                              TransitionKind.SU_ARRIVAL_ADMIT))
    elif k < L:
        out.append(Transition(s, SystemState(i, j, k + 1), params.lambda_s,
                              TransitionKind.SU_ARRIVAL_TO_ORBIT))

    if i < M:
        free_after = free - N
        if j <= free_after:
            out.append(Transition(s, SystemState(i + 1, j, k), params.lambda_p,
                                  TransitionKind.PU_ARRIVAL_NO_PREEMPT))
        else:
            evicted = j - free_after
            dropped = max(0, k + evicted - L)
            out.append(Transition(s, SystemState(i + 1, free_after, min(k + evicted, L)),
                                  params.lambda_p, TransitionKind.PU_ARRIVAL_PREEMPT, dropped))

    if k >= 1 and j < free and params.theta > 0:
        out.append(Transition(s, SystemState(i, j + 1, k - 1), k * params.theta,
                              TransitionKind.RETRIAL_SUCCESS))

    if j >= 1:
        out.append(Transition(s, SystemState(i, j - 1, k), j * params.mu_s,
                              TransitionKind.SU_SERVICE_END))

    if i >= 1:
        out.append(Transition(s, SystemState(i - 1, j, k), i * params.mu_p,
                              TransitionKind.PU_SERVICE_END))

    return out
