"""MDP for the re-transmit-or-preempt age-of-information problem.

A state is ``(v1, v2, b)``: the age at the user, the age of the packet held at
the base station (``INF`` when the queue is empty) and a flag for a fresh
arrival in the current slot.  ``transitions`` is the kernel of the countable
model; ``transitions_truncated`` is the kernel of the finite approximation that
caps ``v1`` at ``N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, Iterator, List, NamedTuple, Tuple

import numpy as np

INF = math.inf


class FeasibilityError(ValueError):
    """An action was requested that the state does not allow."""


class Action(IntEnum):
    RETRANSMIT = 0
    TRANSMIT_NEW = 1
    IDLE = 2


class State(NamedTuple):
    v1: int
    v2: float  # int, or INF for an empty queue
    b: int

    def __str__(self) -> str:
        return format_state(self)


@dataclass(frozen=True)
class Params:
    """Arrival probability ``p``, first-attempt success ``q1``, retry success ``q2``."""

    p: float
    q1: float
    q2: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must be > 0 and <= 1")
        if not 0.0 < self.q1 <= 1.0:
            raise ValueError("q1 must be > 0 and <= 1")
        if not 0.0 < self.q2 <= 1.0:
            raise ValueError("q2 must be > 0 and <= 1")
        if self.q1 > self.q2:
            raise ValueError("q1 must be ≤ q2")


def format_state(s) -> str:
    v2 = "inf" if s[1] == INF else str(int(s[1]))
    return f"({int(s[0])},{v2},{int(s[2])})"


def parse_state(text: str) -> State:
    """Inverse of :func:`format_state`, e.g. ``"(3,inf,1)"``."""
    parts = [t.strip() for t in text.strip().strip("()").split(",")]
    if len(parts) != 3:
        raise ValueError(f"cannot parse state {text!r}")
    v2 = INF if parts[1].lower() == "inf" else int(parts[1])
    return make_state(int(parts[0]), v2, int(parts[2]))


def make_state(v1, v2, b) -> State:
    """Build a validated state."""
    if v1 < 1:
        raise ValueError(f"v1 must be >= 1, got {v1}")
    if b not in (0, 1):
        raise ValueError(f"b must be 0 or 1, got {b}")
    if v2 != INF:
        if v2 != int(v2) or not 1 <= v2 <= v1:
            raise ValueError(f"finite v2 must satisfy 1 <= v2 <= v1, got {(v1, v2)}")
        v2 = int(v2)
    return State(int(v1), v2, int(b))


def feasible_actions(s: State) -> frozenset:
    if s.v2 == INF:
        return frozenset({Action.TRANSMIT_NEW}) if s.b else frozenset({Action.IDLE})
    if s.b:
        return frozenset({Action.RETRANSMIT, Action.TRANSMIT_NEW})
    return frozenset({Action.RETRANSMIT})


def _require_feasible(s: State, a) -> Action:
    a = Action(a)
    if a not in feasible_actions(s):
        raise FeasibilityError(f"action {a.name} is not feasible in state {format_state(s)}")
    return a


def _merge(pairs) -> List[Tuple[State, float]]:
    out: Dict[State, float] = {}
    for st, pr in pairs:
        if pr > 0.0:
            out[st] = out.get(st, 0.0) + pr
    return list(out.items())


def transitions(s: State, a, params: Params) -> List[Tuple[State, float]]:
    """Successor distribution of the untruncated model as ``[(state, prob), ...]``."""
    a = _require_feasible(s, a)
    p = params.p
    v1, v2 = s.v1, s.v2
    if a == Action.RETRANSMIT:
        q = params.q2
        pairs = [
            (State(v1 + 1, v2 + 1, 1), p * (1 - q)),
            (State(v1 + 1, v2 + 1, 0), (1 - p) * (1 - q)),
            (State(v2 + 1, INF, 0), (1 - p) * q),
            (State(v2 + 1, INF, 1), p * q),
        ]
    elif a == Action.TRANSMIT_NEW:
        q = params.q1
        pairs = [
            (State(v1 + 1, 1, 0), (1 - p) * (1 - q)),
            (State(v1 + 1, 1, 1), p * (1 - q)),
            (State(1, INF, 0), (1 - p) * q),
            (State(1, INF, 1), p * q),
        ]
    else:
        pairs = [
            (State(v1 + 1, INF, 0), 1 - p),
            (State(v1 + 1, INF, 1), p),
        ]
    return _merge(pairs)


def cost(s: State, a, params: Params) -> float:
    """Expected age at the user after the slot (closed form)."""
    a = _require_feasible(s, a)
    if a == Action.RETRANSMIT:
        return params.q2 * (s.v2 + 1) + (1 - params.q2) * (s.v1 + 1)
    if a == Action.TRANSMIT_NEW:
        return params.q1 + (1 - params.q1) * (s.v1 + 1)
    return float(s.v1 + 1)


class TruncatedSpace:
    """The states with ``v1 <= N``, in a fixed order.

    Ordering is ascending ``v1``, then ``v2`` with ``INF`` last, then ``b``;
    the index of a state is computed arithmetically, so lookups are O(1).
    """

    def __init__(self, N: int):
        if int(N) != N or N < 1:
            raise ValueError(f"N must be a positive integer, got {N!r}")
        self.N = int(N)
        states = []
        for v1 in range(1, self.N + 1):
            for v2 in list(range(1, v1 + 1)) + [INF]:
                for b in (0, 1):
                    states.append(State(v1, v2, b))
        self.states: Tuple[State, ...] = tuple(states)
        self.v1 = np.array([s.v1 for s in states], dtype=np.int64)
        self.v2 = np.array([s.v2 for s in states], dtype=float)
        self.b = np.array([s.b for s in states], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[State]:
        return iter(self.states)

    def __contains__(self, s) -> bool:
        try:
            self.index(s)
        except IndexError:
            return False
        return True

    def __eq__(self, other) -> bool:
        return isinstance(other, TruncatedSpace) and other.N == self.N

    def __hash__(self) -> int:
        return hash(("TruncatedSpace", self.N))

    def __repr__(self) -> str:
        return f"TruncatedSpace(N={self.N})"

    def index(self, s) -> int:
        v1, v2, b = s
        if not (1 <= v1 <= self.N and b in (0, 1)):
            raise IndexError(f"state {format_state(s)} is not in S_{self.N}")
        if v2 == INF:
            j = v1
        elif 1 <= v2 <= v1 and v2 == int(v2):
            j = int(v2) - 1
        else:
            raise IndexError(f"state {format_state(s)} is not in S_{self.N}")
        return (v1 - 1) * (v1 + 2) + 2 * j + b

    def state(self, i: int) -> State:
        return self.states[i]

    def index_array(self, v1, v2, b) -> np.ndarray:
        """Vectorised ``index`` for integer arrays; ``v2 == 0`` encodes ``INF``."""
        v1 = np.asarray(v1)
        v2 = np.asarray(v2)
        j = np.where(v2 == 0, v1, v2 - 1)
        return (v1 - 1) * (v1 + 2) + 2 * j + np.asarray(b)


def enumerate_states(N: int) -> TruncatedSpace:
    return TruncatedSpace(N)


def state_index(space: TruncatedSpace, s) -> int:
    return space.index(s)


def transitions_truncated(s: State, a, params: Params, space: TruncatedSpace):
    """Kernel of the capped model.

    A successor with ``v1 > N`` is redirected to ``(N, min(v2', v2), b')``, where
    ``v2`` belongs to the current state and ``(v2', b')`` to the successor; an
    empty queue stays empty.  Merged successors have their probabilities summed.
    """
    space.index(s)
    pairs = []
    for t, pr in transitions(s, a, params):
        if t.v1 > space.N:
            v2 = INF if t.v2 == INF else min(t.v2, s.v2)
            t = State(s.v1, v2, t.b)
        pairs.append((t, pr))
    return _merge(pairs)


@dataclass(frozen=True)
class Kernel:
    """Dense per-action arrays of the truncated kernel on a space.

    ``succ[a]`` and ``prob[a]`` have shape ``(S, 4)``; unused slots point at
    state 0 with probability 0.  ``cost[a]`` is ``inf`` where ``a`` is infeasible.
    """

    space: TruncatedSpace
    params: Params
    succ: np.ndarray  # (3, S, 4) int64
    prob: np.ndarray  # (3, S, 4) float
    cost: np.ndarray  # (3, S) float
    feasible: np.ndarray  # (3, S) bool


def build_kernel(space: TruncatedSpace, params: Params) -> Kernel:
    S = len(space)
    succ = np.zeros((3, S, 4), dtype=np.int64)
    prob = np.zeros((3, S, 4))
    cst = np.full((3, S), np.inf)
    feas = np.zeros((3, S), dtype=bool)
    for i, s in enumerate(space):
        for a in feasible_actions(s):
            feas[a, i] = True
            cst[a, i] = cost(s, a, params)
            for k, (t, pr) in enumerate(transitions_truncated(s, a, params, space)):
                succ[a, i, k] = space.index(t)
                prob[a, i, k] = pr
    return Kernel(space, params, succ, prob, cst, feas)
