"""Slot-level Monte Carlo simulation of the base station to user link.

Randomness comes from a Philox counter-based generator seeded explicitly.
Every slot consumes exactly two uniforms, channel first and arrival second,
whatever the policy does, so two policies run with the same seed see the same
channel and arrival realisations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np
import numba
from scipy import stats

from .model import INF, Action, Params, State, feasible_actions, format_state
from .solver import Policy

CHUNK = 1 << 16
N_BATCHES = 30
DEFAULT_INIT = State(1, INF, 0)
RETURN_STATE = State(1, INF, 1)


class UndefinedPolicyError(LookupError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def _uniform_chunks(seed: int, horizon: int) -> Iterator[np.ndarray]:
    rng = make_rng(seed)
    done = 0
    while done < horizon:
        n = min(CHUNK, horizon - done)
        yield rng.random((n, 2))
        done += n


# ---------------------------------------------------------------- policies


@dataclass(frozen=True)
class BaselineKind:
    name: str
    theta: Optional[float] = None

    def __post_init__(self):
        if self.name not in ("always_preempt", "never_preempt", "threshold"):
            raise ValueError(f"unknown baseline {self.name!r}")
        if self.name == "threshold" and not (self.theta is not None and self.theta > 0):
            raise ValueError("THRESHOLD needs theta > 0")

    @property
    def label(self) -> str:
        return f"threshold({self.theta:.12g})" if self.name == "threshold" else self.name


ALWAYS_PREEMPT = BaselineKind("always_preempt")
NEVER_PREEMPT = BaselineKind("never_preempt")


def THRESHOLD(theta: float) -> BaselineKind:
    return BaselineKind("threshold", theta)


@dataclass(frozen=True)
class PolicyRule:
    """A stationary policy given as ``decide(v1, v2) -> 0 or 1`` at ``(v1, v2, 1)``.

    Every other state gets its only feasible action, so a rule is defined on
    the whole countable state space.  ``decide`` may also accept an integer
    ``v1`` with an array of ``v2`` values; the simulator uses that to tabulate
    large regions quickly and falls back to scalar calls otherwise.
    """

    name: str
    decide: Callable[[int, int], int]

    def __call__(self, s) -> Action:
        v1, v2, b = s
        if v2 == INF:
            return Action.TRANSMIT_NEW if b else Action.IDLE
        if not b:
            return Action.RETRANSMIT
        return Action(int(self.decide(int(v1), int(v2))))

    def on(self, space) -> Policy:
        """Tabulate the rule on a truncated space."""
        return Policy(space, np.array([self(s) for s in space], dtype=np.int8))


def make_baseline(kind: BaselineKind) -> PolicyRule:
    if kind.name == "always_preempt":
        return PolicyRule(kind.label, lambda v1, v2: np.ones_like(v2))
    if kind.name == "never_preempt":
        return PolicyRule(kind.label, lambda v1, v2: np.zeros_like(v2))
    theta = kind.theta
    return PolicyRule(kind.label, lambda v1, v2: np.where(v1 >= theta * v2, 0, 1))


def extend_policy(policy: Policy, name: str = "optimal") -> PolicyRule:
    """Extend a table beyond its cap by copying the last row and column.

    Retransmit regions stay closed upward in ``v1`` and preempt regions stay
    closed upward in ``v2``, the shapes the optimal policy is known to have.
    """
    N = policy.space.N
    grid = np.zeros((N + 1, N + 1), dtype=np.int8)
    for v1 in range(1, N + 1):
        for v2 in range(1, v1 + 1):
            grid[v1, v2] = policy((v1, v2, 1))
    return PolicyRule(name, lambda v1, v2: grid[min(v1, N), np.minimum(v2, N)])


def _rule_row(rule: PolicyRule, v1: int) -> np.ndarray:
    v2 = np.arange(1, v1 + 1)
    try:
        row = np.asarray(rule.decide(v1, v2))
        if row.shape == v2.shape:
            return row
    except (TypeError, ValueError):
        pass
    return np.array([rule.decide(v1, int(w)) for w in v2])


def _decision_table(policy, cap: int) -> np.ndarray:
    D = np.zeros((cap + 1, cap + 1), dtype=np.int8)
    for v1 in range(1, cap + 1):
        if isinstance(policy, PolicyRule):
            D[v1, 1:v1 + 1] = _rule_row(policy, v1)
        else:
            for v2 in range(1, v1 + 1):
                D[v1, v2] = policy((v1, v2, 1))
    return D


# ---------------------------------------------------------------- dynamics


def step(s: State, a, params: Params, draws) -> State:
    """Sample the successor of ``s`` under ``a`` from ``draws = (u_channel, u_arrival)``."""
    a = Action(a)
    if a not in feasible_actions(s):
        raise ValueError(f"action {a.name} infeasible at {format_state(s)}")
    u_channel, u_arrival = draws
    b = 1 if u_arrival < params.p else 0
    if a == Action.RETRANSMIT:
        if u_channel < params.q2:
            return State(s.v2 + 1, INF, b)
        return State(s.v1 + 1, s.v2 + 1, b)
    if a == Action.TRANSMIT_NEW:
        if u_channel < params.q1:
            return State(1, INF, b)
        return State(s.v1 + 1, 1, b)
    return State(s.v1 + 1, INF, b)


@numba.njit(cache=True)
def _run(u, p, q1, q2, D, cap, state, ages, offset, counters):
    """Advance ``state`` (v1, v2 with 0 = empty, b) through the uniforms ``u``.

    Writes successor ages into ``ages[offset:]``.  Returns the number of slots
    done; stops early when the current ``v1`` exceeds ``cap``.  ``counters``
    holds (last visit slot of (1,empty,1), return-time sum, return count).
    """
    v1, v2, b = state[0], state[1], state[2]
    n = u.shape[0]
    for t in range(n):
        if v1 > cap:
            state[0], state[1], state[2] = v1, v2, b
            return t
        if v2 == 0:
            a = 1 if b == 1 else 2
        elif b == 0:
            a = 0
        else:
            a = D[v1, v2]
        arrival = 1 if u[t, 1] < p else 0
        if a == 0:
            if u[t, 0] < q2:
                v1, v2 = v2 + 1, 0
            else:
                v1, v2 = v1 + 1, v2 + 1
        elif a == 1:
            if u[t, 0] < q1:
                v1, v2 = 1, 0
            else:
                v1, v2 = v1 + 1, 1
        else:
            v1 = v1 + 1
        b = arrival
        ages[offset + t] = v1
        if v1 == 1 and v2 == 0 and b == 1:
            slot = offset + t + 1
            if counters[0] >= 0:
                counters[1] += slot - counters[0]
                counters[2] += 1
            counters[0] = slot
    state[0], state[1], state[2] = v1, v2, b
    return n


@dataclass
class TrajectoryStats:
    horizon: int
    time_average_age: float
    std_error: float
    confidence_half_width_99: float
    mean_return_time: Optional[float]
    seed: int
    policy_name: str = ""
    params: Optional[Params] = None


def batch_means(x: np.ndarray, n_batches: int = N_BATCHES):
    """Standard error and 99% half-width of the mean of a correlated series."""
    m = len(x) // n_batches
    means = x[: m * n_batches].reshape(n_batches, m).mean(axis=1)
    se = float(means.std(ddof=1) / math.sqrt(n_batches))
    return se, float(stats.t.ppf(0.995, n_batches - 1) * se)


def _policy_name(policy) -> str:
    return getattr(policy, "name", None) or "table"


def simulate(policy, params: Params, horizon: int, seed: int, init: State = DEFAULT_INIT,
             name: Optional[str] = None) -> TrajectoryStats:
    """Time-average age of ``policy`` over ``horizon`` slots.

    ``policy`` is a :class:`PolicyRule` (defined everywhere) or a
    :class:`~aoiretx.solver.Policy` table, which is an error to leave.
    """
    if horizon < 10_000:
        raise ValueError("horizon must be at least 10^4 slots")
    is_table = isinstance(policy, Policy)
    cap = policy.space.N if is_table else 256
    D = _decision_table(policy, cap)
    state = np.array([init.v1, 0 if init.v2 == INF else init.v2, init.b], dtype=np.int64)
    ages = np.empty(horizon, dtype=np.int64)
    counters = np.array([-1, 0, 0], dtype=np.int64)
    if (init.v1, init.v2, init.b) == tuple(RETURN_STATE):
        counters[0] = 0
    offset = 0
    for u in _uniform_chunks(seed, horizon):
        done = 0
        while done < len(u):
            done += _run(u[done:], params.p, params.q1, params.q2, D, cap,
                         state, ages, offset + done, counters)
            if done < len(u):
                s = State(int(state[0]), INF if state[1] == 0 else int(state[1]), int(state[2]))
                if is_table:
                    raise UndefinedPolicyError(
                        f"policy table (N={cap}) is undefined at reached state {format_state(s)}")
                cap = max(2 * cap, int(state[0]))
                D = _decision_table(policy, cap)
        offset += len(u)
    se, hw = batch_means(ages.astype(float))
    ret = float(counters[1] / counters[2]) if counters[2] else None
    return TrajectoryStats(horizon, float(ages.mean()), se, hw, ret, int(seed),
                           name or _policy_name(policy), params)


def trace(policy, params: Params, horizon: int, seed: int, init: State = DEFAULT_INIT):
    """Yield ``(slot, v1, v2, b, action)`` per slot; pure Python, for debugging."""
    s = init
    t = 0
    for u in _uniform_chunks(seed, horizon):
        for uc, ua in u:
            if isinstance(policy, Policy) and s not in policy.space:
                raise UndefinedPolicyError(f"policy table is undefined at reached state {format_state(s)}")
            a = policy(s)
            yield t, s.v1, s.v2, s.b, int(a)
            s = step(s, a, params, (uc, ua))
            t += 1


def simulate_drop_baseline(params: Params, horizon: int, seed: int) -> float:
    """Engine check outside the MDP rules: send each fresh packet once, drop it on failure.

    The recorded age resets to 1 with probability ``p * q1`` per slot, so the
    time average should approach ``1 / (p * q1)``.
    """
    if horizon < 1_000_000:
        raise ValueError("horizon must be at least 10^6 slots")
    total = 0
    last_reset = -1  # slot of the most recent delivery; the start state has age 1
    t0 = 0
    for u in _uniform_chunks(seed, horizon):
        n = len(u)
        ok = (u[:, 0] < params.q1) & (u[:, 1] < params.p)
        slots = np.arange(t0, t0 + n)
        reset = np.where(ok, slots, -2)
        reset = np.maximum.accumulate(np.maximum(reset, last_reset))
        total += int((slots - reset + 1).sum())
        last_reset = int(reset[-1])
        t0 += n
    return total / horizon
