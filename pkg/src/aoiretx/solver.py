"""Dynamic-programming solvers on the truncated model.

Value iteration for the discounted problem, relative value iteration (RVIA)
for the long-run average age, greedy policy extraction, exact evaluation of a
stationary policy through its stationary distribution, and an exhaustive
search over all deterministic policies that serves as an oracle on tiny
spaces.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .model import (
    INF,
    Action,
    Kernel,
    Params,
    State,
    TruncatedSpace,
    build_kernel,
    feasible_actions,
)

REFERENCE_STATE = State(1, 1, 1)


def _size(N: int) -> int:
    # enumeration is ordered by v1, so S_N is a prefix of every larger space
    return N * (N + 3)


class ConvergenceError(RuntimeError):
    """An iterative method hit its iteration cap; ``residual`` is the last one."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class OracleSizeError(ValueError):
    pass


@dataclass
class ValueTable:
    space: TruncatedSpace
    values: np.ndarray
    mode: str = "relative"  # or "discounted"
    alpha: Optional[float] = None

    def __getitem__(self, s) -> float:
        return float(self.values[self.space.index(s)])

    @property
    def discount(self) -> float:
        return self.alpha if self.mode == "discounted" else 1.0

    def restrict(self, N: int) -> "ValueTable":
        """The rows ``v1 <= N`` of a table solved on a larger cap."""
        return ValueTable(TruncatedSpace(N), self.values[:_size(N)].copy(), self.mode, self.alpha)


@dataclass
class Policy:
    space: TruncatedSpace
    actions: np.ndarray  # int8, indexed like the space

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=np.int8)
        if self.actions.shape != (len(self.space),):
            raise ValueError("policy length does not match the space")
        for s, a in zip(self.space, self.actions):
            if a not in feasible_actions(s):
                raise ValueError(f"action {int(a)} infeasible at {s}")

    def __call__(self, s) -> Action:
        return Action(int(self.actions[self.space.index(s)]))

    def restrict(self, N: int) -> "Policy":
        return Policy(TruncatedSpace(N), self.actions[:_size(N)].copy())

    def __eq__(self, other) -> bool:
        return (isinstance(other, Policy) and other.space == self.space
                and np.array_equal(other.actions, self.actions))


@dataclass
class SolveResult:
    gain: float
    values: ValueTable
    policy: Policy
    iterations: int
    residual: float


@dataclass
class EvalResult:
    gain: float
    stationary_distribution: np.ndarray


def _kernel(space, params, kernel):
    if kernel is None:
        return build_kernel(space, params)
    if kernel.space != space or kernel.params != params:
        raise ValueError("kernel was built for a different space or parameters")
    return kernel


def _lookahead(K: Kernel, V: np.ndarray, discount: float) -> np.ndarray:
    """Q-values of shape (3, S); infeasible entries are +inf."""
    return K.cost + discount * np.einsum("ask,ask->as", K.prob, V[K.succ])


def vi_iterates(space, params, alpha, kernel=None):
    """Yield ``V_1, V_2, ...`` of discounted value iteration from ``V_0 = 0``."""
    K = _kernel(space, params, kernel)
    V = np.zeros(len(space))
    while True:
        V = _lookahead(K, V, alpha).min(axis=0)
        yield V


def discounted_vi(space, params, alpha, tol=1e-9, max_iter=1_000_000, kernel=None) -> ValueTable:
    """Value iteration for the alpha-discounted cost, starting from zero.

    Stops at the first iterate whose sup-norm change is at most ``tol``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    prev = np.zeros(len(space))
    residual = np.inf
    for _, V in zip(range(max_iter), vi_iterates(space, params, alpha, kernel)):
        residual = float(np.max(np.abs(V - prev)))
        if residual <= tol:
            return ValueTable(space, V, "discounted", alpha)
        prev = V
    raise ConvergenceError(
        f"discounted VI did not reach tol={tol} in {max_iter} sweeps (residual {residual:.3e})",
        residual)


def greedy_policy(space, params, values: ValueTable, kernel=None) -> Policy:
    """Per-state minimiser of the one-step lookahead; ties go to the lower action."""
    K = _kernel(space, params, kernel)
    Q = _lookahead(K, values.values, values.discount)
    return Policy(space, np.argmin(Q, axis=0))


def rvia(space, params, tol=1e-9, max_iter=1_000_000, kernel=None) -> SolveResult:
    """Relative value iteration with reference state (1,1,1).

    Each sweep computes ``V_n = T V_{n-1} - V_{n-1}((1,1,1))`` from ``V_0 = 0``
    and stops once the span of ``V_n - V_{n-1}`` is at most ``tol``.  The gain
    is the Bellman increment at the reference state, ``T V_{n-1}(ref) -
    V_{n-1}(ref)``, which is also ``V_n(ref)``.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    K = _kernel(space, params, kernel)
    ref = space.index(REFERENCE_STATE)
    V = np.zeros(len(space))
    span = np.inf
    for n in range(1, max_iter + 1):
        TV = _lookahead(K, V, 1.0).min(axis=0)
        V_new = TV - V[ref]
        diff = V_new - V
        span = float(diff.max() - diff.min())
        V = V_new
        if span <= tol:
            values = ValueTable(space, V, "relative")
            policy = greedy_policy(space, params, values, kernel=K)
            return SolveResult(float(V[ref]), values, policy, n, span)
    raise ConvergenceError(
        f"RVIA did not reach span tol={tol} in {max_iter} sweeps (span {span:.3e})", span)


def induced_chain(policy: Policy, params: Params, kernel=None) -> sp.csr_matrix:
    K = _kernel(policy.space, params, kernel)
    S = len(policy.space)
    a = policy.actions.astype(np.int64)
    rows = np.repeat(np.arange(S), 4)
    cols = K.succ[a, np.arange(S)].ravel()
    vals = K.prob[a, np.arange(S)].ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(S, S))


def policy_costs(policy: Policy, params: Params, kernel=None) -> np.ndarray:
    K = _kernel(policy.space, params, kernel)
    S = len(policy.space)
    return K.cost[policy.actions.astype(np.int64), np.arange(S)]


_DENSE_LIMIT = 1500


def stationary_distribution(P, tol=1e-12, max_sweeps=10_000_000) -> np.ndarray:
    """Stationary row vector of a stochastic matrix by power iteration.

    Stops once one more application of the (possibly squared) transition
    matrix moves the vector by at most ``tol`` in L1.  Small chains are held
    dense and squared after every check, so the number of sweeps grows only
    logarithmically with the mixing time.
    """
    S = P.shape[0]
    pi = np.full(S, 1.0 / S)
    dense = S <= _DENSE_LIMIT
    M = P.toarray() if dense else P.T.tocsr()
    delta = np.inf
    for _ in range(max_sweeps):
        nxt = pi @ M if dense else M @ pi
        nxt /= nxt.sum()
        delta = float(np.abs(nxt - pi).sum())
        pi = nxt
        if delta <= tol:
            return pi
        if dense:
            M = M @ M
    raise ConvergenceError(f"stationary distribution did not converge (L1 step {delta:.3e})", delta)


def evaluate_policy_exact(space, params, policy: Policy, kernel=None) -> EvalResult:
    """Long-run average age of a stationary policy on the truncated chain."""
    if policy.space != space:
        raise ValueError("policy belongs to a different space")
    K = _kernel(space, params, kernel)
    pi = stationary_distribution(induced_chain(policy, params, K))
    gain = float(pi @ policy_costs(policy, params, K))
    return EvalResult(gain, pi)


def decision_states(space: TruncatedSpace) -> np.ndarray:
    """Indices of the states ``(v1, v2, 1)`` with a packet queued."""
    return np.flatnonzero((space.b == 1) & (space.v2 != INF))


def forced_actions(space: TruncatedSpace) -> np.ndarray:
    """Action array with the only feasible action everywhere; decision states get 0."""
    acts = np.zeros(len(space), dtype=np.int8)
    empty = space.v2 == INF
    acts[empty & (space.b == 1)] = Action.TRANSMIT_NEW
    acts[empty & (space.b == 0)] = Action.IDLE
    return acts


def brute_force_optimal(space, params, max_decisions=16, kernel=None):
    """Minimum gain over every stationary deterministic policy.

    Returns ``(gain, policy)``.  Ties keep the first policy in enumeration
    order, which starts from all-retransmit.
    """
    dec = decision_states(space)
    if len(dec) > max_decisions:
        raise OracleSizeError(
            f"{len(dec)} decision states means 2**{len(dec)} policies; limit is {max_decisions}")
    K = _kernel(space, params, kernel)
    base = forced_actions(space)
    best_gain, best = np.inf, None
    for bits in itertools.product((0, 1), repeat=len(dec)):
        acts = base.copy()
        acts[dec] = bits
        pol = Policy(space, acts)
        g = evaluate_policy_exact(space, params, pol, kernel=K).gain
        if g < best_gain:
            best_gain, best = g, pol
    return best_gain, best


def count_policies(space) -> int:
    return 2 ** len(decision_states(space))


def threshold_value(v2, params: Params) -> Optional[float]:
    """Age ``q2 v2 / (q2 - q1)`` above which retransmit regions are upward closed."""
    if params.q1 == params.q2:
        return None
    return params.q2 * v2 / (params.q2 - params.q1)


def in_threshold_region(v1, v2, params: Params) -> bool:
    thr = threshold_value(v2, params)
    # slack absorbs rounding in q2*v2/(q2-q1), e.g. 0.9*2/0.6
    return thr is not None and v1 >= thr - 1e-9 * max(1.0, thr)


@dataclass
class ThresholdRow:
    v2: int
    retransmit_v1: tuple
    threshold: Optional[float]
    upward_closed: Optional[bool]  # None when q1 == q2


def threshold_summary(policy: Policy, params: Params):
    """For each queued age ``v2``, where the policy retransmits at ``(v1, v2, 1)``."""
    space = policy.space
    rows = []
    for v2 in range(1, space.N + 1):
        v1s = range(v2, space.N + 1)
        zero = tuple(v1 for v1 in v1s if policy((v1, v2, 1)) == Action.RETRANSMIT)
        thr = threshold_value(v2, params)
        closed = None
        if thr is not None:
            region = [v1 for v1 in v1s if in_threshold_region(v1, v2, params)]
            closed = True
            seen = False
            for v1 in region:
                if v1 in zero:
                    seen = True
                elif seen:
                    closed = False
                    break
        rows.append(ThresholdRow(v2, zero, thr, closed))
    return rows
