"""Exhaustive numerical checks of the structural properties of solved instances.

Value checks take a :class:`~aoiretx.solver.ValueTable`, policy checks a
:class:`~aoiretx.solver.Policy`.  Every check walks its full tuple set and
returns a :class:`StructureReport`; violations are reported, never raised.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .model import INF, Action, Params
from .solver import Policy, ValueTable, in_threshold_region

TOL = 1e-9
MAX_LISTED = 20


@dataclass(frozen=True)
class Violation:
    check: str
    v1: int
    v2: float
    b: int
    x: int
    y: int
    lhs: float
    rhs: float

    @property
    def excess(self) -> float:
        return self.lhs - self.rhs


@dataclass
class StructureReport:
    name: str
    passed: bool
    n_checked: int
    worst: float
    violations: List[Violation] = field(default_factory=list)
    tol: float = TOL
    applicable: bool = True
    # worst excess over tuples touching the cap v1 = N (value checks only)
    boundary_worst: Optional[float] = None

    def summary(self) -> str:
        if not self.applicable:
            return f"{self.name}: N/A"
        status = "PASS" if self.passed else "FAIL"
        line = f"{self.name}: {status} checked={self.n_checked} worst={self.worst:.3e}"
        if self.boundary_worst is not None:
            line += f" boundary_worst={self.boundary_worst:.3e}"
        return line


class _Collector:
    def __init__(self, name, tol):
        self.name = name
        self.tol = tol
        self.count = 0
        self.worst = 0.0
        self.boundary = 0.0
        self.found: List[Violation] = []

    def add(self, n, excess, at_boundary=False):
        self.count += int(n)
        if n:
            m = float(np.max(excess))
            self.worst = max(self.worst, m)
            if at_boundary:
                self.boundary = max(self.boundary, m)

    def keep(self, v: Violation):
        self.found.append(v)
        if len(self.found) > 4 * MAX_LISTED:
            self._trim()

    def _trim(self):
        self.found.sort(key=lambda v: -v.excess)
        del self.found[MAX_LISTED:]

    def report(self, with_boundary=False) -> StructureReport:
        self._trim()
        return StructureReport(
            self.name, self.worst <= self.tol, self.count, self.worst, self.found, self.tol,
            boundary_worst=self.boundary if with_boundary else None)


def _grid(values: ValueTable, b: int) -> np.ndarray:
    """``G[v1, v2]`` for finite ``v2``, NaN outside the triangle; ``G[v1, 0]`` holds ``v2 = INF``."""
    N = values.space.N
    G = np.full((N + 2, N + 2), np.nan)
    sp = values.space
    for v1 in range(1, N + 1):
        lo = sp.index((v1, 1, b))
        G[v1, 1:v1 + 1] = values.values[lo:lo + 2 * v1:2]
        G[v1, 0] = values.values[sp.index((v1, INF, b))]
    return G


def check_monotonicity(values: ValueTable, tol: float = TOL) -> StructureReport:
    """Values never decrease when either age grows (queued or empty)."""
    N = values.space.N
    col = _Collector("monotonicity", tol)
    for b in (0, 1):
        G = _grid(values, b)
        for v1 in range(1, N + 1):
            for v2 in range(1, v1 + 1):
                block = G[v1:N + 1, v2:N + 1]
                ok = ~np.isnan(block)
                col.add(ok.sum(), G[v1, v2] - block[ok])
                edge = block[-1][ok[-1]]  # partners with v1 + x = N
                col.boundary = max(col.boundary, float(np.max(G[v1, v2] - edge)))
                bad = np.argwhere(ok & (G[v1, v2] - np.nan_to_num(block, nan=np.inf) > tol))
                for x, y in bad:
                    col.keep(Violation(col.name, v1, v2, b, int(x), int(y),
                                       float(G[v1, v2]), float(block[x, y])))
        # empty queue: V(v1, INF, b) <= V(v1 + x, INF, b)
        inf_col = G[1:N + 1, 0]
        for v1 in range(1, N + 1):
            excess = inf_col[v1 - 1] - inf_col[v1 - 1:]
            col.add(len(excess), excess)
            col.boundary = max(col.boundary, float(inf_col[v1 - 1] - inf_col[-1]))
            for x in np.flatnonzero(excess > tol):
                col.keep(Violation(col.name, v1, INF, b, int(x), 0,
                                   float(inf_col[v1 - 1]), float(inf_col[v1 - 1 + x])))
    return col.report(with_boundary=True)


def check_concavity(values: ValueTable, tol: float = TOL) -> StructureReport:
    """First differences in ``v1`` are nonincreasing for each queued age and flag."""
    N = values.space.N
    col = _Collector("concavity", tol)
    for b in (0, 1):
        G = _grid(values, b)
        for v2 in range(1, N + 1):
            v = G[v2:N + 1, v2]  # v1 = v2 .. N
            if len(v) < 3:
                continue
            inc = np.diff(v)
            ahead, behind = inc[1:], inc[:-1]
            excess = ahead - behind
            col.add(len(excess), excess)
            col.boundary = max(col.boundary, float(excess[-1]))
            for k in np.flatnonzero(excess > tol):
                # ahead[k] is the step from v1 = v2 + k + 1 to v1 + 1
                col.keep(Violation(col.name, v2 + int(k) + 1, v2, b, 0, 1,
                                   float(ahead[k]), float(behind[k])))
    return col.report(with_boundary=True)


def check_lemma7(values: ValueTable, params: Params, tol: float = TOL) -> StructureReport:
    """Bounds on how much a larger queued age changes a gain in user age.

    With ``D(w) = V(v1+y, w, b) - V(v1, w, b)`` and ``v2 <= v2bar <= v1``:
    ``D(v2) <= D(v2bar)`` and ``D(v2bar) <= (1-q1)/(1-q2) * D(v2)``.
    Violations record ``x = v2bar - v2``; the check column names the bound
    (``lemma7.order`` or ``lemma7.ratio``).
    """
    if params.q2 >= 1.0:
        return StructureReport("lemma7", True, 0, 0.0, tol=tol, applicable=False)
    ratio = (1 - params.q1) / (1 - params.q2)
    N = values.space.N
    col = _Collector("lemma7", tol)
    for b in (0, 1):
        G = _grid(values, b)
        for v1 in range(1, N):
            for y in range(1, N - v1 + 1):
                D = G[v1 + y, 1:v1 + 1] - G[v1, 1:v1 + 1]  # indexed by w - 1
                lo, hi = np.triu_indices(v1)  # v2 = lo + 1 <= v2bar = hi + 1
                e1 = D[lo] - D[hi]
                e2 = D[hi] - ratio * D[lo]
                col.add(len(e1), e1)
                col.add(len(e2), e2)
                for k in np.flatnonzero(e1 > tol):
                    col.keep(Violation("lemma7.order", v1, int(lo[k]) + 1, b,
                                       int(hi[k] - lo[k]), y, float(D[lo[k]]), float(D[hi[k]])))
                for k in np.flatnonzero(e2 > tol):
                    col.keep(Violation("lemma7.ratio", v1, int(lo[k]) + 1, b,
                                       int(hi[k] - lo[k]), y, float(D[hi[k]]),
                                       float(ratio * D[lo[k]])))
    return col.report()


def _decision_grid(policy: Policy) -> np.ndarray:
    """``A[v1, v2]`` = action at ``(v1, v2, 1)``; -1 outside the triangle."""
    N = policy.space.N
    A = np.full((N + 1, N + 1), -1, dtype=np.int64)
    sp = policy.space
    for v1 in range(1, N + 1):
        lo = sp.index((v1, 1, 1))
        A[v1, 1:v1 + 1] = policy.actions[lo:lo + 2 * v1:2]
    return A


def check_lemma4(policy: Policy) -> StructureReport:
    """Preempting at ``(v1, v2, 1)`` implies preempting at every older queued packet."""
    N = policy.space.N
    A = _decision_grid(policy)
    col = _Collector("lemma4", TOL)
    for v1 in range(1, N + 1):
        for v2 in range(1, v1 + 1):
            if A[v1, v2] != Action.TRANSMIT_NEW:
                continue
            row = A[v1, v2:v1 + 1]
            excess = (row != Action.TRANSMIT_NEW).astype(float)
            col.add(len(row), excess)
            for x in np.flatnonzero(excess):
                col.keep(Violation(col.name, v1, v2, 1, int(x), 0,
                                   float(row[x]), float(Action.TRANSMIT_NEW)))
    return col.report()


def check_theorem2(policy: Policy, params: Params) -> StructureReport:
    """Above ``v1 >= q2 v2 / (q2 - q1)``, retransmitting at ``v1`` implies it at all larger ``v1``."""
    if params.q1 >= params.q2:
        return StructureReport("theorem2", True, 0, 0.0, applicable=False)
    N = policy.space.N
    A = _decision_grid(policy)
    col = _Collector("theorem2", TOL)
    for v2 in range(1, N + 1):
        for v1 in range(v2, N + 1):
            if A[v1, v2] != Action.RETRANSMIT or not in_threshold_region(v1, v2, params):
                continue
            run = A[v1:N + 1, v2]
            excess = (run != Action.RETRANSMIT).astype(float)
            col.add(len(run), excess)
            for x in np.flatnonzero(excess):
                col.keep(Violation(col.name, v1, v2, 1, int(x), 0,
                                   float(run[x]), float(Action.RETRANSMIT)))
    return col.report()


def run_all_checks(discounted: ValueTable, policy: Policy, params: Params, tol: float = TOL):
    """The five checks: value properties on ``discounted``, policy properties on ``policy``."""
    return [
        check_monotonicity(discounted, tol),
        check_concavity(discounted, tol),
        check_lemma7(discounted, params, tol),
        check_lemma4(policy),
        check_theorem2(policy, params),
    ]
