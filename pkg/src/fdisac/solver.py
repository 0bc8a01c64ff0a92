"""Three exact solvers for the timeslot/beam MILP and a certificate check.

* ``solve_structured`` uses the per-slot separability that holds when the
  channel stays put over the horizon: sensing slots share a beam pair with
  communication, the rest carry the best communication beam.
* ``solve_branch_bound`` searches the binaries of a built ``MilpModel``
  depth-first and checks the model rows at every completed slot.
* ``solve_bruteforce`` enumerates every multiset of per-slot choices.

All three break ties toward the fewest sensing slots, then the lowest
transmit index, then the lowest receive index, sensing slots first.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from fdisac.metrics import SlotAssignment
from fdisac.milp import CoefficientTable, MilpModel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"


class EnumerationCapExceeded(RuntimeError):
    pass


class NodeLimitExceeded(RuntimeError):
    pass


@dataclass
class Solution:
    schedule: list[SlotAssignment]
    objective_bits: float
    status: str
    per_slot_worst_sinr: list[float]
    solver_id: str
    reason: str | None = None
    nodes: int | None = field(default=None, compare=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def schedule_objective(coeffs: CoefficientTable, schedule: list[SlotAssignment]) -> float:
    return float(sum(coeffs.rate_per_tx[a.tx_index] for a in schedule if a.comm_on))


def _worst_sinrs(coeffs: CoefficientTable, schedule: list[SlotAssignment]) -> list[float]:
    return [coeffs.worst_sinr(a.tx_index, a.rx_index) if a.sense_on else float("nan") for a in schedule]


def _optimal(coeffs, schedule, solver_id, nodes=None) -> Solution:
    return Solution(schedule, schedule_objective(coeffs, schedule), OPTIMAL,
                    _worst_sinrs(coeffs, schedule), solver_id, None, nodes)


def _infeasible(solver_id, reason, nodes=None) -> Solution:
    return Solution([], float("-inf"), INFEASIBLE, [], solver_id, reason, nodes)


def _best_pair(coeffs: CoefficientTable):
    feasible = coeffs.pair_feasible()
    if not feasible.any():
        return None
    masked = np.where(feasible, coeffs.rate_per_tx[:, None], -np.inf)
    b, c = np.unravel_index(int(np.argmax(masked)), masked.shape)
    return int(b), int(c)


def solve_structured(coeffs: CoefficientTable, n_slots: int, min_sensing: int) -> Solution:
    if min_sensing > n_slots:
        return _infeasible("structured", f"min_sensing={min_sensing} exceeds the {n_slots} available slots")
    b_comm = int(np.argmax(coeffs.rate_per_tx))
    schedule = []
    if min_sensing > 0:
        pair = _best_pair(coeffs)
        if pair is None:
            return _infeasible("structured", "no beam pair meets the worst-case SINR threshold")
        schedule += [SlotAssignment.shared(*pair)] * min_sensing
    schedule += [SlotAssignment.comm(b_comm)] * (n_slots - min_sensing)
    return _optimal(coeffs, schedule, "structured")


def _slot_options(coeffs: CoefficientTable):
    """Per-slot choices ordered shared, sense-only, comm, idle; infeasible sensing pairs dropped."""
    g, leak, noise = coeffs.sense_gain, coeffs.si_leak, coeffs.rx_noise
    opts = []
    pairs = [(b, c) for b in range(coeffs.n_tx) for c in range(coeffs.n_rx)
             if g[b, c] >= coeffs.robust_scale * leak[b, c] + coeffs.noise_scale * noise[c]]
    opts += [SlotAssignment.shared(b, c) for b, c in pairs]
    opts += [SlotAssignment.sense(b, c) for b, c in pairs]
    opts += [SlotAssignment.comm(b) for b in range(coeffs.n_tx)]
    opts.append(SlotAssignment.idle())
    return opts


def solve_bruteforce(
    coeffs: CoefficientTable, n_slots: int, min_sensing: int, cap: int = 10**8, chunk: int = 2**18
) -> Solution:
    """Exhaustive search over all schedules up to slot permutation.

    Slots are interchangeable, so each multiset of per-slot choices is visited
    once (sensing choices first). Raises EnumerationCapExceeded when the
    number of multisets exceeds ``cap``.
    """
    if min_sensing > n_slots:
        return _infeasible("brute_force", f"min_sensing={min_sensing} exceeds the {n_slots} available slots")
    opts = _slot_options(coeffs)
    n_opts = len(opts)
    total = math.comb(n_opts + n_slots - 1, n_slots)
    if total > cap:
        raise EnumerationCapExceeded(f"{total} schedules exceed the enumeration cap {cap}")

    value = np.array([coeffs.rate_per_tx[o.tx_index] if o.comm_on else 0.0 for o in opts])
    senses = np.array([o.sense_on for o in opts], dtype=int)

    best_val, best_key, best_combo = -np.inf, None, None
    combos = itertools.combinations_with_replacement(range(n_opts), n_slots)
    while True:
        block = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        block = block.reshape(-1, n_slots)
        n_sense = senses[block].sum(axis=1)
        vals = value[block].sum(axis=1)
        ok = n_sense >= min_sensing
        if not ok.any():
            continue
        vals = np.where(ok, vals, -np.inf)
        top = vals.max()
        if top < best_val:
            continue
        # among ties: fewest sensing slots, then first in lexicographic order
        cand = np.flatnonzero(vals == top)
        k = cand[np.argmin(n_sense[cand])]
        key = (-top, int(n_sense[k]))
        if best_key is None or key < best_key:
            best_val, best_key, best_combo = top, key, block[k]

    if best_combo is None:
        return _infeasible("brute_force", "no schedule satisfies the sensing requirements")
    return _optimal(coeffs, [opts[i] for i in best_combo], "brute_force")


class _BranchBound:
    def __init__(self, model: MilpModel, node_limit: int, tol: float):
        self.model = model
        self.ix = model.index
        self.S = model.n_slots
        self.T, self.R = model.coeffs.n_tx, model.coeffs.n_rx
        self.need_total = int(model.rhs[model.row_id("C13")])
        self.node_limit = node_limit
        self.tol = tol
        self.nodes = 0
        self.x = np.zeros(model.n_vars)
        self.best_val = -np.inf
        self.best = None
        self._read_model()

    def _read_model(self):
        """Slot values and beam-pair feasibility as encoded in the objective and the G1/G6 rows."""
        m, ix, T, R = self.model, self.ix, self.T, self.R
        A = m.A.tocsr()
        self.rate = np.empty((self.S, T))
        self.pair_ok = np.empty((self.S, T, R), dtype=bool)
        self.z_max = np.empty((self.S, T, R))
        b, c = np.meshgrid(np.arange(T), np.arange(R), indexing="ij")
        for s in range(self.S):
            self.rate[s] = m.objective[ix.delta(np.arange(T), s)]
            g1 = A[m.row_id(f"G1_s{s}")].toarray().ravel()
            g6 = A[m.row_id(f"G6_s{s}")].toarray().ravel()
            z_max = g1[ix.pi(b, c, s)] / -g1[ix.z(s)]
            z_min = (-g6[ix.pi(b, c, s)] - g6[ix.rho(c, s)] + m.rhs[m.row_id(f"G6_s{s}")]) / g6[ix.z(s)]
            self.pair_ok[s] = z_max >= z_min
            self.z_max[s] = z_max
        self.v_comm = self.rate.max(axis=1)
        shared = np.where(self.pair_ok, self.rate[:, :, None], -np.inf)
        self.v_shared = shared.reshape(self.S, -1).max(axis=1)
        self.tx_can_sense = self.pair_ok.any(axis=2)

    def future_bound(self, s: int, need: int) -> float:
        """Best value of slots s..S-1 when ``need`` of them must sense."""
        rest = range(s, self.S)
        if need > len(rest):
            return -np.inf
        base = sum(self.v_comm[k] for k in rest)
        if need <= 0:
            return base
        loss = sorted(self.v_comm[k] - self.v_shared[k] for k in rest)
        return base - sum(loss[:need])

    def _rank(self, tiebreak):
        """Sort key: larger bound first, bounds equal up to ``tol`` fall back to ``tiebreak``."""
        def cmp(a, b):
            if a[0] == b[0] or (
                np.isfinite(a[0]) and np.isfinite(b[0]) and abs(a[0] - b[0]) <= self.tol * max(1.0, abs(a[0]))
            ):
                return (tiebreak(a) > tiebreak(b)) - (tiebreak(a) < tiebreak(b))
            return -1 if a[0] > b[0] else 1
        return functools.cmp_to_key(cmp)

    def _tick(self):
        self.nodes += 1
        if self.nodes > self.node_limit:
            raise NodeLimitExceeded(f"branch-and-bound exceeded {self.node_limit} nodes")

    def _promising(self, bound: float) -> bool:
        if self.best is None:
            return bound > -np.inf
        return bound > self.best_val + self.tol * max(1.0, abs(self.best_val))

    def run(self):
        self.search(0, 0, 0.0, [])

    def search(self, s: int, sensed: int, value: float, schedule: list):
        if s == self.S:
            self._leaf(value, schedule)
            return
        need = self.need_total - sensed
        children = []
        for zeta in (1, 0):
            for kappa in (1, 0):
                if zeta:
                    slot_best = self.v_shared[s] if kappa else (0.0 if np.isfinite(self.v_shared[s]) else -np.inf)
                else:
                    slot_best = self.v_comm[s] if kappa else 0.0
                bound = value + slot_best + self.future_bound(s + 1, need - zeta)
                children.append((bound, zeta, kappa))
        # fewest sensing slots first unless sensing is still required
        order = {(1, 1): 0, (1, 0): 1, (0, 1): 2, (0, 0): 3} if need > 0 else \
                {(0, 1): 0, (0, 0): 1, (1, 1): 2, (1, 0): 3}
        children.sort(key=self._rank(lambda t: order[(t[1], t[2])]))
        for bound, zeta, kappa in children:
            if not self._promising(bound):
                continue
            self._tick()
            self.branch_tx(s, sensed, value, schedule, zeta, kappa, need)

    def branch_tx(self, s, sensed, value, schedule, zeta, kappa, need):
        if not (zeta or kappa):
            self.close_slot(s, sensed, value, schedule, SlotAssignment.idle())
            return
        rest = self.future_bound(s + 1, need - zeta)
        cands = []
        for b in range(self.T):
            if zeta and not self.tx_can_sense[s, b]:
                continue
            cands.append((value + (self.rate[s, b] if kappa else 0.0) + rest, b))
        cands.sort(key=self._rank(lambda t: t[1]))
        for bound, b in cands:
            if not self._promising(bound):
                continue
            self._tick()
            if not zeta:
                self.close_slot(s, sensed, value, schedule, SlotAssignment.comm(b))
                continue
            for c in range(self.R):
                if not self.pair_ok[s, b, c] or not self._promising(bound):
                    continue
                self._tick()
                slot = SlotAssignment(bool(kappa), True, b, c)
                self.close_slot(s, sensed, value, schedule, slot)

    def _write_slot(self, s: int, a: SlotAssignment):
        ix, x = self.ix, self.x
        x[ix.chi(np.arange(self.T), s)] = 0
        x[ix.delta(np.arange(self.T), s)] = 0
        x[ix.rho(np.arange(self.R), s)] = 0
        x[ix.pi(np.arange(self.T)[:, None], np.arange(self.R)[None, :], s)] = 0
        x[ix.kappa(s)], x[ix.zeta(s)] = float(a.comm_on), float(a.sense_on)
        x[ix.gamma(s)] = float(a.active)
        x[ix.z(s)] = 0.0
        if a.tx_index is not None:
            x[ix.chi(a.tx_index, s)] = 1
            x[ix.delta(a.tx_index, s)] = float(a.comm_on)
        if a.rx_index is not None:
            x[ix.rho(a.rx_index, s)] = 1
            x[ix.pi(a.tx_index, a.rx_index, s)] = 1
            x[ix.z(s)] = self.z_max[s, a.tx_index, a.rx_index]  # tightest z allowed by G1

    def close_slot(self, s, sensed, value, schedule, a: SlotAssignment):
        self._write_slot(s, a)
        if self.model.violated_rows(self.x, rows=self.model.rows_by_slot[s]):
            return
        gain = self.rate[s, a.tx_index] if a.comm_on else 0.0
        self.search(s + 1, sensed + int(a.sense_on), value + gain, schedule + [a])

    def _leaf(self, value, schedule):
        if self.model.violated_rows(self.x):
            return
        if self._promising(value):
            self.best_val, self.best = value, list(schedule)


def solve_branch_bound(model: MilpModel, node_limit: int = 10**7, tol: float = 1e-12) -> Solution:
    """Depth-first branch-and-bound on the binaries of ``model``.

    Branches per slot on (zeta, kappa), then the transmit codeword, then the
    receive codeword; delta, pi, gamma and z follow from the linearization
    rows. A node is pruned when its bound (fixed value plus the best the
    open slots can still earn under the remaining sensing requirement) does
    not beat the incumbent. Raises NodeLimitExceeded rather than returning a
    truncated answer.
    """
    bb = _BranchBound(model, node_limit, tol)
    bb.run()
    if bb.best is None:
        return _infeasible("branch_bound", "search tree exhausted without a feasible leaf", bb.nodes)
    return _optimal(model.coeffs, bb.best, "branch_bound", bb.nodes)


def certify(a: Solution, b: Solution, rel_tol: float = 1e-9) -> bool:
    """Objective-level agreement: same status and, when optimal, equal objectives."""
    if a.status != b.status:
        return False
    if a.status != OPTIMAL:
        return True
    return math.isclose(a.objective_bits, b.objective_bits, rel_tol=rel_tol, abs_tol=1e-9)
