"""Exact solver for the reactor on/off scheduling problem.

Objective: sum over the horizon of |level - target| plus a switching weight
times the number of on/off transitions. Hard constraints: minimum up/down
times for runs started inside the window (runs inherited from before the
window are exempt) and optional hard level bounds on the unclamped level
recursion.

Two exact engines sit behind ``solve_exact``: depth-first branch and bound
with an admissible reachable-level relaxation bound (small instances, any
rates), and a dynamic program over (step, reactor statuses, cumulative
throughput) used when rates share a fine integer unit (long horizons). A
chunk-vectorized brute force serves as the testing oracle, and a hysteresis
deadband policy stands in for manual operation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BudgetError,
    DimensionError,
    DomainError,
    InfeasibleError,
    SizeError,
)
from .twin import ReactorSpec, TimeGrid, validate_reactor_specs

_TIE_EPS = 1e-12
_LEVEL_EPS = 1e-9

DEFAULT_MAX_VARIABLES = 96
BRUTE_FORCE_MAX_VARIABLES = 24
_DP_MAX_CELLS = 4_000_000


@dataclass(frozen=True)
class ScheduleProblem:
    grid: TimeGrid
    reactors: tuple[ReactorSpec, ...]
    initial_status: tuple[bool, ...]
    initial_level_pct: float
    target_level_pct: float
    inflow_forecast_pct: tuple[float, ...]
    omega: float
    level_bounds: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        validate_reactor_specs(self.reactors)
        if len(self.initial_status) != len(self.reactors):
            raise DimensionError("initial_status length != reactor count")
        if len(self.inflow_forecast_pct) != self.grid.horizon_steps:
            raise DimensionError(
                f"inflow forecast length {len(self.inflow_forecast_pct)} != horizon "
                f"{self.grid.horizon_steps}"
            )
        if not 0.0 <= self.target_level_pct <= 100.0:
            raise DomainError("target level must be in [0, 100]")
        if self.omega < 0:
            raise DomainError("omega must be non-negative")
        if any(f < 0 for f in self.inflow_forecast_pct):
            raise DomainError("inflows must be non-negative")
        if self.level_bounds is not None and self.level_bounds[0] > self.level_bounds[1]:
            raise DomainError("level_bounds lo > hi")

    @property
    def horizon(self) -> int:
        return self.grid.horizon_steps

    @property
    def n_reactors(self) -> int:
        return len(self.reactors)

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(r.rate_pct_per_step for r in self.reactors)


@dataclass(frozen=True)
class Schedule:
    """Binary decision matrix indexed [reactor][step]."""

    x: tuple[tuple[bool, ...], ...]

    @classmethod
    def from_matrix(cls, matrix: Iterable[Iterable[int | bool]]) -> "Schedule":
        return cls(tuple(tuple(bool(v) for v in row) for row in matrix))

    @property
    def n_reactors(self) -> int:
        return len(self.x)

    @property
    def horizon(self) -> int:
        return len(self.x[0]) if self.x else 0

    def flattened(self) -> tuple[bool, ...]:
        """Row-major (reactor-major) key used for deterministic tie-breaks."""
        return tuple(v for row in self.x for v in row)

    def to_lists(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.x]


@dataclass(frozen=True)
class ScheduleSolution:
    schedule: Schedule
    objective: float
    deviation_sum: float
    switch_count: int
    omega_used: float
    optimal: bool
    nodes_explored: int


@dataclass(frozen=True)
class HysteresisPolicy:
    on_above_pct: float
    off_below_pct: float

    def __post_init__(self) -> None:
        if self.on_above_pct < self.off_below_pct:
            raise DomainError("on_above_pct must be >= off_below_pct")


def levels(problem: ScheduleProblem, schedule: Schedule) -> list[float]:
    """Unclamped level recursion L_0..L_T."""
    out = [problem.initial_level_pct]
    rates = problem.rates
    for t in range(problem.horizon):
        throughput = sum(
            rate for rate, row in zip(rates, schedule.x) if row[t]
        )
        out.append(out[-1] + problem.inflow_forecast_pct[t] - throughput)
    return out


def objective_value(problem: ScheduleProblem, schedule: Schedule) -> ScheduleSolution:
    """Evaluate a schedule: deviation sum over t=0..T plus weighted switches."""
    _check_dims(problem, schedule)
    lv = levels(problem, schedule)
    deviation = 0.0
    for value in lv:
        deviation += abs(value - problem.target_level_pct)
    switches = 0
    for r in range(problem.n_reactors):
        prev = problem.initial_status[r]
        for t in range(problem.horizon):
            if schedule.x[r][t] != prev:
                switches += 1
            prev = schedule.x[r][t]
    return ScheduleSolution(
        schedule=schedule,
        objective=deviation + problem.omega * switches,
        deviation_sum=deviation,
        switch_count=switches,
        omega_used=problem.omega,
        optimal=False,
        nodes_explored=0,
    )


def _check_dims(problem: ScheduleProblem, schedule: Schedule) -> None:
    if schedule.n_reactors != problem.n_reactors or any(
        len(row) != problem.horizon for row in schedule.x
    ):
        raise DimensionError(
            f"schedule is {schedule.n_reactors}x{schedule.horizon}, problem needs "
            f"{problem.n_reactors}x{problem.horizon}"
        )


def schedule_feasible(problem: ScheduleProblem, schedule: Schedule) -> bool:
    """Min-up/down (in-window runs must complete) and hard level bounds."""
    _check_dims(problem, schedule)
    T = problem.horizon
    for r, spec in enumerate(problem.reactors):
        prev = problem.initial_status[r]
        deficit = 0
        for t in range(T):
            cur = schedule.x[r][t]
            if cur != prev:
                if deficit > 0:
                    return False
                need = spec.min_up_steps if cur else spec.min_down_steps
                if t + need > T:
                    return False
                deficit = max(0, need - 1)
            else:
                deficit = max(0, deficit - 1)
            prev = cur
    if problem.level_bounds is not None:
        lo, hi = problem.level_bounds
        for value in levels(problem, schedule)[1:]:
            if value < lo - _LEVEL_EPS or value > hi + _LEVEL_EPS:
                return False
    return True


def _better(obj: float, key: tuple, best_obj: float, best_key: tuple | None) -> bool:
    if obj < best_obj:
        return True
    return obj == best_obj and (best_key is None or key < best_key)


# ---------------------------------------------------------------------------
# Brute force oracle


def brute_force(problem: ScheduleProblem) -> ScheduleSolution:
    """Exhaustively score all 2^(R*T) schedules (chunked, vectorized)."""
    R, T = problem.n_reactors, problem.horizon
    n_vars = R * T
    if n_vars > BRUTE_FORCE_MAX_VARIABLES:
        raise SizeError(
            f"brute force capped at {BRUTE_FORCE_MAX_VARIABLES} variables, got {n_vars}"
        )
    total = 1 << n_vars
    rates = np.array(problem.rates)
    inflows = np.array(problem.inflow_forecast_pct)
    target = problem.target_level_pct

    best_obj = math.inf
    best_key: tuple | None = None
    best_sched: Schedule | None = None
    chunk = 1 << 18
    # float32 pre-filter; conservative window, exact re-scoring below
    window = 0.05
    rates32 = rates.astype(np.float32)
    inflows32 = inflows.astype(np.float32)
    # bit i of the schedule index is reactor r = i // T, step t = i % T, with
    # bit 0 the most significant position of the row-major key so that
    # ascending index enumerates ascending keys
    shifts = np.arange(n_vars - 1, -1, -1, dtype=np.uint64)
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        codes = np.arange(start, stop, dtype=np.uint64)
        bits = ((codes[:, None] >> shifts[None, :]) & 1).astype(np.float32)
        x = bits.reshape(-1, R, T)
        throughput = np.einsum("nrt,r->nt", x, rates32)
        lv = np.float32(problem.initial_level_pct) + np.cumsum(
            inflows32[None, :] - throughput, axis=1
        )
        dev = np.abs(lv - np.float32(target)).sum(axis=1) + abs(
            problem.initial_level_pct - target
        )
        switches = np.abs(
            x[:, :, 0] - np.array(problem.initial_status, dtype=np.float32)
        ).sum(axis=1)
        switches += np.abs(np.diff(x, axis=2)).sum(axis=(1, 2))
        obj = dev + problem.omega * switches

        feasible = _feasible_mask(problem, x)
        if problem.level_bounds is not None:
            lo, hi = problem.level_bounds
            feasible &= np.all(
                (lv >= lo - _LEVEL_EPS) & (lv <= hi + _LEVEL_EPS), axis=1
            )
        if not feasible.any():
            continue
        obj_masked = np.where(feasible, obj, np.inf)
        chunk_min = float(obj_masked.min())
        if chunk_min > best_obj + window:
            continue
        # re-evaluate near-minimal candidates exactly for min and tie-break
        for idx in np.nonzero(obj_masked <= min(best_obj, chunk_min) + window)[0]:
            sched = Schedule.from_matrix(x[idx].astype(int))
            sol = objective_value(problem, sched)
            key = sched.flattened()
            if _better(sol.objective, key, best_obj, best_key):
                best_obj = sol.objective
                best_key = key
                best_sched = sched
    if best_sched is None:
        raise InfeasibleError("no feasible schedule under the hard constraints")
    final = objective_value(problem, best_sched)
    return ScheduleSolution(
        schedule=best_sched,
        objective=final.objective,
        deviation_sum=final.deviation_sum,
        switch_count=final.switch_count,
        omega_used=problem.omega,
        optimal=True,
        nodes_explored=total,
    )


def _feasible_mask(problem: ScheduleProblem, x: np.ndarray) -> np.ndarray:
    """Vectorized min-up/down check for a batch of schedules (n, R, T)."""
    n, R, T = x.shape
    ok = np.ones(n, dtype=bool)
    if all(
        spec.min_up_steps <= 1 and spec.min_down_steps <= 1
        for spec in problem.reactors
    ):
        return ok  # need <= 1 never restricts a switch
    for r, spec in enumerate(problem.reactors):
        prev = np.full(n, float(problem.initial_status[r]))
        deficit = np.zeros(n)
        for t in range(T):
            cur = x[:, r, t]
            switched = cur != prev
            ok &= ~(switched & (deficit > 0))
            need = np.where(cur > 0, spec.min_up_steps, spec.min_down_steps)
            ok &= ~(switched & (t + need > T))
            deficit = np.where(switched, np.maximum(0, need - 1), np.maximum(0, deficit - 1))
            prev = cur
    return ok


# ---------------------------------------------------------------------------
# Branch and bound


def _future_deviation_bound(
    t: int,
    level: float,
    problem: ScheduleProblem,
    prefix_inflow: Sequence[float],
    max_rate_sum: float,
) -> float:
    """Admissible bound on sum of z_s for s > t: per-step reachable-level gap."""
    target = problem.target_level_pct
    T = problem.horizon
    bound = 0.0
    for s in range(t + 1, T + 1):
        gain = prefix_inflow[s] - prefix_inflow[t]
        hi = level + gain
        lo = hi - max_rate_sum * (s - t)
        if target > hi:
            bound += target - hi
        elif target < lo:
            bound += lo - target
    return bound


def _heuristic_schedules(problem: ScheduleProblem) -> list[Schedule]:
    """Candidate incumbents: keep status, all off, greedy tracking, hysteresis."""
    R, T = problem.n_reactors, problem.horizon
    candidates = [
        Schedule.from_matrix([[problem.initial_status[r]] * T for r in range(R)]),
        Schedule.from_matrix([[False] * T for _ in range(R)]),
        _greedy_tracking(problem),
    ]
    deadband = max(5.0, max(problem.rates))
    candidates.append(
        hysteresis_baseline(
            problem,
            HysteresisPolicy(
                on_above_pct=problem.target_level_pct + deadband,
                off_below_pct=problem.target_level_pct - deadband,
            ),
        )
    )
    return candidates


def _greedy_tracking(problem: ScheduleProblem) -> Schedule:
    """Myopic minimizer of next-step deviation plus switch cost."""
    R, T = problem.n_reactors, problem.horizon
    rates = problem.rates
    x = [[False] * T for _ in range(R)]
    status = list(problem.initial_status)
    deficit = [0] * R
    level = problem.initial_level_pct
    for t in range(T):
        best = None
        for code in range(1 << R):
            d = [(code >> r) & 1 == 1 for r in range(R)]
            cost_sw = 0
            valid = True
            for r, spec in enumerate(problem.reactors):
                if d[r] != status[r]:
                    need = spec.min_up_steps if d[r] else spec.min_down_steps
                    if deficit[r] > 0 or t + need > T:
                        valid = False
                        break
                    cost_sw += 1
            if not valid:
                continue
            nxt = level + problem.inflow_forecast_pct[t] - sum(
                rate for rate, on in zip(rates, d) if on
            )
            cost = abs(nxt - problem.target_level_pct) + problem.omega * cost_sw
            if best is None or cost < best[0]:
                best = (cost, code, d, nxt)
        _, _, d, nxt = best
        for r, spec in enumerate(problem.reactors):
            if d[r] != status[r]:
                need = spec.min_up_steps if d[r] else spec.min_down_steps
                deficit[r] = max(0, need - 1)
            else:
                deficit[r] = max(0, deficit[r] - 1)
            status[r] = d[r]
            x[r][t] = d[r]
        level = nxt
    return Schedule.from_matrix(x)


def _solve_bnb(
    problem: ScheduleProblem, node_budget: int | None
) -> ScheduleSolution:
    R, T = problem.n_reactors, problem.horizon
    rates = problem.rates
    omega = problem.omega
    target = problem.target_level_pct
    bounds = problem.level_bounds
    max_rate_sum = sum(rates)
    prefix_inflow = [0.0] * (T + 1)
    for t in range(T):
        prefix_inflow[t + 1] = prefix_inflow[t] + problem.inflow_forecast_pct[t]

    best_obj = math.inf
    best_key: tuple | None = None
    best_sched: Schedule | None = None
    for cand in _heuristic_schedules(problem):
        if schedule_feasible(problem, cand):
            sol = objective_value(problem, cand)
            key = cand.flattened()
            if _better(sol.objective, key, best_obj, best_key):
                best_obj, best_key, best_sched = sol.objective, key, cand

    x = [[False] * T for _ in range(R)]
    status = list(problem.initial_status)
    nodes = 0
    budget_hit = False

    def recurse(t: int, level: float, dev: float, switches: int, deficit: list[int]) -> None:
        nonlocal best_obj, best_key, best_sched, nodes, budget_hit
        if budget_hit:
            return
        if t == T:
            obj = dev + omega * switches
            sched = Schedule.from_matrix([row[:] for row in x])
            key = sched.flattened()
            if _better(obj, key, best_obj, best_key):
                best_obj, best_key, best_sched = obj, key, sched
            return

        moves = []
        for code in range(1 << R):
            d = [(code >> r) & 1 == 1 for r in range(R)]
            sw = 0
            valid = True
            for r, spec in enumerate(problem.reactors):
                if d[r] != status[r]:
                    need = spec.min_up_steps if d[r] else spec.min_down_steps
                    if deficit[r] > 0 or t + need > T:
                        valid = False
                        break
                    sw += 1
            if not valid:
                continue
            nxt = level + problem.inflow_forecast_pct[t] - sum(
                rate for rate, on in zip(rates, d) if on
            )
            if bounds is not None and (
                nxt < bounds[0] - _LEVEL_EPS or nxt > bounds[1] + _LEVEL_EPS
            ):
                continue
            z = abs(nxt - target)
            moves.append((z + omega * sw, code, d, sw, nxt, z))
        moves.sort(key=lambda m: (m[0], m[1]))

        for _, code, d, sw, nxt, z in moves:
            nodes += 1
            if node_budget is not None and nodes > node_budget:
                budget_hit = True
                return
            new_dev = dev + z
            new_switches = switches + sw
            partial = new_dev + omega * new_switches
            if partial + _future_deviation_bound(
                t + 1, nxt, problem, prefix_inflow, max_rate_sum
            ) > best_obj + _TIE_EPS:
                continue
            old_status = status[:]
            old_deficit = deficit[:]
            for r, spec in enumerate(problem.reactors):
                x[r][t] = d[r]
                if d[r] != status[r]:
                    need = spec.min_up_steps if d[r] else spec.min_down_steps
                    deficit[r] = max(0, need - 1)
                else:
                    deficit[r] = max(0, deficit[r] - 1)
                status[r] = d[r]
            recurse(t + 1, nxt, new_dev, new_switches, deficit)
            status[:] = old_status
            deficit[:] = old_deficit
            if budget_hit:
                return

    dev0 = abs(problem.initial_level_pct - target)
    recurse(0, problem.initial_level_pct, dev0, 0, [0] * R)

    if best_sched is None:
        if budget_hit:
            raise BudgetError(
                f"node budget {node_budget} exhausted with no feasible incumbent"
            )
        raise InfeasibleError("no feasible schedule under the hard constraints")
    final = objective_value(problem, best_sched)
    return ScheduleSolution(
        schedule=best_sched,
        objective=final.objective,
        deviation_sum=final.deviation_sum,
        switch_count=final.switch_count,
        omega_used=omega,
        optimal=not budget_hit,
        nodes_explored=nodes,
    )


# ---------------------------------------------------------------------------
# Dynamic program over (step, statuses, cumulative throughput)


def _integer_units(rates: Sequence[float]) -> tuple[int, ...] | None:
    """Express rates as multiples of a common unit, or None if not integral."""
    for scale in (1, 10, 100, 1000):
        scaled = [rate * scale for rate in rates]
        ints = [round(s) for s in scaled]
        if all(abs(s - i) < 1e-9 and i > 0 for s, i in zip(scaled, ints)):
            g = math.gcd(*ints) if len(ints) > 1 else ints[0]
            return tuple(i // g for i in ints)
    return None


def _dp_applicable(problem: ScheduleProblem) -> bool:
    units = _integer_units(problem.rates)
    if units is None:
        return False
    n_tau = sum(units) * problem.horizon + 1
    n_status = 1
    for spec in problem.reactors:
        n_status *= max(1, spec.min_down_steps) + max(1, spec.min_up_steps)
    return n_status * n_tau <= _DP_MAX_CELLS


def _solve_dp(problem: ScheduleProblem) -> ScheduleSolution:
    R, T = problem.n_reactors, problem.horizon
    units = _integer_units(problem.rates)
    unit_pct = problem.rates[0] / units[0]
    omega = problem.omega
    target = problem.target_level_pct

    # per-reactor status atoms: (running, deficit)
    atoms: list[list[tuple[bool, int]]] = []
    for spec in problem.reactors:
        states = [(False, d) for d in range(max(1, spec.min_down_steps))]
        states += [(True, d) for d in range(max(1, spec.min_up_steps))]
        atoms.append(states)
    radix = [len(a) for a in atoms]
    n_status = int(np.prod(radix))

    def encode(parts: Sequence[tuple[bool, int]]) -> int:
        code = 0
        for r in range(R):
            code = code * radix[r] + atoms[r].index(parts[r])
        return code

    def decode(code: int) -> list[tuple[bool, int]]:
        parts = [None] * R
        for r in range(R - 1, -1, -1):
            code, i = divmod(code, radix[r])
            parts[r] = atoms[r][i]
        return parts

    # transition table: (status, decision code) -> (new status, switches,
    # tau offset, latest step at which the move is allowed)
    transitions: list[list[tuple[int, int, int, int] | None]] = []
    for s in range(n_status):
        parts = decode(s)
        row: list[tuple[int, int, int, int] | None] = []
        for dcode in range(1 << R):
            d = [(dcode >> r) & 1 == 1 for r in range(R)]
            new_parts = []
            switches = 0
            off = 0
            latest = T - 1
            valid = True
            for r, spec in enumerate(problem.reactors):
                running, deficit = parts[r]
                if d[r]:
                    off += units[r]
                if d[r] == running:
                    new_parts.append((running, max(0, deficit - 1)))
                else:
                    if deficit > 0:
                        valid = False
                        break
                    need = spec.min_up_steps if d[r] else spec.min_down_steps
                    latest = min(latest, T - need)
                    new_parts.append((d[r], max(0, need - 1)))
                    switches += 1
            row.append((encode(new_parts), switches, off, latest) if valid else None)
        transitions.append(row)

    n_tau = sum(units) * T + 1
    tau_pct = np.arange(n_tau) * unit_pct
    prefix = np.concatenate([[0.0], np.cumsum(problem.inflow_forecast_pct)])

    INF = np.inf
    value = np.full((n_status, n_tau), INF)
    start_parts = [(bool(problem.initial_status[r]), 0) for r in range(R)]
    value[encode(start_parts), 0] = 0.0
    back: list[np.ndarray] = []

    for t in range(T):
        lv = problem.initial_level_pct + prefix[t + 1] - tau_pct
        z = np.abs(lv - target)
        if problem.level_bounds is not None:
            lo, hi = problem.level_bounds
            z = np.where((lv < lo - _LEVEL_EPS) | (lv > hi + _LEVEL_EPS), INF, z)
        new_value = np.full((n_status, n_tau), INF)
        bp = np.zeros((n_status, n_tau), dtype=np.uint16)
        for s in range(n_status):
            src = value[s]
            if not np.isfinite(src).any():
                continue
            for dcode in range(1 << R):
                tr = transitions[s][dcode]
                if tr is None:
                    continue
                s2, switches, off, latest = tr
                if t > latest:
                    continue
                cand = src[: n_tau - off] + omega * switches
                dest = new_value[s2, off:]
                better = cand < dest
                if better.any():
                    dest[better] = cand[better]
                    bp[s2, off:][better] = s * (1 << R) + dcode
        new_value += z[None, :]
        value = new_value
        back.append(bp)

    # only statuses whose in-window runs are complete may terminate
    final_ok = np.array(
        [all(p[1] == 0 for p in decode(s)) for s in range(n_status)]
    )
    masked = np.where(final_ok[:, None], value, INF)
    if not np.isfinite(masked).any():
        raise InfeasibleError("no feasible schedule under the hard constraints")
    flat = int(np.argmin(masked))
    s_cur, tau_cur = divmod(flat, n_tau)

    x = [[False] * T for _ in range(R)]
    for t in range(T - 1, -1, -1):
        code = int(back[t][s_cur, tau_cur])
        s_prev, dcode = divmod(code, 1 << R)
        off = 0
        for r in range(R):
            on = (dcode >> r) & 1 == 1
            x[r][t] = on
            if on:
                off += units[r]
        s_cur, tau_cur = s_prev, tau_cur - off

    sched = Schedule.from_matrix(x)
    final = objective_value(problem, sched)
    explored = int(np.isfinite(value).sum()) + n_status * n_tau * T
    return ScheduleSolution(
        schedule=sched,
        objective=final.objective,
        deviation_sum=final.deviation_sum,
        switch_count=final.switch_count,
        omega_used=omega,
        optimal=True,
        nodes_explored=explored,
    )


def solve_exact(
    problem: ScheduleProblem,
    node_budget: int | None = None,
    max_variables: int = DEFAULT_MAX_VARIABLES,
) -> ScheduleSolution:
    """Provably optimal schedule (optimal=True) or best incumbent on budget.

    Dispatches to branch and bound for small instances and to the exact DP
    when the horizon is long and the rates share an integer unit.
    """
    n_vars = problem.n_reactors * problem.horizon
    if n_vars > max_variables:
        raise SizeError(
            f"{n_vars} decision variables exceeds the configured maximum {max_variables}"
        )
    if n_vars > BRUTE_FORCE_MAX_VARIABLES and _dp_applicable(problem):
        return _solve_dp(problem)
    return _solve_bnb(problem, node_budget)


def hysteresis_baseline(
    problem: ScheduleProblem, policy: HysteresisPolicy
) -> Schedule:
    """Deadband controller standing in for manual operation.

    Projects the level one step ahead under current statuses, then toggles
    reactors in id order: ON above the upper band (respecting min-down and
    in-window run completion), OFF below the lower band (respecting min-up).
    """
    R, T = problem.n_reactors, problem.horizon
    rates = problem.rates
    x = [[False] * T for _ in range(R)]
    status = list(problem.initial_status)
    deficit = [0] * R
    level = problem.initial_level_pct
    for t in range(T):
        projected = level + problem.inflow_forecast_pct[t] - sum(
            rate for rate, on in zip(rates, status) if on
        )
        for r, spec in enumerate(problem.reactors):
            if (
                projected > policy.on_above_pct
                and not status[r]
                and deficit[r] == 0
                and t + spec.min_up_steps <= T
            ):
                status[r] = True
                deficit[r] = spec.min_up_steps  # decremented below
                projected -= rates[r]
            elif (
                projected < policy.off_below_pct
                and status[r]
                and deficit[r] == 0
                and t + spec.min_down_steps <= T
            ):
                status[r] = False
                deficit[r] = spec.min_down_steps
                projected += rates[r]
        for r in range(R):
            x[r][t] = status[r]
            deficit[r] = max(0, deficit[r] - 1)
        level = projected
    return Schedule.from_matrix(x)
