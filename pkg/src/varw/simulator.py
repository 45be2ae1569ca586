"""Discrete village dynamics: stabilization and the single-loop evaluator.

`stabilize` runs the particle system to its absorbing state by toppling one
landlord notice at a time from a schedule of active houses; the abelian
property makes the final odometer and sleeper counts independent of the
schedule, which is exposed through interchangeable order policies.

`single_loop` evaluates the one-pass odometer map on the same stacks: given
a hypothetical jump count per village it routes all implied arrivals
through the taxi tickets, finds each visited house's terminal notice, and
reports the resulting outflux.  On a shared stack source the stabilizing
odometer is an exact integer fixed point of this map.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from heapq import heappop, heappush

import numpy as np

from .errors import AcceptanceCheckError, StepCapError, ValidationError
from .model import ModelParams, floor_counts, validate_model
from .stacks import GRAVEYARD, SLEEP

ORDER_POLICIES = ("fifo-house-queue", "village-round-robin", "lowest-index-first")
DEFAULT_STEP_CAP = 10**9


@dataclass(frozen=True, eq=False)
class DiscreteConfig:
    """House-level configuration of one village model at fixed n.

    Row x, column i-1 describes house (x, i): its particle count and, when
    it holds exactly one particle, whether that particle is asleep.
    """

    n: int
    counts: np.ndarray
    sleeping: np.ndarray

    @property
    def is_stable(self) -> bool:
        if np.any(self.counts > 1):
            return False
        return bool(np.all(self.sleeping[self.counts == 1]))

    def sleepers_per_village(self) -> np.ndarray:
        return np.sum(self.sleeping & (self.counts == 1), axis=1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class ConsumedCounters:
    """Instructions consumed per village during one stabilization."""

    airplane: np.ndarray
    taxi: np.ndarray
    landlord: np.ndarray


@dataclass(frozen=True, eq=False)
class SimResult:
    """Stabilization outputs: jump odometer, final sleepers, arrivals."""

    M_star: np.ndarray
    S_star: np.ndarray
    inflow: np.ndarray
    consumed: ConsumedCounters
    final_config: DiscreteConfig


@dataclass(frozen=True, eq=False)
class SingleLoopResult:
    """Single-loop evaluation: outflux Phi, sleeper functional S, and the
    inbound/active/quiet/jumped diagnostics they are assembled from."""

    Phi: np.ndarray
    S: np.ndarray
    I: np.ndarray
    A: np.ndarray
    Q: np.ndarray
    J: np.ndarray


def _init_state(params: ModelParams, n: int, src):
    """Flat mutable state after seeding sleepers and landing immigrants.

    Houses are packed as hid = x*(n+1) + i with i in 1..n, so hid order is
    exactly lexicographic (village, house) order.
    """
    V = params.num_villages
    W = n + 1
    floor_sigma = floor_counts(params.init_sleepers, n)
    floor_nu = floor_counts(params.init_actives, n)
    counts = [0] * (V * W)
    sleeping = bytearray(V * W)
    for x in range(V):
        base = x * W
        for i in range(1, int(floor_sigma[x]) + 1):
            counts[base + i] = 1
            sleeping[base + i] = 1
        k = int(floor_nu[x])
        if k:
            for i in src.taxi_prefix(x, k).tolist():
                hid = base + i
                counts[hid] += 1
                sleeping[hid] = 0
    return counts, sleeping, floor_sigma, floor_nu


def _to_config(n: int, V: int, counts, sleeping) -> DiscreteConfig:
    W = n + 1
    counts_arr = np.array(counts, dtype=np.int64).reshape(V, W)[:, 1:]
    sleep_arr = np.frombuffer(bytes(sleeping), dtype=np.uint8).reshape(V, W)[:, 1:] > 0
    return DiscreteConfig(n=n, counts=counts_arr, sleeping=sleep_arr)


def init_config(params: ModelParams, n: int, src) -> DiscreteConfig:
    """Initial configuration: one sleeper in each of the first floor(sigma*n)
    houses, then floor(nu*n) immigrants landed by taxi ticket, waking any
    sleeper they hit."""
    validate_model(params)
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n!r}")
    counts, sleeping, _, _ = _init_state(params, n, src)
    return _to_config(n, params.num_villages, counts, sleeping)


class _FifoSchedule:
    """One global FIFO over active houses."""

    def __init__(self):
        self._q = deque()

    def push(self, hid: int) -> None:
        self._q.append(hid)

    def pop(self) -> int:
        return self._q.popleft() if self._q else -1


class _LowestIndexSchedule:
    """Always topples the lexicographically smallest active house."""

    def __init__(self):
        self._heap = []

    def push(self, hid: int) -> None:
        heappush(self._heap, hid)

    def pop(self) -> int:
        return heappop(self._heap) if self._heap else -1


class _RoundRobinSchedule:
    """Cycles the villages, toppling one house from each non-empty one."""

    def __init__(self, num_villages: int, width: int):
        self._queues = [deque() for _ in range(num_villages)]
        self._width = width
        self._cursor = -1  # first pop starts the cycle at village 0
        self._size = 0

    def push(self, hid: int) -> None:
        self._queues[hid // self._width].append(hid)
        self._size += 1

    def pop(self) -> int:
        if self._size == 0:
            return -1
        V = len(self._queues)
        c = self._cursor
        for off in range(1, V + 1):
            x = (c + off) % V
            if self._queues[x]:
                self._cursor = x
                self._size -= 1
                return self._queues[x].popleft()
        return -1


def _make_schedule(order_policy: str, V: int, W: int):
    if order_policy == "fifo-house-queue":
        return _FifoSchedule()
    if order_policy == "lowest-index-first":
        return _LowestIndexSchedule()
    if order_policy == "village-round-robin":
        return _RoundRobinSchedule(V, W)
    raise ValidationError(
        f"unknown order policy {order_policy!r}; choose one of {ORDER_POLICIES}"
    )


def stabilize(
    params: ModelParams,
    n: int,
    src,
    order_policy: str = "fifo-house-queue",
    step_cap: int = DEFAULT_STEP_CAP,
) -> SimResult:
    """Run the particle system to its stable configuration.

    Each schedule slot reveals exactly one landlord notice for the selected
    active house.  SLEEP puts a lone particle to sleep and is a consumed
    no-op in a multi-particle house; JUMP sends one particle through the
    next airplane ticket (removal on GRAVEYARD) and, on arrival, the
    destination village's next taxi ticket.  Raises StepCapError once more
    than `step_cap` instructions have been executed.
    """
    validate_model(params)
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n!r}")
    V = params.num_villages
    W = n + 1
    counts, sleeping, floor_sigma, floor_nu = _init_state(params, n, src)
    schedule = _make_schedule(order_policy, V, W)

    in_queue = bytearray(V * W)
    for hid in range(V * W):
        c = counts[hid]
        if c >= 2 or (c == 1 and not sleeping[hid]):
            schedule.push(hid)
            in_queue[hid] = 1

    M_star = [0] * V
    inflow = [int(v) for v in floor_nu]
    taxi_next = [int(v) + 1 for v in floor_nu]
    air_next = [1] * V
    landlord_used = [0] * V
    ll_next: dict[int, int] = {}
    steps = 0

    landlord = src.landlord
    airplane = src.airplane
    taxi = src.taxi
    push = schedule.push
    pop = schedule.pop

    while True:
        hid = pop()
        if hid < 0:
            break
        in_queue[hid] = 0
        x = hid // W
        jn = ll_next.get(hid, 1)
        ll_next[hid] = jn + 1
        notice = landlord(x, hid - x * W, jn)
        landlord_used[x] += 1
        steps += 1
        c = counts[hid]
        if notice == SLEEP:
            if c == 1:
                sleeping[hid] = 1
            else:
                push(hid)
                in_queue[hid] = 1
        else:
            counts[hid] = c - 1
            M_star[x] += 1
            aj = air_next[x]
            air_next[x] = aj + 1
            dest = airplane(x, aj)
            steps += 1
            if c > 1:
                push(hid)
                in_queue[hid] = 1
            if dest != GRAVEYARD:
                tj = taxi_next[dest]
                taxi_next[dest] = tj + 1
                house = taxi(dest, tj)
                steps += 1
                inflow[dest] += 1
                hid2 = dest * W + house
                c2 = counts[hid2]
                counts[hid2] = c2 + 1
                if sleeping[hid2]:
                    sleeping[hid2] = 0
                if not in_queue[hid2]:
                    push(hid2)
                    in_queue[hid2] = 1
        if steps > step_cap:
            raise StepCapError(
                f"stabilization exceeded the {step_cap} instruction guard; "
                "input is runaway or the kernel is effectively stochastic"
            )

    final = _to_config(n, V, counts, sleeping)
    S_star = final.sleepers_per_village()
    M_arr = np.array(M_star, dtype=np.int64)
    inflow_arr = np.array(inflow, dtype=np.int64)

    if not final.is_stable:
        raise AcceptanceCheckError("stabilization ended in a non-stable configuration")
    balance = floor_sigma + inflow_arr - M_arr
    if not np.array_equal(S_star, balance):
        raise AcceptanceCheckError(
            f"mass balance violated: S*={S_star.tolist()} but "
            f"floor(sigma n)+inflow-M*={balance.tolist()}"
        )

    consumed = ConsumedCounters(
        airplane=np.array([v - 1 for v in air_next], dtype=np.int64),
        taxi=np.array([v - 1 for v in taxi_next], dtype=np.int64),
        landlord=np.array(landlord_used, dtype=np.int64),
    )
    return SimResult(
        M_star=M_arr, S_star=S_star, inflow=inflow_arr, consumed=consumed, final_config=final
    )


def _check_odometer(params: ModelParams, M) -> np.ndarray:
    M = np.asarray(M)
    if M.shape != (params.num_villages,):
        raise ValidationError(f"M has shape {M.shape}, expected ({params.num_villages},)")
    if np.issubdtype(M.dtype, np.floating):
        if not np.all(M == np.floor(M)):
            raise ValidationError("M must be integer-valued")
    elif not np.issubdtype(M.dtype, np.integer):
        raise ValidationError(f"M must be an integer vector, got dtype {M.dtype}")
    M = M.astype(np.int64)
    if np.any(M < 0):
        raise ValidationError("M must be componentwise >= 0")
    return M


def _loop_inbound(params: ModelParams, n: int, src, M: np.ndarray):
    """Shared inbound phase: arrival counts, visited houses, through-traffic.

    Returns (floor_sigma, I, A, Q, visited, traffic) where visited[x] is the
    sorted array of houses of village x that received at least one arrival
    and traffic[x] the matching total particle count (arrivals plus any
    initial sleeper).
    """
    V = params.num_villages
    floor_sigma = floor_counts(params.init_sleepers, n)
    floor_nu = floor_counts(params.init_actives, n)
    I = floor_nu.copy()
    for y in range(V):
        m_y = int(M[y])
        if m_y:
            dests = src.airplane_prefix(y, m_y)
            dests = dests[dests != GRAVEYARD]
            if dests.size:
                I += np.bincount(dests, minlength=V).astype(np.int64)
    A = np.zeros(V, dtype=np.int64)
    Q = np.zeros(V, dtype=np.int64)
    visited: list[np.ndarray] = []
    traffic: list[np.ndarray] = []
    for x in range(V):
        u = int(I[x])
        sc = int(floor_sigma[x])
        if u:
            hits = np.bincount(src.taxi_prefix(x, u), minlength=n + 1)
            houses = np.flatnonzero(hits[1:]) + 1
            A[x] = houses.size
            Q[x] = sc - int(np.count_nonzero(hits[1 : sc + 1]))
            T = hits[houses] + (houses <= sc)
        else:
            houses = np.empty(0, dtype=np.int64)
            T = np.empty(0, dtype=np.int64)
            Q[x] = sc
        visited.append(houses)
        traffic.append(T.astype(np.int64))
    return floor_sigma, I, A, Q, visited, traffic


def _terminal_notices(src, x: int, houses: np.ndarray, jumps_needed: np.ndarray):
    """For each house, scan its landlord stack past `jumps_needed` JUMPs and
    return (terminal notice value, number of notices revealed)."""
    m = houses.shape[0]
    remaining = jumps_needed.astype(np.int64, copy=True)
    result = np.zeros(m, dtype=np.uint8)
    revealed = np.zeros(m, dtype=np.int64)
    alive = np.arange(m)
    j = 1
    while alive.size:
        draws = src.landlord_batch(x, houses[alive], j)
        done = remaining[alive] == 0
        hit = alive[done]
        result[hit] = draws[done]
        revealed[hit] = j
        keep = alive[~done]
        remaining[keep] -= draws[~done].astype(np.int64)
        alive = keep
        j += 1
    return result, revealed


def single_loop(params: ModelParams, n: int, src, M) -> SingleLoopResult:
    """Evaluate the one-pass odometer map at input odometer M.

    All outputs are exact integer counts; on the stack source used by a
    completed stabilization, single_loop(M_star) returns M_star and S_star.
    """
    validate_model(params)
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n!r}")
    M = _check_odometer(params, M)
    floor_sigma, I, A, Q, visited, traffic = _loop_inbound(params, n, src, M)
    V = params.num_villages
    J = np.zeros(V, dtype=np.int64)
    for x in range(V):
        houses = visited[x]
        if houses.size:
            last, revealed = _terminal_notices(src, x, houses, traffic[x] - 1)
            J[x] = int(last.sum(dtype=np.int64))
            src.record_landlord_served(x, houses, revealed)
    Phi = floor_sigma - Q + I - A + J
    S = -M + floor_sigma + I
    return SingleLoopResult(Phi=Phi, S=S, I=I, A=A, Q=Q, J=J)


def single_loop_tilde(params: ModelParams, n: int, src, M, aux_seed: int) -> np.ndarray:
    """Single-loop outflux with the terminal notices resampled.

    Identical inbound phase, but each visited house's terminal notice is
    replaced by a fresh Bernoulli(1/(1+lambda_x)) draw seeded by `aux_seed`,
    independent of the landlord stacks.  Returns the outflux vector only.
    """
    validate_model(params)
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n!r}")
    M = _check_odometer(params, M)
    floor_sigma, I, A, Q, visited, _ = _loop_inbound(params, n, src, M)
    V = params.num_villages
    rng = np.random.default_rng(aux_seed)
    p_jump = 1.0 / (1.0 + params.sleep_rates)
    J = np.zeros(V, dtype=np.int64)
    for x in range(V):
        fresh = rng.random(n) < p_jump[x]
        houses = visited[x]
        if houses.size:
            J[x] = int(fresh[houses - 1].sum(dtype=np.int64))
    return floor_sigma - Q + I - A + J


def expected_outflux_given_influx(params: ModelParams, x: int, n: int, u: int) -> float:
    """Exact conditional mean of the single-loop outflux of village x given
    that u particles arrived there."""
    lam = float(params.sleep_rates[x])
    sc = float(floor_counts(params.init_sleepers, n)[x])
    visited_frac = 1.0 - (1.0 - 1.0 / n) ** u
    return n * (sc / n - lam / (1.0 + lam)) * visited_frac + u
