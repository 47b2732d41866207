"""Seeded trajectories, occupation measures and convergence diagnostics."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DimensionMismatch, InvalidState, MinorizationViolated, NotUnique, OutOfRange
from .invariant import uniqueness_certificate
from .kernel import ProbMeasure, StateFunction, StochasticKernel, iter_cesaro

_U64_MASK = (1 << 64) - 1
#: slack allowed when checking ``P >= eps * nu`` row by row
MINORIZATION_TOL = 1e-12
DOEBLIN_SLACK = 1e-9


def step_uniforms(seed: int, count: int, start: int = 0, stream: int = 0) -> np.ndarray:
    """Uniforms ``u_start, ..., u_{start+count-1}`` of stream ``(seed, stream)``.

    Philox4x64 is counter based: ``u_k`` is the ``k % 4`` word of the block
    at counter ``k // 4`` under key ``seed``, with ``stream`` in the top
    counter word.  Any window can be regenerated independently.
    """
    if count < 0 or start < 0:
        raise OutOfRange("count and start must be nonnegative")
    bitgen = np.random.Philox(key=seed & _U64_MASK, counter=[0, 0, 0, stream & _U64_MASK])
    block, offset = divmod(start, 4)
    if block:
        bitgen.advance(block)
    raw = bitgen.random_raw(count + offset)[offset:]
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


@numba.njit(cache=True, nogil=True)
def _walk(cdf, last_positive, x0, uniforms):
    path = np.empty(uniforms.size + 1, dtype=np.int64)
    path[0] = x0
    state = x0
    n = cdf.shape[1]
    for k in range(uniforms.size):
        u = uniforms[k]
        lo, hi = 0, n
        while lo < hi:
            mid = (lo + hi) // 2
            if cdf[state, mid] > u:
                hi = mid
            else:
                lo = mid + 1
        if lo > last_positive[state]:
            lo = last_positive[state]
        state = lo
        path[k + 1] = state
    return path


def _row_tables(P: StochasticKernel) -> tuple[np.ndarray, np.ndarray]:
    cdf = np.cumsum(P.matrix, axis=1)
    last_positive = np.array([np.flatnonzero(row > 0)[-1] for row in P.matrix], dtype=np.int64)
    return cdf, last_positive


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    seed: int
    start: int

    def __post_init__(self):
        s = np.array(self.states, dtype=np.int64)
        if s.size < 1:
            raise OutOfRange("trajectory must contain at least one state")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    def __len__(self) -> int:
        return self.states.size


def sample_path(P: StochasticKernel, x: int, n: int, seed: int, stream: int = 0) -> Trajectory:
    """Path ``X_0 = x, ..., X_{n-1}`` drawn by inverse CDF over each row."""
    if not 0 <= x < P.n:
        raise InvalidState(f"state {x!r} not in range({P.n})")
    if n < 1:
        raise OutOfRange(f"path length {n!r} must be >= 1")
    cdf, last_positive = _row_tables(P)
    path = _walk(cdf, last_positive, np.int64(x), step_uniforms(seed, n - 1, stream=stream))
    return Trajectory(path, seed, x)


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("ERGOKIT_THREADS", "")))
    except ValueError:
        return os.cpu_count() or 1


def sample_paths(P: StochasticKernel, x: int, n: int, seed: int, batches: int, threads: int | None = None) -> list[Trajectory]:
    """``batches`` independent paths, batch ``b`` using stream ``(seed, b)``.

    Output order is batch order whatever the thread count.
    """
    threads = threads or _thread_cap()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: sample_path(P, x, n, seed, stream=b), range(batches)))


def occupation_measure(t: Trajectory, n_states: int) -> ProbMeasure:
    counts = np.bincount(t.states, minlength=n_states)
    if counts.size != n_states:
        raise InvalidState(f"trajectory visits a state outside range({n_states})")
    return ProbMeasure.from_computed(counts / len(t))


def tv_distance(mu: ProbMeasure, nu: ProbMeasure) -> float:
    if mu.n != nu.n:
        raise DimensionMismatch(f"measures over {mu.n} and {nu.n} states")
    return 0.5 * float(np.abs(mu.weights - nu.weights).sum())


def _unique_measure(P: StochasticKernel) -> ProbMeasure:
    cert = uniqueness_certificate(P)
    if not cert.unique:
        raise NotUnique("kernel has several invariant probability measures")
    return cert.measure


@dataclass(frozen=True)
class StabilityReport:
    observable: StateFunction
    time_average: float
    target: float
    abs_error: float
    n: int
    seed: int

    def to_json(self) -> dict:
        return {
            "observable": self.observable.values.tolist(),
            "time_average": self.time_average,
            "target": self.target,
            "abs_error": self.abs_error,
            "n": self.n,
            "seed": self.seed,
        }


def duflo_check(P: StochasticKernel, f: StateFunction, x: int, n: int, seed: int) -> StabilityReport:
    """Time average of ``f`` along one path against its mean under the invariant measure."""
    pi = _unique_measure(P)
    if f.n != P.n:
        raise DimensionMismatch(f"observable over {f.n} states, kernel over {P.n}")
    path = sample_path(P, x, n, seed)
    avg = float(f.values[path.states].mean())
    target = pi.integrate(f)
    return StabilityReport(f, avg, target, abs(avg - target), n, seed)


def cesaro_tv_curve(P: StochasticKernel, x: int, n_max: int) -> list[tuple[int, float]]:
    """Exact ``TV(nu_n^x, pi)`` for ``n = 1..n_max``; no sampling involved."""
    pi = _unique_measure(P).weights
    return [(n, 0.5 * float(np.abs(avg - pi).sum())) for n, avg in iter_cesaro(P, x, n_max)]


@dataclass(frozen=True)
class DoeblinReport:
    rows: tuple[tuple[int, float, float], ...]
    passed: bool
    eps: float

    def worst_excess(self) -> float:
        return max(tv - bound for _, tv, bound in self.rows)


def check_minorization(P: StochasticKernel, eps: float, nu_ref: ProbMeasure) -> None:
    if nu_ref.n != P.n:
        raise DimensionMismatch(f"reference measure over {nu_ref.n} states, kernel over {P.n}")
    if not 0.0 < eps <= 1.0:
        raise OutOfRange(f"eps={eps!r} must lie in (0, 1]")
    floor = eps * nu_ref.weights
    bad = np.argwhere(P.matrix < floor[None, :] - MINORIZATION_TOL)
    if len(bad):
        i, j = (int(v) for v in bad[0])
        raise MinorizationViolated(i, j, float(P.matrix[i, j]), float(floor[j]))


def doeblin_rate_check(P: StochasticKernel, eps: float, nu_ref: ProbMeasure, n_max: int) -> DoeblinReport:
    """Compare ``max_x TV(P^n(x, .), pi)`` with ``(1 - eps)^n`` for ``n = 1..n_max``."""
    check_minorization(P, eps, nu_ref)
    pi = _unique_measure(P).weights
    rows = []
    Pn = np.eye(P.n)
    for n in range(1, n_max + 1):
        Pn = Pn @ P.matrix
        tv = 0.5 * float(np.abs(Pn - pi[None, :]).sum(axis=1).max())
        rows.append((n, tv, (1.0 - eps) ** n))
    passed = all(tv <= bound + DOEBLIN_SLACK for _, tv, bound in rows)
    return DoeblinReport(tuple(rows), passed, eps)
