"""Finite stochastic kernels, probability measures and state functions.

Everything here is float64 and immutable after construction.  A kernel ``P``
acts on measures from the left (``mu @ P``) and on functions from the right
(``P @ f``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InputError,
    InvalidMeasure,
    InvalidState,
    NegativeEntry,
    OutOfRange,
    RowSumViolation,
    SingularSolve,
)

#: row-sum tolerance for user-supplied kernels
INPUT_TOL = 1e-12
#: row-sum tolerance for kernels produced by arithmetic
DERIVED_TOL = 1e-10
#: largest total correction silently absorbed by ``ProbMeasure.from_computed``
CLAMP_TOL = 1e-10


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


def _check_rows(matrix: np.ndarray, tol: float) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"kernel must be square, got shape {matrix.shape}")
    if matrix.shape[0] < 1:
        raise DimensionMismatch("kernel needs at least one state")
    if not np.all(np.isfinite(matrix)):
        i, j = np.argwhere(~np.isfinite(matrix))[0]
        raise InputError(f"entry ({i}, {j}) is not finite")
    neg = np.argwhere(matrix < 0)
    if len(neg):
        i, j = (int(v) for v in neg[0])
        raise NegativeEntry(i, j, float(matrix[i, j]))
    sums = matrix.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if len(bad):
        i = int(bad[0])
        raise RowSumViolation(i, float(sums[i]))


@dataclass(frozen=True, eq=False)
class StochasticKernel:
    """Row-stochastic ``n x n`` transition matrix.

    Direct construction accepts rows that sum to one within ``DERIVED_TOL``;
    use :func:`validate_kernel` for user input, which applies ``INPUT_TOL``.
    """

    matrix: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        mat = _frozen(self.matrix)
        _check_rows(mat, DERIVED_TOL)
        object.__setattr__(self, "matrix", mat)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != mat.shape[0]:
                raise DimensionMismatch(f"{len(labels)} labels for {mat.shape[0]} states")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, n: int) -> StochasticKernel:
        return cls(np.eye(n))

    def __repr__(self) -> str:
        return f"StochasticKernel(n={self.n})"


@dataclass(frozen=True, eq=False)
class ProbMeasure:
    """Probability vector on ``{0, ..., n-1}``."""

    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1 or w.size < 1:
            raise DimensionMismatch(f"measure must be a nonempty vector, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidMeasure("measure has non-finite entries")
        if np.any(w < 0):
            raise InvalidMeasure(f"negative weight {w.min()!r}")
        if abs(w.sum() - 1.0) > INPUT_TOL:
            raise InvalidMeasure(f"weights sum to {w.sum()!r}")
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.size

    @classmethod
    def from_computed(cls, values, tol: float = CLAMP_TOL) -> ProbMeasure:
        """Clamp round-off negatives and renormalize, if the repair is small.

        The correction (clamped mass plus distance of the total from 1) must
        not exceed ``tol``; anything larger is a genuine error.
        """
        v = np.array(values, dtype=np.float64)
        clamped = -v[v < 0].sum()
        v[v < 0] = 0.0
        total = v.sum()
        if not np.isfinite(total) or clamped + abs(total - 1.0) > tol:
            raise InvalidMeasure(
                f"cannot repair vector into a probability measure (sum {total!r}, clamped {clamped!r})"
            )
        return cls(v / total)

    @classmethod
    def dirac(cls, n: int, x: int) -> ProbMeasure:
        _check_state(n, x)
        w = np.zeros(n)
        w[x] = 1.0
        return cls(w)

    @classmethod
    def uniform(cls, n: int) -> ProbMeasure:
        return cls(np.full(n, 1.0 / n))

    def mass(self, states: StateSet | Iterable[int]) -> float:
        idx = states.indices if isinstance(states, StateSet) else list(states)
        return float(self.weights[idx].sum())

    def support(self, threshold: float = 1e-12) -> StateSet:
        return StateSet.from_mask(self.weights > threshold)

    def integrate(self, f: StateFunction | np.ndarray) -> float:
        values = f.values if isinstance(f, StateFunction) else np.asarray(f, dtype=float)
        return float(self.weights @ values)

    def __repr__(self) -> str:
        return f"ProbMeasure({np.array2string(self.weights, precision=6)})"


@dataclass(frozen=True, eq=False)
class StateFunction:
    """Real function on the state space, optionally with a declared sup bound."""

    values: np.ndarray
    bound: float | None = None

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1:
            raise DimensionMismatch(f"state function must be a vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("state function has non-finite values")
        if self.bound is not None and v.size and np.abs(v).max() > self.bound:
            raise InputError(f"sup norm {np.abs(v).max()!r} exceeds declared bound {self.bound!r}")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    @classmethod
    def indicator(cls, n: int, states: StateSet | Iterable[int]) -> StateFunction:
        idx = states.indices if isinstance(states, StateSet) else list(states)
        v = np.zeros(n)
        v[idx] = 1.0
        return cls(v, bound=1.0)


@dataclass(frozen=True)
class StateSet:
    """Subset of ``{0, ..., n-1}``."""

    n: int
    members: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        members = frozenset(int(i) for i in self.members)
        if any(i < 0 or i >= self.n for i in members):
            raise InvalidState(f"state set {sorted(members)} not inside range({self.n})")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, n: int, members: Iterable[int]) -> StateSet:
        return cls(n, frozenset(members))

    @classmethod
    def full(cls, n: int) -> StateSet:
        return cls(n, frozenset(range(n)))

    @classmethod
    def empty(cls, n: int) -> StateSet:
        return cls(n, frozenset())

    @classmethod
    def from_mask(cls, mask) -> StateSet:
        mask = np.asarray(mask, dtype=bool)
        return cls(mask.size, frozenset(int(i) for i in np.flatnonzero(mask)))

    @classmethod
    def from_bits(cls, n: int, bits: int) -> StateSet:
        return cls(n, frozenset(i for i in range(n) if bits >> i & 1))

    @property
    def indices(self) -> list[int]:
        return sorted(self.members)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[self.indices] = True
        return m

    @property
    def bits(self) -> int:
        return sum(1 << i for i in self.members)

    def complement(self) -> StateSet:
        return StateSet(self.n, frozenset(range(self.n)) - self.members)

    def _same_space(self, other: StateSet) -> None:
        if other.n != self.n:
            raise DimensionMismatch(f"state sets over {self.n} and {other.n} states")

    def __or__(self, other: StateSet) -> StateSet:
        self._same_space(other)
        return StateSet(self.n, self.members | other.members)

    def __and__(self, other: StateSet) -> StateSet:
        self._same_space(other)
        return StateSet(self.n, self.members & other.members)

    def __sub__(self, other: StateSet) -> StateSet:
        self._same_space(other)
        return StateSet(self.n, self.members - other.members)

    def __le__(self, other: StateSet) -> bool:
        self._same_space(other)
        return self.members <= other.members

    def __contains__(self, i) -> bool:
        return i in self.members

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.indices)

    def isdisjoint(self, other: StateSet) -> bool:
        return self.members.isdisjoint(other.members)

    def __repr__(self) -> str:
        return f"StateSet({self.indices})"


@dataclass(frozen=True)
class ResolventParams:
    """Mixing parameter ``a`` and evaluation mode for the resolvent kernel.

    ``terms=None`` selects the closed form; an integer selects the truncated
    series with that many terms.
    """

    a: float
    terms: int | None = None

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise OutOfRange(f"resolvent parameter a={self.a!r} must lie in (0, 1)")
        if self.terms is not None and self.terms < 1:
            raise OutOfRange(f"series length {self.terms!r} must be >= 1")


def _check_state(n: int, x: int) -> None:
    if not (isinstance(x, (int, np.integer)) and 0 <= x < n):
        raise InvalidState(f"state {x!r} not in range({n})")


def _check_dims(P: StochasticKernel, n: int) -> None:
    if P.n != n:
        raise DimensionMismatch(f"kernel has {P.n} states, operand has {n}")


def validate_kernel(raw, labels: Sequence[str] | None = None) -> StochasticKernel:
    """Validate a raw square matrix as a stochastic kernel.

    Rows are never renormalized: a row whose sum misses 1 by more than
    ``INPUT_TOL`` raises :class:`RowSumViolation`.
    """
    mat = np.array(raw, dtype=np.float64)
    _check_rows(mat, INPUT_TOL)
    return StochasticKernel(mat, tuple(labels) if labels is not None else None)


def _derived_kernel(mat: np.ndarray) -> StochasticKernel:
    mat = np.where(np.abs(mat) < 1e-15, np.maximum(mat, 0.0), mat)
    return StochasticKernel(mat)


def apply_left(mu: ProbMeasure, P: StochasticKernel) -> ProbMeasure:
    """Push a measure forward one step: ``(mu P)_j = sum_i mu_i P_ij``."""
    _check_dims(P, mu.n)
    return ProbMeasure.from_computed(mu.weights @ P.matrix)


def apply_right(P: StochasticKernel, f: StateFunction) -> StateFunction:
    """Conditional expectation one step ahead: ``(P f)_i = sum_j P_ij f_j``."""
    _check_dims(P, f.n)
    bound = f.bound if f.bound is not None else None
    values = P.matrix @ f.values
    if bound is not None:
        # convex combinations cannot leave [-bound, bound]; trim round-off
        values = np.clip(values, -bound, bound)
    return StateFunction(values, bound)


def power(P: StochasticKernel, m: int) -> StochasticKernel:
    """``P**m`` by repeated squaring; ``P**0`` is the identity."""
    if m < 0:
        raise OutOfRange(f"power m={m!r} must be nonnegative")
    result = np.eye(P.n)
    base = P.matrix.copy()
    while m:
        if m & 1:
            result = result @ base
        m >>= 1
        if m:
            base = base @ base
    return _derived_kernel(result)


def cesaro_average(P: StochasticKernel, x: int, n: int) -> ProbMeasure:
    """Averaged iterates ``(1/n) sum_{k<n} P^k(x, .)`` started from state ``x``."""
    _check_state(P.n, x)
    if n < 1:
        raise OutOfRange(f"n={n!r} must be >= 1")
    for _, avg in iter_cesaro(P, x, n):
        pass
    return ProbMeasure.from_computed(avg)


def iter_cesaro(P: StochasticKernel, x: int, n_max: int):
    """Yield ``(n, nu_n)`` for ``n = 1..n_max`` as raw arrays.

    Row vectors ``delta_x P^k`` are accumulated one step at a time; no matrix
    power is ever formed.
    """
    _check_state(P.n, x)
    row = np.zeros(P.n)
    row[x] = 1.0
    acc = np.zeros(P.n)
    mat = P.matrix
    for k in range(1, n_max + 1):
        acc += row
        yield k, acc / k
        row = row @ mat


def _nonnegative_green(P: np.ndarray, a: float) -> np.ndarray:
    """``(1-a) (I - aP)^{-1}`` by pivot-free elimination without subtractions.

    ``I - aP`` is a diagonally dominant M-matrix.  Each pivot is rebuilt from
    the row's killing mass plus its remaining off-diagonal mass, and both
    triangular inverses are accumulated from nonnegative terms, so an entry of
    the result is exactly zero iff the target state is unreachable.
    """
    n = P.shape[0]
    A = a * P
    np.fill_diagonal(A, 0.0)
    kill = np.full(n, 1.0 - a)
    pivot = np.empty(n)
    diag = np.arange(n)
    for k in range(n):
        rest = slice(k + 1, n)
        pivot[k] = kill[k] + A[k, rest].sum()
        if not (np.isfinite(pivot[k]) and pivot[k] > 0):
            raise SingularSolve(f"nonpositive pivot {pivot[k]!r} at step {k}")
        col = A[rest, k] / pivot[k]
        kill[rest] += col * kill[k]
        A[rest, rest] += np.outer(col, A[k, rest])
        A[rest, k] = col
        A[diag[rest], diag[rest]] = 0.0

    lower_inv = np.eye(n)
    for i in range(1, n):
        lower_inv[i] += A[i, :i] @ lower_inv[:i]
    green = np.empty((n, n))
    for k in range(n - 1, -1, -1):
        green[k] = (lower_inv[k] + A[k, k + 1 :] @ green[k + 1 :]) / pivot[k]
    return (1.0 - a) * green


def resolvent(P: StochasticKernel, params: ResolventParams | float) -> StochasticKernel:
    """Resolvent kernel ``R_a = (1-a) sum_k a^k P^k``.

    The closed form (default) is exact in its positivity pattern:
    ``R_a[x, y] > 0`` iff ``y`` is reachable from ``x``.  Series mode returns
    the stochastic truncation from :func:`resolvent_series`.
    """
    if not isinstance(params, ResolventParams):
        params = ResolventParams(float(params))
    if params.terms is not None:
        return resolvent_series(P, params.a, params.terms)[0]
    return _derived_kernel(_nonnegative_green(P.matrix, params.a))


def resolvent_series(P: StochasticKernel, a: float, terms: int) -> tuple[StochasticKernel, float]:
    """Truncated resolvent and its tail bound.

    Returns ``(1-a) sum_{k<N} a^k P^k + a^N P^N``, which is exactly stochastic
    and within ``2 a^N`` of ``R_a`` in every row's L1 norm, together with
    ``a^N``.
    """
    ResolventParams(a, terms)
    acc = np.zeros((P.n, P.n))
    term = np.eye(P.n)
    for k in range(terms):
        acc += (1.0 - a) * a**k * term
        term = term @ P.matrix
    acc += a**terms * term
    return _derived_kernel(acc), a**terms


def kernel_from_json(obj: dict) -> StochasticKernel:
    """Parse ``{"n", "format": "dense"|"triplets", "rows"|"entries", "labels"}``."""
    if not isinstance(obj, dict):
        raise InputError("kernel document must be a JSON object")
    try:
        n = int(obj["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError("kernel document needs an integer 'n'") from exc
    fmt = obj.get("format", "dense")
    if fmt == "dense":
        rows = obj.get("rows")
        if rows is None:
            raise InputError("dense kernel needs 'rows'")
        try:
            mat = np.array(rows, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise InputError(f"rows are not a numeric matrix: {exc}") from exc
        if mat.shape != (n, n):
            raise DimensionMismatch(f"rows have shape {mat.shape}, expected ({n}, {n})")
    elif fmt == "triplets":
        mat = np.zeros((n, n))
        seen = set()
        for entry in obj.get("entries", []):
            try:
                i, j, p = int(entry[0]), int(entry[1]), float(entry[2])
            except (TypeError, ValueError, IndexError) as exc:
                raise InputError(f"bad triplet {entry!r}") from exc
            if not (0 <= i < n and 0 <= j < n):
                raise InvalidState(f"triplet {entry!r} outside range({n})")
            if (i, j) in seen:
                raise InputError(f"duplicate triplet for ({i}, {j})")
            seen.add((i, j))
            mat[i, j] = p
    else:
        raise InputError(f"unknown kernel format {fmt!r}")
    return validate_kernel(mat, obj.get("labels"))


def kernel_to_json(P: StochasticKernel) -> dict:
    out = {"n": P.n, "format": "dense", "rows": P.matrix.tolist()}
    if P.labels is not None:
        out["labels"] = list(P.labels)
    return out


def load_kernel(path: str | Path) -> StochasticKernel:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    return kernel_from_json(obj)
