"""Randomized property checks against brute-force oracles.

The oracles here never call into the code paths they check: absorbing sets
come from exhaustive subset enumeration over bitmasks, null-space dimension
from a plain SVD of ``P - I``, reachability from transitive closure.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ErgokitError
from .invariant import (
    ergodic_measures,
    ergodicity_check,
    lemma1_density,
    uniqueness_certificate,
)
from .kernel import ProbMeasure, StateSet, StochasticKernel, resolvent
from .structure import (
    class_decomposition,
    indecomposability_certificate,
    is_absorbing,
    largest_absorbing_subset,
    theorem_witness_pair,
)

ORACLE_RANK_TOL = 1e-8
RESOLVENT_A = (0.1, 0.5, 0.9)


def random_kernel(rng: np.random.Generator, n: int, density: float) -> StochasticKernel:
    """Sparse random kernel: each entry present with probability ``density``, uniform weights.

    Rows left empty get one uniformly placed entry.
    """
    weights = rng.random((n, n)) * (rng.random((n, n)) < density)
    for i in np.flatnonzero(weights.sum(axis=1) == 0):
        weights[i, rng.integers(n)] = 1.0
    return StochasticKernel(weights / weights.sum(axis=1, keepdims=True))


def suite_kernel(seed: int, index: int, n_range=(2, 12), density_range=(0.15, 0.9)) -> StochasticKernel:
    """Kernel number ``index`` of the suite keyed by ``seed``; independent of all other indices."""
    rng = np.random.default_rng([seed, index])
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    density = float(rng.uniform(*density_range))
    return random_kernel(rng, n, density)


# -- oracles ---------------------------------------------------------------


def _successor_bits(P: StochasticKernel) -> list[int]:
    return [sum(1 << int(j) for j in np.flatnonzero(row > 0)) for row in P.matrix]


def oracle_absorbing_masks(P: StochasticKernel) -> np.ndarray:
    """Boolean array over all ``2**n`` bitmasks: is the set absorbing (no edge leaves)."""
    n = P.n
    masks = np.arange(1 << n, dtype=np.int64)
    leaks = np.zeros(1 << n, dtype=bool)
    for i, succ in enumerate(_successor_bits(P)):
        leaks |= ((masks >> i) & 1).astype(bool) & ((succ & ~masks) != 0)
    return ~leaks


def oracle_decomposable(P: StochasticKernel) -> bool:
    """Some pair of disjoint nonempty absorbing sets exists."""
    n = P.n
    absorbing = oracle_absorbing_masks(P)
    absorbing[0] = False
    # contains[S]: S has a nonempty absorbing subset (subset-sum DP over bits)
    contains = absorbing.copy()
    masks = np.arange(1 << n, dtype=np.int64)
    for i in range(n):
        with_bit = (masks >> i) & 1 == 1
        contains[with_bit] |= contains[masks[with_bit] ^ (1 << i)]
    full = (1 << n) - 1
    candidates = masks[absorbing]
    return bool(np.any(contains[full & ~candidates]))


def oracle_largest_absorbing(P: StochasticKernel, A: StateSet, absorbing: np.ndarray | None = None) -> StateSet:
    """Union of every absorbing subset of ``A``; pass ``absorbing`` to reuse an enumeration."""
    if absorbing is None:
        absorbing = oracle_absorbing_masks(P)
    masks = np.flatnonzero(absorbing)
    inside = masks[(masks & ~A.bits) == 0]
    return StateSet.from_bits(P.n, int(np.bitwise_or.reduce(inside)) if inside.size else 0)


def oracle_null_dimension(P: StochasticKernel, tol: float = ORACLE_RANK_TOL) -> int:
    s = np.linalg.svd(P.matrix - np.eye(P.n), compute_uv=False)
    return int(np.sum(s <= tol))


def oracle_reachability(P: StochasticKernel) -> np.ndarray:
    reach = np.eye(P.n, dtype=bool) | (P.matrix > 0)
    for k in range(P.n):
        reach |= reach[:, [k]] & reach[[k], :]
    return reach


def oracle_ergodic(P: StochasticKernel, mu: ProbMeasure, tol: float = 1e-10) -> bool:
    """Every subset that is mu-a.s. invariant has mass 0 or 1 (exhaustive)."""
    n = P.n
    masks = np.arange(1 << n, dtype=np.int64)
    ind = ((masks[None, :] >> np.arange(n)[:, None]) & 1).astype(float)
    supp = mu.weights > 1e-12
    flow = P.matrix[supp] @ ind
    invariant = np.all(np.abs(flow - ind[supp]) <= tol, axis=0)
    mass = mu.weights @ ind
    bad = invariant & (mass > tol) & (mass < 1 - tol)
    return not bool(np.any(bad))


# -- property checks -------------------------------------------------------


@dataclass
class KernelReport:
    index: int
    n: int
    unique: bool = False
    violations: list[str] = field(default_factory=list)

    def fail(self, what: str) -> None:
        self.violations.append(what)


def subset_sample(n: int, index: int, limit: int) -> list[int]:
    """All nonempty bitmasks when there are at most ``limit``, else a seeded sample of ``limit``."""
    if (1 << n) - 1 <= limit:
        return list(range(1, 1 << n))
    rng = np.random.default_rng([n, index, limit])
    return sorted(int(b) for b in rng.choice(np.arange(1, 1 << n), size=limit, replace=False))


def check_kernel(P: StochasticKernel, index: int = 0, brute_force: bool = True, subset_limit: int = 128) -> KernelReport:
    """Run the finite-scale uniqueness properties on one kernel; collect every violation.

    ``subset_limit`` caps how many sets ``A`` are fed to the largest-absorbing
    subset comparison.
    """
    rep = KernelReport(index, P.n)
    try:
        _check_kernel(P, rep, brute_force, subset_limit)
    except ErgokitError as exc:
        rep.fail(f"{type(exc).__name__}: {exc}")
    return rep


def _check_kernel(P: StochasticKernel, rep: KernelReport, brute_force: bool, subset_limit: int) -> None:
    dec = class_decomposition(P)
    closed = dec.closed_classes
    ind = indecomposability_certificate(P)
    cert = uniqueness_certificate(P)
    null_dim = oracle_null_dimension(P)
    rep.unique = cert.unique

    verdicts = (ind.indecomposable, len(closed) == 1, null_dim == 1, cert.unique)
    if len(set(verdicts)) != 1:
        rep.fail(f"uniqueness equivalence broken: {verdicts}")

    if brute_force:
        if oracle_decomposable(P) == ind.indecomposable:
            rep.fail("indecomposability disagrees with subset enumeration")
        absorbing = oracle_absorbing_masks(P)
        for bits in subset_sample(P.n, rep.index, subset_limit):
            A = StateSet.from_bits(P.n, bits)
            if largest_absorbing_subset(P, A) != oracle_largest_absorbing(P, A, absorbing):
                rep.fail(f"largest absorbing subset of {A.indices} disagrees with enumeration")
                break

    measures = ergodic_measures(P)
    for C, pi in zip(closed, measures):
        if pi.mass(dec.transient_states) > 1e-9:
            rep.fail("invariant measure charges transient states")
        if not is_absorbing(P, C):
            rep.fail(f"closed class {C.indices} not absorbing")

    if cert.unique:
        if not ergodicity_check(P, cert.measure):
            rep.fail("unique measure fails ergodicity check")
    else:
        mu1, mu2 = measures[0], measures[1]
        if not mu1.support().isdisjoint(mu2.support()):
            rep.fail("ergodic supports intersect")
        sing = lemma1_density(P, mu1, mu2)
        f = sing.density.values
        eta_on = 0.5 * (mu1.weights + mu2.weights) > 1e-12
        if np.abs(P.matrix @ f - f)[eta_on].max() > 1e-8:
            rep.fail("density not harmonic on supp eta")
        if np.minimum(np.abs(f[eta_on]), np.abs(f[eta_on] - 2)).max() > 1e-8:
            rep.fail("density levels outside {0, 2}")
        if abs(mu1.mass(sing.separator) - 1) > 1e-10 or mu2.mass(sing.separator) > 1e-10:
            rep.fail("separator does not split the ergodic pair")
        B1, B2 = theorem_witness_pair(P, sing.separator)
        if not (len(B1) and len(B2) and B1.isdisjoint(B2) and is_absorbing(P, B1) and is_absorbing(P, B2)):
            rep.fail("B1, B2 not disjoint nonempty absorbing")
        if mu1.mass(B1) < 1 - 1e-10 or mu2.mass(B2) < 1 - 1e-10:
            rep.fail("B1, B2 do not carry mu1, mu2")
        mixture = ProbMeasure.from_computed(0.5 * (mu1.weights + mu2.weights))
        if ergodicity_check(P, mixture):
            rep.fail("strict mixture passes ergodicity check")
        if brute_force and oracle_ergodic(P, mixture):
            rep.fail("enumeration oracle calls the strict mixture ergodic")

    reach = oracle_reachability(P)
    for a in RESOLVENT_A:
        R = resolvent(P, a)
        if not np.array_equal(R.matrix > 0, reach):
            rep.fail(f"resolvent a={a} positivity pattern differs from reachability")
        rcert = uniqueness_certificate(R)
        if rcert.unique != cert.unique:
            rep.fail(f"resolvent a={a} changes the uniqueness verdict")
        elif cert.unique and np.abs(rcert.measure.weights - cert.measure.weights).max() > 1e-8:
            rep.fail(f"resolvent a={a} moves the invariant measure")


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("ERGOKIT_THREADS", "")))
    except ValueError:
        return min(8, os.cpu_count() or 1)


def run_fuzz(count: int, seed: int, n_max: int = 12, threads: int | None = None) -> list[KernelReport]:
    """Check ``count`` suite kernels with ``n`` in ``[2, n_max]``; reports come back in index order."""
    threads = threads or _thread_cap()

    def one(i: int) -> KernelReport:
        return check_kernel(suite_kernel(seed, i, (2, n_max)), i, brute_force=True)

    if threads == 1:
        return [one(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(count)))
