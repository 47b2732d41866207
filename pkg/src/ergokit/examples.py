"""Finite reconstructions of the two counterexample kernels, plus block fixtures.

Both counterexamples share the form ``P(x, .) = (1-eps) delta_{T(x)} + eps nu``
for a two-valued map ``T``.  On a grid they become finite kernels with
closed-form invariant measures.

The discretizations are surrogates.  A grid cannot have empty interior or a
dense null set, so only the measure-theoretic conclusions are reproduced:
two-valued ``Pf`` with both level sets charged (fat Cantor), and a null,
never-visited atom set on which ``T`` differs (two-point map).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpecViolation
from .invariant import is_invariant
from .kernel import ProbMeasure, StateFunction, StateSet, StochasticKernel, validate_kernel

DEFAULT_GRID = 256


def fat_cantor_cells(grid_n: int, depth: int | None = None) -> list[int]:
    """Grid cells whose midpoints survive ``depth`` stages of the Smith-Volterra-Cantor construction.

    Stage ``k`` removes an open middle interval of length ``4**-k`` from each
    of the ``2**(k-1)`` remaining intervals.  The default depth stops once
    the removed gaps shrink below one cell.
    """
    if depth is None:
        depth = max(1, int(np.floor(np.log(grid_n) / np.log(4))))
    intervals = [(0.0, 1.0)]
    for k in range(1, depth + 1):
        gap = 4.0**-k
        nxt = []
        for a, b in intervals:
            m = 0.5 * (a + b)
            nxt += [(a, m - gap / 2), (m + gap / 2, b)]
        intervals = nxt
    mids = (np.arange(grid_n) + 0.5) / grid_n
    keep = np.zeros(grid_n, dtype=bool)
    for a, b in intervals:
        keep |= (mids >= a) & (mids <= b)
    return [int(i) for i in np.flatnonzero(keep)]


def cantor_mass(eps: float, lam: float, atom0_in_c: bool = False, atom1_in_c: bool = False) -> float:
    """Invariant mass ``p`` of ``C`` solving ``p = eps*lam + (1-eps)(p*[atom0 in C] + (1-p)*[atom1 in C])``."""
    a0, a1 = float(atom0_in_c), float(atom1_in_c)
    return (eps * lam + (1.0 - eps) * a1) / (1.0 - (1.0 - eps) * (a0 - a1))


def _check_eps(eps: float) -> None:
    if not 0.0 < eps <= 1.0:
        raise SpecViolation(f"eps={eps!r} must lie in (0, 1]")


@dataclass(frozen=True)
class FatCantorSpec:
    grid_n: int
    C_cells: tuple[int, ...]
    eps: float
    atom0: int
    atom1: int

    def __post_init__(self):
        _check_eps(self.eps)
        object.__setattr__(self, "C_cells", tuple(sorted(set(int(c) for c in self.C_cells))))
        if self.grid_n < 3:
            raise SpecViolation("grid_n must be at least 3")
        if not self.C_cells:
            raise SpecViolation("C_cells must be nonempty")
        if any(not 0 <= c < self.grid_n for c in self.C_cells):
            raise SpecViolation("C_cells outside the grid")
        if not (0 <= self.atom0 < self.grid_n and 0 <= self.atom1 < self.grid_n) or self.atom0 == self.atom1:
            raise SpecViolation("atom0 and atom1 must be distinct grid cells")
        if self.atom0 in self.C_cells or self.atom1 in self.C_cells:
            raise SpecViolation("atom0 and atom1 must lie outside C_cells")
        if not 0.0 < self.lambda_c < 1.0:
            raise SpecViolation("C_cells must cover a fraction of the grid strictly between 0 and 1")

    @classmethod
    def default(cls, eps: float, grid_n: int = DEFAULT_GRID, depth: int | None = None) -> FatCantorSpec:
        atom0, atom1 = 0, grid_n - 1
        cells = [c for c in fat_cantor_cells(grid_n, depth) if c not in (atom0, atom1)]
        return cls(grid_n, tuple(cells), eps, atom0, atom1)

    @property
    def lambda_c(self) -> float:
        return len(self.C_cells) / self.grid_n

    @property
    def C(self) -> StateSet:
        return StateSet.of(self.grid_n, self.C_cells)


def _map_kernel(targets: np.ndarray, nu: np.ndarray, eps: float) -> np.ndarray:
    n = targets.size
    mat = np.tile(eps * nu, (n, 1))
    mat[np.arange(n), targets] += 1.0 - eps
    return mat


def build_fat_cantor_kernel(spec: FatCantorSpec) -> tuple[StochasticKernel, ProbMeasure]:
    """Kernel on grid cells and its closed-form invariant measure.

    Cells in ``C`` jump to ``atom0``, the rest to ``atom1``, each with
    probability ``1 - eps``; otherwise the next cell is uniform.
    """
    n, eps = spec.grid_n, spec.eps
    nu = np.full(n, 1.0 / n)
    in_c = spec.C.mask
    targets = np.where(in_c, spec.atom0, spec.atom1)
    P = validate_kernel(_map_kernel(targets, nu, eps))
    p = cantor_mass(eps, spec.lambda_c)
    pi = eps * nu
    pi[spec.atom0] += (1.0 - eps) * p
    pi[spec.atom1] += (1.0 - eps) * (1.0 - p)
    pi = ProbMeasure.from_computed(pi)
    _assert_reference(P, pi)
    return P, pi


def _assert_reference(P: StochasticKernel, pi: ProbMeasure) -> None:
    if not is_invariant(P, pi, 1e-12):
        raise SpecViolation("closed-form reference measure is not invariant")


@dataclass(frozen=True)
class RegularityFailure:
    """Level structure of ``Pf`` on the fat-Cantor surrogate."""

    value_on_c: float
    value_off_c: float
    mass_on_c: float
    mass_off_c: float
    spread: float

    @property
    def holds(self) -> bool:
        return (
            self.value_on_c != self.value_off_c
            and self.spread <= 1e-12
            and self.mass_on_c > 0
            and self.mass_off_c > 0
        )


def regularity_failure(P: StochasticKernel, spec: FatCantorSpec, pi: ProbMeasure, f: StateFunction) -> RegularityFailure:
    """Check that ``Pf`` is two-valued, split along ``C``, with both levels charged by ``pi``."""
    if f.values[spec.atom0] == f.values[spec.atom1]:
        raise SpecViolation("observable must separate atom0 from atom1")
    pf = P.matrix @ f.values
    in_c = spec.C.mask
    on, off = pf[in_c], pf[~in_c]
    spread = max(float(on.max() - on.min()), float(off.max() - off.min()))
    return RegularityFailure(float(on.mean()), float(off.mean()), pi.mass(spec.C), pi.mass(spec.C.complement()), spread)


@dataclass(frozen=True)
class TwoPointMapSpec:
    """Grid cells ``0..grid_n-1`` charged by ``nu``, then ``q_atoms`` null atoms."""

    grid_n: int
    q_atoms: int
    alpha_cell: int
    beta_cell: int
    eps: float

    def __post_init__(self):
        _check_eps(self.eps)
        if self.q_atoms < 1:
            raise SpecViolation("q_atoms must be >= 1")
        if self.grid_n < 2:
            raise SpecViolation("grid_n must be >= 2")
        if self.alpha_cell == self.beta_cell:
            raise SpecViolation("alpha_cell and beta_cell must differ")
        for c in (self.alpha_cell, self.beta_cell):
            if not 0 <= c < self.grid_n:
                raise SpecViolation(f"target cell {c} is not a charged grid cell")

    @property
    def n(self) -> int:
        return self.grid_n + self.q_atoms

    @property
    def atoms(self) -> StateSet:
        return StateSet.of(self.n, range(self.grid_n, self.n))

    def nu(self) -> np.ndarray:
        nu = np.zeros(self.n)
        nu[: self.grid_n] = 1.0 / self.grid_n
        return nu


def build_two_point_map_kernel(spec: TwoPointMapSpec) -> tuple[StochasticKernel, ProbMeasure]:
    """Null atoms jump to ``alpha_cell``, everything else to ``beta_cell``."""
    nu = spec.nu()
    targets = np.full(spec.n, spec.beta_cell)
    targets[spec.grid_n :] = spec.alpha_cell
    P = validate_kernel(_map_kernel(targets, nu, spec.eps))
    # nothing enters the atoms, so pi(atoms) = 0 and T = beta pi-a.s.
    pi = spec.eps * nu
    pi[spec.beta_cell] += 1.0 - spec.eps
    pi = ProbMeasure.from_computed(pi)
    _assert_reference(P, pi)
    return P, pi


def two_point_constant(spec: TwoPointMapSpec, f: StateFunction) -> float:
    """The value ``(1-eps) f(beta) + eps <nu, f>`` taken by ``Pf`` on ``supp pi``."""
    return (1.0 - spec.eps) * f.values[spec.beta_cell] + spec.eps * float(spec.nu() @ f.values)


def build_block_kernel(blocks: list[StochasticKernel], bridge: tuple[int, int, float] | None = None) -> StochasticKernel:
    """Block-diagonal kernel; ``bridge=(src, dst, mass)`` leaks ``mass`` from the first state of block ``src`` into block ``dst``."""
    if not blocks:
        raise SpecViolation("need at least one block")
    sizes = [b.n for b in blocks]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    mat = np.zeros((offsets[-1], offsets[-1]))
    for b, off in zip(blocks, offsets):
        mat[off : off + b.n, off : off + b.n] = b.matrix
    if bridge is not None:
        src, dst, mass = bridge
        if not (0 <= src < len(blocks) and 0 <= dst < len(blocks)) or src == dst:
            raise SpecViolation(f"bad bridge blocks {src} -> {dst}")
        if not 0.0 < mass < 1.0:
            raise SpecViolation(f"bridge mass {mass!r} must lie in (0, 1)")
        i = offsets[src]
        mat[i] *= 1.0 - mass
        mat[i, offsets[dst] : offsets[dst + 1]] += mass / sizes[dst]
    return validate_kernel(mat)


def example_from_json(obj: dict) -> tuple[StochasticKernel, ProbMeasure | None, object]:
    """Build ``(kernel, reference measure or None, spec)`` from a CLI example document."""
    kind = obj.get("example")
    try:
        if kind == "fat_cantor":
            grid_n = int(obj.get("grid_n", DEFAULT_GRID))
            eps = float(obj["eps"])
            if "C_cells" in obj:
                spec = FatCantorSpec(
                    grid_n, tuple(obj["C_cells"]), eps, int(obj.get("atom0", 0)), int(obj.get("atom1", grid_n - 1))
                )
            else:
                spec = FatCantorSpec.default(eps, grid_n, obj.get("depth"))
            P, pi = build_fat_cantor_kernel(spec)
            return P, pi, spec
        if kind == "two_point_map":
            spec = TwoPointMapSpec(
                int(obj.get("grid_n", 10)),
                int(obj.get("q_atoms", 3)),
                int(obj.get("alpha_cell", 0)),
                int(obj.get("beta_cell", 1)),
                float(obj["eps"]),
            )
            P, pi = build_two_point_map_kernel(spec)
            return P, pi, spec
        if kind == "blocks":
            blocks = [validate_kernel(b) for b in obj["blocks"]]
            bridge = obj.get("bridge")
            if bridge is not None:
                bridge = (int(bridge[0]), int(bridge[1]), float(bridge[2]))
            return build_block_kernel(blocks, bridge), None, None
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecViolation(f"bad example document: {exc}") from exc
    raise SpecViolation(f"unknown example {kind!r}")


__all__ = [
    "FatCantorSpec",
    "TwoPointMapSpec",
    "RegularityFailure",
    "build_block_kernel",
    "build_fat_cantor_kernel",
    "build_two_point_map_kernel",
    "cantor_mass",
    "example_from_json",
    "fat_cantor_cells",
    "regularity_failure",
    "two_point_constant",
]
