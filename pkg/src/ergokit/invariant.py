"""Invariant and ergodic measures and the certificates built from them.

On a finite space every ergodic invariant measure lives on exactly one closed
class, so most of the work reduces to the class decomposition plus one null
space computation per closed class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CertificateError,
    DensityLevelViolation,
    DimensionMismatch,
    EqualMeasures,
    HarmonicityViolation,
    MassOnTransient,
    NotClosedClass,
    NotErgodic,
    NotInvariant,
    RankDeficiency,
)
from .kernel import ProbMeasure, StateFunction, StateSet, StochasticKernel
from .structure import (
    class_decomposition,
    is_absorbing,
    theorem_witness_pair,
)

INVARIANCE_TOL = 1e-9
DENSITY_TOL = 1e-8
MASS_TOL = 1e-10
#: threshold defining ``supp mu`` for "mu-almost surely" statements
SUPPORT_THRESHOLD = 1e-12
#: singular values at or below this count toward the null space
RANK_TOL = 1e-8


def _check_dims(P: StochasticKernel, mu: ProbMeasure) -> None:
    if P.n != mu.n:
        raise DimensionMismatch(f"kernel has {P.n} states, measure has {mu.n}")


def invariance_residual(P: StochasticKernel, mu: ProbMeasure) -> float:
    _check_dims(P, mu)
    return float(np.abs(mu.weights @ P.matrix - mu.weights).sum())


def is_invariant(P: StochasticKernel, mu: ProbMeasure, tol: float = INVARIANCE_TOL) -> bool:
    return invariance_residual(P, mu) <= tol


def _require_invariant(P: StochasticKernel, mu: ProbMeasure, name: str = "mu") -> None:
    res = invariance_residual(P, mu)
    if res > INVARIANCE_TOL:
        raise NotInvariant(f"{name} is not invariant: ||{name} P - {name}||_1 = {res:.3e}")


def left_null_space(M: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (as rows) of ``{v : v M = 0}`` from an SVD of ``M``."""
    _, s, vh = np.linalg.svd(M.T)
    rank = int(np.sum(s > tol))
    return vh[rank:]


def stationary_on_class(P: StochasticKernel, C: StateSet) -> ProbMeasure:
    """The invariant probability measure carried by the closed class ``C``."""
    dec = class_decomposition(P)
    if C not in dec.closed_classes:
        raise NotClosedClass(f"{C} is not a closed communicating class")
    idx = C.indices
    sub = P.matrix[np.ix_(idx, idx)]
    basis = left_null_space(sub - np.eye(len(idx)))
    if basis.shape[0] != 1:
        raise RankDeficiency(f"null space of dimension {basis.shape[0]} on closed class {idx}")
    v = basis[0]
    v = v / v.sum()
    full = np.zeros(P.n)
    full[idx] = v
    pi = ProbMeasure.from_computed(full)
    res = invariance_residual(P, pi)
    if res > MASS_TOL:
        raise RankDeficiency(f"stationary residual {res:.3e} on class {idx}")
    return pi


def ergodic_measures(P: StochasticKernel) -> list[ProbMeasure]:
    """One ergodic invariant measure per closed class, in class order."""
    return [stationary_on_class(P, C) for C in class_decomposition(P).closed_classes]


@dataclass(frozen=True)
class ErgodicComponent:
    weight: float
    measure: ProbMeasure
    support_class: StateSet


@dataclass(frozen=True)
class ErgodicDecomposition:
    components: tuple[ErgodicComponent, ...]
    residual_error: float

    def reconstruct(self) -> np.ndarray:
        return sum(c.weight * c.measure.weights for c in self.components)

    def to_json(self) -> dict:
        return {
            "components": [
                {"weight": c.weight, "measure": c.measure.weights.tolist(), "class": c.support_class.indices}
                for c in self.components
            ],
            "residual_error": self.residual_error,
        }


def ergodic_decomposition(P: StochasticKernel, mu: ProbMeasure) -> ErgodicDecomposition:
    """Split an invariant measure into its per-class ergodic parts."""
    _require_invariant(P, mu)
    dec = class_decomposition(P)
    leaked = mu.mass(dec.transient_states)
    if leaked > INVARIANCE_TOL:
        raise MassOnTransient(f"invariant input puts mass {leaked:.3e} on transient states")
    comps = []
    for C in dec.closed_classes:
        w = mu.mass(C)
        if w >= 1e-12:
            comps.append(ErgodicComponent(w, stationary_on_class(P, C), C))
    total = sum(c.weight for c in comps)
    comps = [ErgodicComponent(c.weight / total, c.measure, c.support_class) for c in comps]
    recon = sum(c.weight * c.measure.weights for c in comps)
    residual = float(np.abs(recon - mu.weights).sum())
    if residual > INVARIANCE_TOL:
        raise CertificateError(f"ergodic reconstruction misses mu by {residual:.3e}")
    return ErgodicDecomposition(tuple(comps), residual)


def _splitting_set(P: StochasticKernel, mu: ProbMeasure) -> StateSet | None:
    """A mu-a.s. invariant set with mass strictly between 0 and 1, if any.

    Candidates are closed classes restricted to ``supp mu``; a union of
    classes has mass in {0, 1} whenever each class does, so single classes
    suffice.
    """
    supp = mu.support(SUPPORT_THRESHOLD)
    rows = P.matrix[supp.mask]
    for C in class_decomposition(P).closed_classes:
        A = C & supp
        m = mu.mass(A)
        if MASS_TOL < m < 1.0 - MASS_TOL:
            inside = rows[:, A.mask].sum(axis=1)
            if np.all(np.abs(inside - A.mask[supp.mask]) <= MASS_TOL):
                return A
    return None


def ergodicity_check(P: StochasticKernel, mu: ProbMeasure) -> bool:
    """Every mu-a.s. invariant set has mu-mass 0 or 1."""
    _require_invariant(P, mu)
    return _splitting_set(P, mu) is None


@dataclass(frozen=True)
class SingularityCertificate:
    """Two mutually singular measures, a separating set and the density ``d mu1 / d eta``."""

    mu1: ProbMeasure
    mu2: ProbMeasure
    separator: StateSet
    density: StateFunction

    def verify(self, P: StochasticKernel) -> None:
        _verify_density(P, self.mu1, self.mu2, self.density.values)
        if abs(self.mu1.mass(self.separator) - 1.0) > MASS_TOL or self.mu2.mass(self.separator) > MASS_TOL:
            raise CertificateError("separator does not split mu1 from mu2")

    def to_json(self) -> dict:
        return {
            "mu1": self.mu1.weights.tolist(),
            "mu2": self.mu2.weights.tolist(),
            "separator": self.separator.indices,
            "density": self.density.values.tolist(),
        }


def _verify_density(P: StochasticKernel, mu: ProbMeasure, nu: ProbMeasure, f: np.ndarray) -> None:
    eta = 0.5 * (mu.weights + nu.weights)
    on = eta > SUPPORT_THRESHOLD
    harmonic_gap = np.abs(P.matrix @ f - f)[on]
    if harmonic_gap.size and harmonic_gap.max() > DENSITY_TOL:
        raise HarmonicityViolation(f"P f differs from f on supp eta by {harmonic_gap.max():.3e}")
    level_gap = np.minimum(np.abs(f[on]), np.abs(f[on] - 2.0))
    if level_gap.size and level_gap.max() > DENSITY_TOL:
        raise DensityLevelViolation(f"density leaves {{0, 2}} by {level_gap.max():.3e}")


def _density_certificate(P: StochasticKernel, mu: ProbMeasure, nu: ProbMeasure) -> SingularityCertificate:
    eta = 0.5 * (mu.weights + nu.weights)
    on = eta > SUPPORT_THRESHOLD
    f = np.zeros(P.n)
    f[on] = mu.weights[on] / eta[on]
    _verify_density(P, mu, nu, f)
    separator = StateSet.from_mask(on & (f >= 1.0))
    cert = SingularityCertificate(mu, nu, separator, StateFunction(f, bound=2.0 + DENSITY_TOL))
    cert.verify(P)
    return cert


def lemma1_density(P: StochasticKernel, mu: ProbMeasure, nu: ProbMeasure) -> SingularityCertificate:
    """Separate two distinct ergodic measures through the density ``d mu / d eta``.

    With ``eta = (mu + nu) / 2`` the density ``f`` is ``P``-harmonic on
    ``supp eta`` and only takes the values 2 (on ``supp mu``) and 0 (on
    ``supp nu``); both facts are checked, and ``{f = 2}`` is returned as the
    separator.
    """
    _require_invariant(P, mu, "mu")
    _require_invariant(P, nu, "nu")
    if np.abs(mu.weights - nu.weights).sum() <= INVARIANCE_TOL:
        raise EqualMeasures("mu and nu coincide")
    for name, m in (("mu", mu), ("nu", nu)):
        if _splitting_set(P, m) is not None:
            raise NotErgodic(f"{name} is not ergodic")
    return _density_certificate(P, mu, nu)


def conditional(mu: ProbMeasure, A: StateSet) -> ProbMeasure:
    """``mu( . | A)``."""
    w = np.where(A.mask, mu.weights, 0.0)
    return ProbMeasure.from_computed(w / w.sum())


def singular_pair(P: StochasticKernel, mu: ProbMeasure, nu: ProbMeasure) -> SingularityCertificate:
    """Two mutually singular invariant measures from any two distinct invariant ones."""
    _require_invariant(P, mu, "mu")
    _require_invariant(P, nu, "nu")
    if np.abs(mu.weights - nu.weights).sum() <= INVARIANCE_TOL:
        raise EqualMeasures("mu and nu coincide")
    for m in (mu, nu):
        A = _splitting_set(P, m)
        if A is not None:
            return _density_certificate(P, conditional(m, A), conditional(m, A.complement()))
    return _density_certificate(P, mu, nu)


@dataclass(frozen=True)
class UniquenessCertificate:
    """Verdict on uniqueness of the invariant measure, with its evidence.

    ``unique`` carries the measure and its ergodicity check; ``multiple``
    carries a singularity certificate and the two absorbing hulls.
    """

    unique: bool
    measure: ProbMeasure | None = None
    ergodic: bool | None = None
    singularity: SingularityCertificate | None = None
    B1: StateSet | None = None
    B2: StateSet | None = None

    @property
    def verdict(self) -> str:
        return "unique" if self.unique else "multiple"

    def verify(self, P: StochasticKernel) -> None:
        if self.unique:
            if self.measure is None or not self.ergodic:
                raise CertificateError("unique verdict needs an ergodic measure")
            _require_invariant(P, self.measure)
            if not ergodicity_check(P, self.measure):
                raise CertificateError("unique measure fails the ergodicity check")
            if len(class_decomposition(P).closed_classes) != 1:
                raise CertificateError("unique verdict but several closed classes")
            return
        s, B1, B2 = self.singularity, self.B1, self.B2
        if s is None or B1 is None or B2 is None:
            raise CertificateError("multiple verdict needs a singularity witness and B1, B2")
        s.verify(P)
        if not len(B1) or not len(B2) or not B1.isdisjoint(B2):
            raise CertificateError("B1, B2 must be disjoint and nonempty")
        if not (is_absorbing(P, B1) and is_absorbing(P, B2)):
            raise CertificateError("B1 or B2 is not absorbing")
        if s.mu1.mass(B1) < 1.0 - MASS_TOL or s.mu2.mass(B2) < 1.0 - MASS_TOL:
            raise CertificateError("mu1(B1) or mu2(B2) falls short of 1")

    def to_json(self) -> dict:
        if self.unique:
            return {
                "verdict": "unique",
                "measure": self.measure.weights.tolist(),
                "ergodic": bool(self.ergodic),
                "witness": None,
            }
        return {
            "verdict": "multiple",
            "measure": None,
            "ergodic": None,
            "witness": {**self.singularity.to_json(), "B1": self.B1.indices, "B2": self.B2.indices},
        }

    @classmethod
    def from_json(cls, obj: dict) -> UniquenessCertificate:
        if obj["verdict"] == "unique":
            return cls(True, ProbMeasure(obj["measure"]), bool(obj["ergodic"]))
        w = obj["witness"]
        mu1 = ProbMeasure(w["mu1"])
        n = mu1.n
        sing = SingularityCertificate(
            mu1,
            ProbMeasure(w["mu2"]),
            StateSet.of(n, w["separator"]),
            StateFunction(w["density"]),
        )
        return cls(False, singularity=sing, B1=StateSet.of(n, w["B1"]), B2=StateSet.of(n, w["B2"]))


def uniqueness_certificate(P: StochasticKernel) -> UniquenessCertificate:
    """Unique invariant measure, or an explicit pair of disjoint absorbing sets."""
    closed = class_decomposition(P).closed_classes
    if len(closed) == 1:
        pi = stationary_on_class(P, closed[0])
        cert = UniquenessCertificate(True, measure=pi, ergodic=ergodicity_check(P, pi))
    else:
        mu1, mu2 = stationary_on_class(P, closed[0]), stationary_on_class(P, closed[1])
        sing = lemma1_density(P, mu1, mu2)
        B1, B2 = theorem_witness_pair(P, sing.separator)
        cert = UniquenessCertificate(False, singularity=sing, B1=B1, B2=B2)
    cert.verify(P)
    return cert
