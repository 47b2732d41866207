"""Exception hierarchy shared by every ergokit module."""

from __future__ import annotations


class ErgokitError(Exception):
    """Base class; ``code`` is the machine-readable tag used by the CLI."""

    code = "error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class InputError(ErgokitError):
    """Malformed or out-of-contract input (CLI exit status 1)."""

    code = "input_error"


class CertificateError(ErgokitError):
    """A certificate failed its own invariant checks (CLI exit status 2)."""

    code = "certificate_error"


class NegativeEntry(InputError):
    code = "negative_entry"

    def __init__(self, i: int, j: int, value: float):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"entry ({i}, {j}) is negative: {value!r}")


class RowSumViolation(InputError):
    code = "row_sum_violation"

    def __init__(self, i: int, total: float):
        self.i, self.total = i, total
        super().__init__(f"row {i} sums to {total!r}, expected 1")


class DimensionMismatch(InputError):
    code = "dimension_mismatch"


class InvalidState(InputError):
    code = "invalid_state"


class OutOfRange(InputError):
    code = "out_of_range"


class InvalidMeasure(InputError):
    code = "invalid_measure"


class SingularSolve(CertificateError):
    code = "singular_solve"


class NotClosedClass(InputError):
    code = "not_closed_class"


class RankDeficiency(CertificateError):
    code = "rank_deficiency"


class NotInvariant(InputError):
    code = "not_invariant"


class MassOnTransient(InputError):
    code = "mass_on_transient"


class NotErgodic(InputError):
    code = "not_ergodic"


class EqualMeasures(InputError):
    code = "equal_measures"


# Name used by ``singular_pair``; same condition as EqualMeasures.
MeasuresEqual = EqualMeasures


class DensityLevelViolation(CertificateError):
    code = "density_level_violation"


class HarmonicityViolation(CertificateError):
    code = "harmonicity_violation"


class NotUnique(InputError):
    code = "not_unique"


class MinorizationViolated(InputError):
    code = "minorization_violated"

    def __init__(self, i: int, j: int, value: float, floor: float):
        self.i, self.j = i, j
        super().__init__(f"P[{i}, {j}] = {value!r} is below eps * nu[{j}] = {floor!r}")


class SpecViolation(InputError):
    code = "spec_violation"
