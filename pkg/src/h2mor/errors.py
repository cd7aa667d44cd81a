"""Exception hierarchy."""


class H2MORError(Exception):
    """Base class for all errors raised by h2mor."""


class SingularShiftError(H2MORError):
    """``A - s E`` is (numerically) singular; `s` hits a pencil eigenvalue."""

    def __init__(self, shift, detail=""):
        self.shift = complex(shift)
        msg = f"singular shifted system: shift {self.shift!r} hits an eigenvalue of (A, E)"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SingularPencilError(H2MORError):
    """A (reduced) E matrix is singular."""


class EmptyBasisError(H2MORError):
    """Every column was deflated during orthogonalization."""


class IllPosedSylvesterError(H2MORError):
    """Spectra of ``F`` and ``-G`` overlap."""


class DimensionCapError(H2MORError):
    """A dense routine was asked to handle a matrix above its size cap."""


class EigensolverError(H2MORError):
    """The iterative eigensolver did not converge."""


class NonSimplePolesError(H2MORError):
    """Reduced poles are clustered or defective."""


class UnstableSystemError(H2MORError):
    """H2 quantities requested for a system that is not c-stable."""


class ProblemSpecError(H2MORError):
    """Invalid benchmark problem description or input files."""
