"""Error taxonomy shared by every module.

Each error class carries a distinct process exit code used by the command
line front end (``floquetprobe --help`` prints the mapping).
"""

from __future__ import annotations


class FloquetProbeError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class SchemaError(FloquetProbeError):
    """Configuration document violates the published schema."""

    exit_code = 2


class UnitError(FloquetProbeError):
    """A rate or frequency has an inadmissible value (e.g. negative rate)."""

    exit_code = 3


class TopologyError(FloquetProbeError):
    """A coupling term sits outside the allowed group-A/group-B blocks."""

    exit_code = 4


class ValidationFailed(FloquetProbeError):
    """The validation report is non-empty (CLI ``validate`` subcommand)."""

    exit_code = 5


class DimensionMismatch(FloquetProbeError):
    """Operands have incompatible shapes or truncation windows."""

    exit_code = 6


class CapacityError(FloquetProbeError):
    """A requested matrix exceeds the configured size cap."""

    exit_code = 7


class StepSizeUnderflow(FloquetProbeError):
    """The adaptive integrator could not take an acceptable step."""

    exit_code = 8


class NonFinite(FloquetProbeError):
    """A computation produced NaN or infinity."""

    exit_code = 9


class NotConverged(FloquetProbeError):
    """A quantity still drifts beyond tolerance.

    ``detect_steady_state`` returns an instance of this class (it does not
    raise) so the caller can inspect the worst offender;
    ``truncation_convergence`` raises it.
    """

    exit_code = 10

    def __init__(self, message: str, *, worst=None, drift: float | None = None):
        super().__init__(message)
        self.worst = worst      # (i, j, N) of the worst-drifting component
        self.drift = drift      # its relative drift


class SingularSystem(FloquetProbeError):
    """The weak-probe linear operator is numerically singular.

    Signals an exact resonance with an undamped dressed state.
    """

    exit_code = 11


class DefectiveGenerator(FloquetProbeError):
    """The harmonic generator lacks a usable bi-orthogonal eigenbasis."""

    exit_code = 12


class DefectiveFloquetMatrix(FloquetProbeError):
    """The Floquet Hamiltonian failed the defectiveness gates."""

    exit_code = 13


class DefectiveInput(FloquetProbeError):
    """A dressed-state set flagged defective was passed to a spectral solve."""

    exit_code = 14


class NotSteady(FloquetProbeError):
    """A harmonic stack without a steady-state mark was used as steady."""

    exit_code = 15


class BranchCut(FloquetProbeError):
    """1 + chi lies on the negative real axis; the square root is ambiguous."""

    exit_code = 16


EXIT_CODES = {
    cls.__name__: cls.exit_code
    for cls in (
        FloquetProbeError,
        SchemaError,
        UnitError,
        TopologyError,
        ValidationFailed,
        DimensionMismatch,
        CapacityError,
        StepSizeUnderflow,
        NonFinite,
        NotConverged,
        SingularSystem,
        DefectiveGenerator,
        DefectiveFloquetMatrix,
        DefectiveInput,
        NotSteady,
        BranchCut,
    )
}
