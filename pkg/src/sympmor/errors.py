"""Exception hierarchy shared across the package.

Two broad families: ContractError for inputs that violate a documented
precondition (caller bug), and NumericalFailure for procedures that ran
but could not meet their numerical contract.  The CLI maps families to
exit codes, see cli.py.
"""


class SympmorError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(SympmorError):
    """An input violates a documented precondition."""


class ParameterError(ContractError):
    """A model parameter is outside its admissible range."""


class MeshError(ParameterError):
    """Node coordinates do not form a valid 1-d mesh."""


class WeightMismatchError(ContractError):
    """Weight matrices of two objects that must share one disagree."""


class NumericalFailure(SympmorError):
    """A numerical procedure failed to meet its contract."""


class FactorizationError(NumericalFailure):
    """Matrix factorization failed (e.g. not positive definite)."""


class SvdConvergenceError(NumericalFailure):
    """The SVD iteration did not converge."""


class StepFailure(NumericalFailure):
    """A time integration step did not converge.

    Attributes
    ----------
    step_index : int
        Index of the failing step (0-based).
    """

    def __init__(self, message, step_index):
        super().__init__(f"{message} (step {step_index})")
        self.step_index = step_index


class StagnationError(NumericalFailure):
    """Greedy enrichment stalled: the selected snapshot is already
    represented but its error is still above tolerance.

    Attributes
    ----------
    snapshot_index : int
        Column index of the offending snapshot.
    """

    def __init__(self, message, snapshot_index):
        super().__init__(f"{message} (snapshot {snapshot_index})")
        self.snapshot_index = snapshot_index


class SingularStructureError(NumericalFailure):
    """A skew structure matrix is numerically rank deficient."""


class RankError(NumericalFailure):
    """Requested basis size exceeds the numerical rank of the data."""


class SelectionError(NumericalFailure):
    """Interpolation index selection hit a rank-deficient column.

    Attributes
    ----------
    column : int
        Index of the offending basis column.
    """

    def __init__(self, message, column):
        super().__init__(f"{message} (column {column})")
        self.column = column


class AssemblyError(NumericalFailure):
    """Reduced-model assembly failed (e.g. singular interpolation matrix)."""


class ConfigError(SympmorError):
    """Experiment configuration is malformed or inconsistent."""


class PackageFormatError(SympmorError):
    """An offline package file is corrupt or has an unsupported version."""
