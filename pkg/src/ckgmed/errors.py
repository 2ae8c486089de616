"""Exception hierarchy shared across the package.

Input and contract violations derive from ``CkgError`` so callers (and the
command line driver) can distinguish bad data from genuine bugs.
"""


class CkgError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(CkgError):
    """A data file is malformed (bad column count, token, or value)."""

    def __init__(self, message, path=None, line_no=None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
            if line_no is not None:
                loc += f"{line_no}:"
            loc += " "
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line_no = line_no


class KindMismatch(CkgError):
    """A node of the wrong kind (disease vs drug) was supplied."""


class CycleError(CkgError):
    """A subgraph that must be acyclic contains a cycle."""

    def __init__(self, message, cycle=None):
        if cycle:
            message = f"{message}: {' -> '.join(str(n) for n in cycle)}"
        super().__init__(message)
        self.cycle = list(cycle) if cycle else []


class UnknownNode(CkgError):
    """A node was requested that is not present in the graph."""


class DateError(CkgError):
    """A date field failed to parse or an interval ends before it starts."""


class NoRecords(CkgError):
    """A person has no dated records from which to anchor an index date."""


class EmptyCohort(CkgError):
    """An operation that needs at least one person got an empty cohort."""


class EmptySample(CkgError):
    """No rows survived sample selection."""


class DegenerateSample(CkgError):
    """T, M, or Y is constant in the selected sample."""

    def __init__(self, variable, message=None):
        super().__init__(message or f"variable {variable!r} is constant in sample")
        self.variable = variable


class DomainError(CkgError):
    """An argument lies outside the documented domain."""


class NoValidSet(CkgError):
    """No valid backdoor adjustment set exists (within the search limit)."""


class RankDeficient(CkgError):
    """A design matrix is rank deficient beyond constant/duplicate columns."""

    def __init__(self, columns):
        super().__init__(f"design matrix rank deficient; offending columns: {sorted(columns)}")
        self.columns = list(columns)


class NonFinite(CkgError):
    """An input array contains NaN or infinity."""


class DegenerateOutcome(CkgError):
    """A binary response is constant, so the model cannot be fit."""


class ConvergenceFailure(CkgError):
    """An iterative fit failed to converge."""


class OneClass(CkgError):
    """All labels belong to a single class, AUC is undefined."""


class BothEmpty(CkgError):
    """Both sets passed to a set similarity are empty."""


class EmptyInput(CkgError):
    """An input collection that must be non-empty is empty."""


class SpecError(CkgError):
    """A simulation spec is inconsistent (cycles, missing roles, bad keys)."""


class OverlapError(CkgError):
    """Conflicting duplicate rows for the same key were found in an input."""
