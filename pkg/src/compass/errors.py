"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class CompassError(Exception):
    """Base class for all errors raised by this package."""


class StepError(CompassError):
    """A failure that the rollback controller treats as a failed subtask."""


# -- knowledge tree ---------------------------------------------------------


class TreeError(CompassError):
    def __init__(self, node_id: str | None, message: str):
        self.node_id = node_id
        super().__init__(f"{message} (node {node_id!r})" if node_id is not None else message)


class DuplicateId(TreeError):
    pass


class DanglingParent(TreeError):
    pass


class CycleDetected(TreeError):
    pass


class MultipleRoots(TreeError):
    pass


class MalformedCheckSpec(TreeError):
    pass


class InconsistentLink(TreeError):
    """Parent field and child list disagree."""


class UnknownNode(CompassError, LookupError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"unknown node {node_id!r}")


class ContextTooLarge(CompassError):
    def __init__(self, node_id: str, tokens: int, budget: int):
        self.node_id, self.tokens, self.budget = node_id, tokens, budget
        super().__init__(f"prompt for {node_id!r} needs ~{tokens} tokens, budget is {budget}")


# -- corpus -----------------------------------------------------------------


class UnreadableRoot(CompassError):
    pass


class NetworkError(CompassError):
    retryable = True


class QuotaExceeded(CompassError):
    pass


class MalformedResponse(CompassError):
    pass


# -- llm gateway ------------------------------------------------------------


class BackendError(CompassError):
    pass


class TransientBackendError(BackendError):
    """Retryable failure (timeouts, 429, 5xx)."""


class BackendUnavailable(BackendError):
    pass


class FixtureMiss(BackendError):
    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"no mock fixture for prompt digest {digest}")


class BudgetExceeded(BackendError):
    pass


class UnparseableOutput(StepError):
    pass


class SchemaMismatch(StepError):
    def __init__(self, missing: list[str], message: str | None = None):
        self.missing = list(missing)
        super().__init__(message or f"missing fields: {', '.join(self.missing)}")


# -- extraction / harmonization ---------------------------------------------


class OutOfRange(CompassError, ValueError):
    pass


class NegativeDepth(CompassError, ValueError):
    pass


class InvalidPlan(StepError):
    """Backend extraction plan does not fit the table it describes."""


class UnknownUnit(StepError):
    pass


class ConversionRejected(StepError):
    pass


class DimensionalMismatch(StepError):
    pass


# -- validation / evaluation / store ----------------------------------------


class QuarantinedSubject(CompassError):
    def __init__(self, subject_id: str, reason: str, last_output=None):
        self.subject_id = subject_id
        self.reason = reason
        self.last_output = last_output
        super().__init__(f"{subject_id} quarantined: {reason}")


class KeyMismatch(CompassError):
    pass


class UnwritablePath(CompassError):
    pass
