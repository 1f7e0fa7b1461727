"""State-transition log and the re-execute-on-failure controller.

Every backend-dependent subtask runs through :func:`execute_with_rollback`.
A subtask that raises a :class:`~compass.errors.StepError`, or whose output
fails its ``verify`` hook, is logged as failed and re-run from the same
recorded input.  After ``max_attempts`` the subject is quarantined and the
caller decides what (if anything) to salvage; failed output never flows on.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Generic, TypeVar

from .._digest import stable_digest
from ..errors import QuarantinedSubject, StepError

log = logging.getLogger(__name__)

T = TypeVar("T")

DONE, FAILED = "done", "failed"
DEFAULT_MAX_ATTEMPTS = 2


@dataclass(frozen=True)
class StepLogEntry:
    step_id: str
    subject_id: str
    input_digest: str
    output_digest: str | None
    status: str
    attempt: int

    def to_dict(self):
        return {"step_id": self.step_id, "subject_id": self.subject_id,
                "input_digest": self.input_digest, "output_digest": self.output_digest,
                "status": self.status, "attempt": self.attempt}


@dataclass(frozen=True)
class RollbackEvent:
    step_id: str
    attempt: int
    reason: str
    resolved: bool

    def to_dict(self):
        return {"step_id": self.step_id, "attempt": self.attempt, "reason": self.reason,
                "resolved": self.resolved}


@dataclass
class PipelineState:
    entries: list[StepLogEntry] = field(default_factory=list)
    rollback_events: list[RollbackEvent] = field(default_factory=list)
    quarantined: list[tuple[str, str]] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def _append(self, entries=(), events=(), quarantined=()):
        with self._lock:
            self.entries.extend(entries)
            self.rollback_events.extend(events)
            self.quarantined.extend(quarantined)

    def absorb(self, other: PipelineState) -> None:
        """Append another state's log (used to merge per-subject logs in a fixed order)."""
        self._append(other.entries, other.rollback_events, other.quarantined)

    def status_of(self, step_id: str) -> str | None:
        status = None
        for e in self.entries:
            if e.step_id == step_id:
                status = e.status
        return status

    def completed(self) -> dict[str, StepLogEntry]:
        return {e.step_id: e for e in self.entries if e.status == DONE}

    def to_dict(self):
        return {
            "entries": [e.to_dict() for e in self.entries],
            "rollback_events": [e.to_dict() for e in self.rollback_events],
            "quarantined": [{"subject_id": s, "reason": r} for s, r in self.quarantined],
        }


@dataclass
class Step(Generic[T]):
    """A re-executable subtask.

    ``run`` receives the 1-based attempt number (used only as a retry nonce);
    given the same recorded input it must be deterministic up to backend
    behaviour.  ``verify`` returns a failure reason or ``None``.
    """

    step_id: str
    subject_id: str
    input: Any
    run: Callable[[int], T]
    verify: Callable[[T], str | None] | None = None

    @property
    def input_digest(self) -> str:
        return stable_digest(self.input)


def execute_with_rollback(step: Step[T], state: PipelineState,
                          max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> T:
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    in_digest = step.input_digest
    entries: list[StepLogEntry] = []
    failures: list[tuple[int, str]] = []
    last_output = None

    def flush(resolved: bool, quarantine=()):
        events = [RollbackEvent(step.step_id, a, r, resolved) for a, r in failures]
        state._append(entries, events, quarantine)

    for attempt in range(1, max_attempts + 1):
        try:
            output = step.run(attempt)
        except StepError as exc:
            reason = f"{type(exc).__name__}: {exc}"
            entries.append(StepLogEntry(step.step_id, step.subject_id, in_digest, None, FAILED, attempt))
            failures.append((attempt, reason))
            log.info("step %s attempt %d failed: %s", step.step_id, attempt, reason)
            continue
        except Exception:
            entries.append(StepLogEntry(step.step_id, step.subject_id, in_digest, None, FAILED, attempt))
            flush(False)
            raise
        out_digest = stable_digest(output)
        reason = step.verify(output) if step.verify else None
        if reason is None:
            entries.append(StepLogEntry(step.step_id, step.subject_id, in_digest, out_digest, DONE, attempt))
            flush(True)
            return output
        entries.append(StepLogEntry(step.step_id, step.subject_id, in_digest, out_digest, FAILED, attempt))
        failures.append((attempt, reason))
        last_output = output
        log.info("step %s attempt %d rejected: %s", step.step_id, attempt, reason)

    final_reason = failures[-1][1]
    flush(False, [(step.subject_id, final_reason)])
    raise QuarantinedSubject(step.subject_id, final_reason, last_output)


def replay(state: PipelineState, steps: dict[str, Step]) -> list[str]:
    """Re-run every completed step and return ids whose output digest changed."""
    changed = []
    for step_id, entry in state.completed().items():
        step = steps[step_id]
        if stable_digest(step.run(entry.attempt)) != entry.output_digest:
            changed.append(step_id)
    return changed
