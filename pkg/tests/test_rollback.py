from __future__ import annotations

import pytest

from compass.errors import QuarantinedSubject, UnparseableOutput
from compass.validate.rollback import PipelineState, Step, execute_with_rollback, replay


def _step(outcomes, verify=None):
    calls = []

    def run(attempt):
        calls.append(attempt)
        out = outcomes[attempt - 1]
        if isinstance(out, Exception):
            raise out
        return out

    return Step("s1", "subj", {"x": 1}, run, verify), calls


def test_success_first_try():
    state = PipelineState()
    step, calls = _step([{"ok": 1}])
    assert execute_with_rollback(step, state) == {"ok": 1}
    assert calls == [1]
    assert state.status_of("s1") == "done"
    assert state.rollback_events == []


def test_rollback_then_success():
    state = PipelineState()
    step, calls = _step([UnparseableOutput("bad"), {"ok": 2}])
    assert execute_with_rollback(step, state, 2) == {"ok": 2}
    assert calls == [1, 2]
    assert len(state.rollback_events) == 1 and state.rollback_events[0].resolved
    assert [e.status for e in state.entries] == ["failed", "done"]


def test_quarantine_after_max_attempts():
    state = PipelineState()
    step, calls = _step([UnparseableOutput("a"), UnparseableOutput("b"), {"never": 1}])
    with pytest.raises(QuarantinedSubject) as info:
        execute_with_rollback(step, state, 2)
    assert calls == [1, 2]
    assert info.value.subject_id == "subj"
    assert state.quarantined == [("subj", "UnparseableOutput: b")]
    assert not any(e.resolved for e in state.rollback_events)


def test_verify_rejection_counts_as_failure():
    state = PipelineState()
    step, _ = _step([1, 2], verify=lambda out: None if out == 2 else "odd")
    assert execute_with_rollback(step, state, 2) == 2
    assert state.rollback_events[0].reason == "odd"


def test_non_step_errors_propagate():
    state = PipelineState()
    step, _ = _step([KeyError("bug")])
    with pytest.raises(KeyError):
        execute_with_rollback(step, state, 3)
    assert state.status_of("s1") == "failed"


def test_bad_max_attempts():
    with pytest.raises(ValueError):
        execute_with_rollback(_step([1])[0], PipelineState(), 0)


def test_replay_is_stable():
    state = PipelineState()
    step, _ = _step([UnparseableOutput("x"), {"v": 5}, {"v": 5}])
    execute_with_rollback(step, state, 3)
    assert replay(state, {"s1": step}) == []


def test_absorb_and_serialize():
    a, b = PipelineState(), PipelineState()
    execute_with_rollback(_step([1])[0], a)
    execute_with_rollback(Step("s2", "t", {}, lambda n: 2), b)
    a.absorb(b)
    doc = a.to_dict()
    assert [e["step_id"] for e in doc["entries"]] == ["s1", "s2"]
