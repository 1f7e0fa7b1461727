from __future__ import annotations

import pytest

from compass.classify import (
    PaperCategory,
    TableCategory,
    classify_paper,
    classify_table,
    compartment,
    parse_label,
)
from compass.corpus import load_corpus, make_table
from compass.validate.rollback import PipelineState

from .conftest import PAPERS, fn_gateway


@pytest.fixture(scope="module")
def corpus():
    return load_corpus(PAPERS)


def test_parse_label_forms():
    assert parse_label("Marine 210Pb", PaperCategory) is PaperCategory.Marine210Pb
    assert parse_label("MarinePbConc", PaperCategory) is PaperCategory.MarinePbConc
    assert parse_label(" irrelevant \"pb\" ", PaperCategory) is PaperCategory.IrrelevantPb
    with pytest.raises(ValueError):
        parse_label("Marine Pb", PaperCategory)


def test_compartments():
    assert compartment(PaperCategory.MarinePbNonTarget) == "Marine Pb"
    assert compartment(PaperCategory.AtmosphericPb) == "Atmospheric Pb"
    assert compartment(PaperCategory.UnrelatedTopics) == "Other"


def test_classify_paper_label(tree, corpus):
    gw = fn_gateway(lambda node, p, n: {"label": "Marine 210Pb", "rationale": "210Pb profiles"})
    res = classify_paper(corpus["pb210_pacific"], tree, gw)
    assert res.label is PaperCategory.Marine210Pb
    assert res.rationale == "210Pb profiles"


def test_abstract_only_by_default(tree, corpus):
    seen = []
    gw = fn_gateway(lambda node, p, n: seen.append(p) or {"label": "Marine 210Pb"})
    classify_paper(corpus["pb210_pacific"], tree, gw)
    classify_paper(corpus["pb210_pacific"], tree, gw, full_text=True)
    assert "body" not in seen[0] and "alpha" in seen[1]["body"]


def test_bad_output_rolls_back_then_succeeds(tree, corpus):
    state = PipelineState()
    gw = fn_gateway(lambda node, p, n: "garbage" if n == 1 else {"label": "Analytical Pb"})
    res = classify_paper(corpus["icpms_pb_method"], tree, gw, state=state)
    assert res.label is PaperCategory.AnalyticalPb
    assert len(state.rollback_events) == 1


def test_persistent_failure_is_unclassified(tree, corpus):
    state = PipelineState()
    gw = fn_gateway(lambda node, p, n: {"label": "Unclassified"})
    res = classify_paper(corpus["icpms_pb_method"], tree, gw, state=state, max_attempts=2)
    assert res.label is PaperCategory.Unclassified
    assert state.quarantined[0][0] == "icpms_pb_method"


def test_empty_paper_rejected(tree, corpus):
    from dataclasses import replace
    with pytest.raises(ValueError):
        classify_paper(replace(corpus["icpms_pb_method"], title=" ", abstract=""), tree, fn_gateway(None))


def test_classify_table(tree, corpus):
    paper = corpus["pb_isotopes_nepac"]
    gw = fn_gateway(lambda node, p, n: {"label": "TargetIsotopeRatios"})
    res = classify_table(paper.tables[0], PaperCategory.MarinePbIsotopeRatios, tree, gw, paper_id=paper.paper_id)
    assert res.label is TableCategory.TargetIsotopeRatios
    assert res.subject_id == "pb_isotopes_nepac/T1"


def test_table_host_must_be_target(tree, corpus):
    with pytest.raises(ValueError):
        classify_table(corpus["pb210_pacific"].tables[0], PaperCategory.AtmosphericPb, tree, fn_gateway(None),
                       paper_id="x")


def test_empty_table_is_non_target_without_a_call(tree):
    t = make_table({"table_id": "T9", "headers": [["a"]], "rows": []})
    res = classify_table(t, PaperCategory.Marine210Pb, tree, fn_gateway(None), paper_id="p")
    assert res.label is TableCategory.NonTarget
