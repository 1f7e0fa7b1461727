from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from compass.classify import TableCategory
from compass.corpus import load_corpus, make_table, paper_from_dict
from compass.errors import InvalidPlan, QuarantinedSubject
from compass.extract.tables import (
    BDL_SKIPPED,
    EMPTY_CELL,
    NON_NUMERIC,
    CellSkip,
    _validate_plan,
    extract_table_records,
    parse_value_cell,
)
from compass.harmonize.headers import HEADER_NODE, normalize_headers
from compass.records import MeasurementType as MT
from compass.records import Phase
from compass.validate.rollback import PipelineState

from .conftest import PAPERS, fn_gateway


@pytest.mark.parametrize("cell,expected", [
    ("12.5", (12.5, None)),
    ("1,234.5", (1234.5, None)),
    ("3,7", (3.7, None)),
    ("2.1e-3", (0.0021, None)),
    ("2.1 × 10⁻³", (0.0021, None)),
    ("1.2 ± 0.1", (1.2, None)),
    ("1.23(4)", (1.23, None)),
    ("5.6a", (5.6, None)),
    ("5.6*", (5.6, None)),
    ("-0.4", (-0.4, None)),
    ("12 ng/kg", (12.0, "ng/kg")),
])
def test_parse_value_cell(cell, expected):
    assert parse_value_cell(cell) == expected


@pytest.mark.parametrize("cell,flag", [
    ("<0.5", BDL_SKIPPED), ("b.d.l.", BDL_SKIPPED), ("n.d.", BDL_SKIPPED), ("", EMPTY_CELL),
    ("—", EMPTY_CELL), ("n.a.", EMPTY_CELL), ("see text", NON_NUMERIC), ("1,2,3", NON_NUMERIC),
    ("12 furlongs", NON_NUMERIC)])
def test_skipped_cells(cell, flag):
    with pytest.raises(CellSkip) as info:
        parse_value_cell(cell)
    assert info.value.flag == flag


@given(st.decimals(min_value=-1e6, max_value=1e6, places=4, allow_nan=False, allow_infinity=False))
def test_decimal_text_round_trip(d):
    text = format(d, "f")
    assert parse_value_cell(text)[0] == float(text)


TABLE = make_table({"table_id": "T1", "caption": "c",
                    "headers": [["Depth (m)", "dPb (pmol/kg)", "pPb (pmol/kg)", "Salinity"]],
                    "rows": [["10", "20.1", "1.1", "35"], ["100", "<0.5", "0.9", "35"]]})
PAPER = paper_from_dict({"paper_id": "p", "title": "Pb", "abstract": "", "doi": "10.1/p",
                         "tables": [TABLE.to_dict()]})


def _maps():
    return normalize_headers(TABLE.column_headers)


def _plan(columns, phase="dissolved"):
    return {"columns": columns, "phase": phase}


def test_plan_must_cover_family_columns():
    with pytest.raises(InvalidPlan):
        _validate_plan(_plan([{"column": 2, "header": "pPb (pmol/kg)", "measurement_type": "PbConc",
                               "unit": "pmol/kg"}]), TABLE, TableCategory.TargetPbConc, _maps())


@pytest.mark.parametrize("column,reason", [
    ({"column": 9, "header": "x", "measurement_type": "PbConc", "unit": "u"}, "range"),
    ({"column": 1, "header": "Depth (m)", "measurement_type": "PbConc", "unit": "u"}, "header"),
    ({"column": 1, "header": "dPb (pmol/kg)", "measurement_type": "Pb210Conc", "unit": "u"}, "reads as"),
    ({"column": 0, "header": "Depth (m)", "measurement_type": "PbConc", "unit": "m"}, "not a Pb"),
    ({"column": 3, "header": "Salinity", "measurement_type": "PbConc", "unit": "x"}, "not a Pb"),
    ({"column": 1, "header": "dPb (pmol/kg)", "measurement_type": "Gold", "unit": "u"}, "measurement_type"),
])
def test_invalid_plans(column, reason):
    with pytest.raises(InvalidPlan):
        _validate_plan(_plan([column]), TABLE, TableCategory.TargetPbConc, _maps())


def test_plan_from_wrong_family():
    with pytest.raises(InvalidPlan):
        _validate_plan(_plan([{"column": 1, "header": "dPb (pmol/kg)", "measurement_type": "PbConc"}]),
                       TABLE, TableCategory.Target210Pb, _maps())


GOOD = _plan([{"column": 1, "header": "dPb (pmol/kg)", "measurement_type": "PbConc"},
              {"column": 2, "header": "pPb (pmol/kg)", "measurement_type": "PbConc", "unit": "pmol/kg"}])


def test_unit_falls_back_to_header_hint():
    plan = _validate_plan(GOOD, TABLE, TableCategory.TargetPbConc, _maps())
    assert [c.unit for c in plan.columns] == ["pmol/kg", "pmol/kg"]


HEADER_ANSWER = {"mappings": [{"header": "pPb (pmol/kg)", "field": "value", "measurement_type": "PbConc"}]}


def _answer(plan):
    return lambda node, payload, n: HEADER_ANSWER if node == HEADER_NODE else plan(n)


def test_extract_fans_out_and_skips(tree):
    res = extract_table_records(TABLE, TableCategory.TargetPbConc, tree, fn_gateway(_answer(lambda n: GOOD)),
                                paper=PAPER)
    assert [d.record_id for d in res.drafts] == ["p:T1:r0:c1", "p:T1:r0:c2", "p:T1:r1:c2"]
    assert [s.flag for s in res.skipped] == [BDL_SKIPPED]
    d = res.drafts[0]
    assert d.phase is Phase.dissolved and d.value == 20.1 and d.provenance[0].doi == "10.1/p"
    assert res.drafts[1].phase is Phase.particulate


def test_bad_plan_rolls_back(tree):
    state = PipelineState()
    answers = {1: {"columns": [{"column": 0, "header": "Depth (m)", "measurement_type": "PbConc"}]}, 2: GOOD}
    res = extract_table_records(TABLE, "TargetPbConc", tree, fn_gateway(_answer(answers.get)),
                                paper=PAPER, state=state)
    assert len(res.drafts) == 3
    assert len(state.rollback_events) == 1


def test_persistent_bad_plan_quarantines(tree):
    with pytest.raises(QuarantinedSubject):
        extract_table_records(TABLE, "TargetPbConc", tree, fn_gateway(lambda *a: "{}"), paper=PAPER)


def test_non_target_category_rejected(tree):
    with pytest.raises(ValueError):
        extract_table_records(TABLE, "NonTarget", tree, fn_gateway(None), paper=PAPER)


def test_row_unit_column(tree):
    t = make_table({"table_id": "T1", "headers": [["Pb", "Unit"]], "rows": [["5", "ng/kg"], ["6 pmol/kg", "ng/kg"]]})
    paper = paper_from_dict({"paper_id": "q", "title": "Pb", "abstract": "", "tables": [t.to_dict()]})
    plan = {"columns": [{"column": 0, "header": "Pb", "measurement_type": "PbConc"}]}
    res = extract_table_records(t, "TargetPbConc", tree, fn_gateway(lambda *a: plan), paper=paper)
    assert [d.unit for d in res.drafts] == ["ng/kg", "pmol/kg"]


def test_ratio_tables(tree):
    paper = load_corpus(PAPERS)["pb_isotopes_nepac"]
    plan = {"columns": [{"column": c, "header": h, "measurement_type": t} for c, h, t in (
        (1, "206Pb/204Pb", "R206_204"), (2, "207Pb/204Pb", "R207_204"), (3, "208Pb/204Pb", "R208_204"),
        (4, "208Pb/207Pb", "R208_207"))]}
    res = extract_table_records(paper.table("T2"), "TargetIsotopeRatios", tree, fn_gateway(lambda *a: plan),
                                paper=paper)
    assert len(res.drafts) == 12
    assert {d.measurement_type for d in res.drafts} == {MT.R206_204, MT.R207_204, MT.R208_204, MT.R208_207}
