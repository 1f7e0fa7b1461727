from __future__ import annotations

import json

import httpx
import pytest

from compass.corpus import fetch_remote, keyword_search, load_corpus, make_table, paper_from_dict
from compass.errors import MalformedResponse, NetworkError, QuotaExceeded, UnreadableRoot

from .conftest import PAPERS


def _write(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")


def test_minicorpus_loads():
    corpus = load_corpus(PAPERS)
    assert len(corpus) == 12
    assert corpus.load_warnings == []
    assert list(corpus.papers) == sorted(corpus.papers)


def test_bad_files_become_warnings(tmp_path):
    _write(tmp_path / "a.json", {"paper_id": "a", "title": "Pb", "abstract": ""})
    (tmp_path / "b.json").write_text("{not json", encoding="utf-8")
    _write(tmp_path / "c.json", {"paper_id": "a", "title": "dup", "abstract": ""})
    _write(tmp_path / "d.json", {"title": "no id", "abstract": ""})
    corpus = load_corpus(tmp_path)
    assert list(corpus.papers) == ["a"]
    assert len(corpus.load_warnings) == 3
    assert corpus.manifest["count"] == 1


def test_unreadable_root(tmp_path):
    with pytest.raises(UnreadableRoot):
        load_corpus(tmp_path / "missing")


def test_ragged_rows_are_padded():
    t = make_table({"table_id": "T1", "headers": [["a", "b", "c"]], "rows": [["1"], ["1", "2", "3"]]})
    assert t.data_rows[0] == ("1", "", "")
    assert len(t.anomalies) == 1


def test_stacked_headers_join():
    t = make_table({"table_id": "T1", "headers": [["Pb", "Depth"], ["(pmol/kg)", "(m)"]], "rows": []})
    assert t.column_headers == ["Pb (pmol/kg)", "Depth (m)"]


def test_duplicate_table_ids():
    with pytest.raises(ValueError):
        paper_from_dict({"paper_id": "p", "title": "t", "abstract": "", "tables": [
            {"table_id": "T1", "headers": [["a"]]}, {"table_id": "T1", "headers": [["a"]]}]})


def test_keyword_tokens():
    corpus = load_corpus(PAPERS)
    assert len(keyword_search(corpus, ["Pb", "lead"])) == 12
    assert keyword_search(corpus, ["petabyte storage"]) == []
    assert keyword_search(corpus, ["erasure coding"]) == ["petabyte_storage"]
    with pytest.raises(ValueError):
        keyword_search(corpus, ["  "])


def test_keyword_whole_tokens(tmp_path):
    _write(tmp_path / "x.json", {"paper_id": "x", "title": "PbX2compound synthesis", "abstract": ""})
    assert keyword_search(load_corpus(tmp_path), ["Pb"]) == []


def _client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_fetch_remote_parses_stubs():
    body = {"data": [{"paperId": "1", "title": "Pb in seawater", "abstract": "x",
                      "externalIds": {"DOI": "10.1/x"}}, {"paperId": "2", "title": None}]}
    stubs = fetch_remote(["Pb"], "https://repo.test/search", 5,
                         client=_client(lambda req: httpx.Response(200, json=body)))
    assert [s.paper_id for s in stubs] == ["1", "2"]
    assert stubs[0].doi == "10.1/x" and stubs[1].title == ""


def test_fetch_remote_retries_then_quota():
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(429)

    with pytest.raises(QuotaExceeded):
        fetch_remote(["Pb"], "https://repo.test", 3, client=_client(handler), sleep=lambda s: None)
    assert len(calls) == 3


def test_fetch_remote_recovers_after_5xx():
    replies = [httpx.Response(503), httpx.Response(200, json={"data": []})]
    assert fetch_remote(["Pb"], "https://repo.test", 3, client=_client(lambda r: replies.pop(0)),
                        sleep=lambda s: None) == []


def test_fetch_remote_errors():
    with pytest.raises(MalformedResponse):
        fetch_remote(["Pb"], "https://repo.test", 3, client=_client(lambda r: httpx.Response(200, text="[")))

    def boom(req):
        raise httpx.ConnectError("down")

    with pytest.raises(NetworkError):
        fetch_remote(["Pb"], "https://repo.test", 3, client=_client(boom), sleep=lambda s: None)
    with pytest.raises(ValueError):
        fetch_remote([], "https://repo.test", 3)


def test_keyword_matches_title(tmp_path):
    _write(tmp_path / "t.json", {"paper_id": "t", "title": "Lead in tropical marine systems", "abstract": ""})
    assert keyword_search(load_corpus(tmp_path), ["lead"]) == ["t"]
