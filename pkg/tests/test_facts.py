import json
from dataclasses import FrozenInstanceError

import pytest

from src.core.errors import MalformedLine, TkgIoError
from src.core.facts import TemporalFact, TkgFormat, TkgStore, dump_facts, load_tkg
from src.core.timestamp import TimeStamp

from .conftest import SAMPLE_KG


def _write(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_sample_kg_loads_in_file_order(sample_store):
    assert len(sample_store) == 25
    first = sample_store.get_fact(0)
    assert (first.subject, first.predicate, first.object) == ("Georgios Papandreou", "Make a visit", "China")
    assert first.time == TimeStamp(2009, 5, 12)
    assert [f.fact_id for f in sample_store] == list(range(25))
    assert sample_store.report.duplicates == 0
    assert "Aristovoulos Spiliotopoulos" in sample_store.entities
    assert sample_store.predicates == {"Make a visit", "Host a visit", "Express intent to meet or negotiate"}


def test_duplicates_are_dropped_and_counted(tmp_path):
    path = _write(tmp_path / "kg.tsv", [
        "A\tMake a visit\tB\t2009-05-12",
        "C\tMake a visit\tB\t2009-05",
        "A\tMake a visit\tB\t2009-05-12",
        "",
        "A\tMake a visit\tB\t2009",
    ])
    store = load_tkg(path)
    assert len(store) == 3
    assert store.report.duplicates == 1
    assert [f.time.render() for f in store] == ["2009-05-12", "2009-05", "2009"]


def test_malformed_line_reports_its_number(tmp_path):
    path = _write(tmp_path / "kg.tsv", ["A\tMake a visit\tB\t2009-05-12", "A\tMake a visit\tB"])
    with pytest.raises(MalformedLine) as excinfo:
        load_tkg(path)
    assert excinfo.value.line_no == 2


def test_bad_timestamp_is_a_malformed_line(tmp_path):
    path = _write(tmp_path / "kg.tsv", ["A\tMake a visit\tB\t2009-02-30"])
    with pytest.raises(MalformedLine):
        load_tkg(path)


def test_lenient_loading_skips_with_warning(tmp_path):
    path = _write(tmp_path / "kg.tsv", [
        "A\tMake a visit\tB\t2009-05-12",
        "broken line",
        "C\tHost a visit\tD\t2010",
    ])
    with pytest.warns(UserWarning, match="malformed"):
        store = load_tkg(path, lenient=True)
    assert len(store) == 2
    assert store.report.skipped == 1
    assert store.get_fact(1).subject == "C"


def test_interval_facts(tmp_path):
    path = _write(tmp_path / "kg.tsv", ["A\tHold office\tB\t2009-01\t2012-06-30"])
    store = load_tkg(path, TkgFormat.TSV_QUINTUPLE)
    fact = store.get_fact(0)
    assert fact.is_interval
    assert fact.start == TimeStamp(2009, 1)
    assert fact.to_dict() == {"subject": "A", "predicate": "Hold office", "object": "B",
                              "start": "2009-01", "end": "2012-06-30"}


def test_interval_start_after_end_is_rejected():
    with pytest.raises(ValueError):
        TemporalFact(0, "A", "p", "B", start=TimeStamp(2012), end=TimeStamp(2009))
    with pytest.raises(ValueError):
        TemporalFact(0, "A", "p", "B", time=TimeStamp(2012), start=TimeStamp(2009), end=TimeStamp(2010))


def test_json_lines_dump_keeps_ids(tmp_path, sample_store):
    path = tmp_path / "facts.jsonl"
    dump_facts(sample_store, path)
    reloaded = load_tkg(path, TkgFormat.JSON_LINES)
    assert [f.key() for f in reloaded] == [f.key() for f in sample_store]
    assert reloaded.content_hash() == sample_store.content_hash()


def test_json_lines_rejects_mixed_time_fields(tmp_path):
    path = tmp_path / "facts.jsonl"
    path.write_text(json.dumps({"subject": "A", "predicate": "p", "object": "B",
                                "time": "2009", "start": "2008"}) + "\n", encoding="utf-8")
    with pytest.raises(MalformedLine):
        load_tkg(path, "json-lines")


def test_missing_file_raises(tmp_path):
    with pytest.raises(TkgIoError):
        load_tkg(tmp_path / "absent.tsv")


def test_unknown_fact_id_warns(sample_store):
    with pytest.warns(UserWarning, match="Fact not found"):
        assert sample_store.get_fact(999) is None


def test_facts_about_covers_both_roles(sample_store):
    ids = {f.fact_id for f in sample_store.facts_about("Wen Jiabao")}
    assert ids == {3, 4}


def test_content_hash_is_stable():
    assert load_tkg(SAMPLE_KG).content_hash() == load_tkg(SAMPLE_KG).content_hash()


@pytest.mark.parametrize("record", [
    {"subject": 5, "predicate": "Make a visit", "object": "China", "time": "2009"},
    {"subject": "Iran", "predicate": ["Make a visit"], "object": "China", "time": "2009"},
    {"subject": "Iran", "predicate": "Make a visit", "object": "   ", "time": "2009"},
    {"subject": "Iran", "predicate": "Make a visit", "object": "China", "time": 2009},
])
def test_json_lines_fields_must_be_strings(tmp_path, record):
    path = tmp_path / "facts.jsonl"
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    with pytest.raises(MalformedLine):
        load_tkg(path, TkgFormat.JSON_LINES)


def test_lenient_loading_skips_non_string_fields(tmp_path):
    path = tmp_path / "facts.jsonl"
    path.write_text("\n".join([
        json.dumps({"subject": 5, "predicate": "Make a visit", "object": "China", "time": "2009"}),
        json.dumps({"subject": "Iran", "predicate": "Make a visit", "object": "China", "time": "2009"}),
    ]) + "\n", encoding="utf-8")
    with pytest.warns(UserWarning, match="malformed"):
        store = load_tkg(path, TkgFormat.JSON_LINES, lenient=True)
    assert [f.subject for f in store] == ["Iran"]
    assert store.report.skipped == 1


def test_fact_fields_are_checked_on_construction():
    with pytest.raises(ValueError):
        TemporalFact(0, 5, "p", "B", time=TimeStamp(2009))
    with pytest.raises(ValueError):
        TemporalFact(0, "A", "p", " ", time=TimeStamp(2009))


def test_undecodable_line_is_a_malformed_line(tmp_path):
    path = tmp_path / "kg.tsv"
    path.write_bytes(b"A\tMake a visit\tB\t2009-05-12\n\xff\xfe\tr\tC\t2010\nC\tHost a visit\tD\t2010\n")
    with pytest.raises(MalformedLine) as excinfo:
        load_tkg(path)
    assert excinfo.value.line_no == 2
    with pytest.warns(UserWarning, match="malformed"):
        store = load_tkg(path, lenient=True)
    assert [f.subject for f in store] == ["A", "C"]
    assert store.report.skipped == 1


def test_store_is_read_only_after_load(sample_store):
    before = sample_store.content_hash()
    fact = sample_store.get_fact(0)
    with pytest.raises(FrozenInstanceError):
        fact.subject = "Someone else"
    with pytest.raises(TypeError):
        sample_store.facts[0] = fact
    with pytest.raises(AttributeError):
        sample_store.entities.add("Someone else")
    with pytest.raises(AttributeError):
        sample_store.predicates.discard("Make a visit")
    with pytest.raises(FrozenInstanceError):
        sample_store.report.loaded = 0
    assert sample_store.content_hash() == before


def test_entities_and_predicates_cover_every_fact(sample_store):
    for fact in sample_store:
        assert {fact.subject, fact.object} <= sample_store.entities
        assert fact.predicate in sample_store.predicates
    assert len(TkgStore()) == 0
