import pytest

from src.core.timestamp import TimeStamp
from src.reasoning.answer import Answer, AnswerKind, AnswerSource, extract_answer, parse_answer_text


def test_extracts_text_after_the_final_anchor():
    reply = ("So the answer is: maybe France? Looking again at the facts, "
             "the latest visit was Wen Jiabao. So the answer is: Wen Jiabao.")
    answer = extract_answer(reply)
    assert answer.kind is AnswerKind.ENTITY
    assert answer.value == "Wen Jiabao"
    assert answer.chain == reply


def test_missing_anchor_is_unknown():
    answer = extract_answer("I could not find anything relevant.")
    assert answer.kind is AnswerKind.UNKNOWN
    assert not answer.is_valid
    assert answer.chain == "I could not find anything relevant."


@pytest.mark.parametrize("text, kind, rendered", [
    ("2009-05-12", AnswerKind.TIMESTAMP, "2009-05-12"),
    ("2008.", AnswerKind.TIMESTAMP, "2008"),
    ("[Stephen W. Bosworth 2009-05-08], [Wen Jiabao 2009-05-08]", AnswerKind.ENTITY_TIME_LIST,
     "[Stephen W. Bosworth 2009-05-08], [Wen Jiabao 2009-05-08]"),
    ("Vietnam 2008-04-30.", AnswerKind.ENTITY_TIME_LIST, "[Vietnam 2008-04-30]"),
    ("House of Representatives (Uruguay)", AnswerKind.ENTITY, "House of Representatives (Uruguay)"),
    ("**China**", AnswerKind.ENTITY, "China"),
    ("Unknown", AnswerKind.UNKNOWN, "Unknown"),
    ("Error", AnswerKind.ERROR, "Error"),
    ("", AnswerKind.UNKNOWN, "Unknown"),
])
def test_answer_shapes(text, kind, rendered):
    answer = parse_answer_text(text)
    assert answer.kind is kind
    assert answer.render() == rendered


def test_first_line_after_anchor_only():
    answer = extract_answer("So the answer is: 2010-03\nThis follows from the March visit.")
    assert answer.value == TimeStamp(2010, 3)


def test_validity():
    assert Answer(AnswerKind.ENTITY, "China").is_valid
    assert not Answer(AnswerKind.ENTITY, "unknown").is_valid
    assert not Answer.error().is_valid
    with pytest.raises(ValueError):
        Answer(AnswerKind.ENTITY_TIME_LIST, ())
    with pytest.raises(ValueError):
        Answer(AnswerKind.UNKNOWN, "China")


def test_list_helpers_and_provenance():
    answer = parse_answer_text("[Wen Jiabao 2009-05-08], [France 2009-05-07]", source=AnswerSource.CHILD)
    assert answer.entities() == ["Wen Jiabao", "France"]
    assert answer.list_items() == ["Wen Jiabao 2009-05-08", "France 2009-05-07"]
    moved = answer.with_source(AnswerSource.AGGREGATED)
    assert moved.source is AnswerSource.AGGREGATED
    assert moved.value == answer.value
    assert Answer.from_dict(moved.to_dict()) == moved
