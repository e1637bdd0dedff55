import numpy as np
import pytest

from src.reasoning.time_standardizer import standardize_time


@pytest.mark.parametrize("question, expected", [
    ("Who applied for Iran in January 2010?", "Who applied for Iran in 2010-01?"),
    ("Which country negotiated with Japan on 19 April 2005?", "Which country negotiated with Japan on 2005-04-19?"),
    ("Who visited Japan in April 2012?", "Who visited Japan in 2012-04?"),
    ("In May 2009, who signed an agreement with Iran?", "In 2009-05, who signed an agreement with Iran?"),
    ("On 19 March 2006, who threatened Iran?", "On 2006-03-19, who threatened Iran?"),
    ("Who visited Guatemala on 7 July 2007?", "Who visited Guatemala on 2007-07-07?"),
    ("Which country did Qatar appeal to after April 2011?", "Which country did Qatar appeal to after 2011-04?"),
    ("Before 14 October 2015, who made Burundi suffer from conventional military forces?",
     "Before 2015-10-14, who made Burundi suffer from conventional military forces?"),
    ("Who negotiated with Colombia before 22 December 2010?", "Who negotiated with Colombia before 2010-12-22?"),
    ("After November 2007, who wanted to engage in diplomatic cooperation with Timor-Leste?",
     "After 2007-11, who wanted to engage in diplomatic cooperation with Timor-Leste?"),
    ("Who visited China on May 8, 2009?", "Who visited China on 2009-05-08?"),
    ("Who hosted Iran on the 3rd of Sept 2009?", "Who hosted Iran on the 2009-09-03?"),
])
def test_rewrites_date_phrases(question, expected):
    assert standardize_time(question) == expected


@pytest.mark.parametrize("question", [
    "Who visited France in 2009-05?",
    "Who accused Iran in 2015?",
    "When did Qatar pay a visit to Barack Obama?",
    "Who visited Iran on 31 February 2010?",
    "Who may visit China in 2010?",
])
def test_leaves_other_text_alone(question):
    assert standardize_time(question) == question


def test_idempotent_on_random_questions():
    rng = np.random.default_rng(7)
    vocabulary = ["Who", "visited", "China", "on", "of", "before", "after", "the", ",", "Iran", "in", "May",
                  "January", "Feb", "Sept", "December", "3rd", "21st", "7", "19", "31", "2009", "2010",
                  "1999", "2009-05", "2010-01-15", "12", "4", "June"]
    for _ in range(1000):
        words = rng.choice(vocabulary, size=int(rng.integers(1, 12)))
        question = " ".join(str(w) for w in words) + "?"
        once = standardize_time(question)
        assert standardize_time(once) == once, question
