"""
Prompt templates and their rendering.

Five built-in templates drive the pipeline: two decomposition prompts
(question-answer style), two solver prompts (historical facts and
relevant candidate facts) and the aggregation prompt. The few-shot
examples are kept verbatim, including the known date slip in the
"Japan on 19 April 2005" decomposition example.
"""

import json
from dataclasses import dataclass, field
from enum import Enum

from ..core.errors import UnknownTemplate

DECOMPOSE_SIMPLE = "decompose-simple"
DECOMPOSE_MULTIPLE = "decompose-multiple"
SOLVE_HISTORICAL = "solve-historical"
SOLVE_RELEVANT = "solve-relevant"
AGGREGATE = "aggregate"

DEFAULT_SYSTEM_ROLE = "You are an expert in temporal knowledge graph question answering."


class PromptStyle(Enum):
    QUESTION_ANSWER = "qa"
    HISTORICAL_FACTS = "historical"
    RELEVANT_FACTS = "relevant"
    CANDIDATES = "candidates"


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    instruction: str
    few_shot_examples: tuple = ()
    style: PromptStyle = PromptStyle.QUESTION_ANSWER
    system_role: str = DEFAULT_SYSTEM_ROLE


def _facts_block(style, question, context):
    context = list(context or [])
    if style is PromptStyle.HISTORICAL_FACTS:
        lines = [f"{text.rstrip('.')}." for text in context]
        return "Historical facts:\n" + "\n".join(lines) + f"\nQuestion: {question}"
    if style is PromptStyle.RELEVANT_FACTS:
        return f"Relevant facts: {json.dumps(context, ensure_ascii=False)}\nQuestion: {question}"
    lines = "\n".join(context)
    return f"Question: {question}\nCandidate answer:\n{lines}"


def _answer_label(style):
    return "Output:" if style is PromptStyle.CANDIDATES else "Answer:"


def render_prompt(template, question, context=None):
    """
    Renders a template for one question.

    The layout is always instruction, then every few-shot example in order,
    then the query block. Question-answer templates end with
    ``Q: <question>\\nA:``; the fact templates end with their facts (or
    candidate) block followed by ``Answer:`` / ``Output:``.

    :param template: Template to render.
    :type template: :class:`PromptTemplate`
    :param question: Question text.
    :type question: str
    :param context: Fact statements, relevant facts or candidate lines.
    :type context: list[str], optional
    :return: Deterministic prompt text.
    :rtype: str
    """
    parts = ["Instruction:", template.instruction.strip(), ""]
    if template.few_shot_examples:
        parts.append("Here are a few examples:")
        for example_input, example_output in template.few_shot_examples:
            if template.style is PromptStyle.QUESTION_ANSWER:
                parts.append(f"Q: {example_input}\nA: {example_output}")
            else:
                parts.append(f"{example_input}\n{_answer_label(template.style)} {example_output}")
            parts.append("")

    if template.style is PromptStyle.QUESTION_ANSWER:
        parts.append(f"Q: {question}\nA:")
    else:
        parts.append(f"{_facts_block(template.style, question, context)}\n{_answer_label(template.style)}")
    return "\n".join(parts)


class PromptRegistry:
    """Lookup table of prompt templates by id."""

    def __init__(self, templates=()):
        self._templates = {}
        for template in templates:
            self.register(template)

    def register(self, template):
        self._templates[template.template_id] = template
        return template

    def get(self, template_id):
        if template_id not in self._templates:
            raise UnknownTemplate(f"no prompt template registered as {template_id!r}")
        return self._templates[template_id]

    def __contains__(self, template_id):
        return template_id in self._templates

    def ids(self):
        return sorted(self._templates)


######################## BUILT-IN TEMPLATES ##############################
_SIMPLE_INSTRUCTION = (
    "Convert the following question into a JSON object where the question is the key and "
    "the value is an empty list. Do not include any explanation or extra text. Just return the JSON.\n"
    "Just return the modified question in JSON format with an empty list as its value."
)

_SIMPLE_EXAMPLES = (
    ("Who visited France in 2009-05?", '{"Who visited France in 2009-05?": []}'),
    ("When did Qatar pay a visit to Barack Obama?", '{"When did Qatar pay a visit to Barack Obama?": []}'),
    ("Who applied for Iran in January 2010?", '{"Who applied for Iran in 2010-01?": []}'),
    (
        "Which country negotiated with Japan on 19 April 2005?",
        '{"Which country negotiated with Japan on 2002-04-19?": []}',
    ),
    ("Who visited Japan in April 2012?", '{"Who visited Japan in 2012-04?": []}'),
    ("In May 2009, who signed an agreement with Iran?", '{"In 2009-05, who signed an agreement with Iran?": []}'),
    ("Who accused Iran in 2015?", '{"Who accused Iran in 2015?": []}'),
    ("On 19 March 2006, who threatened Iran?", '{"On 2006-03-19, who threatened Iran?": []}'),
    ("Who visited Guatemala on 7 July 2007?", '{"Who visited Guatemala on 2007-07-07?": []}'),
)

_MULTIPLE_INSTRUCTION = (
    'You are an expert specializing in dealing with problems containing the keywords "before/after". '
    "You need to read the question carefully.\n\n"
    '1.If the problem involves a situation like "before December 13, 2005" with a "before+ timestamp", '
    "there is no need to decompose the original problem. Just convert the question into a JSON object "
    "where the question is the key and the value is an empty list.\n\n"
    '2.If the problem involves the situation of a "before+ entity" like "before Japan", the original '
    "problem needs to be decomposed into sub-problems. First, generate an explicit sub-question to "
    'determine the time (e.g., "When did Iran…?"). When a sub-question is logically depends on the '
    "answer to a previous one, use placeholders (e.g., #1) to refer to that answer. Return a valid JSON "
    "object representing the question tree. Each key is a parent question, and its value is a list of "
    "sub-questions."
)

_MULTIPLE_EXAMPLES = (
    (
        "Who rejected Iran before the citizens of State Actor did?",
        '{"Who rejected Iran before the citizens of State Actor did?": '
        '["When did the citizens of State Actor reject Iran?", "Who rejected Iran before #1?"]}',
    ),
    (
        "After Japan, who made South Korea suffer from conventional military forces?",
        '{"After Japan, who made South Korea suffer from conventional military forces?": '
        '["When did Japan make South Korea suffer from conventional military forces?", '
        '"Who make South Korea suffer from conventional military forces after #1?"]}',
    ),
    ("Which country did Qatar appeal to after April 2011?", '{"Which country did Qatar appeal to after 2011-04?": []}'),
    (
        "Before 14 October 2015, who made Burundi suffer from conventional military forces?",
        '{"Before 2015-10-14, who made Burundi suffer from conventional military forces?": []}',
    ),
    (
        "Who had a telephone conversation with Japan after November 2005?",
        '{"Who had a telephone conversation with Japan after 2005-11?": []}',
    ),
    ("Who negotiated with Colombia before 22 December 2010?", '{"Who negotiated with Colombia before 2010-12-22?": []}'),
    (
        "With which country did Qatar sign formal agreements before 15 January 2008?",
        '{"With which country did Qatar sign formal agreements before 2008-01-15?": []}',
    ),
    (
        "After November 2007, who wanted to engage in diplomatic cooperation with Timor-Leste?",
        '{"After 2007-11, who wanted to engage in diplomatic cooperation with Timor-Leste?": []}',
    ),
    (
        "Before 24 January 2005, who wanted to establish diplomatic cooperation with the Kuomintang?",
        '{"Before 2005-01-24, who wanted to establish diplomatic cooperation with the Kuomintang?": []}',
    ),
    ("Who negotiated with Bolivia after June 2007?", '{"Who negotiated with Bolivia after 2007-06?": []}'),
)

_HISTORICAL_INSTRUCTION = (
    "Based on the historical facts, please answer the given question clearly in the following format: "
    "...So the answer is: <final concise answer>.\n\n"
    '1.If the question asks for a specific year (e.g., "Which year", "In which year", "the exact year", '
    'etc.), then return the answer in "yyyy" format. Just return the most appropriate timestamp as the answer.\n\n'
    '2.If the question asks for a specific month (e.g., "Which month", "In what month", "the exact month", '
    'etc.), then return the answer in "yyyy-mm" format, including the year and the month. Just return the '
    "most appropriate timestamp as the answer.\n\n"
    '3.If the question asks for a specific date (e.g., contains keywords like "When", "What day", '
    '"the exact date", etc.), return the answer in "yyyy-mm-dd" format. Just return the most appropriate '
    "timestamp as the answer.\n\n"
    '4.If the question asks for a set of entities (e.g., contains keywords like "who", "which country", '
    "etc.), and multiple sources in the context offer valid answers, return the union of all correct, "
    "non-duplicate entities and attached timestamp in a list format."
)

_HISTORICAL_EXAMPLES = (
    (
        "Historical facts:\n"
        "Barack Obama Reject Party Member (United Kingdom) 2008-09-23.\n"
        "Barack Obama Reject Party Member (United Kingdom) 2008-09-23.\n"
        "Barack Obama Make statement Party Member (United Kingdom) 2008-11-08.\n"
        "Barack Obama Make statement Party Member (United Kingdom) 2008-11-08.\n"
        "Barack Obama Express intent to meet or negotiate Party Member (United Kingdom) 2009-03-10.\n"
        "Zawahiri Reject Barack Obama 2009-08-04.\n"
        "Question: In which year did Barack Obama reject the party member of United Kingdom?",
        "The rejection event occurred on 2008-09-23, so the year is 2008. So the answer is: 2008.",
    ),
    (
        "Historical facts:\n"
        "Media Personnel (Somalia) Praise or endorse Cabinet / Council of Ministers / Advisors (Somalia) 2012-11-27.\n"
        "Media Personnel (Somalia) Praise or endorse Cabinet / Council of Ministers / Advisors (Somalia) 2015-01-12.\n"
        "Media Personnel (Somalia) Make statement African Union 2007-10-08.\n"
        "Media Personnel (Somalia) Make statement African Union 2007-01-17.\n"
        "Media Personnel (Somalia) Make statement African Union 2012-11-18.\n"
        "Cabinet / Council of Ministers / Advisors (Somalia) Praise or endorse Media Personnel (Somalia) 2011-11-28.\n"
        "Media Personnel (Somalia) Make statement African Union 2007-06-15.\n"
        "Question: When did Somalia's media personnel first commend Somalia's council of ministers?",
        "We are asked to find the first time Somalia's media personnel commended (i.e., praised or endorsed) "
        "Somalia's Cabinet / Council of Ministers / Advisors. From the historical facts: Media Personnel "
        "(Somalia) Praise or endorse Cabinet / Council of Ministers / Advisors (Somalia) on: 2012-11-27 and "
        "2015-01-12. Among these, the earliest instance is 2012-11-27. So the answer is: 2012-11-27.",
    ),
    (
        "Historical facts:\n"
        "Agence France-Presse Demand China in 2010-05-26.\n"
        "Agence France-Presse Make an appeal or request China in 2007-01-08.\n"
        "China Appeal for military aid Agence France-Presse in 2008-03-26.\n"
        "France Make an appeal or request China in 2012-06-05.\n"
        "France Demand China in 2008-06-11.\n"
        "Question: Could you tell me the exact month when Agence France-Presse appealed to China?",
        "So the answer is: 2007-01",
    ),
)

_RELEVANT_INSTRUCTION = (
    "Based on the Relevant facts, please answer the given question clearly in the following format: "
    "...So the answer is: <final concise answer>.\n\n"
    'Each question provides a series of relevant facts, including "entity + timestamp" pairs. You need to '
    "choose the earliest or latest entity as the answer based on the order in which the events occurred."
)

_RELEVANT_EXAMPLES = (
    (
        'Relevant facts: ["China 2006-01-20", "China 2006-10-30", "Vietnam 2008-04-30"]\n'
        "Question: Which country was the last one among them?",
        "The last country among the relevant facts, based on the timestamps, is Vietnam. "
        "So the answer is: Vietnam 2008-04-30.",
    ),
)

_AGGREGATE_INSTRUCTION = (
    "You are given a question and multiple candidate answers from sources A, B, and C.\n\n"
    "Follow these strict rules to choose the best answer: If only sources A and B are available, prefer "
    "B's answer unless it is \"Unknown\" or \"Error\", in which case choose A. If all three sources A, B, "
    "and C are available, prefer C's answer unless it is \"Unknown\" or \"Error\", then fall back to B, "
    "and if B is also invalid, fall back to A."
)

_AGGREGATE_EXAMPLES = (
    (
        "Question: When did the citizens of Africa express their intention to establish diplomatic "
        "cooperation with Vietnam?\nCandidate answer:\nsource A: 2012-09-04\nsource B: 2012-09-04\n"
        "Source C: Unknown",
        "So the answer is: 2012-09-04",
    ),
    (
        "Question: Who was the first to praise Juan Carlos I after 2006-02-22?\nCandidate answer:\n"
        "source A: Jorge Briz Abularach\nsource B: Unknown\nSource C: House of Representatives (Uruguay)",
        "So the answer is: House of Representatives (Uruguay)",
    ),
    (
        "Question: Who rejected the Prime Minister of India after 2012-01-03?\nCandidate answer:\n"
        "source A: Sri Lanka\nsource B: China",
        "So the answer is: China",
    ),
)


def default_registry():
    """Builds a registry holding the five built-in templates."""
    return PromptRegistry([
        PromptTemplate(DECOMPOSE_SIMPLE, _SIMPLE_INSTRUCTION, _SIMPLE_EXAMPLES),
        PromptTemplate(DECOMPOSE_MULTIPLE, _MULTIPLE_INSTRUCTION, _MULTIPLE_EXAMPLES),
        PromptTemplate(SOLVE_HISTORICAL, _HISTORICAL_INSTRUCTION, _HISTORICAL_EXAMPLES, PromptStyle.HISTORICAL_FACTS),
        PromptTemplate(SOLVE_RELEVANT, _RELEVANT_INSTRUCTION, _RELEVANT_EXAMPLES, PromptStyle.RELEVANT_FACTS),
        PromptTemplate(AGGREGATE, _AGGREGATE_INSTRUCTION, _AGGREGATE_EXAMPLES, PromptStyle.CANDIDATES),
    ])


DEFAULT_PROMPTS = default_registry()
