"""
Shared fixtures: the worked-example knowledge graph, a keyword-programmed
chat transport and gateway factories.

Live-mode gateways built here never touch the network: their transport
answers from rules keyed on the template id and the question the prompt
ends with. Recording a run through such a gateway and exporting its
fixtures gives scripted runs that replay the same responses.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from src.core.embedders import HashedNgramEmbedder
from src.core.facts import TemporalFact, TkgStore, load_tkg
from src.core.retriever import FactRetriever
from src.core.timestamp import TimeStamp
from src.core.verbalizer import load_surface_forms
from src.llm.gateway import LlmGateway, LlmMode, TransportError
from src.llm.prompts import AGGREGATE, DECOMPOSE_MULTIPLE, SOLVE_HISTORICAL, SOLVE_RELEVANT

FIXTURES_DIR = Path(__file__).parent / "fixtures"
SAMPLE_KG = FIXTURES_DIR / "sample_kg.tsv"
SAMPLE_SURFACE_FORMS = FIXTURES_DIR / "surface_forms.json"
SAMPLE_DATASET = FIXTURES_DIR / "sample_questions.jsonl"

SAMPLE_QUESTION = "Before Georgios Papandreou, who was the last to visit China?"
SAMPLE_DECOMPOSITION = json.dumps({SAMPLE_QUESTION: [
    "When did Georgios Papandreou visit China?",
    "Who visited China before #1?",
    "Who was the last one among them?",
]})
SAMPLE_RULES = [
    (DECOMPOSE_MULTIPLE, SAMPLE_QUESTION, SAMPLE_DECOMPOSITION),
    (SOLVE_HISTORICAL, "When did Georgios Papandreou visit China?",
     "Georgios Papandreou made a visit to China in 2009-05-12. So the answer is: 2009-05-12"),
    (SOLVE_HISTORICAL, "Who visited China before 2009-05-12?",
     "Several visits to China happened before 2009-05-12. So the answer is: "
     "[Stephen W. Bosworth 2009-05-08], [Wen Jiabao 2009-05-08], [France 2009-05-07], "
     "[Stephen W. Bosworth 2009-03-11]"),
    (SOLVE_RELEVANT, "Who was the last one among them?",
     "The latest visits are on 2009-05-08. So the answer is: "
     "[Stephen W. Bosworth 2009-05-08], [Wen Jiabao 2009-05-08]"),
    (SOLVE_HISTORICAL, SAMPLE_QUESTION,
     "Aristovoulos Spiliotopoulos made a visit to China in 2008-04-01. "
     "So the answer is: [Aristovoulos Spiliotopoulos 2008-04-01]"),
]


def query_of(request):
    """Returns the question a rendered prompt ends with."""
    for line in reversed(request.user_content.splitlines()):
        if line.startswith("Q: "):
            return line[len("Q: "):]
        if line.startswith("Question: "):
            return line[len("Question: "):]
    return ""


def generic_reply(request, question):
    """Leaf-only decompositions and a fixed entity answer."""
    if request.template_id.startswith("decompose"):
        return json.dumps({question: []})
    if request.template_id == AGGREGATE:
        return "So the answer is: Unknown"
    return "So the answer is: China"


class KeywordTransport:
    """
    Chat transport double.

    :param rules: ``(template_id or None, needle, reply)`` triples; the first
        rule whose template matches and whose needle occurs in the prompt's
        question wins. ``reply`` may be a callable taking the question.
    :param default: Reply for unmatched requests, a string or a callable
        ``(request, question) -> str``; None makes unmatched requests fail
        the test.
    """

    def __init__(self, rules=(), default=None):
        self.rules = list(rules)
        self.default = default
        self.requests = []

    def chat(self, request):
        self.requests.append(request)
        question = query_of(request)
        for template_id, needle, reply in self.rules:
            if template_id is not None and template_id != request.template_id:
                continue
            if needle in question:
                return reply(question) if callable(reply) else reply
        if self.default is None:
            raise AssertionError(f"unexpected {request.template_id} request for {question!r}")
        return self.default(request, question) if callable(self.default) else self.default

    @property
    def calls(self):
        return len(self.requests)


class FlakyTransport:
    """Raises ``failures`` transport errors, then answers ``reply``."""

    def __init__(self, failures, reply="So the answer is: China", error=None):
        self.failures = failures
        self.reply = reply
        self.error = error or TransportError("service unavailable", status=503)
        self.calls = 0

    def chat(self, request):
        self.calls += 1
        if self.calls <= self.failures:
            raise self.error
        return self.reply


@pytest.fixture
def sample_store():
    return load_tkg(SAMPLE_KG)


@pytest.fixture
def surface_forms():
    return load_surface_forms(SAMPLE_SURFACE_FORMS)


@pytest.fixture
def sample_retriever(sample_store, surface_forms):
    return FactRetriever.build(sample_store, HashedNgramEmbedder(), surface_forms=surface_forms)


@pytest.fixture
def sample_transport():
    return KeywordTransport(SAMPLE_RULES)


@pytest.fixture
def live_gateway():
    """Factory for live gateways over a transport double, with no backoff sleeping."""
    def _factory(transport, cache_dir=None, **kwargs):
        kwargs.setdefault("sleep", lambda seconds: None)
        return LlmGateway(LlmMode.LIVE, transport=transport, cache_dir=cache_dir, **kwargs)
    return _factory


@pytest.fixture
def scripted_gateway():
    """Factory for scripted gateways from a fixture map or an exported fixture file."""
    def _factory(fixtures):
        if isinstance(fixtures, (str, Path)):
            return LlmGateway.from_fixture_file(fixtures)
        return LlmGateway(LlmMode.SCRIPTED, fixtures=fixtures)
    return _factory


def make_synthetic_store(n_facts, seed=0):
    """Random point facts over a small vocabulary of entities and predicates."""
    rng = np.random.default_rng(seed)
    entities = [
        "China", "France", "Iran", "Japan", "South Korea", "Kazakhstan", "Greece", "Turkey", "Thailand",
        "Russia", "Brazil", "Mexico", "Canada", "Egypt", "Nigeria", "Kenya", "Germany", "Italy", "Spain",
        "Poland", "Sweden", "Norway", "Chile", "Peru", "Colombia", "Vietnam", "Indonesia", "Malaysia",
        "Australia", "New Zealand", "Wen Jiabao", "Barack Obama", "Xi Jinping", "Angela Merkel",
        "Nicolas Sarkozy", "Gordon Brown", "Lula da Silva", "Kevin Rudd", "Taro Aso", "Lee Myung-bak",
        "Abdullah Gul", "Hamid Karzai", "Ban Ki-moon", "Hu Jintao", "Dmitry Medvedev", "Silvio Berlusconi",
        "Jose Zapatero", "Stephen Harper", "Felipe Calderon", "Hosni Mubarak", "Umaru Yaradua",
        "Mwai Kibaki", "Michelle Bachelet", "Alan Garcia", "Alvaro Uribe", "Nguyen Tan Dung",
        "Susilo Yudhoyono", "Najib Razak", "Kim Jong-il", "Recep Erdogan",
    ]
    predicates = ["Make a visit", "Host a visit", "Sign formal agreement", "Criticize or denounce",
                  "Express intent to cooperate", "Consult", "Praise or endorse"]
    facts, seen = [], set()
    while len(facts) < n_facts:
        s, o = rng.choice(len(entities), size=2, replace=False)
        p = int(rng.integers(len(predicates)))
        stamp = TimeStamp(int(rng.integers(2005, 2016)), int(rng.integers(1, 13)), int(rng.integers(1, 29)))
        key = (int(s), p, int(o), stamp)
        if key in seen:
            continue
        seen.add(key)
        facts.append(TemporalFact(len(facts), entities[s], predicates[p], entities[o], time=stamp))
    return TkgStore(facts)


@pytest.fixture
def synthetic_store():
    def _factory(n_facts=200, seed=0):
        return make_synthetic_store(n_facts, seed)
    return _factory
