""" Turns temporal facts into the natural-language statements used for retrieval and prompts. """

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, TkgIoError


@dataclass(frozen=True)
class VerbalizedFact:
    text: str
    fact_id: int


def load_surface_forms(path):
    """
    Loads an optional predicate surface-form map.

    :param path: JSON file holding an object ``{predicate: rendered phrase}``.
    :type path: str or :class:`pathlib.Path`
    :return: Mapping used by :func:`verbalize`.
    :rtype: dict[str, str]
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise TkgIoError(f"cannot read surface forms {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"surface forms in {path} are not valid UTF-8 JSON: {exc}") from exc
    if not isinstance(data, dict) or not all(
        isinstance(k, str) and isinstance(v, str) and v.strip() for k, v in data.items()
    ):
        raise ConfigError(f"surface forms in {path} must map predicate strings to non-empty phrases")
    return data


def verbalize(fact, surface_forms=None):
    """
    Renders one fact with the point or interval template.

    Point facts become ``<subject> <predicate> <object> in <time>`` and
    interval facts ``<subject> <predicate> <object> from <start> to <end>``.
    Predicates are used verbatim unless ``surface_forms`` maps them.

    :param fact: Fact to render.
    :type fact: :class:`src.core.facts.TemporalFact`
    :param surface_forms: Optional predicate -> phrase map.
    :type surface_forms: dict[str, str], optional
    :rtype: :class:`VerbalizedFact`
    """
    predicate = fact.predicate
    if surface_forms:
        predicate = surface_forms.get(predicate, predicate)
    head = " ".join((fact.subject, predicate, fact.object))
    if fact.is_interval:
        text = f"{head} from {fact.start.render()} to {fact.end.render()}"
    else:
        text = f"{head} in {fact.time.render()}"
    return VerbalizedFact(text=text, fact_id=fact.fact_id)


def verbalize_store(store, surface_forms=None):
    """Verbalizes every fact of a store, ordered by fact id."""
    return [verbalize(fact, surface_forms) for fact in store]
